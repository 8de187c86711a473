use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::{CsiMode, ExperimentConfig, OutputFormat};
use crate::clustering::{ClusterPolicy, EventKind, RsapCriterion};
use crate::downlink::PrecoderMode;
use crate::error::{Error, Result};
use crate::stats;

pub const FORMAT_TAG: &str = "leo-dmimo-results";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeRecord {
    pub drop: usize,
    pub user: usize,
    pub policy: ClusterPolicy,
    pub criterion: RsapCriterion,
    pub mode: PrecoderMode,
    pub csi: CsiMode,
    pub cluster_size: usize,
    pub sinr: f64,
    pub se: f64,
    pub coherent_gain: f64,
    pub beamforming_uncertainty: f64,
    pub interference: f64,
    pub noise: f64,
    pub se_std_error: Option<f64>,
    pub low_precision: bool,
}

/// Cluster size of one user at the start of a drop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizeRecord {
    pub drop: usize,
    pub user: usize,
    pub policy: ClusterPolicy,
    pub criterion: RsapCriterion,
    pub size: usize,
}

/// User-centric cluster sizes pooled over every epoch of a drop;
/// `counts[s]` is the number of (epoch, user) samples of size `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterHistogramRecord {
    pub drop: usize,
    pub criterion: RsapCriterion,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub drop: usize,
    pub user: usize,
    pub criterion: RsapCriterion,
    pub start: f64,
    pub duration: f64,
    pub rsap: usize,
    pub service_time_at_start: f64,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub drop: usize,
    pub criterion: RsapCriterion,
    pub time: f64,
    pub event: EventKind,
    pub user: usize,
    pub satellite: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Record {
    Header(Header),
    Se(SeRecord),
    ClusterSize(ClusterSizeRecord),
    ClusterHistogram(ClusterHistogramRecord),
    Coverage(CoverageRecord),
    Event(EventRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub header: Header,
    pub se: Vec<SeRecord>,
    pub cluster_sizes: Vec<ClusterSizeRecord>,
    pub histograms: Vec<ClusterHistogramRecord>,
    pub coverage: Vec<CoverageRecord>,
    pub events: Vec<EventRecord>,
}

impl ExperimentResult {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            header: Header {
                format: FORMAT_TAG.into(),
                version: crate::VERSION.into(),
                seed: config.monte_carlo.seed,
                config: config.clone(),
            },
            se: Vec::new(),
            cluster_sizes: Vec::new(),
            histograms: Vec::new(),
            coverage: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.header.config
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |r: Record| {
            out.push_str(&serde_json::to_string(&r).expect("records serialize"));
            out.push('\n');
        };
        line(Record::Header(self.header.clone()));
        self.se.iter().for_each(|r| line(Record::Se(r.clone())));
        self.cluster_sizes
            .iter()
            .for_each(|r| line(Record::ClusterSize(r.clone())));
        self.histograms
            .iter()
            .for_each(|r| line(Record::ClusterHistogram(r.clone())));
        self.coverage.iter().for_each(|r| line(Record::Coverage(r.clone())));
        self.events.iter().for_each(|r| line(Record::Event(r.clone())));
        out
    }

    /// Parses a results file. The first non-blank line must be the header.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut result: Option<Self> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(raw).map_err(|e| Error::ResultFormat {
                line,
                message: e.to_string(),
            })?;
            match (&mut result, record) {
                (None, Record::Header(h)) => {
                    if h.format != FORMAT_TAG {
                        return Err(Error::ResultFormat {
                            line,
                            message: format!("unknown format tag {:?}", h.format),
                        });
                    }
                    let mut r = Self::empty(&h.config);
                    r.header = h;
                    result = Some(r);
                }
                (None, _) => {
                    return Err(Error::ResultFormat {
                        line,
                        message: "expected header record first".into(),
                    })
                }
                (Some(_), Record::Header(_)) => {
                    return Err(Error::ResultFormat {
                        line,
                        message: "duplicate header record".into(),
                    })
                }
                (Some(r), Record::Se(x)) => r.se.push(x),
                (Some(r), Record::ClusterSize(x)) => r.cluster_sizes.push(x),
                (Some(r), Record::ClusterHistogram(x)) => r.histograms.push(x),
                (Some(r), Record::Coverage(x)) => r.coverage.push(x),
                (Some(r), Record::Event(x)) => r.events.push(x),
            }
        }
        result.ok_or(Error::ResultFormat {
            line: 0,
            message: "no header record".into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let file = if p.is_dir() {
            p.join(RESULTS_FILE)
        } else {
            p.to_path_buf()
        };
        Self::from_jsonl(&std::fs::read_to_string(file)?)
    }

    /// Writes the configured formats into `dir` and returns the file paths.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for f in &self.header.config.output.formats {
            let (name, body) = match f {
                OutputFormat::Jsonl => (RESULTS_FILE, self.to_jsonl()),
                OutputFormat::Csv => (SUMMARY_FILE, summary_csv(self)),
            };
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }

    /// SE samples keyed by `policy/criterion/mode/csi`.
    pub fn se_groups(&self) -> BTreeMap<String, Vec<f64>> {
        let mut g: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &self.se {
            g.entry(se_label(r)).or_default().push(r.se);
        }
        g
    }

    pub fn se_samples(
        &self,
        policy: ClusterPolicy,
        criterion: RsapCriterion,
        mode: PrecoderMode,
        csi: CsiMode,
    ) -> Vec<f64> {
        self.se
            .iter()
            .filter(|r| r.policy == policy && r.criterion == criterion && r.mode == mode && r.csi == csi)
            .map(|r| r.se)
            .collect()
    }

    pub fn cluster_size_samples(&self, policy: ClusterPolicy, criterion: RsapCriterion) -> Vec<f64> {
        self.cluster_sizes
            .iter()
            .filter(|r| r.policy == policy && r.criterion == criterion)
            .map(|r| r.size as f64)
            .collect()
    }

    pub fn coverage_samples(&self, criterion: RsapCriterion) -> Vec<f64> {
        self.coverage
            .iter()
            .filter(|r| r.criterion == criterion)
            .map(|r| r.duration)
            .collect()
    }

    pub fn metric_groups(&self, metric: Metric) -> BTreeMap<String, Vec<f64>> {
        let mut g: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        match metric {
            Metric::Se => return self.se_groups(),
            Metric::ClusterSize => {
                for r in &self.cluster_sizes {
                    g.entry(format!("{}/{}", r.policy.as_str(), r.criterion.as_str()))
                        .or_default()
                        .push(r.size as f64);
                }
            }
            Metric::CoverageTime => {
                for r in &self.coverage {
                    g.entry(format!("uc/{}", r.criterion.as_str()))
                        .or_default()
                        .push(r.duration);
                }
            }
        }
        g
    }
}

pub fn se_label(r: &SeRecord) -> String {
    format!(
        "{}/{}/{}/{}",
        r.policy.as_str(),
        r.criterion.as_str(),
        r.mode.as_str(),
        r.csi.as_str()
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Se,
    ClusterSize,
    CoverageTime,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Se => "se",
            Self::ClusterSize => "cluster_size",
            Self::CoverageTime => "coverage_time",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se" => Ok(Self::Se),
            "cluster_size" => Ok(Self::ClusterSize),
            "coverage_time" => Ok(Self::CoverageTime),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: String,
    pub group: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

pub fn summary_rows(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for metric in [Metric::Se, Metric::ClusterSize, Metric::CoverageTime] {
        for (group, v) in result.metric_groups(metric) {
            if v.is_empty() {
                continue;
            }
            rows.push(SummaryRow {
                metric: metric.as_str().into(),
                group,
                count: v.len(),
                mean: stats::mean(&v).unwrap_or(f64::NAN),
                median: stats::median(&v).unwrap_or(f64::NAN),
                p10: stats::quantile(&v, 0.1).unwrap_or(f64::NAN),
                p90: stats::quantile(&v, 0.9).unwrap_or(f64::NAN),
            });
        }
    }
    rows
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("metric,group,count,mean,median,p10,p90\n");
    for r in summary_rows(result) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.metric, r.group, r.count, r.mean, r.median, r.p10, r.p90
        );
    }
    out
}
