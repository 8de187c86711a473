//! Cross-policy comparisons of spectral efficiency.

use serde::Serialize;
use std::collections::BTreeMap;

use super::config::CsiMode;
use super::records::ExperimentResult;
use crate::clustering::{ClusterPolicy, RsapCriterion};
use crate::downlink::PrecoderMode;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupStat {
    pub source: String,
    pub group: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub source: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Comparison {
    pub groups: Vec<GroupStat>,
    pub checks: Vec<Check>,
}

impl Comparison {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type Slice = (RsapCriterion, PrecoderMode, CsiMode);

/// Per-drop mean SE of one policy, keyed by drop.
fn drop_means(r: &ExperimentResult, policy: ClusterPolicy, s: Slice) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for x in
        r.se.iter()
            .filter(|x| x.policy == policy && (x.criterion, x.mode, x.csi) == s)
    {
        let e = acc.entry(x.drop).or_default();
        e.0 += x.se;
        e.1 += 1;
    }
    acc.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect()
}

/// Fraction of common drops where `a` is at least `b`.
pub fn paired_fraction(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a.iter().filter_map(|(d, &x)| b.get(d).map(|&y| (x, y))).collect();
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().filter(|(x, y)| x >= y).count() as f64 / pairs.len() as f64)
}

/// Median ordering `UC ≤ FC` and mean ordering `NCT < UC` per slice, plus
/// drop-paired win fractions when `paired` is set.
pub fn compare(results: &[(String, ExperimentResult)], paired: bool) -> Comparison {
    let mut out = Comparison::default();
    for (source, r) in results {
        for (group, v) in r.se_groups() {
            out.groups.push(GroupStat {
                source: source.clone(),
                group,
                count: v.len(),
                mean: stats::mean(&v).unwrap_or(f64::NAN),
                median: stats::median(&v).unwrap_or(f64::NAN),
            });
        }
        let mut slices: Vec<Slice> = r.se.iter().map(|x| (x.criterion, x.mode, x.csi)).collect();
        slices.sort();
        slices.dedup();
        for s in slices {
            let label = format!("{}/{}/{}", s.0.as_str(), s.1.as_str(), s.2.as_str());
            let get = |p: ClusterPolicy| r.se_samples(p, s.0, s.1, s.2);
            let (uc, fc, nct) = (get(ClusterPolicy::Uc), get(ClusterPolicy::Fc), get(ClusterPolicy::Nct));
            if let (Ok(mu), Ok(mf)) = (stats::median(&uc), stats::median(&fc)) {
                out.checks.push(Check {
                    source: source.clone(),
                    name: format!("median uc <= fc [{label}]"),
                    passed: mu <= mf,
                    detail: format!("uc {mu:.6e}, fc {mf:.6e}"),
                });
            }
            if let (Ok(mn), Ok(mu)) = (stats::mean(&nct), stats::mean(&uc)) {
                out.checks.push(Check {
                    source: source.clone(),
                    name: format!("mean nct < uc [{label}]"),
                    passed: mn < mu,
                    detail: format!("nct {mn:.6e}, uc {mu:.6e}"),
                });
            }
            if paired {
                let dm = |p| drop_means(r, p, s);
                let (duc, dfc, dnct) = (dm(ClusterPolicy::Uc), dm(ClusterPolicy::Fc), dm(ClusterPolicy::Nct));
                if let Some(f) = paired_fraction(&duc, &dnct) {
                    out.checks.push(Check {
                        source: source.clone(),
                        name: format!("paired uc >= nct in > 80% of drops [{label}]"),
                        passed: f > 0.8,
                        detail: format!("fraction {f:.3}"),
                    });
                }
                if let Some(f) = paired_fraction(&dfc, &duc) {
                    out.checks.push(Check {
                        source: source.clone(),
                        name: format!("paired fc >= uc fraction [{label}]"),
                        passed: f >= 0.5,
                        detail: format!("fraction {f:.3}"),
                    });
                }
            }
        }
    }
    out
}
