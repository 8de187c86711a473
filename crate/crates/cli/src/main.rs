use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use leo_dmimo::harness::records::summary_rows;
use leo_dmimo::harness::{compare, ExperimentConfig, ExperimentResult, Metric};
use leo_dmimo::stats::summarize_cdf;
use leo_dmimo::Error;

#[derive(Parser)]
#[command(name = "leo-dmimo", version, about = "User-centric LEO distributed MIMO simulator")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result files.
    Run { config: PathBuf },
    /// Empirical CDF of one metric, per group.
    Summarize {
        result: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Number of evenly spaced CDF points per group.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Compare SE across cluster policies; exits 1 if an ordering check fails.
    Compare {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Add drop-paired win fractions.
        #[arg(long)]
        paired: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration file without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Se,
    ClusterSize,
    CoverageTime,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Se => Metric::Se,
            MetricArg::ClusterSize => Metric::ClusterSize,
            MetricArg::CoverageTime => Metric::CoverageTime,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config } => cmd_run(config),
        Command::Summarize {
            result,
            metric,
            grid,
            json,
        } => cmd_summarize(result, metric.into(), grid, json),
        Command::Compare { results, paired, json } => cmd_compare(results, paired, json),
        Command::Validate { config, json } => cmd_validate(config, json),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_run(path: PathBuf) -> Result<ExitCode> {
    let cfg = load_config(&path)?;
    let result = leo_dmimo::harness::run(&cfg)?;
    let dir = cfg.output_dir();
    let files = result
        .write_to_dir(&dir)
        .with_context(|| format!("writing results to {}", dir.display()))?;
    println!(
        "{:<8} {:<44} {:>6} {:>12} {:>12}",
        "metric", "group", "count", "mean", "median"
    );
    for r in summary_rows(&result) {
        println!(
            "{:<8} {:<44} {:>6} {:>12.4e} {:>12.4e}",
            short(&r.metric),
            r.group,
            r.count,
            r.mean,
            r.median
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn short(metric: &str) -> &str {
    match metric {
        "cluster_size" => "size",
        "coverage_time" => "coverage",
        m => m,
    }
}

fn cmd_summarize(path: PathBuf, metric: Metric, grid: usize, json: bool) -> Result<ExitCode> {
    let result = ExperimentResult::load(&path).with_context(|| format!("reading {}", path.display()))?;
    let groups = result.metric_groups(metric);
    if groups.is_empty() {
        anyhow::bail!("no {} samples in {}", metric.as_str(), path.display());
    }
    let mut table = serde_json::Map::new();
    for (group, samples) in &groups {
        let cdf = summarize_cdf(samples, grid)?;
        if json {
            table.insert(group.clone(), serde_json::to_value(&cdf)?);
        } else {
            println!("# {} {group} (n = {})", metric.as_str(), samples.len());
            println!("{:>14} {:>8}", "x", "cdf");
            for p in cdf {
                println!("{:>14.6e} {:>8.4}", p.x, p.cdf);
            }
        }
    }
    if json {
        println!("{}", serde_json::Value::Object(table));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(paths: Vec<PathBuf>, paired: bool, json: bool) -> Result<ExitCode> {
    let mut results = Vec::new();
    for p in paths {
        let r = ExperimentResult::load(&p).with_context(|| format!("reading {}", p.display()))?;
        results.push((p.display().to_string(), r));
    }
    let cmp = compare(&results, paired);
    if json {
        println!("{}", serde_json::to_string(&cmp)?);
    } else {
        println!("{:<44} {:>6} {:>12} {:>12}  source", "group", "count", "mean", "median");
        for g in &cmp.groups {
            println!(
                "{:<44} {:>6} {:>12.4e} {:>12.4e}  {}",
                g.group, g.count, g.mean, g.median, g.source
            );
        }
        println!();
        for c in &cmp.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("{tag} {} ({})  {}", c.name, c.detail, c.source);
        }
    }
    Ok(if cmp.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_validate(path: PathBuf, json: bool) -> Result<ExitCode> {
    let cfg = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            let parse = e.downcast_ref::<Error>().and_then(|e| match e {
                Error::Config(errs) => Some(errs.clone()),
                _ => None,
            });
            match parse {
                Some(errs) => return Ok(report_validation(&errs, json)),
                None => return Err(e),
            }
        }
    };
    Ok(report_validation(&cfg.errors(), json))
}

fn report_validation(errs: &leo_dmimo::error::ConfigErrors, json: bool) -> ExitCode {
    if json {
        let list: Vec<_> = errs
            .0
            .iter()
            .map(|e| serde_json::json!({"field": e.field, "message": e.message}))
            .collect();
        println!("{}", serde_json::json!({"valid": errs.is_empty(), "errors": list}));
    } else if errs.is_empty() {
        println!("ok");
    } else {
        for e in &errs.0 {
            println!("{}: {}", e.field, e.message);
        }
    }
    if errs.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
