use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::data::load_dataset;
use super::svg::{line_chart, Line};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::optim::{Checkpoint, HyperParams, TrainOptions, Trainer, TrajectoryLog};
use crate::predict::{error_summary, predict, ErrorSummary, Method, Prediction};
use crate::symmetry::{enumerate_groups, SymmetryKind};

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "log.json";
pub const CSV_FILE: &str = "trajectories.csv";
pub const REPORT_FILE: &str = "report.json";

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("checkpoint-{step}.json"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// The `train` command. Writes `config.json`, checkpoints and `log.json`
/// into `out`; on divergence the partial log is written before the error
/// is returned.
pub fn run_train(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<TrajectoryLog> {
    cfg.check_files()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join(CONFIG_FILE), &cfg.to_json()?)?;

    let net = Network::new(cfg.arch_spec()?)?;
    let data = load_dataset(&cfg.dataset)?;
    let options = TrainOptions {
        epochs: cfg.epochs,
        log_every: cfg.log_every,
        noise_stats: cfg.methods.contains(&Method::ItoCorrected),
    };
    let mut trainer = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.log.hyper != cfg.hyper || ck.options != options {
                return Err(Error::Config(format!(
                    "checkpoint {} was written with different hyperparameters or options",
                    path.display()
                )));
            }
            Trainer::resume(&net, &data, ck)?
        }
        None => {
            let descriptors = cfg.descriptors.apply(enumerate_groups(&net));
            Trainer::new(&net, &data, cfg.hyper, descriptors, options, net.init_params(cfg.hyper.seed))?
        }
    };

    let total = trainer.total_steps();
    let every = cfg.checkpoint_every.unwrap_or(u64::MAX);
    while !trainer.is_done() {
        let next = (trainer.step_count() / every).saturating_add(1).saturating_mul(every).min(total);
        if let Err(e) = trainer.run_to(next) {
            write(&out.join(LOG_FILE), &serde_json::to_string(trainer.log())?)?;
            return Err(e);
        }
        if next % every == 0 || next == total {
            trainer.checkpoint().save(checkpoint_path(out, next))?;
        }
    }
    let log = trainer.into_log();
    write(&out.join(LOG_FILE), &serde_json::to_string(&log)?)?;
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorReport {
    pub label: String,
    pub kind: SymmetryKind,
    pub initial: f64,
    pub last: f64,
    /// Worst per-step `|⟨ĝ_B, ∂αψ⟩|` (normalized) seen during training.
    pub max_batch_residual: f64,
    pub errors: BTreeMap<Method, ErrorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheckSummary {
    pub descriptors: usize,
    pub max_batch_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub hyper: HyperParams,
    pub total_steps: u64,
    pub rows: usize,
    pub environment: Environment,
    /// Per method: the largest max and the average mean over descriptors.
    pub methods: BTreeMap<Method, ErrorSummary>,
    pub descriptors: Vec<DescriptorReport>,
    pub symmetry_check: SymmetryCheckSummary,
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Rows of `trajectories.csv`, one per logged step per descriptor.
pub fn write_csv(path: &Path, log: &TrajectoryLog, preds: &[Vec<Prediction>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut header = vec!["step", "time", "descriptor_label", "kind", "empirical"];
    header.extend(Method::ALL.iter().map(|m| m.column()));
    header.push("magnitude");
    w.write_record(&header)?;
    for k in 0..log.len() {
        for (d, desc) in log.descriptors.iter().enumerate() {
            let mut rec = vec![
                log.steps[k].to_string(),
                log.times[k].to_string(),
                desc.label.clone(),
                desc.kind.as_str().to_string(),
                log.empirical[d][k].to_string(),
            ];
            for m in Method::ALL {
                rec.push(fmt(preds[d].iter().find(|p| p.method == m).map(|p| p.values[k])));
            }
            rec.push(log.magnitude[d][k].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn file_stem(index: usize, label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{index:03}-{}", clean.trim_matches('_'))
}

/// The `compare` command: predictions for every configured method, written
/// as `trajectories.csv`, `report.json` and optionally one SVG per
/// descriptor.
pub fn run_compare(dir: &Path, svg: bool) -> Result<RunReport> {
    let cfg = ExperimentConfig::from_json(&read(&dir.join(CONFIG_FILE))?)?;
    let log: TrajectoryLog = serde_json::from_str(&read(&dir.join(LOG_FILE))?)?;
    if log.is_empty() {
        return Err(Error::Config(format!("{}: empty trajectory log", dir.display())));
    }

    let mut preds = Vec::with_capacity(log.descriptors.len());
    let mut descriptors = Vec::with_capacity(log.descriptors.len());
    for (d, desc) in log.descriptors.iter().enumerate() {
        let mut row = Vec::with_capacity(cfg.methods.len());
        let mut errors = BTreeMap::new();
        for &m in &cfg.methods {
            let p = predict(&log, d, m, cfg.quadrature)?;
            errors.insert(m, error_summary(&log, d, &p)?);
            row.push(p);
        }
        descriptors.push(DescriptorReport {
            label: desc.label.clone(),
            kind: desc.kind,
            initial: log.empirical[d][0],
            last: *log.empirical[d].last().expect("non-empty log"),
            max_batch_residual: log.max_batch_residual[d],
            errors,
        });
        preds.push(row);
    }

    let mut methods = BTreeMap::new();
    for &m in &cfg.methods {
        let all: Vec<&ErrorSummary> = descriptors.iter().filter_map(|d| d.errors.get(&m)).collect();
        let n = all.len().max(1) as f64;
        methods.insert(
            m,
            ErrorSummary {
                max: all.iter().map(|e| e.max).fold(0.0, f64::max),
                mean: all.iter().map(|e| e.mean).sum::<f64>() / n,
            },
        );
    }

    write_csv(&dir.join(CSV_FILE), &log, &preds)?;
    let report = RunReport {
        name: cfg.name.clone(),
        seed: cfg.hyper.seed,
        hyper: log.hyper,
        total_steps: log.total_steps(),
        rows: log.len(),
        environment: Environment::current(),
        methods,
        symmetry_check: SymmetryCheckSummary {
            descriptors: log.descriptors.len(),
            max_batch_residual: log.max_batch_residual.iter().copied().fold(0.0, f64::max),
        },
        descriptors,
    };
    write(&dir.join(REPORT_FILE), &serde_json::to_string_pretty(&report)?)?;

    if svg {
        for (d, desc) in log.descriptors.iter().enumerate() {
            let mut lines = vec![Line { name: "empirical", xs: &log.times, ys: &log.empirical[d], dashed: false }];
            for p in &preds[d] {
                lines.push(Line { name: p.method.as_str(), xs: &p.times, ys: &p.values, dashed: true });
            }
            let title = format!("{} ({})", desc.label, desc.kind);
            let path = dir.join(format!("{}.svg", file_stem(d, &desc.label)));
            write(&path, &line_chart(&title, "time", &lines))?;
        }
    }
    Ok(report)
}
