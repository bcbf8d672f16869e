use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Tolerances};
use super::data::load_dataset;
use crate::error::{Error, Result};
use crate::net::{Batch, Network};
use crate::symmetry::{
    enumerate_groups_with, equivariance_check, geometry_residuals, noise_lowrank_check, EnumerateOptions,
    SymmetryDescriptor, SymmetryKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub label: String,
    pub kind: SymmetryKind,
    pub gradient: f64,
    pub hessian: f64,
    pub theorem: f64,
    pub loss_gap: f64,
    pub gradient_gap: f64,
    pub noise_batch: f64,
    pub noise_covariance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub tolerances: Tolerances,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    /// Plain-text table, one line per descriptor.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<32} {:<11} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}  status\n",
            "descriptor", "kind", "gradient", "hessian", "theorem", "loss_gap", "noise_b", "noise_cov"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<32} {:<11} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e}  {}\n",
                r.label,
                r.kind.as_str(),
                r.gradient,
                r.hessian,
                r.theorem,
                r.loss_gap,
                r.noise_batch,
                r.noise_covariance,
                if r.pass { "ok" } else { "FAIL" }
            ));
        }
        out
    }
}

/// `count` batches of `size` rows, each a fresh random subset.
pub fn sample_batches(data: &Batch, count: usize, size: usize, seed: u64) -> Result<Vec<Batch>> {
    if size == 0 || size > data.len() {
        return Err(Error::InvalidArgument(format!("batch size {size} invalid for {} examples", data.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    Ok((0..count)
        .map(|_| {
            order.shuffle(&mut rng);
            data.select(&order[..size])
        })
        .collect())
}

/// Geometry, equivariance and noise residuals for every descriptor at `θ`.
pub fn check_descriptors(
    net: &Network,
    theta: &[f64],
    batches: &[Batch],
    descriptors: &[SymmetryDescriptor],
    alphas: usize,
    tol: Tolerances,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let refs: Vec<&Batch> = batches.iter().collect();
    let mut rows = Vec::with_capacity(descriptors.len());
    for d in descriptors {
        let (mut gradient, mut hessian, mut theorem) = (0.0f64, 0.0f64, 0.0f64);
        for b in batches {
            let r = geometry_residuals(net, theta, b, d)?;
            gradient = gradient.max(r.gradient.abs());
            hessian = hessian.max(r.hessian.abs());
            theorem = theorem.max(r.theorem.abs());
        }
        let (mut loss_gap, mut gradient_gap) = (0.0f64, 0.0f64);
        for _ in 0..alphas {
            let alpha = match d.kind {
                SymmetryKind::Translation => rng.random_range(-2.0..2.0),
                _ => rng.random_range(-1.0f64..1.0).exp(),
            };
            let gap = equivariance_check(net, theta, &batches[0], d, alpha)?;
            loss_gap = loss_gap.max(gap.loss_gap);
            gradient_gap = gradient_gap.max(gap.gradient_gap);
        }
        let noise = noise_lowrank_check(net, theta, &refs, d)?;
        let pass = gradient <= tol.gradient
            && hessian <= tol.hessian
            && theorem <= tol.theorem
            && loss_gap <= tol.equivariance
            && noise.max() <= tol.noise;
        rows.push(CheckRow {
            label: d.label.clone(),
            kind: d.kind,
            gradient,
            hessian,
            theorem,
            loss_gap,
            gradient_gap,
            noise_batch: noise.max_batch_residual,
            noise_covariance: noise.covariance_residual,
            pass,
        });
    }
    Ok(CheckReport { tolerances: tol, rows })
}

/// The `check` command: residuals at the seeded initialization.
pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    cfg.check_files()?;
    let net = Network::new(cfg.arch_spec()?)?;
    let data = load_dataset(&cfg.dataset)?;
    let seed = cfg.hyper.seed;
    let theta = net.init_params(seed);
    let opts = EnumerateOptions { assume_homogeneous: cfg.check.assume_homogeneous };
    let descriptors = cfg.descriptors.apply(enumerate_groups_with(&net, opts));
    let batches = sample_batches(&data, cfg.check.batches, cfg.hyper.batch_size, seed)?;
    check_descriptors(&net, &theta, &batches, &descriptors, cfg.check.alphas, cfg.check.tolerances, seed)
}
