use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::accumulator::Accumulator;
use super::step::{momentum_update, sgd_update};
use super::HyperParams;
use crate::error::{Error, Result};
use crate::net::{Batch, Network};
use crate::symmetry::{conserved_quantity, generator, quantity_magnitude, SymmetryDescriptor, SymmetryKind, RESIDUAL_DELTA};
use crate::tensor::{value_and_grad, Graph};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub log_every: usize,
    /// Record the full-batch gradient statistic and per-example gradient
    /// noise trace at every logged step (needed by the Itô prediction).
    #[serde(default)]
    pub noise_stats: bool,
}

impl TrainOptions {
    pub fn new(epochs: usize, log_every: usize) -> Self {
        Self { epochs, log_every, noise_stats: false }
    }
}

/// Everything recorded during a run, sampled at steps `0, k, 2k, …`
/// (`k = log_every`) plus per-step series in the accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub hyper: HyperParams,
    pub descriptors: Vec<SymmetryDescriptor>,
    pub steps_per_epoch: usize,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    /// `empirical[d][k]`: conserved quantity of descriptor `d` at `steps[k]`.
    pub empirical: Vec<Vec<f64>>,
    /// Natural magnitude of the same quantity (used to normalize errors).
    pub magnitude: Vec<Vec<f64>>,
    /// Accumulator integral at each logged step.
    pub integral: Vec<Vec<f64>>,
    pub accumulators: Vec<Accumulator>,
    /// Largest per-step `|⟨ĝ_B, ∂αψ⟩| / (‖ĝ_B‖ ‖∂αψ‖ + δ)` per descriptor.
    pub max_batch_residual: Vec<f64>,
    /// Batch loss of every step.
    pub loss: Vec<f64>,
    /// Full-batch gradient statistic at logged steps (noise runs only).
    pub full_forcing: Vec<Vec<f64>>,
    /// Per-example gradient variance restricted to the group (signed for
    /// rescale), at logged steps (noise runs only).
    pub noise_trace: Vec<Vec<f64>>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_steps(&self) -> u64 {
        self.loss.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    /// ChaCha word position, as a decimal string (it is a u128).
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), word_pos: rng.get_word_pos().to_string() }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Config(format!("bad rng word position {:?}", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Complete optimizer state; resuming from it continues bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub options: TrainOptions,
    pub num_examples: usize,
    pub step: u64,
    pub theta: Vec<f64>,
    pub velocity: Option<Vec<f64>>,
    order: Vec<usize>,
    pos: usize,
    rng: RngState,
    pub log: TrajectoryLog,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }
}

/// Seeded epoch/batch loop with instrumentation.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    net: &'a Network,
    data: &'a Batch,
    options: TrainOptions,
    step: u64,
    theta: Vec<f64>,
    velocity: Option<Vec<f64>>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
    log: TrajectoryLog,
}

impl<'a> Trainer<'a> {
    pub fn new(
        net: &'a Network,
        data: &'a Batch,
        hyper: HyperParams,
        descriptors: Vec<SymmetryDescriptor>,
        options: TrainOptions,
        theta0: Vec<f64>,
    ) -> Result<Self> {
        hyper.validate()?;
        if options.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        if hyper.batch_size > data.len() {
            return Err(Error::InvalidArgument(format!(
                "batch size {} exceeds dataset size {}",
                hyper.batch_size,
                data.len()
            )));
        }
        if theta0.len() != net.num_params() {
            return Err(Error::Shape(format!(
                "initial parameters have length {}, network expects {}",
                theta0.len(),
                net.num_params()
            )));
        }
        if options.noise_stats && net.has_batchnorm() {
            return Err(Error::InvalidArgument(
                "per-example noise statistics are undefined with batchnorm".into(),
            ));
        }
        for d in &descriptors {
            d.validate(theta0.len())?;
        }
        let nd = descriptors.len();
        let log = TrajectoryLog {
            hyper,
            steps_per_epoch: data.len() / hyper.batch_size,
            steps: Vec::new(),
            times: Vec::new(),
            empirical: vec![Vec::new(); nd],
            magnitude: vec![Vec::new(); nd],
            integral: vec![Vec::new(); nd],
            accumulators: descriptors.iter().map(|d| Accumulator::new(d, &hyper)).collect(),
            max_batch_residual: vec![0.0; nd],
            loss: Vec::new(),
            full_forcing: vec![Vec::new(); nd],
            noise_trace: vec![Vec::new(); nd],
            descriptors,
        };
        let velocity = hyper.is_momentum().then(|| vec![0.0; theta0.len()]);
        let mut trainer = Self {
            net,
            data,
            options,
            step: 0,
            theta: theta0,
            velocity,
            order: (0..data.len()).collect(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(hyper.seed),
            log,
        };
        trainer.order.shuffle(&mut trainer.rng);
        let row = trainer.row(&trainer.theta, trainer.log.accumulators.iter().map(|a| a.integral))?;
        trainer.push_row(row);
        Ok(trainer)
    }

    pub fn resume(net: &'a Network, data: &'a Batch, ck: Checkpoint) -> Result<Self> {
        if ck.num_examples != data.len() || ck.order.len() != data.len() {
            return Err(Error::Config(format!(
                "checkpoint was taken on {} examples, dataset has {}",
                ck.num_examples,
                data.len()
            )));
        }
        if ck.theta.len() != net.num_params() {
            return Err(Error::Shape("checkpoint parameters do not match the network".into()));
        }
        Ok(Self {
            net,
            data,
            options: ck.options,
            step: ck.step,
            theta: ck.theta,
            velocity: ck.velocity,
            order: ck.order,
            pos: ck.pos,
            rng: ck.rng.restore()?,
            log: ck.log,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            options: self.options,
            num_examples: self.data.len(),
            step: self.step,
            theta: self.theta.clone(),
            velocity: self.velocity.clone(),
            order: self.order.clone(),
            pos: self.pos,
            rng: RngState::capture(&self.rng),
            log: self.log.clone(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn total_steps(&self) -> u64 {
        (self.options.epochs * self.log.steps_per_epoch) as u64
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn into_log(self) -> TrajectoryLog {
        self.log
    }

    /// One optimizer step on the next batch of the current epoch. On error
    /// the trainer is left exactly as before the call.
    pub fn step(&mut self) -> Result<()> {
        let hyper = self.log.hyper;
        let s = hyper.batch_size;
        let batch = self.data.select(&self.order[self.pos..self.pos + s]);
        let (loss, g) = value_and_grad(self.net, &self.theta, &batch).map_err(|e| self.diverged(e))?;

        let mut theta = self.theta.clone();
        let mut velocity = self.velocity.clone();
        let update = match velocity.as_mut() {
            Some(v) => momentum_update(&mut theta, v, &g, &hyper),
            None => sgd_update(&mut theta, &g, &hyper),
        };
        update.map_err(|e| self.diverged(e))?;
        // Plain SGD moves along `g + λθ`; record it as the velocity so the
        // oscillator predictors also apply to SGD runs.
        let v = match &velocity {
            Some(v) => v.clone(),
            None => g.iter().zip(&self.theta).map(|(gi, t)| gi + hyper.lambda * t).collect(),
        };

        let log = &self.log;
        let mut updates = Vec::with_capacity(log.descriptors.len());
        let mut residuals = Vec::with_capacity(log.descriptors.len());
        for (d, acc) in log.descriptors.iter().zip(&log.accumulators) {
            updates.push(acc.prepare(d, &g, &v, hyper.alpha, self.step)?);
            let gen = generator(d, &self.theta)?;
            residuals.push(dot(&g, &gen) / (dot(&g, &g).sqrt() * dot(&gen, &gen).sqrt() + RESIDUAL_DELTA));
        }
        let row = if (self.step + 1).is_multiple_of(self.options.log_every as u64) {
            Some(self.row(&theta, updates.iter().map(|u| u.integral))?)
        } else {
            None
        };
        // Parameters can stay finite while a squared norm or an integral
        // overflows; such a step is a divergence too.
        let finite = updates.iter().all(|u| u.is_finite())
            && residuals.iter().all(|r| r.is_finite())
            && row.as_ref().is_none_or(|r| r.is_finite());
        if !finite {
            return Err(Error::Divergence { at: format!("step {}", self.step) });
        }

        for ((acc, u), (worst, r)) in self
            .log
            .accumulators
            .iter_mut()
            .zip(updates)
            .zip(self.log.max_batch_residual.iter_mut().zip(residuals))
        {
            acc.commit(u);
            *worst = worst.max(r.abs());
        }
        self.theta = theta;
        self.velocity = velocity;
        self.log.loss.push(loss);
        self.step += 1;

        self.pos += s;
        if self.pos + s > self.data.len() {
            self.pos = 0;
            self.order.shuffle(&mut self.rng);
        }
        if let Some(row) = row {
            self.push_row(row);
        }
        Ok(())
    }

    fn diverged(&self, e: Error) -> Error {
        match e {
            Error::NonFinite { .. } => Error::Divergence { at: format!("step {}", self.step) },
            other => other,
        }
    }

    /// Run until `target` total steps (clamped to the configured epochs).
    pub fn run_to(&mut self, target: u64) -> Result<()> {
        let target = target.min(self.total_steps());
        while self.step < target {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_to(self.total_steps())
    }

    /// The log row for parameters `theta` with the given integrals.
    fn row(&self, theta: &[f64], integrals: impl Iterator<Item = f64>) -> Result<Row> {
        let descs = &self.log.descriptors;
        let noise = if self.options.noise_stats {
            Some(noise_statistics(self.net, theta, self.data, descs)?)
        } else {
            None
        };
        Ok(Row {
            empirical: descs.iter().map(|d| conserved_quantity(d, theta)).collect::<Result<_>>()?,
            magnitude: descs.iter().map(|d| quantity_magnitude(d, theta)).collect::<Result<_>>()?,
            integral: integrals.collect(),
            noise,
        })
    }

    fn push_row(&mut self, row: Row) {
        let log = &mut self.log;
        log.steps.push(self.step);
        log.times.push(self.step as f64 * log.hyper.time_step());
        for (k, ((e, m), i)) in row.empirical.into_iter().zip(row.magnitude).zip(row.integral).enumerate() {
            log.empirical[k].push(e);
            log.magnitude[k].push(m);
            log.integral[k].push(i);
        }
        if let Some((full, trace)) = row.noise {
            for (k, (f, t)) in full.into_iter().zip(trace).enumerate() {
                log.full_forcing[k].push(f);
                log.noise_trace[k].push(t);
            }
        }
    }
}

struct Row {
    empirical: Vec<f64>,
    magnitude: Vec<f64>,
    integral: Vec<f64>,
    noise: Option<(Vec<f64>, Vec<f64>)>,
}

impl Row {
    fn is_finite(&self) -> bool {
        let all = |v: &[f64]| v.iter().all(|x| x.is_finite());
        all(&self.empirical)
            && all(&self.magnitude)
            && all(&self.integral)
            && self.noise.as_ref().is_none_or(|(f, t)| all(f) && all(t))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch gradient statistic and per-example gradient variance per
/// descriptor, from one backward pass per example.
pub fn noise_statistics(
    net: &Network,
    theta: &[f64],
    data: &Batch,
    descriptors: &[SymmetryDescriptor],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.len();
    let p = theta.len();
    let mut grads = Vec::with_capacity(n);
    let mut mean = vec![0.0; p];
    for i in 0..n {
        let (_, g) = value_and_grad(net, theta, &data.select(&[i]))?;
        for (m, x) in mean.iter_mut().zip(&g) {
            *m += x / n as f64;
        }
        grads.push(g);
    }
    let sq = |set: &[usize], x: &dyn Fn(usize) -> f64| set.iter().map(|&i| x(i) * x(i)).sum::<f64>();
    let mut full = Vec::with_capacity(descriptors.len());
    let mut trace = Vec::with_capacity(descriptors.len());
    for d in descriptors {
        let m = |i: usize| mean[i];
        let (f, t) = match d.kind {
            SymmetryKind::Translation => (d.set_a.iter().map(|&i| mean[i]).sum(), 0.0),
            SymmetryKind::Scale | SymmetryKind::Rescale => {
                let sign_b = if d.kind == SymmetryKind::Rescale { -1.0 } else { 0.0 };
                let f = sq(&d.set_a, &m) + sign_b * sq(&d.set_b, &m);
                let t = grads
                    .iter()
                    .map(|g| {
                        let c = |i: usize| g[i] - mean[i];
                        sq(&d.set_a, &c) + sign_b * sq(&d.set_b, &c)
                    })
                    .sum::<f64>()
                    / n as f64;
                (f, t)
            }
        };
        full.push(f);
        trace.push(t);
    }
    Ok((full, trace))
}

/// Train for `options.epochs` epochs from `theta0` and return the log.
pub fn run(
    net: &Network,
    data: &Batch,
    hyper: HyperParams,
    descriptors: Vec<SymmetryDescriptor>,
    options: TrainOptions,
    theta0: Vec<f64>,
) -> Result<TrajectoryLog> {
    let mut trainer = Trainer::new(net, data, hyper, descriptors, options, theta0)?;
    trainer.run()?;
    Ok(trainer.into_log())
}
