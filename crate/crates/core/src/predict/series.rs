use serde::{Deserialize, Serialize};

use super::laws::{
    discrete_exact, ito_scale_ode, rescale_momentum, rescale_sgd, scale_momentum, scale_sgd, translation_momentum,
    translation_sgd, Quadrature,
};
use crate::error::{Error, Result};
use crate::optim::TrajectoryLog;
use crate::symmetry::SymmetryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ContinuousSgd,
    DiscreteExact,
    MomentumOscillator,
    ItoCorrected,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ContinuousSgd, Method::DiscreteExact, Method::MomentumOscillator, Method::ItoCorrected];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ContinuousSgd => "continuous_sgd",
            Method::DiscreteExact => "discrete_exact",
            Method::MomentumOscillator => "momentum_oscillator",
            Method::ItoCorrected => "ito_corrected",
        }
    }

    /// Column of `trajectories.csv` holding this method.
    pub fn column(self) -> &'static str {
        match self {
            Method::ContinuousSgd => "pred_continuous",
            Method::DiscreteExact => "pred_discrete",
            Method::MomentumOscillator => "pred_momentum",
            Method::ItoCorrected => "pred_ito",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Predicted series for one descriptor on the log's sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub method: Method,
    pub label: String,
    pub kind: SymmetryKind,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Which logged series fed the prediction.
    pub source: String,
}

/// Max and mean of `|pred − empirical| / magnitude` over the logged steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub max: f64,
    pub mean: f64,
}

fn check_log(log: &TrajectoryLog, d: usize) -> Result<()> {
    if d >= log.descriptors.len() {
        return Err(Error::IndexOutOfRange { index: d, len: log.descriptors.len() });
    }
    let acc = &log.accumulators[d];
    let total = log.total_steps();
    if acc.steps() != total {
        return Err(Error::StepMismatch { expected: total, got: acc.steps() });
    }
    if acc.velocity.len() as u64 != total {
        return Err(Error::StepMismatch { expected: total, got: acc.velocity.len() as u64 });
    }
    if let Some(&last) = log.steps.last() {
        if last > total {
            return Err(Error::StepMismatch { expected: total, got: last });
        }
    }
    Ok(())
}

fn needs_sgd(log: &TrajectoryLog, method: Method) -> Result<()> {
    if log.hyper.is_momentum() {
        return Err(Error::InvalidArgument(format!("{method} prediction needs a plain SGD run")));
    }
    Ok(())
}

/// Prediction of `method` for descriptor `d` of `log`, seeded with the
/// empirical value at the first logged step (step 0).
pub fn predict(log: &TrajectoryLog, d: usize, method: Method, quad: Quadrature) -> Result<Prediction> {
    check_log(log, d)?;
    if log.steps.first() != Some(&0) {
        return Err(Error::InvalidArgument("log must start at step 0".into()));
    }
    let desc = &log.descriptors[d];
    let acc = &log.accumulators[d];
    let hyper = &log.hyper;
    let x0 = log.empirical[d][0];
    let kind = desc.kind;
    let translation = kind == SymmetryKind::Translation;

    let (values, source): (Result<Vec<f64>>, &str) = match method {
        Method::ContinuousSgd => {
            needs_sgd(log, method)?;
            let v = log
                .times
                .iter()
                .map(|&t| match kind {
                    SymmetryKind::Translation => Ok(translation_sgd(x0, hyper.lambda, t)),
                    SymmetryKind::Scale => scale_sgd(x0, hyper, &acc.forcing, t, quad),
                    SymmetryKind::Rescale => rescale_sgd(x0, hyper, &acc.forcing, t, quad),
                })
                .collect();
            (v, if translation { "initial value" } else { "batch gradient statistic per step" })
        }
        Method::DiscreteExact => {
            needs_sgd(log, method)?;
            let v = log
                .steps
                .iter()
                .map(|&n| discrete_exact(kind, x0, hyper, &acc.forcing, n as usize))
                .collect();
            (v, if translation { "initial value" } else { "batch gradient statistic per step" })
        }
        Method::MomentumOscillator => {
            let v = log
                .times
                .iter()
                .map(|&t| match kind {
                    SymmetryKind::Translation => translation_momentum(x0, hyper, t),
                    SymmetryKind::Scale => scale_momentum(x0, hyper, &acc.velocity, t),
                    SymmetryKind::Rescale => rescale_momentum(x0, hyper, &acc.velocity, t),
                })
                .collect();
            (v, if translation { "initial value" } else { "velocity statistic per step" })
        }
        Method::ItoCorrected => {
            needs_sgd(log, method)?;
            let full = &log.full_forcing[d];
            let trace = &log.noise_trace[d];
            if full.len() != log.len() || trace.len() != log.len() {
                return Err(Error::InvalidArgument(format!(
                    "{}: Itô prediction needs noise statistics at every logged step",
                    desc.label
                )));
            }
            let v = if translation {
                Ok(log.times.iter().map(|&t| translation_sgd(x0, hyper.lambda, t)).collect())
            } else {
                ito_on_grid(x0, log, full, trace)
            };
            (v, "full-batch gradient and per-example noise trace at logged steps")
        }
    };
    Ok(Prediction {
        method,
        label: desc.label.clone(),
        kind,
        steps: log.steps.clone(),
        times: log.times.clone(),
        values: values?,
        source: source.to_string(),
    })
}

/// The logged grid must be uniform for the Itô forcing series.
fn ito_on_grid(x0: f64, log: &TrajectoryLog, full: &[f64], trace: &[f64]) -> Result<Vec<f64>> {
    if log.len() < 2 {
        return Ok(vec![x0; log.len()]);
    }
    let dt = log.times[1] - log.times[0];
    let uniform = log.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
    if !uniform {
        return Err(Error::InvalidArgument("Itô prediction needs a uniform logging grid".into()));
    }
    log.times.iter().map(|&t| ito_scale_ode(x0, &log.hyper, full, trace, dt, t)).collect()
}

/// Error of `pred` against the empirical series, normalized by the logged
/// magnitude of the quantity.
pub fn error_summary(log: &TrajectoryLog, d: usize, pred: &Prediction) -> Result<ErrorSummary> {
    let emp = log
        .empirical
        .get(d)
        .ok_or(Error::IndexOutOfRange { index: d, len: log.empirical.len() })?;
    if pred.values.len() != emp.len() {
        return Err(Error::Shape(format!("prediction has {} rows, log has {}", pred.values.len(), emp.len())));
    }
    Ok(relative_errors(&pred.values, emp, &log.magnitude[d]))
}

pub fn relative_errors(pred: &[f64], empirical: &[f64], magnitude: &[f64]) -> ErrorSummary {
    let errs: Vec<f64> = pred
        .iter()
        .zip(empirical)
        .zip(magnitude)
        .map(|((p, e), m)| (p - e).abs() / m.max(f64::MIN_POSITIVE))
        .collect();
    let max = errs.iter().copied().fold(0.0, f64::max);
    let mean = if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 };
    ErrorSummary { max, mean }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{ArchSpec, Batch, Layer, Network};
    use crate::optim::{run, HyperParams, TrainOptions};
    use crate::symmetry::enumerate_groups;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let x = labels
            .iter()
            .flat_map(|&c| (0..5).map(|j| if j % 3 == c { 1.0 } else { 0.0 } + 0.7 * rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
            .collect();
        Batch::new(Tensor::matrix(n, 5, x), labels).unwrap()
    }

    fn bn_run(hyper: HyperParams) -> TrajectoryLog {
        let net = Network::new(ArchSpec::mlp(&[5, 8, 3], Layer::Relu, true)).unwrap();
        let data = data(96, 4);
        run(&net, &data, hyper, enumerate_groups(&net), TrainOptions::new(4, 3), net.init_params(6)).unwrap()
    }

    #[test]
    fn discrete_replays_the_run() {
        let log = bn_run(HyperParams::sgd(0.1, 1e-3).with_batch_size(16));
        for d in 0..log.descriptors.len() {
            let p = predict(&log, d, Method::DiscreteExact, Quadrature::Trapezoid).unwrap();
            assert!(error_summary(&log, d, &p).unwrap().max <= 1e-10, "{}", log.descriptors[d].label);
        }
    }

    #[test]
    fn momentum_limit_tracks_sgd_law() {
        let log = bn_run(HyperParams::sgd(0.1, 1e-3).with_batch_size(16));
        for d in 0..log.descriptors.len() {
            if log.descriptors[d].kind != SymmetryKind::Scale {
                continue;
            }
            let a = predict(&log, d, Method::MomentumOscillator, Quadrature::Trapezoid).unwrap();
            let b = predict(&log, d, Method::ContinuousSgd, Quadrature::Trapezoid).unwrap();
            let e = relative_errors(&a.values, &b.values, &b.values);
            assert!(e.max <= 0.03, "{}: {e:?}", log.descriptors[d].label);
        }
    }

    #[test]
    fn rejects_mismatched_methods() {
        let log = bn_run(HyperParams::momentum(0.1, 1e-3, 0.0, 0.9).with_batch_size(16));
        assert!(predict(&log, 0, Method::ContinuousSgd, Quadrature::Trapezoid).is_err());
        assert!(predict(&log, 0, Method::MomentumOscillator, Quadrature::Trapezoid).is_ok());
        let sgd = bn_run(HyperParams::sgd(0.1, 0.0).with_batch_size(16));
        assert!(predict(&sgd, 0, Method::ItoCorrected, Quadrature::Trapezoid).is_err());
        assert!(predict(&sgd, 999, Method::DiscreteExact, Quadrature::Trapezoid).is_err());

        let mut broken = sgd.clone();
        broken.accumulators[0].forcing.pop();
        assert!(matches!(
            predict(&broken, 0, Method::ContinuousSgd, Quadrature::Trapezoid),
            Err(Error::StepMismatch { .. })
        ));
    }
}
