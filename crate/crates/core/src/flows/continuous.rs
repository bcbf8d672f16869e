use serde::{Deserialize, Serialize};

use super::ode::{solve, Integrator};
use crate::error::{Error, Result};
use crate::optim::HyperParams;
use crate::symmetry::{conserved_quantity, SymmetryDescriptor};
use crate::tensor::{grad_and_hvp, value_and_grad, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// `θ' = −g`.
    GradientFlow,
    /// `θ' = −g − λθ`.
    WeightDecayFlow,
    /// `(1 − β) θ' = −g − λθ`.
    MomentumFlow,
    /// `θ' = −g − (η/2) H g`, gradient flow on `L + (η/4)|g|²`.
    ModifiedLossFlow,
    /// Gradient flow on `L + (λ/2)|θ|² + (η/4)|g + λθ|²`.
    ModifiedEquationOfLearning,
    /// `(η(1 − α)/2)(1 + β) θ'' + (1 − β) θ' + λθ = −g`, `θ'(0) = 0`.
    ModifiedMomentumFlow,
}

impl FlowKind {
    pub fn needs_hvp(self) -> bool {
        matches!(self, FlowKind::ModifiedLossFlow | FlowKind::ModifiedEquationOfLearning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub hyper: HyperParams,
    #[serde(default)]
    pub integrator: Integrator,
    /// Step size.
    pub h: f64,
    /// Horizon; must be a whole number of steps.
    pub horizon: f64,
    /// Record every `sample_every` steps (the final state is always kept).
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

impl FlowSpec {
    pub fn new(kind: FlowKind, hyper: HyperParams, h: f64, horizon: f64) -> Self {
        Self { kind, hyper, integrator: Integrator::Rk4, h, horizon, sample_every: 1 }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_sample_every(mut self, every: usize) -> Self {
        self.sample_every = every;
        self
    }

    /// Number of steps covering the horizon.
    pub fn steps(&self) -> Result<usize> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.h));
        }
        if !(self.horizon >= self.h) {
            return bad(format!("horizon {} shorter than one step {}", self.horizon, self.h));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be >= 1".into());
        }
        let n = (self.horizon / self.h).round();
        if ((n * self.h) - self.horizon).abs() > 1e-9 * self.horizon {
            return bad(format!("horizon {} is not a multiple of h = {}", self.horizon, self.h));
        }
        self.hyper.validate()?;
        if self.kind == FlowKind::MomentumFlow && self.hyper.beta >= 1.0 {
            return bad("momentum flow needs beta < 1".into());
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `conserved[d][k]` is descriptor `d`'s quantity at `times[k]`.
    pub conserved: Vec<Vec<f64>>,
}

impl FlowTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `max_k |q(t_k) − q(0)| / max(|q(0)|, tiny)` for descriptor `d`.
    pub fn relative_drift(&self, d: usize) -> f64 {
        let q = &self.conserved[d];
        let q0 = q[0];
        let scale = q0.abs().max(f64::MIN_POSITIVE);
        q.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max) / scale
    }
}

/// `θ'` of a first-order flow at `θ`.
pub fn flow_velocity<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    kind: FlowKind,
    hyper: &HyperParams,
) -> Result<Vec<f64>> {
    let HyperParams { eta, lambda, beta, .. } = *hyper;
    let (_, g) = value_and_grad(graph, theta, batch)?;
    let v = match kind {
        FlowKind::GradientFlow => g.iter().map(|x| -x).collect(),
        FlowKind::WeightDecayFlow => g.iter().zip(theta).map(|(gi, t)| -gi - lambda * t).collect(),
        FlowKind::MomentumFlow => g
            .iter()
            .zip(theta)
            .map(|(gi, t)| -(gi + lambda * t) / (1.0 - beta))
            .collect(),
        FlowKind::ModifiedLossFlow => {
            let (_, hg) = grad_and_hvp(graph, theta, batch, &g)?;
            g.iter().zip(&hg).map(|(gi, hgi)| -gi - 0.5 * eta * hgi).collect()
        }
        FlowKind::ModifiedEquationOfLearning => {
            let d: Vec<f64> = g.iter().zip(theta).map(|(gi, t)| gi + lambda * t).collect();
            let (_, hd) = grad_and_hvp(graph, theta, batch, &d)?;
            let a = 1.0 + 0.5 * eta * lambda;
            let b = lambda + 0.5 * eta * lambda * lambda;
            (0..theta.len())
                .map(|i| -a * g[i] - b * theta[i] - 0.5 * eta * hd[i])
                .collect()
        }
        FlowKind::ModifiedMomentumFlow => {
            return Err(Error::InvalidArgument(
                "modified momentum flow is second order; use integrate".into(),
            ))
        }
    };
    Ok(v)
}

/// Integrate a full-batch flow from `theta0`, recording the conserved
/// quantity of every descriptor at each sample.
pub fn integrate<G: Graph + ?Sized>(
    graph: &G,
    theta0: &[f64],
    batch: &G::Batch,
    spec: &FlowSpec,
    descriptors: &[SymmetryDescriptor],
) -> Result<FlowTrajectory> {
    let steps = spec.steps()?;
    for d in descriptors {
        d.validate(theta0.len())?;
    }
    let p = theta0.len();
    let hyper = spec.hyper;
    let second_order = spec.kind == FlowKind::ModifiedMomentumFlow;
    let mass = 0.5 * hyper.eta * (1.0 - hyper.alpha) * (1.0 + hyper.beta);
    if second_order && !(mass > 0.0) {
        return Err(Error::InvalidArgument("modified momentum flow needs eta > 0".into()));
    }

    let rhs = |_: f64, y: &[f64]| -> Result<Vec<f64>> {
        if second_order {
            let (theta, u) = y.split_at(p);
            let (_, g) = value_and_grad(graph, theta, batch)?;
            let mut out = u.to_vec();
            out.extend(
                (0..p).map(|i| (-g[i] - hyper.lambda * theta[i] - (1.0 - hyper.beta) * u[i]) / mass),
            );
            Ok(out)
        } else {
            flow_velocity(graph, y, batch, spec.kind, &hyper)
        }
    };

    let mut y0 = theta0.to_vec();
    if second_order {
        y0.extend(std::iter::repeat_n(0.0, p));
    }
    let mut traj = FlowTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        conserved: vec![Vec::new(); descriptors.len()],
    };
    let mut k = 0usize;
    let mut record = |t: f64, y: &[f64]| {
        if k.is_multiple_of(spec.sample_every) || k == steps {
            let theta = &y[..p];
            traj.times.push(t);
            traj.states.push(theta.to_vec());
            for (d, series) in descriptors.iter().zip(traj.conserved.iter_mut()) {
                series.push(conserved_quantity(d, theta).expect("descriptor validated"));
            }
        }
        k += 1;
    };
    solve(rhs, spec.integrator, y0, spec.h, steps, &mut record)?;
    Ok(traj)
}
