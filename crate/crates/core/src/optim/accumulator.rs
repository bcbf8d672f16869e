use serde::{Deserialize, Serialize};

use super::HyperParams;
use crate::error::{Error, Result};
use crate::symmetry::{SymmetryDescriptor, SymmetryKind};

/// Per-descriptor integral buffer and raw per-step series.
///
/// `forcing[i]` is the step-`i` statistic of the pre-update batch gradient:
/// `⟨g, 1_A⟩` for translation, `|g_A|²` for scale and `|g_A1|² − |g_A2|²`
/// for rescale. `integral` is the left-Riemann sum
/// `I ← e^{−2λΔt} I + Δt η forcing[i]`, meaningful for scale and rescale.
///
/// `velocity[i]` is the matching statistic of the post-update derivative
/// estimate `dθ/dt ≈ −v_{i+1} / (1 − α)`; for plain SGD, `v = g + λθ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub kind: SymmetryKind,
    pub dt: f64,
    pub decay: f64,
    pub eta: f64,
    pub integral: f64,
    pub forcing: Vec<f64>,
    pub velocity: Vec<f64>,
}

fn statistic(desc: &SymmetryDescriptor, x: &[f64]) -> f64 {
    let sq = |set: &[usize]| set.iter().map(|&i| x[i] * x[i]).sum::<f64>();
    match desc.kind {
        SymmetryKind::Translation => desc.set_a.iter().map(|&i| x[i]).sum(),
        SymmetryKind::Scale => sq(&desc.set_a),
        SymmetryKind::Rescale => sq(&desc.set_a) - sq(&desc.set_b),
    }
}

fn velocity_statistic(desc: &SymmetryDescriptor, v: &[f64], alpha: f64) -> f64 {
    let s = 1.0 / (1.0 - alpha);
    statistic(desc, v) * if desc.kind == SymmetryKind::Translation { -s } else { s * s }
}

/// What one step adds to an accumulator; see [`Accumulator::prepare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUpdate {
    pub integral: f64,
    pub forcing: f64,
    pub velocity: f64,
}

impl StepUpdate {
    pub fn is_finite(&self) -> bool {
        self.integral.is_finite() && self.forcing.is_finite() && self.velocity.is_finite()
    }
}

impl Accumulator {
    pub fn new(desc: &SymmetryDescriptor, hyper: &HyperParams) -> Self {
        Self {
            kind: desc.kind,
            dt: hyper.time_step(),
            decay: (-2.0 * hyper.lambda * hyper.time_step()).exp(),
            eta: hyper.eta,
            integral: 0.0,
            forcing: Vec::new(),
            velocity: Vec::new(),
        }
    }

    /// Steps recorded so far.
    pub fn steps(&self) -> u64 {
        self.forcing.len() as u64
    }

    /// Record step `step` from the batch gradient used by that step. Must be
    /// called exactly once per step, in order.
    pub fn accumulate(&mut self, desc: &SymmetryDescriptor, g: &[f64], step: u64) -> Result<()> {
        if step != self.steps() {
            return Err(Error::StepMismatch { expected: self.steps(), got: step });
        }
        desc.check_range(g.len())?;
        let c = statistic(desc, g);
        self.integral = self.decay * self.integral + self.dt * self.eta * c;
        self.forcing.push(c);
        Ok(())
    }

    /// Record the velocity of step `step`, after `accumulate` for that step.
    pub fn record_velocity(&mut self, desc: &SymmetryDescriptor, v: &[f64], alpha: f64, step: u64) -> Result<()> {
        let expected = self.velocity.len() as u64;
        if step != expected || step + 1 != self.steps() {
            return Err(Error::StepMismatch { expected, got: step });
        }
        desc.check_range(v.len())?;
        self.velocity.push(velocity_statistic(desc, v, alpha));
        Ok(())
    }

    /// Both records of step `step` at once, without touching `self`; apply
    /// them with [`commit`](Self::commit).
    pub fn prepare(&self, desc: &SymmetryDescriptor, g: &[f64], v: &[f64], alpha: f64, step: u64) -> Result<StepUpdate> {
        if step != self.steps() || self.velocity.len() != self.forcing.len() {
            return Err(Error::StepMismatch { expected: self.steps(), got: step });
        }
        desc.check_range(g.len())?;
        desc.check_range(v.len())?;
        let c = statistic(desc, g);
        Ok(StepUpdate {
            integral: self.decay * self.integral + self.dt * self.eta * c,
            forcing: c,
            velocity: velocity_statistic(desc, v, alpha),
        })
    }

    pub fn commit(&mut self, u: StepUpdate) {
        self.integral = u.integral;
        self.forcing.push(u.forcing);
        self.velocity.push(u.velocity);
    }

    /// Recompute the integral from the stored series.
    pub fn replay(&self) -> f64 {
        self.forcing
            .iter()
            .fold(0.0, |acc, &c| self.decay * acc + self.dt * self.eta * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale() -> SymmetryDescriptor {
        SymmetryDescriptor::scale(vec![0, 1], "s")
    }

    #[test]
    fn prepare_commit_matches_accumulate() {
        let d = scale();
        let h = HyperParams::momentum(0.1, 0.01, 0.2, 0.9);
        let (mut a, mut b) = (Accumulator::new(&d, &h), Accumulator::new(&d, &h));
        for step in 0..5u64 {
            let g = [0.1 * step as f64, -0.7];
            let v = [0.3, 0.2 * step as f64];
            a.accumulate(&d, &g, step).unwrap();
            a.record_velocity(&d, &v, h.alpha, step).unwrap();
            let u = b.prepare(&d, &g, &v, h.alpha, step).unwrap();
            b.commit(u);
        }
        assert_eq!(a, b);
        assert!(b.prepare(&d, &[0.0, 0.0], &[0.0, 0.0], 0.0, 3).is_err());
    }

    #[test]
    fn zero_gradients_leave_integral_at_zero() {
        let d = scale();
        let mut acc = Accumulator::new(&d, &HyperParams::sgd(0.1, 0.01));
        for step in 0..10 {
            acc.accumulate(&d, &[0.0, 0.0, 3.0], step).unwrap();
        }
        assert_eq!(acc.integral, 0.0);
    }

    #[test]
    fn geometric_sum_oracles() {
        let d = scale();
        let (eta, c, n) = (0.1, 0.25, 50u64);
        let g = [0.3, 0.4];
        let mut flat = Accumulator::new(&d, &HyperParams::sgd(eta, 0.0));
        for step in 0..n {
            flat.accumulate(&d, &g, step).unwrap();
        }
        assert!((flat.integral - n as f64 * eta * eta * c).abs() < 1e-14);

        let lambda = 0.05;
        let mut decayed = Accumulator::new(&d, &HyperParams::sgd(eta, lambda));
        for step in 0..n {
            decayed.accumulate(&d, &g, step).unwrap();
        }
        let r = (-2.0 * lambda * eta).exp();
        let oracle = eta * eta * c * (1.0 - r.powi(n as i32)) / (1.0 - r);
        assert!((decayed.integral - oracle).abs() <= 1e-12 * oracle);
        assert!((decayed.replay() - decayed.integral).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn step_mismatch() {
        let d = scale();
        let mut acc = Accumulator::new(&d, &HyperParams::sgd(0.1, 0.0));
        acc.accumulate(&d, &[1.0, 1.0], 0).unwrap();
        assert!(matches!(acc.accumulate(&d, &[1.0, 1.0], 2), Err(Error::StepMismatch { expected: 1, got: 2 })));
        assert!(matches!(acc.accumulate(&d, &[1.0, 1.0], 0), Err(Error::StepMismatch { .. })));
    }

    #[test]
    fn momentum_time_step_and_velocity() {
        let d = SymmetryDescriptor::rescale(vec![0], vec![1], "r");
        let h = HyperParams::momentum(0.1, 0.0, 0.5, 0.9);
        let mut acc = Accumulator::new(&d, &h);
        assert_eq!(acc.dt, 0.05);
        acc.accumulate(&d, &[1.0, 2.0], 0).unwrap();
        acc.record_velocity(&d, &[1.0, 0.5], 0.5, 0).unwrap();
        assert_eq!(acc.forcing, vec![-3.0]);
        assert_eq!(acc.velocity, vec![(1.0 - 0.25) * 4.0]);
        assert!(acc.record_velocity(&d, &[1.0, 0.5], 0.5, 1).is_err());
    }
}
