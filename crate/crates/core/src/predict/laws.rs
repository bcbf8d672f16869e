//! Closed-form laws for the symmetry-tied quantities.
//!
//! Series arguments hold one value per optimizer step: entry `i` is the
//! statistic of step `i` and is taken to apply at time `i Δt`, with
//! `Δt = hyper.time_step()`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::HyperParams;
use crate::oscillator::{driven, first_order, homogeneous, ForcingSeries, OscillatorParams};
use crate::symmetry::SymmetryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Trapezoidal rule; the last sample is held past the end of the series.
    #[default]
    Trapezoid,
    /// The running sum `I ← e^{−2λΔt} I + Δt η c_i` kept by the optimizer.
    LeftRiemann,
}

/// `e^{−λt} s0`.
pub fn translation_sgd(s0: f64, lambda: f64, t: f64) -> f64 {
    (-lambda * t).exp() * s0
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")))
    }
}

/// Number of whole steps in `t`, tolerating rounding in `t = k Δt`.
fn steps_in(t: f64, dt: f64) -> usize {
    (t / dt + 1e-9).floor() as usize
}

fn covers(series: &[f64], dt: f64, t: f64) -> Result<()> {
    let needed = (t / dt - 1e-9).ceil().max(0.0) as usize;
    if series.len() < needed.max(1) {
        return Err(Error::SeriesTooShort { needed: needed.max(1), have: series.len() });
    }
    Ok(())
}

/// `e^{−2λt} x0 + η ∫₀ᵗ e^{−2λ(t−τ)} c(τ) dτ`, shared by the scale and
/// rescale laws.
fn norm_law(x0: f64, hyper: &HyperParams, series: &[f64], t: f64, quad: Quadrature) -> Result<f64> {
    check_time(t)?;
    let HyperParams { eta, lambda, .. } = *hyper;
    let dt = hyper.time_step();
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("continuous predictions need eta > 0".into()));
    }
    covers(series, dt, t)?;
    match quad {
        Quadrature::Trapezoid => {
            let n = steps_in(t, dt);
            let mut values: Vec<f64> = series.iter().take(n + 2).map(|c| eta * c).collect();
            if values.len() <= n + 1 {
                values.push(*values.last().expect("non-empty"));
            }
            let forcing = ForcingSeries::new(dt, values)?;
            first_order(2.0 * lambda, x0, Some(&forcing), t)
        }
        Quadrature::LeftRiemann => {
            let decay = (-2.0 * lambda * dt).exp();
            let n = steps_in(t, dt);
            let integral = series[..n].iter().fold(0.0, |acc, &c| decay * acc + dt * eta * c);
            Ok((-2.0 * lambda * t).exp() * x0 + integral)
        }
    }
}

/// `|θ_A(t)|²` from the per-step batch statistic `|g_A|²`.
pub fn scale_sgd(n0: f64, hyper: &HyperParams, gradnorm: &[f64], t: f64, quad: Quadrature) -> Result<f64> {
    norm_law(n0, hyper, gradnorm, t, quad)
}

/// `|θ_A1(t)|² − |θ_A2(t)|²` from the signed per-step statistic
/// `|g_A1|² − |g_A2|²`.
pub fn rescale_sgd(d0: f64, hyper: &HyperParams, signed: &[f64], t: f64, quad: Quadrature) -> Result<f64> {
    norm_law(d0, hyper, signed, t, quad)
}

/// Angular speed `√(2λ/η)` of the parameters on the stationary sphere.
pub fn stationary_angular_speed(hyper: &HyperParams) -> Result<f64> {
    let HyperParams { eta, lambda, .. } = *hyper;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("stationary speed needs eta > 0".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("no stationary sphere without weight decay (lambda = 0)".into()));
    }
    Ok((2.0 * lambda / eta).sqrt())
}

/// Exact unroll of the SGD update for the quantity of `kind` after `n`
/// steps. `series` holds the per-step batch statistic (unused for
/// translation).
pub fn discrete_exact(kind: SymmetryKind, initial: f64, hyper: &HyperParams, series: &[f64], n: usize) -> Result<f64> {
    let r = 1.0 - hyper.eta * hyper.lambda;
    match kind {
        SymmetryKind::Translation => Ok(r.powi(n as i32) * initial),
        SymmetryKind::Scale | SymmetryKind::Rescale => {
            if series.len() < n {
                return Err(Error::SeriesTooShort { needed: n, have: series.len() });
            }
            let (r2, e2) = (r * r, hyper.eta * hyper.eta);
            Ok(series[..n].iter().fold(initial, |x, &c| r2 * x + e2 * c))
        }
    }
}

/// Damping and natural frequency of the momentum oscillator for `kind`.
///
/// With `m = η(1−α)(1+β)/2`: `γ = (1−β)/(2m)` and `ω² = λ/m` for
/// translation, `2λ/m` for the squared-norm quantities.
pub fn momentum_params(kind: SymmetryKind, hyper: &HyperParams) -> Result<OscillatorParams> {
    hyper.validate()?;
    let HyperParams { eta, lambda, alpha, beta, .. } = *hyper;
    let m = 0.5 * eta * (1.0 - alpha) * (1.0 + beta);
    if !(m > 0.0) {
        return Err(Error::InvalidArgument("momentum oscillator needs eta > 0 and alpha < 1".into()));
    }
    let omega_sq = match kind {
        SymmetryKind::Translation => lambda / m,
        SymmetryKind::Scale | SymmetryKind::Rescale => 2.0 * lambda / m,
    };
    OscillatorParams::new((1.0 - beta) / (2.0 * m), omega_sq.sqrt())
}

pub fn translation_momentum(s0: f64, hyper: &HyperParams, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(homogeneous(momentum_params(SymmetryKind::Translation, hyper)?, s0, t))
}

/// Forcing `2|dθ_A/dt|²` on the optimizer grid: zero at rest, then the
/// post-update velocity statistic of each step.
fn velocity_forcing(hyper: &HyperParams, velocity: &[f64], t: f64) -> Result<ForcingSeries> {
    let dt = hyper.time_step();
    covers(velocity, dt, t)?;
    let n = (steps_in(t, dt) + 1).min(velocity.len());
    let values = std::iter::once(0.0).chain(velocity[..n].iter().map(|v| 2.0 * v)).collect();
    ForcingSeries::new(dt, values)
}

/// Driven oscillator for `|θ_A|²`; `velocity` is the per-step `|dθ_A/dt|²`
/// estimate.
pub fn scale_momentum(n0: f64, hyper: &HyperParams, velocity: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    let p = momentum_params(SymmetryKind::Scale, hyper)?;
    driven(p, n0, &velocity_forcing(hyper, velocity, t)?, t)
}

/// As [`scale_momentum`] with the signed statistic `|θ'_A1|² − |θ'_A2|²`.
pub fn rescale_momentum(d0: f64, hyper: &HyperParams, velocity: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    let p = momentum_params(SymmetryKind::Rescale, hyper)?;
    driven(p, d0, &velocity_forcing(hyper, velocity, t)?, t)
}

/// First-order law with forcing `η|ḡ_A|² + (η/S) tr`, where `ḡ` is the
/// full-batch gradient and `tr` the per-example gradient variance on the
/// group, both sampled every `dt`.
pub fn ito_scale_ode(n0: f64, hyper: &HyperParams, gradnorm: &[f64], trace: &[f64], dt: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if trace.len() != gradnorm.len() || trace.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "noise trace series has {} samples, gradient series {}",
            trace.len(),
            gradnorm.len()
        )));
    }
    let HyperParams { eta, lambda, batch_size, .. } = *hyper;
    let s = batch_size as f64;
    let values = gradnorm.iter().zip(trace).map(|(g, tr)| eta * g + eta / s * tr).collect();
    first_order(2.0 * lambda, n0, Some(&ForcingSeries::new(dt, values)?), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{solve, Integrator};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn translation_examples() {
        assert_eq!(translation_sgd(2.5, 0.0, 40.0), 2.5);
        assert_eq!(translation_sgd(2.5, 0.3, 0.0), 2.5);
        assert!((translation_sgd(1.0, 1e-3, 100.0) - 0.9048).abs() < 1e-4);
    }

    #[test]
    fn scale_closed_forms() {
        let zero = vec![0.0; 100];
        let h = HyperParams::sgd(0.1, 0.01);
        for quad in [Quadrature::Trapezoid, Quadrature::LeftRiemann] {
            let n = scale_sgd(3.0, &h, &zero, 10.0, quad).unwrap();
            assert!(rel(n, 3.0 * (-0.2f64).exp()) < 1e-14);
        }

        let c = 0.7;
        let flat = vec![c; 100];
        let h0 = HyperParams::sgd(0.1, 0.0);
        assert!(rel(scale_sgd(2.0, &h0, &flat, 10.0, Quadrature::Trapezoid).unwrap(), 2.0 + 0.1 * c * 10.0) < 1e-13);
        assert!(rel(scale_sgd(2.0, &h0, &flat, 10.0, Quadrature::LeftRiemann).unwrap(), 2.0 + 0.1 * c * 10.0) < 1e-13);

        let (eta, lambda) = (0.1, 1e-3);
        let h = HyperParams::sgd(eta, lambda);
        let long = vec![c; 1000];
        for t in [1.0, 37.3, 100.0] {
            let oracle = 2.0 * (-2.0 * lambda * t).exp() + eta * c / (2.0 * lambda) * (1.0 - (-2.0 * lambda * t).exp());
            assert!(rel(scale_sgd(2.0, &h, &long, t, Quadrature::Trapezoid).unwrap(), oracle) < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn rescale_examples() {
        let h = HyperParams::sgd(0.1, 0.02);
        assert!(rel(rescale_sgd(-1.5, &h, &[0.0; 50], 5.0, Quadrature::Trapezoid).unwrap(), -1.5 * (-0.2f64).exp()) < 1e-14);

        // Offline trapezoid of an antisymmetric series.
        let series: Vec<f64> = (0..200).map(|i| (0.37 * i as f64).sin() - (0.11 * i as f64).cos()).collect();
        let (eta, lambda) = (0.05, 0.03);
        let h = HyperParams::sgd(eta, lambda);
        let n = 150;
        let t = n as f64 * eta;
        let w = |i: usize| eta * series[i] * (-2.0 * lambda * (t - i as f64 * eta)).exp();
        let mut oracle = 0.0;
        for i in 0..n {
            oracle += 0.5 * eta * (w(i) + w(i + 1));
        }
        oracle += 0.4 * (-2.0 * lambda * t).exp();
        assert!((rescale_sgd(0.4, &h, &series, t, Quadrature::Trapezoid).unwrap() - oracle).abs() < 1e-10);

        let h0 = HyperParams::sgd(eta, 0.0);
        let sum: f64 = (0..n).map(|i| 0.5 * eta * eta * (series[i] + series[i + 1])).sum();
        assert!((rescale_sgd(0.0, &h0, &series, t, Quadrature::Trapezoid).unwrap() - sum).abs() < 1e-12);
    }

    #[test]
    fn coverage_and_held_sample() {
        let h = HyperParams::sgd(0.1, 0.0);
        let series = vec![1.0; 10];
        // Ten steps reach t = 1.0 with the last sample held.
        assert!(rel(scale_sgd(0.0, &h, &series, 1.0, Quadrature::Trapezoid).unwrap(), 0.1) < 1e-13);
        assert!(matches!(
            scale_sgd(0.0, &h, &series, 1.15, Quadrature::Trapezoid),
            Err(Error::SeriesTooShort { needed: 12, have: 10 })
        ));
        assert!(scale_sgd(0.0, &h, &[], 0.0, Quadrature::Trapezoid).is_err());
    }

    #[test]
    fn left_riemann_matches_accumulator() {
        use crate::optim::Accumulator;
        use crate::symmetry::SymmetryDescriptor;
        let d = SymmetryDescriptor::scale(vec![0], "s");
        let h = HyperParams::sgd(0.1, 0.004);
        let mut acc = Accumulator::new(&d, &h);
        for i in 0..40u64 {
            acc.accumulate(&d, &[(i as f64 * 0.3).cos()], i).unwrap();
        }
        let n = scale_sgd(0.0, &h, &acc.forcing, 4.0, Quadrature::LeftRiemann).unwrap();
        assert_eq!(n, acc.integral);
    }

    #[test]
    fn stationary_speed() {
        assert!((stationary_angular_speed(&HyperParams::sgd(0.1, 5e-4)).unwrap() - 0.1).abs() < 1e-15);
        assert!(stationary_angular_speed(&HyperParams::sgd(0.1, 0.0)).is_err());
        let a = stationary_angular_speed(&HyperParams::sgd(0.02, 3e-4)).unwrap();
        let b = stationary_angular_speed(&HyperParams::sgd(0.02 * 7.0, 3e-4 * 7.0)).unwrap();
        assert!(rel(a, b) < 1e-15);
    }

    #[test]
    fn discrete_examples() {
        let h = HyperParams::sgd(0.1, 0.01);
        assert_eq!(discrete_exact(SymmetryKind::Scale, 4.0, &h, &[], 0).unwrap(), 4.0);
        assert!((discrete_exact(SymmetryKind::Translation, 1.0, &h, &[], 10).unwrap() - 0.990045).abs() < 1e-6);
        let n = discrete_exact(SymmetryKind::Scale, 4.0, &h, &[0.0; 7], 7).unwrap();
        assert!(rel(n, 0.999f64.powi(14) * 4.0) < 1e-14);
        assert!(matches!(
            discrete_exact(SymmetryKind::Rescale, 0.0, &h, &[1.0; 3], 4),
            Err(Error::SeriesTooShort { needed: 4, have: 3 })
        ));
    }

    #[test]
    fn continuous_and_discrete_translation_agree_to_first_order() {
        for (eta, lambda) in [(0.1, 1e-3), (0.5, 0.01), (0.05, 0.1)] {
            let h = HyperParams::sgd(eta, lambda);
            for n in [1usize, 10, 100, 1000] {
                let s0 = -1.7;
                let gap = (translation_sgd(s0, lambda, eta * n as f64) - discrete_exact(SymmetryKind::Translation, s0, &h, &[], n).unwrap()).abs();
                assert!(gap <= (eta * lambda).powi(2) * n as f64 * s0.abs() * std::f64::consts::E);
            }
        }
    }

    #[test]
    fn momentum_parameters() {
        let p = momentum_params(SymmetryKind::Translation, &HyperParams::momentum(0.1, 5e-3, 0.0, 0.99)).unwrap();
        assert!((p.gamma - 0.05025).abs() < 1e-5 && (p.omega - 0.2242).abs() < 1e-4);
        assert!(p.gamma < p.omega);

        let p = momentum_params(SymmetryKind::Scale, &HyperParams::sgd(0.1, 5e-3)).unwrap();
        assert!((p.gamma - 10.0).abs() < 1e-12 && (p.omega - 0.2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn translation_momentum_limits() {
        let h = HyperParams::momentum(0.1, 0.0, 0.0, 0.99);
        for t in [0.0, 1.0, 50.0] {
            assert_eq!(translation_momentum(1.3, &h, t).unwrap(), 1.3);
        }
        // β = 0: overdamped, close to the first-order law.
        let h = HyperParams::sgd(0.1, 5e-3);
        assert!(momentum_params(SymmetryKind::Translation, &h).unwrap().regime() == crate::oscillator::Regime::Overdamped);
        for k in 0..=100 {
            let t = k as f64;
            let a = translation_momentum(1.0, &h, t).unwrap();
            assert!(rel(a, translation_sgd(1.0, 5e-3, t)) < 0.02, "t = {t}");
        }
    }

    /// RK4 on `x'' + 2γx' + ω²x = f` with piecewise-linear `f`.
    fn rk4_oracle(p: OscillatorParams, x0: f64, f: &ForcingSeries, t: f64, h: f64) -> f64 {
        let steps = (t / h).round() as usize;
        let fv = f.values().to_vec();
        let dt = f.dt();
        let force = move |s: f64| {
            let k = ((s / dt).floor() as usize).min(fv.len() - 2);
            let r = s / dt - k as f64;
            fv[k] + (fv[k + 1] - fv[k]) * r
        };
        let y = solve(
            |s, y: &[f64]| Ok(vec![y[1], force(s) - 2.0 * p.gamma * y[1] - p.omega * p.omega * y[0]]),
            Integrator::Rk4,
            vec![x0, 0.0],
            h,
            steps,
            |_, _| {},
        )
        .unwrap();
        y[0]
    }

    #[test]
    fn scale_momentum_against_rk4() {
        let h = HyperParams::momentum(0.1, 5e-3, 0.0, 0.9);
        let p = momentum_params(SymmetryKind::Scale, &h).unwrap();
        let zero = vec![0.0; 500];
        for t in [0.0, 3.0, 20.0] {
            assert!(rel(scale_momentum(2.0, &h, &zero, t).unwrap(), homogeneous(p, 2.0, t)) < 1e-14);
        }

        let c = 0.3;
        let velocity = vec![c; 4000];
        let t = 400.0;
        let f = velocity_forcing(&h, &velocity, t).unwrap();
        let oracle = rk4_oracle(p, 2.0, &f, t, 0.01);
        let got = scale_momentum(2.0, &h, &velocity, t).unwrap();
        assert!(rel(got, oracle) < 1e-4, "{got} vs {oracle}");
        // Near the steady state `2c/ω²`.
        assert!(rel(got, 2.0 * c / p.omega.powi(2)) < 0.05);
    }

    #[test]
    fn ito_reduces_to_first_order_law() {
        let h = HyperParams::sgd(0.1, 2e-3).with_batch_size(16);
        let g: Vec<f64> = (0..101).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let zero = vec![0.0; g.len()];
        let a = ito_scale_ode(1.5, &h, &g, &zero, 0.1, 10.0).unwrap();
        let b = scale_sgd(1.5, &h, &g, 10.0, Quadrature::Trapezoid).unwrap();
        assert!(rel(a, b) < 1e-14);

        let big = h.with_batch_size(1 << 40);
        let tr = vec![5.0; g.len()];
        assert!(rel(ito_scale_ode(1.5, &big, &g, &tr, 0.1, 10.0).unwrap(), b) < 1e-10);
        assert!(ito_scale_ode(1.5, &h, &g, &[], 0.1, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn scale_prediction_is_monotone_in_forcing(
            base in prop::collection::vec(0.0f64..5.0, 20..40),
            bump in prop::collection::vec(0.0f64..1.0, 40),
            lambda in 0.0f64..0.05,
        ) {
            let h = HyperParams::sgd(0.1, lambda);
            let larger: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let t = 0.1 * (base.len() - 1) as f64;
            for quad in [Quadrature::Trapezoid, Quadrature::LeftRiemann] {
                let a = scale_sgd(1.0, &h, &base, t, quad).unwrap();
                let b = scale_sgd(1.0, &h, &larger, t, quad).unwrap();
                prop_assert!(b >= a);
                prop_assert!(a >= (-2.0 * lambda * t).exp() * (1.0 - 1e-15));
            }
        }
    }
}
