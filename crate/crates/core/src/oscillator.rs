//! Closed-form solutions of first-order relaxation and damped harmonic
//! oscillators, with forcing handled by trapezoidal convolution.
//!
//! The oscillator equation is `x'' + 2γ x' + ω² x = f(t)` with `x(0) = x0`
//! and `x'(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative width of the band around `γ = ω` treated as critical damping.
pub const CRITICAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Overdamped,
    Critical,
    Underdamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub gamma: f64,
    pub omega: f64,
}

impl OscillatorParams {
    pub fn new(gamma: f64, omega: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite() && omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "oscillator needs finite gamma >= 0 and omega >= 0, got ({gamma}, {omega})"
            )));
        }
        Ok(Self { gamma, omega })
    }

    /// `γ² − ω²`.
    pub fn discriminant(&self) -> f64 {
        (self.gamma - self.omega) * (self.gamma + self.omega)
    }

    pub fn regime(&self) -> Regime {
        let d = self.discriminant();
        let band = CRITICAL_BAND * self.gamma.powi(2).max(self.omega.powi(2));
        if d.abs() <= band {
            Regime::Critical
        } else if d > 0.0 {
            Regime::Overdamped
        } else {
            Regime::Underdamped
        }
    }
}

/// Uniformly sampled forcing `f(i Δt)`, `i = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSeries {
    dt: f64,
    values: Vec<f64>,
}

impl ForcingSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("forcing step must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, have: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "forcing series" });
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Last sampled time.
    pub fn end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    fn check_support(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t > self.end() + 1e-9 * self.dt {
            return Err(Error::Support { t, end: self.end() });
        }
        Ok(())
    }

    /// `∫₀ᵗ K(t − τ) f(τ) dτ` by the trapezoidal rule on the sample grid, with
    /// a final partial panel when `t` falls between samples.
    pub fn convolve(&self, kernel: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
        self.check_support(t)?;
        let n = self.values.len();
        let k = ((t / self.dt + 1e-9).floor() as usize).min(n - 1);
        let f = &self.values;
        let dt = self.dt;
        let mut acc = 0.0;
        for i in 0..k {
            let (a, b) = (i as f64 * dt, (i + 1) as f64 * dt);
            acc += 0.5 * dt * (kernel(t - a) * f[i] + kernel(t - b) * f[i + 1]);
        }
        let tk = k as f64 * dt;
        let rest = t - tk;
        if rest > 1e-12 * dt && k + 1 < n {
            let ft = f[k] + (f[k + 1] - f[k]) * rest / dt;
            acc += 0.5 * rest * (kernel(t - tk) * f[k] + kernel(0.0) * ft);
        }
        Ok(acc)
    }
}

/// `x(t) = e^{−λt} x0 + ∫₀ᵗ e^{−λ(t−τ)} f(τ) dτ`.
pub fn first_order(lambda: f64, x0: f64, forcing: Option<&ForcingSeries>, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let mut x = (-lambda * t).exp() * x0;
    if let Some(f) = forcing {
        x += f.convolve(|s| (-lambda * s).exp(), t)?;
    }
    Ok(x)
}

/// Homogeneous solution with `x(0) = x0`, `x'(0) = 0`.
pub fn homogeneous(p: OscillatorParams, x0: f64, t: f64) -> f64 {
    let g = p.gamma;
    if p.omega == 0.0 {
        // No restoring force and zero initial velocity: x stays put.
        return x0;
    }
    match p.regime() {
        Regime::Critical => x0 * (-g * t).exp() * (1.0 + g * t),
        Regime::Overdamped => {
            let s = p.discriminant().sqrt();
            if s * t <= 20.0 {
                x0 * (-g * t).exp() * ((s * t).cosh() + g * t * sinhc(s * t))
            } else {
                // Split into the two real modes; s − γ = −ω²/(γ + s) avoids
                // cancellation for the slow mode.
                let slow = -(p.omega * p.omega) / (g + s);
                let fast = -g - s;
                x0 * (0.5 * (1.0 + g / s) * (slow * t).exp() + 0.5 * (1.0 - g / s) * (fast * t).exp())
            }
        }
        Regime::Underdamped => {
            let w = (-p.discriminant()).sqrt();
            x0 * (-g * t).exp() * ((w * t).cos() + g / w * (w * t).sin())
        }
    }
}

/// Impulse response: `G(0) = 0`, `G'(0) = 1`, zero for `t < 0`.
pub fn green(p: OscillatorParams, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let g = p.gamma;
    match p.regime() {
        Regime::Critical => t * (-g * t).exp(),
        Regime::Overdamped => {
            let s = p.discriminant().sqrt();
            if s * t <= 20.0 {
                (-g * t).exp() * t * sinhc(s * t)
            } else {
                let slow = -(p.omega * p.omega) / (g + s);
                ((slow * t).exp() - ((-g - s) * t).exp()) / (2.0 * s)
            }
        }
        Regime::Underdamped => {
            let w = (-p.discriminant()).sqrt();
            (-g * t).exp() * (w * t).sin() / w
        }
    }
}

/// `homogeneous(p, x0, t) + ∫₀ᵗ G(t − τ) f(τ) dτ`.
pub fn driven(p: OscillatorParams, x0: f64, forcing: &ForcingSeries, t: f64) -> Result<f64> {
    let conv = forcing.convolve(|s| green(p, s), t)?;
    Ok(homogeneous(p, x0, t) + conv)
}

/// `sinh(x) / x`, accurate near zero.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn regimes() {
        assert_eq!(OscillatorParams::new(2.0, 1.0).unwrap().regime(), Regime::Overdamped);
        assert_eq!(OscillatorParams::new(1.0, 1.0).unwrap().regime(), Regime::Critical);
        assert_eq!(OscillatorParams::new(0.5, 1.0).unwrap().regime(), Regime::Underdamped);
        assert!(OscillatorParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn first_order_examples() {
        assert_relative_eq!(first_order(0.5, 2.0, None, 2.0).unwrap(), 2.0 * (-1.0f64).exp());
        assert_eq!(first_order(0.5, 2.0, None, 0.0).unwrap(), 2.0);
        let lambda = 0.5;
        let t_end = 20.0 / lambda;
        let f = ForcingSeries::new(0.002, vec![3.0; 20001]).unwrap();
        let x = first_order(lambda, 0.0, Some(&f), t_end).unwrap();
        assert_relative_eq!(x, 3.0 / lambda, max_relative = 1e-6);
        assert!(matches!(first_order(lambda, 0.0, Some(&f), 41.0), Err(Error::Support { .. })));
    }

    #[test]
    fn homogeneous_examples() {
        let crit = OscillatorParams::new(0.7, 0.7).unwrap();
        assert_relative_eq!(homogeneous(crit, 1.0, 2.0), (-1.4f64).exp() * 2.4, max_relative = 1e-15);
        let free = OscillatorParams::new(0.0, 1.0).unwrap();
        assert_relative_eq!(homogeneous(free, 1.0, std::f64::consts::PI), -1.0, max_relative = 1e-14);
        for g in [0.1, 1.0, 30.0] {
            let p = OscillatorParams::new(g, 0.0).unwrap();
            for t in [0.0, 1.0, 10.0, 1000.0] {
                assert_relative_eq!(homogeneous(p, 2.5, t), 2.5, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn green_examples() {
        let free = OscillatorParams::new(0.0, 1.0).unwrap();
        assert_eq!(green(free, 0.0), 0.0);
        assert_relative_eq!(green(free, 1.3), 1.3f64.sin(), max_relative = 1e-14);
        let crit = OscillatorParams::new(1.0, 1.0).unwrap();
        let near = OscillatorParams::new(1.0, (1.0f64 - 1e-12).sqrt()).unwrap();
        assert!((green(near, 1.0) - green(crit, 1.0)).abs() <= 1e-9);
        let outside = OscillatorParams::new(1.0, (1.0f64 - 1e-6).sqrt()).unwrap();
        assert_eq!(outside.regime(), Regime::Overdamped);
        assert!((green(outside, 1.0) - green(crit, 1.0)).abs() <= 1e-7);
    }

    #[test]
    fn zero_forcing_is_homogeneous() {
        let p = OscillatorParams::new(0.3, 1.2).unwrap();
        let f = ForcingSeries::new(0.1, vec![0.0; 101]).unwrap();
        assert_eq!(driven(p, 1.5, &f, 7.3).unwrap(), homogeneous(p, 1.5, 7.3));
    }

    #[test]
    fn single_sample_forcing_is_a_scaled_green_function() {
        let p = OscillatorParams::new(0.3, 1.2).unwrap();
        let dt = 0.01;
        let mut v = vec![0.0; 1001];
        v[200] = 5.0;
        let f = ForcingSeries::new(dt, v).unwrap();
        let t = 6.0;
        let x = driven(p, 0.0, &f, t).unwrap();
        assert_relative_eq!(x, dt * 5.0 * green(p, t - 2.0), max_relative = 1e-12);
    }

    #[test]
    fn convolution_is_second_order() {
        let p = OscillatorParams::new(0.4, 1.5).unwrap();
        let forcing = |t: f64| (0.7 * t).sin() + 1.0;
        let series = |dt: f64| {
            let n = (8.0 / dt).round() as usize;
            ForcingSeries::new(dt, (0..=n).map(|i| forcing(i as f64 * dt)).collect()).unwrap()
        };
        let fine = driven(p, 1.0, &series(0.0005), 8.0).unwrap();
        let e1 = (driven(p, 1.0, &series(0.04), 8.0).unwrap() - fine).abs();
        let e2 = (driven(p, 1.0, &series(0.02), 8.0).unwrap() - fine).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn partial_panel_interpolates() {
        let f = ForcingSeries::new(1.0, vec![0.0, 2.0]).unwrap();
        // ∫₀^0.5 2τ dτ = 0.25.
        assert_relative_eq!(f.convolve(|_| 1.0, 0.5).unwrap(), 0.25, max_relative = 1e-15);
    }
}
