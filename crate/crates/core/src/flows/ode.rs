use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// One fixed step of `y' = f(t, y)`.
pub fn step<F>(f: &mut F, integrator: Integrator, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    match integrator {
        Integrator::Euler => Ok(axpy(y, h, &f(t, y)?)),
        Integrator::Rk4 => {
            let k1 = f(t, y)?;
            let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
            let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
            let k4 = f(t + h, &axpy(y, h, &k3))?;
            Ok(y
                .iter()
                .enumerate()
                .map(|(i, &yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
    }
}

/// Integrate `steps` fixed steps from `t = 0`, calling `observe(t, y)` at the
/// start and after every step. Stops with [`Error::Divergence`] on the
/// first non-finite state.
pub fn solve<F, O>(
    mut f: F,
    integrator: Integrator,
    y0: Vec<f64>,
    h: f64,
    steps: usize,
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    O: FnMut(f64, &[f64]),
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let mut y = y0;
    observe(0.0, &y);
    for k in 0..steps {
        let t = k as f64 * h;
        y = match step(&mut f, integrator, t, &y, h) {
            Ok(y) => y,
            Err(Error::NonFinite { .. }) => return Err(Error::Divergence { at: format!("t = {t}") }),
            Err(e) => return Err(e),
        };
        let t1 = (k + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { at: format!("t = {t1}") });
        }
        observe(t1, &y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_orders() {
        let f = |_: f64, y: &[f64]| Ok(vec![-y[0]]);
        let err = |integrator, steps: usize| {
            let y = solve(f, integrator, vec![1.0], 1.0 / steps as f64, steps, |_, _| {}).unwrap();
            (y[0] - (-1.0f64).exp()).abs()
        };
        let rk = err(Integrator::Rk4, 10) / err(Integrator::Rk4, 20);
        assert!((14.0..18.0).contains(&rk), "{rk}");
        let eu = err(Integrator::Euler, 100) / err(Integrator::Euler, 200);
        assert!((1.8..2.2).contains(&eu), "{eu}");
    }

    #[test]
    fn divergence_reports_time() {
        let f = |_: f64, y: &[f64]| Ok(vec![y[0] * y[0]]);
        let r = solve(f, Integrator::Euler, vec![1.0], 1.0, 20, |_, _| {});
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }
}
