use serde::{Deserialize, Serialize};

/// Radii after `n` steps of size `η` on the rotation field
/// `f(x) = [[0, −1], [1, 0]] x` from `x0 = (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationRadii {
    /// Explicit Euler iterate.
    pub discrete: f64,
    /// Exact flow `x' = f(x)` at `t = ηn`.
    pub flow: f64,
    /// Exact modified flow `x' = f(x) + (η/2) x` at `t = ηn`.
    pub modified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationPaths {
    pub discrete: Vec<[f64; 2]>,
    pub flow: Vec<[f64; 2]>,
    pub modified: Vec<[f64; 2]>,
}

/// The three trajectories sampled at `t = ηk`, `k = 0..=n`.
pub fn rotation_paths(eta: f64, n: usize) -> RotationPaths {
    let mut discrete = Vec::with_capacity(n + 1);
    let mut x = [1.0, 0.0];
    discrete.push(x);
    for _ in 0..n {
        x = [x[0] - eta * x[1], x[1] + eta * x[0]];
        discrete.push(x);
    }
    let flow = (0..=n)
        .map(|k| {
            let t = eta * k as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let modified = (0..=n)
        .map(|k| {
            let t = eta * k as f64;
            let r = (0.5 * eta * t).exp();
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    RotationPaths { discrete, flow, modified }
}

pub fn rotation_demo(eta: f64, n: usize) -> RotationRadii {
    let paths = rotation_paths(eta, n);
    let radius = |p: &[[f64; 2]]| {
        let [a, b] = p[n];
        a.hypot(b)
    };
    RotationRadii {
        discrete: radius(&paths.discrete),
        flow: radius(&paths.flow),
        modified: radius(&paths.modified),
    }
}
