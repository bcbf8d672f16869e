use serde::{Deserialize, Serialize};

use super::descriptor::{act, generator, SymmetryDescriptor, SymmetryKind};
use crate::error::{Error, Result};
use crate::tensor::{grad_and_hvp, value_and_grad, Graph};

/// Added to every residual denominator.
pub const RESIDUAL_DELTA: f64 = 1e-30;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `⟨g, ∂αψ⟩ / (‖g‖ ‖∂αψ‖ + δ)`.
pub fn gradient_residual<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    desc: &SymmetryDescriptor,
) -> Result<f64> {
    let gen = generator(desc, theta)?;
    let (_, g) = value_and_grad(graph, theta, batch)?;
    Ok(dot(&g, &gen) / (norm(&g) * norm(&gen) + RESIDUAL_DELTA))
}

/// Norm of the differentiated gradient identity, relative to
/// `‖g‖ + ‖H ∂αψ‖`:
/// `H 1_A`, `H θ_A + g_A`, or `H(θ_A1 − θ_A2) + g_A1 − g_A2`.
pub fn hessian_residual<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    desc: &SymmetryDescriptor,
) -> Result<f64> {
    let gen = generator(desc, theta)?;
    let (g, hv) = grad_and_hvp(graph, theta, batch, &gen)?;
    Ok(hessian_identity(desc, &g, &hv) / (norm(&g) + norm(&hv) + RESIDUAL_DELTA))
}

fn hessian_identity(desc: &SymmetryDescriptor, g: &[f64], hv: &[f64]) -> f64 {
    let mut r = hv.to_vec();
    match desc.kind {
        SymmetryKind::Translation => {}
        SymmetryKind::Scale => {
            for &i in &desc.set_a {
                r[i] += g[i];
            }
        }
        SymmetryKind::Rescale => {
            for &i in &desc.set_a {
                r[i] += g[i];
            }
            for &i in &desc.set_b {
                r[i] -= g[i];
            }
        }
    }
    norm(&r)
}

/// `⟨θ, [∂α∂θψ] g⟩` relative to `‖g‖ ‖∂αψ‖`; identically zero for
/// translation groups.
pub fn theorem_condition<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    desc: &SymmetryDescriptor,
) -> Result<f64> {
    if desc.kind == SymmetryKind::Translation {
        desc.check_range(theta.len())?;
        return Ok(0.0);
    }
    let gen = generator(desc, theta)?;
    let (_, g) = value_and_grad(graph, theta, batch)?;
    Ok(theorem_value(desc, theta, &g) / (norm(&g) * norm(&gen) + RESIDUAL_DELTA))
}

fn theorem_value(desc: &SymmetryDescriptor, theta: &[f64], g: &[f64]) -> f64 {
    let part = |set: &[usize]| set.iter().map(|&i| theta[i] * g[i]).sum::<f64>();
    match desc.kind {
        SymmetryKind::Translation => 0.0,
        SymmetryKind::Scale => part(&desc.set_a),
        SymmetryKind::Rescale => part(&desc.set_a) - part(&desc.set_b),
    }
}

/// All three residuals from a single gradient + Hessian-vector evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryResiduals {
    pub gradient: f64,
    pub hessian: f64,
    pub theorem: f64,
}

impl GeometryResiduals {
    pub fn max_abs(&self) -> f64 {
        self.gradient.abs().max(self.hessian.abs()).max(self.theorem.abs())
    }
}

pub fn geometry_residuals<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    desc: &SymmetryDescriptor,
) -> Result<GeometryResiduals> {
    let gen = generator(desc, theta)?;
    let (g, hv) = grad_and_hvp(graph, theta, batch, &gen)?;
    let denom = norm(&g) * norm(&gen) + RESIDUAL_DELTA;
    Ok(GeometryResiduals {
        gradient: dot(&g, &gen) / denom,
        hessian: hessian_identity(desc, &g, &hv) / (norm(&g) + norm(&hv) + RESIDUAL_DELTA),
        theorem: theorem_value(desc, theta, &g) / denom,
    })
}

/// `|L(θ) − L(ψ(θ, α))|` and `‖g(θ) − T_α g(ψ(θ, α))‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceGap {
    pub loss_gap: f64,
    pub gradient_gap: f64,
}

/// Compares loss and gradient at `θ` and at the transformed point. The
/// transport `T_α` is the identity for translation, `α` on `A` for scale and
/// `α` on `A1`, `1/α` on `A2` for rescale.
pub fn equivariance_check<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    desc: &SymmetryDescriptor,
    alpha: f64,
) -> Result<EquivarianceGap> {
    let mut moved = theta.to_vec();
    act(desc, &mut moved, alpha)?;
    let (l0, g0) = value_and_grad(graph, theta, batch)?;
    let (l1, mut g1) = value_and_grad(graph, &moved, batch)?;
    match desc.kind {
        SymmetryKind::Translation => {}
        SymmetryKind::Scale | SymmetryKind::Rescale => {
            for &i in &desc.set_a {
                g1[i] *= alpha;
            }
            for &i in &desc.set_b {
                g1[i] /= alpha;
            }
        }
    }
    let diff: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a - b).collect();
    Ok(EquivarianceGap { loss_gap: (l0 - l1).abs(), gradient_gap: norm(&diff) })
}

/// Low-rank structure of minibatch noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCheck {
    /// Largest `|gradient_residual|` over the batches.
    pub max_batch_residual: f64,
    /// `‖Σ̂ ∂αψ‖ / (‖Σ̂‖_F ‖∂αψ‖ + δ)` for the sample covariance `Σ̂` of the
    /// batch gradients.
    pub covariance_residual: f64,
}

impl NoiseCheck {
    pub fn max(&self) -> f64 {
        self.max_batch_residual.max(self.covariance_residual)
    }
}

/// The covariance is applied through the centered gradients, so the
/// `P × P` matrix is never formed.
pub fn noise_lowrank_check<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batches: &[&G::Batch],
    desc: &SymmetryDescriptor,
) -> Result<NoiseCheck> {
    if batches.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "noise check needs at least 2 batches, got {}",
            batches.len()
        )));
    }
    let gen = generator(desc, theta)?;
    let gen_norm = norm(&gen);
    let mut grads = Vec::with_capacity(batches.len());
    let mut max_batch_residual: f64 = 0.0;
    for batch in batches {
        let (_, g) = value_and_grad(graph, theta, batch)?;
        let r = dot(&g, &gen) / (norm(&g) * gen_norm + RESIDUAL_DELTA);
        max_batch_residual = max_batch_residual.max(r.abs());
        grads.push(g);
    }
    let b = grads.len() as f64;
    let p = theta.len();
    let mut mean = vec![0.0; p];
    for g in &grads {
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x / b;
        }
    }
    let centered: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let scale = 1.0 / (b - 1.0);
    let mut sigma_gen = vec![0.0; p];
    for d in &centered {
        let c = dot(d, &gen) * scale;
        for (o, x) in sigma_gen.iter_mut().zip(d) {
            *o += c * x;
        }
    }
    // ‖Σ̂‖_F² = Σ_{b,b'} ⟨d_b, d_b'⟩² / (B − 1)².
    let mut frob_sq = 0.0;
    for i in 0..centered.len() {
        for j in i..centered.len() {
            let k = dot(&centered[i], &centered[j]);
            frob_sq += if i == j { k * k } else { 2.0 * k * k };
        }
    }
    let frob = frob_sq.sqrt() * scale;
    Ok(NoiseCheck {
        max_batch_residual,
        covariance_residual: norm(&sigma_gen) / (frob * gen_norm + RESIDUAL_DELTA),
    })
}
