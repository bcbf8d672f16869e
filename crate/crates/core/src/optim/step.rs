use super::HyperParams;
use crate::error::{Error, Result};
use crate::tensor::{value_and_grad, Graph};

fn check(theta: &[f64], op: &'static str) -> Result<()> {
    if theta.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

/// `θ ← θ − η (g + λθ)`, which equals `(1 − ηλ)θ − ηg`.
pub fn sgd_update(theta: &mut [f64], g: &[f64], hyper: &HyperParams) -> Result<()> {
    if g.len() != theta.len() {
        return Err(Error::Shape(format!("gradient length {} != parameter length {}", g.len(), theta.len())));
    }
    let HyperParams { eta, lambda, .. } = *hyper;
    for (t, gi) in theta.iter_mut().zip(g) {
        *t -= eta * (gi + lambda * *t);
    }
    check(theta, "sgd update")
}

/// `v ← βv + (1 − α)(g + λθ)`, then `θ ← θ − ηv`.
pub fn momentum_update(theta: &mut [f64], v: &mut [f64], g: &[f64], hyper: &HyperParams) -> Result<()> {
    if g.len() != theta.len() || v.len() != theta.len() {
        return Err(Error::Shape(format!(
            "gradient/velocity lengths {}/{} != parameter length {}",
            g.len(),
            v.len(),
            theta.len()
        )));
    }
    let HyperParams { eta, lambda, alpha, beta, .. } = *hyper;
    for ((t, vi), gi) in theta.iter_mut().zip(v.iter_mut()).zip(g) {
        *vi = beta * *vi + (1.0 - alpha) * (gi + lambda * *t);
        *t -= eta * *vi;
    }
    check(theta, "momentum update")?;
    check(v, "momentum update")
}

/// One SGD step on `batch`; returns the batch loss and gradient that were
/// used.
pub fn sgd_step<G: Graph + ?Sized>(
    graph: &G,
    theta: &mut [f64],
    batch: &G::Batch,
    hyper: &HyperParams,
) -> Result<(f64, Vec<f64>)> {
    let (loss, g) = value_and_grad(graph, theta, batch)?;
    sgd_update(theta, &g, hyper)?;
    Ok((loss, g))
}

pub fn momentum_step<G: Graph + ?Sized>(
    graph: &G,
    theta: &mut [f64],
    v: &mut [f64],
    batch: &G::Batch,
    hyper: &HyperParams,
) -> Result<(f64, Vec<f64>)> {
    let (loss, g) = value_and_grad(graph, theta, batch)?;
    momentum_update(theta, v, &g, hyper)?;
    Ok((loss, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::QuadraticForm;
    use proptest::prelude::*;

    #[test]
    fn sgd_examples() {
        let h = HyperParams::sgd(0.1, 0.01);
        let mut theta = vec![1.0, 2.0];
        sgd_update(&mut theta, &[0.1, -0.2], &h).unwrap();
        assert!((theta[0] - 0.989).abs() < 1e-15 && (theta[1] - 2.018).abs() < 1e-15);

        let mut still = vec![1.0, 2.0];
        sgd_update(&mut still, &[0.1, -0.2], &HyperParams::sgd(0.0, 0.01)).unwrap();
        assert_eq!(still, vec![1.0, 2.0]);
    }

    #[test]
    fn momentum_examples() {
        let h = HyperParams::momentum(0.1, 0.0, 0.0, 0.5);
        let (mut theta, mut v) = (vec![1.0], vec![2.0]);
        momentum_update(&mut theta, &mut v, &[0.0], &h).unwrap();
        assert_eq!(v, vec![1.0]);
        assert!((theta[0] - 0.9).abs() < 1e-15);

        // From rest, the first momentum step is an SGD step.
        let h = HyperParams::momentum(0.1, 0.0, 0.0, 0.9);
        let (mut theta, mut v) = (vec![1.0, -1.0], vec![0.0, 0.0]);
        momentum_update(&mut theta, &mut v, &[0.3, 0.4], &h).unwrap();
        assert_eq!(v, vec![0.3, 0.4]);
        assert_eq!(theta, vec![1.0 - 0.1 * 0.3, -1.0 - 0.1 * 0.4]);
    }

    #[test]
    fn divergence_is_reported() {
        let mut theta = vec![1e308];
        let r = sgd_update(&mut theta, &[-1e308], &HyperParams::sgd(10.0, 0.0));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn steps_use_graph_gradient() {
        let q = QuadraticForm::diagonal(&[1.0, 2.0]);
        let mut theta = vec![1.0, 1.0];
        let (loss, g) = sgd_step(&q, &mut theta, &(), &HyperParams::sgd(0.1, 0.0)).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(g, vec![1.0, 2.0]);
        assert_eq!(theta, vec![0.9, 0.8]);
    }

    proptest! {
        #[test]
        fn coupled_and_decoupled_decay_agree(
            theta in prop::collection::vec(-10.0f64..10.0, 1..8),
            eta in 0.0f64..1.0,
            lambda in 0.0f64..0.1,
        ) {
            let g: Vec<f64> = theta.iter().map(|t| (t * 1.7).sin()).collect();
            let mut a = theta.clone();
            sgd_update(&mut a, &g, &HyperParams::sgd(eta, lambda)).unwrap();
            for i in 0..theta.len() {
                let b = (1.0 - eta * lambda) * theta[i] - eta * g[i];
                prop_assert!((a[i] - b).abs() <= 1e-14 * (1.0 + theta[i].abs()));
            }
        }

        #[test]
        fn momentum_without_momentum_is_sgd_bitwise(
            theta in prop::collection::vec(-10.0f64..10.0, 1..8),
            eta in 0.0f64..1.0,
            lambda in 0.0f64..0.1,
        ) {
            let g: Vec<f64> = theta.iter().map(|t| (t * 0.3).cos()).collect();
            let h = HyperParams::sgd(eta, lambda);
            let mut a = theta.clone();
            sgd_update(&mut a, &g, &h).unwrap();
            let mut b = theta.clone();
            let mut v = vec![0.0; theta.len()];
            momentum_update(&mut b, &mut v, &g, &h).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
