use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// A scalar loss defined over a flat parameter store.
///
/// Implementors record their computation on a fresh [`Tape`] for every
/// evaluation; the graph value itself is immutable and may be shared
/// between threads evaluating distinct parameter vectors.
pub trait Graph {
    type Batch: ?Sized;

    /// Shapes of the parameter tensors, in store order.
    fn param_shapes(&self) -> Vec<Vec<usize>>;

    /// Record the loss for `batch` given parameter leaves laid out as
    /// [`Graph::param_shapes`].
    fn loss(&self, tape: &mut Tape, params: &[Var], batch: &Self::Batch) -> Result<Var>;

    fn num_params(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

struct Recording {
    tape: Tape,
    params: Vec<Var>,
    loss: Var,
}

fn record<G: Graph + ?Sized>(graph: &G, theta: &[f64], batch: &G::Batch) -> Result<Recording> {
    let shapes = graph.param_shapes();
    let expected: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if theta.len() != expected {
        return Err(Error::Shape(format!(
            "parameter vector has length {}, graph expects {expected}",
            theta.len()
        )));
    }
    let mut tape = Tape::new();
    let mut offset = 0;
    let params = shapes
        .into_iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            let t = Tensor::new(shape, theta[offset..offset + n].to_vec());
            offset += n;
            tape.leaf(t)
        })
        .collect::<Vec<_>>();
    let loss = graph.loss(&mut tape, &params, batch)?;
    if tape.value(loss).len() != 1 {
        return Err(Error::Shape(format!(
            "loss must be scalar, got shape {:?}",
            tape.shape(loss)
        )));
    }
    if let Some(op) = tape.first_non_finite() {
        return Err(Error::NonFinite { op });
    }
    Ok(Recording { tape, params, loss })
}

fn flatten(tape: &Tape, vars: &[Var]) -> Vec<f64> {
    vars.iter()
        .flat_map(|v| tape.value(*v).data().iter().copied())
        .collect()
}

fn check_finite(values: &[f64], op: &'static str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

/// Loss averaged over the batch.
pub fn forward<G: Graph + ?Sized>(graph: &G, theta: &[f64], batch: &G::Batch) -> Result<f64> {
    let rec = record(graph, theta, batch)?;
    Ok(rec.tape.value(rec.loss).item())
}

/// Gradient of the loss, in parameter-store layout.
pub fn backward<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
) -> Result<Vec<f64>> {
    value_and_grad(graph, theta, batch).map(|(_, g)| g)
}

pub fn value_and_grad<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
) -> Result<(f64, Vec<f64>)> {
    let mut rec = record(graph, theta, batch)?;
    let grads = rec.tape.grad(rec.loss, &rec.params);
    let g = flatten(&rec.tape, &grads);
    check_finite(&g, "backward")?;
    Ok((rec.tape.value(rec.loss).item(), g))
}

/// Hessian-vector product `H v` by differentiating `<g, v>` a second time.
pub fn hvp<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    v: &[f64],
) -> Result<Vec<f64>> {
    grad_and_hvp(graph, theta, batch, v).map(|(_, hv)| hv)
}

/// Gradient and Hessian-vector product from one recording.
pub fn grad_and_hvp<G: Graph + ?Sized>(
    graph: &G,
    theta: &[f64],
    batch: &G::Batch,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != theta.len() {
        return Err(Error::Shape(format!(
            "direction has length {}, parameters have length {}",
            v.len(),
            theta.len()
        )));
    }
    let mut rec = record(graph, theta, batch)?;
    let tape = &mut rec.tape;
    let grads = tape.grad(rec.loss, &rec.params);
    let g = flatten(tape, &grads);

    let mut offset = 0;
    let mut inner: Option<Var> = None;
    for gv in &grads {
        let shape = tape.shape(*gv).to_vec();
        let n: usize = shape.iter().product();
        let dir = tape.leaf(Tensor::new(shape, v[offset..offset + n].to_vec()));
        offset += n;
        let d = tape.dot(*gv, dir);
        inner = Some(match inner {
            Some(acc) => tape.add(acc, d),
            None => d,
        });
    }
    let hv = match inner {
        Some(s) => {
            let h = tape.grad(s, &rec.params);
            flatten(tape, &h)
        }
        None => Vec::new(),
    };
    check_finite(&g, "backward")?;
    check_finite(&hv, "hvp")?;
    Ok((g, hv))
}

/// `L(θ) = <c, θ>`.
#[derive(Debug, Clone)]
pub struct LinearForm {
    pub c: Vec<f64>,
}

impl Graph for LinearForm {
    type Batch = ();

    fn param_shapes(&self) -> Vec<Vec<usize>> {
        vec![vec![self.c.len()]]
    }

    fn loss(&self, tape: &mut Tape, params: &[Var], _: &()) -> Result<Var> {
        let c = tape.leaf(Tensor::vector(self.c.clone()));
        Ok(tape.dot(params[0], c))
    }
}

/// `L(θ) = ½ θᵀ A θ` for a square (not necessarily symmetric) `A`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    dim: usize,
    a: Vec<f64>,
}

impl QuadraticForm {
    /// `a` is row-major `dim × dim`.
    pub fn new(dim: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), dim * dim, "quadratic form needs a square matrix");
        Self { dim, a }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for (i, &x) in d.iter().enumerate() {
            a[i * n + i] = x;
        }
        Self::new(n, a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }
}

impl Graph for QuadraticForm {
    type Batch = ();

    fn param_shapes(&self) -> Vec<Vec<usize>> {
        vec![vec![1, self.dim]]
    }

    fn loss(&self, tape: &mut Tape, params: &[Var], _: &()) -> Result<Var> {
        // θ is a row vector, so θ A θᵀ = sum((θ Aᵀ) ⊙ θ); use the symmetric part.
        let n = self.dim;
        let mut sym = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sym[i * n + j] = 0.5 * (self.a[i * n + j] + self.a[j * n + i]);
            }
        }
        let a = tape.leaf(Tensor::matrix(n, n, sym));
        let ta = tape.matmul(params[0], a);
        let q = tape.dot(ta, params[0]);
        Ok(tape.scale(q, 0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_form_value_and_gradient() {
        let g = LinearForm { c: vec![1.0, 2.0] };
        assert_eq!(forward(&g, &[3.0, 4.0], &()).unwrap(), 11.0);
        assert_eq!(backward(&g, &[3.0, 4.0], &()).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn quadratic_form_value_gradient_hvp() {
        let q = QuadraticForm::diagonal(&[1.0, 2.0]);
        assert_eq!(forward(&q, &[1.0, 1.0], &()).unwrap(), 1.5);
        assert_eq!(backward(&q, &[1.0, 1.0], &()).unwrap(), vec![1.0, 2.0]);
        assert_eq!(hvp(&q, &[1.0, 1.0], &(), &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(hvp(&q, &[1.0, 1.0], &(), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn wrong_parameter_length_is_a_shape_error() {
        let q = QuadraticForm::diagonal(&[1.0, 2.0]);
        assert!(matches!(forward(&q, &[1.0], &()), Err(Error::Shape(_))));
        assert!(matches!(hvp(&q, &[1.0, 1.0], &(), &[1.0]), Err(Error::Shape(_))));
    }
}
