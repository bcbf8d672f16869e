//! Dense tensors and a reverse-mode autodiff tape with exact
//! Hessian-vector products.

mod dense;
mod graph;
mod tape;

pub use dense::Tensor;
pub use graph::{backward, forward, grad_and_hvp, hvp, value_and_grad, Graph, LinearForm, QuadraticForm};
pub use tape::{Tape, Var};
