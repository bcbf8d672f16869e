//! Eager reverse-mode tape.
//!
//! Every operation computes its value immediately and appends a node. The
//! gradient pass ([`Tape::grad`]) is itself written in terms of tape
//! operations, so the gradient nodes it creates can be differentiated again.
//! Differentiating `<grad L, v>` a second time yields a Hessian-vector
//! product without ever forming the Hessian.

use super::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Transpose(Var),
    SumAll(Var),
    Fill(Var),
    SumRows(Var),
    SpreadRows(Var),
    SumCols(Var),
    SpreadCols(Var),
    Powf(Var, f64),
    Exp(Var),
    Log(Var),
    Tanh(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(_) => "add_scalar",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::SumAll(..) => "sum",
            Op::Fill(_) => "fill",
            Op::SumRows(..) => "sum_rows",
            Op::SpreadRows(_) => "spread_rows",
            Op::SumCols(..) => "sum_cols",
            Op::SpreadCols(_) => "spread_cols",
            Op::Powf(..) => "powf",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Tanh(..) => "tanh",
        }
    }

    fn inputs(&self) -> [Option<Var>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => [Some(a), Some(b)],
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Transpose(a)
            | Op::SumAll(a)
            | Op::Fill(a)
            | Op::SumRows(a)
            | Op::SpreadRows(a)
            | Op::SumCols(a)
            | Op::SpreadCols(a)
            | Op::Powf(a, _)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a) => [Some(a), None],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Name of the first operation whose value contains a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.nodes
            .iter()
            .find(|n| !n.value.is_finite())
            .map(|n| n.op.name())
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| -x);
        self.push(Op::Neg(a), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::AddScalar(a), v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v)
    }

    /// Broadcast a one-element tensor to `shape`.
    pub fn fill(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = Tensor::full(shape, self.value(a).item());
        self.push(Op::Fill(a), v)
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_rows();
        self.push(Op::SumRows(a), v)
    }

    pub fn spread_rows(&mut self, a: Var, n: usize) -> Var {
        let v = self.value(a).spread_rows(n);
        self.push(Op::SpreadRows(a), v)
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_cols();
        self.push(Op::SumCols(a), v)
    }

    pub fn spread_cols(&mut self, a: Var, m: usize) -> Var {
        let v = self.value(a).spread_cols(m);
        self.push(Op::SpreadCols(a), v)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let v = self.value(a).map(|x| x.powf(p));
        self.push(Op::Powf(a, p), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        self.push(Op::Log(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    /// `x * mask` with the mask held constant. ReLU and leaky ReLU are built
    /// this way, which keeps them exactly positively homogeneous.
    pub fn mask(&mut self, a: Var, mask: Tensor) -> Var {
        let m = self.leaf(mask);
        self.mul(a, m)
    }

    /// `[n, m] + [m]` with the vector broadcast over rows.
    pub fn add_row_vector(&mut self, a: Var, b: Var) -> Var {
        let n = self.shape(a)[0];
        let bb = self.spread_rows(b, n);
        self.add(a, bb)
    }

    /// Inner product of two same-shaped tensors.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    fn accumulate(&mut self, adjoints: &mut [Option<Var>], target: Var, contribution: Var) {
        adjoints[target.0] = Some(match adjoints[target.0] {
            Some(existing) => self.add(existing, contribution),
            None => contribution,
        });
    }

    /// Reverse-mode gradient of `output` with respect to each of `wrt`.
    ///
    /// The returned handles live on this tape and may themselves be
    /// differentiated. Inputs that `output` does not depend on receive a
    /// zero tensor of matching shape.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        let n = output.0 + 1;
        let mut needs = vec![false; n];
        for w in wrt {
            if w.0 < n {
                needs[w.0] = true;
            }
        }
        for i in 0..n {
            if !needs[i] {
                needs[i] = self.nodes[i].op.inputs().iter().flatten().any(|v| needs[v.0]);
            }
        }

        let mut adjoints: Vec<Option<Var>> = vec![None; n];
        let seed_shape = self.shape(output).to_vec();
        let seed = self.leaf(Tensor::full(&seed_shape, 1.0));
        adjoints[output.0] = Some(seed);

        for i in (0..n).rev() {
            let Some(adj) = adjoints[i] else { continue };
            if !needs[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let need = |v: Var| needs[v.0];
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    if need(a) {
                        self.accumulate(&mut adjoints, a, adj);
                    }
                    if need(b) {
                        self.accumulate(&mut adjoints, b, adj);
                    }
                }
                Op::Sub(a, b) => {
                    if need(a) {
                        self.accumulate(&mut adjoints, a, adj);
                    }
                    if need(b) {
                        let c = self.neg(adj);
                        self.accumulate(&mut adjoints, b, c);
                    }
                }
                Op::Mul(a, b) => {
                    if need(a) {
                        let c = self.mul(adj, b);
                        self.accumulate(&mut adjoints, a, c);
                    }
                    if need(b) {
                        let c = self.mul(adj, a);
                        self.accumulate(&mut adjoints, b, c);
                    }
                }
                Op::Neg(a) => {
                    let c = self.neg(adj);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Scale(a, k) => {
                    let c = self.scale(adj, k);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::AddScalar(a) => self.accumulate(&mut adjoints, a, adj),
                Op::MatMul(a, b) => {
                    if need(a) {
                        let bt = self.transpose(b);
                        let c = self.matmul(adj, bt);
                        self.accumulate(&mut adjoints, a, c);
                    }
                    if need(b) {
                        let at = self.transpose(a);
                        let c = self.matmul(at, adj);
                        self.accumulate(&mut adjoints, b, c);
                    }
                }
                Op::Transpose(a) => {
                    let c = self.transpose(adj);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::SumAll(a) => {
                    let shape = self.shape(a).to_vec();
                    let c = self.fill(adj, &shape);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Fill(a) => {
                    let s = self.sum(adj);
                    let c = if self.shape(a).is_empty() {
                        s
                    } else {
                        let shape = self.shape(a).to_vec();
                        self.fill(s, &shape)
                    };
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::SumRows(a) => {
                    let rows = self.shape(a)[0];
                    let c = self.spread_rows(adj, rows);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::SpreadRows(a) => {
                    let c = self.sum_rows(adj);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::SumCols(a) => {
                    let cols = self.shape(a)[1];
                    let c = self.spread_cols(adj, cols);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::SpreadCols(a) => {
                    let c = self.sum_cols(adj);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Powf(a, p) => {
                    let c = if p == 1.0 {
                        adj
                    } else {
                        let d = self.powf(a, p - 1.0);
                        let d = self.scale(d, p);
                        self.mul(adj, d)
                    };
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Exp(a) => {
                    let c = self.mul(adj, Var(i));
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Log(a) => {
                    let r = self.powf(a, -1.0);
                    let c = self.mul(adj, r);
                    self.accumulate(&mut adjoints, a, c);
                }
                Op::Tanh(a) => {
                    let y = Var(i);
                    let y2 = self.mul(y, y);
                    let d = self.neg(y2);
                    let d = self.add_scalar(d, 1.0);
                    let c = self.mul(adj, d);
                    self.accumulate(&mut adjoints, a, c);
                }
            }
        }

        wrt.iter()
            .map(|w| match adjoints.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*w).to_vec();
                    self.leaf(Tensor::zeros(&shape))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn scalar_chain_rule() {
        // y = tanh(exp(x) * x)
        let f = |x: f64| (x.exp() * x).tanh();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.3));
        let e = tape.exp(x);
        let p = tape.mul(e, x);
        let y = tape.tanh(p);
        let g = tape.grad(y, &[x])[0];
        let fd = central_difference(f, 0.3);
        assert!((tape.value(g).item() - fd).abs() < 1e-8);
    }

    #[test]
    fn second_derivative_through_grad() {
        // f = x^3 ; f'' = 6x
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.7));
        let y = tape.powf(x, 3.0);
        let g = tape.grad(y, &[x])[0];
        let h = tape.grad(g, &[x])[0];
        assert!((tape.value(h).item() - 6.0 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn unused_input_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let z = tape.leaf(Tensor::vector(vec![3.0]));
        let s = tape.sum(x);
        let g = tape.grad(s, &[x, z]);
        assert_eq!(tape.value(g[0]).data(), &[1.0, 1.0]);
        assert_eq!(tape.value(g[1]).data(), &[0.0]);
    }

    #[test]
    fn reports_first_non_finite_op() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let _ = tape.powf(x, -0.5);
        assert_eq!(tape.first_non_finite(), Some("powf"));
    }
}
