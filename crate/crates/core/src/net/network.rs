use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::arch::{ArchSpec, InitScheme, Layer};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tape, Tensor, Var};

/// A labelled mini-batch. `inputs` is `[n, input_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "batch inputs must be a matrix, got shape {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx` (in that order) as a new batch.
    pub fn select(&self, idx: &[usize]) -> Batch {
        let d = self.inputs.cols();
        let src = self.inputs.data();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        Batch {
            inputs: Tensor::matrix(idx.len(), d, data),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Location of one parameter tensor inside the flat store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Index into the spec's layer list.
    pub layer: usize,
}

impl ParamInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Compiled layer with indices into [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense {
        layer: usize,
        weight: usize,
        bias: Option<usize>,
        input: usize,
        output: usize,
    },
    Batchnorm {
        layer: usize,
        gamma: usize,
        beta: usize,
        features: usize,
        eps: f64,
    },
    Activation {
        layer: usize,
        kind: Activation,
    },
    SoftmaxHead {
        layer: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Linear,
    Tanh,
}

impl Activation {
    pub fn is_homogeneous(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

/// Executable network built from an [`ArchSpec`].
///
/// The loss is mean cross-entropy when the spec ends in a softmax head and
/// half the mean squared error against one-hot targets otherwise.
#[derive(Debug, Clone)]
pub struct Network {
    spec: ArchSpec,
    blocks: Vec<Block>,
    params: Vec<ParamInfo>,
}

impl Network {
    pub fn new(spec: ArchSpec) -> Result<Self> {
        spec.validate_executable()?;
        let mut blocks = Vec::new();
        let mut params: Vec<ParamInfo> = Vec::new();
        let mut offset = 0;
        let mut add = |params: &mut Vec<ParamInfo>, name: String, shape: Vec<usize>, layer| {
            let info = ParamInfo {
                name,
                shape,
                offset,
                layer,
            };
            offset += info.len();
            params.push(info);
            params.len() - 1
        };
        for (l, layer) in spec.layers.iter().enumerate() {
            let block = match *layer {
                Layer::Dense { input, output, bias } => {
                    let weight = add(&mut params, format!("layer{l}.weight"), vec![input, output], l);
                    let bias = bias.then(|| add(&mut params, format!("layer{l}.bias"), vec![output], l));
                    Block::Dense {
                        layer: l,
                        weight,
                        bias,
                        input,
                        output,
                    }
                }
                Layer::Batchnorm { features, eps } => {
                    let gamma = add(&mut params, format!("layer{l}.gamma"), vec![features], l);
                    let beta = add(&mut params, format!("layer{l}.beta"), vec![features], l);
                    Block::Batchnorm {
                        layer: l,
                        gamma,
                        beta,
                        features,
                        eps,
                    }
                }
                Layer::Relu => Block::Activation { layer: l, kind: Activation::Relu },
                Layer::LeakyRelu { slope } => Block::Activation {
                    layer: l,
                    kind: Activation::LeakyRelu(slope),
                },
                Layer::Linear => Block::Activation { layer: l, kind: Activation::Linear },
                Layer::Tanh => Block::Activation { layer: l, kind: Activation::Tanh },
                Layer::SoftmaxHead => Block::SoftmaxHead { layer: l },
                Layer::Conv { .. } | Layer::MaxPool => unreachable!("rejected by validate_executable"),
            };
            blocks.push(block);
        }
        Ok(Self { spec, blocks, params })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn params(&self) -> &[ParamInfo] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamInfo> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn has_batchnorm(&self) -> bool {
        self.blocks.iter().any(|b| matches!(b, Block::Batchnorm { .. }))
    }

    pub fn has_softmax_head(&self) -> bool {
        matches!(self.blocks.last(), Some(Block::SoftmaxHead { .. }))
    }

    /// Fresh parameters drawn with the spec's init scheme.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.num_params()];
        for block in &self.blocks {
            match *block {
                Block::Dense { weight, input, .. } => {
                    let std = match self.spec.init {
                        InitScheme::KaimingNormal => (2.0 / input as f64).sqrt(),
                        InitScheme::Normal { std } => std,
                    };
                    let normal = Normal::new(0.0, std).expect("std validated positive");
                    for x in &mut theta[self.params[weight].range()] {
                        *x = normal.sample(&mut rng);
                    }
                }
                Block::Batchnorm { gamma, .. } => {
                    theta[self.params[gamma].range()].fill(1.0);
                }
                _ => {}
            }
        }
        theta
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.inputs.cols() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                batch.inputs.cols(),
                self.spec.input_dim
            )));
        }
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if self.has_batchnorm() && batch.len() < 2 {
            return Err(Error::InvalidArgument(
                "batchnorm needs at least two examples per batch".into(),
            ));
        }
        if let Some(&c) = batch.labels.iter().find(|&&c| c >= self.spec.num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {c} out of range for {} classes",
                self.spec.num_classes
            )));
        }
        Ok(())
    }

    /// Record the network output (pre-softmax logits) for `inputs`.
    fn record_output(&self, tape: &mut Tape, params: &[Var], inputs: &Tensor) -> Var {
        let n = inputs.rows();
        let mut x = tape.leaf(inputs.clone());
        for block in &self.blocks {
            x = match *block {
                Block::Dense { weight, bias, .. } => {
                    let z = tape.matmul(x, params[weight]);
                    match bias {
                        Some(b) => tape.add_row_vector(z, params[b]),
                        None => z,
                    }
                }
                Block::Batchnorm { gamma, beta, eps, .. } => {
                    let inv_n = 1.0 / n as f64;
                    let s = tape.sum_rows(x);
                    let mean = tape.scale(s, inv_n);
                    let mean_b = tape.spread_rows(mean, n);
                    let xc = tape.sub(x, mean_b);
                    let sq = tape.mul(xc, xc);
                    let ss = tape.sum_rows(sq);
                    let var = tape.scale(ss, inv_n);
                    let var_eps = tape.add_scalar(var, eps);
                    let inv_std = tape.powf(var_eps, -0.5);
                    let inv_b = tape.spread_rows(inv_std, n);
                    let xhat = tape.mul(xc, inv_b);
                    let g = tape.spread_rows(params[gamma], n);
                    let scaled = tape.mul(xhat, g);
                    tape.add_row_vector(scaled, params[beta])
                }
                Block::Activation { kind, .. } => match kind {
                    Activation::Relu => {
                        let m = tape.value(x).map(|z| if z > 0.0 { 1.0 } else { 0.0 });
                        tape.mask(x, m)
                    }
                    Activation::LeakyRelu(slope) => {
                        let m = tape.value(x).map(|z| if z > 0.0 { 1.0 } else { slope });
                        tape.mask(x, m)
                    }
                    Activation::Linear => x,
                    Activation::Tanh => tape.tanh(x),
                },
                Block::SoftmaxHead { .. } => x,
            };
        }
        x
    }

    /// Logits (or raw outputs without a softmax head) as `[n, num_classes]`.
    pub fn outputs(&self, theta: &[f64], inputs: &Tensor) -> Result<Tensor> {
        if theta.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, network expects {}",
                theta.len(),
                self.num_params()
            )));
        }
        let mut tape = Tape::new();
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(Tensor::new(p.shape.clone(), theta[p.range()].to_vec())))
            .collect();
        let out = self.record_output(&mut tape, &params, inputs);
        Ok(tape.value(out).clone())
    }

    /// Fraction of examples whose arg-max output matches the label.
    pub fn accuracy(&self, theta: &[f64], batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let out = self.outputs(theta, &batch.inputs)?;
        let c = out.cols();
        let correct = batch
            .labels
            .iter()
            .enumerate()
            .filter(|&(i, &label)| {
                let row = &out.data()[i * c..(i + 1) * c];
                let best = row
                    .iter()
                    .enumerate()
                    .fold(0, |b, (j, &v)| if v > row[b] { j } else { b });
                best == label
            })
            .count();
        Ok(correct as f64 / batch.len() as f64)
    }
}

fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * classes];
    for (i, &c) in labels.iter().enumerate() {
        data[i * classes + c] = 1.0;
    }
    Tensor::matrix(labels.len(), classes, data)
}

impl Graph for Network {
    type Batch = Batch;

    fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params.iter().map(|p| p.shape.clone()).collect()
    }

    fn num_params(&self) -> usize {
        self.params.last().map_or(0, |p| p.offset + p.len())
    }

    fn loss(&self, tape: &mut Tape, params: &[Var], batch: &Batch) -> Result<Var> {
        self.check_batch(batch)?;
        let n = batch.len();
        let classes = self.spec.num_classes;
        let out = self.record_output(tape, params, &batch.inputs);
        let target = one_hot(&batch.labels, classes);
        if self.has_softmax_head() {
            // Shifting by the (constant) row max leaves log-sum-exp unchanged.
            let shift = tape.leaf(tape.value(out).row_max());
            let shift_b = tape.spread_cols(shift, classes);
            let z = tape.sub(out, shift_b);
            let e = tape.exp(z);
            let se = tape.sum_cols(e);
            let lse = tape.log(se);
            let total_lse = tape.sum(lse);
            let picked = tape.mask(z, target);
            let total_picked = tape.sum(picked);
            let nll = tape.sub(total_lse, total_picked);
            Ok(tape.scale(nll, 1.0 / n as f64))
        } else {
            let t = tape.leaf(target);
            let d = tape.sub(out, t);
            let sq = tape.mul(d, d);
            let s = tape.sum(sq);
            Ok(tape.scale(s, 0.5 / n as f64))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{backward, forward, hvp};

    fn toy_batch(n: usize, d: usize, classes: usize, seed: u64) -> Batch {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        Batch::new(Tensor::matrix(n, d, data), labels).unwrap()
    }

    fn finite_difference(net: &Network, theta: &[f64], batch: &Batch) -> Vec<f64> {
        let h = 1e-6;
        (0..theta.len())
            .map(|i| {
                let mut p = theta.to_vec();
                p[i] += h;
                let up = forward(net, &p, batch).unwrap();
                p[i] -= 2.0 * h;
                let down = forward(net, &p, batch).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn layout_and_init() {
        let net = Network::new(ArchSpec::mlp(&[4, 8, 3], Layer::Relu, true)).unwrap();
        let names: Vec<_> = net.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            ["layer0.weight", "layer0.bias", "layer1.gamma", "layer1.beta", "layer3.weight", "layer3.bias"]
        );
        assert_eq!(net.num_params(), 32 + 8 + 8 + 8 + 24 + 3);
        let theta = net.init_params(7);
        assert_eq!(theta, net.init_params(7));
        assert_ne!(theta, net.init_params(8));
        assert!(theta[net.param("layer1.gamma").unwrap().range()].iter().all(|&g| g == 1.0));
        assert!(theta[net.param("layer0.bias").unwrap().range()].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (act, bn) in [
            (Layer::Tanh, false),
            (Layer::Tanh, true),
            (Layer::LeakyRelu { slope: 0.1 }, false),
        ] {
            let net = Network::new(ArchSpec::mlp(&[3, 5, 2], act, bn)).unwrap();
            let theta = net.init_params(1);
            let batch = toy_batch(6, 3, 2, 2);
            let g = backward(&net, &theta, &batch).unwrap();
            let fd = finite_difference(&net, &theta, &batch);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn hvp_matches_gradient_difference() {
        let net = Network::new(ArchSpec::mlp(&[3, 4, 2], Layer::Tanh, true)).unwrap();
        let theta = net.init_params(3);
        let batch = toy_batch(5, 3, 2, 4);
        let v: Vec<f64> = (0..theta.len()).map(|i| ((i * 7 % 5) as f64 - 2.0) / 3.0).collect();
        let hv = hvp(&net, &theta, &batch, &v).unwrap();
        let h = 1e-5;
        let shift = |s: f64| -> Vec<f64> { theta.iter().zip(&v).map(|(t, d)| t + s * d).collect() };
        let gp = backward(&net, &shift(h), &batch).unwrap();
        let gm = backward(&net, &shift(-h), &batch).unwrap();
        for i in 0..theta.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!((hv[i] - fd).abs() < 1e-5, "{i}: {} vs {fd}", hv[i]);
        }
    }

    #[test]
    fn mse_loss_without_head() {
        let spec = ArchSpec {
            layers: vec![Layer::Dense { input: 2, output: 2, bias: false }],
            ..ArchSpec::mlp(&[2, 2], Layer::Relu, false)
        };
        let net = Network::new(spec).unwrap();
        // Identity weights map x straight to the output.
        let theta = vec![1.0, 0.0, 0.0, 1.0];
        let batch = Batch::new(Tensor::matrix(1, 2, vec![1.0, 1.0]), vec![0]).unwrap();
        assert_eq!(forward(&net, &theta, &batch).unwrap(), 0.5);
    }

    #[test]
    fn batch_validation() {
        let net = Network::new(ArchSpec::mlp(&[3, 4, 2], Layer::Relu, true)).unwrap();
        let theta = net.init_params(0);
        let one = toy_batch(1, 3, 2, 0);
        assert!(matches!(forward(&net, &theta, &one), Err(Error::InvalidArgument(_))));
        let wrong = toy_batch(4, 2, 2, 0);
        assert!(matches!(forward(&net, &theta, &wrong), Err(Error::Shape(_))));
        let mut bad_label = toy_batch(4, 3, 2, 0);
        bad_label.labels[0] = 5;
        assert!(forward(&net, &theta, &bad_label).is_err());
    }

    #[test]
    fn select_picks_rows() {
        let b = toy_batch(4, 2, 2, 9);
        let s = b.select(&[3, 1]);
        assert_eq!(&s.inputs.data()[..2], &b.inputs.data()[6..8]);
        assert_eq!(s.labels, vec![1, 1]);
    }
}
