use super::descriptor::SymmetryDescriptor;
use crate::net::{Block, Network, ParamInfo};

#[derive(Debug, Clone, Copy, Default)]
pub struct EnumerateOptions {
    /// Treat every activation as homogeneous. Only useful to build negative
    /// controls: rescale descriptors over tanh units are not symmetries.
    pub assume_homogeneous: bool,
}

/// Every translation, scale and rescale group of `net`.
///
/// Translation: one group per input column of the softmax head weights
/// (shifting column `i` adds `α x_i` to every logit) and one for the head
/// bias. Scale: the incoming weights and bias of every feature feeding a
/// batchnorm layer. Rescale: every hidden neuron whose activation is
/// homogeneous and whose output feeds the next dense layer; `A1` is the
/// incoming weights and bias (the batchnorm scale and shift when present)
/// and `A2` the outgoing weights.
pub fn enumerate_groups(net: &Network) -> Vec<SymmetryDescriptor> {
    enumerate_groups_with(net, EnumerateOptions::default())
}

pub fn enumerate_groups_with(net: &Network, opts: EnumerateOptions) -> Vec<SymmetryDescriptor> {
    let params = net.params();
    let blocks = net.blocks();
    let mut out = Vec::new();

    // Translation groups of the softmax head.
    if let [.., Block::Dense { weight, bias, input, output, .. }, Block::SoftmaxHead { .. }] = blocks {
        let w = &params[*weight];
        for i in 0..*input {
            let start = w.offset + i * output;
            out.push(SymmetryDescriptor::translation(
                (start..start + output).collect(),
                format!("softmax column {i}"),
            ));
        }
        if let Some(b) = bias {
            out.push(SymmetryDescriptor::translation(params[*b].range().collect(), "softmax bias"));
        }
    }

    // Scale groups: dense outputs normalized by the following batchnorm.
    for pair in blocks.windows(2) {
        if let [Block::Dense { weight, bias, output, .. }, Block::Batchnorm { layer, .. }] = pair {
            for j in 0..*output {
                let mut set = column(&params[*weight], j);
                if let Some(b) = bias {
                    set.push(params[*b].offset + j);
                }
                out.push(SymmetryDescriptor::scale(set, format!("bn channel {j} (layer {layer})")));
            }
        }
    }

    // Rescale groups: hidden neurons between two dense layers.
    for (k, block) in blocks.iter().enumerate() {
        let Block::Dense { layer, weight, bias, output, .. } = *block else {
            continue;
        };
        let mut next = k + 1;
        let bn = match blocks.get(next) {
            Some(&Block::Batchnorm { gamma, beta, .. }) => {
                next += 1;
                Some((gamma, beta))
            }
            _ => None,
        };
        let mut homogeneous = true;
        while let Some(Block::Activation { kind, .. }) = blocks.get(next) {
            homogeneous &= opts.assume_homogeneous || kind.is_homogeneous();
            next += 1;
        }
        let Some(&Block::Dense { weight: w_out, .. }) = blocks.get(next) else {
            continue;
        };
        if !homogeneous {
            continue;
        }
        let w_out = &params[w_out];
        let fan_out = w_out.shape[1];
        for j in 0..output {
            let a1 = match bn {
                Some((gamma, beta)) => vec![params[gamma].offset + j, params[beta].offset + j],
                None => {
                    let mut set = column(&params[weight], j);
                    if let Some(b) = bias {
                        set.push(params[b].offset + j);
                    }
                    set
                }
            };
            let start = w_out.offset + j * fan_out;
            out.push(SymmetryDescriptor::rescale(
                a1,
                (start..start + fan_out).collect(),
                format!("hidden neuron {j} (layer {layer})"),
            ));
        }
    }
    out
}

/// Indices of column `j` of a `[in, out]` weight matrix.
fn column(w: &ParamInfo, j: usize) -> Vec<usize> {
    let (rows, cols) = (w.shape[0], w.shape[1]);
    (0..rows).map(|i| w.offset + i * cols + j).collect()
}
