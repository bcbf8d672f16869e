use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, Layer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensusKind {
    Scale,
    Rescale,
    Translation,
}

/// One rule's contribution to a census total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusEntry {
    pub kind: CensusKind,
    pub rule: String,
    pub layer: Option<usize>,
    pub count: u64,
}

/// Static symmetry count implied by an architecture.
///
/// `n_translation` follows the table convention of one group per class plus
/// the bias. `translation_generators` counts the distinct translation groups
/// actually present in the head weights: one per head input plus the bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryCensus {
    pub n_scale: u64,
    pub n_rescale: u64,
    pub n_translation: u64,
    pub n_params: u64,
    pub translation_generators: u64,
    pub breakdown: Vec<CensusEntry>,
}

impl SymmetryCensus {
    pub fn subtotal(&self, kind: CensusKind) -> u64 {
        self.breakdown
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.count)
            .sum()
    }

    pub fn total(&self, kind: CensusKind) -> u64 {
        match kind {
            CensusKind::Scale => self.n_scale,
            CensusKind::Rescale => self.n_rescale,
            CensusKind::Translation => self.n_translation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Flow {
    /// Raw input, or the output of a non-homogeneous unit.
    Opaque,
    /// Output of an affine map (possibly through batchnorm / pooling).
    Affine,
    /// Affine output passed through a homogeneous activation.
    Homogeneous,
}

#[derive(Debug, Clone, Copy)]
struct PrevAffine {
    layer: usize,
    width: u64,
    conv: bool,
}

/// Count scale, rescale and translation groups and parameters of `spec`.
///
/// Rules, applied in a single pass over the layer list:
/// - scale: every batchnorm layer that directly follows a dense or conv
///   layer contributes one group per feature;
/// - rescale (conv): the channels of a conv layer whose output reaches the
///   next affine map through homogeneous units only;
/// - rescale (dense): the fan-in of every dense layer whose input comes from
///   such units;
/// - translation: one per class plus the head bias;
/// - plus the spec's `census_adjustment` constants.
pub fn census(spec: &ArchSpec) -> SymmetryCensus {
    let mut breakdown = Vec::new();
    let mut n_params: u64 = 0;
    let mut translation_generators = 0;
    let mut flow = Flow::Opaque;
    let mut width = spec.input_dim as u64;
    let mut prev: Option<PrevAffine> = None;
    let mut entry = |kind, rule: &str, layer, count| {
        breakdown.push(CensusEntry {
            kind,
            rule: rule.to_string(),
            layer,
            count,
        })
    };

    for (l, layer) in spec.layers.iter().enumerate() {
        match *layer {
            Layer::Dense { input, output, bias } => {
                let (input, output) = (input as u64, output as u64);
                if flow != Flow::Opaque {
                    if let Some(p) = prev.filter(|p| p.conv) {
                        entry(CensusKind::Rescale, "conv channels between affine maps", Some(p.layer), p.width);
                    }
                    entry(CensusKind::Rescale, "dense inputs from homogeneous units", Some(l), input);
                }
                n_params += input * output + if bias { output } else { 0 };
                prev = Some(PrevAffine { layer: l, width: output, conv: false });
                width = output;
                flow = Flow::Affine;
            }
            Layer::Conv { channels, kernel } => {
                let channels = channels as u64;
                if flow != Flow::Opaque {
                    if let Some(p) = prev.filter(|p| p.conv) {
                        entry(CensusKind::Rescale, "conv channels between affine maps", Some(p.layer), p.width);
                    }
                }
                let k = kernel as u64;
                n_params += width * channels * k * k + channels;
                prev = Some(PrevAffine { layer: l, width: channels, conv: true });
                width = channels;
                flow = Flow::Affine;
            }
            Layer::Batchnorm { features, .. } => {
                let f = features as u64;
                let follows_affine = l
                    .checked_sub(1)
                    .is_some_and(|p| matches!(spec.layers[p], Layer::Dense { .. } | Layer::Conv { .. }));
                if follows_affine {
                    entry(CensusKind::Scale, "features feeding batch normalization", Some(l), f);
                }
                n_params += 2 * f;
            }
            Layer::Relu | Layer::LeakyRelu { .. } | Layer::Linear => {
                if flow == Flow::Affine {
                    flow = Flow::Homogeneous;
                }
            }
            Layer::Tanh => flow = Flow::Opaque,
            Layer::MaxPool => {}
            Layer::SoftmaxHead => {
                let head_bias = l.checked_sub(1).and_then(|p| match spec.layers[p] {
                    Layer::Dense { input, bias, .. } => Some((input as u64, bias)),
                    _ => None,
                });
                if let Some((fan_in, bias)) = head_bias {
                    let b = u64::from(bias);
                    entry(CensusKind::Translation, "softmax classes plus bias", Some(l), spec.num_classes as u64 + b);
                    translation_generators = fan_in + b;
                }
            }
        }
    }

    let adj = spec.census_adjustment;
    for (kind, count) in [
        (CensusKind::Scale, adj.scale),
        (CensusKind::Rescale, adj.rescale),
        (CensusKind::Translation, adj.translation),
    ] {
        if count > 0 {
            entry(kind, "per-spec adjustment", None, count);
        }
    }

    let mut census = SymmetryCensus {
        n_scale: 0,
        n_rescale: 0,
        n_translation: 0,
        n_params,
        translation_generators,
        breakdown,
    };
    census.n_scale = census.subtotal(CensusKind::Scale);
    census.n_rescale = census.subtotal(CensusKind::Rescale);
    census.n_translation = census.subtotal(CensusKind::Translation);
    census
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::arch::{CensusAdjustment, InitScheme};

    #[test]
    fn small_mlp() {
        let c = census(&ArchSpec::mlp(&[784, 128, 10], Layer::Relu, false));
        assert_eq!((c.n_scale, c.n_rescale, c.n_translation), (0, 128, 11));
        assert_eq!(c.translation_generators, 129);
        assert_eq!(c.n_params, 784 * 128 + 128 + 128 * 10 + 10);
    }

    #[test]
    fn batchnorm_and_tanh() {
        let c = census(&ArchSpec::mlp(&[4, 8, 6, 3], Layer::Relu, true));
        assert_eq!((c.n_scale, c.n_rescale, c.n_translation), (14, 14, 4));
        let t = census(&ArchSpec::mlp(&[4, 8, 3], Layer::Tanh, false));
        assert_eq!((t.n_scale, t.n_rescale), (0, 0));
    }

    #[test]
    fn conv_rules() {
        let spec = ArchSpec {
            version: 1,
            name: "conv".into(),
            input_dim: 3,
            num_classes: 5,
            layers: vec![
                Layer::Conv { channels: 4, kernel: 3 },
                Layer::Relu,
                Layer::MaxPool,
                Layer::Conv { channels: 6, kernel: 3 },
                Layer::Batchnorm { features: 6, eps: 0.0 },
                Layer::Relu,
                Layer::Dense { input: 24, output: 5, bias: true },
                Layer::SoftmaxHead,
            ],
            census_adjustment: CensusAdjustment { scale: 1, rescale: 2, translation: 0 },
            init: InitScheme::default(),
        };
        let c = census(&spec);
        assert_eq!(c.n_scale, 6 + 1);
        assert_eq!(c.n_rescale, 4 + 6 + 24 + 2);
        assert_eq!(c.n_translation, 6);
        assert_eq!(c.n_params, (3 * 4 * 9 + 4) + (4 * 6 * 9 + 6) + 12 + (24 * 5 + 5));
        for kind in [CensusKind::Scale, CensusKind::Rescale, CensusKind::Translation] {
            assert_eq!(c.total(kind), c.subtotal(kind));
        }
    }

    #[test]
    fn census_is_idempotent() {
        let spec = ArchSpec::mlp(&[4, 8, 8, 3], Layer::Relu, true);
        assert_eq!(census(&spec), census(&spec));
    }
}
