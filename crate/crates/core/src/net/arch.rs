use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

pub const ARCH_SPEC_VERSION: u32 = 1;

/// One entry of an [`ArchSpec`] layer list.
///
/// `Conv` and `MaxPool` only carry what the symmetry census needs and cannot
/// be executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layer {
    Dense {
        #[serde(rename = "in")]
        input: usize,
        #[serde(rename = "out")]
        output: usize,
        #[serde(default = "default_true")]
        bias: bool,
    },
    Relu,
    LeakyRelu {
        #[serde(default = "default_leaky_slope")]
        slope: f64,
    },
    Linear,
    Tanh,
    SoftmaxHead,
    Batchnorm {
        features: usize,
        #[serde(default)]
        eps: f64,
    },
    Conv {
        channels: usize,
        #[serde(default = "default_kernel")]
        kernel: usize,
    },
    MaxPool,
}

fn default_true() -> bool {
    true
}

fn default_leaky_slope() -> f64 {
    0.01
}

fn default_kernel() -> usize {
    3
}

impl Layer {
    /// Activations with φ(z) = φ'(z) z.
    pub fn is_homogeneous_activation(&self) -> bool {
        matches!(self, Layer::Relu | Layer::LeakyRelu { .. } | Layer::Linear)
    }

    pub fn is_activation(&self) -> bool {
        matches!(
            self,
            Layer::Relu | Layer::LeakyRelu { .. } | Layer::Linear | Layer::Tanh
        )
    }

    pub fn is_census_only(&self) -> bool {
        matches!(self, Layer::Conv { .. } | Layer::MaxPool)
    }
}

/// Per-spec constants added to the rule-derived census totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusAdjustment {
    #[serde(default)]
    pub scale: u64,
    #[serde(default)]
    pub rescale: u64,
    #[serde(default)]
    pub translation: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    /// Weights ~ N(0, 2 / fan_in), biases 0, batchnorm scale 1 and shift 0.
    #[default]
    KaimingNormal,
    /// Weights ~ N(0, std²), otherwise as Kaiming.
    Normal { std: f64 },
}

/// Declarative network description.
///
/// Dense weights are stored `[in, out]` so a batch `X [n, in]` maps to
/// `X W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Input features, or input channels for census-only conv specs.
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub census_adjustment: CensusAdjustment,
    #[serde(default)]
    pub init: InitScheme,
}

impl ArchSpec {
    /// Plain MLP: `dims[0] -> ... -> dims[last]`, the given activation between
    /// dense layers, optional batchnorm after every hidden dense layer, and a
    /// softmax head.
    pub fn mlp(dims: &[usize], activation: Layer, batchnorm: bool) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let mut layers = Vec::new();
        for (i, w) in dims.windows(2).enumerate() {
            layers.push(Layer::Dense {
                input: w[0],
                output: w[1],
                bias: true,
            });
            if i + 2 < dims.len() {
                if batchnorm {
                    layers.push(Layer::Batchnorm {
                        features: w[1],
                        eps: 0.0,
                    });
                }
                layers.push(activation.clone());
            }
        }
        layers.push(Layer::SoftmaxHead);
        Self {
            version: ARCH_SPEC_VERSION,
            name: String::new(),
            input_dim: dims[0],
            num_classes: *dims.last().unwrap(),
            layers,
            census_adjustment: CensusAdjustment::default(),
            init: InitScheme::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ArchSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_executable(&self) -> bool {
        !self.layers.iter().any(Layer::is_census_only)
    }

    /// Structural checks shared by census-only and executable specs.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.version != ARCH_SPEC_VERSION {
            return bad(format!(
                "unsupported spec version {} (expected {ARCH_SPEC_VERSION})",
                self.version
            ));
        }
        if self.layers.is_empty() {
            return bad("layer list is empty".into());
        }
        if self.input_dim == 0 || self.num_classes == 0 {
            return bad("input_dim and num_classes must be positive".into());
        }
        let mut width = self.input_dim;
        // After a conv stack the spatial extent is unknown, so the first
        // dense layer's fan-in cannot be checked.
        let mut spatial = false;
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Dense { input, output, .. } => {
                    if input == 0 || output == 0 {
                        return bad(format!("layer {i}: dense widths must be positive"));
                    }
                    if !spatial && input != width {
                        return bad(format!(
                            "layer {i}: dense expects {input} inputs but previous width is {width}"
                        ));
                    }
                    spatial = false;
                    seen_dense = true;
                    width = output;
                }
                Layer::Conv { channels, kernel } => {
                    if seen_dense {
                        return bad(format!("layer {i}: conv after a dense layer is not supported"));
                    }
                    if channels == 0 || kernel == 0 {
                        return bad(format!("layer {i}: conv channels and kernel must be positive"));
                    }
                    spatial = true;
                    width = channels;
                }
                Layer::Batchnorm { features, eps } => {
                    if features != width {
                        return bad(format!(
                            "layer {i}: batchnorm over {features} features but previous width is {width}"
                        ));
                    }
                    if !(eps >= 0.0 && eps.is_finite()) {
                        return bad(format!("layer {i}: batchnorm eps must be finite and >= 0"));
                    }
                    let prev = i.checked_sub(1).map(|p| &self.layers[p]);
                    if !matches!(prev, Some(Layer::Dense { .. } | Layer::Conv { .. })) {
                        return bad(format!(
                            "layer {i}: batchnorm must directly follow a dense or conv layer"
                        ));
                    }
                }
                Layer::SoftmaxHead => {
                    if i + 1 != self.layers.len() {
                        return bad(format!("layer {i}: softmax head must be the last layer"));
                    }
                    let prev = i.checked_sub(1).map(|p| &self.layers[p]);
                    if !matches!(prev, Some(Layer::Dense { .. })) {
                        return bad(format!("layer {i}: softmax head must directly follow a dense layer"));
                    }
                }
                Layer::LeakyRelu { slope } => {
                    if !slope.is_finite() {
                        return bad(format!("layer {i}: leaky slope must be finite"));
                    }
                }
                Layer::Relu | Layer::Linear | Layer::Tanh | Layer::MaxPool => {}
            }
        }
        if width != self.num_classes {
            return bad(format!(
                "network output width {width} does not match num_classes {}",
                self.num_classes
            ));
        }
        if let InitScheme::Normal { std } = self.init {
            if !(std > 0.0 && std.is_finite()) {
                return bad("init std must be positive".into());
            }
        }
        Ok(())
    }

    /// Checks that additionally rule out census-only layers.
    pub fn validate_executable(&self) -> Result<()> {
        self.validate()?;
        if let Some(i) = self.layers.iter().position(Layer::is_census_only) {
            return Err(Error::InvalidSpec(format!(
                "layer {i} is census-only and cannot be executed"
            )));
        }
        Ok(())
    }
}
