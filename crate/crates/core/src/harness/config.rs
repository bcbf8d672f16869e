use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::ArchSpec;
use crate::optim::HyperParams;
use crate::predict::{Method, Quadrature};
use crate::symmetry::{SymmetryDescriptor, SymmetryKind};

pub const CONFIG_VERSION: u32 = 1;

/// Architecture given inline or as a path to a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchRef {
    Path(PathBuf),
    Inline(ArchSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Gaussian clusters around random unit-norm centers.
    Synthetic {
        clusters: usize,
        dim: usize,
        n: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// Header row plus numeric columns; `label` names the label column.
    Csv {
        path: PathBuf,
        #[serde(default = "default_label")]
        label: String,
    },
    /// IDX image and label files (as used by MNIST); pixels scaled to [0, 1].
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
}

fn default_spread() -> f64 {
    0.5
}

fn default_label() -> String {
    "label".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DescriptorFilter {
    #[default]
    All,
    Kind(SymmetryKind),
    /// Substring of the descriptor label.
    Label(String),
    /// Keep at most this many descriptors of each kind, in order.
    PerKind(usize),
}

impl DescriptorFilter {
    pub fn apply(&self, descriptors: Vec<SymmetryDescriptor>) -> Vec<SymmetryDescriptor> {
        match self {
            DescriptorFilter::All => descriptors,
            DescriptorFilter::Kind(k) => descriptors.into_iter().filter(|d| d.kind == *k).collect(),
            DescriptorFilter::Label(pat) => descriptors.into_iter().filter(|d| d.label.contains(pat.as_str())).collect(),
            DescriptorFilter::PerKind(n) => {
                let mut seen = [0usize; 3];
                descriptors
                    .into_iter()
                    .filter(|d| {
                        let slot = &mut seen[d.kind as usize];
                        *slot += 1;
                        *slot <= *n
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_gradient")]
    pub gradient: f64,
    #[serde(default = "tol_hessian")]
    pub hessian: f64,
    #[serde(default = "tol_gradient")]
    pub theorem: f64,
    #[serde(default = "tol_equivariance")]
    pub equivariance: f64,
    #[serde(default = "tol_gradient")]
    pub noise: f64,
}

fn tol_gradient() -> f64 {
    1e-8
}

fn tol_hessian() -> f64 {
    1e-7
}

fn tol_equivariance() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gradient: tol_gradient(), hessian: tol_hessian(), theorem: tol_gradient(), equivariance: tol_equivariance(), noise: tol_gradient() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    /// Batches drawn for the residual and noise checks.
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Random group elements per descriptor for the equivariance check.
    #[serde(default = "default_alphas")]
    pub alphas: usize,
    /// Treat every activation as homogeneous when enumerating groups (a
    /// negative control for non-homogeneous ones).
    #[serde(default)]
    pub assume_homogeneous: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_batches() -> usize {
    16
}

fn default_alphas() -> usize {
    20
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { batches: default_batches(), alphas: default_alphas(), assume_homogeneous: false, tolerances: Tolerances::default() }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::ContinuousSgd, Method::DiscreteExact]
}

fn default_log_every() -> usize {
    1
}

/// One experiment; relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub arch: ArchRef,
    pub dataset: DatasetSpec,
    pub hyper: HyperParams,
    pub epochs: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Steps between checkpoints; none when absent.
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
    #[serde(default)]
    pub descriptors: DescriptorFilter,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub check: CheckSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse and resolve relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ArchRef::Path(p) = &mut self.arch {
            fix(p);
        }
        match &mut self.dataset {
            DatasetSpec::Csv { path, .. } => fix(path),
            DatasetSpec::Idx { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSpec::Synthetic { .. } => {}
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config("checkpoint_every must be >= 1".into()));
        }
        if let DatasetSpec::Synthetic { clusters, dim, n, spread, .. } = &self.dataset {
            if *clusters == 0 || *dim == 0 || *n == 0 || !(*spread >= 0.0) {
                return Err(Error::Config("synthetic dataset needs clusters, dim, n >= 1 and spread >= 0".into()));
            }
        }
        if self.check.batches < 2 {
            return Err(Error::Config("check.batches must be >= 2".into()));
        }
        self.hyper.validate()
    }

    /// Check that every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        if let ArchRef::Path(p) = &self.arch {
            paths.push(p);
        }
        match &self.dataset {
            DatasetSpec::Csv { path, .. } => paths.push(path),
            DatasetSpec::Idx { images, labels, .. } => {
                paths.push(images);
                paths.push(labels);
            }
            DatasetSpec::Synthetic { .. } => {}
        }
        for p in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn arch_spec(&self) -> Result<ArchSpec> {
        match &self.arch {
            ArchRef::Path(p) => ArchSpec::load(p),
            ArchRef::Inline(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hyper.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "arch": {"inline": {"version": 1, "input_dim": 4, "num_classes": 3, "layers": [
            {"kind": "dense", "in": 4, "out": 3}, {"kind": "softmax_head"}]}},
        "dataset": {"kind": "synthetic", "clusters": 3, "dim": 4, "n": 60},
        "hyper": {"eta": 0.1},
        "epochs": 2
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.log_every, 1);
        assert_eq!(cfg.descriptors, DescriptorFilter::All);
        assert_eq!(cfg.methods, default_methods());
        assert_eq!(cfg.check.batches, 16);
        let again = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let extra = MINIMAL.replace("\"epochs\": 2", "\"epochs\": 2, \"epoch\": 3");
        assert!(ExperimentConfig::from_json(&extra).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"epochs\": 2", "\"epochs\": 0")).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"version\": 1,\n        \"arch\"", "\"version\": 2,\n        \"arch\"")).is_err());
    }

    #[test]
    fn missing_files_are_reported() {
        let text = MINIMAL.replace(
            r#"{"kind": "synthetic", "clusters": 3, "dim": 4, "n": 60}"#,
            r#"{"kind": "csv", "path": "nowhere.csv"}"#,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        match &cfg.dataset {
            DatasetSpec::Csv { path: p, .. } => assert_eq!(p, &dir.path().join("nowhere.csv")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(cfg.check_files(), Err(Error::Config(_))));
    }

    #[test]
    fn filters() {
        let ds = vec![
            SymmetryDescriptor::translation(vec![0], "softmax column 0"),
            SymmetryDescriptor::translation(vec![1], "softmax column 1"),
            SymmetryDescriptor::scale(vec![2], "bn channel 0 (layer 1)"),
            SymmetryDescriptor::rescale(vec![3], vec![4], "hidden neuron 0 (layer 2)"),
        ];
        assert_eq!(DescriptorFilter::Kind(SymmetryKind::Translation).apply(ds.clone()).len(), 2);
        assert_eq!(DescriptorFilter::Label("layer".into()).apply(ds.clone()).len(), 2);
        assert_eq!(DescriptorFilter::PerKind(1).apply(ds.clone()).len(), 3);
        assert_eq!(DescriptorFilter::All.apply(ds).len(), 4);
    }
}
