use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    Translation,
    Scale,
    Rescale,
}

impl SymmetryKind {
    pub const ALL: [SymmetryKind; 3] = [SymmetryKind::Translation, SymmetryKind::Scale, SymmetryKind::Rescale];

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryKind::Translation => "translation",
            SymmetryKind::Scale => "scale",
            SymmetryKind::Rescale => "rescale",
        }
    }
}

impl std::fmt::Display for SymmetryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A symmetry group acting on a subset of the parameter store.
///
/// `set_a` is `A` for translation and scale groups and `A1` for rescale
/// groups; `set_b` is `A2` and is empty for the other kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryDescriptor {
    pub kind: SymmetryKind,
    #[serde(with = "ranges")]
    pub set_a: Vec<usize>,
    #[serde(with = "ranges", default, skip_serializing_if = "Vec::is_empty")]
    pub set_b: Vec<usize>,
    pub label: String,
}

impl SymmetryDescriptor {
    pub fn translation(set_a: Vec<usize>, label: impl Into<String>) -> Self {
        Self { kind: SymmetryKind::Translation, set_a, set_b: Vec::new(), label: label.into() }
    }

    pub fn scale(set_a: Vec<usize>, label: impl Into<String>) -> Self {
        Self { kind: SymmetryKind::Scale, set_a, set_b: Vec::new(), label: label.into() }
    }

    pub fn rescale(set_a1: Vec<usize>, set_a2: Vec<usize>, label: impl Into<String>) -> Self {
        Self { kind: SymmetryKind::Rescale, set_a: set_a1, set_b: set_a2, label: label.into() }
    }

    /// Checks the structural invariants against a store of length `len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.set_a.is_empty() {
            return Err(Error::InvalidArgument(format!("{}: empty index set", self.label)));
        }
        match self.kind {
            SymmetryKind::Rescale => {
                if self.set_b.is_empty() {
                    return Err(Error::InvalidArgument(format!("{}: empty A2 set", self.label)));
                }
                if self.set_a.iter().any(|i| self.set_b.contains(i)) {
                    return Err(Error::InvalidArgument(format!("{}: A1 and A2 overlap", self.label)));
                }
            }
            _ => {
                if !self.set_b.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "{}: only rescale groups carry a second set",
                        self.label
                    )));
                }
            }
        }
        self.check_range(len)
    }

    pub(crate) fn check_range(&self, len: usize) -> Result<()> {
        match self.set_a.iter().chain(&self.set_b).find(|&&i| i >= len) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len }),
            None => Ok(()),
        }
    }
}

/// Generator field `∂α ψ` at the identity, embedded in the full layout:
/// `1_A`, `θ_A` or `θ_A1 − θ_A2`.
pub fn generator(desc: &SymmetryDescriptor, theta: &[f64]) -> Result<Vec<f64>> {
    desc.check_range(theta.len())?;
    let mut out = vec![0.0; theta.len()];
    match desc.kind {
        SymmetryKind::Translation => {
            for &i in &desc.set_a {
                out[i] = 1.0;
            }
        }
        SymmetryKind::Scale => {
            for &i in &desc.set_a {
                out[i] = theta[i];
            }
        }
        SymmetryKind::Rescale => {
            for &i in &desc.set_a {
                out[i] = theta[i];
            }
            for &i in &desc.set_b {
                out[i] = -theta[i];
            }
        }
    }
    Ok(out)
}

/// Quantity conserved by gradient flow: `⟨θ_A, 1⟩`, `|θ_A|²` or
/// `|θ_A1|² − |θ_A2|²`.
pub fn conserved_quantity(desc: &SymmetryDescriptor, theta: &[f64]) -> Result<f64> {
    desc.check_range(theta.len())?;
    let sq = |set: &[usize]| set.iter().map(|&i| theta[i] * theta[i]).sum::<f64>();
    Ok(match desc.kind {
        SymmetryKind::Translation => desc.set_a.iter().map(|&i| theta[i]).sum(),
        SymmetryKind::Scale => sq(&desc.set_a),
        SymmetryKind::Rescale => sq(&desc.set_a) - sq(&desc.set_b),
    })
}

/// Natural magnitude of the conserved quantity, used to normalize errors:
/// `‖θ_A‖₁`, `|θ_A|²` or `|θ_A1|² + |θ_A2|²`.
pub fn quantity_magnitude(desc: &SymmetryDescriptor, theta: &[f64]) -> Result<f64> {
    desc.check_range(theta.len())?;
    let sq = |set: &[usize]| set.iter().map(|&i| theta[i] * theta[i]).sum::<f64>();
    Ok(match desc.kind {
        SymmetryKind::Translation => desc.set_a.iter().map(|&i| theta[i].abs()).sum(),
        SymmetryKind::Scale => sq(&desc.set_a),
        SymmetryKind::Rescale => sq(&desc.set_a) + sq(&desc.set_b),
    })
}

/// Apply the group element `α` to `θ` in place.
pub fn act(desc: &SymmetryDescriptor, theta: &mut [f64], alpha: f64) -> Result<()> {
    desc.check_range(theta.len())?;
    match desc.kind {
        SymmetryKind::Translation => {
            for &i in &desc.set_a {
                theta[i] += alpha;
            }
        }
        SymmetryKind::Scale | SymmetryKind::Rescale => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{} group element must be a positive real, got {alpha}",
                    desc.kind
                )));
            }
            for &i in &desc.set_a {
                theta[i] *= alpha;
            }
            for &i in &desc.set_b {
                theta[i] /= alpha;
            }
        }
    }
    Ok(())
}

/// Serialize sorted index sets as half-open `[start, end)` runs.
mod ranges {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(set: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for &i in set {
            match runs.last_mut() {
                Some(run) if run[1] == i => run[1] += 1,
                _ => runs.push([i, i + 1]),
            }
        }
        runs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let runs = Vec::<[usize; 2]>::deserialize(d)?;
        Ok(runs.into_iter().flat_map(|[a, b]| a..b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let theta = [5.0, 7.0, 9.0];
        let t = SymmetryDescriptor::translation(vec![0, 1], "t");
        let s = SymmetryDescriptor::scale(vec![0, 2], "s");
        let r = SymmetryDescriptor::rescale(vec![0], vec![1], "r");
        assert_eq!(generator(&t, &theta).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(generator(&s, &theta).unwrap(), vec![5.0, 0.0, 9.0]);
        assert_eq!(generator(&r, &theta).unwrap(), vec![5.0, -7.0, 0.0]);
        let bad = SymmetryDescriptor::scale(vec![3], "bad");
        assert!(matches!(generator(&bad, &theta), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn conserved_quantities() {
        let t = SymmetryDescriptor::translation(vec![0, 1], "t");
        assert_eq!(conserved_quantity(&t, &[5.0, 7.0, 9.0]).unwrap(), 12.0);
        let s = SymmetryDescriptor::scale(vec![0, 2], "s");
        assert_eq!(conserved_quantity(&s, &[3.0, 1.0, 4.0]).unwrap(), 25.0);
        let r = SymmetryDescriptor::rescale(vec![0, 1], vec![2], "r");
        assert_eq!(conserved_quantity(&r, &[3.0, 4.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn action_preserves_conserved_quantity_for_rescale() {
        let r = SymmetryDescriptor::rescale(vec![0], vec![1], "r");
        let mut theta = vec![2.0, 3.0];
        act(&r, &mut theta, 2.0).unwrap();
        assert_eq!(theta, vec![4.0, 1.5]);
        assert!(act(&r, &mut theta, -1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(SymmetryDescriptor::rescale(vec![0, 1], vec![1], "x").validate(3).is_err());
        assert!(SymmetryDescriptor::scale(vec![], "x").validate(3).is_err());
        assert!(SymmetryDescriptor::scale(vec![0], "x").validate(3).is_ok());
    }

    #[test]
    fn json_uses_ranges() {
        let d = SymmetryDescriptor::rescale(vec![0, 1, 2, 7], vec![4], "hidden neuron 0");
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains(r#""set_a":[[0,3],[7,8]]"#), "{json}");
        let back: SymmetryDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
