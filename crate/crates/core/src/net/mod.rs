//! Architecture specs, executable networks and the static symmetry census.

mod arch;
mod census;
mod network;

pub use arch::{ArchSpec, CensusAdjustment, InitScheme, Layer, ARCH_SPEC_VERSION};
pub use census::{census, CensusEntry, CensusKind, SymmetryCensus};
pub use network::{Activation, Batch, Block, Network, ParamInfo};

/// Validate `spec` and build the executable network.
pub fn build(spec: &ArchSpec) -> crate::error::Result<Network> {
    Network::new(spec.clone())
}
