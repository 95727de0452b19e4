//! Shared fixtures for the benchmarks.

use holomera::mera::{BulkCoordinate, MeraNetwork, CORE_LEVEL};

/// Symmetric-gauge network with an optimized core.
pub fn network(depth: usize) -> MeraNetwork {
    MeraNetwork::new(depth).expect("supported depth")
}

/// Two insertions on the central radial lineage, `sep` layers apart, starting at layer `rho`.
pub fn radial_pair(rho: usize, sep: usize) -> (BulkCoordinate, BulkCoordinate) {
    let root = BulkCoordinate { rho: CORE_LEVEL, s: 0 };
    (root.lineage_at(rho), root.lineage_at(rho + sep))
}
