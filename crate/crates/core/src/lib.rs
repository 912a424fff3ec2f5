//! Distributed task replanning for heterogeneous Earth-observation fleets.
//!
//! The crate models satellites, UAVs and airships grouped under planning
//! centers, negotiates task allocations through a contract net, and solves
//! the resulting winner-determination problems either heuristically (float
//! interval local search) or exactly (branch and bound). Baseline allocators
//! and evaluation metrics live alongside so experiments can compare them on
//! identical seeded scenarios.

pub mod baselines;
pub mod bidding;
pub mod error;
pub mod experiment;
pub mod feasibility;
pub mod mca;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod scenario;
pub mod wdp;

pub use error::{Error, Result};

/// SplitMix64 finalizer; used to derive independent sub-seeds and
/// deterministic per-link latencies.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
