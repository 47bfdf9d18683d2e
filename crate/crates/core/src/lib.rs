//! Connectivity recovery for partitioned UAV ad-hoc networks.
//!
//! The crate models a planar network of mobile nodes with an SNR-threshold
//! link predicate, detects the partition caused by a cut-vertex failure, and
//! repairs it with cooperative communication: static CC bridges where summed
//! helper SNR already spans the gap, and controlled movement toward the
//! failure position where it does not. RIM, LeDiR and Cooperative Bridges
//! baselines share the same tick engine and report format, and a seeded
//! Monte Carlo harness sweeps node densities and emits CSV/JSON metrics.

pub mod baselines;
pub mod channel;
pub mod harness;
pub mod model;
pub mod recovery;
pub mod simulator;
pub mod topology;
