//! Weakly completely-uniformly-distributed driving sequences for MCMC.
//!
//! The crate builds lattice-based driving sequences (full-period LCG
//! tableaux with Cranley-Patterson rotation, Liao's row shuffle, block
//! permutations, IID insertion), measures their star discrepancy
//! exactly, runs finite-state Metropolis-Hastings and the Albert-Chib
//! probit Gibbs sampler on them, and reduces replication studies to
//! variance-reduction and bias tables.

pub mod discrepancy;
pub mod error;
pub mod mcmc;
pub mod normal;
pub mod probit;
pub mod rng;
pub mod seq;
pub mod seqgen;
pub mod study;

pub use discrepancy::{
    local_discrepancy, nonoverlapping_tuples, overlapping_tuples, star_discrepancy,
    star_discrepancy_default, DiscrepancyReport, PointSet, TupleMode, DEFAULT_WORK_BUDGET,
};
pub use error::{Error, Result};
pub use seq::{DrivingSequence, Method, Permutation, SeqMeta};
pub use seqgen::{LatticeSpec, STUDY_LATTICES};
