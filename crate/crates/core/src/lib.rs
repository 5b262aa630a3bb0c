//! Precoding-based network alignment for multiple groupcast sessions.
//!
//! The pipeline runs over a directed acyclic network whose sources each
//! send one symbol per slot and whose destinations each want messages from
//! `L` sources:
//!
//! 1. [`netgraph`] loads and validates the network and evaluates transfer
//!    functions under random linear network coding.
//! 2. [`igraph`] builds the bipartite interference graph.
//! 3. [`sparsifier`] finds the minimal number of extra messages each
//!    destination must decode so the interference graph becomes a forest.
//! 4. [`precode`] builds precoding vectors over `L + d + 1` slots and checks
//!    the alignment conditions by exact rank computations.
//! 5. [`obstruction`] tests the alternating transfer ratio around a cycle.
//! 6. [`simulator`] pushes messages through the network and decodes them.
//!
//! [`report`] ties the stages together for the command-line tool, and
//! [`generate`] builds the synthetic networks used by tests and the CLI.

pub mod generate;
pub mod gf;
pub mod igraph;
pub mod netgraph;
pub mod obstruction;
pub mod precode;
pub mod report;
pub mod simulator;
pub mod sparsifier;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gf::{Fe, Field, GfError, Matrix, DEFAULT_MODULUS};
pub use igraph::{ForestDecomposition, IgraphError, InterferenceGraph};
pub use netgraph::{NetError, Network, NetworkRealization, NetworkSpec};
pub use precode::{AlignmentVerdict, PrecodeError, PrecodingPlan};
pub use sparsifier::SparsificationResult;

/// Deterministic generator for one named randomness stream under a seed.
///
/// Every randomized stage draws from its own stream so that changing how
/// much randomness one stage consumes never perturbs another.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream identifiers for [`seeded_rng`].
pub mod streams {
    pub const ZERO_TEST: u64 = 1;
    pub const REALIZE: u64 = 2;
    pub const THETA: u64 = 3;
    pub const RATIO: u64 = 4;
    pub const MESSAGES: u64 = 5;
    pub const ATTEMPT: u64 = 6;
}
