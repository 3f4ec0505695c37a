//! Finite-truncation dilation toolkit for operator tuples commuting
//! according to a graph.
//!
//! The crate constructs, at controlled truncation, co-isometric
//! extensions and unitary dilations of contraction tuples whose
//! commutation pattern is prescribed by an acyclic graph, and generates
//! and verifies the cyclic-graph counterexample together with its
//! Laurent-operator obstruction argument.
//!
//! Infinite block operators (Schäffer tails, inflated shifts, direct
//! limits) are truncated to finitely many slots; correctness is claimed
//! only inside an exactness window whose bookkeeping travels with every
//! operator. Compressions to H of words of bounded length depend only on
//! slots within bounded distance of H, so finite windows give
//! float-exact answers to the questions the verifiers ask.

#![forbid(unsafe_code)]

pub mod block;
pub mod cmatrix;
pub mod engine;
pub mod error;
pub mod families;
pub mod graph;
pub mod kernels;
mod orbit;
pub mod orthonorm;
pub mod pair;
pub mod params;
pub mod pipeline;
pub mod single;
pub mod space;
pub mod obstruction;

pub use block::BlockOp;
pub use cmatrix::{re, C64, CMatrix};
pub use engine::{
    extend_tree, extend_tree_isometric, wcl_step, wcl_step_unitary, ExtensionFamily,
    ExtensionMode,
};
pub use error::{DilationError, Result};
pub use graph::{check_commute_according, CommutationGraph, CommuteReport};
pub use kernels::{classify, psd_sqrt, spectral_norm, OperatorClass, OperatorKind};
pub use obstruction::{
    build_cycle_counterexample, inflated_bilateral_shift, laurent_forcing_check,
    no_go_certificate, CycleExample,
};
pub use orthonorm::{
    pivoted_orthonormalize_gram, pivoted_orthonormalize_vectors, unitary_completion,
    PivotedBasis,
};
pub use pair::{ando_coisometric_pair, ito_unitary_pair, AndoPair};
pub use params::Params;
pub use pipeline::{dilate_graph, verify_d, DilationReport};
pub use single::{
    defect, match_minimal_parts, min_coisometric_extension, minimal_part, orbit_gram,
    unitary_dilation_single, ExtensionResult, MinimalPart,
};
pub use space::{BlockSpace, Slot};
