//! Qudit circuits for Trotterized time evolution: F-move reductions of the
//! plaquette term, ancilla lowering, gate counting and dense verification.

pub mod blocks;
pub mod ir;
pub mod lower;
pub mod sim;
pub mod trotter;
pub mod verify;

use thiserror::Error;

use crate::spinnet::SpinNetError;

pub use blocks::{fmove_matrix, fmove_unitary, g_gate, SpectralBlock, SpectralTable};
pub use ir::{Circuit, CircuitMetadata, Gate, GateKind};
pub use lower::{expand_multicontrolled, gate_bound, gate_count, lower, ComplexityReport, LayerInventory};
pub use sim::{dense_simulate, Simulator, DEFAULT_SIM_CAP};
pub use trotter::{
    plaquette_fmove_sequence, trotter_plaquette_step, trotter_step_second_order, FMoveSpec, Lattice, Slot,
    StepTerms,
};
pub use verify::{conjugation_residual, hexagon_exactness, parse_lattice, random_outer, trotter_error, BlockError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("F''_J for J = {flux}/2 at k = {k} is not symmetric (residual {residual:e})")]
    AsymmetricBlock { k: u32, flux: u32, residual: f64 },
    #[error("unsupported lattice: {0}")]
    UnsupportedTopology(String),
    #[error("ancilla needs dimension {needed}, has {available}")]
    AncillaTooSmall { needed: usize, available: usize },
    #[error("simulation size exceeds cap {cap}")]
    DimensionOverCap { cap: usize },
    #[error("gate {0} acts non-diagonally on a pinned qudit")]
    NotRestrictable(usize),
    #[error("qudit {0} out of range")]
    QuditOutOfRange(usize),
    #[error(transparent)]
    SpinNet(#[from] SpinNetError),
    #[error(transparent)]
    Algebra(#[from] crate::Error),
}

pub type Result<T> = std::result::Result<T, CircuitError>;
