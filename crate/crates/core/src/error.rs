use thiserror::Error;

use crate::lattice::{CellId, CubeCoord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("cell index {index} out of range for an airspace of {count} cells")]
    OutOfRange { index: u32, count: usize },
    #[error("{0:?} is not a cube coordinate (x + y + z != 0)")]
    NotACube(CubeCoord),
    #[error("{0:?} lies outside the airspace")]
    OutsideAirspace(CubeCoord),
    #[error("invalid airspace: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("cells {from} and {to} are not adjacent")]
    NotAdjacent { from: CellId, to: CellId },
    #[error("no flyable leg of the required length for a {turn_deg:.0} degree turn")]
    Infeasible { turn_deg: f64 },
    #[error("entry pose does not sit on a border midpoint or centroid of cell {0}")]
    BadEntry(CellId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no conflict-free allocation within {horizon} steps")]
    Infeasible { horizon: u32 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("sample size {k} exceeds the stream length {len}")]
    SampleTooLarge { k: usize, len: usize },
    #[error("cannot aggregate an empty result stream")]
    EmptyStream,
    #[error("{0}")]
    Invalid(String),
}
