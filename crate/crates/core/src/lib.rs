//! Simulation core for hexagonal-cell airspace coordination.

pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod lattice;
pub mod daa;
pub mod strategic;
pub mod collab;
pub mod scenario;
pub mod engine;
pub mod metrics;

pub use collab::{Reservation, ReservationLedger};
pub use daa::{DaaConfig, DaaMode};
pub use engine::{run_scenario, run_scenario_traced, AircraftResult, EngineConfig, EventSet, Mode, ScenarioResult};
pub use error::{DomainError, GuidanceError, LatticeError, SolveError};
pub use geometry::{Pose, Vec2};
pub use kinematics::{AircraftState, KinematicLimits};
pub use lattice::{Airspace, AirspaceConfig, CellId};
pub use metrics::{aggregate, AggregateStats};
pub use scenario::{gen_recovery, gen_unperturbed, Mission, ScenarioConfig, ScenarioSet};
pub use strategic::{solve, AllocationProblem, OccupancyPlan};
