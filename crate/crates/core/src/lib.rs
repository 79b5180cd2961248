//! Anonymous multi-agent pathfinding on 4-connected grids.
//!
//! Four solvers share one lockstep simulator: centralized TSWAP, decentralized TSWAP
//! from a random consistent assignment, a naive fully decentralized variant that
//! tracks occupied goals, and TP-SWAP, which resolves target conflicts inside each
//! communication subgroup through merged target-priority tables.

pub mod assignment;
pub mod decentral;
pub mod dump;
pub mod grid;
pub mod maps;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod swap;
pub mod sweep;

use thiserror::Error;

pub use assignment::{AssignmentError, AssignmentTable};
pub use decentral::{AgentState, DecentralError, SubgroupPartition, TpTable};
pub use dump::{DumpError, TrajectoryDump};
pub use grid::{parse_map, Cell, DistanceFields, GridError, GridMap, MapParseError};
pub use maps::{MapCatalog, MapError, MapSource};
pub use metrics::{MetricError, PotentialSnapshot};
pub use scenario::{demo_instance, generate_scenario, parse_scen, take_instance, Instance, Scenario, ScenarioError};
pub use sim::{
    run, validate_trajectory, AssignmentRule, RunCounters, SimError, Simulation, SolveResult, SolverConfig, SolverKind,
    Trajectory, Violation, WorldState,
};
pub use swap::{GroupTables, PlanContext, Priority, SwapError, SwapEvent};
pub use sweep::{SweepError, SweepRow, SweepSpec};

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    MapParse(#[from] MapParseError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
