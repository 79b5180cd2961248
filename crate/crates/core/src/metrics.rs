//! Solution costs and the completeness potential
//! `phi = phi1 + phi2 + C * phi3`.
//!
//! * `phi1`: summed distance from each agent to its current target.
//! * `phi2`: for each agent, how many agents' targets lie on the cells it still has to
//!   enter along its canonical path (the target itself always counts).
//! * `phi3`: for each agent, how many targets its table records as unclaimed or claimed
//!   by a priority no higher than its own.
//! * `C = 2 * diameter + 1`.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::decentral::AgentState;
use crate::grid::{canonical_path, Cell, GridError};
use crate::sim::SolveResult;
use crate::swap::PlanContext;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("cost metrics are undefined for an unsolved run")]
    Unsolved,
    #[error("subgroup statistics need a decentralized run")]
    Centralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PotentialSnapshot {
    pub t: u32,
    pub phi1: u64,
    pub phi2: u64,
    pub phi3: u64,
    pub c: u64,
    pub phi: u64,
}

/// `C` for a map of the given diameter.
pub fn potential_weight(diameter: u32) -> u64 {
    2 * diameter as u64 + 1
}

/// Evaluates the potential over the global state. Agents without a table contribute 0 to `phi3`.
pub fn potential(t: u32, agents: &[AgentState], ctx: &PlanContext<'_>, c: u64) -> Result<PotentialSnapshot, GridError> {
    let mut target_count: HashMap<Cell, u64> = HashMap::with_capacity(agents.len());
    for a in agents {
        *target_count.entry(ctx.targets[a.target]).or_default() += 1;
    }
    let mut phi1 = 0u64;
    let mut phi2 = 0u64;
    let mut phi3 = 0u64;
    for a in agents {
        let field = ctx.fields.field(a.target);
        phi1 += field.get(a.pos).ok_or(GridError::Unreachable { from: a.pos, to: field.target() })? as u64;
        phi2 += canonical_path(ctx.map, a.pos, field)?
            .iter()
            .map(|c| target_count.get(c).copied().unwrap_or(0))
            .sum::<u64>();
        if let Some(tp) = &a.tp {
            phi3 += tp.count_at_most(a.priority) as u64;
        }
    }
    Ok(PotentialSnapshot { t, phi1, phi2, phi3, c, phi: phi1 + phi2 + c * phi3 })
}

/// Earliest timestep from which the agent never leaves its final cell.
pub fn arrival_time(path: &[Cell]) -> u32 {
    let Some(last) = path.last() else { return 0 };
    let stay = path.iter().rev().take_while(|c| *c == last).count();
    (path.len() - stay) as u32
}

pub fn flowtime(result: &SolveResult) -> Result<u64, MetricError> {
    if !result.solved {
        return Err(MetricError::Unsolved);
    }
    Ok(result.trajectory.paths.iter().map(|p| arrival_time(p) as u64).sum())
}

pub fn makespan(result: &SolveResult) -> Result<u64, MetricError> {
    if !result.solved {
        return Err(MetricError::Unsolved);
    }
    Ok(result.trajectory.paths.iter().map(|p| arrival_time(p) as u64).max().unwrap_or(0))
}

/// Mean group count and mean group size over the timesteps of a decentralized run.
pub fn subgroup_stats(result: &SolveResult) -> Result<(f64, f64), MetricError> {
    let stats = result.subgroup_stats.as_ref().ok_or(MetricError::Centralized)?;
    if stats.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = stats.len() as f64;
    let count = stats.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let size = stats.iter().map(|s| s.1).sum::<f64>() / n;
    Ok((count, size))
}
