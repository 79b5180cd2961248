//! One TSWAP planning iteration over a group of agents.
//!
//! Agents are examined in decreasing priority. A free next vertex is reserved by
//! writing it into the position table, so later agents see the reservation. A
//! blocked agent waits and either swaps target and priority with a blocker resting
//! on its own target, or, when the blocking chain loops back to it, rotates targets
//! and priorities along the loop.

use std::collections::HashMap;

use thiserror::Error;

use crate::grid::{next_vertex, Cell, DistanceFields, GridError, GridMap};

/// Larger value wins target disputes.
pub type Priority = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwapError {
    #[error("group assignment is inconsistent: target {0} held twice")]
    InconsistentAssignment(usize),
    #[error("two group members share cell {0}")]
    VertexConflict(Cell),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Map and per-target distance fields shared by every planner call on one instance.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub map: &'a GridMap,
    pub targets: &'a [Cell],
    pub fields: &'a DistanceFields,
}

impl PlanContext<'_> {
    #[inline]
    pub fn next_vertex(&self, from: Cell, target: usize) -> Result<Cell, GridError> {
        next_vertex(self.map, from, self.fields.field(target))
    }

    #[inline]
    pub fn dist(&self, from: Cell, target: usize) -> Option<u32> {
        self.fields.dist(from, target)
    }
}

/// Position, target and priority tables of one communication group, indexed by slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTables {
    /// Agent id per slot.
    pub members: Vec<usize>,
    pub positions: Vec<Cell>,
    pub targets: Vec<usize>,
    pub priorities: Vec<Priority>,
}

impl GroupTables {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Slots in decreasing priority.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.priorities[b].cmp(&self.priorities[a]).then(a.cmp(&b)));
        order
    }

    pub fn slot_of(&self, agent: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == agent)
    }

    fn at_target(&self, slot: usize, ctx: &PlanContext<'_>) -> bool {
        self.positions[slot] == ctx.targets[self.targets[slot]]
    }

    pub fn check_consistent(&self) -> Result<(), SwapError> {
        let mut seen = HashMap::with_capacity(self.len());
        for &t in &self.targets {
            if seen.insert(t, ()).is_some() {
                return Err(SwapError::InconsistentAssignment(t));
            }
        }
        Ok(())
    }

    fn occupancy(&self) -> Result<HashMap<Cell, usize>, SwapError> {
        let mut occ = HashMap::with_capacity(self.len());
        for (slot, &p) in self.positions.iter().enumerate() {
            if occ.insert(p, slot).is_some() {
                return Err(SwapError::VertexConflict(p));
            }
        }
        Ok(occ)
    }
}

/// Agents whose next vertices form a blocking loop, as slots in chain order:
/// the next vertex of `slots[i]` is occupied by `slots[i + 1]`, wrapping around.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlockCycle {
    pub slots: Vec<usize>,
}

/// Target exchanges performed by an iteration, in agent ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwapEvent {
    /// `agent` was blocked by `with`, who rested on its own target.
    Swap { agent: usize, with: usize },
    /// Loop members in chain order; each received its predecessor's target.
    Rotation { agents: Vec<usize> },
}

/// Follows the blocking chain from `start` using the current (partly reserved) positions.
pub fn detect_deadlock(
    start: usize,
    tables: &GroupTables,
    occupancy: &HashMap<Cell, usize>,
    ctx: &PlanContext<'_>,
) -> Result<Option<DeadlockCycle>, SwapError> {
    let mut chain = vec![start];
    let mut cur = start;
    loop {
        if tables.at_target(cur, ctx) {
            return Ok(None);
        }
        let next = ctx.next_vertex(tables.positions[cur], tables.targets[cur])?;
        let Some(&occ) = occupancy.get(&next) else {
            return Ok(None);
        };
        if occ == start {
            return Ok(Some(DeadlockCycle { slots: chain }));
        }
        if chain.contains(&occ) {
            return Ok(None);
        }
        chain.push(occ);
        cur = occ;
    }
}

/// Builds the occupancy index for external [`detect_deadlock`] calls.
pub fn occupancy_of(tables: &GroupTables) -> Result<HashMap<Cell, usize>, SwapError> {
    tables.occupancy()
}

/// One TSWAP iteration; rejects inconsistent group assignments.
pub fn tswap_iteration(tables: &mut GroupTables, ctx: &PlanContext<'_>) -> Result<Vec<SwapEvent>, SwapError> {
    tables.check_consistent()?;
    tswap_pass(tables, ctx)
}

/// The iteration without the consistency precondition, for planners that tolerate
/// duplicated targets inside a group.
pub(crate) fn tswap_pass(tables: &mut GroupTables, ctx: &PlanContext<'_>) -> Result<Vec<SwapEvent>, SwapError> {
    let mut occ = tables.occupancy()?;
    let mut events = Vec::new();
    for j in tables.priority_order() {
        if tables.at_target(j, ctx) {
            continue;
        }
        let v = ctx.next_vertex(tables.positions[j], tables.targets[j])?;
        match occ.get(&v).copied() {
            None => {
                occ.remove(&tables.positions[j]);
                occ.insert(v, j);
                tables.positions[j] = v;
            }
            Some(k) if v == ctx.targets[tables.targets[k]] => {
                tables.targets.swap(j, k);
                tables.priorities.swap(j, k);
                events.push(SwapEvent::Swap { agent: tables.members[j], with: tables.members[k] });
            }
            Some(_) => {
                if let Some(cycle) = detect_deadlock(j, tables, &occ, ctx)? {
                    rotate(tables, &cycle);
                    events
                        .push(SwapEvent::Rotation { agents: cycle.slots.iter().map(|&s| tables.members[s]).collect() });
                }
            }
        }
    }
    Ok(events)
}

/// Each loop member takes the target and priority of the member whose next vertex it occupies.
fn rotate(tables: &mut GroupTables, cycle: &DeadlockCycle) {
    let s = &cycle.slots;
    let last_target = tables.targets[s[s.len() - 1]];
    let last_priority = tables.priorities[s[s.len() - 1]];
    for i in (1..s.len()).rev() {
        tables.targets[s[i]] = tables.targets[s[i - 1]];
        tables.priorities[s[i]] = tables.priorities[s[i - 1]];
    }
    tables.targets[s[0]] = last_target;
    tables.priorities[s[0]] = last_priority;
}
