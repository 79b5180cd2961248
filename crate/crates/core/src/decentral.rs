//! Decentralized machinery: communication subgroups, target-priority tables,
//! the TP-UPDATE procedure and the occupied-goal policy of the naive solver.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::closest_target;
use crate::grid::Cell;
use crate::swap::{tswap_iteration, tswap_pass, GroupTables, PlanContext, Priority, SwapError, SwapEvent};

/// Smallest radius at which disjoint groups can never collide in one step.
pub const MIN_RANGE: u32 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecentralError {
    #[error("communication radius {0} is below the minimum of {MIN_RANGE}")]
    RangeTooSmall(u32),
    #[error("target tables cover {0} and {1} targets")]
    TargetSetMismatch(usize, usize),
    #[error("agent {agent} with priority {priority} found no eligible target")]
    NoEligibleTarget { agent: usize, priority: Priority },
    #[error(transparent)]
    Swap(#[from] SwapError),
}

/// Highest priority known to have claimed each target; `None` is the bottom element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TpTable {
    entries: Vec<Option<Priority>>,
}

impl TpTable {
    pub fn new(targets: usize) -> Self {
        Self { entries: vec![None; targets] }
    }

    /// A fresh table holding only the owner's claim.
    pub fn with_claim(targets: usize, target: usize, priority: Priority) -> Self {
        let mut t = Self::new(targets);
        t.raise(target, priority);
        t
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, target: usize) -> Option<Priority> {
        self.entries[target]
    }

    /// Records `priority` for `target` unless a higher claim is already known.
    pub fn raise(&mut self, target: usize, priority: Priority) {
        let e = &mut self.entries[target];
        if *e < Some(priority) {
            *e = Some(priority);
        }
    }

    pub fn merge_from(&mut self, other: &TpTable) -> Result<(), DecentralError> {
        if other.len() != self.len() {
            return Err(DecentralError::TargetSetMismatch(self.len(), other.len()));
        }
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            if *a < b {
                *a = b;
            }
        }
        Ok(())
    }

    /// Targets whose recorded claim is at most `priority` (unknown targets included).
    pub fn count_at_most(&self, priority: Priority) -> usize {
        self.entries.iter().filter(|&&e| e <= Some(priority)).count()
    }

    pub fn entries(&self) -> &[Option<Priority>] {
        &self.entries
    }
}

/// Per-target maximum; an empty list is an error since the target count is unknown.
pub fn merge_tp<'a>(tables: impl IntoIterator<Item = &'a TpTable>) -> Result<TpTable, DecentralError> {
    let mut it = tables.into_iter();
    let mut out = it.next().cloned().ok_or(DecentralError::TargetSetMismatch(0, 0))?;
    for t in it {
        out.merge_from(t)?;
    }
    Ok(out)
}

/// Disjoint groups of agent indices, each sorted; groups ordered by first member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupPartition {
    pub groups: Vec<Vec<usize>>,
}

impl SubgroupPartition {
    pub fn single(n: usize) -> Self {
        Self { groups: vec![(0..n).collect()] }
    }

    pub fn count(&self) -> usize {
        self.groups.len()
    }

    pub fn mean_size(&self) -> f64 {
        let total: usize = self.groups.iter().map(Vec::len).sum();
        total as f64 / self.groups.len().max(1) as f64
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Closure of the "within a (2k+1)x(2k+1) square" relation. Obstacles do not block communication.
pub fn compute_subgroups(positions: &[Cell], k: u32) -> Result<SubgroupPartition, DecentralError> {
    if k < MIN_RANGE {
        return Err(DecentralError::RangeTooSmall(k));
    }
    let n = positions.len();
    let mut uf = UnionFind::new(n);
    // sweep by row so only pairs within k rows are compared
    let mut by_row: Vec<usize> = (0..n).collect();
    by_row.sort_by_key(|&i| (positions[i].row, i));
    for (a_pos, &a) in by_row.iter().enumerate() {
        for &b in &by_row[a_pos + 1..] {
            if positions[b].row - positions[a].row > k {
                break;
            }
            if positions[a].chebyshev(positions[b]) <= k {
                uf.union(a, b);
            }
        }
    }
    Ok(partition_from(&mut uf, n))
}

fn partition_from(uf: &mut UnionFind, n: usize) -> SubgroupPartition {
    let mut slot_of_root = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        if slot_of_root[r] == usize::MAX {
            slot_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[r]].push(i);
    }
    SubgroupPartition { groups }
}

/// Reference partition: for every agent, flood its own chain of in-range neighbors.
/// Quadratic per agent; used to cross-check [`compute_subgroups`].
pub fn subgroups_by_local_flood(positions: &[Cell], k: u32) -> SubgroupPartition {
    let n = positions.len();
    let mut seen_group = vec![false; n];
    let mut groups = Vec::new();
    for i in 0..n {
        if seen_group[i] {
            continue;
        }
        let mut reach = BTreeSet::from([i]);
        let mut frontier = vec![i];
        while let Some(a) = frontier.pop() {
            for b in 0..n {
                if !reach.contains(&b) && positions[a].chebyshev(positions[b]) <= k {
                    reach.insert(b);
                    frontier.push(b);
                }
            }
        }
        for &m in &reach {
            seen_group[m] = true;
        }
        groups.push(reach.into_iter().collect());
    }
    SubgroupPartition { groups }
}

/// A target abandoned in the conflict-resolution phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reassignment {
    pub agent: usize,
    pub priority: Priority,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TpUpdateReport {
    pub reassignments: Vec<Reassignment>,
    pub events: Vec<SwapEvent>,
}

/// Resolves the group's assignment against the merged table, then runs one TSWAP
/// iteration with priorities travelling alongside targets.
///
/// `tp` is the group's merged table on entry and the shared updated table on exit.
pub fn tp_update(
    tables: &mut GroupTables,
    tp: &mut TpTable,
    ctx: &PlanContext<'_>,
) -> Result<TpUpdateReport, DecentralError> {
    if tp.len() != ctx.targets.len() {
        return Err(DecentralError::TargetSetMismatch(tp.len(), ctx.targets.len()));
    }
    let mut report = TpUpdateReport::default();
    for j in tables.priority_order() {
        let pr = tables.priorities[j];
        let current = tables.targets[j];
        if tp.get(current) > Some(pr) {
            let pos = tables.positions[j];
            let to = closest_target(pos, ctx.fields, |t| tp.get(t) <= Some(pr))
                .ok_or(DecentralError::NoEligibleTarget { agent: tables.members[j], priority: pr })?;
            tables.targets[j] = to;
            report.reassignments.push(Reassignment { agent: tables.members[j], priority: pr, from: current, to });
        }
        tp.raise(tables.targets[j], pr);
    }

    report.events = tswap_iteration(tables, ctx)?;
    // exchanged targets travel with their priorities; keep the table current regardless
    for slot in 0..tables.len() {
        tp.raise(tables.targets[slot], tables.priorities[slot]);
    }
    Ok(report)
}

/// Per-agent state owned by the simulator between timesteps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: usize,
    pub priority: Priority,
    pub pos: Cell,
    pub target: usize,
    /// Present for TP-SWAP agents only.
    pub tp: Option<TpTable>,
    /// Goals seen occupied (naive solver only).
    pub occupied_goals: BTreeSet<usize>,
    /// Naive solver: the current target came from a swap or rotation rather than
    /// the agent's own choice, so stale occupied-goal entries do not evict it.
    pub exchanged_target: bool,
}

impl AgentState {
    pub fn new(id: usize, pos: Cell, target: usize) -> Self {
        Self {
            id,
            priority: id as Priority,
            pos,
            target,
            tp: None,
            occupied_goals: BTreeSet::new(),
            exchanged_target: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NaiveReport {
    /// (agent, old target, new target)
    pub reselections: Vec<(usize, usize, usize)>,
    pub events: Vec<SwapEvent>,
}

/// One step of the naive solver for one group: occupied-goal bookkeeping, target
/// reselection, then a TSWAP movement pass that tolerates duplicate targets.
/// Writes targets and priorities back into `agents`; returns the planned positions
/// in `tables`.
pub fn naive_step_policy(
    agents: &mut [AgentState],
    group: &[usize],
    ctx: &PlanContext<'_>,
) -> Result<(GroupTables, NaiveReport), DecentralError> {
    let resting = |a: &AgentState| a.pos == ctx.targets[a.target];
    let mut observed = vec![false; group.len()];
    for (slot, &i) in group.iter().enumerate() {
        let goal = agents[i].target;
        let taken = group.iter().any(|&m| m != i && agents[m].target == goal && agents[m].pos == ctx.targets[goal]);
        if taken {
            agents[i].occupied_goals.insert(goal);
            observed[slot] = true;
        }
    }
    let shared: BTreeSet<usize> = group.iter().flat_map(|&i| agents[i].occupied_goals.iter().copied()).collect();
    for &i in group {
        agents[i].occupied_goals.clone_from(&shared);
    }

    let mut report = NaiveReport::default();
    let mut order: Vec<usize> = (0..group.len()).collect();
    order.sort_by(|&a, &b| agents[group[b]].priority.cmp(&agents[group[a]].priority));
    for slot in order {
        let a = &mut agents[group[slot]];
        if resting(a) && !observed[slot] {
            continue;
        }
        let listed = a.occupied_goals.contains(&a.target);
        if observed[slot] || (listed && !a.exchanged_target) {
            if let Some(to) = closest_target(a.pos, ctx.fields, |t| !a.occupied_goals.contains(&t)) {
                if to != a.target {
                    report.reselections.push((a.id, a.target, to));
                    a.target = to;
                }
                a.exchanged_target = false;
            }
        }
    }

    let mut tables = GroupTables {
        members: group.to_vec(),
        positions: group.iter().map(|&i| agents[i].pos).collect(),
        targets: group.iter().map(|&i| agents[i].target).collect(),
        priorities: group.iter().map(|&i| agents[i].priority).collect(),
    };
    report.events = tswap_pass(&mut tables, ctx)?;
    for (slot, &i) in group.iter().enumerate() {
        let a = &mut agents[i];
        if a.target != tables.targets[slot] {
            a.exchanged_target = true;
        }
        a.target = tables.targets[slot];
        a.priority = tables.priorities[slot];
    }
    Ok((tables, report))
}
