//! Synchronized discrete-time execution of the four solvers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{
    bottleneck_assignment, nearest_assignment, random_consistent_assignment, AssignmentError, AssignmentTable,
};
use crate::decentral::{
    compute_subgroups, merge_tp, naive_step_policy, subgroups_by_local_flood, tp_update, AgentState, DecentralError,
    Reassignment, SubgroupPartition, TpTable, MIN_RANGE,
};
use crate::grid::{Cell, DistanceFields, GridError, GridMap};
use crate::metrics::{arrival_time, potential, potential_weight, PotentialSnapshot};
use crate::scenario::Instance;
use crate::swap::{tswap_iteration, GroupTables, PlanContext, Priority, SwapError, SwapEvent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Decentral(#[from] DecentralError),
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invariant violated at t={t}: {message}")]
    Invariant { t: u32, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Centralized TSWAP with bottleneck assignment.
    CTswap,
    /// Decentralized TSWAP from a random consistent assignment.
    DTswapC,
    /// Naive fully decentralized solver with occupied-goal lists.
    DSwapN,
    /// Target and priority swapping.
    TpSwap,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::CTswap, SolverKind::DTswapC, SolverKind::DSwapN, SolverKind::TpSwap];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CTswap => "C-TSWAP",
            SolverKind::DTswapC => "D-TSWAP-C",
            SolverKind::DSwapN => "D-SWAP-N",
            SolverKind::TpSwap => "TP-SWAP",
        }
    }

    pub fn is_centralized(self) -> bool {
        self == SolverKind::CTswap
    }

    pub fn default_assignment(self) -> AssignmentRule {
        match self {
            SolverKind::CTswap => AssignmentRule::Bottleneck,
            SolverKind::DTswapC => AssignmentRule::RandomConsistent,
            SolverKind::DSwapN | SolverKind::TpSwap => AssignmentRule::Nearest,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "ctswap" | "tswap" => Ok(SolverKind::CTswap),
            "dtswapc" => Ok(SolverKind::DTswapC),
            "dswapn" | "dtswapn" | "naive" => Ok(SolverKind::DSwapN),
            "tpswap" => Ok(SolverKind::TpSwap),
            _ => Err(format!("unknown solver `{s}` (expected C-TSWAP, D-TSWAP-C, D-SWAP-N or TP-SWAP)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentRule {
    Nearest,
    RandomConsistent,
    Bottleneck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Communication radius: the (2k+1)x(2k+1) square around an agent.
    pub k: u32,
    pub seed: u64,
    pub t_max: u32,
    /// Replaces the solver's own initial assignment rule.
    pub assignment: Option<AssignmentRule>,
    pub record_phi: bool,
    /// Recompute partitions and group updates per agent and compare.
    pub cross_check: bool,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, k: u32, t_max: u32) -> Self {
        Self { kind, k, seed: 0, t_max, assignment: None, record_phi: false, cross_check: false }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.kind.is_centralized() && self.k < MIN_RANGE {
            return Err(SimError::Config(format!("communication radius k={} is below {MIN_RANGE}", self.k)));
        }
        Ok(())
    }
}

/// Default step limit for property tests: ten times the map's perimeter half.
pub fn default_t_max(map: &GridMap) -> u32 {
    10 * (map.width() + map.height())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub t: u32,
    pub agents: Vec<AgentState>,
    pub partition: SubgroupPartition,
}

impl WorldState {
    pub fn positions(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.pos).collect()
    }

    pub fn is_solved(&self, targets: &[Cell]) -> bool {
        self.agents.iter().all(|a| a.pos == targets[a.target])
    }
}

/// Per-agent cell, target cell and priority at every timestep.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trajectory {
    pub paths: Vec<Vec<Cell>>,
    pub targets: Vec<Vec<Cell>>,
    pub priorities: Vec<Vec<Priority>>,
}

impl Trajectory {
    /// Positions only; targets and priorities left empty.
    pub fn from_paths(paths: Vec<Vec<Cell>>) -> Self {
        Self { paths, targets: vec![], priorities: vec![] }
    }

    fn record(&mut self, world: &WorldState, targets: &[Cell]) {
        if self.paths.is_empty() {
            let n = world.agents.len();
            self.paths = vec![Vec::new(); n];
            self.targets = vec![Vec::new(); n];
            self.priorities = vec![Vec::new(); n];
        }
        for (i, a) in world.agents.iter().enumerate() {
            self.paths[i].push(a.pos);
            self.targets[i].push(targets[a.target]);
            self.priorities[i].push(a.priority);
        }
    }

    pub fn agents(&self) -> usize {
        self.paths.len()
    }

    pub fn horizon(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn final_targets(&self) -> Vec<Cell> {
        self.targets.iter().filter_map(|t| t.last().copied()).collect()
    }

    pub fn arrival_times(&self) -> Vec<u32> {
        self.paths.iter().map(|p| arrival_time(p)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub swaps: u64,
    pub rotations: u64,
    pub reassignments: u64,
    pub reselections: u64,
    /// Distinct targets abandoned in conflict resolution, keyed by the abandoning priority.
    pub abandoned_by_priority: BTreeMap<Priority, BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    pub solved: bool,
    pub steps_used: u32,
    pub flowtime: Option<u64>,
    pub makespan: Option<u64>,
    pub phi_trace: Vec<PotentialSnapshot>,
    /// (group count, mean group size) per executed timestep; `None` when centralized.
    pub subgroup_stats: Option<Vec<(usize, f64)>>,
    pub counters: RunCounters,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    pub reassignments: Vec<Reassignment>,
    pub reselections: Vec<(usize, usize, usize)>,
    pub events: Vec<SwapEvent>,
}

/// Everything a run shares across timesteps.
pub struct Simulation<'a> {
    pub inst: &'a Instance,
    pub fields: &'a DistanceFields,
    pub cfg: SolverConfig,
}

impl<'a> Simulation<'a> {
    pub fn new(inst: &'a Instance, fields: &'a DistanceFields, cfg: SolverConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        if fields.len() != inst.targets.len() {
            return Err(SimError::Config("distance fields do not match the instance targets".into()));
        }
        Ok(Self { inst, fields, cfg })
    }

    pub fn ctx(&self) -> PlanContext<'_> {
        PlanContext { map: &self.inst.map, targets: &self.inst.targets, fields: self.fields }
    }

    pub fn initial_assignment(&self) -> Result<AssignmentTable, SimError> {
        let rule = self.cfg.assignment.unwrap_or(self.cfg.kind.default_assignment());
        Ok(match rule {
            AssignmentRule::Nearest => nearest_assignment(self.inst, self.fields)?,
            AssignmentRule::RandomConsistent => random_consistent_assignment(self.inst, self.cfg.seed),
            AssignmentRule::Bottleneck => bottleneck_assignment(self.inst, self.fields)?,
        })
    }

    pub fn init_world(&self) -> Result<WorldState, SimError> {
        let assignment = self.initial_assignment()?;
        let m = self.inst.targets.len();
        let agents = self
            .inst
            .starts
            .iter()
            .zip(&assignment.target_of)
            .enumerate()
            .map(|(id, (&pos, &target))| {
                let mut a = AgentState::new(id, pos, target);
                if self.cfg.kind == SolverKind::TpSwap {
                    a.tp = Some(TpTable::with_claim(m, target, a.priority));
                }
                a
            })
            .collect::<Vec<_>>();
        let partition = self.partition(&agents.iter().map(|a| a.pos).collect::<Vec<_>>())?;
        Ok(WorldState { t: 0, agents, partition })
    }

    fn partition(&self, positions: &[Cell]) -> Result<SubgroupPartition, SimError> {
        if self.cfg.kind.is_centralized() {
            return Ok(SubgroupPartition::single(positions.len()));
        }
        let p = compute_subgroups(positions, self.cfg.k)?;
        if self.cfg.cross_check {
            let local = subgroups_by_local_flood(positions, self.cfg.k);
            if local != p {
                return Err(SimError::Invariant {
                    t: 0,
                    message: "local neighborhood flood disagrees with partition".into(),
                });
            }
        }
        Ok(p)
    }

    /// Advances the world by one synchronized timestep.
    pub fn step(&self, world: &mut WorldState) -> Result<StepReport, SimError> {
        let ctx = self.ctx();
        let before = world.positions();
        world.partition = self.partition(&before)?;
        let mut planned = before.clone();
        let mut report = StepReport::default();

        for group in &world.partition.groups {
            match self.cfg.kind {
                SolverKind::CTswap | SolverKind::DTswapC => {
                    let mut tables = group_tables(&world.agents, group);
                    report.events.extend(tswap_iteration(&mut tables, &ctx)?);
                    write_back(&mut world.agents, &tables, &mut planned);
                }
                SolverKind::TpSwap => {
                    let mut tables = group_tables(&world.agents, group);
                    let mut tp = merge_tp(
                        group.iter().map(|&i| world.agents[i].tp.as_ref().expect("TP-SWAP agent has a table")),
                    )?;
                    let reference = self.cfg.cross_check.then(|| (tables.clone(), tp.clone()));
                    let r = tp_update(&mut tables, &mut tp, &ctx)?;
                    if let Some((t0, tp0)) = reference {
                        self.check_member_views(world.t, &t0, &tp0, &tables, &tp)?;
                    }
                    for &i in group {
                        world.agents[i].tp = Some(tp.clone());
                    }
                    report.reassignments.extend(r.reassignments);
                    report.events.extend(r.events);
                    write_back(&mut world.agents, &tables, &mut planned);
                }
                SolverKind::DSwapN => {
                    let (tables, r) = naive_step_policy(&mut world.agents, group, &ctx)?;
                    for (slot, &i) in tables.members.iter().enumerate() {
                        planned[i] = tables.positions[slot];
                    }
                    report.reselections.extend(r.reselections);
                    report.events.extend(r.events);
                }
            }
        }

        check_moves(world.t, &self.inst.map, &before, &planned)?;
        for (a, &p) in world.agents.iter_mut().zip(&planned) {
            a.pos = p;
        }
        world.t += 1;
        Ok(report)
    }

    /// Re-runs the group update with each member listed first and compares the outcome.
    fn check_member_views(
        &self,
        t: u32,
        tables0: &GroupTables,
        tp0: &TpTable,
        expected: &GroupTables,
        expected_tp: &TpTable,
    ) -> Result<(), SimError> {
        let n = tables0.len();
        for first in 1..n {
            let order: Vec<usize> = (0..n).map(|i| (first + i) % n).collect();
            let mut view = GroupTables {
                members: order.iter().map(|&i| tables0.members[i]).collect(),
                positions: order.iter().map(|&i| tables0.positions[i]).collect(),
                targets: order.iter().map(|&i| tables0.targets[i]).collect(),
                priorities: order.iter().map(|&i| tables0.priorities[i]).collect(),
            };
            let mut tp = tp0.clone();
            tp_update(&mut view, &mut tp, &self.ctx())?;
            let same = tp == *expected_tp
                && order.iter().enumerate().all(|(slot, &i)| {
                    view.positions[slot] == expected.positions[i]
                        && view.targets[slot] == expected.targets[i]
                        && view.priorities[slot] == expected.priorities[i]
                });
            if !same {
                return Err(SimError::Invariant {
                    t,
                    message: format!("agent {} computed a different group update", view.members[0]),
                });
            }
        }
        Ok(())
    }

    /// Runs until every agent rests on its target or the step limit is reached.
    pub fn run(&self) -> Result<SolveResult, SimError> {
        let ctx = self.ctx();
        let mut world = self.init_world()?;
        let mut trajectory = Trajectory::default();
        trajectory.record(&world, &self.inst.targets);
        let c = if self.cfg.record_phi { potential_weight(self.inst.map.diameter()) } else { 0 };
        let mut phi_trace = Vec::new();
        if self.cfg.record_phi {
            phi_trace.push(potential(0, &world.agents, &ctx, c)?);
        }
        let mut stats = (!self.cfg.kind.is_centralized()).then(Vec::new);
        let mut counters = RunCounters::default();

        while !world.is_solved(&self.inst.targets) && world.t < self.cfg.t_max {
            let report = self.step(&mut world)?;
            if let Some(s) = stats.as_mut() {
                s.push((world.partition.count(), world.partition.mean_size()));
            }
            counters.absorb(&report);
            trajectory.record(&world, &self.inst.targets);
            if self.cfg.record_phi {
                phi_trace.push(potential(world.t, &world.agents, &ctx, c)?);
            }
        }

        let solved = world.is_solved(&self.inst.targets);
        let arrivals = trajectory.arrival_times();
        let (flowtime, makespan) = if solved {
            (Some(arrivals.iter().map(|&a| a as u64).sum()), Some(arrivals.iter().copied().max().unwrap_or(0) as u64))
        } else {
            (None, None)
        };
        Ok(SolveResult {
            trajectory,
            solved,
            steps_used: world.t,
            flowtime,
            makespan,
            phi_trace,
            subgroup_stats: stats,
            counters,
        })
    }
}

impl RunCounters {
    fn absorb(&mut self, report: &StepReport) {
        for e in &report.events {
            match e {
                SwapEvent::Swap { .. } => self.swaps += 1,
                SwapEvent::Rotation { .. } => self.rotations += 1,
            }
        }
        self.reassignments += report.reassignments.len() as u64;
        self.reselections += report.reselections.len() as u64;
        for r in &report.reassignments {
            self.abandoned_by_priority.entry(r.priority).or_default().insert(r.from);
        }
    }
}

fn group_tables(agents: &[AgentState], group: &[usize]) -> GroupTables {
    GroupTables {
        members: group.to_vec(),
        positions: group.iter().map(|&i| agents[i].pos).collect(),
        targets: group.iter().map(|&i| agents[i].target).collect(),
        priorities: group.iter().map(|&i| agents[i].priority).collect(),
    }
}

fn write_back(agents: &mut [AgentState], tables: &GroupTables, planned: &mut [Cell]) {
    for (slot, &i) in tables.members.iter().enumerate() {
        agents[i].target = tables.targets[slot];
        agents[i].priority = tables.priorities[slot];
        planned[i] = tables.positions[slot];
    }
}

fn check_moves(t: u32, map: &GridMap, before: &[Cell], after: &[Cell]) -> Result<(), SimError> {
    let paths: Vec<Vec<Cell>> = before.iter().zip(after).map(|(&a, &b)| vec![a, b]).collect();
    match validate_trajectory(&paths, map).into_iter().next() {
        None => Ok(()),
        Some(v) => Err(SimError::Invariant { t, message: v.to_string() }),
    }
}

/// Convenience wrapper: builds distance fields and runs one configuration.
pub fn run(inst: &Instance, cfg: SolverConfig) -> Result<SolveResult, SimError> {
    let fields = DistanceFields::build(&inst.map, &inst.targets)?;
    Simulation::new(inst, &fields, cfg)?.run()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    VertexConflict { t: usize, agents: (usize, usize), cell: Cell },
    SwappingConflict { t: usize, agents: (usize, usize) },
    IllegalMove { t: usize, agent: usize, from: Cell, to: Cell },
    BlockedCell { t: usize, agent: usize, cell: Cell },
    Truncated { agent: usize, len: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexConflict { t, agents, cell } => {
                write!(f, "vertex conflict at t={t}: agents {} and {} at {cell}", agents.0, agents.1)
            }
            Violation::SwappingConflict { t, agents } => {
                write!(f, "swapping conflict at t={t}: agents {} and {} cross one edge", agents.0, agents.1)
            }
            Violation::IllegalMove { t, agent, from, to } => {
                write!(f, "illegal move at t={t}: agent {agent} from {from} to {to}")
            }
            Violation::BlockedCell { t, agent, cell } => write!(f, "agent {agent} in blocked cell {cell} at t={t}"),
            Violation::Truncated { agent, len, expected } => {
                write!(f, "agent {agent} has {len} timesteps, expected {expected}")
            }
        }
    }
}

/// Every vertex conflict, swapping conflict and illegal move in a set of paths.
/// A move reported at `t` is the transition from `t - 1` to `t`.
pub fn validate_trajectory(paths: &[Vec<Cell>], map: &GridMap) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    for (agent, p) in paths.iter().enumerate() {
        if p.len() != horizon {
            out.push(Violation::Truncated { agent, len: p.len(), expected: horizon });
        }
    }
    let at = |agent: usize, t: usize| paths[agent].get(t).or(paths[agent].last()).copied();
    for t in 0..horizon {
        let mut occupied: HashMap<Cell, usize> = HashMap::with_capacity(paths.len());
        for agent in 0..paths.len() {
            let Some(c) = at(agent, t) else { continue };
            if !map.is_passable(c) {
                out.push(Violation::BlockedCell { t, agent, cell: c });
            }
            if let Some(&other) = occupied.get(&c) {
                out.push(Violation::VertexConflict { t, agents: (other, agent), cell: c });
            } else {
                occupied.insert(c, agent);
            }
            if t > 0 {
                let prev = at(agent, t - 1).expect("non-empty path");
                if prev != c && prev.manhattan(c) != 1 {
                    out.push(Violation::IllegalMove { t, agent, from: prev, to: c });
                }
            }
        }
        if t > 0 {
            let mut from_at: HashMap<Cell, usize> = HashMap::with_capacity(paths.len());
            for agent in 0..paths.len() {
                if let Some(c) = at(agent, t - 1) {
                    from_at.insert(c, agent);
                }
            }
            for a in 0..paths.len() {
                let (Some(pa), Some(ca)) = (at(a, t - 1), at(a, t)) else { continue };
                if pa == ca {
                    continue;
                }
                if let Some(&b) = from_at.get(&ca) {
                    if b > a && at(b, t) == Some(pa) {
                        out.push(Violation::SwappingConflict { t, agents: (a, b) });
                    }
                }
            }
        }
    }
    out
}
