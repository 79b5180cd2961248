//! Initial agent-to-target assignments.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Cell, DistanceFields};
use crate::scenario::Instance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("target {target} unreachable from agent {agent}")]
    Unreachable { agent: usize, target: usize },
    #[error("no perfect matching exists")]
    NoPerfectMatching,
}

/// Target index (into the instance's target list) for each agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentTable {
    pub target_of: Vec<usize>,
}

impl AssignmentTable {
    pub fn is_consistent(&self) -> bool {
        let mut seen = vec![false; self.target_of.iter().max().map_or(0, |m| m + 1)];
        self.target_of.iter().all(|&t| !std::mem::replace(&mut seen[t], true))
    }

    pub fn cells(&self, inst: &Instance) -> Vec<Cell> {
        self.target_of.iter().map(|&t| inst.targets[t]).collect()
    }

    /// Largest start-to-assigned-target distance.
    pub fn bottleneck(&self, inst: &Instance, fields: &DistanceFields) -> Option<u32> {
        self.target_of
            .iter()
            .enumerate()
            .map(|(a, &t)| fields.dist(inst.starts[a], t))
            .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
    }
}

/// Each agent independently takes its closest target; ties go to the earlier target.
/// The result may assign one target to several agents.
pub fn nearest_assignment(inst: &Instance, fields: &DistanceFields) -> Result<AssignmentTable, AssignmentError> {
    let target_of = inst
        .starts
        .iter()
        .enumerate()
        .map(|(agent, &s)| closest_target(s, fields, |_| true).ok_or(AssignmentError::Unreachable { agent, target: 0 }))
        .collect::<Result<_, _>>()?;
    Ok(AssignmentTable { target_of })
}

/// Closest target to `from` among those passing `eligible`, ties broken by target index.
pub(crate) fn closest_target(from: Cell, fields: &DistanceFields, eligible: impl Fn(usize) -> bool) -> Option<usize> {
    (0..fields.len())
        .filter(|&t| eligible(t))
        .filter_map(|t| fields.dist(from, t).map(|d| (d, t)))
        .min()
        .map(|(_, t)| t)
}

/// Uniformly random bijection, deterministic in `seed` (ChaCha8).
pub fn random_consistent_assignment(inst: &Instance, seed: u64) -> AssignmentTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut target_of: Vec<usize> = (0..inst.targets.len()).collect();
    target_of.shuffle(&mut rng);
    AssignmentTable { target_of }
}

/// Consistent assignment minimizing the largest agent-to-target distance.
///
/// Binary search over the distinct distance values; each threshold is tested with
/// a maximum bipartite matching on the edges no longer than it.
pub fn bottleneck_assignment(inst: &Instance, fields: &DistanceFields) -> Result<AssignmentTable, AssignmentError> {
    let n = inst.agents();
    let mut dist = vec![vec![0u32; n]; n];
    for (a, row) in dist.iter_mut().enumerate() {
        for (t, d) in row.iter_mut().enumerate() {
            *d = fields.dist(inst.starts[a], t).ok_or(AssignmentError::Unreachable { agent: a, target: t })?;
        }
    }
    let mut levels: Vec<u32> = dist.iter().flatten().copied().collect();
    levels.sort_unstable();
    levels.dedup();

    let matching_at = |limit: u32| {
        let adj: Vec<Vec<usize>> = dist.iter().map(|row| (0..n).filter(|&t| row[t] <= limit).collect()).collect();
        let m = hopcroft_karp(&adj, n);
        m.iter().all(Option::is_some).then_some(m)
    };

    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    if matching_at(levels[hi]).is_none() {
        return Err(AssignmentError::NoPerfectMatching);
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if matching_at(levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let m = matching_at(levels[lo]).ok_or(AssignmentError::NoPerfectMatching)?;
    Ok(AssignmentTable { target_of: m.into_iter().map(|t| t.expect("perfect")).collect() })
}

/// Maximum matching of left vertices `0..adj.len()` to right vertices `0..right`.
/// Returns the matched right vertex per left vertex.
pub fn hopcroft_karp(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    const INF: u32 = u32::MAX;
    let left = adj.len();
    let mut match_l: Vec<Option<usize>> = vec![None; left];
    let mut match_r: Vec<Option<usize>> = vec![None; right];
    let mut layer = vec![INF; left];

    loop {
        // BFS layering from free left vertices
        let mut queue = std::collections::VecDeque::new();
        for u in 0..left {
            if match_l[u].is_none() {
                layer[u] = 0;
                queue.push_back(u);
            } else {
                layer[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match match_r[v] {
                    None => found = true,
                    Some(w) if layer[w] == INF => {
                        layer[w] = layer[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            layer: &mut [u32],
            match_l: &mut [Option<usize>],
            match_r: &mut [Option<usize>],
        ) -> bool {
            for &v in &adj[u] {
                let ok = match match_r[v] {
                    None => true,
                    Some(w) => layer[w] == layer[u] + 1 && augment(w, adj, layer, match_l, match_r),
                };
                if ok {
                    match_l[u] = Some(v);
                    match_r[v] = Some(u);
                    return true;
                }
            }
            layer[u] = INF;
            false
        }
        for u in 0..left {
            if match_l[u].is_none() {
                augment(u, adj, &mut layer, &mut match_l, &mut match_r);
            }
        }
    }
    match_l
}
