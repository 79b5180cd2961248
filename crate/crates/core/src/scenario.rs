//! Problem instances: generated or MovingAI `.scen` start/goal lists, sliced by agent count.
//!
//! Generated scenarios use `ChaCha8Rng` seeded with `seed_from_u64`, so the same
//! `(map, count, seed)` yields the same scenario on every platform.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{distance_field, Cell, GridError, GridMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("largest connected component has {available} cells, {requested} requested")]
    NotEnoughCells { requested: usize, available: usize },
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("scenario has {available} pairs, {requested} requested")]
    TooFewPairs { requested: usize, available: usize },
    #[error("start {0} used twice")]
    DuplicateStart(Cell),
    #[error("goal {0} used twice")]
    DuplicateGoal(Cell),
    #[error("cell {0} is blocked or off the map")]
    BadCell(Cell),
    #[error("goal {goal} unreachable from start {start}")]
    Unreachable { start: Cell, goal: Cell },
    #[error("scen line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenario file: {0}")]
    Json(String),
}

/// Ordered start/goal pairs on a named map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub map_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub pairs: Vec<(Cell, Cell)>,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// MovingAI `.scen` text; the last column is the shortest start-goal distance.
    pub fn to_scen(&self, map: &GridMap) -> Result<String, GridError> {
        let mut out = String::from("version 1\n");
        for (i, &(s, g)) in self.pairs.iter().enumerate() {
            let optimal = distance_field(map, g)?.get(s).ok_or(GridError::Unreachable { from: s, to: g })?;
            out.push_str(&format!(
                "{}\t{}.map\t{}\t{}\t{}\t{}\t{}\t{}\t{optimal}\n",
                i / 10,
                self.map_name,
                map.width(),
                map.height(),
                s.col,
                s.row,
                g.col,
                g.row
            ));
        }
        Ok(out)
    }

    /// Reads the internal JSON format and re-checks the scenario invariants against `map`.
    pub fn from_json(text: &str, map: &GridMap) -> Result<Self, ScenarioError> {
        let scn: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        validate_pairs(&scn.pairs, map)?;
        Ok(scn)
    }
}

fn validate_pairs(pairs: &[(Cell, Cell)], map: &GridMap) -> Result<(), ScenarioError> {
    let mut starts = HashSet::new();
    let mut goals = HashSet::new();
    for &(s, g) in pairs {
        for c in [s, g] {
            if !map.is_passable(c) {
                return Err(ScenarioError::BadCell(c));
            }
        }
        if !starts.insert(s) {
            return Err(ScenarioError::DuplicateStart(s));
        }
        if !goals.insert(g) {
            return Err(ScenarioError::DuplicateGoal(g));
        }
    }
    Ok(())
}

/// n start cells and n target cells on a shared map.
#[derive(Debug, Clone)]
pub struct Instance {
    pub map: Arc<GridMap>,
    pub starts: Vec<Cell>,
    pub targets: Vec<Cell>,
}

impl Instance {
    /// Validates distinctness and mutual reachability.
    pub fn new(map: Arc<GridMap>, starts: Vec<Cell>, targets: Vec<Cell>) -> Result<Self, ScenarioError> {
        if starts.is_empty() {
            return Err(ScenarioError::NoAgents);
        }
        assert_eq!(starts.len(), targets.len(), "agent and target counts differ");
        let pairs: Vec<(Cell, Cell)> = starts.iter().copied().zip(targets.iter().copied()).collect();
        validate_pairs(&pairs, &map)?;
        // one component holds everything iff every target is reachable from every start
        let comps = map.components();
        let comp_of = |c: Cell| comps.iter().position(|comp| comp.binary_search(&c).is_ok());
        let home = comp_of(starts[0]);
        for &c in starts.iter().chain(&targets) {
            if comp_of(c) != home {
                let (start, goal) = if starts.contains(&c) { (c, targets[0]) } else { (starts[0], c) };
                return Err(ScenarioError::Unreachable { start, goal });
            }
        }
        Ok(Self { map, starts, targets })
    }

    pub fn agents(&self) -> usize {
        self.starts.len()
    }
}

/// Samples `count` starts and, independently, `count` goals uniformly without
/// replacement from the largest connected component.
pub fn generate_scenario(map: &GridMap, map_name: &str, count: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let pool = map.largest_component();
    if pool.len() < count {
        return Err(ScenarioError::NotEnoughCells { requested: count, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = pool.clone();
    let (picked_starts, _) = starts.partial_shuffle(&mut rng, count);
    let picked_starts = picked_starts.to_vec();
    let mut goals = pool;
    let (picked_goals, _) = goals.partial_shuffle(&mut rng, count);
    Ok(Scenario {
        map_name: map_name.to_string(),
        seed: Some(seed),
        pairs: picked_starts.into_iter().zip(picked_goals.iter().copied()).collect(),
    })
}

/// First `n` pairs of a scenario as a validated instance.
pub fn take_instance(scn: &Scenario, map: Arc<GridMap>, n: usize) -> Result<Instance, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::NoAgents);
    }
    if n > scn.pairs.len() {
        return Err(ScenarioError::TooFewPairs { requested: n, available: scn.pairs.len() });
    }
    let (starts, targets) = scn.pairs[..n].iter().copied().unzip();
    Instance::new(map, starts, targets)
}

/// Parses MovingAI `.scen` text (`version 1` header, tab-separated records).
/// Records use x = column, y = row.
pub fn parse_scen(text: &str, map: &GridMap) -> Result<Scenario, ScenarioError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let perr = |line: usize, message: String| ScenarioError::Parse { line, message };
    match lines.next() {
        Some((_, l)) if l.trim().starts_with("version") => {}
        _ => return Err(perr(1, "missing `version` header".into())),
    }
    let mut map_name = String::new();
    let mut pairs = Vec::new();
    let mut starts = HashSet::new();
    let mut goals = HashSet::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> =
            if line.contains('\t') { line.split('\t').collect() } else { line.split_whitespace().collect() };
        if fields.len() < 8 {
            return Err(perr(no, format!("expected 9 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<u32, ScenarioError> {
            fields[i]
                .trim()
                .parse::<u32>()
                .map_err(|_| perr(no, format!("field {} is not a non-negative integer", i + 1)))
        };
        let (sx, sy, gx, gy) = (num(4)?, num(5)?, num(6)?, num(7)?);
        let start = Cell::new(sy, sx);
        let goal = Cell::new(gy, gx);
        for c in [start, goal] {
            if !map.in_bounds(c) {
                return Err(perr(no, format!("cell {c} out of bounds")));
            }
            if !map.is_passable(c) {
                return Err(perr(no, format!("cell {c} is blocked")));
            }
        }
        if !starts.insert(start) {
            return Err(perr(no, format!("duplicate start {start}")));
        }
        if !goals.insert(goal) {
            return Err(perr(no, format!("duplicate goal {goal}")));
        }
        if map_name.is_empty() {
            map_name = fields[1].trim().to_string();
        }
        pairs.push((start, goal));
    }
    Ok(Scenario { map_name, seed: None, pairs })
}

/// Three agents that all start out heading for the same target.
///
/// Agent 2 (highest priority) reaches `targets[0]` first. Agent 1 learns of it and
/// moves on to `targets[2]`; agent 0 later learns both claims and takes
/// `targets[1]`, then swaps targets and priorities with agent 1, which is resting
/// on `targets[2]` across its path.
pub const DEMO_MAP: [&str; 6] = [
    "...@..@...@...@.",
    "......@....@..@.",
    "@....@......@@..",
    ".....@.....@..@.",
    "@....@........@.",
    "....@@@.........",
];

pub fn demo_instance() -> Instance {
    let map = Arc::new(GridMap::from_rows(&DEMO_MAP).expect("demo map parses"));
    let c = Cell::new;
    Instance::new(map, vec![c(3, 7), c(3, 15), c(0, 15)], vec![c(3, 6), c(1, 7), c(2, 7)])
        .expect("demo instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(w: u32, h: u32) -> Arc<GridMap> {
        Arc::new(GridMap::from_blocked(w, h, vec![false; (w * h) as usize]).unwrap())
    }

    #[test]
    fn single_cell_map() {
        let m = GridMap::from_rows(&["@.@"]).unwrap();
        let s = generate_scenario(&m, "tiny", 1, 7).unwrap();
        assert_eq!(s.pairs, vec![(Cell::new(0, 1), Cell::new(0, 1))]);
    }

    #[test]
    fn generation_is_deterministic_and_distinct() {
        let m = open(10, 10);
        let a = generate_scenario(&m, "m", 40, 3).unwrap();
        let b = generate_scenario(&m, "m", 40, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scenario(&m, "m", 40, 4).unwrap());
        let starts: HashSet<_> = a.pairs.iter().map(|p| p.0).collect();
        let goals: HashSet<_> = a.pairs.iter().map(|p| p.1).collect();
        assert_eq!((starts.len(), goals.len()), (40, 40));
    }

    #[test]
    fn samples_only_largest_component() {
        let m = GridMap::from_rows(&["...@.", "...@.", "...@."]).unwrap();
        let s = generate_scenario(&m, "m", 9, 1).unwrap();
        assert!(s.pairs.iter().all(|(a, b)| a.col < 3 && b.col < 3));
        assert!(matches!(
            generate_scenario(&m, "m", 10, 1),
            Err(ScenarioError::NotEnoughCells { requested: 10, available: 9 })
        ));
    }

    #[test]
    fn take_instance_slices_prefix() {
        let m = open(12, 12);
        let s = generate_scenario(&m, "m", 100, 0).unwrap();
        let full = take_instance(&s, m.clone(), 100).unwrap();
        assert_eq!(full.agents(), 100);
        let ten = take_instance(&s, m.clone(), 10).unwrap();
        assert_eq!(ten.starts, s.pairs[..10].iter().map(|p| p.0).collect::<Vec<_>>());
        assert_eq!(ten.targets, s.pairs[..10].iter().map(|p| p.1).collect::<Vec<_>>());
        assert_eq!(take_instance(&s, m.clone(), 0).unwrap_err(), ScenarioError::NoAgents);
        assert!(matches!(take_instance(&s, m, 101), Err(ScenarioError::TooFewPairs { .. })));
    }

    #[test]
    fn instance_rejects_split_components() {
        let m = Arc::new(GridMap::from_rows(&[".@."]).unwrap());
        let e = Instance::new(m, vec![Cell::new(0, 0)], vec![Cell::new(0, 2)]).unwrap_err();
        assert!(matches!(e, ScenarioError::Unreachable { .. }));
    }

    #[test]
    fn scen_parsing() {
        let m = open(4, 3);
        let empty = parse_scen("version 1\n", &m).unwrap();
        assert!(empty.is_empty());
        let one = parse_scen("version 1\n0\tm.map\t4\t3\t3\t1\t0\t2\t5.0\n", &m).unwrap();
        assert_eq!(one.pairs, vec![(Cell::new(1, 3), Cell::new(2, 0))]);
        assert_eq!(one.map_name, "m.map");
        let dup = "version 1\n0\tm\t4\t3\t0\t0\t1\t1\t1\n0\tm\t4\t3\t0\t0\t2\t2\t1\n";
        assert!(matches!(parse_scen(dup, &m), Err(ScenarioError::Parse { line: 3, .. })));
        let oob = "version 1\n0\tm\t4\t3\t9\t0\t1\t1\t1\n";
        assert!(matches!(parse_scen(oob, &m), Err(ScenarioError::Parse { line: 2, .. })));
        assert!(parse_scen("0\tm\t4\t3\t0\t0\t1\t1\t1\n", &m).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = open(6, 6);
        let s = generate_scenario(&m, "open", 8, 11).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json(), &m).unwrap(), s);
    }

    #[test]
    fn scen_text_roundtrip() {
        let map = GridMap::from_rows(&["....", ".@..", "...."]).unwrap();
        let scn = generate_scenario(&map, "tiny", 4, 3).unwrap();
        let text = scn.to_scen(&map).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("tiny.map\t4\t3"));
        let back = parse_scen(&text, &map).unwrap();
        assert_eq!(back.pairs, scn.pairs);
        assert_eq!(back.map_name, "tiny.map");
    }
}
