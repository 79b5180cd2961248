//! Plain-text trajectory dumps consumed by the plotting tools.
//!
//! ```text
//! amapf-trajectory 1
//! meta <key> <value>
//! pos <t> <agent> <row> <col> <target_row> <target_col> <priority>
//! phi <t> <phi1> <phi2> <phi3> <C> <phi>
//! ```
//!
//! Lines are ordered by `t`, then agent. `phi` lines are optional.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::grid::Cell;
use crate::metrics::PotentialSnapshot;
use crate::sim::{SolveResult, Trajectory};

pub const DUMP_HEADER: &str = "amapf-trajectory 1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn perr(line: usize, message: impl Into<String>) -> DumpError {
    DumpError::Parse { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryDump {
    pub meta: BTreeMap<String, String>,
    pub trajectory: Trajectory,
    pub phi: Vec<PotentialSnapshot>,
}

impl TrajectoryDump {
    pub fn from_result(result: &SolveResult, meta: BTreeMap<String, String>) -> Self {
        Self { meta, trajectory: result.trajectory.clone(), phi: result.phi_trace.clone() }
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{DUMP_HEADER}")?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}")?;
        }
        let tr = &self.trajectory;
        for t in 0..tr.horizon() {
            for (agent, path) in tr.paths.iter().enumerate() {
                let Some(p) = path.get(t) else { continue };
                let g = tr.targets.get(agent).and_then(|x| x.get(t)).copied().unwrap_or(*p);
                let pr = tr.priorities.get(agent).and_then(|x| x.get(t)).copied().unwrap_or(0);
                writeln!(w, "pos {t} {agent} {} {} {} {} {pr}", p.row, p.col, g.row, g.col)?;
            }
        }
        for s in &self.phi {
            writeln!(w, "phi {} {} {} {} {} {}", s.t, s.phi1, s.phi2, s.phi3, s.c, s.phi)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn parse(text: &str) -> Result<Self, DumpError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, h)) if h == DUMP_HEADER => {}
            _ => return Err(perr(1, format!("expected header `{DUMP_HEADER}`"))),
        }
        let mut dump = TrajectoryDump::default();
        let mut rows: BTreeMap<(usize, usize), (Cell, Cell, u32)> = BTreeMap::new();
        for (no, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            match kind {
                "meta" => {
                    let key = parts.next().ok_or_else(|| perr(no, "meta line without key"))?;
                    let value = parts.collect::<Vec<_>>().join(" ");
                    dump.meta.insert(key.to_string(), value);
                }
                "pos" => {
                    let v = numbers::<7>(no, parts)?;
                    let key = (v[0] as usize, v[1] as usize);
                    let cells = (Cell::new(v[2] as u32, v[3] as u32), Cell::new(v[4] as u32, v[5] as u32), v[6] as u32);
                    if rows.insert(key, cells).is_some() {
                        return Err(perr(no, format!("duplicate position for agent {} at t={}", key.1, key.0)));
                    }
                }
                "phi" => {
                    let v = numbers::<6>(no, parts)?;
                    dump.phi.push(PotentialSnapshot {
                        t: v[0] as u32,
                        phi1: v[1],
                        phi2: v[2],
                        phi3: v[3],
                        c: v[4],
                        phi: v[5],
                    });
                }
                other => return Err(perr(no, format!("unknown record `{other}`"))),
            }
        }
        let agents = rows.keys().map(|k| k.1 + 1).max().unwrap_or(0);
        let tr = &mut dump.trajectory;
        tr.paths = vec![Vec::new(); agents];
        tr.targets = vec![Vec::new(); agents];
        tr.priorities = vec![Vec::new(); agents];
        for ((t, agent), (p, g, pr)) in rows {
            if tr.paths[agent].len() != t {
                return Err(perr(0, format!("agent {agent} is missing timestep {}", tr.paths[agent].len())));
            }
            tr.paths[agent].push(p);
            tr.targets[agent].push(g);
            tr.priorities[agent].push(pr);
        }
        Ok(dump)
    }
}

fn numbers<'a, const N: usize>(line: usize, parts: impl Iterator<Item = &'a str>) -> Result<[u64; N], DumpError> {
    let v: Vec<u64> = parts
        .map(|p| p.parse::<u64>().map_err(|_| perr(line, format!("`{p}` is not a non-negative integer"))))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<u64>| perr(line, format!("expected {N} fields, found {}", v.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let c = Cell::new;
        let dump = TrajectoryDump {
            meta: BTreeMap::from([("solver".to_string(), "TP-SWAP".to_string())]),
            trajectory: Trajectory {
                paths: vec![vec![c(0, 0), c(0, 1)], vec![c(2, 2), c(2, 2)]],
                targets: vec![vec![c(0, 1), c(0, 1)], vec![c(2, 2), c(2, 2)]],
                priorities: vec![vec![0, 0], vec![1, 1]],
            },
            phi: vec![PotentialSnapshot { t: 0, phi1: 1, phi2: 2, phi3: 0, c: 5, phi: 3 }],
        };
        let text = dump.to_text();
        assert!(text.starts_with(DUMP_HEADER));
        assert_eq!(TrajectoryDump::parse(&text).unwrap(), dump);
    }

    #[test]
    fn rejects_gaps_and_garbage() {
        assert!(TrajectoryDump::parse("nope").is_err());
        let gap = format!("{DUMP_HEADER}\npos 0 0 0 0 0 0 0\npos 2 0 0 0 0 0 0\n");
        assert!(TrajectoryDump::parse(&gap).is_err());
        let short = format!("{DUMP_HEADER}\npos 0 0 0 0\n");
        assert!(matches!(TrajectoryDump::parse(&short), Err(DumpError::Parse { line: 2, .. })));
    }
}
