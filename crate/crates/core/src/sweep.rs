//! Benchmark sweeps: the cross product of maps, scenarios, agent counts, solvers and
//! communication radii, run on a worker pool and reported as CSV.
//!
//! Output never depends on the worker count: rows are sorted by
//! (map, solver, n, k, seed) before they are written.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{DistanceFields, GridMap};
use crate::metrics::subgroup_stats;
use crate::scenario::{generate_scenario, take_instance};
use crate::sim::{Simulation, SolverConfig, SolverKind};

pub const CSV_HEADER: [&str; 16] = [
    "map",
    "solver",
    "n",
    "k",
    "seed",
    "solved",
    "steps",
    "flowtime",
    "makespan",
    "mean_groups",
    "mean_group_size",
    "swaps",
    "rotations",
    "reassignments",
    "reselections",
    "error",
];

pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("csv line {line}: {message}")]
    Schema { line: u64, message: String },
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub maps: Vec<(String, Arc<GridMap>)>,
    /// Scenario seeds, one generated scenario per map and seed.
    pub seeds: Vec<u64>,
    /// Start/target pairs per scenario; instances take a prefix.
    pub scenario_size: usize,
    pub ns: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    /// Radii for decentralized solvers; the centralized solver runs once with k = 0.
    pub ks: Vec<u32>,
    pub t_max: u32,
    pub workers: usize,
}

impl SweepSpec {
    fn validate(&self) -> Result<(), SweepError> {
        if self.workers == 0 {
            return Err(SweepError::Config("at least one worker is required".into()));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n == 0 || n > self.scenario_size) {
            return Err(SweepError::Config(format!("agent count {n} outside 1..={}", self.scenario_size)));
        }
        if self.solvers.iter().any(|s| !s.is_centralized()) && self.ks.is_empty() {
            return Err(SweepError::Config("decentralized solvers need at least one k".into()));
        }
        Ok(())
    }

    fn configs(&self) -> Vec<(SolverKind, u32)> {
        let mut out = Vec::new();
        for &s in &self.solvers {
            if s.is_centralized() {
                out.push((s, 0));
            } else {
                out.extend(self.ks.iter().map(|&k| (s, k)));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Number of rows the sweep will produce.
    pub fn row_count(&self) -> usize {
        self.maps.len() * self.seeds.len() * self.ns.len() * self.configs().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub map: String,
    pub solver: String,
    pub n: usize,
    pub k: u32,
    pub seed: u64,
    pub solved: bool,
    pub steps: u32,
    pub flowtime: Option<u64>,
    pub makespan: Option<u64>,
    pub mean_groups: Option<f64>,
    pub mean_group_size: Option<f64>,
    pub swaps: u64,
    pub rotations: u64,
    pub reassignments: u64,
    pub reselections: u64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(map: &str, solver: SolverKind, n: usize, k: u32, seed: u64, error: String) -> Self {
        Self {
            map: map.to_string(),
            solver: solver.name().to_string(),
            n,
            k,
            seed,
            solved: false,
            steps: 0,
            flowtime: None,
            makespan: None,
            mean_groups: None,
            mean_group_size: None,
            swaps: 0,
            rotations: 0,
            reassignments: 0,
            reselections: 0,
            error: Some(error),
        }
    }

    fn sort_key(&self) -> (&str, &str, usize, u32, u64) {
        (&self.map, &self.solver, self.n, self.k, self.seed)
    }

    /// Solved within `limit` steps.
    pub fn success_at(&self, limit: u32) -> bool {
        self.solved && self.steps <= limit
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| NA.to_string());
        vec![
            self.map.clone(),
            self.solver.clone(),
            self.n.to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            self.solved.to_string(),
            self.steps.to_string(),
            opt(self.flowtime.map(|v| v.to_string())),
            opt(self.makespan.map(|v| v.to_string())),
            opt(self.mean_groups.map(|v| format!("{v:.4}"))),
            opt(self.mean_group_size.map(|v| format!("{v:.4}"))),
            self.swaps.to_string(),
            self.rotations.to_string(),
            self.reassignments.to_string(),
            self.reselections.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Runs the whole sweep. Per-run failures become rows with an error message.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    let configs = spec.configs();
    let units: Vec<(usize, u64, usize)> = (0..spec.maps.len())
        .flat_map(|m| spec.seeds.iter().flat_map(move |&s| spec.ns.iter().map(move |&n| (m, s, n))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        units
            .par_iter()
            .flat_map_iter(|&(m, seed, n)| {
                let (name, map) = &spec.maps[m];
                run_unit(name, map, seed, n, spec, &configs)
            })
            .collect()
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(rows)
}

/// All configurations on one instance, sharing its distance fields.
fn run_unit(
    name: &str,
    map: &Arc<GridMap>,
    seed: u64,
    n: usize,
    spec: &SweepSpec,
    configs: &[(SolverKind, u32)],
) -> Vec<SweepRow> {
    let prepared = generate_scenario(map, name, spec.scenario_size, seed)
        .and_then(|scn| take_instance(&scn, map.clone(), n))
        .map_err(|e| e.to_string())
        .and_then(|inst| {
            let fields = DistanceFields::build(&inst.map, &inst.targets).map_err(|e| e.to_string())?;
            Ok((inst, fields))
        });
    let (inst, fields) = match prepared {
        Ok(p) => p,
        Err(e) => return configs.iter().map(|&(s, k)| SweepRow::failed(name, s, n, k, seed, e.clone())).collect(),
    };
    configs
        .iter()
        .map(|&(solver, k)| {
            let mut cfg = SolverConfig::new(solver, k, spec.t_max);
            cfg.seed = seed;
            let result = Simulation::new(&inst, &fields, cfg).and_then(|sim| sim.run());
            match result {
                Err(e) => SweepRow::failed(name, solver, n, k, seed, e.to_string()),
                Ok(r) => {
                    let groups = subgroup_stats(&r).ok();
                    SweepRow {
                        map: name.to_string(),
                        solver: solver.name().to_string(),
                        n,
                        k,
                        seed,
                        solved: r.solved,
                        steps: r.steps_used,
                        flowtime: r.flowtime,
                        makespan: r.makespan,
                        mean_groups: groups.map(|g| g.0),
                        mean_group_size: groups.map(|g| g.1),
                        swaps: r.counters.swaps,
                        rotations: r.counters.rotations,
                        reassignments: r.counters.reassignments,
                        reselections: r.counters.reselections,
                        error: None,
                    }
                }
            }
        })
        .collect()
}

pub fn write_csv(rows: &[SweepRow], w: impl io::Write) -> Result<(), SweepError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 csv")
}

/// Reads rows back; columns are located by header name.
pub fn read_csv(r: impl io::Read) -> Result<Vec<SweepRow>, SweepError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SweepError::Schema { line: 1, message: format!("missing column `{name}`") })
    };
    let idx: Vec<usize> = CSV_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad =
            |i: usize| SweepError::Schema { line, message: format!("bad `{}` value `{}`", CSV_HEADER[i], field(i)) };
        fn num<T: std::str::FromStr>(s: &str) -> Option<T> {
            s.parse().ok()
        }
        fn opt<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
            if s == NA {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        }
        rows.push(SweepRow {
            map: field(0).to_string(),
            solver: field(1).to_string(),
            n: num(field(2)).ok_or_else(|| bad(2))?,
            k: num(field(3)).ok_or_else(|| bad(3))?,
            seed: num(field(4)).ok_or_else(|| bad(4))?,
            solved: num(field(5)).ok_or_else(|| bad(5))?,
            steps: num(field(6)).ok_or_else(|| bad(6))?,
            flowtime: opt(field(7)).ok_or_else(|| bad(7))?,
            makespan: opt(field(8)).ok_or_else(|| bad(8))?,
            mean_groups: opt(field(9)).ok_or_else(|| bad(9))?,
            mean_group_size: opt(field(10)).ok_or_else(|| bad(10))?,
            swaps: num(field(11)).ok_or_else(|| bad(11))?,
            rotations: num(field(12)).ok_or_else(|| bad(12))?,
            reassignments: num(field(13)).ok_or_else(|| bad(13))?,
            reselections: num(field(14)).ok_or_else(|| bad(14))?,
            error: Some(field(15)).filter(|s| !s.is_empty()).map(str::to_string),
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub map: String,
    pub solver: String,
    pub k: u32,
    pub n: usize,
    pub runs: usize,
    pub solved: usize,
    /// Over solved runs only.
    pub flowtime: Option<(f64, f64)>,
    pub makespan: Option<(f64, f64)>,
    pub mean_groups: Option<f64>,
    pub mean_group_size: Option<f64>,
}

/// Groups rows by (map, solver, k, n). Failed runs count toward `runs` but not costs.
pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, &str, u32, usize), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.map, &r.solver, r.k, r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((map, solver, k, n), rs)| {
            let solved: Vec<&&SweepRow> = rs.iter().filter(|r| r.solved).collect();
            let costs = |f: fn(&SweepRow) -> Option<u64>| {
                mean_std(&solved.iter().filter_map(|r| f(r)).map(|v| v as f64).collect::<Vec<_>>())
            };
            let mean_of = |f: fn(&SweepRow) -> Option<f64>| {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                mean_std(&v).map(|m| m.0)
            };
            AggregateRow {
                map: map.to_string(),
                solver: solver.to_string(),
                k,
                n,
                runs: rs.len(),
                solved: solved.len(),
                flowtime: costs(|r| r.flowtime),
                makespan: costs(|r| r.makespan),
                mean_groups: mean_of(|r| r.mean_groups),
                mean_group_size: mean_of(|r| r.mean_group_size),
            }
        })
        .collect()
}

/// Plain-text table of the aggregates.
pub fn format_aggregate(aggs: &[AggregateRow]) -> String {
    let fmt_ms = |v: Option<(f64, f64)>| v.map_or_else(|| NA.to_string(), |(m, s)| format!("{m:.1} ± {s:.1}"));
    let fmt_f = |v: Option<f64>| v.map_or_else(|| NA.to_string(), |m| format!("{m:.2}"));
    let mut out = format!(
        "{:<18} {:<10} {:>3} {:>4} {:>8} {:>18} {:>16} {:>7} {:>6}\n",
        "map", "solver", "k", "n", "solved", "flowtime", "makespan", "groups", "size"
    );
    for a in aggs {
        out.push_str(&format!(
            "{:<18} {:<10} {:>3} {:>4} {:>8} {:>18} {:>16} {:>7} {:>6}\n",
            a.map,
            a.solver,
            a.k,
            a.n,
            format!("{}/{}", a.solved, a.runs),
            fmt_ms(a.flowtime),
            fmt_ms(a.makespan),
            fmt_f(a.mean_groups),
            fmt_f(a.mean_group_size),
        ));
    }
    out
}

/// (map, solver, k, n)
pub type GroupKey = (String, String, u32, usize);

/// Fraction of runs solved within each limit, per (map, solver, k, n).
pub fn success_rates(rows: &[SweepRow], limits: &[u32]) -> Vec<(GroupKey, Vec<f64>)> {
    let mut groups: BTreeMap<GroupKey, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.map.clone(), r.solver.clone(), r.k, r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| {
            let rates = limits
                .iter()
                .map(|&l| rs.iter().filter(|r| r.success_at(l)).count() as f64 / rs.len() as f64)
                .collect();
            (key, rates)
        })
        .collect()
}
