//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any fails.
//!
//! Benchmark maps are read from `$AMAPF_MAPS` (or `<workspace>/maps`) when the
//! MovingAI files are there; otherwise procedural stand-ins are used and the
//! affected lines are tagged `[surrogate]`.

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use amapf_core::metrics::{potential, potential_weight};
use amapf_core::sim::default_t_max;
use amapf_core::sweep::{csv_string, run_sweep, SweepRow, SweepSpec};
use amapf_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn catalog() -> MapCatalog {
    match std::env::var_os(maps::MAPS_ENV) {
        Some(dir) => MapCatalog::new(Some(dir.into())),
        None => MapCatalog::new(Some(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps"))),
    }
}

struct Bench {
    maps: BTreeMap<String, (Arc<GridMap>, MapSource)>,
}

impl Bench {
    fn new() -> Self {
        let cat = catalog();
        let maps =
            maps::SURROGATE_NAMES.iter().map(|&n| (n.to_string(), cat.load(n).expect("benchmark map"))).collect();
        Self { maps }
    }

    fn spec(&self, names: &[&str]) -> SweepSpec {
        SweepSpec {
            maps: names.iter().map(|&n| (n.to_string(), self.maps[n].0.clone())).collect(),
            seeds: (0..250).collect(),
            scenario_size: 100,
            ns: vec![100],
            solvers: vec![],
            ks: vec![2],
            t_max: 2000,
            workers: workers(),
        }
    }

    fn tag(&self, names: &[&str]) -> &'static str {
        if names.iter().any(|n| self.maps[*n].1.is_surrogate()) {
            " [surrogate]"
        } else {
            ""
        }
    }
}

fn mean_flowtime(rows: &[SweepRow], map: &str, solver: &str, n: usize, k: u32) -> (f64, usize, usize) {
    let sel: Vec<&SweepRow> =
        rows.iter().filter(|r| r.map == map && r.solver == solver && r.n == n && r.k == k).collect();
    let solved: Vec<f64> = sel.iter().filter_map(|r| r.flowtime).map(|f| f as f64).collect();
    let mean = solved.iter().sum::<f64>() / solved.len().max(1) as f64;
    (mean, solved.len(), sel.len())
}

/// Random instance on a 16x16 map with 10% obstacles and 2..=20 agents.
fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = Arc::new(maps::random_obstacles(16, 16, 0.10, &mut rng).unwrap());
    let n = rng.gen_range(2..=20);
    let scn = generate_scenario(&map, "random-16-16-10", n, seed).unwrap();
    take_instance(&scn, map, n).unwrap()
}

fn p1() -> Outcome {
    let mut solved = 0;
    let mut bad = Vec::new();
    for seed in 0..500 {
        let inst = random_instance(seed);
        for kind in SolverKind::ALL {
            let r = run(&inst, SolverConfig::new(kind, 2, default_t_max(&inst.map))).unwrap();
            if r.solved {
                solved += 1;
                let v = validate_trajectory(&r.trajectory.paths, &inst.map);
                if !v.is_empty() {
                    bad.push(format!("seed {seed} {kind}: {}", v[0]));
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{solved}/2000 solved runs checked, {} with violations {:?}", bad.len(), bad.first()),
    )
}

fn p2() -> Outcome {
    let unsolved: Vec<u64> = (0..500)
        .filter(|&seed| {
            let inst = random_instance(seed);
            !run(&inst, SolverConfig::new(SolverKind::TpSwap, 2, default_t_max(&inst.map))).unwrap().solved
        })
        .collect();
    outcome(
        unsolved.is_empty(),
        format!("{}/500 TP-SWAP runs solved; unsolved seeds {:?}", 500 - unsolved.len(), unsolved),
    )
}

fn p3() -> Outcome {
    const EXTRA: u32 = 5;
    let mut exceptions = Vec::new();
    let mut steps_checked = 0u64;
    for seed in 0..100 {
        let inst = random_instance(seed);
        let fields = DistanceFields::build(&inst.map, &inst.targets).unwrap();
        let sim = Simulation::new(&inst, &fields, SolverConfig::new(SolverKind::TpSwap, 2, default_t_max(&inst.map)))
            .unwrap();
        let c = potential_weight(inst.map.diameter());
        let ctx = sim.ctx();
        let mut world = sim.init_world().unwrap();
        let mut trace = vec![potential(0, &world.agents, &ctx, c).unwrap()];
        let mut done_at = None;
        while world.t < sim.cfg.t_max {
            if done_at.is_none() && world.is_solved(&inst.targets) {
                done_at = Some(world.t);
            }
            if done_at.is_some_and(|d| world.t >= d + EXTRA) {
                break;
            }
            sim.step(&mut world).unwrap();
            trace.push(potential(world.t, &world.agents, &ctx, c).unwrap());
        }
        let Some(done) = done_at else {
            exceptions.push(format!("seed {seed}: not solved"));
            continue;
        };
        for w in trace.windows(2) {
            let (a, b) = (w[0], w[1]);
            steps_checked += 1;
            if b.phi3 > a.phi3 {
                exceptions.push(format!("seed {seed} t={}: phi3 rose {} -> {}", a.t, a.phi3, b.phi3));
            }
            if a.t < done && b.phi >= a.phi {
                exceptions.push(format!("seed {seed} t={}: phi {} -> {} ({:?} -> {:?})", a.t, a.phi, b.phi, a, b));
            }
            // the step leaving the completed state may still merge tables once
            if a.t > done && b.phi != a.phi {
                exceptions.push(format!("seed {seed} t={}: phi changed after completion {} -> {}", a.t, a.phi, b.phi));
            }
        }
    }
    outcome(
        exceptions.is_empty(),
        format!(
            "{steps_checked} transitions over 100 runs, {} exceptions; first: {:?}",
            exceptions.len(),
            exceptions.first()
        ),
    )
}

fn p4() -> Outcome {
    let mut diffs = Vec::new();
    for seed in 0..100 {
        let inst = random_instance(1000 + seed);
        let k = inst.map.diameter().max(2);
        let t_max = default_t_max(&inst.map);
        let mut c = SolverConfig::new(SolverKind::CTswap, 0, t_max);
        c.assignment = Some(AssignmentRule::RandomConsistent);
        c.seed = seed;
        let mut d = SolverConfig::new(SolverKind::DTswapC, k, t_max);
        d.seed = seed;
        let a = run(&inst, c).unwrap();
        let b = run(&inst, d).unwrap();
        if a.trajectory != b.trajectory {
            diffs.push(seed);
        }
    }
    outcome(diffs.is_empty(), format!("100 instances, {} trajectory mismatches {:?}", diffs.len(), diffs))
}

fn bfs(map: &GridMap, from: Cell) -> BTreeMap<Cell, u32> {
    let mut d = BTreeMap::from([(from, 0)]);
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        let steps: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        for (dr, dc) in steps {
            let (r, col) = (c.row as i64 + dr, c.col as i64 + dc);
            if r < 0 || col < 0 {
                continue;
            }
            let nb = Cell::new(r as u32, col as u32);
            if map.in_bounds(nb) && map.is_passable(nb) && !d.contains_key(&nb) {
                d.insert(nb, d[&c] + 1);
                q.push_back(nb);
            }
        }
    }
    d
}

fn min_bottleneck(dist: &[Vec<u32>], row: usize, used: &mut Vec<bool>, acc: u32) -> u32 {
    if row == dist.len() {
        return acc;
    }
    let mut best = u32::MAX;
    for t in 0..dist.len() {
        if !used[t] {
            used[t] = true;
            best = best.min(min_bottleneck(dist, row + 1, used, acc.max(dist[row][t])));
            used[t] = false;
        }
    }
    best
}

fn p5() -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let map = Arc::new(maps::random_obstacles(10, 10, 0.15, &mut rng).unwrap());
        let n = rng.gen_range(1..=7);
        let scn = generate_scenario(&map, "p5", n, seed).unwrap();
        let inst = take_instance(&scn, map.clone(), n).unwrap();
        let dist: Vec<Vec<u32>> = inst
            .starts
            .iter()
            .map(|&s| {
                let d = bfs(&map, s);
                inst.targets.iter().map(|t| d[t]).collect()
            })
            .collect();
        let oracle = min_bottleneck(&dist, 0, &mut vec![false; n], 0);
        let fields = DistanceFields::build(&map, &inst.targets).unwrap();
        let got = assignment::bottleneck_assignment(&inst, &fields).unwrap();
        if !got.is_consistent() || got.bottleneck(&inst, &fields) != Some(oracle) {
            mismatches.push(seed);
        }
    }
    outcome(mismatches.is_empty(), format!("200 instances, {} mismatches {:?}", mismatches.len(), mismatches))
}

fn p6_p9(bench: &Bench) -> (Outcome, Outcome) {
    let mut spec = bench.spec(&["maze-32-32-4"]);
    spec.ns = vec![20, 40, 60, 70, 80, 90, 100];
    spec.ks = vec![2, 5, 10];
    spec.solvers = vec![SolverKind::TpSwap];
    let rows = run_sweep(&spec).unwrap();
    let tag = bench.tag(&["maze-32-32-4"]);
    let f = |n, k| mean_flowtime(&rows, "maze-32-32-4", "TP-SWAP", n, k);

    let mut table = String::new();
    for n in [20, 40, 60, 80, 100] {
        table.push_str(&format!(" n={n}:{:.0}/{:.0}/{:.0}", f(n, 2).0, f(n, 5).0, f(n, 10).0));
    }
    let unsolved = rows.iter().filter(|r| !r.solved).count();
    let (a_mean, ..) = f(100, 2);
    let a = (a_mean - 2464.0).abs() <= 0.2 * 2464.0;
    let mut b = true;
    let mut c = true;
    let mut notes = Vec::new();
    for n in [40, 60, 70, 80, 90, 100] {
        let (k2, k5, k10) = (f(n, 2).0, f(n, 5).0, f(n, 10).0);
        let gain = (k2 - k5) / k2;
        let change = (k10 - k5).abs() / k5;
        if gain < 0.25 {
            b = false;
            notes.push(format!("n={n} k2->k5 {:.1}%", gain * 100.0));
        }
        if change >= 0.10 {
            c = false;
            notes.push(format!("n={n} k5->k10 {:.1}%", change * 100.0));
        }
    }
    // scale reference on the same scenarios; the reference D-TSWAP-C mean at n=100 is 5665
    let mut cal = bench.spec(&["maze-32-32-4"]);
    cal.solvers = vec![SolverKind::DTswapC];
    let cal_rows = run_sweep(&cal).unwrap();
    let (dc, ..) = mean_flowtime(&cal_rows, "maze-32-32-4", "D-TSWAP-C", 100, 2);
    let p6 = outcome(
        a && b && c,
        format!(
            "(a) n=100,k=2 mean {a_mean:.0} vs 2464 {} (b) {} (c) {}; k=2/5/10:{table}; unsolved {unsolved}; \
             D-TSWAP-C n=100 {dc:.0} (reference 5665), TP-SWAP/D-TSWAP-C {:.2} (reference 0.43) {}{tag}",
            if a { "ok" } else { "out of ±20%" },
            if b { "ok" } else { "fail" },
            if c { "ok" } else { "fail" },
            a_mean / dc,
            notes.join(", ")
        ),
    );

    let stats = |n: usize, k: u32| {
        let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n && r.k == k).collect();
        let m = |g: fn(&SweepRow) -> Option<f64>| sel.iter().filter_map(|r| g(r)).sum::<f64>() / sel.len() as f64;
        (m(|r| r.mean_groups), m(|r| r.mean_group_size))
    };
    let (count, size) = stats(100, 2);
    let mut ok = (15.0..=35.0).contains(&count) && (2.0..=6.0).contains(&size);
    let mut k10 = String::new();
    for n in [70, 80, 90, 100] {
        let (cnt, _) = stats(n, 10);
        ok &= cnt <= 2.0;
        k10.push_str(&format!(" n={n}:{cnt:.2}"));
    }
    let p9 = outcome(ok, format!("k=2,n=100: mean count {count:.2}, mean size {size:.2}; k=10 counts{k10}{tag}"));
    (p6, p9)
}

fn p7(bench: &Bench) -> Outcome {
    let names = ["maze-32-32-4", "random-32-32-10", "den404d"];
    let mut spec = bench.spec(&names);
    spec.solvers = vec![SolverKind::CTswap, SolverKind::DSwapN, SolverKind::TpSwap];
    let rows = run_sweep(&spec).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let (naive, ns, _) = mean_flowtime(&rows, name, "D-SWAP-N", 100, 2);
        let (tp, ts, _) = mean_flowtime(&rows, name, "TP-SWAP", 100, 2);
        let (ct, cs, _) = mean_flowtime(&rows, name, "C-TSWAP", 100, 0);
        let ratio = naive / tp;
        let resel =
            rows.iter().filter(|r| r.map == name && r.solver == "D-SWAP-N").map(|r| r.reselections as f64).sum::<f64>()
                / 250.0;
        pass &= ratio >= 1.5 && ct <= tp;
        parts.push(format!(
            "{name}: D-SWAP-N/TP-SWAP {ratio:.2} ({naive:.0}/{tp:.0}), C-TSWAP {ct:.0}, D-SWAP-N reselections/run {resel:.1} (solved {ns}/{ts}/{cs})"
        ));
    }
    outcome(pass, format!("{}{}", parts.join("; "), bench.tag(&names)))
}

fn p8(bench: &Bench) -> Outcome {
    let names = ["den312d", "room-64-64-16"];
    let mut spec = bench.spec(&names);
    spec.solvers = vec![SolverKind::DSwapN, SolverKind::TpSwap];
    spec.t_max = 600;
    let rows = run_sweep(&spec).unwrap();
    let limits = [600, 500, 400, 300, 200];
    let rate = |map: &str, solver: &str, limit: u32| {
        let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.map == map && r.solver == solver).collect();
        100.0 * sel.iter().filter(|r| r.success_at(limit)).count() as f64 / sel.len() as f64
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let mut line = format!("{name} TP-SWAP/D-SWAP-N:");
        for l in limits {
            let (tp, nv) = (rate(name, "TP-SWAP", l), rate(name, "D-SWAP-N", l));
            pass &= tp >= nv;
            if l == 600 {
                pass &= tp == 100.0 && nv == 100.0;
            }
            line.push_str(&format!(" {l}:{tp:.0}/{nv:.0}"));
        }
        parts.push(line);
    }
    outcome(pass, format!("{}{}", parts.join("; "), bench.tag(&names)))
}

fn p10(bench: &Bench) -> Outcome {
    let inst = random_instance(77);
    let mut same_runs = true;
    for kind in SolverKind::ALL {
        let mut cfg = SolverConfig::new(kind, 2, 400);
        cfg.record_phi = kind == SolverKind::TpSwap;
        cfg.seed = 9;
        let a = run(&inst, cfg.clone()).unwrap();
        let b = run(&inst, cfg).unwrap();
        let text = |r: &SolveResult| TrajectoryDump::from_result(r, BTreeMap::new()).to_text();
        same_runs &= text(&a) == text(&b);
    }
    let mut spec = bench.spec(&["maze-32-32-4", "den404d"]);
    spec.seeds = (0..10).collect();
    spec.ns = vec![30, 100];
    spec.solvers = SolverKind::ALL.to_vec();
    spec.ks = vec![2, 5];
    spec.workers = 1;
    let one = csv_string(&run_sweep(&spec).unwrap());
    spec.workers = 8;
    let eight = csv_string(&run_sweep(&spec).unwrap());
    outcome(
        same_runs && one == eight,
        format!(
            "repeat runs identical: {same_runs}; sweep 1 vs 8 workers identical: {} ({} bytes)",
            one == eight,
            one.len()
        ),
    )
}

fn p11() -> Outcome {
    let inst = demo_instance();
    let r = run(&inst, SolverConfig::new(SolverKind::TpSwap, 2, 100)).unwrap();
    let finals: Vec<Cell> = r.trajectory.paths.iter().map(|p| *p.last().unwrap()).collect();
    let occupied = inst.targets.iter().all(|t| finals.contains(t));
    let c = &r.counters;
    outcome(
        r.solved && occupied && c.reassignments >= 1 && c.swaps >= 1,
        format!(
            "solved {} at t={}, reassignments {}, swaps {}, all targets occupied {occupied}",
            r.solved, r.steps_used, c.reassignments, c.swaps
        ),
    )
}

fn main() {
    let bench = Bench::new();
    let started = Instant::now();
    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    let mut record = |id: &'static str, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!(
            "{id} {} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };
    record("P1", "conflict-freeness", &mut p1);
    record("P2", "completeness", &mut p2);
    record("P3", "potential monotonicity", &mut p3);
    record("P4", "decentralized equals centralized at full range", &mut p4);
    record("P5", "bottleneck optimality", &mut p5);
    let mut p9_out = None;
    record("P6", "communication range trend", &mut || {
        let (p6, p9) = p6_p9(&bench);
        p9_out = Some(p9);
        p6
    });
    record("P7", "solver ordering", &mut || p7(&bench));
    record("P8", "success-rate ordering", &mut || p8(&bench));
    record("P9", "subgroup statistics", &mut || p9_out.take().unwrap_or_else(|| outcome(false, "not computed")));
    record("P10", "determinism", &mut || p10(&bench));
    record("P11", "three-agent golden scenario", &mut p11);

    let failed: Vec<&str> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s{}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
