use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use amapf_core::maps::{load_map_file, MapCatalog};
use amapf_core::sweep::{self, SweepSpec};
use amapf_core::{
    demo_instance, generate_scenario, parse_scen, take_instance, validate_trajectory, GridMap, Instance, Scenario,
    SolverConfig, SolverKind, TrajectoryDump,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

const RANGE_HELP: &str = "Communication radius k: an agent talks to everyone inside the \
(2k+1)x(2k+1) square centred on it, so k=2 is a 5x5 area, k=5 is 11x11 and k=10 is 21x21. \
Must be at least 2 for decentralized solvers; ignored by C-TSWAP";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] amapf_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}

fn core(e: impl Into<amapf_core::Error>) -> CliError {
    CliError::Core(e.into())
}

/// Exit status of a successful invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Unsolved run or trajectory with violations.
    NotOk,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Ok => ExitCode::SUCCESS,
            Status::NotOk => ExitCode::from(2),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "amapf", version, about = "Anonymous multi-agent pathfinding on grid maps")]
#[command(after_help = "Exit codes: 0 solved / ok, 2 unsolved / violations found, 1 error.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and report its costs.
    Run(RunArgs),
    /// Run a benchmark sweep and write one CSV row per run.
    Bench(BenchArgs),
    /// Check a trajectory dump for conflicts and illegal moves.
    Validate(ValidateArgs),
    /// Generate random scenarios for a map.
    Genscen(GenscenArgs),
    /// Write a named benchmark map (from the map directory or its procedural stand-in).
    Genmap(GenmapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    #[value(name = "C-TSWAP", alias = "c-tswap")]
    CTswap,
    #[value(name = "D-TSWAP-C", alias = "d-tswap-c")]
    DTswapC,
    #[value(name = "D-SWAP-N", alias = "d-swap-n")]
    DSwapN,
    #[value(name = "TP-SWAP", alias = "tp-swap")]
    TpSwap,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::CTswap => SolverKind::CTswap,
            SolverArg::DTswapC => SolverKind::DTswapC,
            SolverArg::DSwapN => SolverKind::DSwapN,
            SolverArg::TpSwap => SolverKind::TpSwap,
        }
    }
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Map file, or a benchmark map name such as maze-32-32-4
    #[arg(long)]
    pub map: String,
    /// Directory searched for <name>.map when --map is a name [env: AMAPF_MAPS]
    #[arg(long)]
    pub maps_dir: Option<PathBuf>,
}

impl MapArgs {
    /// Map, display name, and whether it is a procedural stand-in.
    fn load(&self) -> Result<(Arc<GridMap>, String, bool), CliError> {
        let path = Path::new(&self.map);
        if path.is_file() {
            let name = path.file_stem().map_or_else(|| self.map.clone(), |s| s.to_string_lossy().into_owned());
            return Ok((Arc::new(load_map_file(path).map_err(core)?), name, false));
        }
        let cat = match &self.maps_dir {
            Some(d) => MapCatalog::new(Some(d.clone())),
            None => MapCatalog::from_env(),
        };
        let (map, src) = cat.load(&self.map).map_err(core)?;
        Ok((map, self.map.clone(), src.is_surrogate()))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// MovingAI .scen file or scenario JSON; without it a scenario is generated from --seed
    #[arg(long)]
    pub scen: Option<PathBuf>,
    /// Seed for the generated scenario and for D-TSWAP-C's random assignment
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of agents (first n pairs of the scenario)
    #[arg(long, short = 'n')]
    pub agents: Option<usize>,
    #[arg(long, value_enum, default_value = "TP-SWAP")]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 2, help = RANGE_HELP)]
    pub k: u32,
    /// Step limit; runs still unsolved at this step count as failures
    #[arg(long, default_value_t = 1000)]
    pub t_max: u32,
    /// Write a machine-readable summary
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the trajectory dump
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Record the potential every step and include it in the dump (TP-SWAP)
    #[arg(long)]
    pub phi: bool,
    /// Recompute subgroups and group updates from every member's view and fail on disagreement
    #[arg(long)]
    pub cross_check: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated map files or benchmark map names
    #[arg(long, value_delimiter = ',', required = true)]
    pub maps: Vec<String>,
    /// Directory searched for <name>.map [env: AMAPF_MAPS]
    #[arg(long)]
    pub maps_dir: Option<PathBuf>,
    /// Scenarios per map (seeds first-seed, first-seed+1, ...)
    #[arg(long, default_value_t = 250)]
    pub scenarios: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    /// Start/target pairs per generated scenario
    #[arg(long, default_value_t = 100)]
    pub scenario_size: usize,
    /// Agent counts, comma-separated
    #[arg(long, short = 'n', value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    pub agents: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["C-TSWAP", "D-TSWAP-C", "D-SWAP-N", "TP-SWAP"])]
    pub solvers: Vec<SolverArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [2], help = RANGE_HELP)]
    pub k: Vec<u32>,
    #[arg(long, default_value_t = 1000)]
    pub t_max: u32,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output CSV
    #[arg(long)]
    pub csv: PathBuf,
    /// Also print success rates at these step limits, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub limits: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[command(flatten)]
    pub map: MapArgs,
}

#[derive(Debug, Args)]
pub struct GenscenArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Start/target pairs per scenario
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Number of scenarios
    #[arg(long, default_value_t = 250)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "scen")]
    pub format: ScenFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenFormat {
    /// MovingAI .scen
    Scen,
    /// Scenario JSON
    Json,
}

#[derive(Debug, Args)]
pub struct GenmapArgs {
    /// Benchmark map name, or `demo` for the three-agent example map
    pub name: String,
    #[arg(long)]
    pub maps_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the demo instance as a .scen file (only with `demo`)
    #[arg(long)]
    pub scen: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Genscen(a) => cmd_genscen(a),
        Command::Genmap(a) => cmd_genmap(a),
    }
}

fn load_scenario(path: &Path, map: &GridMap) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let scn = if path.extension().is_some_and(|e| e == "json") {
        Scenario::from_json(&text, map)
    } else {
        parse_scen(&text, map)
    };
    scn.map_err(core)
}

fn cmd_run(a: RunArgs) -> Result<Status, CliError> {
    let (map, name, surrogate) = a.map.load()?;
    let scn = match &a.scen {
        Some(p) => load_scenario(p, &map)?,
        None => {
            let n = a.agents.ok_or_else(|| CliError::Usage("--agents is required when no --scen is given".into()))?;
            generate_scenario(&map, &name, n, a.seed).map_err(core)?
        }
    };
    let n = a.agents.unwrap_or(scn.len());
    let inst = take_instance(&scn, map, n).map_err(core)?;
    solve_and_report(&inst, &name, surrogate, &a)
}

fn solve_and_report(inst: &Instance, name: &str, surrogate: bool, a: &RunArgs) -> Result<Status, CliError> {
    let kind: SolverKind = a.solver.into();
    let mut cfg = SolverConfig::new(kind, a.k, a.t_max);
    cfg.seed = a.seed;
    cfg.record_phi = a.phi;
    cfg.cross_check = a.cross_check;
    let k = if kind.is_centralized() { 0 } else { a.k };
    let r = amapf_core::run(inst, cfg).map_err(core)?;

    let tag = if surrogate { " (procedural stand-in)" } else { "" };
    println!("map {name}{tag}  solver {kind}  k {k}  agents {}", inst.agents());
    if r.solved {
        println!("solved in {} steps", r.steps_used);
    } else {
        println!("unsolved after {} steps", r.steps_used);
    }
    let na = |v: Option<u64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    println!("flowtime {}  makespan {}", na(r.flowtime), na(r.makespan));
    let c = &r.counters;
    println!(
        "swaps {}  rotations {}  reassignments {}  reselections {}",
        c.swaps, c.rotations, c.reassignments, c.reselections
    );
    if let Ok((groups, size)) = amapf_core::metrics::subgroup_stats(&r) {
        println!("mean subgroups {groups:.2}  mean subgroup size {size:.2}");
    }

    if let Some(path) = &a.json {
        let summary = serde_json::json!({
            "map": name,
            "surrogate_map": surrogate,
            "solver": kind.name(),
            "k": k,
            "agents": inst.agents(),
            "seed": a.seed,
            "t_max": a.t_max,
            "solved": r.solved,
            "steps": r.steps_used,
            "flowtime": r.flowtime,
            "makespan": r.makespan,
            "arrivals": r.trajectory.arrival_times(),
            "swaps": c.swaps,
            "rotations": c.rotations,
            "reassignments": c.reassignments,
            "reselections": c.reselections,
        });
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        fs::write(path, text + "\n").map_err(CliError::io(path))?;
    }
    if let Some(path) = &a.dump {
        let meta = BTreeMap::from([
            ("map".to_string(), name.to_string()),
            ("solver".to_string(), kind.name().to_string()),
            ("k".to_string(), k.to_string()),
            ("solved".to_string(), r.solved.to_string()),
        ]);
        fs::write(path, TrajectoryDump::from_result(&r, meta).to_text()).map_err(CliError::io(path))?;
    }
    Ok(if r.solved { Status::Ok } else { Status::NotOk })
}

fn cmd_bench(a: BenchArgs) -> Result<Status, CliError> {
    let mut maps = Vec::new();
    let mut stand_ins = Vec::new();
    for m in &a.maps {
        let (map, name, surrogate) = MapArgs { map: m.clone(), maps_dir: a.maps_dir.clone() }.load()?;
        if surrogate {
            stand_ins.push(name.clone());
        }
        maps.push((name, map));
    }
    let spec = SweepSpec {
        maps,
        seeds: (a.first_seed..a.first_seed + a.scenarios).collect(),
        scenario_size: a.scenario_size,
        ns: a.agents,
        solvers: a.solvers.into_iter().map(Into::into).collect(),
        ks: a.k,
        t_max: a.t_max,
        workers: a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if !stand_ins.is_empty() {
        eprintln!("note: procedural stand-ins used for {}", stand_ins.join(", "));
    }
    let rows = sweep::run_sweep(&spec).map_err(core)?;
    let file = fs::File::create(&a.csv).map_err(CliError::io(&a.csv))?;
    sweep::write_csv(&rows, std::io::BufWriter::new(file)).map_err(core)?;

    print!("{}", sweep::format_aggregate(&sweep::aggregate(&rows)));
    if !a.limits.is_empty() {
        println!();
        let header: Vec<String> = a.limits.iter().map(|l| format!("{l:>6}")).collect();
        println!("{:<18} {:<10} {:>3} {:>4} {}", "map", "solver", "k", "n", header.join(" "));
        for ((map, solver, k, n), rates) in sweep::success_rates(&rows, &a.limits) {
            let cells: Vec<String> = rates.iter().map(|r| format!("{:>5.0}%", r * 100.0)).collect();
            println!("{map:<18} {solver:<10} {k:>3} {n:>4} {}", cells.join(" "));
        }
    }
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    if errors > 0 {
        eprintln!("{errors} of {} runs failed with an error; see the `error` column", rows.len());
    }
    Ok(Status::Ok)
}

fn cmd_validate(a: ValidateArgs) -> Result<Status, CliError> {
    let (map, ..) = a.map.load()?;
    let text = fs::read_to_string(&a.trajectory).map_err(CliError::io(&a.trajectory))?;
    let dump = TrajectoryDump::parse(&text).map_err(core)?;
    let violations = validate_trajectory(&dump.trajectory.paths, &map);
    if violations.is_empty() {
        println!("ok: {} agents, {} timesteps, no violations", dump.trajectory.agents(), dump.trajectory.horizon());
        return Ok(Status::Ok);
    }
    for v in violations.iter().take(50) {
        println!("{v}");
    }
    if violations.len() > 50 {
        println!("... {} more", violations.len() - 50);
    }
    println!("{} violations", violations.len());
    Ok(Status::NotOk)
}

fn cmd_genscen(a: GenscenArgs) -> Result<Status, CliError> {
    let (map, name, _) = a.map.load()?;
    fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    for seed in a.first_seed..a.first_seed + a.seeds {
        let scn = generate_scenario(&map, &name, a.count, seed).map_err(core)?;
        let (ext, text) = match a.format {
            ScenFormat::Scen => ("scen", scn.to_scen(&map).map_err(core)?),
            ScenFormat::Json => ("json", scn.to_json() + "\n"),
        };
        let path = a.out.join(format!("{name}-{seed:03}.{ext}"));
        fs::write(&path, text).map_err(CliError::io(&path))?;
    }
    println!("wrote {} scenarios to {}", a.seeds, a.out.display());
    Ok(Status::Ok)
}

fn cmd_genmap(a: GenmapArgs) -> Result<Status, CliError> {
    if a.name == "demo" {
        let inst = demo_instance();
        fs::write(&a.out, inst.map.to_map_text()).map_err(CliError::io(&a.out))?;
        if let Some(p) = &a.scen {
            let scn = Scenario {
                map_name: "demo".into(),
                seed: None,
                pairs: inst.starts.iter().copied().zip(inst.targets.iter().copied()).collect(),
            };
            fs::write(p, scn.to_scen(&inst.map).map_err(core)?).map_err(CliError::io(p))?;
        }
        return Ok(Status::Ok);
    }
    if a.scen.is_some() {
        return Err(CliError::Usage("--scen is only available for the demo map".into()));
    }
    let (map, _, surrogate) = MapArgs { map: a.name.clone(), maps_dir: a.maps_dir }.load()?;
    fs::write(&a.out, map.to_map_text()).map_err(CliError::io(&a.out))?;
    if surrogate {
        eprintln!("note: {} is a procedural stand-in", a.name);
    }
    Ok(Status::Ok)
}
