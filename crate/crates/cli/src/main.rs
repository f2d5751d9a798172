mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flexride_core::gen::{tiny_instance, TinyBounds};
use flexride_core::horizon::{routes_geojson, run, write_metrics_csv};
use flexride_core::milp::{build_model_with, export_lp, validate_solution, BuildOptions, Mutation};
use flexride_core::network::{load_network, write_network};
use flexride_core::oracle::{oracle_optimum, OracleLimits};
use flexride_core::preprocess::build_access_sets;
use flexride_core::solve::solve_exact;
use flexride_core::trips::{enrich_all, load_trips, write_trips};
use flexride_core::{
    solve_instance, AccessMethod, Assignment, EnrichedParticipant, ModelConfig, ObjectiveMode, Participant,
    PreprocessOptions, Rational64, RoadNetwork, SolveStatus,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Mismatch(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "flexride", version, about = "Role-flexible ridesharing with HOV lanes")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Allow car owners to ride.
    #[arg(long, global = true, overrides_with = "no_flex")]
    flex: bool,
    #[arg(long, global = true, overrides_with = "flex")]
    no_flex: bool,
    /// Enforce minimum occupancy on HOV edges.
    #[arg(long, global = true, overrides_with = "no_hov")]
    hov: bool,
    #[arg(long, global = true, overrides_with = "hov")]
    no_hov: bool,
    /// Number of shortest paths used for accessible nodes.
    #[arg(long, global = true)]
    yen_k: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute accessible nodes and viable matches.
    Preprocess,
    /// Solve the static instance once.
    Solve,
    /// Run the rolling-horizon simulation.
    Simulate {
        /// Also write committed routes as GeoJSON.
        #[arg(long)]
        geojson: bool,
    },
    /// Compare the exact solver with the brute-force oracle on random instances.
    OracleCheck {
        #[arg(long)]
        count: Option<u64>,
        #[arg(long, hide = true)]
        mutate: bool,
    },
    /// Re-check a solution JSON written by `solve`.
    Validate { solution: PathBuf },
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.flex {
            cfg.model.flex_roles = true;
        }
        if self.no_flex {
            cfg.model.flex_roles = false;
        }
        if self.hov {
            cfg.model.hov_enabled = true;
        }
        if self.no_hov {
            cfg.model.hov_enabled = false;
        }
        if let Some(k) = self.yen_k {
            cfg.set("yen_k", &k.to_string(), Path::new(""))?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    status: String,
    objective: Option<String>,
    nodes: u64,
    assignment: Option<Assignment>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Usage(format!("config key {key} is required")))
}

fn load_inputs(cfg: &RunConfig) -> Result<(RoadNetwork, Vec<Participant>), CliError> {
    let nodes = required(&cfg.nodes, "nodes")?;
    let edges = required(&cfg.edges, "edges")?;
    let trips = required(&cfg.trips, "trips")?;
    let hov = cfg.hov_nodes.as_deref().map(open).transpose()?;
    let net = load_network(open(nodes)?, open(edges)?, hov).map_err(|e| CliError::Io(e.to_string()))?;
    let parts = load_trips(open(trips)?).map_err(|e| io_err(trips, e))?;
    for p in &parts {
        for n in [p.origin, p.destination] {
            if !net.contains(n) {
                return Err(CliError::Io(format!("{}: participant {} uses unknown node {n}", trips.display(), p.id)));
            }
        }
    }
    Ok((net, parts))
}

fn enriched(net: &RoadNetwork, parts: &[Participant]) -> Result<Vec<EnrichedParticipant>, CliError> {
    enrich_all(net, parts).map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_preprocess(cfg: &RunConfig) -> Result<(), CliError> {
    let (net, parts) = load_inputs(cfg)?;
    let parts = enriched(&net, &parts)?;
    let sets = build_access_sets(&net, &parts, cfg.preprocess_options()).map_err(|e| CliError::Solver(e.to_string()))?;
    let dump = serde_json::json!({
        "accessible_nodes": sets.to_debug_json(),
        "viable_matches": sets.rd.iter().map(|(p, d)| [p, d]).collect::<Vec<_>>(),
    });
    let path = cfg.out.join("preprocess.json");
    write_text(&path, &format!("{}\n", serde_json::to_string_pretty(&dump).expect("json")))?;
    let sizes: Vec<usize> = sets.an.values().map(|s| s.len()).collect();
    println!("participants: {} ({} feasible)", parts.len(), sizes.len());
    if let (Some(min), Some(max)) = (sizes.iter().min(), sizes.iter().max()) {
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
        println!("accessible nodes per participant: min {min} mean {mean:.2} max {max}");
    }
    println!("viable matches |RD|: {}", sets.rd.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let (net, parts) = load_inputs(cfg)?;
    let parts = enriched(&net, &parts)?;
    let model_cfg = cfg.model_config();
    let solved = solve_instance(&net, &parts, &model_cfg, cfg.preprocess_options(), &cfg.backend()?)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let lp_path = cfg.out.join("model.lp");
    let mut w = create(&lp_path)?;
    export_lp(&solved.model, &mut w).and_then(|_| w.flush()).map_err(|e| io_err(&lp_path, e))?;

    let outcome = &solved.outcome;
    let file = SolutionFile {
        status: outcome.status.to_string(),
        objective: outcome.objective.map(|o| o.to_string()),
        nodes: outcome.stats.nodes,
        assignment: solved.assignment.clone(),
    };
    let sol_path = cfg.out.join("solution.json");
    write_text(&sol_path, &format!("{}\n", serde_json::to_string_pretty(&file).expect("json")))?;
    println!("status: {}", outcome.status);
    if outcome.status == SolveStatus::LimitReached {
        return Err(CliError::Solver("search limit reached before optimality was proven".into()));
    }
    let Some(a) = &solved.assignment else {
        return Ok(());
    };
    println!("objective: {}", a.objective_value);
    println!("matched riders: {}, drivers: {}", a.matched.len(), a.driving.len());
    let report = validate_solution(&net, &solved.participants, Some(&solved.sets), &model_cfg, a);
    let val_path = cfg.out.join("validation.txt");
    write_text(&val_path, &report.to_string())?;
    if !report.is_ok() {
        print!("{report}");
        return Err(CliError::Mismatch("solution fails validation".into()));
    }
    println!("wrote {}, {}, {}", lp_path.display(), sol_path.display(), val_path.display());
    Ok(())
}

fn cmd_validate(cfg: &RunConfig, solution: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(solution).map_err(|e| io_err(solution, e))?;
    let file: SolutionFile = serde_json::from_str(&text).map_err(|e| io_err(solution, e))?;
    let Some(a) = file.assignment else {
        println!("status {}: nothing to validate", file.status);
        return Ok(());
    };
    let (net, parts) = load_inputs(cfg)?;
    let parts: Vec<EnrichedParticipant> = enriched(&net, &parts)?.into_iter().filter(|p| p.feasible).collect();
    let sets = build_access_sets(&net, &parts, cfg.preprocess_options()).map_err(|e| CliError::Solver(e.to_string()))?;
    let report = validate_solution(&net, &parts, Some(&sets), &cfg.model_config(), &a);
    print!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!("{} fails validation", solution.display())))
    }
}

fn cmd_simulate(cfg: &RunConfig, geojson: bool) -> Result<(), CliError> {
    let (net, parts) = load_inputs(cfg)?;
    let horizon = cfg.horizon()?;
    let result = run(&net, &parts, &horizon);

    let csv_path = cfg.out.join("metrics.csv");
    let mut w = create(&csv_path)?;
    write_metrics_csv(&mut w, &result.reports)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&csv_path, e))?;
    let summary_path = cfg.out.join("summary.json");
    write_text(&summary_path, &format!("{}\n", serde_json::to_string_pretty(&result.metrics).expect("json")))?;
    if geojson {
        let path = cfg.out.join("routes.geojson");
        let doc = routes_geojson(&net, &result.state, &horizon.model);
        write_text(&path, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    }
    for r in result.reports.iter().filter(|r| r.error.is_some()) {
        eprintln!("period {}: {}", r.period, r.error.as_deref().unwrap_or_default());
    }
    let m = &result.metrics;
    println!(
        "periods: {}, objective mean: {}, match: {:.2}%, role shift: {:.2}%",
        m.periods,
        *m.objective_mean.numer() as f64 / *m.objective_mean.denom() as f64,
        m.match_pct,
        m.shift_pct
    );
    if m.periods > 0 && m.failed_periods == m.periods {
        return Err(CliError::Solver("every period failed".into()));
    }
    Ok(())
}

fn instance_text(net: &RoadNetwork, parts: &[Participant]) -> String {
    let (mut nodes, mut edges, mut trips) = (Vec::new(), Vec::new(), Vec::new());
    write_network(net, &mut nodes, &mut edges).expect("write to memory");
    write_trips(&mut trips, parts).expect("write to memory");
    format!(
        "--- nodes.csv\n{}--- edges.csv\n{}--- trips.csv\n{}",
        String::from_utf8_lossy(&nodes),
        String::from_utf8_lossy(&edges),
        String::from_utf8_lossy(&trips)
    )
}

/// Configurations every oracle-check instance is solved under.
fn check_configs(base: &ModelConfig) -> Vec<ModelConfig> {
    let profitable = ObjectiveMode {
        include_driver_arcs: false,
        ..ObjectiveMode::weighted(base.objective.lambda_scale.max(Rational64::from_integer(2)))
    };
    let mut out = Vec::new();
    for objective in [base.objective, profitable] {
        for flex in [true, false] {
            let c = ModelConfig {
                flex_roles: flex,
                objective,
                ..*base
            };
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

fn cmd_oracle_check(cfg: &RunConfig, count: u64, mutate: bool) -> Result<(), CliError> {
    let opts = BuildOptions {
        mutation: mutate.then_some(Mutation::PickupOrderOffByOne),
    };
    let configs = check_configs(&cfg.model_config());
    let exact = PreprocessOptions {
        method: AccessMethod::Exact,
        temporal_filter: cfg.temporal_filter,
    };
    let mut mismatches = 0u64;
    let mut solves = 0u64;
    for seed in cfg.seed..cfg.seed + count {
        let inst = tiny_instance(seed, TinyBounds::default());
        let parts: Vec<EnrichedParticipant> = enriched(&inst.network, &inst.participants)?
            .into_iter()
            .filter(|p| p.feasible)
            .collect();
        let sets = build_access_sets(&inst.network, &parts, exact).map_err(|e| CliError::Solver(e.to_string()))?;
        for mc in &configs {
            let model = build_model_with(&inst.network, &parts, &sets, mc, &opts).map_err(|e| CliError::Solver(e.to_string()))?;
            let outcome = solve_exact(&model, cfg.limits()).map_err(|e| CliError::Solver(e.to_string()))?;
            let (expected, _) = oracle_optimum(&inst.network, &parts, mc, OracleLimits::default())
                .map_err(|e| CliError::Solver(format!("seed {seed}: {e}")))?;
            solves += 1;
            if outcome.objective != Some(expected) {
                mismatches += 1;
                println!(
                    "MISMATCH seed {seed} flex {} objective scale {} driver arcs {}: exact {} ({}) oracle {expected}",
                    mc.flex_roles,
                    mc.objective.lambda_scale,
                    mc.objective.include_driver_arcs,
                    outcome.objective.map_or("none".into(), |o| o.to_string()),
                    outcome.status,
                );
                print!("{}", instance_text(&inst.network, &inst.participants));
            }
        }
    }
    println!("checked {count} instances ({solves} solves): {mismatches} mismatches");
    if mismatches > 0 {
        return Err(CliError::Mismatch(format!("{mismatches} oracle mismatches")));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Preprocess => cmd_preprocess(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Simulate { geojson } => cmd_simulate(&cfg, *geojson),
        Command::OracleCheck { count, mutate } => cmd_oracle_check(&cfg, count.unwrap_or(cfg.oracle_count), *mutate),
        Command::Validate { solution } => cmd_validate(&cfg, solution),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
