use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use dao_control::daoop::{self, ConstraintReport, OperationParams, SubgraphSummary};
use dao_control::engine::{self, run_batch_outputs, summarize_batch, BatchRun, SimAbort, SimOutput};
use dao_control::output::{self, AbortDiagnostics, RunReportFile};
use dao_control::scenario::REFERENCE_SCENARIO_JSON;
use dao_control::{LoadError, Regime, Scenario, ScenarioConfig, Snapshot};

const EXIT_INVARIANT: u8 = 2;
const EXIT_ABORT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_PARSE: u8 = 5;
const EXIT_SCHEMA: u8 = 6;
const EXIT_IO: u8 = 7;

/// Log verbosity, read with env_logger filter syntax (e.g. `info`, `debug`).
const LOG_ENV: &str = "DAOCTL_LOG";

#[derive(Parser)]
#[command(name = "daoctl", version, about = "Run DAO-based consensus control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more regimes and write traces and reports.
    Run {
        scenario: PathBuf,
        /// `proposed`, `dao`, `pos`, `fixed-gain` or `all`. Defaults to the scenario's regime.
        #[arg(long)]
        regime: Option<String>,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// `1..20` (inclusive), `1..=20` or `3,5,8`. Defaults to the scenario's seed list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Scale each ECE by its agent's period in the consensus term.
        #[arg(long)]
        tau_scaled_consensus: bool,
        /// Also write per-run trace and summary files in batch mode.
        #[arg(long)]
        traces: bool,
        /// Also write the per-epoch controller internals.
        #[arg(long)]
        epochs: bool,
    },
    /// Extract a subgraph from an adjacency + ECE snapshot.
    Operate {
        snapshot: PathBuf,
        #[arg(long)]
        phi: Option<usize>,
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the exhaustive search (at most 12 agents).
        #[arg(long)]
        oracle: bool,
    },
    /// Load and check a scenario file without running it.
    ValidateConfig { scenario: PathBuf },
    /// Print the built-in reference scenario.
    ShowScenario,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            regime,
            seed,
            seeds,
            out,
            tau_scaled_consensus,
            traces,
            epochs,
        } => cmd_run(RunArgs {
            scenario,
            regime,
            seed,
            seeds,
            out,
            tau_scaled_consensus,
            traces,
            epochs,
        }),
        Command::Operate {
            snapshot,
            phi,
            psi,
            seed,
            oracle,
        } => cmd_operate(&snapshot, phi, psi, seed, oracle),
        Command::ValidateConfig { scenario } => cmd_validate(&scenario),
        Command::ShowScenario => {
            print!("{REFERENCE_SCENARIO_JSON}");
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = match e {
            LoadError::Io { .. } => EXIT_IO,
            LoadError::Parse(_) => EXIT_PARSE,
            LoadError::Schema(_) => EXIT_SCHEMA,
            LoadError::Invariant(_) => EXIT_INVARIANT,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<dao_control::Error> for Failure {
    fn from(e: dao_control::Error) -> Self {
        Failure::new(EXIT_INVARIANT, e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display()))
}

type CmdResult = Result<ExitCode, Failure>;

struct RunArgs {
    scenario: PathBuf,
    regime: Option<String>,
    seed: Option<u64>,
    seeds: Option<String>,
    out: PathBuf,
    tau_scaled_consensus: bool,
    traces: bool,
    epochs: bool,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::new(EXIT_INVARIANT, format!("invalid --seeds `{text}`"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn parse_regimes(arg: Option<&str>, default: Regime) -> Result<Vec<Regime>, Failure> {
    match arg {
        None => Ok(vec![default]),
        Some("all") => Ok(Regime::ALL.to_vec()),
        Some(name) => Ok(vec![name.parse::<Regime>()?]),
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
}

fn run_stem(regime: Regime, seed: u64) -> String {
    format!("{regime}_seed{seed}")
}

fn write_run_files(dir: &Path, out: &SimOutput, scenario: &Scenario, epochs: bool) -> Result<(), Failure> {
    let stem = run_stem(out.trace.regime, out.trace.seed);
    write_file(&dir.join(format!("trace_{stem}.csv")), |w| {
        output::write_trace_csv(&out.trace, w)
    })?;
    let report = RunReportFile::new(out, scenario.sim.epsilon_converge);
    write_file(&dir.join(format!("summary_{stem}.json")), |w| {
        writeln!(w, "{}", output::to_json_pretty(&report))
    })?;
    if epochs {
        write_file(&dir.join(format!("epochs_{stem}.csv")), |w| {
            output::write_epoch_csv(&out.trace, w)
        })?;
    }
    Ok(())
}

fn write_abort(dir: &Path, abort: &SimAbort) -> Result<(), Failure> {
    let stem = run_stem(abort.trace.regime, abort.trace.seed);
    let diag = AbortDiagnostics::new(abort);
    write_file(&dir.join(format!("abort_{stem}.json")), |w| {
        writeln!(w, "{}", output::to_json_pretty(&diag))
    })
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let config = ScenarioConfig::load(&args.scenario)?;
    let mut scenario = config.to_scenario()?;
    if args.tau_scaled_consensus {
        scenario.controller.tau_scaled_consensus = true;
    }
    let regimes = parse_regimes(args.regime.as_deref(), scenario.controller.regime)?;
    let seeds = match (args.seed, &args.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(text)) => parse_seeds(text)?,
        (None, None) => config.seeds().to_vec(),
    };
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    log::info!("running {} regime(s) x {} seed(s)", regimes.len(), seeds.len());

    let runs = run_batch_outputs(&scenario, &regimes, &seeds);
    let single = runs.len() == 1;
    let mut aborted = 0;
    for run in &runs {
        match &run.outcome {
            Ok(out) if single || args.traces => write_run_files(&args.out, out, &scenario, args.epochs)?,
            Ok(_) => {}
            Err(abort) => {
                aborted += 1;
                log::error!(
                    "{} seed {} aborted at t={}: {}",
                    run.regime,
                    run.seed,
                    abort.t,
                    abort.error
                );
                write_abort(&args.out, abort)?;
            }
        }
    }

    let times: Vec<f64> = (0..scenario.sim.step_count())
        .map(|k| scenario.sim.time_of(k))
        .collect();
    let columns = plot_columns(&regimes, &runs);
    if single {
        let stem = run_stem(regimes[0], seeds[0]);
        write_file(&args.out.join(format!("plot_{stem}.csv")), |w| {
            output::write_plot_csv(&times, &columns, w)
        })?;
        if let Ok(out) = &runs[0].outcome {
            print_run(out);
        }
    } else {
        write_file(&args.out.join("plot.csv"), |w| {
            output::write_plot_csv(&times, &columns, w)
        })?;
        let report = summarize_batch(scenario.sim.horizon, &regimes, &seeds, &runs);
        write_file(&args.out.join("batch.json"), |w| {
            writeln!(w, "{}", output::to_json_pretty(&report))
        })?;
        print_batch(&report);
    }
    Ok(if aborted > 0 {
        ExitCode::from(EXIT_ABORT)
    } else {
        ExitCode::SUCCESS
    })
}

/// Max discrepancy per regime; the per-step median across seeds in batch mode.
fn plot_columns(regimes: &[Regime], runs: &[BatchRun]) -> Vec<(String, Vec<Option<f64>>)> {
    regimes
        .iter()
        .map(|&regime| {
            let series: Vec<&[Option<f64>]> = runs
                .iter()
                .filter(|r| r.regime == regime)
                .filter_map(|r| r.outcome.as_ref().ok())
                .map(|o| o.report.max_discrepancy.as_slice())
                .collect();
            (regime.to_string(), output::median_series(&series))
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

fn print_run(out: &SimOutput) {
    let (found, failed) = out.trace.operation_counts();
    println!("regime            {}", out.trace.regime);
    println!("seed              {}", out.trace.seed);
    println!("convergence time  {}", fmt_opt(out.report.convergence_time));
    println!("consensus value   {}", fmt_opt(out.report.consensus_value));
    println!("delta J           {:.3}", out.report.delta_j);
    println!("cumulative ECE    {:.3}", out.report.cumulative_ece);
    if out.trace.regime.operates() {
        println!("operations        {found} found, {failed} infeasible");
    }
}

fn print_batch(report: &engine::BatchReport) {
    println!(
        "{:<11} {:>10} {:>6} {:>10} {:>10} {:>12}",
        "regime", "conv (med)", "never", "cons (med)", "|dJ| (med)", "cum ECE (med)"
    );
    for r in &report.regimes {
        let med = |s: Option<engine::Spread>| fmt_opt(s.map(|s| s.median));
        println!(
            "{:<11} {:>10} {:>6} {:>10} {:>10} {:>12}",
            r.regime.name(),
            med(r.convergence_time),
            r.never_converged,
            med(r.consensus_value),
            med(r.abs_delta_j),
            med(r.cumulative_ece)
        );
    }
}

#[derive(Serialize)]
struct OperateReport {
    phi: usize,
    psi: f64,
    seed: u64,
    found: bool,
    iterations_used: usize,
    removed_edge_count: usize,
    subgraph: Option<SubgraphSummary>,
    edge_count: Option<usize>,
    validation: Option<ConstraintReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
}

#[derive(Serialize)]
struct OracleReport {
    found: bool,
    subgraph: Option<SubgraphSummary>,
    edge_count: Option<usize>,
    /// Heuristic edges minus optimal edges, when both exist.
    edge_gap: Option<i64>,
}

fn cmd_operate(path: &Path, phi: Option<usize>, psi: Option<f64>, seed: Option<u64>, oracle: bool) -> CmdResult {
    let snap = Snapshot::load(path)?;
    let missing = |name: &str| {
        Failure::new(
            EXIT_INVARIANT,
            format!("`{name}` must be given on the command line or in the snapshot"),
        )
    };
    let phi = phi.or(snap.phi).ok_or_else(|| missing("phi"))?;
    let psi = psi.or(snap.psi).ok_or_else(|| missing("psi"))?;
    let seed = seed.or(snap.seed).unwrap_or(1);
    let mut params = OperationParams::new(phi, psi, seed);
    if let Some(m) = snap.max_outer_iterations {
        params.max_outer_iterations = m;
    }
    let topo = snap.topology();
    let result = daoop::operate(&topo, &snap.r, &params)?;
    let heuristic_edges = result.subgraph.as_ref().map(|s| s.edge_count());
    let oracle = if oracle {
        let best = daoop::brute_force(&topo, &snap.r, phi, psi)?;
        let edge_count = best.as_ref().map(|s| s.edge_count());
        Some(OracleReport {
            found: best.is_some(),
            subgraph: best.as_ref().map(|s| SubgraphSummary::new(&topo, s)),
            edge_count,
            edge_gap: heuristic_edges.zip(edge_count).map(|(h, o)| h as i64 - o as i64),
        })
    } else {
        None
    };
    let report = OperateReport {
        phi,
        psi,
        seed,
        found: result.found,
        iterations_used: result.iterations_used,
        removed_edge_count: result.removed_edge_count,
        subgraph: result.subgraph.as_ref().map(|s| SubgraphSummary::new(&topo, s)),
        edge_count: heuristic_edges,
        validation: result
            .subgraph
            .as_ref()
            .map(|s| daoop::validate(&topo, s, &snap.r, &params)),
        oracle,
    };
    println!("{}", output::to_json_pretty(&report));
    Ok(if result.found {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}

fn cmd_validate(path: &Path) -> CmdResult {
    let config = ScenarioConfig::load(path)?;
    let scenario = config.to_scenario()?;
    println!(
        "ok: {} agents, {} edges, {} steps, regime {}, {} seed(s)",
        scenario.topology.n(),
        scenario.topology.edges().len(),
        scenario.sim.step_count(),
        scenario.controller.regime,
        config.seeds().len()
    );
    Ok(ExitCode::SUCCESS)
}
