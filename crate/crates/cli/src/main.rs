use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topomdp::generators::{
    gen_goalcount, gen_grid, gen_layered, GoalCountSpec, GridSpec, LayeredSpec,
};
use topomdp::mdp::SolveError;
use topomdp_cli::bench::{parse_manifest, run_bench};
use topomdp_cli::format::{parse_mdp, serialize_mdp};
use topomdp_cli::runner::{
    build_heuristic, read_file, run_solver, write_csv_header, write_csv_row, Algo, CliError,
    HeuristicSpec, RunRecord, SolveOptions,
};
use topomdp_cli::verify::verify_instance;

/// Solvers, generators, and a benchmark harness for stochastic shortest
/// path MDPs.
#[derive(Parser)]
#[command(name = "topomdp", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance file and print a CSV run record
    Solve(SolveArgs),
    /// Generate a benchmark instance file
    #[command(subcommand)]
    Gen(GenCmd),
    /// Run a benchmark manifest; one median CSV row per cell
    Bench(BenchArgs),
    /// Check an instance against the high-precision oracle
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    algo: Algo,
    #[arg(long)]
    input: PathBuf,
    /// Convergence threshold on the Bellman error
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Seed for the sampling solvers (lrtdp, brtdp)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Search iterations per batch (ftvi)
    #[arg(long, default_value_t = 100)]
    x: u64,
    /// Percent improvement below which search batching stops (ftvi)
    #[arg(long, default_value_t = 3.0)]
    y: f64,
    /// Backward tightening passes for the upper bound (vi-ae, ftvi, brtdp)
    #[arg(long, default_value_t = 3)]
    upper_passes: usize,
    /// Run extra searches inside large components (ftvi)
    #[arg(long)]
    intra_component: bool,
    /// Decompose the full state space instead of the reachable part (tvi)
    #[arg(long)]
    no_reachability: bool,
    /// Initial values: hmin, zero, oracle, or file:PATH
    #[arg(long, default_value = "hmin", value_parser = HeuristicSpec::parse)]
    heuristic: HeuristicSpec,
    /// Scale factor in (0, 1] applied to the heuristic
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Divergence cap on state values
    #[arg(long, default_value_t = 1e12)]
    value_cap: f64,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Layered random MDP (at least `layers` strongly connected components)
    Layered {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        layers: usize,
        /// Actions per state
        #[arg(long, default_value_t = 10)]
        actions: usize,
        /// Max successors per action
        #[arg(long, default_value_t = 10)]
        succ: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random two-action MDP with goals on one breadth-first depth
    Goalcount {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        goals: usize,
        /// Breadth-first depth the goals are drawn from
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid walk with slippery cells
    Grid {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Probability that a cell is slippery
        #[arg(long, default_value_t = 0.5)]
        p_sticky: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Repeats per cell (overrides the manifest; manifest default 10)
    #[arg(long)]
    repeats: Option<usize>,
    /// Per-run timeout in seconds (overrides the manifest; default 300)
    #[arg(long)]
    timeout: Option<f64>,
    /// Output CSV path, `-` for stdout
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_output(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

fn cmd_solve(args: SolveArgs) -> Result<i32, CliError> {
    let mdp = parse_mdp(&read_file(&args.input)?)?;
    let opts = SolveOptions {
        algo: args.algo,
        delta: args.delta,
        seed: args.seed,
        search_batch: args.x.max(1),
        improvement_pct: args.y,
        upper_passes: args.upper_passes.max(1),
        intra_component: args.intra_component,
        no_reachability: args.no_reachability,
        heuristic: args.heuristic,
        scale: args.scale,
        value_cap: args.value_cap,
        deadline: None,
    };
    let problem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.input.display().to_string());
    let initial = build_heuristic(&mdp, &opts)?;
    let (record, code) = match run_solver(&mdp, &opts, initial) {
        Ok(stats) => (
            RunRecord::from_stats(&problem, args.algo, args.seed, args.delta, &stats),
            0,
        ),
        Err(SolveError::DivergentValue { state }) => {
            eprintln!("DivergentValue: no goal is reachable with probability 1 from state {state}");
            (
                RunRecord::divergent(&problem, args.algo, args.seed, args.delta),
                2,
            )
        }
    };
    let mut writer = csv::Writer::from_writer(std::io::stdout());
    write_csv_header(&mut writer)?;
    write_csv_row(&mut writer, &record)?;
    writer
        .flush()
        .map_err(|e| CliError::Usage(format!("csv flush failed: {e}")))?;
    Ok(code)
}

fn cmd_gen(cmd: GenCmd) -> Result<i32, CliError> {
    let (mdp, out) = match cmd {
        GenCmd::Layered {
            states,
            layers,
            actions,
            succ,
            seed,
            out,
        } => (
            gen_layered(&LayeredSpec {
                num_states: states,
                layers,
                actions_per_state: actions,
                max_successors: succ,
                seed,
            })?,
            out,
        ),
        GenCmd::Goalcount {
            states,
            goals,
            depth,
            seed,
            out,
        } => (
            gen_goalcount(&GoalCountSpec {
                num_states: states,
                num_goals: goals,
                goal_depth: depth,
                seed,
            })?,
            out,
        ),
        GenCmd::Grid {
            width,
            height,
            p_sticky,
            seed,
            out,
        } => (
            gen_grid(&GridSpec {
                width,
                height,
                p_sticky,
                seed,
            })?,
            out,
        ),
    };
    write_output(&out, &serialize_mdp(&mdp))?;
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<i32, CliError> {
    let manifest = parse_manifest(&read_file(&args.manifest)?)?;
    if args.out == "-" {
        run_bench(&manifest, args.repeats, args.timeout, std::io::stdout())?;
    } else {
        let path = PathBuf::from(&args.out);
        let file = std::fs::File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        run_bench(&manifest, args.repeats, args.timeout, file)?;
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, CliError> {
    let mdp = parse_mdp(&read_file(&args.input)?)?;
    let checks = verify_instance(&mdp, args.seed)?;
    let mut out = std::io::stdout().lock();
    let mut failed = false;
    for check in &checks {
        if check.pass {
            let _ = writeln!(out, "PASS {}", check.name);
        } else {
            failed = true;
            let _ = writeln!(out, "FAIL {}: {}", check.name, check.detail);
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Gen(cmd) => cmd_gen(cmd),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Verify(args) => cmd_verify(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep usage problems on exit code 1; clap would use 2
            let _ = e.print();
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
