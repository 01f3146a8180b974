//! Algorithm dispatch shared by the solve, bench, and verify commands, and
//! the CSV run record they all emit.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;
use topomdp::baselines::{brtdp, ilao_star, lrtdp, TrialConfig};
use topomdp::bounds::{h_min, init_upper_bound, scale_heuristic};
use topomdp::ftvi::{ftvi_with, FtviConfig};
use topomdp::generators::GenError;
use topomdp::mdp::{Mdp, SolveError, ValueBounds, ValueFn};
use topomdp::stats::SolveStats;
use topomdp::vi::{solve_vi, solve_vi_elim, tvi, SolverConfig};

use crate::format::FormatError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Divergent(#[from] SolveError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit code: 2 for divergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Divergent(_) => 2,
            _ => 1,
        }
    }
}

pub fn read_file(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum Algo {
    Vi,
    ViAe,
    Tvi,
    Ftvi,
    Ilao,
    Lrtdp,
    Brtdp,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::Vi,
        Algo::ViAe,
        Algo::Tvi,
        Algo::Ftvi,
        Algo::Ilao,
        Algo::Lrtdp,
        Algo::Brtdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Vi => "vi",
            Algo::ViAe => "vi-ae",
            Algo::Tvi => "tvi",
            Algo::Ftvi => "ftvi",
            Algo::Ilao => "ilao",
            Algo::Lrtdp => "lrtdp",
            Algo::Brtdp => "brtdp",
        }
    }

    pub fn from_name(name: &str) -> Result<Algo, CliError> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| CliError::Usage(format!("unknown algorithm `{name}`")))
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the initial (lower-bound) values come from.
#[derive(Clone, Debug, PartialEq)]
pub enum HeuristicSpec {
    HMin,
    Zero,
    File(PathBuf),
    /// High-precision value iteration on the instance itself; useful with
    /// `scale` for heuristic-quality sweeps.
    Oracle,
}

impl HeuristicSpec {
    pub fn parse(text: &str) -> Result<HeuristicSpec, String> {
        match text {
            "hmin" => Ok(HeuristicSpec::HMin),
            "zero" => Ok(HeuristicSpec::Zero),
            "oracle" => Ok(HeuristicSpec::Oracle),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(HeuristicSpec::File(PathBuf::from(path))),
                _ => Err(format!(
                    "expected hmin, zero, oracle, or file:PATH, found `{other}`"
                )),
            },
        }
    }
}

/// Everything a single solver run needs beyond the instance.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub algo: Algo,
    pub delta: f64,
    pub seed: u64,
    pub search_batch: u64,
    pub improvement_pct: f64,
    pub upper_passes: usize,
    pub intra_component: bool,
    pub no_reachability: bool,
    pub heuristic: HeuristicSpec,
    pub scale: f64,
    pub value_cap: f64,
    pub deadline: Option<Instant>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            algo: Algo::Tvi,
            delta: 1e-6,
            seed: 0,
            search_batch: 100,
            improvement_pct: 3.0,
            upper_passes: 3,
            intra_component: false,
            no_reachability: false,
            heuristic: HeuristicSpec::HMin,
            scale: 1.0,
            value_cap: 1e12,
            deadline: None,
        }
    }
}

/// The oracle used for heuristics and verification: plain value iteration
/// at a tight threshold.
pub fn oracle_values(mdp: &Mdp, value_cap: f64) -> Result<ValueFn, SolveError> {
    let cfg = SolverConfig {
        delta: 1e-10,
        value_cap,
        ..SolverConfig::default()
    };
    solve_vi(mdp, &cfg, None).map(|(v, _)| v)
}

/// Builds the initial value function the run starts from.
pub fn build_heuristic(mdp: &Mdp, opts: &SolveOptions) -> Result<ValueFn, CliError> {
    let base = match &opts.heuristic {
        HeuristicSpec::HMin => h_min(mdp),
        HeuristicSpec::Zero => ValueFn::zeros(mdp.num_states()),
        HeuristicSpec::Oracle => oracle_values(mdp, opts.value_cap)?,
        HeuristicSpec::File(path) => {
            let text = read_file(path)?;
            crate::format::parse_value_fn(&text, mdp)?
        }
    };
    if !(opts.scale > 0.0 && opts.scale <= 1.0) {
        return Err(CliError::Usage(format!(
            "--scale must lie in (0, 1], found {}",
            opts.scale
        )));
    }
    Ok(if opts.scale == 1.0 {
        base
    } else {
        scale_heuristic(&base, opts.scale)
    })
}

/// Runs one solver. A run that converged to an infinite start value is
/// reported as divergent: the instance cannot reach a goal with
/// probability one from its initial state.
pub fn run_solver(mdp: &Mdp, opts: &SolveOptions, initial: ValueFn) -> Result<SolveStats, SolveError> {
    let cfg = SolverConfig {
        delta: opts.delta,
        value_cap: opts.value_cap,
        max_sweeps: None,
        deadline: opts.deadline,
    };
    let trial = TrialConfig {
        delta: opts.delta,
        rng_seed: opts.seed,
        value_cap: opts.value_cap,
        deadline: opts.deadline,
        ..TrialConfig::default()
    };
    let stats = match opts.algo {
        Algo::Vi => solve_vi(mdp, &cfg, Some(initial))?.1,
        Algo::ViAe => {
            let upper = init_upper_bound(mdp, opts.upper_passes);
            solve_vi_elim(mdp, &cfg, Some(initial), &upper)?.2
        }
        Algo::Tvi => tvi(mdp, &cfg, !opts.no_reachability, Some(initial))?.1,
        Algo::Ftvi => {
            let ftvi_cfg = FtviConfig {
                search_batch: opts.search_batch,
                min_improvement_pct: opts.improvement_pct,
                delta: opts.delta,
                value_cap: opts.value_cap,
                upper_passes: opts.upper_passes,
                intra_component: opts.intra_component,
                deadline: opts.deadline,
            };
            ftvi_with(mdp, &ftvi_cfg, Some(initial), None)?.stats
        }
        Algo::Ilao => ilao_star(mdp, initial, &trial)?.1,
        Algo::Lrtdp => lrtdp(mdp, initial, &trial)?.1,
        Algo::Brtdp => {
            let bounds = ValueBounds::new(initial, init_upper_bound(mdp, opts.upper_passes));
            brtdp(mdp, bounds, &trial)?.1
        }
    };
    if stats.converged && !stats.v_s0.is_finite() {
        return Err(SolveError::DivergentValue { state: mdp.initial() });
    }
    Ok(stats)
}

pub const CSV_HEADER: [&str; 11] = [
    "problem",
    "algo",
    "seed",
    "delta",
    "wall_time_ms",
    "backups",
    "v_s0",
    "scc_count",
    "max_scc",
    "eliminated_actions",
    "converged",
];

/// One CSV row; the schema is fixed and matches [`CSV_HEADER`].
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub problem: String,
    pub algo: String,
    pub seed: u64,
    pub delta: f64,
    pub wall_time_ms: f64,
    pub backups: u64,
    pub v_s0: f64,
    pub scc_count: usize,
    pub max_scc: usize,
    pub eliminated_actions: u64,
    pub converged: bool,
}

impl RunRecord {
    pub fn from_stats(problem: &str, algo: Algo, seed: u64, delta: f64, stats: &SolveStats) -> Self {
        RunRecord {
            problem: problem.to_string(),
            algo: algo.name().to_string(),
            seed,
            delta,
            wall_time_ms: stats.wall_time.as_secs_f64() * 1e3,
            backups: stats.backups,
            v_s0: stats.v_s0,
            scc_count: stats.scc_count,
            max_scc: stats.max_scc,
            eliminated_actions: stats.eliminated_actions,
            converged: stats.converged,
        }
    }

    /// Marker row for a run that ended in divergence.
    pub fn divergent(problem: &str, algo: Algo, seed: u64, delta: f64) -> Self {
        RunRecord {
            problem: problem.to_string(),
            algo: algo.name().to_string(),
            seed,
            delta,
            wall_time_ms: 0.0,
            backups: 0,
            v_s0: f64::INFINITY,
            scc_count: 0,
            max_scc: 0,
            eliminated_actions: 0,
            converged: false,
        }
    }

    pub fn fields(&self) -> [String; 11] {
        [
            self.problem.clone(),
            self.algo.clone(),
            self.seed.to_string(),
            self.delta.to_string(),
            format!("{:.3}", self.wall_time_ms),
            self.backups.to_string(),
            self.v_s0.to_string(),
            self.scc_count.to_string(),
            self.max_scc.to_string(),
            self.eliminated_actions.to_string(),
            self.converged.to_string(),
        ]
    }
}

pub fn write_csv_header<W: Write>(writer: &mut csv::Writer<W>) -> Result<(), CliError> {
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| CliError::Usage(format!("csv write failed: {e}")))
}

pub fn write_csv_row<W: Write>(writer: &mut csv::Writer<W>, record: &RunRecord) -> Result<(), CliError> {
    writer
        .write_record(record.fields())
        .map_err(|e| CliError::Usage(format!("csv write failed: {e}")))
}
