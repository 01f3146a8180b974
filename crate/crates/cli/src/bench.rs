//! The benchmark harness: a TOML manifest describes problems, algorithms,
//! and seeds; the harness runs the cross product with a per-run wall-clock
//! timeout and reports one CSV row per (problem, scale, algorithm) cell with
//! the median over the repeats.
//!
//! Rows are flushed as cells complete (an interrupted sweep keeps its
//! finished rows), so row order follows completion under parallelism. The
//! `SSP_TOPO_THREADS` environment variable caps the worker count.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use topomdp::generators::{
    gen_goalcount, gen_grid, gen_layered, GoalCountSpec, GridSpec, LayeredSpec,
};
use topomdp::mdp::{Mdp, SolveError};

use crate::format::parse_mdp;
use crate::runner::{
    build_heuristic, read_file, run_solver, write_csv_header, write_csv_row, Algo, CliError,
    HeuristicSpec, RunRecord, SolveOptions,
};

fn d_delta() -> f64 {
    1e-6
}
fn d_repeats() -> usize {
    10
}
fn d_timeout() -> f64 {
    300.0
}
fn d_heuristic() -> String {
    "hmin".into()
}
fn d_scales() -> Vec<f64> {
    vec![1.0]
}
fn d_ten() -> usize {
    10
}
fn d_half() -> f64 {
    0.5
}

#[derive(Deserialize, Clone, Debug)]
pub struct Manifest {
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_repeats")]
    pub repeats: usize,
    #[serde(default = "d_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub seed: u64,
    pub algos: Vec<String>,
    #[serde(default = "d_heuristic")]
    pub heuristic: String,
    #[serde(default = "d_scales")]
    pub scales: Vec<f64>,
    #[serde(default)]
    pub problems: Vec<ProblemSpec>,
}

#[derive(Deserialize, Clone, Debug)]
pub struct ProblemSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: ProblemKind,
}

#[derive(Deserialize, Clone, Debug)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemKind {
    Layered {
        states: usize,
        layers: usize,
        #[serde(default = "d_ten")]
        actions: usize,
        #[serde(default = "d_ten")]
        succ: usize,
    },
    Goalcount {
        states: usize,
        goals: usize,
        depth: usize,
    },
    Grid {
        width: usize,
        height: usize,
        #[serde(default = "d_half")]
        p_sticky: f64,
    },
    File {
        path: String,
    },
}

pub fn parse_manifest(text: &str) -> Result<Manifest, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("manifest: {e}")))
}

fn instantiate(kind: &ProblemKind, seed: u64) -> Result<Mdp, CliError> {
    Ok(match kind {
        ProblemKind::Layered {
            states,
            layers,
            actions,
            succ,
        } => gen_layered(&LayeredSpec {
            num_states: *states,
            layers: *layers,
            actions_per_state: *actions,
            max_successors: *succ,
            seed,
        })?,
        ProblemKind::Goalcount { states, goals, depth } => gen_goalcount(&GoalCountSpec {
            num_states: *states,
            num_goals: *goals,
            goal_depth: *depth,
            seed,
        })?,
        ProblemKind::Grid {
            width,
            height,
            p_sticky,
        } => gen_grid(&GridSpec {
            width: *width,
            height: *height,
            p_sticky: *p_sticky,
            seed,
        })?,
        ProblemKind::File { path } => {
            let path = std::path::PathBuf::from(path);
            parse_mdp(&read_file(&path)?)?
        }
    })
}

struct Cell {
    problem: ProblemSpec,
    scale: f64,
    algo: Algo,
}

/// Lower median: the element at index (n-1)/2 of the sorted values.
fn median_f64(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[(xs.len() - 1) / 2]
}

fn median_u64(mut xs: Vec<u64>) -> u64 {
    if xs.is_empty() {
        return 0;
    }
    xs.sort_unstable();
    xs[(xs.len() - 1) / 2]
}

fn run_cell(
    cell: &Cell,
    manifest: &Manifest,
    repeats: usize,
    timeout: Duration,
    heuristic: &HeuristicSpec,
) -> Result<RunRecord, CliError> {
    let mut rows: Vec<RunRecord> = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let seed = manifest.seed.wrapping_add(r as u64);
        let mdp = instantiate(&cell.problem.kind, seed)?;
        let opts = SolveOptions {
            algo: cell.algo,
            delta: manifest.delta,
            seed,
            heuristic: heuristic.clone(),
            scale: cell.scale,
            deadline: Some(Instant::now() + timeout),
            ..SolveOptions::default()
        };
        let initial = build_heuristic(&mdp, &opts)?;
        let row = match run_solver(&mdp, &opts, initial) {
            Ok(stats) => RunRecord::from_stats(&cell.problem.id, cell.algo, seed, manifest.delta, &stats),
            Err(SolveError::DivergentValue { .. }) => {
                RunRecord::divergent(&cell.problem.id, cell.algo, seed, manifest.delta)
            }
        };
        rows.push(row);
    }

    let id = if cell.scale == 1.0 {
        cell.problem.id.clone()
    } else {
        format!("{}@f={}", cell.problem.id, cell.scale)
    };
    let converged_values: Vec<f64> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.v_s0)
        .collect();
    Ok(RunRecord {
        problem: id,
        algo: cell.algo.name().to_string(),
        seed: manifest.seed,
        delta: manifest.delta,
        wall_time_ms: median_f64(rows.iter().map(|r| r.wall_time_ms).collect()),
        backups: median_u64(rows.iter().map(|r| r.backups).collect()),
        v_s0: median_f64(converged_values),
        scc_count: median_u64(rows.iter().map(|r| r.scc_count as u64).collect()) as usize,
        max_scc: median_u64(rows.iter().map(|r| r.max_scc as u64).collect()) as usize,
        eliminated_actions: median_u64(rows.iter().map(|r| r.eliminated_actions).collect()),
        converged: rows.iter().all(|r| r.converged),
    })
}

fn worker_count(cells: usize) -> usize {
    let from_env = std::env::var("SSP_TOPO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    from_env.unwrap_or(hw).min(cells.max(1))
}

/// Runs the whole manifest, writing the header immediately and one median
/// row per cell as it completes.
pub fn run_bench<W: Write + Send>(
    manifest: &Manifest,
    repeats_override: Option<usize>,
    timeout_override: Option<f64>,
    out: W,
) -> Result<(), CliError> {
    let repeats = repeats_override.unwrap_or(manifest.repeats).max(1);
    let timeout = Duration::from_secs_f64(timeout_override.unwrap_or(manifest.timeout_secs));
    let heuristic =
        HeuristicSpec::parse(&manifest.heuristic).map_err(CliError::Usage)?;
    let algos: Vec<Algo> = manifest
        .algos
        .iter()
        .map(|name| Algo::from_name(name))
        .collect::<Result<_, _>>()?;

    let mut cells: Vec<Cell> = Vec::new();
    for problem in &manifest.problems {
        for &scale in &manifest.scales {
            for &algo in &algos {
                cells.push(Cell {
                    problem: problem.clone(),
                    scale,
                    algo,
                });
            }
        }
    }

    let mut writer = csv::WriterBuilder::new().from_writer(out);
    write_csv_header(&mut writer)?;
    writer
        .flush()
        .map_err(|e| CliError::Usage(format!("csv flush failed: {e}")))?;

    let writer = Mutex::new(writer);
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    let threads = worker_count(cells.len());

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() || failure.lock().unwrap().is_some() {
                    return;
                }
                match run_cell(&cells[i], manifest, repeats, timeout, &heuristic) {
                    Ok(row) => {
                        let mut w = writer.lock().unwrap();
                        let _ = write_csv_row(&mut w, &row);
                        let _ = w.flush();
                    }
                    Err(e) => {
                        let mut slot = failure.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(e);
                        }
                    }
                }
            });
        }
    });

    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
