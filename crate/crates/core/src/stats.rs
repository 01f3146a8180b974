//! Per-run counters every solver reports.

use std::time::Duration;

/// Run statistics. `iterations` counts sweeps for the value-iteration
/// family, search iterations for the focused solver's search phase, passes
/// for ILAO*, and trials for the RTDP family. The SCC fields are only
/// populated by the decomposition-based solvers.
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub backups: u64,
    pub iterations: u64,
    pub scc_count: usize,
    pub max_scc: usize,
    pub eliminated_actions: u64,
    pub wall_time: Duration,
    pub converged: bool,
    pub v_s0: f64,
}
