//! Parallel trial execution and fixed-order aggregation.

use std::time::Instant;

use hybd_core::scenario::{run_trial_sweep, ChannelKind, PointTrial, ScenarioConfig, SchemeKind, SweepParameter};
use rayon::prelude::*;

use crate::error::{Result, SimError};

/// One aggregated (sweep value, scheme, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub scheme: SchemeKind,
    pub channel_kind: ChannelKind,
    pub sweep_param: Option<SweepParameter>,
    pub sweep_value: Option<f64>,
    pub snr_db: f64,
    pub trials: usize,
    /// `None` when the scheme is infeasible at this point.
    pub stats: Option<RowStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStats {
    pub mean_sum_rate: f64,
    pub stderr_sum_rate: f64,
    /// Smallest and largest per-user rate after averaging over trials.
    pub mean_per_user_rate_min: f64,
    pub mean_per_user_rate_max: f64,
    /// Trials whose residuals exceeded tolerance or needed regularization.
    pub flagged_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn flagged_trials(&self) -> usize {
        self.rows.iter().filter_map(|r| r.stats.map(|s| s.flagged_trials)).sum()
    }

    /// Rows of one scheme, in table order.
    pub fn scheme_rows(&self, scheme: SchemeKind) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }
}

/// All sweep points of one trial, with its wall time.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub points: Vec<PointTrial>,
    pub wall_time_secs: f64,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Run every trial of `config` on `threads` workers. The result is indexed
/// by trial and independent of scheduling.
pub fn run_trials(config: &ScenarioConfig, threads: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let points = config.sweep_points()?;
    let results: Vec<_> = pool(threads)?.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|trial_index| {
                let start = Instant::now();
                let points = run_trial_sweep(&points, trial_index)?;
                Ok(TrialRecord { trial_index, points, wall_time_secs: start.elapsed().as_secs_f64() })
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Mean and standard error over trials, plus per-user extremes.
pub fn aggregate(config: &ScenarioConfig, trials: &[TrialRecord]) -> Result<Table> {
    let points = config.sweep_points()?;
    let name = if config.name.is_empty() { "scenario" } else { config.name.as_str() };
    let sweep_param = config.sweep.as_ref().map(|s| s.parameter);
    let mut rows = Vec::new();
    for (p, point) in points.iter().enumerate() {
        for (s, &scheme) in point.config.schemes.iter().enumerate() {
            for (j, &snr_db) in point.config.snr_grid_db.iter().enumerate() {
                let feasible = trials.first().is_some_and(|t| t.points[p].outcomes[s].1.is_some());
                let stats = feasible.then(|| {
                    let outcomes: Vec<_> = trials
                        .iter()
                        .map(|t| t.points[p].outcomes[s].1.as_ref().expect("feasibility is per point"))
                        .collect();
                    let reports: Vec<_> = outcomes.iter().map(|o| &o.reports[j]).collect();
                    let n = reports.len() as f64;
                    let mean = reports.iter().map(|r| r.sum_rate).sum::<f64>() / n;
                    let stderr = if reports.len() > 1 {
                        let var = reports.iter().map(|r| (r.sum_rate - mean).powi(2)).sum::<f64>() / (n - 1.0);
                        (var / n).sqrt()
                    } else {
                        0.0
                    };
                    let users = reports[0].per_user_rate.len();
                    let per_user: Vec<f64> =
                        (0..users).map(|k| reports.iter().map(|r| r.per_user_rate[k]).sum::<f64>() / n).collect();
                    RowStats {
                        mean_sum_rate: mean,
                        stderr_sum_rate: stderr,
                        mean_per_user_rate_min: per_user.iter().copied().fold(f64::INFINITY, f64::min),
                        mean_per_user_rate_max: per_user.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        flagged_trials: outcomes.iter().filter(|o| o.flagged()).count(),
                    }
                });
                rows.push(Row {
                    scenario: name.to_string(),
                    scheme,
                    channel_kind: config.channel_kind,
                    sweep_param,
                    sweep_value: point.value,
                    snr_db,
                    trials: config.trials,
                    stats,
                });
            }
        }
    }
    Ok(Table { rows })
}

/// Run the configured sweep (or the single scenario) and aggregate it.
pub fn run_sweep(config: &ScenarioConfig, threads: usize) -> Result<Table> {
    let trials = run_trials(config, threads)?;
    aggregate(config, &trials)
}

/// The same scenario with any sweep removed.
pub fn without_sweep(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig { sweep: None, ..config.clone() }
}
