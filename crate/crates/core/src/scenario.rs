//! Scenario description and the pure per-trial Monte-Carlo kernel.
//!
//! A trial draws one channel from the stream derived from
//! `(master_seed, trial_index)`, designs every requested scheme on it and
//! evaluates the exact sum rate at each SNR of the grid. Everything here is
//! deterministic; parallel execution and aggregation live in the harness.

use crate::bd::{
    assemble_hybrid_design, block_diagonalize, full_bd_decompose, full_complexity_bd, BlockDiagonalization,
    HybridDesign,
};
use crate::channel::{
    sample_large_scale, sample_mmwave, sample_rayleigh, sample_single_path, ArrayGeometry, MmWaveSpec, MultiUserChannel,
};
use crate::error::{invalid, Error, Result};
use crate::power::{proportional_waterfill, StreamGains};
use crate::rate::{approx_rate_single_path, interference_leakage, sum_rate_general, RateReport, Snr};
use crate::rf::{design_rf_stage, RfStage};
use crate::seed::SeedStream;
use crate::system::SystemConfig;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Leakage and power-constraint tolerance above which a trial is flagged.
pub const TRIAL_RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChannelKind {
    Rayleigh,
    Mmwave,
    SinglePath,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Mmwave => "mmwave",
            ChannelKind::SinglePath => "single_path",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SchemeKind {
    Hybd,
    FullBd,
    SinglePathAnalytic,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Hybd => "hybd",
            SchemeKind::FullBd => "full_bd",
            SchemeKind::SinglePathAnalytic => "single_path_analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepParameter {
    Snr,
    NS,
    K,
}

impl SweepParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParameter::Snr => "snr",
            SweepParameter::NS => "n_s",
            SweepParameter::K => "k",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// When sweeping streams or users, keep `rf_chains_ms = streams_per_user`
    /// (for `n_s`) and `rf_chains_bs = users * rf_chains_ms`.
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub rf_chains_follow: bool,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

#[cfg(feature = "serde")]
fn default_beta_range() -> [f64; 2] {
    [0.5, 1.5]
}

#[cfg(feature = "serde")]
fn default_schemes() -> Vec<SchemeKind> {
    alloc::vec![SchemeKind::Hybd, SchemeKind::FullBd]
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioConfig {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    pub system: SystemConfig,
    pub channel_kind: ChannelKind,
    /// Clustered-channel parameters; also supplies the angle ranges of
    /// single-path draws. Defaults to [`MmWaveSpec::default`].
    #[cfg_attr(feature = "serde", serde(default))]
    pub mmwave: Option<MmWaveSpec>,
    /// Defaults to a half-wavelength ULA with `system.n_bs` elements.
    #[cfg_attr(feature = "serde", serde(default))]
    pub geometry_bs: Option<ArrayGeometry>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub geometry_ms: Option<ArrayGeometry>,
    #[cfg_attr(feature = "serde", serde(default = "default_beta_range"))]
    pub beta_range: [f64; 2],
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_schemes"))]
    pub schemes: Vec<SchemeKind>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sweep: Option<Sweep>,
}

impl ScenarioConfig {
    pub fn geometry_bs(&self) -> ArrayGeometry {
        self.geometry_bs.unwrap_or_else(|| ArrayGeometry::ula(self.system.n_bs))
    }

    pub fn geometry_ms(&self) -> ArrayGeometry {
        self.geometry_ms.unwrap_or_else(|| ArrayGeometry::ula(self.system.n_ms))
    }

    pub fn mmwave_spec(&self) -> MmWaveSpec {
        self.mmwave.unwrap_or_default()
    }

    /// Structural validity: everything except scheme feasibility, which is
    /// reported per sweep point.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid!("trials must be at least 1"));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid!("snr_grid_db must be a nonempty list of finite values"));
        }
        let [lo, hi] = self.beta_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid!("beta_range [{lo}, {hi}] must be a positive interval"));
        }
        if self.schemes.is_empty() {
            return Err(invalid!("at least one scheme is required"));
        }
        let (bs, ms) = (self.geometry_bs(), self.geometry_ms());
        bs.validate()?;
        ms.validate()?;
        if bs.elements_total != self.system.n_bs || ms.elements_total != self.system.n_ms {
            return Err(invalid!(
                "array sizes {}x{} disagree with n_bs={} n_ms={}",
                bs.elements_total,
                ms.elements_total,
                self.system.n_bs,
                self.system.n_ms
            ));
        }
        self.mmwave_spec().validate()?;
        self.system.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid!("sweep needs at least one value"));
            }
            for &v in &sweep.values {
                let integral = v.fract() == 0.0 && v >= 1.0;
                if sweep.parameter != SweepParameter::Snr && !integral {
                    return Err(invalid!(
                        "{} sweep values must be positive integers, got {v}",
                        sweep.parameter.label()
                    ));
                }
                if !v.is_finite() {
                    return Err(invalid!("sweep values must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Whether `scheme` can be designed for this configuration.
    pub fn scheme_feasibility(&self, scheme: SchemeKind) -> Result<()> {
        self.system.validate()?;
        match scheme {
            SchemeKind::Hybd => self.system.validate_hybrid(),
            SchemeKind::FullBd => self.system.validate_full_bd(),
            SchemeKind::SinglePathAnalytic => {
                if self.channel_kind == ChannelKind::SinglePath {
                    Ok(())
                } else {
                    Err(Error::DesignInfeasible("the single-path approximation needs single-path channels".into()))
                }
            }
        }
    }

    /// The configuration at one sweep value. SNR sweeps replace the grid.
    pub fn at_sweep_value(&self, parameter: SweepParameter, value: f64, rf_chains_follow: bool) -> Result<Self> {
        let mut point = self.clone();
        point.sweep = None;
        let sys = &mut point.system;
        match parameter {
            SweepParameter::Snr => point.snr_grid_db = alloc::vec![value],
            SweepParameter::NS => {
                sys.streams_per_user = value as usize;
                if rf_chains_follow {
                    sys.rf_chains_ms = sys.streams_per_user;
                    sys.rf_chains_bs = sys.users * sys.rf_chains_ms;
                }
            }
            SweepParameter::K => {
                let users = value as usize;
                if !sys.weights.is_empty() {
                    let first = sys.weights[0];
                    if sys.weights.iter().any(|&w| w != first) {
                        return Err(invalid!("a user sweep needs equal weights"));
                    }
                    sys.weights = alloc::vec![first; users];
                }
                sys.users = users;
                if rf_chains_follow {
                    sys.rf_chains_bs = sys.users * sys.rf_chains_ms;
                }
            }
        }
        Ok(point)
    }

    /// Sweep points in order, or the configuration itself when unswept.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        match &self.sweep {
            None => Ok(alloc::vec![SweepPoint { value: None, config: self.clone() }]),
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    Ok(SweepPoint {
                        value: Some(v),
                        config: self.at_sweep_value(sweep.parameter, v, sweep.rf_chains_follow)?,
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub config: ScenarioConfig,
}

/// One scheme evaluated on one channel draw over the SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: SchemeKind,
    /// One report per entry of the SNR grid.
    pub reports: Vec<RateReport>,
    /// Water-level multiplier `v` per SNR (NaN for the analytic scheme).
    pub water_levels: Vec<f64>,
    /// Worst inter-user leakage ratio per SNR.
    pub nulling_residuals: Vec<f64>,
    pub power_errors: Vec<f64>,
    /// Combiner codebook indices per user, for the hybrid scheme.
    pub combiner_indices: Option<Vec<Vec<usize>>>,
}

impl SchemeOutcome {
    pub fn flagged(&self) -> bool {
        self.nulling_residuals.iter().chain(&self.power_errors).any(|&r| r.is_nan() || r > TRIAL_RESIDUAL_TOLERANCE)
            || self.reports.iter().any(|r| r.regularized)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub large_scale: Vec<f64>,
    pub outcomes: Vec<SchemeOutcome>,
    /// Filled in by callers that time the trial.
    pub wall_time_secs: f64,
}

impl TrialResult {
    pub fn flagged(&self) -> bool {
        self.outcomes.iter().any(SchemeOutcome::flagged)
    }

    pub fn outcome(&self, scheme: SchemeKind) -> Option<&SchemeOutcome> {
        self.outcomes.iter().find(|o| o.scheme == scheme)
    }
}

/// Draw the trial's channel for `config`.
pub fn sample_channel(config: &ScenarioConfig, trial_index: u64) -> Result<MultiUserChannel> {
    let seeds = SeedStream::new(config.master_seed, trial_index);
    let betas = sample_large_scale(&seeds, config.system.users, config.beta_range);
    let (bs, ms) = (config.geometry_bs(), config.geometry_ms());
    match config.channel_kind {
        ChannelKind::Rayleigh => sample_rayleigh(&seeds, &betas, bs, ms),
        ChannelKind::Mmwave => sample_mmwave(&seeds, &config.mmwave_spec(), &betas, bs, ms),
        ChannelKind::SinglePath => {
            let spec = config.mmwave_spec();
            sample_single_path(&seeds, spec.aod_mean_range, spec.aoa_mean_range, &betas, bs, ms)
        }
    }
}

/// Scheme state that does not depend on the SNR or the power loads.
enum Prepared {
    Hybrid { rf: Box<RfStage>, bd: BlockDiagonalization },
    Full { bd: BlockDiagonalization },
}

fn evaluate_bd(
    prepared: &Prepared,
    channel: &MultiUserChannel,
    config: &ScenarioConfig,
    scheme: SchemeKind,
) -> Result<SchemeOutcome> {
    let streams = config.system.streams_per_user;
    let weights = config.system.user_weights();
    let bd = match prepared {
        Prepared::Hybrid { bd, .. } | Prepared::Full { bd } => bd,
    };
    let retained = bd.subchannels.retained_gains(streams)?;
    let budget = (config.system.users * streams) as f64;
    let mut outcome = SchemeOutcome {
        scheme,
        reports: Vec::new(),
        water_levels: Vec::new(),
        nulling_residuals: Vec::new(),
        power_errors: Vec::new(),
        combiner_indices: match prepared {
            Prepared::Hybrid { rf, .. } => Some(rf.combiners.iter().map(|w| w.selected_indices.clone()).collect()),
            Prepared::Full { .. } => None,
        },
    };
    for &db in &config.snr_grid_db {
        let snr = Snr::from_db(db);
        let gains = StreamGains::from_singular_values(&retained, streams, snr.linear())?;
        let allocation = proportional_waterfill(&gains, &weights, budget)?;
        let design: HybridDesign = match prepared {
            Prepared::Hybrid { rf, bd } => assemble_hybrid_design(rf, bd, streams, &allocation)?,
            Prepared::Full { bd } => full_complexity_bd(channel, bd, streams, &allocation)?,
        };
        let mut report = sum_rate_general(channel, &design, snr)?;
        report.snr_db = db;
        outcome.reports.push(report);
        outcome.water_levels.push(allocation.water_level_multiplier);
        outcome.nulling_residuals.push(interference_leakage(channel, &design)?);
        outcome.power_errors.push(design.power_constraint_error());
    }
    Ok(outcome)
}

fn evaluate_analytic(channel: &MultiUserChannel, config: &ScenarioConfig) -> Result<SchemeOutcome> {
    let paths = channel.paths.as_ref().ok_or_else(|| invalid!("analytic rate needs the channel's path gains"))?;
    let alphas: Vec<_> = paths.iter().map(|p| p[0].gain).collect();
    let weights = config.system.user_weights();
    let mut reports = Vec::new();
    for &db in &config.snr_grid_db {
        let mut report =
            approx_rate_single_path(&alphas, channel.n_bs(), channel.n_ms(), Snr::from_db(db), Some(&weights))?;
        report.snr_db = db;
        reports.push(report);
    }
    let n = reports.len();
    Ok(SchemeOutcome {
        scheme: SchemeKind::SinglePathAnalytic,
        reports,
        water_levels: alloc::vec![f64::NAN; n],
        nulling_residuals: alloc::vec![0.0; n],
        power_errors: alloc::vec![0.0; n],
        combiner_indices: None,
    })
}

/// Run one trial of `config` for every requested scheme.
pub fn run_trial(config: &ScenarioConfig, trial_index: u64) -> Result<TrialResult> {
    config.validate()?;
    for &scheme in &config.schemes {
        config.scheme_feasibility(scheme)?;
    }
    let channel = sample_channel(config, trial_index)?;
    let mut cache = TrialCache::default();
    let outcomes = config.schemes.iter().map(|&s| cache.evaluate(&channel, config, s)).collect::<Result<Vec<_>>>()?;
    Ok(TrialResult { trial_index, large_scale: channel.large_scale, outcomes, wall_time_secs: 0.0 })
}

/// Per-scheme result at one sweep point of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrial {
    pub value: Option<f64>,
    /// `None` for schemes that are infeasible at this point.
    pub outcomes: Vec<(SchemeKind, Option<SchemeOutcome>)>,
}

/// SNR- and load-independent designs kept across the points of one trial.
#[derive(Default)]
struct TrialCache {
    full: Option<Prepared>,
    hybrid: Option<(usize, Prepared)>,
}

impl TrialCache {
    fn evaluate(
        &mut self,
        channel: &MultiUserChannel,
        config: &ScenarioConfig,
        scheme: SchemeKind,
    ) -> Result<SchemeOutcome> {
        match scheme {
            SchemeKind::SinglePathAnalytic => evaluate_analytic(channel, config),
            SchemeKind::FullBd => {
                if self.full.is_none() {
                    self.full = Some(Prepared::Full { bd: full_bd_decompose(channel)? });
                }
                evaluate_bd(self.full.as_ref().expect("just filled"), channel, config, scheme)
            }
            SchemeKind::Hybd => {
                let chains = config.system.rf_chains_ms;
                if self.hybrid.as_ref().map(|(c, _)| *c) != Some(chains) {
                    let rf = design_rf_stage(channel, &config.system)?;
                    let bd = block_diagonalize(&rf.equivalent)?;
                    self.hybrid = Some((chains, Prepared::Hybrid { rf: Box::new(rf), bd }));
                }
                let (_, prepared) = self.hybrid.as_ref().expect("just filled");
                evaluate_bd(prepared, channel, config, scheme)
            }
        }
    }
}

/// Run one trial across every sweep point. The channel (and the designs
/// that do not depend on the stream count) are reused between points whose
/// user count is unchanged. Infeasible schemes are reported as `None`.
pub fn run_trial_sweep(points: &[SweepPoint], trial_index: u64) -> Result<Vec<PointTrial>> {
    let mut out = Vec::with_capacity(points.len());
    let mut current: Option<(usize, MultiUserChannel, TrialCache)> = None;
    for point in points {
        let config = &point.config;
        let users = config.system.users;
        if current.as_ref().map(|(u, _, _)| *u) != Some(users) {
            current = Some((users, sample_channel(config, trial_index)?, TrialCache::default()));
        }
        let (_, channel, cache) = current.as_mut().expect("just filled");
        let mut outcomes = Vec::with_capacity(config.schemes.len());
        for &scheme in &config.schemes {
            let outcome = match config.scheme_feasibility(scheme) {
                Ok(()) => Some(cache.evaluate(channel, config, scheme)?),
                Err(Error::DesignInfeasible(_)) | Err(Error::InvalidArgument(_)) => None,
                Err(e) => return Err(e),
            };
            outcomes.push((scheme, outcome));
        }
        out.push(PointTrial { value: point.value, outcomes });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small(kind: ChannelKind) -> ScenarioConfig {
        ScenarioConfig {
            name: "small".into(),
            system: SystemConfig::hybrid(16, 4, 2, 1, 2),
            channel_kind: kind,
            mmwave: None,
            geometry_bs: None,
            geometry_ms: None,
            beta_range: [0.5, 1.5],
            snr_grid_db: vec![-10.0, 0.0],
            trials: 2,
            master_seed: 17,
            schemes: vec![SchemeKind::Hybd, SchemeKind::FullBd],
            sweep: None,
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small(ChannelKind::Rayleigh);
        let a = run_trial(&cfg, 3).unwrap();
        let b = run_trial(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outcomes.len(), 2);
        assert!(!a.flagged());
        assert_eq!(a.outcome(SchemeKind::Hybd).unwrap().combiner_indices.as_ref().unwrap().len(), 2);
        assert_ne!(run_trial(&cfg, 4).unwrap(), a);
    }

    #[test]
    fn analytic_shares_path_draws() {
        let mut cfg = small(ChannelKind::SinglePath);
        cfg.system = SystemConfig::hybrid(16, 4, 2, 1, 1);
        cfg.schemes = vec![SchemeKind::Hybd, SchemeKind::SinglePathAnalytic];
        let t = run_trial(&cfg, 0).unwrap();
        let ch = sample_channel(&cfg, 0).unwrap();
        let alphas: Vec<_> = ch.paths.unwrap().iter().map(|p| p[0].gain).collect();
        let expect = approx_rate_single_path(&alphas, 16, 4, Snr::from_db(0.0), None).unwrap();
        let got = &t.outcome(SchemeKind::SinglePathAnalytic).unwrap().reports[1];
        assert_eq!(got.sum_rate, expect.sum_rate);
        assert!(run_trial(&small(ChannelKind::Rayleigh), 0).is_ok());
        let mut wrong = small(ChannelKind::Rayleigh);
        wrong.schemes = vec![SchemeKind::SinglePathAnalytic];
        assert!(run_trial(&wrong, 0).is_err());
    }

    #[test]
    fn infeasible_scheme_propagates() {
        let mut cfg = small(ChannelKind::Rayleigh);
        cfg.system = SystemConfig::hybrid(8, 4, 3, 1, 1);
        assert!(matches!(run_trial(&cfg, 0), Err(Error::DesignInfeasible(_))));
    }

    #[test]
    fn sweep_points_and_cache_agree_with_direct_trials() {
        let mut cfg = small(ChannelKind::Mmwave);
        cfg.sweep = Some(Sweep { parameter: SweepParameter::NS, values: vec![1.0, 2.0, 5.0], rf_chains_follow: true });
        cfg.validate().unwrap();
        let points = cfg.sweep_points().unwrap();
        assert_eq!(points[1].config.system.rf_chains_ms, 2);
        assert_eq!(points[1].config.system.rf_chains_bs, 4);
        let swept = run_trial_sweep(&points, 1).unwrap();
        for (point, result) in points.iter().zip(&swept).take(2) {
            let direct = run_trial(&point.config, 1).unwrap();
            for (scheme, outcome) in &result.outcomes {
                assert_eq!(outcome.as_ref(), direct.outcome(*scheme));
            }
        }
        assert!(swept[2].outcomes.iter().all(|(_, o)| o.is_none()));
    }

    #[test]
    fn user_sweep_resizes() {
        let mut cfg = small(ChannelKind::Rayleigh);
        cfg.system.weights = vec![2.0, 2.0];
        let p = cfg.at_sweep_value(SweepParameter::K, 3.0, true).unwrap();
        assert_eq!(p.system.weights, vec![2.0; 3]);
        assert_eq!(p.system.rf_chains_bs, 6);
        cfg.system.weights = vec![1.0, 2.0];
        assert!(cfg.at_sweep_value(SweepParameter::K, 3.0, true).is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = small(ChannelKind::Rayleigh);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small(ChannelKind::Rayleigh);
        cfg.geometry_bs = Some(ArrayGeometry::ula(8));
        assert!(cfg.validate().is_err());
        let mut cfg = small(ChannelKind::Rayleigh);
        cfg.sweep = Some(Sweep { parameter: SweepParameter::K, values: vec![1.5], rf_chains_follow: true });
        assert!(cfg.validate().is_err());
    }
}
