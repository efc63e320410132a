//! Invariant suite run on randomized small instances.

use hybd_core::bd::{assemble_hybrid_design, block_diagonalize, full_bd_decompose, full_complexity_bd, HybridDesign};
use hybd_core::channel::{sample_mmwave, sample_rayleigh, ArrayGeometry, MmWaveSpec, MultiUserChannel};
use hybd_core::linalg::{null_space, orthonormality_error, CMatrix, Svd, C64};
use hybd_core::power::{kkt_residual, proportional_waterfill, StreamGains};
use hybd_core::rate::{interference_leakage, sum_rate_bd_closed_form, sum_rate_general, Snr};
use hybd_core::rf::{combiner_gram_error, combiner_scores, design_rf_stage, DftCodebook, RfStage};
use hybd_core::scenario::{run_trial, ChannelKind, ScenarioConfig, SchemeKind};
use hybd_core::seed::SeedStream;
use hybd_core::system::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const DEFAULT_SEED: u64 = 2016;
const DRAWS: u64 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
}

impl InvariantCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Test hooks that deliberately break a design before it is checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Mix another user's precoder into user 0's block of every Hy-BD design.
    pub corrupt_design: bool,
}

struct Suite {
    checks: Vec<InvariantCheck>,
}

impl Suite {
    /// Record the worst residual seen for `name`.
    fn record(&mut self, name: &'static str, residual: f64, tolerance: f64) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => c.residual = c.residual.max(residual),
            None => self.checks.push(InvariantCheck { name, residual, tolerance }),
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn corrupt(design: &mut HybridDesign) {
    let n = design.streams_per_user;
    let leak = design.baseband_precoder.columns(n, n).into_owned();
    let mut block = design.baseband_precoder.columns_mut(0, n);
    block += leak * C64::new(0.1, 0.0);
}

fn small_system() -> SystemConfig {
    SystemConfig::hybrid(16, 4, 3, 2, 2)
}

fn check_design(
    suite: &mut Suite,
    channel: &MultiUserChannel,
    design: &HybridDesign,
    label: &'static str,
) -> Result<()> {
    suite.record(label, interference_leakage(channel, design)?, 1e-9);
    Ok(())
}

fn check_channel(suite: &mut Suite, channel: &MultiUserChannel, options: ValidateOptions) -> Result<()> {
    let system = small_system();
    let streams = system.streams_per_user;
    let weights = [1.0, 2.0, 0.5];
    let snr = Snr::from_db(0.0);

    let rf: RfStage = design_rf_stage(channel, &system)?;
    for w in &rf.combiners {
        suite.record("rf_combiner_orthonormal", combiner_gram_error(w), 1e-12);
    }
    let n_bs = channel.n_bs() as f64;
    let modulus = rf.precoder.matrix.iter().map(|z| (z.norm() - n_bs.powf(-0.5)).abs()).fold(0.0, f64::max);
    suite.record("rf_precoder_constant_modulus", modulus, 1e-12);
    let h_int = &rf.equivalent.intermediate;
    let egt = (0..h_int.nrows())
        .map(|i| {
            let l1: f64 = h_int.row(i).iter().map(|z| z.norm()).sum();
            let diag = rf.equivalent.full[(i, i)];
            (diag - C64::new(l1 / n_bs.sqrt(), 0.0)).norm() / l1.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    suite.record("egt_diagonal_equals_row_l1", egt, 1e-10);

    let hybrid_bd = block_diagonalize(&rf.equivalent)?;
    let full_bd = full_bd_decompose(channel)?;
    for (bd, label) in [(&hybrid_bd, "hybd"), (&full_bd, "full_bd")] {
        let retained = bd.subchannels.retained_gains(streams)?;
        let gains = StreamGains::from_singular_values(&retained, streams, snr.linear())?;
        let budget = (system.users * streams) as f64;
        let allocation = proportional_waterfill(&gains, &weights, budget)?;
        suite.record("waterfill_kkt", kkt_residual(&allocation, &gains), 1e-8);
        let spent: f64 = allocation.lambda.iter().sum();
        suite.record("waterfill_budget", (spent - budget).abs() / budget, 1e-10);
        suite.record("waterfill_nonnegative", allocation.lambda.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max), 0.0);

        let mut design = if label == "hybd" {
            assemble_hybrid_design(&rf, bd, streams, &allocation)?
        } else {
            full_complexity_bd(channel, bd, streams, &allocation)?
        };
        if label == "hybd" && options.corrupt_design {
            corrupt(&mut design);
        }
        suite.record("transmit_power_constraint", design.power_constraint_error(), 1e-10);
        if label == "hybd" {
            check_design(suite, channel, &design, "hybd_interference_nulling")?;
        } else {
            check_design(suite, channel, &design, "full_bd_interference_nulling")?;
        }
        for m in &design.baseband_combiners {
            suite.record("baseband_combiner_orthonormal", orthonormality_error(m), 1e-10);
        }
        let general = sum_rate_general(channel, &design, snr)?;
        let closed = sum_rate_bd_closed_form(&bd.subchannels, &allocation, design.power_scale, streams, snr)?;
        suite.record(
            "closed_form_rate_consistency",
            (general.sum_rate - closed.sum_rate).abs() / closed.sum_rate,
            1e-9,
        );
        let lower = sum_rate_general(channel, &design, Snr::from_db(-10.0))?;
        suite.record("rate_nondecreasing_in_snr", (lower.sum_rate - general.sum_rate).max(0.0), 0.0);
    }
    Ok(())
}

/// Run every invariant with randomness derived from `seed`.
pub fn run_invariants(seed: u64, options: ValidateOptions) -> Result<Vec<InvariantCheck>> {
    let mut suite = Suite { checks: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..DRAWS {
        let (rows, cols) = (rng.random_range(1..7), rng.random_range(1..9));
        let a = random_matrix(&mut rng, rows, cols);
        let svd = Svd::new(&a);
        let sigma =
            CMatrix::from_diagonal(&svd.singular_values.iter().map(|&s| C64::new(s, 0.0)).collect::<Vec<_>>().into());
        let rebuilt = &svd.u * sigma * svd.v.adjoint();
        suite.record("svd_reconstruction", (rebuilt - &a).norm() / a.norm(), 1e-12);
        suite.record("svd_orthonormal_factors", orthonormality_error(&svd.u).max(orthonormality_error(&svd.v)), 1e-12);
        let sorted = svd.singular_values.windows(2).all(|w| w[0] >= w[1]);
        suite.record("svd_sorted_descending", if sorted { 0.0 } else { 1.0 }, 0.0);

        let wide = random_matrix(&mut rng, rows, rows + cols);
        if let Some(n) = null_space(&wide) {
            suite.record("null_space_annihilates", (&wide * &n).norm() / wide.norm(), 1e-12);
            suite.record("null_space_orthonormal", orthonormality_error(&n), 1e-12);
        }
    }

    for n in [2usize, 4, 8, 16] {
        let cb = DftCodebook::new(n)?;
        suite.record("dft_codebook_unitary", orthonormality_error(&cb.columns), 1e-12);
        let geom = ArrayGeometry::ula(n);
        let upa = ArrayGeometry::upa_square(n);
        for _ in 0..4 {
            let (az, el) = (rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5));
            for g in [geom, upa] {
                suite.record("array_response_unit_norm", (g.response(az, el)?.norm() - 1.0).abs(), 1e-12);
            }
        }
    }

    let system = small_system();
    let spec = MmWaveSpec { clusters: 3, paths_per_cluster: 4, ..MmWaveSpec::default() };
    let (bs, ms) = (ArrayGeometry::ula(system.n_bs), ArrayGeometry::ula(system.n_ms));
    let betas: Vec<f64> = (0..system.users).map(|_| rng.random_range(0.5..1.5)).collect();
    let trial_seed: u64 = rng.random();
    for trial in 0..DRAWS {
        let seeds = SeedStream::new(trial_seed, trial);
        let rayleigh = sample_rayleigh(&seeds, &betas, bs, ms)?;
        let mmwave = sample_mmwave(&seeds, &spec, &betas, bs, ms)?;
        for channel in [&rayleigh, &mmwave] {
            let cb = DftCodebook::new(system.n_ms)?;
            let rf = design_rf_stage(channel, &system)?;
            for (h, w) in channel.per_user_matrix.iter().zip(&rf.combiners) {
                let scores = combiner_scores(h, &cb)?;
                let mut best = scores.clone();
                best.sort_by(|a, b| b.total_cmp(a));
                let chosen: f64 = w.selected_indices.iter().map(|&i| scores[i]).sum();
                let optimum: f64 = best[..system.rf_chains_ms].iter().sum();
                suite.record("combiner_selection_optimal", (optimum - chosen) / optimum, 1e-12);
            }
            check_channel(&mut suite, channel, options)?;
        }
    }

    let mut energy = [0.0f64; 2];
    let draws = 2000u64;
    let unit = [1.0; 1];
    let (bs, ms) = (ArrayGeometry::ula(8), ArrayGeometry::ula(4));
    for trial in 0..draws {
        let seeds = SeedStream::new(trial_seed ^ 0x5eed, trial);
        let r = sample_rayleigh(&seeds, &unit, bs, ms)?;
        let m = sample_mmwave(&seeds, &MmWaveSpec::default(), &unit, bs, ms)?;
        energy[0] += r.normalized(0).norm_squared() / 32.0;
        energy[1] += m.normalized(0).norm_squared() / 32.0;
    }
    suite.record("rayleigh_unit_energy", (energy[0] / draws as f64 - 1.0).abs(), 0.05);
    suite.record("mmwave_unit_energy", (energy[1] / draws as f64 - 1.0).abs(), 0.05);

    let config = ScenarioConfig {
        name: "validate".into(),
        system: small_system(),
        channel_kind: ChannelKind::Rayleigh,
        mmwave: None,
        geometry_bs: None,
        geometry_ms: None,
        beta_range: [0.5, 1.5],
        snr_grid_db: vec![-10.0, 0.0],
        trials: 1,
        master_seed: trial_seed,
        schemes: vec![SchemeKind::Hybd, SchemeKind::FullBd],
        sweep: None,
    };
    let same = run_trial(&config, 7)? == run_trial(&config, 7)?;
    suite.record("trial_determinism", if same { 0.0 } else { 1.0 }, 0.0);

    Ok(suite.checks)
}

/// Print one line per invariant; returns the number of failures.
pub fn report(checks: &[InvariantCheck], out: &mut impl std::io::Write) -> std::io::Result<usize> {
    let mut failures = 0;
    for c in checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        failures += usize::from(!c.passed());
        writeln!(out, "{status} {:<32} residual={:<12.3e} tolerance={:.1e}", c.name, c.residual, c.tolerance)?;
    }
    writeln!(out, "{} invariants, {failures} failed", checks.len())?;
    Ok(failures)
}
