//! Spectral efficiency: the general interference-aware sum rate, the
//! interference-free closed form of block diagonalization, and the
//! single-path large-array approximation. Noise power is fixed to 1, so the
//! SNR is the transmit power.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bd::{EffectiveSubchannels, HybridDesign};
use crate::channel::MultiUserChannel;
use crate::error::{invalid, Result};
use crate::linalg::{log_det_identity_plus, re, CMatrix, C64};
use crate::power::{proportional_waterfill, AllocationResult, StreamGains};

/// Transmit-power-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Snr(f64);

impl Snr {
    pub fn from_db(db: f64) -> Self {
        Snr(10f64.powf(db / 10.0))
    }

    pub fn from_linear(linear: f64) -> Self {
        Snr(linear)
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Bits/s/Hz per user.
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub scheme_label: String,
    pub snr_db: f64,
    /// Set when an interference-plus-noise covariance needed a ridge to be
    /// factorized.
    pub regularized: bool,
}

impl RateReport {
    fn new(per_user_rate: Vec<f64>, scheme_label: &str, snr: Snr, regularized: bool) -> Self {
        let sum_rate = per_user_rate.iter().sum();
        RateReport { per_user_rate, sum_rate, scheme_label: scheme_label.into(), snr_db: snr.db(), regularized }
    }
}

/// Cross gains `M_i^H W_i^H H_i F B` for every receiving user `i`; the
/// column block `k` of entry `i` is what user `i` sees of user `k`'s streams.
pub fn cross_gains(channel: &MultiUserChannel, design: &HybridDesign) -> Result<Vec<CMatrix>> {
    let users = design.users();
    if channel.users() != users {
        return Err(invalid!("design has {users} users, channel has {}", channel.users()));
    }
    let transmit = design.transmit_matrix();
    if transmit.nrows() != channel.n_bs() {
        return Err(invalid!("design drives {} antennas, channel has {}", transmit.nrows(), channel.n_bs()));
    }
    (0..users)
        .map(|i| {
            let filter = design.receive_filter(i);
            if filter.ncols() != channel.n_ms() {
                return Err(invalid!("receive filter does not match {} antennas", channel.n_ms()));
            }
            Ok(filter * &channel.per_user_matrix[i] * &transmit)
        })
        .collect()
}

/// `max_{i != k} ||M_i^H H_i B_k||_F / ||M_k^H H_k B_k||_F`.
pub fn interference_leakage(channel: &MultiUserChannel, design: &HybridDesign) -> Result<f64> {
    let gains = cross_gains(channel, design)?;
    let n_s = design.streams_per_user;
    let mut worst: f64 = 0.0;
    for k in 0..gains.len() {
        let own = gains[k].columns(k * n_s, n_s).norm();
        for (i, g) in gains.iter().enumerate() {
            if i != k {
                worst = worst.max(g.columns(k * n_s, n_s).norm() / own);
            }
        }
    }
    Ok(worst)
}

/// Lower Cholesky factor of a Hermitian positive definite matrix, with a
/// trace-scaled ridge when the plain factorization fails.
fn factor_covariance(r: CMatrix) -> (CMatrix, bool) {
    if let Some(chol) = r.clone().cholesky() {
        return (chol.l(), false);
    }
    let n = r.nrows();
    let ridge = 1e-12 * r.trace().re / n as f64;
    let mut ridge_scale = 1.0;
    loop {
        let shifted = &r + CMatrix::identity(n, n) * re(ridge * ridge_scale);
        if let Some(chol) = shifted.cholesky() {
            return (chol.l(), true);
        }
        ridge_scale *= 10.0;
    }
}

/// `sum_k log2 det(I + R_k^{-1} S_k)` with signal `S_k` and
/// interference-plus-noise `R_k` both taken from the actual transceiver.
pub fn sum_rate_general(channel: &MultiUserChannel, design: &HybridDesign, snr: Snr) -> Result<RateReport> {
    let gains = cross_gains(channel, design)?;
    let n_s = design.streams_per_user;
    let users = gains.len();
    let p = snr.linear() / (users * n_s) as f64;
    let mut rates = Vec::with_capacity(users);
    let mut regularized = false;
    for (k, g) in gains.iter().enumerate() {
        let own = g.columns(k * n_s, n_s);
        let signal = own * own.adjoint() * re(p);
        let noise_filter = match &design.rf_combiners {
            Some(ws) => ws[k].matrix.clone() * &design.baseband_combiners[k],
            None => design.baseband_combiners[k].clone(),
        };
        let mut covariance = noise_filter.adjoint() * &noise_filter;
        for i in (0..users).filter(|&i| i != k) {
            let cross = g.columns(i * n_s, n_s);
            covariance += cross * cross.adjoint() * re(p);
        }
        let (l, ridged) = factor_covariance(covariance);
        regularized |= ridged;
        let half = l.solve_lower_triangular(&signal).expect("Cholesky factor has a nonzero diagonal");
        let whitened = l.solve_lower_triangular(&half.adjoint()).expect("Cholesky factor has a nonzero diagonal");
        rates.push(log_det_identity_plus(&whitened) / LN_2);
    }
    Ok(RateReport::new(rates, design.scheme.label(), snr, regularized))
}

/// Interference-free rate `sum_k sum_i log2(1 + p lambda_ki c^2 sigma_ki^2)`
/// where `c` is the global power scale applied after loading.
pub fn sum_rate_bd_closed_form(
    subchannels: &EffectiveSubchannels,
    allocation: &AllocationResult,
    power_scale: f64,
    streams: usize,
    snr: Snr,
) -> Result<RateReport> {
    let retained = subchannels.retained_gains(streams)?;
    let users = retained.len();
    if allocation.lambda.len() != users * streams {
        return Err(invalid!("allocation does not match {users} users x {streams} streams"));
    }
    let p = snr.linear() / (users * streams) as f64;
    let rates = retained
        .iter()
        .enumerate()
        .map(|(k, sigmas)| {
            sigmas
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let scaled = power_scale * s;
                    (p * allocation.lambda[k * streams + i] * scaled * scaled).ln_1p() / LN_2
                })
                .sum()
        })
        .collect();
    Ok(RateReport::new(rates, "bd_closed_form", snr, false))
}

/// Large-array single-path approximation: a diagonal equivalent channel
/// with gains `sqrt(n_bs n_ms) |alpha_k|`, water-filled over the `K` streams.
pub fn approx_rate_single_path(
    alphas: &[C64],
    n_bs: usize,
    n_ms: usize,
    snr: Snr,
    weights: Option<&[f64]>,
) -> Result<RateReport> {
    let users = alphas.len();
    if users == 0 {
        return Err(invalid!("at least one user is required"));
    }
    let array = (n_bs * n_ms) as f64;
    let p = snr.linear() / users as f64;
    let gains = StreamGains::new(alphas.iter().map(|a| p * array * a.norm_sqr()).collect())?;
    let unit = alloc::vec![1.0; users];
    let allocation = proportional_waterfill(&gains, weights.unwrap_or(&unit), users as f64)?;
    let rates = gains.gamma.iter().zip(&allocation.lambda).map(|(g, l)| (g * l).ln_1p() / LN_2).collect();
    Ok(RateReport::new(rates, "single_path_analytic", snr, false))
}
