//! Stream power loading for the (weighted) sum rate.
//!
//! Maximizes `sum_n w_n ln(1 + gamma_n lambda_n)` subject to
//! `sum_n lambda_n = budget`, `lambda_n >= 0`. The optimum is
//! `lambda_n = max(w_n / v - 1 / gamma_n, 0)` where the multiplier `v` is the
//! root of the nonincreasing function `g(v) = sum_n lambda_n(v) - budget`.
//! The root is bracketed and bisected, then polished by solving the budget
//! equation in closed form on the identified active set.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Per-stream SNR gains `gamma_n = snr / total_streams * sigma_n^2`, users
/// in order, streams within a user in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamGains {
    pub gamma: Vec<f64>,
}

impl StreamGains {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(invalid!("stream gains must be finite and nonnegative, got {g}"));
        }
        Ok(StreamGains { gamma })
    }

    /// Gains from the retained singular values of every user (`streams`
    /// values each) at linear SNR `snr`.
    pub fn from_singular_values(per_user: &[Vec<f64>], streams: usize, snr: f64) -> Result<Self> {
        let total = per_user.len() * streams;
        let mut gamma = Vec::with_capacity(total);
        for values in per_user {
            if values.len() < streams {
                return Err(invalid!("user has {} singular values, need {streams}", values.len()));
            }
            gamma.extend(values[..streams].iter().map(|s| snr / total as f64 * s * s));
        }
        Self::new(gamma)
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub lambda: Vec<f64>,
    /// The multiplier `v` of the budget constraint.
    pub water_level_multiplier: f64,
    pub weights_expanded: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfillOptions {
    /// Absolute tolerance on `sum lambda - budget` for the bisection stage.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for WaterfillOptions {
    fn default() -> Self {
        WaterfillOptions { tolerance: 1e-10, max_iterations: 200 }
    }
}

/// Repeat each user weight once per stream.
pub fn expand_weights(weights: &[f64], streams: usize) -> Result<Vec<f64>> {
    if weights.is_empty() || !streams.is_multiple_of(weights.len()) {
        return Err(invalid!("{streams} streams cannot be split evenly over {} users", weights.len()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(invalid!("weights must be positive, got {w}"));
    }
    let per_user = streams / weights.len();
    Ok(weights.iter().flat_map(|&w| core::iter::repeat_n(w, per_user)).collect())
}

fn loads<'a>(gamma: &'a [f64], weights: &'a [f64], v: f64) -> impl Iterator<Item = f64> + 'a {
    gamma.iter().zip(weights).map(move |(&g, &w)| if g > 0.0 { (w / v - 1.0 / g).max(0.0) } else { 0.0 })
}

/// Proportional water-filling with one weight per user.
pub fn proportional_waterfill(gains: &StreamGains, weights: &[f64], budget: f64) -> Result<AllocationResult> {
    proportional_waterfill_with(gains, weights, budget, WaterfillOptions::default())
}

pub fn proportional_waterfill_with(
    gains: &StreamGains,
    weights: &[f64],
    budget: f64,
    options: WaterfillOptions,
) -> Result<AllocationResult> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(invalid!("power budget must be positive, got {budget}"));
    }
    let gamma = &gains.gamma;
    let weights_expanded = expand_weights(weights, gamma.len())?;
    if !gamma.iter().any(|&g| g > 0.0) {
        return Err(Error::NoUsableStreams);
    }

    // The strongest stream alone absorbs the budget at `lo`; nobody is
    // active above `hi`.
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (&g, &w) in gamma.iter().zip(&weights_expanded) {
        if g > 0.0 {
            lo = lo.min(w / (budget + 1.0 / g));
            hi = hi.max(w * g * (1.0 + budget));
        }
    }
    let excess = |v: f64| loads(gamma, &weights_expanded, v).sum::<f64>() - budget;
    for _ in 0..options.max_iterations {
        let mid = 0.5 * (lo + hi);
        let e = excess(mid);
        if e > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if e.abs() <= options.tolerance || mid == lo && mid == hi {
            break;
        }
    }
    let mut v = 0.5 * (lo + hi);

    // Closed-form multiplier on the active set, repeated until the set is
    // self-consistent.
    for _ in 0..gamma.len() + 1 {
        let (mut w_sum, mut inv_sum) = (0.0, 0.0);
        for ((&g, &w), l) in gamma.iter().zip(&weights_expanded).zip(loads(gamma, &weights_expanded, v)) {
            if l > 0.0 {
                w_sum += w;
                inv_sum += 1.0 / g;
            }
        }
        if w_sum == 0.0 {
            break;
        }
        let polished = w_sum / (budget + inv_sum);
        if polished == v {
            break;
        }
        let same_set = loads(gamma, &weights_expanded, polished)
            .zip(loads(gamma, &weights_expanded, v))
            .all(|(a, b)| (a > 0.0) == (b > 0.0));
        v = polished;
        if same_set {
            break;
        }
    }

    let lambda: Vec<f64> = loads(gamma, &weights_expanded, v).collect();
    Ok(AllocationResult { lambda, water_level_multiplier: v, weights_expanded, budget })
}

/// Classic water-filling: proportional water-filling with unit weights.
pub fn waterfill(gains: &StreamGains, budget: f64) -> Result<AllocationResult> {
    proportional_waterfill(gains, &[1.0], budget)
}

/// Sum of the KKT violations of an allocation: complementary slackness,
/// primal feasibility (budget and sign) and dual feasibility. Zero exactly
/// at the optimum.
pub fn kkt_residual(result: &AllocationResult, gains: &StreamGains) -> f64 {
    let v = result.water_level_multiplier;
    let mut slackness: f64 = 0.0;
    let mut negative = 0.0;
    let mut dual = 0.0;
    for ((&l, &g), &w) in result.lambda.iter().zip(&gains.gamma).zip(&result.weights_expanded) {
        let marginal = w * g / (1.0 + g * l);
        slackness = slackness.max((l * (v - marginal)).abs());
        negative += (-l).max(0.0);
        if l == 0.0 {
            dual += (marginal - v).max(0.0);
        }
    }
    let budget = (result.lambda.iter().sum::<f64>() - result.budget).abs();
    slackness + budget + negative + dual
}

/// Objective `sum_n w_n ln(1 + gamma_n lambda_n)`.
pub fn weighted_log_utility(lambda: &[f64], gains: &StreamGains, weights_expanded: &[f64]) -> f64 {
    lambda.iter().zip(&gains.gamma).zip(weights_expanded).map(|((&l, &g), &w)| w * (g * l).ln_1p()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gains(g: &[f64]) -> StreamGains {
        StreamGains::new(g.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_split() {
        let r = proportional_waterfill(&gains(&[1.0, 1.0]), &[1.0, 1.0], 2.0).unwrap();
        assert!((r.lambda[0] - 1.0).abs() < 1e-12 && (r.lambda[1] - 1.0).abs() < 1e-12);
        assert!((r.water_level_multiplier - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unequal_gains_hand_solution() {
        let g = gains(&[4.0, 1.0]);
        let r = waterfill(&g, 2.0).unwrap();
        assert!((r.water_level_multiplier - 8.0 / 13.0).abs() < 1e-12);
        assert!((r.lambda[0] - 1.375).abs() < 1e-12);
        assert!((r.lambda[1] - 0.625).abs() < 1e-12);
        assert!(kkt_residual(&r, &g) <= 1e-8);
    }

    #[test]
    fn weighted_hand_solution() {
        let g = gains(&[1.0, 1.0]);
        let r = proportional_waterfill(&g, &[2.0, 1.0], 2.0).unwrap();
        assert!((r.water_level_multiplier - 0.75).abs() < 1e-12);
        assert!((r.lambda[0] - 5.0 / 3.0).abs() < 1e-12);
        assert!((r.lambda[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(kkt_residual(&r, &g) <= 1e-8);
    }

    #[test]
    fn weak_stream_is_shut_off() {
        let g = gains(&[10.0, 1e-6]);
        let r = waterfill(&g, 2.0).unwrap();
        assert_eq!(r.lambda[1], 0.0);
        assert!((r.lambda[0] - 2.0).abs() < 1e-12);
        assert!(1.0 / r.water_level_multiplier < 1.0 / 1e-6);
        assert!(kkt_residual(&r, &g) <= 1e-8);
    }

    #[test]
    fn waterfill_is_unit_weight_proportional() {
        let g = gains(&[3.0, 0.2, 1.1, 0.05]);
        assert_eq!(waterfill(&g, 4.0).unwrap().lambda, proportional_waterfill(&g, &[1.0; 4], 4.0).unwrap().lambda);
    }

    #[test]
    fn zero_gain_streams() {
        let g = gains(&[0.0, 2.0]);
        let r = waterfill(&g, 2.0).unwrap();
        assert_eq!(r.lambda[0], 0.0);
        assert!((r.lambda[1] - 2.0).abs() < 1e-12);
        assert_eq!(waterfill(&gains(&[0.0, 0.0]), 2.0), Err(Error::NoUsableStreams));
    }

    #[test]
    fn residual_detects_perturbation() {
        let g = gains(&[4.0, 1.0]);
        let mut r = waterfill(&g, 2.0).unwrap();
        r.lambda[0] += 0.1;
        r.lambda[1] -= 0.1;
        assert!(kkt_residual(&r, &g) > 1e-3);
        let uniform = AllocationResult {
            lambda: vec![1.0; 3],
            water_level_multiplier: 0.5,
            weights_expanded: vec![1.0; 3],
            budget: 3.0,
        };
        assert_eq!(kkt_residual(&uniform, &gains(&[1.0; 3])), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(StreamGains::new(vec![-1.0]).is_err());
        assert!(proportional_waterfill(&gains(&[1.0, 1.0, 1.0]), &[1.0, 1.0], 3.0).is_err());
        assert!(proportional_waterfill(&gains(&[1.0]), &[0.0], 1.0).is_err());
        assert!(waterfill(&gains(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn gains_from_singular_values() {
        let g = StreamGains::from_singular_values(&[vec![2.0, 1.0, 0.5], vec![3.0, 1.0, 0.1]], 2, 8.0).unwrap();
        assert_eq!(g.gamma, vec![8.0, 2.0, 18.0, 2.0]);
    }
}
