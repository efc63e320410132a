//! Reference solutions that share no code with the library paths they check.
#![allow(dead_code)]

use std::f64::consts::PI;

use hybd_core::linalg::{CMatrix, C64};

/// Weighted water-filling `max sum w_i ln(1 + g_i l_i)` s.t. `sum l_i = budget`,
/// solved by trying every active set.
pub fn waterfill_by_enumeration(gamma: &[f64], weights: &[f64], budget: f64) -> Vec<f64> {
    let n = gamma.len();
    assert!(n <= 16 && weights.len() == n);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let active = |i: usize| mask >> i & 1 == 1;
        let sw: f64 = (0..n).filter(|&i| active(i)).map(|i| weights[i]).sum();
        let sinv: f64 = (0..n).filter(|&i| active(i)).map(|i| 1.0 / gamma[i]).sum();
        let v = sw / (budget + sinv);
        let lambda: Vec<f64> = (0..n).map(|i| if active(i) { weights[i] / v - 1.0 / gamma[i] } else { 0.0 }).collect();
        if lambda.iter().any(|&l| l < 0.0) {
            continue;
        }
        if (0..n).any(|i| !active(i) && weights[i] * gamma[i] > v) {
            continue;
        }
        let utility: f64 = (0..n).map(|i| weights[i] * (gamma[i] * lambda[i]).ln_1p()).sum();
        if best.as_ref().is_none_or(|(u, _)| utility > *u) {
            best = Some((utility, lambda));
        }
    }
    best.expect("some active set satisfies the optimality conditions").1
}

/// Largest violation of the water-filling optimality conditions, relative
/// to the common marginal utility of the loaded streams.
pub fn kkt_violation(lambda: &[f64], gamma: &[f64], weights: &[f64], budget: f64) -> f64 {
    let marginal: Vec<f64> = (0..lambda.len()).map(|i| weights[i] * gamma[i] / (1.0 + gamma[i] * lambda[i])).collect();
    let loaded: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] > 0.0).collect();
    let v = loaded.iter().map(|&i| marginal[i]).sum::<f64>() / loaded.len() as f64;
    let mut worst = (lambda.iter().sum::<f64>() - budget).abs() / budget;
    for i in 0..lambda.len() {
        let r = if lambda[i] > 0.0 { (marginal[i] - v).abs() / v } else { (marginal[i] - v).max(0.0) / v };
        worst = worst.max(r).max(-lambda[i]);
    }
    worst
}

pub fn dft_column(n: usize, q: usize) -> Vec<C64> {
    (0..n).map(|m| C64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * (q * m) as f64 / n as f64)).collect()
}

/// `sum_n |d_q^H h_n|` straight from the definition.
pub fn combiner_score(h: &CMatrix, q: usize) -> f64 {
    let d = dft_column(h.nrows(), q);
    (0..h.ncols()).map(|c| (0..h.nrows()).map(|r| d[r].conj() * h[(r, c)]).sum::<C64>().norm()).sum()
}

/// The size-`m` codebook subset maximizing the sum of squared scores,
/// found by exhaustive search. Indices ascending.
pub fn best_combiner_subset(h: &CMatrix, m: usize) -> (Vec<usize>, f64) {
    let n = h.nrows();
    let scores: Vec<f64> = (0..n).map(|q| combiner_score(h, q)).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let value: f64 = subset.iter().map(|&q| scores[q] * scores[q]).sum();
        if value > best.1 {
            best = (subset, value);
        }
    }
    best
}
