//! Phase-only RF stage: DFT-codebook receive combiners, the stacked
//! intermediate channel, and equal-gain transmit precoding.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;

use crate::channel::MultiUserChannel;
use crate::error::{infeasible, invalid, Result};
use crate::linalg::{CMatrix, C64};
use crate::system::SystemConfig;

/// The `n` orthonormal DFT columns `d(2 pi q / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftCodebook {
    pub columns: CMatrix,
}

impl DftCodebook {
    pub fn new(n_ms: usize) -> Result<Self> {
        if n_ms == 0 {
            return Err(invalid!("codebook size must be positive"));
        }
        let scale = 1.0 / (n_ms as f64).sqrt();
        let columns = CMatrix::from_fn(n_ms, n_ms, |m, q| {
            // Reduce q*m mod n first so large indices keep full phase precision.
            let k = (q * m) % n_ms;
            C64::from_polar(scale, 2.0 * PI * k as f64 / n_ms as f64)
        });
        Ok(DftCodebook { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Receive combiner assembled from codebook columns. `selected_indices` is
/// what a mobile feeds back so the base station can rebuild the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RfCombiner {
    pub matrix: CMatrix,
    pub selected_indices: Vec<usize>,
}

/// Entrywise l1 norm of `d_q^H H` for every codebook column.
pub fn combiner_scores(h_k: &CMatrix, codebook: &DftCodebook) -> Result<Vec<f64>> {
    if h_k.nrows() != codebook.len() {
        return Err(invalid!(
            "channel has {} receive antennas but the codebook has {} columns",
            h_k.nrows(),
            codebook.len()
        ));
    }
    let projected = codebook.columns.adjoint() * h_k;
    Ok(projected.row_iter().map(|row| row.iter().map(|z| z.norm()).sum()).collect())
}

/// Keep the `m_ms` codebook columns with the largest scores, strongest
/// first; equal scores go to the lower index.
pub fn select_rf_combiner(h_k: &CMatrix, codebook: &DftCodebook, m_ms: usize) -> Result<RfCombiner> {
    if m_ms > codebook.len() {
        return Err(invalid!("cannot select {m_ms} of {} codebook columns", codebook.len()));
    }
    let scores = combiner_scores(h_k, codebook)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(m_ms);
    let matrix = codebook.columns.select_columns(order.iter());
    Ok(RfCombiner { matrix, selected_indices: order })
}

/// Row-stack of `W_k^H H_k` in user order.
pub fn build_intermediate_channel(channel: &MultiUserChannel, combiners: &[RfCombiner]) -> Result<CMatrix> {
    if combiners.len() != channel.users() {
        return Err(invalid!("{} combiners for {} users", combiners.len(), channel.users()));
    }
    let rows: usize = combiners.iter().map(|w| w.matrix.ncols()).sum();
    let mut h_int = CMatrix::zeros(rows, channel.n_bs());
    let mut offset = 0;
    for (h, w) in channel.per_user_matrix.iter().zip(combiners) {
        if w.matrix.nrows() != h.nrows() {
            return Err(invalid!("combiner has {} rows, channel has {} receive antennas", w.matrix.nrows(), h.nrows()));
        }
        let block = w.matrix.adjoint() * h;
        h_int.rows_mut(offset, block.nrows()).copy_from(&block);
        offset += block.nrows();
    }
    Ok(h_int)
}

/// Phase-only transmit precoder with entries of modulus `1/sqrt(n_bs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfPrecoder {
    pub matrix: CMatrix,
    pub phases: DMatrix<f64>,
}

/// Phase of a complex number with `arg(0) = 0` and real negatives at `+pi`.
fn phase_of(z: C64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else if z.im == 0.0 {
        if z.re < 0.0 {
            PI
        } else {
            0.0
        }
    } else {
        z.im.atan2(z.re)
    }
}

/// Equal-gain transmission: `F(i, j) = exp(j * arg(conj(H_int(j, i)))) / sqrt(n_bs)`.
pub fn egt_precoder(h_int: &CMatrix) -> RfPrecoder {
    let n_bs = h_int.ncols();
    let scale = 1.0 / (n_bs as f64).sqrt();
    let phases = DMatrix::from_fn(n_bs, h_int.nrows(), |i, j| phase_of(h_int[(j, i)].conj()));
    let matrix = phases.map(|psi| C64::from_polar(scale, psi));
    RfPrecoder { matrix, phases }
}

/// Baseband view of the channel through the RF stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    /// `H_eq = H_int F`, square for the hybrid design.
    pub full: CMatrix,
    pub per_user_blocks: Vec<CMatrix>,
    pub intermediate: CMatrix,
}

pub fn equivalent_channel(h_int: &CMatrix, f: &RfPrecoder, combiners: &[RfCombiner]) -> Result<EquivalentChannel> {
    if h_int.ncols() != f.matrix.nrows() {
        return Err(invalid!("precoder has {} rows for {} transmit antennas", f.matrix.nrows(), h_int.ncols()));
    }
    let full = h_int * &f.matrix;
    if !full.is_square() {
        return Err(infeasible!(
            "equivalent channel is {}x{}; equal-gain precoding needs rf_chains_bs = users * rf_chains_ms",
            full.nrows(),
            full.ncols()
        ));
    }
    let total: usize = combiners.iter().map(|w| w.matrix.ncols()).sum();
    if total != full.nrows() {
        return Err(invalid!("combiner chains ({total}) do not match {} rows", full.nrows()));
    }
    let mut per_user_blocks = Vec::with_capacity(combiners.len());
    let mut offset = 0;
    for w in combiners {
        let m = w.matrix.ncols();
        per_user_blocks.push(full.rows(offset, m).into_owned());
        offset += m;
    }
    Ok(EquivalentChannel { full, per_user_blocks, intermediate: h_int.clone() })
}

/// Combiners, precoder and equivalent channel for one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RfStage {
    pub combiners: Vec<RfCombiner>,
    pub precoder: RfPrecoder,
    pub equivalent: EquivalentChannel,
}

/// Run the whole RF stage for a hybrid configuration.
pub fn design_rf_stage(channel: &MultiUserChannel, config: &SystemConfig) -> Result<RfStage> {
    config.validate_hybrid()?;
    if channel.users() != config.users || channel.n_bs() != config.n_bs || channel.n_ms() != config.n_ms {
        return Err(invalid!("channel dimensions do not match the system configuration"));
    }
    let codebook = DftCodebook::new(config.n_ms)?;
    let combiners = channel
        .per_user_matrix
        .iter()
        .map(|h| select_rf_combiner(h, &codebook, config.rf_chains_ms))
        .collect::<Result<Vec<_>>>()?;
    let h_int = build_intermediate_channel(channel, &combiners)?;
    let precoder = egt_precoder(&h_int);
    let equivalent = equivalent_channel(&h_int, &precoder, &combiners)?;
    Ok(RfStage { combiners, precoder, equivalent })
}

/// Median of `|H_eq(i, j)| / |H_eq(i, i)|` over all off-diagonal entries.
pub fn median_off_diagonal_ratio(h_eq: &CMatrix) -> f64 {
    let mut ratios: Vec<f64> = Vec::new();
    for i in 0..h_eq.nrows() {
        let diag = h_eq[(i, i)].norm();
        for j in 0..h_eq.ncols() {
            if i != j {
                ratios.push(h_eq[(i, j)].norm() / diag);
            }
        }
    }
    median(&mut ratios)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `W^H W` deviation from identity, used to confirm the noise term stays white.
pub fn combiner_gram_error(w: &RfCombiner) -> f64 {
    crate::linalg::orthonormality_error(&w.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, ArrayGeometry};
    use crate::linalg::{orthonormality_error, re};
    use crate::seed::SeedStream;
    use alloc::vec;
    use core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn codebook_small_cases() {
        let one = DftCodebook::new(1).unwrap();
        assert!((one.columns[(0, 0)] - re(1.0)).norm() < 1e-15);
        let two = DftCodebook::new(2).unwrap();
        let expect = [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]];
        for q in 0..2 {
            for m in 0..2 {
                assert!((two.columns[(m, q)] - re(expect[q][m])).norm() < 1e-15);
            }
        }
        let four = DftCodebook::new(4).unwrap();
        assert!(orthonormality_error(&four.columns) < 1e-12);
        assert!(four.columns.iter().all(|z| (z.norm() - 0.5).abs() < 1e-15));
        assert!(DftCodebook::new(0).is_err());
    }

    #[test]
    fn combiner_hand_case() {
        let h = CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(1.0), re(0.0)]);
        let cb = DftCodebook::new(2).unwrap();
        let scores = combiner_scores(&h, &cb).unwrap();
        assert!((scores[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!(scores[1].abs() < 1e-14);
        let w = select_rf_combiner(&h, &cb, 1).unwrap();
        assert_eq!(w.selected_indices, vec![0]);
        assert!(select_rf_combiner(&h, &cb, 3).is_err());
    }

    #[test]
    fn combiner_exhaustive_selection_is_full_dft() {
        let ch = sample_rayleigh(&SeedStream::new(1, 1), &[1.0], ArrayGeometry::ula(6), ArrayGeometry::ula(4)).unwrap();
        let cb = DftCodebook::new(4).unwrap();
        let w = select_rf_combiner(&ch.per_user_matrix[0], &cb, 4).unwrap();
        let mut idx = w.selected_indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!(combiner_gram_error(&w) < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let h = CMatrix::zeros(4, 3);
        let w = select_rf_combiner(&h, &DftCodebook::new(4).unwrap(), 2).unwrap();
        assert_eq!(w.selected_indices, vec![0, 1]);
    }

    #[test]
    fn egt_hand_case() {
        let h_int = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 1.0), re(-1.0)]);
        let f = egt_precoder(&h_int);
        assert!((f.phases[(0, 0)] + PI / 4.0).abs() < 1e-15);
        assert!((f.phases[(1, 0)] - PI).abs() < 1e-15);
        assert!((f.matrix[(0, 0)] - C64::from_polar(FRAC_1_SQRT_2, -PI / 4.0)).norm() < 1e-15);
        let w = RfCombiner { matrix: CMatrix::identity(1, 1), selected_indices: vec![0] };
        let eq = equivalent_channel(&h_int, &f, &[w]).unwrap();
        let expect = (2f64.sqrt() + 1.0) / 2f64.sqrt();
        assert!((eq.full[(0, 0)] - re(expect)).norm() < 1e-14);
    }

    #[test]
    fn egt_zero_entry_has_zero_phase() {
        let f = egt_precoder(&CMatrix::zeros(2, 3));
        assert!(f.phases.iter().all(|&p| p == 0.0));
        assert!(f.matrix.iter().all(|z| (z.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn intermediate_channel_layout() {
        let bs = ArrayGeometry::ula(8);
        let ms = ArrayGeometry::ula(4);
        let ch = sample_rayleigh(&SeedStream::new(3, 0), &[1.0, 0.5, 1.4], bs, ms).unwrap();
        let cb = DftCodebook::new(4).unwrap();
        let ws: Vec<_> = ch.per_user_matrix.iter().map(|h| select_rf_combiner(h, &cb, 2).unwrap()).collect();
        let h_int = build_intermediate_channel(&ch, &ws).unwrap();
        assert_eq!(h_int.shape(), (6, 8));
        for k in 0..3 {
            let direct = ws[k].matrix.adjoint() * &ch.per_user_matrix[k];
            assert!((h_int.rows(2 * k, 2) - direct).norm() < 1e-13);
        }
        assert!(build_intermediate_channel(&ch, &ws[..2]).is_err());

        let single = sample_rayleigh(&SeedStream::new(3, 1), &[1.0], bs, ArrayGeometry::ula(1)).unwrap();
        let w = select_rf_combiner(&single.per_user_matrix[0], &DftCodebook::new(1).unwrap(), 1).unwrap();
        let h_int = build_intermediate_channel(&single, &[w]).unwrap();
        assert!((h_int - &single.per_user_matrix[0]).norm() < 1e-15);
    }

    #[test]
    fn rf_stage_properties() {
        let config = SystemConfig::hybrid(32, 4, 4, 2, 2);
        let ch = sample_rayleigh(
            &SeedStream::new(8, 0),
            &[1.0, 0.6, 1.3, 0.9],
            ArrayGeometry::ula(32),
            ArrayGeometry::ula(4),
        )
        .unwrap();
        let stage = design_rf_stage(&ch, &config).unwrap();
        let eq = &stage.equivalent;
        assert_eq!(eq.full.shape(), (8, 8));
        assert!((&eq.intermediate * &stage.precoder.matrix - &eq.full).norm() < 1e-12);
        for i in 0..8 {
            let l1: f64 = eq.intermediate.row(i).iter().map(|z| z.norm()).sum();
            assert!(eq.full[(i, i)].im.abs() < 1e-12);
            assert!((eq.full[(i, i)].re - l1 / 32f64.sqrt()).abs() < 1e-12);
        }
        for (k, block) in eq.per_user_blocks.iter().enumerate() {
            assert!((block - eq.full.rows(2 * k, 2)).norm() == 0.0);
        }
        for w in &stage.combiners {
            assert!(w.matrix.iter().all(|z| (z.norm() - 0.5).abs() < 1e-12));
            assert!(combiner_gram_error(w) < 1e-12);
        }
        for (h, w) in ch.per_user_matrix.iter().zip(&stage.combiners) {
            assert_eq!((w.matrix.adjoint() * h).rank(1e-9), 2);
        }
        let mut bad = config.clone();
        bad.rf_chains_bs = 10;
        assert!(design_rf_stage(&ch, &bad).is_err());
    }

    #[test]
    fn non_square_equivalent_is_rejected() {
        let h_int = CMatrix::from_element(2, 4, re(1.0));
        let f = RfPrecoder { matrix: CMatrix::from_element(4, 3, re(0.5)), phases: DMatrix::zeros(4, 3) };
        let w = RfCombiner { matrix: CMatrix::identity(2, 2), selected_indices: vec![0, 1] };
        assert!(matches!(equivalent_channel(&h_int, &f, &[w]), Err(crate::Error::DesignInfeasible(_))));
    }
}
