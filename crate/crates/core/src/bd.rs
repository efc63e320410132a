//! Block diagonalization: null-space precoding that removes inter-user
//! interference, SVD precoding inside each user's interference-free
//! subchannel, and assembly of the final transceiver.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::MultiUserChannel;
use crate::error::{infeasible, invalid, Result};
use crate::linalg::{null_space, re, CMatrix, Svd};
use crate::power::AllocationResult;
use crate::rf::{EquivalentChannel, RfCombiner, RfPrecoder, RfStage};

/// Row-stack of every block except user `k`, preserving order.
pub fn complement_channel(blocks: &[CMatrix], k: usize) -> Result<CMatrix> {
    if k >= blocks.len() {
        return Err(invalid!("user {k} out of range for {} users", blocks.len()));
    }
    let cols = blocks[k].ncols();
    let rows: usize = blocks.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, b)| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut offset = 0;
    for (i, b) in blocks.iter().enumerate() {
        if i == k {
            continue;
        }
        if b.ncols() != cols {
            return Err(invalid!("user blocks disagree on column count"));
        }
        out.rows_mut(offset, b.nrows()).copy_from(b);
        offset += b.nrows();
    }
    Ok(out)
}

pub fn null_space_basis(h_bar: &CMatrix) -> Result<CMatrix> {
    null_space(h_bar).ok_or_else(|| {
        infeasible!(
            "interference channel {}x{} has full column rank, so no null space is left for the user",
            h_bar.nrows(),
            h_bar.ncols()
        )
    })
}

/// Per-user orthonormal null-space bases of the other users' channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceBasis {
    pub per_user: Vec<CMatrix>,
}

/// SVDs of the interference-free subchannels `H_k V_k`.
#[derive(Debug, Clone)]
pub struct EffectiveSubchannels {
    pub per_user: Vec<Svd>,
}

impl EffectiveSubchannels {
    /// The leading `streams` singular values of every user.
    pub fn retained_gains(&self, streams: usize) -> Result<Vec<Vec<f64>>> {
        self.per_user
            .iter()
            .enumerate()
            .map(|(k, svd)| {
                if svd.singular_values.len() < streams {
                    Err(infeasible!(
                        "user {k} subchannel supports {} streams, {streams} requested",
                        svd.singular_values.len()
                    ))
                } else {
                    Ok(svd.singular_values[..streams].to_vec())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BlockDiagonalization {
    pub null_spaces: NullSpaceBasis,
    pub subchannels: EffectiveSubchannels,
}

/// Block diagonalization of the square hybrid equivalent channel.
pub fn block_diagonalize(eq: &EquivalentChannel) -> Result<BlockDiagonalization> {
    if !eq.full.is_square() {
        return Err(infeasible!("equivalent channel is {}x{}, expected square", eq.full.nrows(), eq.full.ncols()));
    }
    block_diagonalize_blocks(&eq.per_user_blocks)
}

/// Block diagonalization of arbitrary per-user channel blocks sharing one
/// transmit dimension.
pub fn block_diagonalize_blocks(blocks: &[CMatrix]) -> Result<BlockDiagonalization> {
    if blocks.is_empty() {
        return Err(invalid!("at least one user is required"));
    }
    let mut null_spaces = Vec::with_capacity(blocks.len());
    let mut subchannels = Vec::with_capacity(blocks.len());
    for (k, block) in blocks.iter().enumerate() {
        let basis = null_space_basis(&complement_channel(blocks, k)?)?;
        subchannels.push(Svd::new(&(block * &basis)));
        null_spaces.push(basis);
    }
    Ok(BlockDiagonalization {
        null_spaces: NullSpaceBasis { per_user: null_spaces },
        subchannels: EffectiveSubchannels { per_user: subchannels },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Phase-only RF stage followed by low-dimensional baseband BD.
    Hybrid,
    /// Baseband BD on the raw channels with one RF chain per antenna.
    FullBd,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Hybrid => "hybd",
            Scheme::FullBd => "full_bd",
        }
    }
}

/// Complete transceiver. The RF parts are absent for full-complexity BD,
/// where they act as identities.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDesign {
    pub scheme: Scheme,
    pub rf_precoder: Option<RfPrecoder>,
    pub rf_combiners: Option<Vec<RfCombiner>>,
    /// `B` with `power_scale` already applied; columns grouped per user.
    pub baseband_precoder: CMatrix,
    pub baseband_combiners: Vec<CMatrix>,
    pub power_scale: f64,
    pub streams_per_user: usize,
}

impl HybridDesign {
    pub fn users(&self) -> usize {
        self.baseband_combiners.len()
    }

    /// Columns of `B` that carry user `k`'s streams.
    pub fn precoder_block(&self, k: usize) -> CMatrix {
        self.baseband_precoder.columns(k * self.streams_per_user, self.streams_per_user).into_owned()
    }

    /// Overall transmit matrix `F B`.
    pub fn transmit_matrix(&self) -> CMatrix {
        match &self.rf_precoder {
            Some(f) => &f.matrix * &self.baseband_precoder,
            None => self.baseband_precoder.clone(),
        }
    }

    /// Overall receive filter `M_k^H W_k^H` of user `k`.
    pub fn receive_filter(&self, k: usize) -> CMatrix {
        let m = &self.baseband_combiners[k];
        match &self.rf_combiners {
            Some(ws) => m.adjoint() * ws[k].matrix.adjoint(),
            None => m.adjoint(),
        }
    }

    /// Relative deviation of `||F B||_F^2` from `users * streams_per_user`.
    pub fn power_constraint_error(&self) -> f64 {
        let target = (self.users() * self.streams_per_user) as f64;
        (self.transmit_matrix().norm_squared() - target).abs() / target
    }
}

/// `B_k = V_k U'_k diag(sqrt(lambda_k))` and `M_k` = leading left singular
/// vectors, unscaled.
fn baseband_blocks(
    bd: &BlockDiagonalization,
    streams: usize,
    allocation: &AllocationResult,
) -> Result<(CMatrix, Vec<CMatrix>)> {
    let users = bd.null_spaces.per_user.len();
    if allocation.lambda.len() != users * streams {
        return Err(invalid!("allocation has {} loads, expected {}", allocation.lambda.len(), users * streams));
    }
    bd.subchannels.retained_gains(streams)?;
    let rows = bd.null_spaces.per_user[0].nrows();
    let mut b = CMatrix::zeros(rows, users * streams);
    let mut combiners = Vec::with_capacity(users);
    for (k, (basis, svd)) in bd.null_spaces.per_user.iter().zip(&bd.subchannels.per_user).enumerate() {
        let mut block = basis * svd.v.columns(0, streams);
        for (s, mut col) in block.column_iter_mut().enumerate() {
            col *= re(allocation.lambda[k * streams + s].sqrt());
        }
        b.columns_mut(k * streams, streams).copy_from(&block);
        combiners.push(svd.u.columns(0, streams).into_owned());
    }
    Ok((b, combiners))
}

/// Assemble the hybrid transceiver. Loads are applied per stream, then one
/// global factor enforces `||F B||_F^2 = users * streams`.
pub fn assemble_hybrid_design(
    rf: &RfStage,
    bd: &BlockDiagonalization,
    streams: usize,
    allocation: &AllocationResult,
) -> Result<HybridDesign> {
    let m_ms = rf.combiners.first().map_or(0, |w| w.matrix.ncols());
    if streams == 0 || streams > m_ms {
        return Err(invalid!("streams per user {streams} must be in 1..={m_ms}"));
    }
    let (b, baseband_combiners) = baseband_blocks(bd, streams, allocation)?;
    let users = baseband_combiners.len();
    let radiated = (&rf.precoder.matrix * &b).norm_squared();
    let power_scale = ((users * streams) as f64 / radiated).sqrt();
    Ok(HybridDesign {
        scheme: Scheme::Hybrid,
        rf_precoder: Some(rf.precoder.clone()),
        rf_combiners: Some(rf.combiners.clone()),
        baseband_precoder: b * re(power_scale),
        baseband_combiners,
        power_scale,
        streams_per_user: streams,
    })
}

/// Null spaces and subchannel SVDs on the raw channels.
pub fn full_bd_decompose(channel: &MultiUserChannel) -> Result<BlockDiagonalization> {
    let users = channel.users();
    let others = (users.saturating_sub(1)) * channel.n_ms();
    if channel.n_bs() <= others {
        return Err(infeasible!("full BD needs n_bs > (users-1)*n_ms, got {} <= {others}", channel.n_bs()));
    }
    block_diagonalize_blocks(&channel.per_user_matrix)
}

/// Traditional block diagonalization with one RF chain per antenna.
pub fn full_complexity_bd(
    channel: &MultiUserChannel,
    bd: &BlockDiagonalization,
    streams: usize,
    allocation: &AllocationResult,
) -> Result<HybridDesign> {
    if streams == 0 || streams > channel.n_ms() {
        return Err(invalid!("streams per user {streams} must be in 1..={}", channel.n_ms()));
    }
    let (b, baseband_combiners) = baseband_blocks(bd, streams, allocation)?;
    let users = baseband_combiners.len();
    let power_scale = ((users * streams) as f64 / b.norm_squared()).sqrt();
    Ok(HybridDesign {
        scheme: Scheme::FullBd,
        rf_precoder: None,
        rf_combiners: None,
        baseband_precoder: b * re(power_scale),
        baseband_combiners,
        power_scale,
        streams_per_user: streams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, ArrayGeometry};
    use crate::linalg::{orthonormality_error, C64};
    use crate::power::{waterfill, StreamGains};
    use crate::rf::{design_rf_stage, DftCodebook, RfCombiner};
    use crate::seed::SeedStream;
    use crate::system::SystemConfig;
    use alloc::vec;

    fn random(seed: u64, rows: usize, cols: usize) -> CMatrix {
        let ch = sample_rayleigh(&SeedStream::new(seed, 0), &[1.0], ArrayGeometry::ula(cols), ArrayGeometry::ula(rows))
            .unwrap();
        ch.per_user_matrix[0].clone()
    }

    fn equal_allocation(n: usize) -> AllocationResult {
        AllocationResult {
            lambda: vec![1.0; n],
            water_level_multiplier: 1.0,
            weights_expanded: vec![1.0; n],
            budget: n as f64,
        }
    }

    #[test]
    fn complement_ordering() {
        let blocks: Vec<CMatrix> = (0..3).map(|i| CMatrix::from_element(1, 2, re(i as f64))).collect();
        assert_eq!(complement_channel(&blocks[..2], 0).unwrap(), blocks[1]);
        let h = complement_channel(&blocks, 1).unwrap();
        assert_eq!(h.row(0), blocks[0].row(0));
        assert_eq!(h.row(1), blocks[2].row(0));
        assert_eq!(complement_channel(&blocks[..1], 0).unwrap().nrows(), 0);
        assert!(complement_channel(&blocks, 3).is_err());
    }

    #[test]
    fn single_user_null_space_is_everything() {
        let bd = block_diagonalize_blocks(&[random(1, 2, 2)]).unwrap();
        assert!((&bd.null_spaces.per_user[0] - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn identity_channel_is_already_diagonal() {
        let w = RfCombiner { matrix: CMatrix::identity(1, 1), selected_indices: vec![0] };
        let eq = EquivalentChannel {
            full: CMatrix::identity(2, 2),
            per_user_blocks: vec![
                CMatrix::from_row_slice(1, 2, &[re(1.0), re(0.0)]),
                CMatrix::from_row_slice(1, 2, &[re(0.0), re(1.0)]),
            ],
            intermediate: CMatrix::identity(2, 2),
        };
        let bd = block_diagonalize(&eq).unwrap();
        assert!((bd.null_spaces.per_user[0].column(0) - CMatrix::identity(2, 2).column(0)).norm() < 1e-15);
        assert!((bd.null_spaces.per_user[1].column(0) - CMatrix::identity(2, 2).column(1)).norm() < 1e-15);
        for s in &bd.subchannels.per_user {
            assert!((s.singular_values[0] - 1.0).abs() < 1e-15);
        }
        let rf = RfStage {
            combiners: vec![w.clone(), w],
            precoder: RfPrecoder { matrix: CMatrix::identity(2, 2), phases: nalgebra::DMatrix::zeros(2, 2) },
            equivalent: eq,
        };
        let design = assemble_hybrid_design(&rf, &bd, 1, &equal_allocation(2)).unwrap();
        assert!((&design.baseband_precoder - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((design.baseband_combiners[0][(0, 0)] - re(1.0)).norm() < 1e-15);
        assert!(assemble_hybrid_design(&rf, &bd, 2, &equal_allocation(4)).is_err());
    }

    #[test]
    fn hybrid_nulling_and_power() {
        let config = SystemConfig::hybrid(24, 4, 3, 2, 2);
        let ch =
            sample_rayleigh(&SeedStream::new(5, 5), &[1.0, 0.7, 1.2], ArrayGeometry::ula(24), ArrayGeometry::ula(4))
                .unwrap();
        let rf = design_rf_stage(&ch, &config).unwrap();
        let bd = block_diagonalize(&rf.equivalent).unwrap();
        let blocks = &rf.equivalent.per_user_blocks;
        for k in 0..3 {
            let v = &bd.null_spaces.per_user[k];
            assert_eq!(v.ncols(), 2);
            assert!(orthonormality_error(v) < 1e-10);
            for i in (0..3).filter(|&i| i != k) {
                assert!((&blocks[i] * v).norm() <= 1e-10 * rf.equivalent.full.norm());
            }
        }
        let gains = StreamGains::from_singular_values(&bd.subchannels.retained_gains(2).unwrap(), 2, 10.0).unwrap();
        let alloc = waterfill(&gains, 6.0).unwrap();
        let design = assemble_hybrid_design(&rf, &bd, 2, &alloc).unwrap();
        assert!(design.power_constraint_error() < 1e-9);
        for k in 0..3 {
            let own = (&blocks[k] * design.precoder_block(k)).norm();
            for i in (0..3).filter(|&i| i != k) {
                assert!((&blocks[i] * design.precoder_block(k)).norm() <= 1e-10 * own);
            }
            let m = &design.baseband_combiners[k];
            let w = &rf.combiners[k].matrix;
            assert!(orthonormality_error(&(w * m)) < 1e-10);
        }
    }

    #[test]
    fn singular_values_survive_rebasis() {
        let blocks = vec![random(2, 2, 6), random(3, 2, 6)];
        let bd = block_diagonalize_blocks(&blocks).unwrap();
        let v = &bd.null_spaces.per_user[0];
        let rot = DftCodebook::new(v.ncols()).unwrap().columns;
        let s = Svd::new(&(&blocks[0] * (v * rot)));
        for (a, b) in s.singular_values.iter().zip(&bd.subchannels.per_user[0].singular_values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_bd_single_user_is_svd_beamforming() {
        let h = random(4, 3, 5);
        let ch = MultiUserChannel {
            per_user_matrix: vec![h.clone()],
            large_scale: vec![1.0],
            geometry_bs: ArrayGeometry::ula(5),
            geometry_ms: ArrayGeometry::ula(3),
            paths: None,
        };
        let bd = full_bd_decompose(&ch).unwrap();
        let direct = Svd::new(&h);
        for (a, b) in bd.subchannels.per_user[0].singular_values.iter().zip(&direct.singular_values) {
            assert!((a - b).abs() < 1e-12);
        }
        let design = full_complexity_bd(&ch, &bd, 2, &equal_allocation(2)).unwrap();
        let gain = design.receive_filter(0) * &h * &design.baseband_precoder;
        for i in 0..2 {
            assert!((gain[(i, i)].norm() - direct.singular_values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_bd_orthogonal_rows() {
        let mut h1 = CMatrix::zeros(1, 4);
        h1[(0, 0)] = re(1.0);
        h1[(0, 1)] = re(1.0);
        let mut h2 = CMatrix::zeros(1, 4);
        h2[(0, 2)] = C64::new(0.0, 2.0);
        let ch = MultiUserChannel {
            per_user_matrix: vec![h1.clone(), h2.clone()],
            large_scale: vec![1.0, 1.0],
            geometry_bs: ArrayGeometry::ula(4),
            geometry_ms: ArrayGeometry::ula(1),
            paths: None,
        };
        let bd = full_bd_decompose(&ch).unwrap();
        let design = full_complexity_bd(&ch, &bd, 1, &equal_allocation(2)).unwrap();
        assert!((design.baseband_precoder.norm_squared() - 2.0).abs() < 1e-12);
        for (k, h) in [h1, h2].iter().enumerate() {
            let b = design.precoder_block(k);
            let align = (h * &b)[(0, 0)].norm() / (h.norm() * b.norm());
            assert!((align - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_bd_infeasible() {
        let ch =
            sample_rayleigh(&SeedStream::new(1, 0), &[1.0; 3], ArrayGeometry::ula(8), ArrayGeometry::ula(4)).unwrap();
        assert!(matches!(full_bd_decompose(&ch), Err(crate::Error::DesignInfeasible(_))));
    }
}
