//! Channel realizations: i.i.d. Rayleigh, clustered mmWave and single-path,
//! over uniform linear or planar arrays with per-user large-scale fading.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::{re, CMatrix, CVector, C64};
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Antenna array layout. Element spacing only enters through `d / lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    pub elements_total: usize,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub rows: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub cols: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default = "default_spacing"))]
    pub spacing_over_wavelength: f64,
}

#[cfg(feature = "serde")]
fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn ula(elements: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Ula,
            elements_total: elements,
            rows: None,
            cols: None,
            spacing_over_wavelength: 0.5,
        }
    }

    pub fn upa(rows: usize, cols: usize) -> Self {
        ArrayGeometry {
            kind: ArrayKind::Upa,
            elements_total: rows * cols,
            rows: Some(rows),
            cols: Some(cols),
            spacing_over_wavelength: 0.5,
        }
    }

    /// Square-ish planar factorization: the largest `rows <= sqrt(n)`
    /// dividing `n`. 256 becomes 16 x 16 and 16 becomes 4 x 4.
    pub fn upa_square(elements: usize) -> Self {
        let mut rows = (elements as f64).sqrt() as usize;
        while rows > 1 && !elements.is_multiple_of(rows) {
            rows -= 1;
        }
        let rows = rows.max(1);
        Self::upa(rows, elements / rows)
    }

    pub fn with_spacing(mut self, spacing_over_wavelength: f64) -> Self {
        self.spacing_over_wavelength = spacing_over_wavelength;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements_total == 0 {
            return Err(invalid!("array must have at least one element"));
        }
        if !(self.spacing_over_wavelength > 0.0 && self.spacing_over_wavelength.is_finite()) {
            return Err(invalid!("element spacing must be positive, got {}", self.spacing_over_wavelength));
        }
        if self.kind == ArrayKind::Upa {
            let (rows, cols) = self.planar_dims()?;
            if rows == 0 || cols == 0 || rows * cols != self.elements_total {
                return Err(invalid!("planar array {}x{} does not hold {} elements", rows, cols, self.elements_total));
            }
        }
        Ok(())
    }

    fn planar_dims(&self) -> Result<(usize, usize)> {
        match (self.rows, self.cols) {
            (Some(r), Some(c)) => Ok((r, c)),
            _ => Err(invalid!("planar array requires rows and cols")),
        }
    }

    /// Steering vector for a plane wave. Linear arrays ignore `elevation`.
    pub fn response(&self, azimuth: f64, elevation: f64) -> Result<CVector> {
        match self.kind {
            ArrayKind::Ula => ula_response(self, azimuth),
            ArrayKind::Upa => upa_response(self, azimuth, elevation),
        }
    }
}

/// Unit-norm exponential vector `exp(j 2 pi spacing n arg) / sqrt(n)`.
fn phase_ramp(elements: usize, spacing: f64, arg: f64) -> CVector {
    let scale = 1.0 / (elements as f64).sqrt();
    DVector::from_iterator(elements, (0..elements).map(|n| C64::from_polar(scale, 2.0 * PI * spacing * n as f64 * arg)))
}

pub fn ula_response(geometry: &ArrayGeometry, azimuth: f64) -> Result<CVector> {
    if geometry.kind != ArrayKind::Ula {
        return Err(invalid!("linear response requested for a planar array"));
    }
    geometry.validate()?;
    if !azimuth.is_finite() {
        return Err(invalid!("azimuth must be finite, got {azimuth}"));
    }
    Ok(phase_ramp(geometry.elements_total, geometry.spacing_over_wavelength, azimuth.sin()))
}

/// Planar response: element `r * cols + c` carries the column phase
/// `sin(az) cos(el)` along `c` and the row phase `sin(el)` along `r`.
pub fn upa_response(geometry: &ArrayGeometry, azimuth: f64, elevation: f64) -> Result<CVector> {
    if geometry.kind != ArrayKind::Upa {
        return Err(invalid!("planar response requested for a linear array"));
    }
    geometry.validate()?;
    if !azimuth.is_finite() || !elevation.is_finite() {
        return Err(invalid!("angles must be finite, got ({azimuth}, {elevation})"));
    }
    let (rows, cols) = geometry.planar_dims()?;
    let d = geometry.spacing_over_wavelength;
    let horizontal = phase_ramp(cols, d, azimuth.sin() * elevation.cos());
    let vertical = phase_ramp(rows, d, elevation.sin());
    Ok(vertical.kronecker(&horizontal))
}

/// Clustered propagation parameters. Angle intervals are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MmWaveSpec {
    pub clusters: usize,
    pub paths_per_cluster: usize,
    pub aod_mean_range: [f64; 2],
    pub aoa_mean_range: [f64; 2],
    pub aod_spread: f64,
    pub aoa_spread: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub elevation_enabled: bool,
}

impl Default for MmWaveSpec {
    /// 8 clusters of 10 paths, 7.5 degree spreads, a 120 degree departure
    /// sector centred on broadside and omnidirectional arrival.
    fn default() -> Self {
        let sector = 60f64.to_radians();
        MmWaveSpec {
            clusters: 8,
            paths_per_cluster: 10,
            aod_mean_range: [-sector, sector],
            aoa_mean_range: [0.0, 2.0 * PI],
            aod_spread: 7.5f64.to_radians(),
            aoa_spread: 7.5f64.to_radians(),
            elevation_enabled: false,
        }
    }
}

impl MmWaveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.paths_per_cluster == 0 {
            return Err(invalid!("cluster and path counts must be positive"));
        }
        for (name, [lo, hi]) in [("aod", self.aod_mean_range), ("aoa", self.aoa_mean_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid!("{name} mean range [{lo}, {hi}] is not an interval"));
            }
        }
        if !(self.aod_spread >= 0.0 && self.aoa_spread >= 0.0) {
            return Err(invalid!("angle spreads must be nonnegative"));
        }
        Ok(())
    }
}

/// One propagation path. Gains include large-scale fading only for
/// single-path channels, where the fading is folded into the path gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRealization {
    pub gain: C64,
    pub aoa_azimuth: f64,
    pub aod_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_elevation: f64,
}

/// Per-user downlink channels `H_k = sqrt(beta_k) * Hn_k`, each `n_ms x n_bs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserChannel {
    pub per_user_matrix: Vec<CMatrix>,
    pub large_scale: Vec<f64>,
    pub geometry_bs: ArrayGeometry,
    pub geometry_ms: ArrayGeometry,
    /// Path lists for geometric channels, one list per user.
    pub paths: Option<Vec<Vec<PathRealization>>>,
}

impl MultiUserChannel {
    pub fn users(&self) -> usize {
        self.per_user_matrix.len()
    }

    pub fn n_ms(&self) -> usize {
        self.geometry_ms.elements_total
    }

    pub fn n_bs(&self) -> usize {
        self.geometry_bs.elements_total
    }

    /// Small-scale part `H_k / sqrt(beta_k)`.
    pub fn normalized(&self, user: usize) -> CMatrix {
        &self.per_user_matrix[user] * re(1.0 / self.large_scale[user].sqrt())
    }
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * core::f64::consts::FRAC_1_SQRT_2
}

/// Uniform draw on `[lo, hi]`; a degenerate interval returns `lo`.
pub fn uniform_in<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn check_large_scale(large_scale: &[f64], users: usize) -> Result<()> {
    if large_scale.len() != users {
        return Err(invalid!("expected {users} large-scale coefficients, got {}", large_scale.len()));
    }
    if let Some(b) = large_scale.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(invalid!("large-scale fading must be positive, got {b}"));
    }
    Ok(())
}

fn check_geometries(users: usize, bs: &ArrayGeometry, ms: &ArrayGeometry) -> Result<()> {
    if users == 0 {
        return Err(invalid!("at least one user is required"));
    }
    bs.validate()?;
    ms.validate()
}

/// I.i.d. CN(0, 1) entries for every user's normalized channel.
pub fn sample_rayleigh(
    seeds: &SeedStream,
    large_scale: &[f64],
    geometry_bs: ArrayGeometry,
    geometry_ms: ArrayGeometry,
) -> Result<MultiUserChannel> {
    let users = large_scale.len();
    check_geometries(users, &geometry_bs, &geometry_ms)?;
    check_large_scale(large_scale, users)?;
    let (n_ms, n_bs) = (geometry_ms.elements_total, geometry_bs.elements_total);
    let per_user_matrix = large_scale
        .iter()
        .enumerate()
        .map(|(k, beta)| {
            let mut rng = seeds.user(k);
            let amp = re(beta.sqrt());
            // Row-major draw order.
            let mut h = CMatrix::zeros(n_ms, n_bs);
            for i in 0..n_ms {
                for j in 0..n_bs {
                    h[(i, j)] = complex_gaussian(&mut rng) * amp;
                }
            }
            h
        })
        .collect();
    Ok(MultiUserChannel { per_user_matrix, large_scale: large_scale.to_vec(), geometry_bs, geometry_ms, paths: None })
}

/// Laplacian draw with standard deviation `spread` about `mean`, truncated
/// to `[mean - pi, mean + pi]` by inverse-CDF sampling on the truncated
/// probability mass.
pub fn sample_truncated_laplacian<R: Rng + ?Sized>(rng: &mut R, mean: f64, spread: f64) -> f64 {
    if spread <= 0.0 {
        return mean;
    }
    let scale = spread / core::f64::consts::SQRT_2;
    let edge = 0.5 * (-PI / scale).exp();
    let u = edge + (1.0 - 2.0 * edge) * rng.random::<f64>();
    let offset = if u < 0.5 { scale * (2.0 * u).ln() } else { -scale * (2.0 * (1.0 - u)).ln() };
    mean + offset.clamp(-PI, PI)
}

/// Clustered channel: draw the path set of every user, then assemble.
pub fn sample_mmwave(
    seeds: &SeedStream,
    spec: &MmWaveSpec,
    large_scale: &[f64],
    geometry_bs: ArrayGeometry,
    geometry_ms: ArrayGeometry,
) -> Result<MultiUserChannel> {
    spec.validate()?;
    let users = large_scale.len();
    check_geometries(users, &geometry_bs, &geometry_ms)?;
    check_large_scale(large_scale, users)?;
    let elevation =
        spec.elevation_enabled && (geometry_bs.kind == ArrayKind::Upa || geometry_ms.kind == ArrayKind::Upa);
    let paths = (0..users)
        .map(|k| {
            let mut rng = seeds.user(k);
            let mut list = Vec::with_capacity(spec.clusters * spec.paths_per_cluster);
            for _ in 0..spec.clusters {
                let aoa_mean = uniform_in(&mut rng, spec.aoa_mean_range);
                let aod_mean = uniform_in(&mut rng, spec.aod_mean_range);
                let (aoa_el_mean, aod_el_mean) = if elevation {
                    (uniform_in(&mut rng, spec.aoa_mean_range), uniform_in(&mut rng, spec.aod_mean_range))
                } else {
                    (0.0, 0.0)
                };
                for _ in 0..spec.paths_per_cluster {
                    let aoa_azimuth = sample_truncated_laplacian(&mut rng, aoa_mean, spec.aoa_spread);
                    let aod_azimuth = sample_truncated_laplacian(&mut rng, aod_mean, spec.aod_spread);
                    let (aoa_elevation, aod_elevation) = if elevation {
                        (
                            sample_truncated_laplacian(&mut rng, aoa_el_mean, spec.aoa_spread),
                            sample_truncated_laplacian(&mut rng, aod_el_mean, spec.aod_spread),
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    list.push(PathRealization {
                        gain: complex_gaussian(&mut rng),
                        aoa_azimuth,
                        aod_azimuth,
                        aoa_elevation,
                        aod_elevation,
                    });
                }
            }
            list
        })
        .collect();
    channel_from_paths(paths, large_scale, geometry_bs, geometry_ms)
}

/// `H_k = sqrt(beta_k) * sqrt(n_bs n_ms / L) * sum_l g_l a_ms a_bs^H` over the
/// `L` paths of user `k`.
pub fn channel_from_paths(
    paths: Vec<Vec<PathRealization>>,
    large_scale: &[f64],
    geometry_bs: ArrayGeometry,
    geometry_ms: ArrayGeometry,
) -> Result<MultiUserChannel> {
    let users = paths.len();
    check_geometries(users, &geometry_bs, &geometry_ms)?;
    check_large_scale(large_scale, users)?;
    let (n_ms, n_bs) = (geometry_ms.elements_total, geometry_bs.elements_total);
    let mut per_user_matrix = Vec::with_capacity(users);
    for (list, beta) in paths.iter().zip(large_scale) {
        if list.is_empty() {
            return Err(invalid!("every user needs at least one path"));
        }
        let scale = ((n_bs * n_ms) as f64 / list.len() as f64).sqrt() * beta.sqrt();
        let mut h = CMatrix::zeros(n_ms, n_bs);
        for p in list {
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(invalid!("path gain must be finite"));
            }
            let a_ms = geometry_ms.response(p.aoa_azimuth, p.aoa_elevation)?;
            let a_bs = geometry_bs.response(p.aod_azimuth, p.aod_elevation)?;
            h.ger(p.gain * scale, &a_ms, &a_bs.conjugate(), re(1.0));
        }
        per_user_matrix.push(h);
    }
    Ok(MultiUserChannel {
        per_user_matrix,
        large_scale: large_scale.to_vec(),
        geometry_bs,
        geometry_ms,
        paths: Some(paths),
    })
}

/// `H_k = sqrt(n_bs n_ms) * alpha_k * a_ms(theta_k) a_bs(phi_k)^H`. Any
/// large-scale fading is expected to be folded into `alpha_k`.
pub fn single_path_channel(
    gains: &[C64],
    aoas: &[f64],
    aods: &[f64],
    geometry_bs: ArrayGeometry,
    geometry_ms: ArrayGeometry,
) -> Result<MultiUserChannel> {
    if aoas.len() != gains.len() || aods.len() != gains.len() {
        return Err(invalid!(
            "gain, arrival and departure lists differ in length ({}, {}, {})",
            gains.len(),
            aoas.len(),
            aods.len()
        ));
    }
    let paths = gains
        .iter()
        .zip(aoas.iter().zip(aods))
        .map(|(&gain, (&aoa_azimuth, &aod_azimuth))| {
            alloc::vec![PathRealization { gain, aoa_azimuth, aod_azimuth, aoa_elevation: 0.0, aod_elevation: 0.0 }]
        })
        .collect();
    let ones = alloc::vec![1.0; gains.len()];
    channel_from_paths(paths, &ones, geometry_bs, geometry_ms)
}

/// Single-path draw: per user a CN(0, 1) path gain scaled by
/// `sqrt(beta_k)`, a departure angle uniform on `aod_range` and an arrival
/// angle uniform on `aoa_range`. The returned channel records the betas.
pub fn sample_single_path(
    seeds: &SeedStream,
    aod_range: [f64; 2],
    aoa_range: [f64; 2],
    large_scale: &[f64],
    geometry_bs: ArrayGeometry,
    geometry_ms: ArrayGeometry,
) -> Result<MultiUserChannel> {
    let users = large_scale.len();
    check_geometries(users, &geometry_bs, &geometry_ms)?;
    check_large_scale(large_scale, users)?;
    let mut gains = Vec::with_capacity(users);
    let mut aoas = Vec::with_capacity(users);
    let mut aods = Vec::with_capacity(users);
    for (k, beta) in large_scale.iter().enumerate() {
        let mut rng = seeds.user(k);
        aods.push(uniform_in(&mut rng, aod_range));
        aoas.push(uniform_in(&mut rng, aoa_range));
        gains.push(complex_gaussian(&mut rng) * beta.sqrt());
    }
    let mut channel = single_path_channel(&gains, &aoas, &aods, geometry_bs, geometry_ms)?;
    channel.large_scale = large_scale.to_vec();
    Ok(channel)
}

/// Per-user large-scale fading drawn uniformly on `range` from the shared
/// stream.
pub fn sample_large_scale(seeds: &SeedStream, users: usize, range: [f64; 2]) -> Vec<f64> {
    let mut rng = seeds.shared();
    (0..users).map(|_| uniform_in(&mut rng, range)).collect()
}
