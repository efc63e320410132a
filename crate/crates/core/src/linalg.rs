//! Complex dense linear algebra used by the baseband stage: sorted SVD with a
//! fixed phase convention, null spaces, orthonormal complements, and small
//! Hermitian log-determinants.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Thin singular value decomposition `m = u * diag(s) * v^H`.
///
/// Singular values are sorted in descending order. Each right singular vector
/// is rotated so that its largest-magnitude entry is real and positive, and
/// the paired left vector receives the same rotation.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn new(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let rank_max = rows.min(cols);
        if rank_max == 0 {
            return Svd { u: CMatrix::zeros(rows, 0), singular_values: Vec::new(), v: CMatrix::zeros(cols, 0) };
        }
        let svd = m.clone().svd(true, true);
        let u_raw = svd.u.expect("left singular vectors requested");
        let v_raw = svd.v_t.expect("right singular vectors requested").adjoint();
        let mut order: Vec<usize> = (0..rank_max).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let mut u = CMatrix::zeros(rows, rank_max);
        let mut v = CMatrix::zeros(cols, rank_max);
        let mut singular_values = Vec::with_capacity(rank_max);
        for (dst, &src) in order.iter().enumerate() {
            singular_values.push(svd.singular_values[src]);
            let rot = unit_phase_of_peak(v_raw.column(src).iter());
            u.set_column(dst, &(u_raw.column(src) * rot));
            v.set_column(dst, &(v_raw.column(src) * rot));
        }
        Svd { u, singular_values, v }
    }

    /// Number of singular values above `s_max * max(rows, cols) * eps`.
    pub fn numerical_rank(&self, rows: usize, cols: usize) -> usize {
        let s_max = self.singular_values.first().copied().unwrap_or(0.0);
        let threshold = s_max * rows.max(cols) as f64 * f64::EPSILON;
        self.singular_values.iter().filter(|&&s| s > threshold).count()
    }
}

/// Phase factor `conj(z)/|z|` for the first entry of maximal modulus, so that
/// multiplying the vector by it makes that entry real and positive.
fn unit_phase_of_peak<'a>(entries: impl Iterator<Item = &'a C64>) -> C64 {
    let mut best = C64::zero();
    let mut best_mag = -1.0;
    for z in entries {
        let mag = z.norm();
        if mag > best_mag {
            best_mag = mag;
            best = *z;
        }
    }
    if best_mag > 0.0 {
        best.conj() / best_mag
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Rotate every column so its largest-magnitude entry is real and positive.
pub fn normalize_column_phases(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let rot = unit_phase_of_peak(col.iter());
        col *= rot;
    }
}

/// Householder reflectors `I - 2 v v^H` that reduce a tall matrix to upper
/// triangular form. Reflector `j` acts on rows `j..`.
struct Householder {
    reflectors: Vec<Option<Vec<C64>>>,
    r: CMatrix,
}

impl Householder {
    fn factor(mut a: CMatrix) -> Self {
        let (n, m) = a.shape();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);
        for j in 0..steps {
            let col = a.column(j);
            let x = &col.as_slice()[j..];
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                reflectors.push(None);
                continue;
            }
            let x0 = x[0];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
            let mut v: Vec<C64> = x.to_vec();
            v[0] += phase * norm;
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in v.iter_mut() {
                *z /= vnorm;
            }
            for c in j..m {
                let mut col = a.column_mut(c);
                reflect(&v, &mut col.as_mut_slice()[j..]);
            }
            reflectors.push(Some(v));
        }
        let r = a.rows(0, steps).upper_triangle();
        Householder { reflectors, r }
    }

    /// Trailing `n - m` columns of the full orthogonal factor.
    fn complement(&self, n: usize) -> CMatrix {
        let used = self.reflectors.len();
        let mut out = CMatrix::zeros(n, n - used);
        for c in 0..(n - used) {
            out[(used + c, c)] = C64::new(1.0, 0.0);
        }
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            if let Some(v) = v {
                for c in 0..(n - used) {
                    let mut col = out.column_mut(c);
                    reflect(v, &mut col.as_mut_slice()[j..]);
                }
            }
        }
        out
    }
}

#[inline]
fn reflect(v: &[C64], x: &mut [C64]) {
    let mut s = C64::zero();
    for (vi, xi) in v.iter().zip(x.iter()) {
        s += vi.conj() * xi;
    }
    s *= 2.0;
    for (vi, xi) in v.iter().zip(x.iter_mut()) {
        *xi -= vi * s;
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `q`, which must have orthonormal columns. Built from the trailing
/// columns of the full Householder Q factor of `q`.
pub fn orthonormal_complement(q: &CMatrix) -> CMatrix {
    Householder::factor(q.clone()).complement(q.nrows())
}

/// Orthonormal basis of the right null space of `m`, using the numerical
/// rank rule of [`Svd::numerical_rank`]. Returns `None` when the null space
/// is empty. A matrix with no rows has the whole space as its null space.
///
/// Full row rank inputs take a QR route on `m^H` (the singular values of `m`
/// are those of the triangular factor); rank-deficient inputs fall back to
/// the complement of the leading right singular vectors.
pub fn null_space(m: &CMatrix) -> Option<CMatrix> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return None;
    }
    let mut basis = if rows == 0 {
        CMatrix::identity(cols, cols)
    } else if rows >= cols {
        let svd = Svd::new(m);
        let rank = svd.numerical_rank(rows, cols);
        if rank >= cols {
            return None;
        }
        orthonormal_complement(&svd.v.columns(0, rank).into_owned())
    } else {
        let qr = Householder::factor(m.adjoint());
        let sv = qr.r.clone().singular_values();
        let s_max = sv.iter().cloned().fold(0.0, f64::max);
        let threshold = s_max * cols as f64 * f64::EPSILON;
        let rank = sv.iter().filter(|&&s| s > threshold).count();
        if rank == rows {
            qr.complement(cols)
        } else {
            let svd = Svd::new(m);
            let rank = svd.numerical_rank(rows, cols);
            orthonormal_complement(&svd.v.columns(0, rank).into_owned())
        }
    };
    normalize_column_phases(&mut basis);
    Some(basis)
}

/// `ln det(I + y)` for a Hermitian positive semidefinite `y`, accurate for
/// small eigenvalues.
pub fn log_det_identity_plus(y: &CMatrix) -> f64 {
    if y.nrows() == 0 {
        return 0.0;
    }
    let herm = (y + y.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    eig.eigenvalues.iter().map(|&mu| mu.max(0.0).ln_1p()).sum()
}

/// Largest deviation of `m^H m` from the identity, entrywise modulus.
pub fn orthonormality_error(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Real scalar as a complex number.
#[inline]
pub(crate) fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn svd_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(r, c) in &[(3, 5), (5, 3), (4, 4), (1, 6)] {
            let m = random_matrix(&mut rng, r, c);
            let svd = Svd::new(&m);
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let s = CMatrix::from_diagonal(&DVector::from_iterator(
                svd.singular_values.len(),
                svd.singular_values.iter().map(|&x| re(x)),
            ));
            let rebuilt = &svd.u * s * svd.v.adjoint();
            assert!((rebuilt - &m).norm() <= 1e-12 * m.norm());
            assert!(orthonormality_error(&svd.u) < 1e-12);
            assert!(orthonormality_error(&svd.v) < 1e-12);
            for col in svd.v.column_iter() {
                let peak = col.iter().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).unwrap();
                assert!(peak.im.abs() < 1e-15 && peak.re > 0.0);
            }
        }
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 9, 3);
        let q = m.qr().q();
        let comp = orthonormal_complement(&q);
        assert_eq!(comp.shape(), (9, 6));
        assert!(orthonormality_error(&comp) < 1e-13);
        assert!((q.adjoint() * &comp).norm() < 1e-13);
    }

    #[test]
    fn null_space_of_axis_vector() {
        let m = CMatrix::from_row_slice(1, 2, &[re(0.0), re(1.0)]);
        let basis = null_space(&m).unwrap();
        assert_eq!(basis.shape(), (2, 1));
        assert!((basis[(0, 0)] - re(1.0)).norm() < 1e-14);
        assert!(basis[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn null_space_of_empty_rows_is_identity() {
        let basis = null_space(&CMatrix::zeros(0, 3)).unwrap();
        assert!((basis - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn null_space_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 2, 4);
        let basis = null_space(&m).unwrap();
        assert_eq!(basis.ncols(), 2);
        assert!(orthonormality_error(&basis) < 1e-12);
        assert!((&m * &basis).norm() <= 1e-10);
    }

    #[test]
    fn full_rank_square_has_no_null_space() {
        assert!(null_space(&CMatrix::identity(3, 3)).is_none());
    }

    #[test]
    fn log_det_matches_product_of_diagonal() {
        let y = CMatrix::from_diagonal(&DVector::from_vec(alloc::vec![re(1.0), re(3.0)]));
        assert!((log_det_identity_plus(&y) - (2.0f64 * 4.0).ln()).abs() < 1e-14);
    }
}
