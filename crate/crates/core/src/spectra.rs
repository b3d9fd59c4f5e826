//! Symmetric eigendecomposition and spectral comparisons.
//!
//! The solver is a cyclic Jacobi iteration written here instead of taken
//! from a linear-algebra crate: the sweep order is fixed (row-major over
//! pairs p < q), so given the same input bytes the decomposition is
//! bit-identical across runs, platforms with the same float semantics,
//! and thread counts. Jacobi is exact enough for the matrix sizes this
//! crate targets (tens of assets) and its accuracy does not depend on
//! clever pivoting.
//!
//! Sign conventions matter downstream: eigenvector signs are fixed by
//! projection on a caller-supplied alignment reference, so overlaps
//! between spectra of different matrices are comparable.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::stats;

/// Maximum Jacobi sweeps before giving up; cyclic Jacobi on the sizes this
/// crate handles converges in well under 20.
const MAX_SWEEPS: usize = 64;

/// Eigenvalues within this absolute distance are treated as ties and
/// ordered by their aligned first components so the output is reproducible
/// under degeneracy. The choice of tie order is arbitrary but fixed.
const TIE_TOLERANCE: f64 = 1e-10;

/// Full spectrum of a symmetric matrix.
///
/// `eigenvalues` are sorted descending; column `j` of `eigenvectors` is the
/// unit eigenvector for `eigenvalues[j]`, sign-aligned to
/// `alignment_reference`.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum<T: Scalar> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Mat<T>,
    pub alignment_reference: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// Matrix order.
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> T {
        self.eigenvalues[0]
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> T {
        *self.eigenvalues.last().expect("spectrum is non-empty")
    }

    /// Eigenvector for rank `j` (0 = largest eigenvalue).
    pub fn eigenvector(&self, j: usize) -> Vec<T> {
        self.eigenvectors.col(j)
    }

    /// Reconstructs `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Mat<T> {
        let n = self.order();
        let mut out = Mat::zeros(n, n);
        for j in 0..n {
            out.add_scaled_outer(&self.eigenvectors.col(j), self.eigenvalues[j]);
        }
        out
    }
}

/// Flips `v` so its projection on `reference` is positive.
///
/// Exactly zero projection falls back to making the first nonzero
/// component positive, which keeps the output deterministic when the
/// vector is orthogonal to the reference.
pub fn sign_align<T: Scalar>(v: &[T], reference: &[T]) -> Result<Vec<T>> {
    if v.len() != reference.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "sign_align inputs have lengths {} and {}",
            v.len(),
            reference.len()
        )));
    }
    if stats::norm2(v) == T::zero() {
        return Err(CoreError::ZeroVector("sign_align input".into()));
    }
    let proj = stats::dot(v, reference);
    let flip = if proj > T::zero() {
        false
    } else if proj < T::zero() {
        true
    } else {
        // Orthogonal to the reference: first nonzero component positive.
        let first = v.iter().find(|x| **x != T::zero()).copied().unwrap_or(T::zero());
        first < T::zero()
    };
    Ok(if flip {
        v.iter().map(|x| -*x).collect()
    } else {
        v.to_vec()
    })
}

/// Inner product of two unit vectors (callers pass eigenvectors).
pub fn overlap<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "overlap inputs have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(stats::dot(u, v))
}

/// Angle in radians between two unit vectors: arccos of the inner product
/// (of the signed product, not its absolute value), clamped to [-1, 1]
/// against rounding.
pub fn angle<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    let d = overlap(u, v)?;
    Ok(num_traits::clamp(d, -T::one(), T::one()).acos())
}

fn check_square_finite<T: Scalar>(a: &Mat<T>, reference: &[T], what: &str) -> Result<usize> {
    if !a.is_square() {
        return Err(CoreError::NotSquare {
            rows: a.n_rows(),
            cols: a.n_cols(),
        });
    }
    if !a.all_finite() {
        return Err(CoreError::NonFinite(what.into()));
    }
    if reference.len() != a.n_rows() {
        return Err(CoreError::DimensionMismatch(format!(
            "alignment reference has length {}, matrix order is {}",
            reference.len(),
            a.n_rows()
        )));
    }
    Ok(a.n_rows())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi.
///
/// The input is symmetrized as `(A + A^T) / 2` first, so tiny asymmetries
/// from accumulation order do not leak into the spectrum. Eigenvalues come
/// back sorted descending; every eigenvector is sign-aligned to
/// `reference`, and ties (within 1e-10) are ordered by descending aligned
/// first component.
pub fn eig_symmetric<T: Scalar>(a: &Mat<T>, reference: &[T]) -> Result<Spectrum<T>> {
    let n = check_square_finite(a, reference, "eig_symmetric input")?;
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
            alignment_reference: Vec::new(),
        });
    }

    let mut s = a.symmetrized();
    let mut v: Mat<T> = Mat::identity(n);
    let scale = s.max_abs();
    // Absolute off-diagonal target; quadratic convergence overshoots it.
    let stop = scale * T::epsilon() * T::cast(n as f64);

    let mut converged = scale == T::zero();
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = s[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (apq + apq);
                // tan of the rotation angle; series form avoids overflow in
                // theta^2 when the off-diagonal entry is almost negligible.
                let t = if theta.abs() > T::cast(1e12) {
                    (theta + theta).recip()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = (t * t + T::one()).sqrt().recip();
                let sn = t * c;

                // S <- G^T S G and V <- V G with the Givens rotation G in
                // the (p, q) plane.
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
                // The rotation zeroes (p, q) analytically; drop the rounding residue.
                s[(p, q)] = T::zero();
                s[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = s.max_abs_off_diagonal() <= stop;
    }
    if !converged {
        return Err(CoreError::NoConvergence {
            what: "jacobi eigendecomposition".into(),
            iterations: sweeps,
        });
    }

    // Align signs first so the tie order is defined on aligned vectors.
    let mut pairs: Vec<(T, Vec<T>)> = (0..n)
        .map(|j| {
            let col = sign_align(&v.col(j), reference)?;
            Ok((s[(j, j)], col))
        })
        .collect::<Result<_>>()?;

    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("eigenvalues are finite"));
    // Reorder runs of near-equal eigenvalues by aligned first component so
    // degenerate spectra come out the same way every run.
    let tie = T::cast(TIE_TOLERANCE);
    let mut lo = 0;
    while lo < n {
        let mut hi = lo + 1;
        while hi < n && (pairs[hi - 1].0 - pairs[hi].0).abs() <= tie {
            hi += 1;
        }
        if hi - lo > 1 {
            pairs[lo..hi].sort_by(|a, b| {
                b.1[0].partial_cmp(&a.1[0]).expect("eigenvector entries are finite")
            });
        }
        lo = hi;
    }

    let eigenvalues: Vec<T> = pairs.iter().map(|(l, _)| *l).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        alignment_reference: reference.to_vec(),
    })
}

/// Dominant eigenpair by power iteration, started from `reference`.
///
/// Returns `(eigenvalue, eigenvector, iterations)`; the eigenvector is
/// sign-aligned to `reference`. Convergence is declared when the absolute
/// residual `||A v - lambda v||` drops to `tol`. The iteration settles on
/// the eigenpair of largest eigenvalue magnitude, which is the top pair
/// for the positive-dominant matrices this crate feeds it (windowed
/// second-moment matrices); a magnitude tie between the extremes never
/// settles and fails with `NoConvergence` after `max_iter` steps.
pub fn top_eigenpair<T: Scalar>(
    a: &Mat<T>,
    reference: &[T],
    tol: T,
    max_iter: usize,
) -> Result<(T, Vec<T>, usize)> {
    check_square_finite(a, reference, "top_eigenpair input")?;
    let mut v = reference.to_vec();
    stats::normalize_in_place(&mut v, "top_eigenpair start vector")?;

    for iter in 1..=max_iter {
        let w = a.matvec(&v);
        let lambda = stats::dot(&v, &w);
        let mut resid = T::zero();
        for (wi, vi) in w.iter().zip(&v) {
            let d = *wi - lambda * *vi;
            resid += d * d;
        }
        if resid.sqrt() <= tol {
            let aligned = sign_align(&v, reference)?;
            return Ok((lambda, aligned, iter));
        }
        v = w;
        stats::normalize_in_place(&mut v, "power iterate")?;
    }
    Err(CoreError::NoConvergence {
        what: "power iteration".into(),
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn e0(n: usize) -> Vec<f64> {
        vec![1.0 / (n as f64).sqrt(); n]
    }

    /// Closed form for symmetric 2x2: (tr +- sqrt(tr^2 - 4 det)) / 2.
    fn closed_form_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
        let tr = a + c;
        let det = a * c - b * b;
        let disc = (tr * tr - 4.0 * det).sqrt();
        ((tr + disc) / 2.0, (tr - disc) / 2.0)
    }

    #[test]
    fn matches_closed_form_2x2() {
        let m = Mat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let (l1, l2) = closed_form_2x2(2.0, 1.0, 3.0);
        let s = eig_symmetric(&m, &e0(2)).unwrap();
        assert_relative_eq!(s.eigenvalues[0], l1, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[1], l2, epsilon = 1e-12);
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let s = eig_symmetric(&Mat::<f64>::identity(5), &e0(5)).unwrap();
        for l in &s.eigenvalues {
            assert_relative_eq!(*l, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn swap_matrix_eigenpairs() {
        // [[0,1],[1,0]] has eigenvalues 1 and -1 with vectors (1,1) and (1,-1).
        let m = Mat::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = eig_symmetric(&m, &e0(2)).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[1], -1.0, epsilon = 1e-12);
        let top = s.eigenvector(0);
        assert_relative_eq!(top[0], r, epsilon = 1e-12);
        assert_relative_eq!(top[1], r, epsilon = 1e-12);
        // The second vector is orthogonal to the reference; the fallback
        // makes its first component positive.
        let bottom = s.eigenvector(1);
        assert_relative_eq!(bottom[0], r, epsilon = 1e-12);
        assert_relative_eq!(bottom[1], -r, epsilon = 1e-12);
    }

    #[test]
    fn equicorrelation_spectrum_is_known() {
        // 3x3 with off-diagonal 0.5: eigenvalues 2, 0.5, 0.5 and the top
        // eigenvector is uniform.
        let m = Mat::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let s = eig_symmetric(&m, &e0(3)).unwrap();
        assert_relative_eq!(s.eigenvalues[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[2], 0.5, epsilon = 1e-12);
        for x in s.eigenvector(0) {
            assert_relative_eq!(x, 1.0 / 3.0f64.sqrt(), epsilon = 1e-12);
        }
    }

    fn random_symmetric(n: usize, seed: u64) -> Mat<f64> {
        let mut rng = crate::rng::substream(seed, "test-sym", 0);
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn decomposition_invariants_hold() {
        let m = random_symmetric(8, 3);
        let s = eig_symmetric(&m, &e0(8)).unwrap();

        // Orthonormality of the eigenvector basis.
        for i in 0..8 {
            for j in 0..8 {
                let d = stats::dot(&s.eigenvector(i), &s.eigenvector(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (d - expect).abs() <= 1e-10,
                    "V^T V deviates at ({i},{j}): {d}"
                );
            }
        }

        // Reconstruction.
        let r = s.reconstruct();
        let tol = 1e-8 * m.max_abs().max(1.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!(
                    (r[(i, j)] - m[(i, j)]).abs() <= tol,
                    "reconstruction deviates at ({i},{j})"
                );
            }
        }

        // Trace identity.
        let lsum: f64 = s.eigenvalues.iter().sum();
        assert!((lsum - m.trace()).abs() <= 1e-8 * 8.0);

        // Ordering.
        for w in s.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-15);
        }
    }

    #[test]
    fn degenerate_eigenvalues_order_deterministically() {
        // diag(1, 1): both eigenvalues tie; aligned vectors are e1, e2 and
        // the tie-break puts the larger first component first.
        let m = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = eig_symmetric(&m, &[0.6, 0.8]).unwrap();
        assert_eq!(s.eigenvector(0), vec![1.0, 0.0]);
        assert_eq!(s.eigenvector(1), vec![0.0, 1.0]);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let m = random_symmetric(7, 11);
        let a = eig_symmetric(&m, &e0(7)).unwrap();
        let b = eig_symmetric(&m, &e0(7)).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn top_eigenpair_matches_full_decomposition() {
        let n = 6;
        // Equicorrelation plus a mild random symmetric perturbation keeps a
        // separated positive dominant eigenvalue.
        let mut m = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.4 });
        let p = random_symmetric(n, 5);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += 0.05 * p[(i, j)];
            }
        }
        let full = eig_symmetric(&m, &e0(n)).unwrap();
        let (l, v, iters) = top_eigenpair(&m, &e0(n), 1e-10, 10_000).unwrap();
        assert!(iters < 10_000);
        assert!((l - full.eigenvalues[0]).abs() <= 1e-8);
        for (a, b) in v.iter().zip(full.eigenvector(0)) {
            assert!((a - b).abs() <= 1e-6, "vector mismatch: {a} vs {b}");
        }
    }

    #[test]
    fn power_iteration_fails_without_a_dominant_gap() {
        // Eigenvalues +2 and -2 tie in magnitude: the iterate oscillates
        // between two directions and the residual never drops.
        let m = Mat::from_rows(vec![vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let r = top_eigenpair(&m, &[1.0, 0.1], 1e-12, 50);
        assert!(matches!(r, Err(CoreError::NoConvergence { .. })));
    }

    #[test]
    fn sign_align_cases() {
        let reference = [1.0, 0.0];
        assert_eq!(sign_align(&[-0.5, 0.5], &reference).unwrap(), vec![0.5, -0.5]);
        assert_eq!(sign_align(&[0.5, 0.5], &reference).unwrap(), vec![0.5, 0.5]);
        // Orthogonal: first nonzero component made positive.
        assert_eq!(sign_align(&[0.0, -1.0], &reference).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            sign_align(&[0.0, 0.0], &reference),
            Err(CoreError::ZeroVector(_))
        ));
    }

    #[test]
    fn angle_uses_signed_inner_product() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), pi / 2.0);
        assert_relative_eq!(angle(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        // Antiparallel vectors are at angle pi, not 0.
        assert_relative_eq!(angle(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), pi);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rect = Mat::<f64>::zeros(2, 3);
        assert!(matches!(
            eig_symmetric(&rect, &[1.0, 0.0]),
            Err(CoreError::NotSquare { .. })
        ));
        let mut bad = Mat::<f64>::identity(2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(
            eig_symmetric(&bad, &[1.0, 0.0]),
            Err(CoreError::NonFinite(_))
        ));
        assert!(matches!(
            eig_symmetric(&Mat::<f64>::identity(2), &[1.0]),
            Err(CoreError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat::<f32>::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let s = eig_symmetric(&m, &[0.577f32, 0.577, 0.577]).unwrap();
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-5);
    }
}
