//! Small vector statistics used across the crate.
//!
//! All accumulations run left to right in index order so results are
//! bit-identical across runs and thread counts.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Dot product, sequential accumulation.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// Euclidean norm.
#[inline]
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Scales `v` to unit Euclidean norm in place. Errors on a zero vector.
pub fn normalize_in_place<T: Scalar>(v: &mut [T], what: &str) -> Result<()> {
    let n = norm2(v);
    if n == T::zero() {
        return Err(CoreError::ZeroVector(what.to_string()));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

/// Arithmetic mean.
#[inline]
pub fn mean<T: Scalar>(v: &[T]) -> T {
    let mut acc = T::zero();
    for x in v {
        acc += *x;
    }
    acc / T::cast(v.len() as f64)
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance<T: Scalar>(v: &[T]) -> T {
    debug_assert!(v.len() >= 2, "sample variance needs at least two points");
    let m = mean(v);
    let mut acc = T::zero();
    for x in v {
        let d = *x - m;
        acc += d * d;
    }
    acc / T::cast((v.len() - 1) as f64)
}

/// Centers and scales `v` to mean 0 and unit sample standard deviation
/// (divisor `n - 1`). Returns the (mean, std) that were removed.
///
/// Errors with `ZeroVariance` when the series is constant; the variance
/// threshold is absolute because every caller feeds O(1)-scale data.
pub fn standardize_in_place<T: Scalar>(v: &mut [T], what: &str) -> Result<(T, T)> {
    if v.len() < 2 {
        return Err(CoreError::SeriesTooShort {
            needed: 2,
            actual: v.len(),
        });
    }
    let m = mean(v);
    let var = sample_variance(v);
    if var < T::cast(1e-24) {
        return Err(CoreError::ZeroVariance(what.to_string()));
    }
    let sd = var.sqrt();
    for x in v.iter_mut() {
        *x = (*x - m) / sd;
    }
    Ok((m, sd))
}

/// Pearson correlation of two equal-length series.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "pearson inputs have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut ca = a.to_vec();
    let mut cb = b.to_vec();
    standardize_in_place(&mut ca, "pearson lhs")?;
    standardize_in_place(&mut cb, "pearson rhs")?;
    Ok(dot(&ca, &cb) / T::cast((a.len() - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standardize_maps_1_2_3_to_unit_steps() {
        // (1,2,3) has mean 2 and sample std exactly 1.
        let mut v = vec![1.0f64, 2.0, 3.0];
        let (m, sd) = standardize_in_place(&mut v, "test").unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(sd, 1.0);
        assert_eq!(v, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.71).sin() * 3.0 + 1.0).collect();
        standardize_in_place(&mut v, "test").unwrap();
        let first = v.clone();
        standardize_in_place(&mut v, "test").unwrap();
        for (a, b) in first.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-12, "idempotence violated: {a} vs {b}");
        }
    }

    #[test]
    fn standardize_rejects_constant_series() {
        let mut v = vec![4.0f64; 10];
        assert!(matches!(
            standardize_in_place(&mut v, "test"),
            Err(CoreError::ZeroVariance(_))
        ));
    }

    #[test]
    fn pearson_of_identical_series_is_one() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        assert_relative_eq!(pearson(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }
}
