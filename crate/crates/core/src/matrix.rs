//! Dense row-major matrix.
//!
//! The crate owns its matrix type instead of pulling in a linear-algebra
//! stack because bit-reproducibility across runs and thread counts is a
//! hard requirement: every reduction here has a fixed evaluation order.
//! The operation set is intentionally small; only what the estimators use.
//!
//! Serialized form is row-major nested arrays, the same shape the CLI
//! writes into JSON reports.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::stats;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    /// Zero matrix of the given shape.
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds from a closure over (row, col).
    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Mat { n_rows, n_cols, data }
    }

    /// Builds from row-major nested vectors; rows must be equal length.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(CoreError::DimensionMismatch(format!(
                    "row {i} has length {}, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Mat { n_rows, n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Mutable row `i`.
    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Column `j` copied out.
    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    /// Flat row-major data.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Row-major nested vectors (the JSON export shape).
    pub fn to_nested_rows(&self) -> Vec<Vec<T>> {
        (0..self.n_rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for x in &self.data {
            let a = x.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_abs_off_diagonal(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                if i != j {
                    let a = self[(i, j)].abs();
                    if a > m {
                        m = a;
                    }
                }
            }
        }
        m
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        stats::dot(&self.data, &self.data).sqrt()
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> T {
        debug_assert!(self.is_square());
        let mut acc = T::zero();
        for i in 0..self.n_rows {
            acc += self[(i, i)];
        }
        acc
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Mat<T> {
        debug_assert!(self.is_square());
        let half = T::cast(0.5);
        Mat::from_fn(self.n_rows, self.n_cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> T {
        debug_assert!(self.is_square());
        let mut m = T::zero();
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                let a = (self[(i, j)] - self[(j, i)]).abs();
                if a > m {
                    m = a;
                }
            }
        }
        m
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n_cols);
        (0..self.n_rows).map(|i| stats::dot(self.row(i), v)).collect()
    }

    /// Quadratic form `v^T A v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        stats::dot(v, &self.matvec(v))
    }

    /// `self + s * other`, shapes must match.
    pub fn add_scaled(&self, other: &Mat<T>, s: T) -> Mat<T> {
        debug_assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(&other.data) {
            *o += s * *x;
        }
        out
    }

    /// Multiplies every entry by `s` in place.
    pub fn scale_in_place(&mut self, s: T) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// Adds `s * v v^T` in place (square matrices).
    pub fn add_scaled_outer(&mut self, v: &[T], s: T) {
        debug_assert!(self.is_square());
        debug_assert_eq!(v.len(), self.n_rows);
        for i in 0..self.n_rows {
            let vi = v[i] * s;
            let row = self.row_mut(i);
            for (j, r) in row.iter_mut().enumerate() {
                *r += vi * v[j];
            }
        }
    }

    /// Cholesky factor `L` with `L L^T = A`, or `None` when a pivot is not
    /// strictly positive (matrix not positive definite to working precision).
    pub fn cholesky(&self) -> Option<Mat<T>> {
        debug_assert!(self.is_square());
        let n = self.n_rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = self[(i, j)];
                for k in 0..j {
                    acc -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(acc > T::zero()) || !acc.is_finite() {
                        return None;
                    }
                    l[(i, i)] = acc.sqrt();
                } else {
                    l[(i, j)] = acc / l[(j, j)];
                }
            }
        }
        Some(l)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &self.data[i * self.n_cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        &mut self.data[i * self.n_cols + j]
    }
}

impl<T: Scalar + Serialize> Serialize for Mat<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.n_rows))?;
        for i in 0..self.n_rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Mat<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RowsVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Scalar + Deserialize<'de>> Visitor<'de> for RowsVisitor<T> {
            type Value = Mat<T>;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("row-major nested arrays of numbers")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Mat<T>, A::Error> {
                let mut rows: Vec<Vec<T>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<T>>()? {
                    rows.push(row);
                }
                Mat::from_rows(rows).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(RowsVisitor(std::marker::PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn index_and_rows_agree() {
        let m = Mat::from_rows(vec![vec![1.0f64, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.col(0), vec![1.0, 3.0]);
        assert_eq!(m.trace(), 5.0);
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        let r = Mat::from_rows(vec![vec![1.0f64, 2.0], vec![3.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn symmetrized_halves_asymmetry() {
        let m = Mat::from_rows(vec![vec![1.0f64, 2.0], vec![0.0, 1.0]]).unwrap();
        let s = m.symmetrized();
        assert_eq!(s[(0, 1)], 1.0);
        assert_eq!(s[(1, 0)], 1.0);
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn matvec_and_quadratic_form() {
        let m = Mat::from_rows(vec![vec![2.0f64, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![2.0, 3.0]);
        assert_eq!(m.quadratic_form(&[1.0, 2.0]), 2.0 + 12.0);
    }

    #[test]
    fn cholesky_reconstructs_spd_matrix() {
        let a = Mat::from_rows(vec![
            vec![4.0f64, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ])
        .unwrap();
        let l = a.cholesky().expect("SPD matrix must factor");
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += l[(i, k)] * l[(j, k)];
                }
                assert_relative_eq!(acc, a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = Mat::from_rows(vec![vec![1.0f64, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn serde_round_trip_is_nested_rows() {
        let m = Mat::from_rows(vec![vec![1.5f64, -2.0], vec![0.25, 8.0]]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[1.5,-2.0],[0.25,8.0]]");
        let back: Mat<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
