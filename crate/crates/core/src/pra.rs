//! Principal regression: instantaneous correlations on lagged indicators.
//!
//! The response is the rank-one instantaneous correlation outer product
//! rho_ij(t) = r_i(t) r_j(t); the model is rho_ij(t) = C_ij + sum_F
//! D_F_ij x_F(t - tau) + eps. The estimators never materialize the
//! T x N^2 design: they fold moment accumulators (running sums of
//! rho, z * rho, rho^2) over time in index order, which keeps memory at
//! O(N^2) and makes results bit-identical across runs and thread counts.
//!
//! All slope matrices are exactly symmetric (built on the upper triangle
//! and mirrored), and refitting against a negated predictor negates the
//! slopes bit-for-bit, which pins the sign conventions downstream.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::indicators::{Indicator, IndicatorKind};
use crate::matrix::Mat;
use crate::panel::ReturnsPanel;
use crate::scalar::Scalar;
use crate::spectra::{self, Spectrum};
use crate::stats;

/// Divisor used for the intercept estimate (time average of rho).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the aligned sample size T_s.
    SampleSize,
    /// Divide by T_s - 1; matches the panel's standardization divisor, so
    /// the intercept diagonal of a standardized panel is exactly one when
    /// the sample covers the standardization window.
    SampleSizeMinusOne,
}

/// Fit configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PraConfig {
    /// Indicator lag in days; must be at least 1 (the contemporaneous fit
    /// is not causal and is rejected).
    pub tau: usize,
    pub normalization: Normalization,
}

impl Default for PraConfig {
    fn default() -> Self {
        PraConfig {
            tau: 1,
            normalization: Normalization::SampleSizeMinusOne,
        }
    }
}

/// Result of a principal regression.
#[derive(Debug, Clone)]
pub struct PraFit<T: Scalar> {
    /// Unconditional correlation estimate C (N x N, symmetric).
    pub intercept: Mat<T>,
    /// One sensitivity matrix D_F per factor, same order as
    /// `factor_kinds`.
    pub sensitivities: Vec<Mat<T>>,
    pub factor_kinds: Vec<IndicatorKind>,
    /// Aligned sample size T_s.
    pub sample_count: usize,
    /// Mean squared residual over all N^2 pairs and sample dates.
    pub residual_power: T,
    /// Spectrum of C, aligned to the panel's uniform mode.
    pub intercept_spectrum: Spectrum<T>,
    /// Spectrum of each D_F, aligned to the top eigenvector of C.
    pub sensitivity_spectra: Vec<Spectrum<T>>,
}

impl<T: Scalar> PraFit<T> {
    /// Top eigenvector of the intercept matrix.
    pub fn market_mode(&self) -> Vec<T> {
        self.intercept_spectrum.eigenvector(0)
    }
}

/// Instantaneous correlation matrix r(t) r(t)^T.
pub fn instantaneous_correlation<T: Scalar>(
    panel: &ReturnsPanel<T>,
    t: usize,
) -> Result<Mat<T>> {
    if t >= panel.n_dates() {
        return Err(CoreError::IndexOutOfRange {
            index: t,
            len: panel.n_dates(),
        });
    }
    let r = panel.returns_at(t);
    let mut m = Mat::zeros(panel.n_assets(), panel.n_assets());
    m.add_scaled_outer(&r, T::one());
    Ok(m)
}

/// Time average of the instantaneous correlations over `[t0, T)` with the
/// configured divisor.
pub fn unconditional_correlation_range<T: Scalar>(
    panel: &ReturnsPanel<T>,
    t0: usize,
    normalization: Normalization,
) -> Result<Mat<T>> {
    let sample = AlignedSample::new(panel, t0)?;
    Ok(sample.intercept(normalization))
}

/// Time average of the instantaneous correlations over the whole panel.
pub fn unconditional_correlation<T: Scalar>(
    panel: &ReturnsPanel<T>,
    config: &PraConfig,
) -> Result<Mat<T>> {
    unconditional_correlation_range(panel, 0, config.normalization)
}

/// Signed average off-diagonal correlation:
/// `(1 / (N (N-1))) sum_{i != j} s_i s_j rho_ij`.
pub fn avg_signed_correlation<T: Scalar>(rho: &Mat<T>, signs: &[T]) -> Result<T> {
    if !rho.is_square() {
        return Err(CoreError::NotSquare {
            rows: rho.n_rows(),
            cols: rho.n_cols(),
        });
    }
    let n = rho.n_rows();
    if signs.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "sign vector has length {}, matrix order is {n}",
            signs.len()
        )));
    }
    if n < 2 {
        return Err(CoreError::BadArgument(
            "signed average needs at least two assets".into(),
        ));
    }
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += signs[i] * signs[j] * rho[(i, j)];
            }
        }
    }
    Ok(acc / T::cast((n * (n - 1)) as f64))
}

/// Per-date signed average correlation series, using the identity
/// `sum_{i != j} s_i s_j r_i r_j = (s . r)^2 - ||r||^2` (valid because
/// every `s_i^2 = 1`), which avoids forming the N x N matrix per date.
pub fn avg_signed_correlation_series<T: Scalar>(panel: &ReturnsPanel<T>) -> Vec<T> {
    let n = panel.n_assets();
    let denom = T::cast((n * (n - 1)) as f64);
    (0..panel.n_dates())
        .map(|t| {
            let r = panel.returns_at(t);
            let sr = stats::dot(&panel.sign_vector, &r);
            let rr = stats::dot(&r, &r);
            (sr * sr - rr) / denom
        })
        .collect()
}

fn mirror_upper<T: Scalar>(m: &mut Mat<T>) {
    for i in 0..m.n_rows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Moment accumulators of a panel over an aligned sample `[t0, T)`.
///
/// Holds `M0 = sum_t r r^T` and `S2_ij = sum_t (r_i r_j)^2`, which are
/// shared by every fit on the same sample. Each predictor then only costs
/// the cross-moment pass (`slope_from_z`), which is what makes large null
/// ensembles affordable.
pub(crate) struct AlignedSample<'p, T: Scalar> {
    panel: &'p ReturnsPanel<T>,
    pub t0: usize,
    pub t_s: usize,
    m0: Mat<T>,
    s2: Mat<T>,
}

impl<'p, T: Scalar> AlignedSample<'p, T> {
    pub fn new(panel: &'p ReturnsPanel<T>, t0: usize) -> Result<Self> {
        let t_len = panel.n_dates();
        if t0 + 2 > t_len {
            return Err(CoreError::SampleTooSmall {
                needed: 2,
                actual: t_len.saturating_sub(t0),
            });
        }
        let n = panel.n_assets();
        let mut m0 = Mat::zeros(n, n);
        let mut s2 = Mat::zeros(n, n);
        let mut r = vec![T::zero(); n];
        for t in t0..t_len {
            for i in 0..n {
                r[i] = panel.returns[(i, t)];
            }
            for i in 0..n {
                let ri = r[i];
                for j in i..n {
                    let p = ri * r[j];
                    m0[(i, j)] += p;
                    s2[(i, j)] += p * p;
                }
            }
        }
        mirror_upper(&mut m0);
        mirror_upper(&mut s2);
        Ok(AlignedSample {
            panel,
            t0,
            t_s: t_len - t0,
            m0,
            s2,
        })
    }

    /// Intercept estimate under the given divisor.
    pub fn intercept(&self, normalization: Normalization) -> Mat<T> {
        let div = match normalization {
            Normalization::SampleSize => self.t_s,
            Normalization::SampleSizeMinusOne => self.t_s - 1,
        };
        let mut c = self.m0.clone();
        c.scale_in_place(T::cast(div as f64).recip());
        c
    }

    /// Centers and unit-scales a predictor slice for this sample.
    pub fn standardize_predictor(&self, raw: &[T]) -> Result<Vec<T>> {
        debug_assert_eq!(raw.len(), self.t_s);
        let mut z = raw.to_vec();
        stats::standardize_in_place(&mut z, "predictor over aligned sample")?;
        Ok(z)
    }

    /// OLS slope matrix for an already standardized predictor `z` (length
    /// T_s, mean 0): `D = (sum_t z(t) r r^T) / (sum_t z(t)^2)`,
    /// symmetrized exactly by mirroring the upper triangle.
    pub fn slope_from_z(&self, z: &[T]) -> Mat<T> {
        debug_assert_eq!(z.len(), self.t_s);
        let n = self.panel.n_assets();
        let t_len = self.panel.n_dates();
        let mut m1 = Mat::zeros(n, n);
        let mut r = vec![T::zero(); n];
        for (idx, t) in (self.t0..t_len).enumerate() {
            let w = z[idx];
            for i in 0..n {
                r[i] = self.panel.returns[(i, t)];
            }
            for i in 0..n {
                let wi = w * r[i];
                for j in i..n {
                    m1[(i, j)] += wi * r[j];
                }
            }
        }
        mirror_upper(&mut m1);
        let sum_z2 = stats::dot(z, z);
        m1.scale_in_place(sum_z2.recip());
        m1
    }

    /// Cross-moment matrices `M1_a = sum_t z_a(t) r r^T` for several
    /// predictors in one pass.
    fn cross_moments(&self, zs: &[Vec<T>]) -> Vec<Mat<T>> {
        let n = self.panel.n_assets();
        let t_len = self.panel.n_dates();
        let p = zs.len();
        let mut m1s = vec![Mat::zeros(n, n); p];
        let mut r = vec![T::zero(); n];
        for (idx, t) in (self.t0..t_len).enumerate() {
            for i in 0..n {
                r[i] = self.panel.returns[(i, t)];
            }
            for i in 0..n {
                let ri = r[i];
                for j in i..n {
                    let pij = ri * r[j];
                    for (a, m1) in m1s.iter_mut().enumerate() {
                        m1[(i, j)] += zs[a][idx] * pij;
                    }
                }
            }
        }
        for m1 in &mut m1s {
            mirror_upper(m1);
        }
        m1s
    }

    /// Mean squared residual of the fitted plane over all pairs and dates.
    ///
    /// Uses `sum eps^2 = S2 - T_s b0^2 - sum_a d_a m_a` per pair, where b0
    /// is the per-pair OLS intercept (the plain mean) and m_a the
    /// cross-moments; clamped at zero against cancellation.
    fn residual_power(&self, slopes: &[Mat<T>], m1s: &[Mat<T>]) -> T {
        let n = self.panel.n_assets();
        let ts = T::cast(self.t_s as f64);
        let inv_ts = ts.recip();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let b0 = self.m0[(i, j)] * inv_ts;
                let mut sse = self.s2[(i, j)] - ts * b0 * b0;
                for (d, m1) in slopes.iter().zip(m1s) {
                    sse -= d[(i, j)] * m1[(i, j)];
                }
                if sse > T::zero() {
                    total += sse;
                }
            }
        }
        total / (T::cast((n * n) as f64) * ts)
    }
}

fn check_indicator_alignment<T: Scalar>(
    panel: &ReturnsPanel<T>,
    x: &Indicator<T>,
) -> Result<()> {
    if x.len() != panel.n_dates() {
        return Err(CoreError::DimensionMismatch(format!(
            "indicator covers {} dates, panel has {}",
            x.len(),
            panel.n_dates()
        )));
    }
    Ok(())
}

fn check_tau(tau: usize) -> Result<()> {
    if tau == 0 {
        return Err(CoreError::BadArgument(
            "lag must be at least 1: a contemporaneous fit is not causal".into(),
        ));
    }
    Ok(())
}

/// Fits `rho_ij(t) = C_ij + D_ij x(t - tau) + eps` on the aligned sample
/// `t in [x.valid_from + tau, T)`.
///
/// The predictor is re-standardized over the aligned sample, so slopes are
/// per unit indicator standard deviation. The spectra of C and D are
/// computed with C aligned to the panel's uniform mode and D aligned to
/// the top eigenvector of C.
pub fn fit_single<T: Scalar>(
    panel: &ReturnsPanel<T>,
    x: &Indicator<T>,
    config: &PraConfig,
) -> Result<PraFit<T>> {
    check_tau(config.tau)?;
    check_indicator_alignment(panel, x)?;
    let t0 = x.valid_from + config.tau;
    let t_len = panel.n_dates();
    if t0 + 2 > t_len {
        return Err(CoreError::SampleTooSmall {
            needed: 2,
            actual: t_len.saturating_sub(t0),
        });
    }
    let sample = AlignedSample::new(panel, t0)?;
    let z = sample.standardize_predictor(&x.values[t0 - config.tau..t_len - config.tau])?;

    let d = sample.slope_from_z(&z);
    let sum_z2 = stats::dot(&z, &z);
    // slope_from_z already divided by sum z^2; scale back to get M1 for
    // the residual identity.
    let mut m1 = d.clone();
    m1.scale_in_place(sum_z2);

    let c = sample.intercept(config.normalization);
    let residual_power = sample.residual_power(std::slice::from_ref(&d), std::slice::from_ref(&m1));

    let intercept_spectrum = spectra::eig_symmetric(&c, &panel.uniform_mode)?;
    let market_mode = intercept_spectrum.eigenvector(0);
    let sensitivity_spectrum = spectra::eig_symmetric(&d, &market_mode)?;

    Ok(PraFit {
        intercept: c,
        sensitivities: vec![d],
        factor_kinds: vec![x.kind],
        sample_count: sample.t_s,
        residual_power,
        intercept_spectrum,
        sensitivity_spectra: vec![sensitivity_spectrum],
    })
}

/// Joint fit on several factors:
/// `rho_ij(t) = C_ij + sum_a D_a_ij x_a(t - tau) + eps`.
///
/// Factors are each re-standardized over the common aligned sample (which
/// starts at the latest `valid_from`); slopes solve the p x p Gram system.
/// Factors whose Gram matrix has condition number 1e8 or worse are
/// rejected as collinear.
pub fn fit_multi<T: Scalar>(
    panel: &ReturnsPanel<T>,
    xs: &[Indicator<T>],
    config: &PraConfig,
) -> Result<PraFit<T>> {
    check_tau(config.tau)?;
    if xs.len() < 2 {
        return Err(CoreError::BadArgument(format!(
            "joint fit needs at least 2 factors, got {}",
            xs.len()
        )));
    }
    for x in xs {
        check_indicator_alignment(panel, x)?;
    }
    let t_len = panel.n_dates();
    let valid_from = xs.iter().map(|x| x.valid_from).max().expect("non-empty");
    let t0 = valid_from + config.tau;
    if t0 + 2 > t_len {
        return Err(CoreError::SampleTooSmall {
            needed: 2,
            actual: t_len.saturating_sub(t0),
        });
    }
    let sample = AlignedSample::new(panel, t0)?;
    let p = xs.len();
    let zs: Vec<Vec<T>> = xs
        .iter()
        .map(|x| sample.standardize_predictor(&x.values[t0 - config.tau..t_len - config.tau]))
        .collect::<Result<_>>()?;

    // Gram system in the standardized factors.
    let gram = Mat::from_fn(p, p, |a, b| stats::dot(&zs[a], &zs[b]));
    let ones = vec![T::cast(1.0 / (p as f64).sqrt()); p];
    let gram_spectrum = spectra::eig_symmetric(&gram, &ones)?;
    let lmax = gram_spectrum.lambda_max();
    let lmin = gram_spectrum.lambda_min();
    let condition = if lmin <= T::zero() {
        f64::INFINITY
    } else {
        (lmax / lmin).to_f64_lossy()
    };
    if condition >= 1e8 {
        return Err(CoreError::CollinearFactors { condition });
    }
    // Inverse through the spectrum (p is tiny).
    let mut gram_inv = Mat::zeros(p, p);
    for k in 0..p {
        gram_inv.add_scaled_outer(
            &gram_spectrum.eigenvector(k),
            gram_spectrum.eigenvalues[k].recip(),
        );
    }

    let m1s = sample.cross_moments(&zs);
    let slopes: Vec<Mat<T>> = (0..p)
        .map(|a| {
            let mut d = Mat::zeros(panel.n_assets(), panel.n_assets());
            for b in 0..p {
                d = d.add_scaled(&m1s[b], gram_inv[(a, b)]);
            }
            d
        })
        .collect();

    let c = sample.intercept(config.normalization);
    let residual_power = sample.residual_power(&slopes, &m1s);

    let intercept_spectrum = spectra::eig_symmetric(&c, &panel.uniform_mode)?;
    let market_mode = intercept_spectrum.eigenvector(0);
    let sensitivity_spectra: Vec<Spectrum<T>> = slopes
        .iter()
        .map(|d| spectra::eig_symmetric(d, &market_mode))
        .collect::<Result<_>>()?;

    Ok(PraFit {
        intercept: c,
        sensitivities: slopes,
        factor_kinds: xs.iter().map(|x| x.kind).collect(),
        sample_count: sample.t_s,
        residual_power,
        intercept_spectrum,
        sensitivity_spectra,
    })
}

/// Model-implied top eigenvalue of the conditional correlation at the
/// given factor values:
/// `lambda1(C) + sum_F x_F lambda*_F <v1(C), v*_F>^2`, where
/// `(lambda*_F, v*_F)` is the extreme eigenpair of D_F (top or bottom)
/// with the larger `|lambda| overlap^2` contribution.
pub fn implied_top_eigenvalue<T: Scalar>(fit: &PraFit<T>, factor_values: &[T]) -> Result<T> {
    if factor_values.len() != fit.sensitivities.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} factor values for {} factors",
            factor_values.len(),
            fit.sensitivities.len()
        )));
    }
    let v1c = fit.market_mode();
    let mut implied = fit.intercept_spectrum.lambda_max();
    for (spec, x) in fit.sensitivity_spectra.iter().zip(factor_values) {
        let n = spec.order();
        let top = (spec.eigenvalues[0], spec.eigenvector(0));
        let bottom = (spec.eigenvalues[n - 1], spec.eigenvector(n - 1));
        let score = |pair: &(T, Vec<T>)| {
            let ov = stats::dot(&v1c, &pair.1);
            pair.0.abs() * ov * ov
        };
        // Bottom wins ties so the negative market-mode response dominates
        // when both extremes contribute equally.
        let pair = if score(&bottom) >= score(&top) { bottom } else { top };
        let ov = stats::dot(&v1c, &pair.1);
        implied += *x * pair.0 * ov * ov;
    }
    Ok(implied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::IndicatorKind;
    use crate::panel::{AssetMeta, Sector};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn meta(n: usize) -> Vec<AssetMeta> {
        (0..n)
            .map(|i| AssetMeta {
                asset_id: format!("a{i:02}"),
                sector: Sector::Idx,
                market: "TEST".into(),
            })
            .collect()
    }

    fn dates(t: usize) -> Vec<String> {
        (0..t).map(|i| format!("d{i:05}")).collect()
    }

    fn panel_from_rows(rows: Vec<Vec<f64>>) -> ReturnsPanel<f64> {
        let t = rows[0].len();
        let n = rows.len();
        ReturnsPanel::new_unchecked(meta(n), dates(t), Mat::from_rows(rows).unwrap())
    }

    fn indicator(values: Vec<f64>) -> Indicator<f64> {
        Indicator {
            values,
            valid_from: 0,
            kind: IndicatorKind::Synthetic,
            beta: None,
            cutoff: None,
        }
    }

    #[test]
    fn hand_ols_oracle() {
        // Aligned sample: predictor (-1, 0, 1), pair product series
        // (2, 1, 0). By hand: slope = -1, mean intercept = 1.
        let panel = panel_from_rows(vec![
            vec![0.0, 2.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0, 1.0],
        ]);
        let x = indicator(vec![-1.0, 0.0, 1.0, 99.0]);
        let config = PraConfig {
            tau: 1,
            normalization: Normalization::SampleSize,
        };
        let fit = fit_single(&panel, &x, &config).unwrap();
        assert_eq!(fit.sample_count, 3);
        assert_relative_eq!(fit.sensitivities[0][(0, 1)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept[(0, 1)], 1.0, epsilon = 1e-12);

        // The T_s - 1 divisor scales the intercept by T_s / (T_s - 1).
        let fit2 = fit_single(&panel, &x, &PraConfig::default()).unwrap();
        assert_relative_eq!(fit2.intercept[(0, 1)], 1.5, epsilon = 1e-12);
        assert_relative_eq!(fit2.sensitivities[0][(0, 1)], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn intercept_diagonal_is_exactly_one_for_matched_divisor() {
        // Each row has sum of squares exactly T_s - 1 = 2 over the aligned
        // sample, so the T_s - 1 divisor gives a unit diagonal exactly.
        let panel = panel_from_rows(vec![
            vec![9.0, 1.0, -1.0, 0.0],
            vec![7.0, 0.0, 1.0, -1.0],
        ]);
        let x = indicator(vec![-1.0, 0.0, 1.0, 0.0]);
        let fit = fit_single(&panel, &x, &PraConfig::default()).unwrap();
        assert_eq!(fit.intercept[(0, 0)], 1.0);
        assert_eq!(fit.intercept[(1, 1)], 1.0);
    }

    #[test]
    fn negated_predictor_negates_slopes_bitwise() {
        let mut rng = crate::rng::substream(21, "neg", 0);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let panel = panel_from_rows(rows);
        let xv: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = indicator(xv.clone());
        let neg = indicator(xv.iter().map(|v| -v).collect());
        let fit_pos = fit_single(&panel, &x, &PraConfig::default()).unwrap();
        let fit_neg = fit_single(&panel, &neg, &PraConfig::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = fit_pos.sensitivities[0][(i, j)];
                let b = fit_neg.sensitivities[0][(i, j)];
                assert_eq!(a, -b, "slope ({i},{j}) is not an exact negation");
            }
        }
        assert_eq!(fit_pos.intercept, fit_neg.intercept);
    }

    #[test]
    fn instantaneous_correlation_is_rank_one() {
        let panel = panel_from_rows(vec![vec![0.5, -1.0], vec![2.0, 0.3]]);
        let m = instantaneous_correlation(&panel, 0).unwrap();
        let s = spectra::eig_symmetric(&m, &panel.uniform_mode).unwrap();
        let norm2 = 0.5 * 0.5 + 2.0 * 2.0;
        assert_relative_eq!(s.eigenvalues[0], norm2, epsilon = 1e-12);
        assert_relative_eq!(s.eigenvalues[1], 0.0, epsilon = 1e-12);
        assert!(matches!(
            instantaneous_correlation(&panel, 5),
            Err(CoreError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn unconditional_diagonal_is_unit_for_standardized_panel() {
        let mut rng = crate::rng::substream(22, "diag", 0);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut row: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
                stats::standardize_in_place(&mut row, "row").unwrap();
                row
            })
            .collect();
        let panel = panel_from_rows(rows);
        let c = unconditional_correlation(&panel, &PraConfig::default()).unwrap();
        for i in 0..4 {
            assert_relative_eq!(c[(i, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn avg_signed_correlation_oracle() {
        let rho = Mat::from_rows(vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let v = avg_signed_correlation(&rho, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(v, -0.3, epsilon = 1e-15);
        let v2 = avg_signed_correlation(&rho, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(v2, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn signed_series_matches_matrix_formula() {
        let mut rng = crate::rng::substream(23, "series", 0);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut panel = panel_from_rows(rows);
        panel.sign_vector = vec![1.0, -1.0, 1.0];
        let series = avg_signed_correlation_series(&panel);
        for t in 0..panel.n_dates() {
            let rho = instantaneous_correlation(&panel, t).unwrap();
            let direct = avg_signed_correlation(&rho, &panel.sign_vector).unwrap();
            assert_relative_eq!(series[t], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_noise_slopes_stay_small() {
        // No planted effect: every slope entry is sampling noise of order
        // 1/sqrt(T_s) and stays well under 0.15 at T = 10000.
        let mut rng = crate::rng::substream(24, "noise", 0);
        let t_len = 10_000;
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut row: Vec<f64> =
                    (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect();
                stats::standardize_in_place(&mut row, "row").unwrap();
                row
            })
            .collect();
        let panel = panel_from_rows(rows);
        let xv: Vec<f64> = (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect();
        let fit = fit_single(&panel, &indicator(xv), &PraConfig::default()).unwrap();
        assert!(fit.sensitivities[0].max_abs() < 0.15);
    }

    #[test]
    fn residual_power_vanishes_for_an_exact_linear_model() {
        // rho_11(t) = r(t)^2 = 2 + z(t) exactly, so the fit has zero
        // residual.
        let panel = panel_from_rows(vec![vec![
            5.0,
            1.0,
            2.0f64.sqrt(),
            3.0f64.sqrt(),
        ]]);
        let x = indicator(vec![-1.0, 0.0, 1.0, 0.0]);
        let fit = fit_single(&panel, &x, &PraConfig::default()).unwrap();
        assert!(fit.residual_power.abs() < 1e-14);
        assert_relative_eq!(fit.sensitivities[0][(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_samples_are_rejected() {
        let panel = panel_from_rows(vec![vec![1.0, -1.0, 0.5]]);
        let mut x = indicator(vec![0.0, 1.0, 2.0]);
        x.valid_from = 1;
        assert!(matches!(
            fit_single(&panel, &x, &PraConfig::default()),
            Err(CoreError::SampleTooSmall { .. })
        ));
        let x0 = indicator(vec![0.0, 1.0, 2.0]);
        let bad_tau = PraConfig {
            tau: 0,
            normalization: Normalization::SampleSizeMinusOne,
        };
        assert!(matches!(
            fit_single(&panel, &x0, &bad_tau),
            Err(CoreError::BadArgument(_))
        ));
    }

    #[test]
    fn multi_fit_with_orthogonal_factors_matches_single_fits() {
        let mut rng = crate::rng::substream(25, "ortho", 0);
        let t_len = 500;
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect())
            .collect();
        let panel = panel_from_rows(rows);

        // Build two factors and orthogonalize the second against the first
        // over the aligned predictor sample [0, T-1).
        let mut a: Vec<f64> = (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect();
        let mut b: Vec<f64> = (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect();
        let m = t_len - 1;
        stats::standardize_in_place(&mut a[..m], "a").unwrap();
        stats::standardize_in_place(&mut b[..m], "b").unwrap();
        let proj = stats::dot(&a[..m], &b[..m]) / stats::dot(&a[..m], &a[..m]);
        for t in 0..m {
            b[t] -= proj * a[t];
        }

        let xa = indicator(a);
        let xb = indicator(b);
        let config = PraConfig::default();
        let joint = fit_multi(&panel, &[xa.clone(), xb.clone()], &config).unwrap();
        let single_a = fit_single(&panel, &xa, &config).unwrap();
        let single_b = fit_single(&panel, &xb, &config).unwrap();

        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (joint.sensitivities[0][(i, j)] - single_a.sensitivities[0][(i, j)]).abs()
                        <= 1e-8,
                    "factor A slope diverges at ({i},{j})"
                );
                assert!(
                    (joint.sensitivities[1][(i, j)] - single_b.sensitivities[0][(i, j)]).abs()
                        <= 1e-8,
                    "factor B slope diverges at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn collinear_factors_are_rejected() {
        let mut rng = crate::rng::substream(26, "coll", 0);
        let t_len = 100;
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect())
            .collect();
        let panel = panel_from_rows(rows);
        let a: Vec<f64> = (0..t_len).map(|_| f64::standard_normal(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.5 * v).collect();
        let r = fit_multi(
            &panel,
            &[indicator(a), indicator(b)],
            &PraConfig::default(),
        );
        assert!(matches!(r, Err(CoreError::CollinearFactors { .. })));
    }

    #[test]
    fn implied_top_eigenvalue_combines_reference_quantities() {
        // C with lambda1 = 19.08 and market mode e1; D = -3.1 w w^T where
        // <e1, w> = 0.93. At x = 1 the implied top eigenvalue is
        // 19.08 - 3.1 * 0.93^2 = 16.39881.
        let c = Mat::from_rows(vec![vec![19.08, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = vec![0.93, (1.0f64 - 0.93 * 0.93).sqrt()];
        let mut d = Mat::zeros(2, 2);
        d.add_scaled_outer(&w, -3.1);
        let e0 = vec![1.0 / 2.0f64.sqrt(); 2];
        let intercept_spectrum = spectra::eig_symmetric(&c, &e0).unwrap();
        let market_mode = intercept_spectrum.eigenvector(0);
        let sens_spectrum = spectra::eig_symmetric(&d, &market_mode).unwrap();
        let fit = PraFit {
            intercept: c,
            sensitivities: vec![d],
            factor_kinds: vec![IndicatorKind::Synthetic],
            sample_count: 0,
            residual_power: 0.0,
            intercept_spectrum,
            sensitivity_spectra: vec![sens_spectrum],
        };
        let implied = implied_top_eigenvalue(&fit, &[1.0]).unwrap();
        assert_relative_eq!(implied, 16.39881, epsilon = 1e-10);
        // At x = 0 the implied value is just lambda1(C).
        assert_relative_eq!(
            implied_top_eigenvalue(&fit, &[0.0]).unwrap(),
            19.08,
            epsilon = 1e-12
        );
    }
}
