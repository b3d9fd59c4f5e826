//! Market indicators: the conditioning series fits regress on.
//!
//! All indicators share one shape: a full-length series aligned to panel
//! dates, a `valid_from` index before which values are burn-in zeros, and
//! standardization (mean 0, unit sample std) over the valid range. Each
//! constructor is causal: the value at date t only reads data at or before
//! t, so a fit against the lagged series never peeks ahead.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::matrix::Mat;
use crate::panel::{ReturnsPanel, Sector};
use crate::scalar::Scalar;
use crate::spectra;
use crate::stats;

/// What an indicator series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    /// Sign-weighted average return across the panel.
    MarketIndex,
    /// Sign-weighted average return of one sector.
    SectorIndex(Sector),
    /// Truncated exponential smoothing of another indicator.
    EmaIndex,
    /// Projection of returns on the trailing-window top eigenvector,
    /// optionally smoothed.
    EigenFactor { window: usize },
    /// Generated by the synthetic sampler.
    Synthetic,
}

impl std::fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            IndicatorKind::MarketIndex => write!(f, "market"),
            IndicatorKind::SectorIndex(s) => write!(f, "sector:{s}"),
            IndicatorKind::EmaIndex => write!(f, "ema"),
            IndicatorKind::EigenFactor { window } => write!(f, "eigenfactor:{window}"),
            IndicatorKind::Synthetic => write!(f, "synthetic"),
        }
    }
}

/// A conditioning series aligned to panel dates.
#[derive(Debug, Clone, Serialize)]
pub struct Indicator<T: Scalar> {
    /// One value per panel date; entries before `valid_from` are zeros.
    pub values: Vec<T>,
    /// First index with a fully defined value.
    pub valid_from: usize,
    pub kind: IndicatorKind,
    /// Smoothing decay rate, when the series went through a kernel.
    pub beta: Option<T>,
    /// Kernel length in taps, when the series went through a kernel.
    pub cutoff: Option<usize>,
}

impl<T: Scalar> Indicator<T> {
    /// Number of dates covered.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the series is empty.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The valid segment `values[valid_from..]`.
    pub fn valid_slice(&self) -> &[T] {
        &self.values[self.valid_from..]
    }
}

fn standardize_valid<T: Scalar>(
    mut values: Vec<T>,
    valid_from: usize,
    kind: IndicatorKind,
    beta: Option<T>,
    cutoff: Option<usize>,
    what: &str,
) -> Result<Indicator<T>> {
    if values.len() < valid_from + 2 {
        return Err(CoreError::SeriesTooShort {
            needed: valid_from + 2,
            actual: values.len(),
        });
    }
    stats::standardize_in_place(&mut values[valid_from..], what)?;
    Ok(Indicator {
        values,
        valid_from,
        kind,
        beta,
        cutoff,
    })
}

/// Sign-weighted market index: `I0(t) = (1/N) sum_k s_k r_k(t)`,
/// standardized over the full range.
///
/// The sector signs make the index coherent when one class moves against
/// the rest; a panel where signed returns cancel exactly has a constant
/// index and fails with `ZeroVariance`.
pub fn market_index<T: Scalar>(panel: &ReturnsPanel<T>) -> Result<Indicator<T>> {
    let values = signed_average(panel, None);
    standardize_valid(values, 0, IndicatorKind::MarketIndex, None, None, "market index")
}

/// Sign-weighted average over the members of one sector, standardized.
pub fn sector_index<T: Scalar>(panel: &ReturnsPanel<T>, sector: Sector) -> Result<Indicator<T>> {
    let members = panel.sector_members(sector);
    if members.is_empty() {
        return Err(CoreError::EmptySector(sector.to_string()));
    }
    let values = signed_average(panel, Some(&members));
    standardize_valid(
        values,
        0,
        IndicatorKind::SectorIndex(sector),
        None,
        None,
        &format!("sector index {sector}"),
    )
}

/// Equal-weight signed average of the selected rows (all rows when None).
fn signed_average<T: Scalar>(panel: &ReturnsPanel<T>, rows: Option<&[usize]>) -> Vec<T> {
    let t_len = panel.n_dates();
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..panel.n_assets()).collect();
            &all
        }
    };
    let inv = T::cast(rows.len() as f64).recip();
    let mut values = vec![T::zero(); t_len];
    for &i in rows {
        let s = panel.sign_vector[i];
        for (v, r) in values.iter_mut().zip(panel.returns.row(i)) {
            *v += s * *r;
        }
    }
    for v in &mut values {
        *v *= inv;
    }
    values
}

/// Kernel length for decay rate `beta`: the smallest tap count whose next
/// weight would fall to 1% or below, `ceil(ln(100) / beta)`. An infinite
/// `beta` means no smoothing (zero taps).
pub fn ema_cutoff<T: Scalar>(beta: T) -> usize {
    assert!(beta > T::zero(), "decay rate must be positive");
    if beta == T::infinity() {
        return 0;
    }
    let taps = (T::cast(100.0).ln() / beta).ceil().to_f64_lossy();
    taps as usize
}

/// Raw truncated kernel sum `J(t) = sum_{s=0}^{t_k-1} e^(-beta s) x(t-s)`
/// for `t >= valid_from + t_k`; earlier entries are zero. No
/// standardization. Requires `t_k >= 1`.
pub(crate) fn ema_kernel_raw<T: Scalar>(
    values: &[T],
    valid_from: usize,
    beta: T,
    t_k: usize,
) -> Vec<T> {
    debug_assert!(t_k >= 1);
    let weights: Vec<T> = (0..t_k).map(|s| (-beta * T::cast(s as f64)).exp()).collect();
    let mut out = vec![T::zero(); values.len()];
    for t in (valid_from + t_k)..values.len() {
        let mut acc = T::zero();
        for (s, w) in weights.iter().enumerate() {
            acc += *w * values[t - s];
        }
        out[t] = acc;
    }
    out
}

/// Truncated exponential smoothing of an indicator.
///
/// The kernel has `ema_cutoff(beta)` taps; the output's valid range starts
/// that many steps after the input's, and is re-standardized. A zero-tap
/// kernel (infinite `beta`) returns the input values bit-for-bit, so fits
/// against the smoothed series degenerate exactly to the unsmoothed fit.
pub fn ema_smooth<T: Scalar>(x: &Indicator<T>, beta: T) -> Result<Indicator<T>> {
    if !(beta > T::zero()) {
        return Err(CoreError::BadArgument("decay rate must be positive".into()));
    }
    let t_k = ema_cutoff(beta);
    if t_k == 0 {
        return Ok(Indicator {
            values: x.values.clone(),
            valid_from: x.valid_from,
            kind: IndicatorKind::EmaIndex,
            beta: Some(beta),
            cutoff: Some(0),
        });
    }
    let raw = ema_kernel_raw(&x.values, x.valid_from, beta, t_k);
    standardize_valid(
        raw,
        x.valid_from + t_k,
        IndicatorKind::EmaIndex,
        Some(beta),
        Some(t_k),
        "smoothed indicator",
    )
}

/// Projection series `pi(t) = <r(t), v1(C_K(t))>` where `C_K(t)` is the
/// centered second-moment matrix of the window `[t-K, t-1]`; defined for
/// `t in [K, T)`, zeros before. The per-date top eigenvector is taken by
/// power iteration started from (and sign-aligned to) the panel's uniform
/// mode.
pub(crate) fn eigen_projection_series<T: Scalar>(
    panel: &ReturnsPanel<T>,
    window: usize,
) -> Result<Vec<T>> {
    let t_len = panel.n_dates();
    if window < 2 {
        return Err(CoreError::BadArgument(format!(
            "eigen-factor window must be at least 2, got {window}"
        )));
    }
    if t_len < window + 2 {
        return Err(CoreError::SeriesTooShort {
            needed: window + 2,
            actual: t_len,
        });
    }

    // Dates are independent given the window, so this parallelizes without
    // changing results: each date's value lands at its own index.
    let tail: Vec<Result<T>> = (window..t_len)
        .into_par_iter()
        .map(|t| {
            let mut c = local_correlation_window(panel, t, window);
            c.scale_in_place(T::cast((window - 1) as f64).recip());
            let (_, v1, _) = spectra::top_eigenpair(&c, &panel.uniform_mode, T::cast(1e-10), 10_000)?;
            Ok(stats::dot(&panel.returns_at(t), &v1))
        })
        .collect();

    let mut values = vec![T::zero(); t_len];
    for (offset, r) in tail.into_iter().enumerate() {
        values[window + offset] = r?;
    }
    Ok(values)
}

/// Centered scatter matrix of the returns window `[t-window, t-1]`
/// (unnormalized; callers divide by `window - 1`).
pub(crate) fn local_correlation_window<T: Scalar>(
    panel: &ReturnsPanel<T>,
    t: usize,
    window: usize,
) -> Mat<T> {
    let n = panel.n_assets();
    let inv_w = T::cast(window as f64).recip();
    let mut means = vec![T::zero(); n];
    for i in 0..n {
        let row = &panel.returns.row(i)[t - window..t];
        let mut acc = T::zero();
        for x in row {
            acc += *x;
        }
        means[i] = acc * inv_w;
    }
    let mut c = Mat::zeros(n, n);
    let mut centered = vec![T::zero(); n];
    for u in (t - window)..t {
        for i in 0..n {
            centered[i] = panel.returns[(i, u)] - means[i];
        }
        c.add_scaled_outer(&centered, T::one());
    }
    c
}

/// Eigen-factor indicator: the smoothed projection of today's returns on
/// the trailing window's top eigenvector.
///
/// `window` defaults to `3 * N`. The projection series starts at `window`;
/// smoothing with `beta` delays validity by `ema_cutoff(beta)` more steps.
/// An infinite `beta` yields the unsmoothed standardized projection.
pub fn eigen_factor<T: Scalar>(
    panel: &ReturnsPanel<T>,
    window: Option<usize>,
    beta: T,
) -> Result<Indicator<T>> {
    if !(beta > T::zero()) {
        return Err(CoreError::BadArgument("decay rate must be positive".into()));
    }
    let k = window.unwrap_or(3 * panel.n_assets());
    let t_k = ema_cutoff(beta);
    let t_len = panel.n_dates();
    if t_len < k + t_k + 2 {
        return Err(CoreError::SeriesTooShort {
            needed: k + t_k + 2,
            actual: t_len,
        });
    }
    let pi = eigen_projection_series(panel, k)?;
    let kind = IndicatorKind::EigenFactor { window: k };
    if t_k == 0 {
        return standardize_valid(pi, k, kind, Some(beta), Some(0), "eigen factor");
    }
    let raw = ema_kernel_raw(&pi, k, beta, t_k);
    standardize_valid(raw, k + t_k, kind, Some(beta), Some(t_k), "eigen factor")
}

/// Re-standardizes `x` over an explicit index range, leaving values
/// outside the range untouched. Used to renormalize an indicator over an
/// aligned subsample.
pub fn standardize_indicator<T: Scalar>(
    x: &Indicator<T>,
    over: std::ops::Range<usize>,
) -> Result<Indicator<T>> {
    if over.end > x.len() || over.start >= over.end {
        return Err(CoreError::IndexOutOfRange {
            index: over.end.max(over.start),
            len: x.len(),
        });
    }
    let mut out = x.clone();
    stats::standardize_in_place(&mut out.values[over], "indicator subsample")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::AssetMeta;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn meta(specs: &[(&str, Sector)]) -> Vec<AssetMeta> {
        specs
            .iter()
            .map(|(id, sector)| AssetMeta {
                asset_id: id.to_string(),
                sector: *sector,
                market: "TEST".into(),
            })
            .collect()
    }

    fn dates(t: usize) -> Vec<String> {
        (0..t).map(|i| format!("d{i:05}")).collect()
    }

    fn standardized_noise_panel(specs: &[(&str, Sector)], t_len: usize, seed: u64) -> ReturnsPanel<f64> {
        let n = specs.len();
        let mut rng = crate::rng::substream(seed, "test-panel", 0);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            stats::standardize_in_place(&mut row, "row").unwrap();
            rows.push(row);
        }
        ReturnsPanel::new_unchecked(meta(specs), dates(t_len), Mat::from_rows(rows).unwrap())
    }

    #[test]
    fn cutoff_counts_taps_until_one_percent() {
        // ln(100) ~= 4.6052: beta = 0.1 keeps 47 taps, beta = 1 keeps 5.
        assert_eq!(ema_cutoff(0.1), 47);
        assert_eq!(ema_cutoff(1.0), 5);
        assert_eq!(ema_cutoff(f64::INFINITY), 0);
        // The cutoff brackets the 1% level: the first dropped tap is at or
        // below 1%, the last kept tap above it.
        for beta in [0.05, 0.1, 0.2, 1.0 / 3.0, 0.5, 1.0, 2.0, 100.0f64.ln()] {
            let t_k = ema_cutoff(beta);
            assert!((-beta * t_k as f64).exp() <= 0.01 + 1e-12, "beta={beta}");
            assert!((-beta * (t_k as f64 - 1.0)).exp() > 0.01, "beta={beta}");
        }
    }

    #[test]
    fn kernel_weight_sum_matches_geometric_series() {
        // Constant input 1 with beta = 0.1: every fully covered output is
        // sum_{s=0}^{46} e^(-0.1 s) = (1 - e^(-4.7)) / (1 - e^(-0.1)).
        let x = vec![1.0f64; 60];
        let j = ema_kernel_raw(&x, 0, 0.1, 47);
        for t in 47..60 {
            assert_relative_eq!(j[t], 10.412756, epsilon = 1e-5);
        }
        for t in 0..47 {
            assert_eq!(j[t], 0.0);
        }
    }

    #[test]
    fn kernel_is_linear_before_standardization() {
        let mut rng = crate::rng::substream(5, "lin", 0);
        let a: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x + 3.0 * y).collect();
        let ja = ema_kernel_raw(&a, 0, 0.5, 10);
        let jb = ema_kernel_raw(&b, 0, 0.5, 10);
        let js = ema_kernel_raw(&sum, 0, 0.5, 10);
        for t in 10..40 {
            assert_relative_eq!(js[t], 2.0 * ja[t] + 3.0 * jb[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_is_causal() {
        let mut rng = crate::rng::substream(6, "causal", 0);
        let a: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = a.clone();
        b[30] += 10.0;
        let ja = ema_kernel_raw(&a, 0, 0.3, ema_cutoff(0.3));
        let jb = ema_kernel_raw(&b, 0, 0.3, ema_cutoff(0.3));
        for t in 0..30 {
            assert_eq!(ja[t], jb[t], "kernel output changed before the edit at t=30");
        }
        assert_ne!(ja[30], jb[30]);
    }

    #[test]
    fn zero_tap_smoothing_is_bitwise_identity() {
        let panel = standardized_noise_panel(
            &[("a", Sector::Idx), ("b", Sector::Cmd), ("y", Sector::Yld)],
            40,
            9,
        );
        let base = market_index(&panel).unwrap();
        let smoothed = ema_smooth(&base, f64::INFINITY).unwrap();
        assert_eq!(smoothed.values, base.values);
        assert_eq!(smoothed.valid_from, base.valid_from);
        assert_eq!(smoothed.cutoff, Some(0));
    }

    #[test]
    fn smoothed_indicator_is_standardized_and_delayed() {
        let panel = standardized_noise_panel(
            &[("a", Sector::Idx), ("b", Sector::Cmd), ("y", Sector::Yld)],
            80,
            10,
        );
        let base = market_index(&panel).unwrap();
        let smoothed = ema_smooth(&base, 1.0).unwrap();
        assert_eq!(smoothed.valid_from, 5);
        let valid = smoothed.valid_slice();
        assert!(stats::mean(valid).abs() < 1e-10);
        assert_relative_eq!(stats::sample_variance(valid).sqrt(), 1.0, epsilon = 1e-10);
        for t in 0..5 {
            assert_eq!(smoothed.values[t], 0.0);
        }
    }

    #[test]
    fn signed_cancellation_yields_zero_variance() {
        // One IDX and one YLD asset with identical returns: the signed
        // average is identically zero.
        let rows = {
            let mut rng = crate::rng::substream(3, "cancel", 0);
            let mut row: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
            stats::standardize_in_place(&mut row, "row").unwrap();
            vec![row.clone(), row]
        };
        let panel = ReturnsPanel::new_unchecked(
            meta(&[("i", Sector::Idx), ("y", Sector::Yld)]),
            dates(30),
            Mat::from_rows(rows).unwrap(),
        );
        assert!(matches!(
            market_index(&panel),
            Err(CoreError::ZeroVariance(_))
        ));
    }

    #[test]
    fn singleton_sector_index_reproduces_the_member() {
        let panel = standardized_noise_panel(
            &[("a", Sector::Idx), ("b", Sector::Idx), ("y", Sector::Yld)],
            60,
            11,
        );
        let idx = sector_index(&panel, Sector::Yld).unwrap();
        // Sign -1 times the (standardized) row, re-standardized: the sign
        // cancels in standardization only if the scale flips too; the
        // member row already has mean 0, std 1, so the index is exactly
        // -row negated back to +row... worked out: -r standardized is -r,
        // so the index equals -r_y standardized = -r_y; with sign s = -1
        // the average is -r_y, and standardizing keeps it. Compare against
        // that.
        for (v, r) in idx.values.iter().zip(panel.returns.row(2)) {
            assert_relative_eq!(*v, -*r, epsilon = 1e-10);
        }
        assert!(matches!(
            sector_index(&panel, Sector::Cmd),
            Err(CoreError::EmptySector(_))
        ));
    }

    #[test]
    fn eigen_projection_is_causal() {
        let specs = [
            ("a", Sector::Idx),
            ("b", Sector::Idx),
            ("c", Sector::Cmd),
            ("y", Sector::Yld),
        ];
        let panel = standardized_noise_panel(&specs, 70, 12);
        let mut edited = panel.clone();
        let t_star = 50;
        for i in 0..edited.n_assets() {
            edited.returns[(i, t_star)] += 3.0;
        }
        let k = 20;
        let a = eigen_projection_series(&panel, k).unwrap();
        let b = eigen_projection_series(&edited, k).unwrap();
        for t in k..t_star {
            assert_eq!(a[t], b[t], "projection changed before the edit at t={t_star}");
        }
        assert_ne!(a[t_star], b[t_star]);
    }

    #[test]
    fn rank_one_panel_projects_onto_its_common_mode() {
        // All assets share one series: the window eigenvector is uniform
        // and the projection is an affine image of that series.
        let mut rng = crate::rng::substream(13, "rank1", 0);
        let mut m: Vec<f64> = (0..90).map(|_| rng.gen_range(-1.0..1.0)).collect();
        stats::standardize_in_place(&mut m, "m").unwrap();
        let rows = vec![m.clone(), m.clone(), m.clone()];
        let panel = ReturnsPanel::new_unchecked(
            meta(&[("a", Sector::Idx), ("b", Sector::Cmd), ("c", Sector::Fxr)]),
            dates(90),
            Mat::from_rows(rows).unwrap(),
        );
        let e = eigen_factor(&panel, Some(12), f64::INFINITY).unwrap();
        assert_eq!(e.valid_from, 12);
        let r = stats::pearson(e.valid_slice(), &m[12..]).unwrap();
        assert!(r > 1.0 - 1e-10, "projection lost the common mode: r = {r}");
    }

    #[test]
    fn anti_correlated_block_gets_negative_loadings() {
        // YLD rows move against the others; the aligned top eigenvector
        // must carry negative YLD entries.
        let mut rng = crate::rng::substream(14, "block", 0);
        let mut common: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        stats::standardize_in_place(&mut common, "c").unwrap();
        let mut rows = Vec::new();
        for s in 0..4 {
            let flip = if s >= 2 { -1.0 } else { 1.0 };
            let mut row: Vec<f64> = common
                .iter()
                .map(|c| flip * c + 0.3 * rng.gen_range(-1.0..1.0f64))
                .collect();
            stats::standardize_in_place(&mut row, "row").unwrap();
            rows.push(row);
        }
        let panel = ReturnsPanel::new_unchecked(
            meta(&[
                ("a", Sector::Idx),
                ("b", Sector::Cmd),
                ("y1", Sector::Yld),
                ("y2", Sector::Yld),
            ]),
            dates(200),
            Mat::from_rows(rows).unwrap(),
        );
        let t = 150;
        let mut c = local_correlation_window(&panel, t, 60);
        c.scale_in_place(1.0 / 59.0);
        let (_, v1, _) = spectra::top_eigenpair(&c, &panel.uniform_mode, 1e-10, 10_000).unwrap();
        assert!(v1[0] > 0.0 && v1[1] > 0.0, "market side must load positive");
        assert!(v1[2] < 0.0 && v1[3] < 0.0, "anti-correlated block must load negative");
    }

    #[test]
    fn standardize_indicator_renormalizes_a_subrange() {
        let panel = standardized_noise_panel(
            &[("a", Sector::Idx), ("b", Sector::Cmd), ("y", Sector::Yld)],
            50,
            15,
        );
        let base = market_index(&panel).unwrap();
        let sub = standardize_indicator(&base, 10..50).unwrap();
        let window = &sub.values[10..50];
        assert!(stats::mean(window).abs() < 1e-10);
        assert_relative_eq!(stats::sample_variance(window).sqrt(), 1.0, epsilon = 1e-10);
        // Outside the range the values are untouched.
        assert_eq!(&sub.values[..10], &base.values[..10]);
    }
}
