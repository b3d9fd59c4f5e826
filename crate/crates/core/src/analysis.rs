//! Figure-level analyses on top of the regression core.
//!
//! Four views: a sweep of the fit over smoothing timescales, binned
//! conditional means of any series against a lagged indicator, the angle
//! between the conditional top eigenvector and the signed uniform mode as
//! a function of the indicator, and group-averaged matrix summaries.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::indicators::{self, ema_cutoff, Indicator};
use crate::matrix::Mat;
use crate::panel::{ReturnsPanel, Sector};
use crate::pra::{self, AlignedSample, PraConfig};
use crate::scalar::Scalar;
use crate::significance::{self, NullDistribution, NullPredictor, TailStatistic};
use crate::spectra;
use crate::stats;

/// Default smoothing grid in days: beta = 1/d for each entry.
pub const DEFAULT_SWEEP_DAYS: [f64; 10] =
    [1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0];

/// The default decay-rate grid, strictly decreasing in beta.
pub fn default_beta_grid<T: Scalar>() -> Vec<T> {
    DEFAULT_SWEEP_DAYS.iter().map(|d| T::cast(1.0 / d)).collect()
}

/// Which indicator family the sweep smooths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepBase {
    /// Truncated EMA of the signed market index.
    EmaOfMarketIndex,
    /// Truncated EMA of the trailing top-eigenvector projection;
    /// `window` falls back to 3N dates.
    EigenFactor { window: Option<usize> },
}

/// p-values for the four sweep statistics under one null process.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StatPValues<T: Scalar> {
    pub lambda_min: T,
    pub lambda_max: T,
    pub bottom_overlap: T,
    pub top_overlap: T,
}

/// Spectral statistics of one fit in the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord<T: Scalar> {
    /// Decay rate; infinite means no smoothing.
    pub beta: T,
    /// Timescale in days, `1/beta`; zero when beta is infinite.
    pub inverse_beta: T,
    /// Kernel length in taps.
    pub cutoff: usize,
    /// Smallest eigenvalue of the sensitivity matrix.
    pub lambda_min: T,
    /// Largest eigenvalue of the sensitivity matrix.
    pub lambda_max: T,
    /// Alignment of the bottom eigenvector with the market mode.
    pub bottom_overlap: T,
    /// Alignment of the top eigenvector with the market mode.
    pub top_overlap: T,
    /// p-values against the i.i.d. Gaussian null, when trials were run.
    pub p_iid: Option<StatPValues<T>>,
    /// p-values against the autocorrelation-matched Gaussian null.
    pub p_matched: Option<StatPValues<T>>,
}

/// A completed sweep: one record per grid point plus the unsmoothed
/// reference fit the curves are compared against.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult<T: Scalar> {
    pub beta_grid: Vec<T>,
    pub records: Vec<SweepRecord<T>>,
    /// Grid points whose fit failed, with the error text; the sweep
    /// continues past them.
    pub failed: Vec<(T, String)>,
    /// Statistics of the lag-only fit on the unsmoothed base series.
    pub reference: SweepRecord<T>,
}

fn base_series<T: Scalar>(
    panel: &ReturnsPanel<T>,
    base: SweepBase,
    beta: T,
) -> Result<Indicator<T>> {
    match base {
        SweepBase::EmaOfMarketIndex => {
            let raw = indicators::market_index(panel)?;
            indicators::ema_smooth(&raw, beta)
        }
        SweepBase::EigenFactor { window } => indicators::eigen_factor(panel, window, beta),
    }
}

fn p_track<T: Scalar>(
    null: &NullDistribution<T>,
    lambda_min: T,
    lambda_max: T,
    bottom_overlap: T,
    top_overlap: T,
) -> Result<StatPValues<T>> {
    Ok(StatPValues {
        lambda_min: significance::p_value(null, TailStatistic::MinEigenvalue, lambda_min)?,
        lambda_max: significance::p_value(null, TailStatistic::MaxEigenvalue, lambda_max)?,
        bottom_overlap: significance::p_value(null, TailStatistic::AbsOverlap, bottom_overlap)?,
        top_overlap: significance::p_value(null, TailStatistic::AbsOverlap, top_overlap)?,
    })
}

fn sweep_record<T: Scalar>(
    panel: &ReturnsPanel<T>,
    base: SweepBase,
    beta: T,
    config: &PraConfig,
    null_trials: usize,
    seed: u64,
) -> Result<SweepRecord<T>> {
    let indicator = base_series(panel, base, beta)?;
    let fit = pra::fit_single(panel, &indicator, config)?;
    let v1c = fit.market_mode();
    let spec_d = &fit.sensitivity_spectra[0];
    let n = spec_d.order();
    let lambda_min = spec_d.lambda_min();
    let lambda_max = spec_d.lambda_max();
    let bottom_overlap = stats::dot(&v1c, &spec_d.eigenvector(n - 1));
    let top_overlap = stats::dot(&v1c, &spec_d.eigenvector(0));

    let (p_iid, p_matched) = if null_trials > 0 {
        let iid = significance::null_ensemble_at(
            panel,
            config,
            null_trials,
            seed,
            NullPredictor::Gaussian,
            indicator.valid_from,
        )?;
        let matched = significance::null_ensemble_at(
            panel,
            config,
            null_trials,
            seed,
            NullPredictor::GaussianEma { beta },
            indicator.valid_from,
        )?;
        (
            Some(p_track(&iid, lambda_min, lambda_max, bottom_overlap, top_overlap)?),
            Some(p_track(&matched, lambda_min, lambda_max, bottom_overlap, top_overlap)?),
        )
    } else {
        (None, None)
    };

    Ok(SweepRecord {
        beta,
        inverse_beta: if beta.is_finite() { beta.recip() } else { T::zero() },
        cutoff: ema_cutoff(beta),
        lambda_min,
        lambda_max,
        bottom_overlap,
        top_overlap,
        p_iid,
        p_matched,
    })
}

/// Sweeps the single-factor fit over a grid of smoothing decay rates.
///
/// The grid must be strictly decreasing in beta, i.e. strictly increasing
/// in timescale. Each record refits against the smoothed base series and
/// reports the sensitivity spectrum's extreme eigenvalues and their
/// eigenvector alignments with the market mode; when `null_trials > 0`
/// each record also carries p-values under two nulls, with the fit and
/// its nulls sharing one aligned sample. A failed grid point is recorded
/// and skipped rather than aborting the sweep. The reference entry holds
/// the same statistics for the unsmoothed base series.
pub fn beta_sweep<T: Scalar>(
    panel: &ReturnsPanel<T>,
    base: SweepBase,
    beta_grid: &[T],
    config: &PraConfig,
    null_trials: usize,
    seed: u64,
) -> Result<SweepResult<T>> {
    if beta_grid.is_empty() {
        return Err(CoreError::BadArgument("empty decay-rate grid".into()));
    }
    for &beta in beta_grid {
        if !(beta > T::zero()) {
            return Err(CoreError::BadArgument(format!(
                "decay rates must be positive, got {beta}"
            )));
        }
    }
    for pair in beta_grid.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(CoreError::BadArgument(
                "decay-rate grid must be strictly decreasing (timescales strictly increasing)"
                    .into(),
            ));
        }
    }

    let reference = sweep_record(panel, base, T::infinity(), config, null_trials, seed)?;
    let mut records = Vec::with_capacity(beta_grid.len());
    let mut failed = Vec::new();
    for &beta in beta_grid {
        match sweep_record(panel, base, beta, config, null_trials, seed) {
            Ok(rec) => records.push(rec),
            Err(err) => failed.push((beta, err.to_string())),
        }
    }
    Ok(SweepResult {
        beta_grid: beta_grid.to_vec(),
        records,
        failed,
        reference,
    })
}

/// Equal-width binned means of `target` conditioned on `condition`.
#[derive(Debug, Clone, Serialize)]
pub struct BinnedCurve<T: Scalar> {
    /// `n_bins + 1` ascending edges spanning the condition's range.
    pub bin_edges: Vec<T>,
    /// Per-bin mean of the target; empty bins hold no value.
    pub bin_means: Vec<Option<T>>,
    pub bin_counts: Vec<usize>,
}

fn bin_edges<T: Scalar>(lo: T, hi: T, n_bins: usize) -> Vec<T> {
    (0..=n_bins)
        .map(|k| lo + (hi - lo) * T::cast(k as f64 / n_bins as f64))
        .collect()
}

fn bin_index<T: Scalar>(x: T, lo: T, hi: T, n_bins: usize) -> usize {
    let f = ((x - lo) / (hi - lo)).to_f64_lossy() * n_bins as f64;
    // The last bin is closed on the right; everything else half-open.
    (f.floor() as usize).min(n_bins - 1)
}

/// Bins `condition` into `n_bins` equal-width intervals over its range
/// (last bin right-closed) and averages `target` within each bin.
pub fn binned_means<T: Scalar>(
    condition: &[T],
    target: &[T],
    n_bins: usize,
) -> Result<BinnedCurve<T>> {
    if condition.len() != target.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "condition has {} entries, target {}",
            condition.len(),
            target.len()
        )));
    }
    if n_bins < 2 {
        return Err(CoreError::BadArgument("need at least two bins".into()));
    }
    if condition.is_empty() {
        return Err(CoreError::SeriesTooShort { needed: 2, actual: 0 });
    }
    if condition.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("binned series".into()));
    }
    let lo = condition.iter().cloned().fold(T::infinity(), T::min);
    let hi = condition.iter().cloned().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Err(CoreError::DegenerateRange);
    }
    let mut sums = vec![T::zero(); n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&x, &y) in condition.iter().zip(target) {
        let b = bin_index(x, lo, hi, n_bins);
        sums[b] += y;
        counts[b] += 1;
    }
    let bin_means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / T::cast(c as f64)))
        .collect();
    Ok(BinnedCurve {
        bin_edges: bin_edges(lo, hi, n_bins),
        bin_means,
        bin_counts: counts,
    })
}

/// How the conditional top-eigenvector angle is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Average the instantaneous correlation matrices falling in each
    /// indicator bin, then eigendecompose each bin average.
    EmpiricalBins,
    /// Evaluate the fitted model `C + D x` at each bin center.
    ModelImplied,
}

/// Conditional angle curve plus its unconditional baseline.
#[derive(Debug, Clone, Serialize)]
pub struct AngleCurve<T: Scalar> {
    pub mode: AngleMode,
    /// Angle per bin of the standardized lagged indicator, in radians.
    pub curve: BinnedCurve<T>,
    /// Angle between the signed uniform mode and the top eigenvector of
    /// the unconditional correlation matrix.
    pub baseline: T,
}

/// Angle between `reference` and the top eigenvector of `m`.
pub(crate) fn top_angle<T: Scalar>(m: &Mat<T>, reference: &[T]) -> Result<T> {
    let spectrum = spectra::eig_symmetric(m, reference)?;
    spectra::angle(reference, &spectrum.eigenvector(0))
}

/// Angle between the top eigenvector of the indicator-conditioned
/// correlation matrix and the signed uniform mode, as a function of the
/// standardized lagged indicator.
///
/// Bins cover the standardized predictor over the aligned sample. The
/// empirical mode averages the observed `r r^T` matrices per bin and can
/// leave empty bins; the model mode evaluates `C + D x` at every bin
/// center, so its curve always has a value and at `x = 0` it reproduces
/// the baseline exactly.
pub fn conditional_angle_curve<T: Scalar>(
    panel: &ReturnsPanel<T>,
    x: &Indicator<T>,
    config: &PraConfig,
    n_bins: usize,
    mode: AngleMode,
) -> Result<AngleCurve<T>> {
    let fit = pra::fit_single(panel, x, config)?;
    let e0 = &panel.uniform_mode;
    let baseline = spectra::angle(e0, &fit.intercept_spectrum.eigenvector(0))?;

    let t0 = x.valid_from + config.tau;
    let sample = AlignedSample::new(panel, t0)?;
    let raw: Vec<T> = (t0..panel.n_dates())
        .map(|t| x.values[t - config.tau])
        .collect();
    let z = sample.standardize_predictor(&raw)?;

    if n_bins < 2 {
        return Err(CoreError::BadArgument("need at least two bins".into()));
    }
    let lo = z.iter().cloned().fold(T::infinity(), T::min);
    let hi = z.iter().cloned().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Err(CoreError::DegenerateRange);
    }
    let edges = bin_edges(lo, hi, n_bins);
    let mut counts = vec![0usize; n_bins];
    for &v in &z {
        counts[bin_index(v, lo, hi, n_bins)] += 1;
    }

    let bin_means: Vec<Option<T>> = match mode {
        AngleMode::EmpiricalBins => {
            let n = panel.n_assets();
            let mut sums = vec![Mat::<T>::zeros(n, n); n_bins];
            for (m_idx, &v) in z.iter().enumerate() {
                let t = t0 + m_idx;
                let r: Vec<T> = (0..n).map(|i| panel.returns[(i, t)]).collect();
                sums[bin_index(v, lo, hi, n_bins)].add_scaled_outer(&r, T::one());
            }
            sums.iter()
                .zip(&counts)
                .map(|(sum, &c)| {
                    if c == 0 {
                        return Ok(None);
                    }
                    let mut avg = sum.clone();
                    avg.scale_in_place(T::cast(1.0 / c as f64));
                    top_angle(&avg, e0).map(Some)
                })
                .collect::<Result<_>>()?
        }
        AngleMode::ModelImplied => {
            let half = T::cast(0.5);
            (0..n_bins)
                .map(|b| {
                    let center = (edges[b] + edges[b + 1]) * half;
                    let m = fit.intercept.add_scaled(&fit.sensitivities[0], center);
                    top_angle(&m, e0).map(Some)
                })
                .collect::<Result<_>>()?
        }
    };

    Ok(AngleCurve {
        mode,
        curve: BinnedCurve {
            bin_edges: edges,
            bin_means,
            bin_counts: counts,
        },
        baseline,
    })
}

/// Maps each asset to the index of its sector among the sectors present,
/// in fixed sector order. Returns the per-asset group indices and the
/// sector labels.
pub fn sector_groups<T: Scalar>(panel: &ReturnsPanel<T>) -> (Vec<usize>, Vec<Sector>) {
    let present: Vec<Sector> = Sector::ALL
        .iter()
        .copied()
        .filter(|s| panel.assets.iter().any(|a| a.sector == *s))
        .collect();
    let groups = panel
        .assets
        .iter()
        .map(|a| present.iter().position(|s| *s == a.sector).expect("present"))
        .collect();
    (groups, present)
}

/// Averages a square matrix over a partition of its indices: entry
/// `(a, b)` is the mean of `m[i, j]` over `i` in group `a` and `j` in
/// group `b`, excluding the diagonal when `a == b`. A within-group block
/// with no off-diagonal pairs (a singleton group) averages to zero.
pub fn group_average_matrix<T: Scalar>(
    m: &Mat<T>,
    groups: &[usize],
    n_groups: usize,
) -> Result<Mat<T>> {
    if m.n_rows() != m.n_cols() {
        return Err(CoreError::NotSquare {
            rows: m.n_rows(),
            cols: m.n_cols(),
        });
    }
    if groups.len() != m.n_rows() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} group labels for a {} x {} matrix",
            groups.len(),
            m.n_rows(),
            m.n_cols()
        )));
    }
    if n_groups == 0 {
        return Err(CoreError::BadArgument("need at least one group".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        if g >= n_groups {
            return Err(CoreError::IndexOutOfRange {
                index: g,
                len: n_groups,
            });
        }
        members[g].push(i);
    }
    for (g, list) in members.iter().enumerate() {
        if list.is_empty() {
            return Err(CoreError::EmptyGroup(format!("group {g}")));
        }
    }
    let mut out = Mat::zeros(n_groups, n_groups);
    for a in 0..n_groups {
        for b in 0..n_groups {
            let mut sum = T::zero();
            let mut count = 0usize;
            for &i in &members[a] {
                for &j in &members[b] {
                    if i == j {
                        continue;
                    }
                    sum += m[(i, j)];
                    count += 1;
                }
            }
            out[(a, b)] = if count == 0 {
                T::zero()
            } else {
                sum / T::cast(count as f64)
            };
        }
    }
    Ok(out)
}
