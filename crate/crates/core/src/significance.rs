//! Monte Carlo null ensembles for the sensitivity spectrum.
//!
//! The question answered here: how extreme are the observed eigenvalues of
//! the slope matrix D, and its eigenvector alignment with the market mode,
//! when the true conditioning effect is zero? The null keeps the panel
//! exactly as observed and replaces only the predictor with a synthetic
//! series carrying no relation to the returns; refitting under many such
//! draws samples the no-effect distribution of every statistic at the
//! observed sample size.
//!
//! Trials draw from counter-derived RNG substreams and land in a fixed
//! order, so ensembles are bit-identical across thread counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::indicators::{ema_cutoff, Indicator};
use crate::panel::ReturnsPanel;
use crate::pra::{AlignedSample, PraConfig};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::spectra;
use crate::stats;

/// Statistics whose null tail is queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatistic {
    /// Smallest eigenvalue of D; extreme means more negative.
    MinEigenvalue,
    /// Largest eigenvalue of D; extreme means larger.
    MaxEigenvalue,
    /// Alignment of an extreme eigenvector of D with the market mode;
    /// extreme means larger in absolute value. Each null trial contributes
    /// the stronger of its two extreme-eigenvector alignments, which makes
    /// the p-value conservative.
    AbsOverlap,
}

/// Null predictor process.
#[derive(Debug, Clone, Copy)]
pub enum NullPredictor<'a, T: Scalar> {
    /// I.i.d. standard normal draws.
    Gaussian,
    /// Truncated exponential smoothing of i.i.d. draws: matches the
    /// autocorrelation a smoothed indicator would carry under no effect.
    GaussianEma { beta: T },
    /// Circular shift of the observed indicator by a random offset:
    /// keeps the marginal distribution and autocorrelation, breaks the
    /// date alignment.
    CircularShift { indicator: &'a Indicator<T> },
}

/// One null trial: the ranked eigenvalues of the refitted D and the
/// alignment of its extreme eigenvectors with the observed market mode.
/// Eigenvectors are sign-aligned to the market mode, so overlaps are
/// non-negative.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord<T: Scalar> {
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<T>,
    /// `<v1(C), v_N(D_null)>` after alignment.
    pub bottom_overlap: T,
    /// `<v1(C), v_1(D_null)>` after alignment.
    pub top_overlap: T,
}

/// A completed null ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct NullDistribution<T: Scalar> {
    /// Trials requested.
    pub n_trials: usize,
    pub seed: u64,
    /// Successful trials in trial order.
    pub records: Vec<TrialRecord<T>>,
    /// Per-rank mean of the null eigenvalues.
    pub mean_spectrum: Vec<T>,
    /// Trials that failed numerically; excluded from `records`.
    pub failures: usize,
}

/// Per-rank means over trial spectra.
pub(crate) fn rank_means<T: Scalar>(records: &[TrialRecord<T>]) -> Vec<T> {
    if records.is_empty() {
        return Vec::new();
    }
    let n = records[0].eigenvalues.len();
    let mut means = vec![T::zero(); n];
    for rec in records {
        for (m, l) in means.iter_mut().zip(&rec.eigenvalues) {
            *m += *l;
        }
    }
    let inv = T::cast(records.len() as f64).recip();
    for m in &mut means {
        *m *= inv;
    }
    means
}

/// Runs `n_trials` refits of the panel against no-effect predictors.
///
/// The aligned sample matches what a real fit against a predictor with the
/// same validity horizon would use (`Gaussian` starts at `tau`,
/// `GaussianEma` delays by the kernel length, `CircularShift` keeps the
/// observed indicator's horizon). Trial k draws from substream k of
/// `seed`; results are deterministic for (panel, config, n_trials, seed)
/// at any thread count.
pub fn null_ensemble_with<T: Scalar>(
    panel: &ReturnsPanel<T>,
    config: &PraConfig,
    n_trials: usize,
    seed: u64,
    predictor: NullPredictor<'_, T>,
) -> Result<NullDistribution<T>> {
    ensemble_at(panel, config, n_trials, seed, predictor, None)
}

/// Same as [`null_ensemble_with`] but with the sample start pushed out to
/// `valid_from + tau` when that is later than the predictor's own horizon.
/// Use this to compare a fit against nulls over one shared aligned sample:
/// pass the fitted indicator's `valid_from`.
pub fn null_ensemble_at<T: Scalar>(
    panel: &ReturnsPanel<T>,
    config: &PraConfig,
    n_trials: usize,
    seed: u64,
    predictor: NullPredictor<'_, T>,
    valid_from: usize,
) -> Result<NullDistribution<T>> {
    ensemble_at(panel, config, n_trials, seed, predictor, Some(valid_from))
}

fn ensemble_at<T: Scalar>(
    panel: &ReturnsPanel<T>,
    config: &PraConfig,
    n_trials: usize,
    seed: u64,
    predictor: NullPredictor<'_, T>,
    override_valid_from: Option<usize>,
) -> Result<NullDistribution<T>> {
    if config.tau == 0 {
        return Err(CoreError::BadArgument(
            "lag must be at least 1: a contemporaneous fit is not causal".into(),
        ));
    }
    if n_trials == 0 {
        return Err(CoreError::BadArgument("n_trials must be at least 1".into()));
    }

    let (label, valid_from) = match predictor {
        NullPredictor::Gaussian => ("null/iid", 0),
        NullPredictor::GaussianEma { beta } => {
            if !(beta > T::zero()) {
                return Err(CoreError::BadArgument("decay rate must be positive".into()));
            }
            ("null/ema", ema_cutoff(beta))
        }
        NullPredictor::CircularShift { indicator } => {
            if indicator.len() != panel.n_dates() {
                return Err(CoreError::DimensionMismatch(format!(
                    "indicator covers {} dates, panel has {}",
                    indicator.len(),
                    panel.n_dates()
                )));
            }
            if indicator.len() - indicator.valid_from < 3 {
                return Err(CoreError::SeriesTooShort {
                    needed: indicator.valid_from + 3,
                    actual: indicator.len(),
                });
            }
            ("null/shift", indicator.valid_from)
        }
    };
    let valid_from = override_valid_from.map_or(valid_from, |v| v.max(valid_from));

    let t0 = valid_from + config.tau;
    let sample = AlignedSample::new(panel, t0)?;
    let t_s = sample.t_s;
    let c = sample.intercept(config.normalization);
    let c_spectrum = spectra::eig_symmetric(&c, &panel.uniform_mode)?;
    let v1c = c_spectrum.eigenvector(0);

    let outcomes: Vec<Option<TrialRecord<T>>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, label, k);
            let raw: Vec<T> = match predictor {
                NullPredictor::Gaussian => {
                    (0..t_s).map(|_| T::standard_normal(&mut rng)).collect()
                }
                NullPredictor::GaussianEma { beta } => {
                    let t_k = ema_cutoff(beta);
                    if t_k == 0 {
                        (0..t_s).map(|_| T::standard_normal(&mut rng)).collect()
                    } else {
                        let eta: Vec<T> = (0..t_s + t_k)
                            .map(|_| T::standard_normal(&mut rng))
                            .collect();
                        let weights: Vec<T> = (0..t_k)
                            .map(|s| (-beta * T::cast(s as f64)).exp())
                            .collect();
                        (0..t_s)
                            .map(|m| {
                                let mut acc = T::zero();
                                for (s, w) in weights.iter().enumerate() {
                                    acc += *w * eta[m + t_k - s];
                                }
                                acc
                            })
                            .collect()
                    }
                }
                NullPredictor::CircularShift { indicator } => {
                    use rand::Rng;
                    let vf = indicator.valid_from;
                    let len = indicator.len() - vf;
                    let shift = rng.gen_range(1..len);
                    let t_len = panel.n_dates();
                    ((t0 - config.tau)..(t_len - config.tau))
                        .map(|u| indicator.values[vf + ((u - vf + shift) % len)])
                        .collect()
                }
            };
            let z = sample.standardize_predictor(&raw).ok()?;
            let d = sample.slope_from_z(&z);
            let spec = spectra::eig_symmetric(&d, &v1c).ok()?;
            let n = spec.order();
            let bottom_overlap = stats::dot(&v1c, &spec.eigenvector(n - 1));
            let top_overlap = stats::dot(&v1c, &spec.eigenvector(0));
            Some(TrialRecord {
                eigenvalues: spec.eigenvalues,
                bottom_overlap,
                top_overlap,
            })
        })
        .collect();

    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let records: Vec<TrialRecord<T>> = outcomes.into_iter().flatten().collect();
    if records.is_empty() {
        return Err(CoreError::EmptyNull);
    }
    let mean_spectrum = rank_means(&records);
    Ok(NullDistribution {
        n_trials,
        seed,
        records,
        mean_spectrum,
        failures,
    })
}

/// I.i.d. Gaussian null ensemble (the default null).
pub fn null_ensemble<T: Scalar>(
    panel: &ReturnsPanel<T>,
    config: &PraConfig,
    n_trials: usize,
    seed: u64,
) -> Result<NullDistribution<T>> {
    null_ensemble_with(panel, config, n_trials, seed, NullPredictor::Gaussian)
}

/// Add-one tail probability of `observed` under the null:
/// `(1 + #{trials at least as extreme}) / (1 + #trials)`.
///
/// Ties count as extreme, and an observation beyond every trial still
/// reports `1 / (n + 1)` rather than zero. The denominator uses the
/// successful trial count, which equals the requested count unless trials
/// failed.
pub fn p_value<T: Scalar>(
    null: &NullDistribution<T>,
    statistic: TailStatistic,
    observed: T,
) -> Result<T> {
    if null.records.is_empty() {
        return Err(CoreError::EmptyNull);
    }
    let count = null
        .records
        .iter()
        .filter(|rec| match statistic {
            TailStatistic::MinEigenvalue => {
                *rec.eigenvalues.last().expect("non-empty spectrum") <= observed
            }
            TailStatistic::MaxEigenvalue => rec.eigenvalues[0] >= observed,
            TailStatistic::AbsOverlap => {
                let trial = if rec.bottom_overlap > rec.top_overlap {
                    rec.bottom_overlap
                } else {
                    rec.top_overlap
                };
                trial >= observed.abs()
            }
        })
        .count();
    Ok(T::cast((1 + count) as f64) / T::cast((1 + null.records.len()) as f64))
}

/// Smallest p-value the ensemble can resolve: `1 / (n + 1)`.
pub fn p_value_floor<T: Scalar>(null: &NullDistribution<T>) -> T {
    T::one() / T::cast((1 + null.records.len()) as f64)
}

/// Per-rank mean of the null eigenvalue spectra.
pub fn null_mean_spectrum<T: Scalar>(null: &NullDistribution<T>) -> Result<Vec<T>> {
    if null.records.is_empty() {
        return Err(CoreError::EmptyNull);
    }
    Ok(null.mean_spectrum.clone())
}

/// Formats a p-value for reports: saturated estimates (no trial was as
/// extreme) print as an upper bound, e.g. `<0.001` for 1000 trials.
pub fn format_p_value(p: f64, n_records: usize) -> String {
    let floor = 1.0 / (n_records as f64 + 1.0);
    if p <= floor * (1.0 + 1e-12) {
        format!("<{}", 1.0 / n_records as f64)
    } else {
        format!("{p}")
    }
}
