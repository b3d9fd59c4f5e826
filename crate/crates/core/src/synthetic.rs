//! Synthetic panels with a planted conditional correlation structure.
//!
//! The generator inverts the model the fitting side estimates: pick a
//! block correlation matrix C*, a sensitivity direction D*, and an
//! indicator process x, then draw each date's returns from a zero-mean
//! Gaussian with covariance C* + x(t-1) D*, clipped to stay positive
//! semidefinite. Recovering C* and D* from the generated panel exercises
//! the whole pipeline with a known answer.
//!
//! Every covariance is sampled from a per-date RNG substream, so panels
//! are bit-identical for a given spec regardless of scheduling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::indicators::{ema_cutoff, Indicator, IndicatorKind};
use crate::matrix::Mat;
use crate::panel::{AssetMeta, ReturnsPanel, Sector};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::spectra;
use crate::stats;

/// Default smallest eigenvalue preserved by the PSD projection.
pub const DEFAULT_PSD_FLOOR: f64 = 1e-8;

fn default_psd_floor<T: Scalar>() -> T {
    T::cast(DEFAULT_PSD_FLOOR)
}

/// Direction of the planted sensitivity matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectDirection<T: Scalar> {
    /// `D* = -a v1 v1^T` where `v1` is the top eigenvector of `C*`:
    /// correlations rise across the board when the indicator falls.
    MarketMode,
    /// `D* = a M` for a caller-supplied symmetric matrix `M`.
    Custom(Mat<T>),
}

/// Process generating the conditioning indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorProcess<T: Scalar> {
    /// Stationary AR(1) with unit variance: `x(t) = phi x(t-1) + sqrt(1 - phi^2) eta(t)`.
    Ar1 { phi: T },
    /// Truncated exponential smoothing of i.i.d. noise, standardized:
    /// an exogenous driver carrying the autocorrelation signature of a
    /// decay-`beta` kernel.
    ExogenousEmaTarget { beta: T },
    /// Truncated EMA of the generated panel's own signed average return.
    /// The feedback makes the planted matrices approximate rather than
    /// exact, but lets timescale probes detect the channel.
    EndogenousEma { beta: T },
}

/// Cross-sector correlation entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossCorrelation<T> {
    pub first: Sector,
    pub second: Sector,
    pub rho: T,
}

/// Full description of a synthetic panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec<T: Scalar> {
    /// Assets per sector; omitted sectors are absent from the panel.
    pub sector_sizes: BTreeMap<Sector, usize>,
    /// Off-diagonal correlation within each sector.
    pub within_correlations: BTreeMap<Sector, T>,
    /// Correlations between sector pairs; unlisted pairs are zero.
    #[serde(default)]
    pub cross_correlations: Vec<CrossCorrelation<T>>,
    /// Scale of the planted effect; zero plants nothing.
    pub effect_amplitude: T,
    pub effect_direction: EffectDirection<T>,
    pub indicator_process: IndicatorProcess<T>,
    #[serde(default = "default_psd_floor")]
    pub psd_floor: T,
    pub seed: u64,
}

/// A generated panel together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPanel<T: Scalar> {
    pub panel: ReturnsPanel<T>,
    /// The conditioning series actually used during generation.
    pub indicator: Indicator<T>,
    pub c_star: Mat<T>,
    pub d_star: Mat<T>,
    /// Fraction of dates whose covariance needed eigenvalue clipping.
    pub projection_active_fraction: f64,
    /// False when the indicator feeds back on the generated returns, in
    /// which case the planted matrices are approximate.
    pub exact_ground_truth: bool,
}

fn uniform_reference<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::cast(1.0 / (n as f64).sqrt()); n]
}

/// Expands the per-sector sizes into an asset list in sector order,
/// with ids like `IDX_00`.
pub fn spec_assets<T: Scalar>(spec: &SyntheticSpec<T>) -> Result<Vec<AssetMeta>> {
    if spec.sector_sizes.is_empty() {
        return Err(CoreError::BadArgument("no sectors in the spec".into()));
    }
    let mut assets = Vec::new();
    for (&sector, &size) in &spec.sector_sizes {
        if size == 0 {
            return Err(CoreError::BadArgument(format!("sector {sector} has size 0")));
        }
        for k in 0..size {
            assets.push(AssetMeta {
                asset_id: format!("{sector}_{k:02}"),
                sector,
                market: "SYN".into(),
            });
        }
    }
    if assets.len() < 2 {
        return Err(CoreError::BadArgument(
            "a synthetic panel needs at least 2 assets".into(),
        ));
    }
    Ok(assets)
}

/// Builds the block-constant correlation matrix described by the spec and
/// verifies it is a valid correlation matrix.
pub fn build_block_correlation<T: Scalar>(spec: &SyntheticSpec<T>) -> Result<Mat<T>> {
    let assets = spec_assets(spec)?;
    let n = assets.len();

    for (&sector, &size) in &spec.sector_sizes {
        if size >= 2 && !spec.within_correlations.contains_key(&sector) {
            return Err(CoreError::BadArgument(format!(
                "sector {sector} has {size} assets but no within-sector correlation"
            )));
        }
    }
    for (&sector, &rho) in &spec.within_correlations {
        if !spec.sector_sizes.contains_key(&sector) {
            return Err(CoreError::BadArgument(format!(
                "within-sector correlation for absent sector {sector}"
            )));
        }
        if !(rho.abs() < T::one()) {
            return Err(CoreError::BadArgument(format!(
                "within-sector correlation for {sector} must satisfy |rho| < 1, got {rho}"
            )));
        }
    }
    let mut cross: BTreeMap<(Sector, Sector), T> = BTreeMap::new();
    for entry in &spec.cross_correlations {
        if entry.first == entry.second {
            return Err(CoreError::BadArgument(format!(
                "cross-sector entry pairs {} with itself",
                entry.first
            )));
        }
        for sector in [entry.first, entry.second] {
            if !spec.sector_sizes.contains_key(&sector) {
                return Err(CoreError::BadArgument(format!(
                    "cross-sector correlation names absent sector {sector}"
                )));
            }
        }
        if !(entry.rho.abs() < T::one()) {
            return Err(CoreError::BadArgument(format!(
                "cross-sector correlation {}x{} must satisfy |rho| < 1, got {}",
                entry.first, entry.second, entry.rho
            )));
        }
        let key = if entry.first < entry.second {
            (entry.first, entry.second)
        } else {
            (entry.second, entry.first)
        };
        if cross.insert(key, entry.rho).is_some() {
            return Err(CoreError::BadArgument(format!(
                "duplicate cross-sector correlation for {}x{}",
                key.0, key.1
            )));
        }
    }

    let c = Mat::from_fn(n, n, |i, j| {
        if i == j {
            return T::one();
        }
        let (a, b) = (assets[i].sector, assets[j].sector);
        if a == b {
            spec.within_correlations[&a]
        } else {
            let key = if a < b { (a, b) } else { (b, a) };
            cross.get(&key).copied().unwrap_or_else(T::zero)
        }
    });

    let spectrum = spectra::eig_symmetric(&c, &uniform_reference(n))?;
    let min_eig = spectrum.lambda_min();
    if min_eig < -T::cast(1e-10 * n as f64) {
        return Err(CoreError::NotPositiveSemiDefinite {
            min_eigenvalue: min_eig.to_f64_lossy(),
        });
    }
    Ok(c)
}

fn check_symmetric_square<T: Scalar>(m: &Mat<T>, what: &str) -> Result<()> {
    if m.n_rows() != m.n_cols() {
        return Err(CoreError::NotSquare {
            rows: m.n_rows(),
            cols: m.n_cols(),
        });
    }
    if !m.all_finite() {
        return Err(CoreError::NonFinite(what.into()));
    }
    let tol = T::cast(1e-9) * (T::one() + m.max_abs());
    if m.max_asymmetry() > tol {
        return Err(CoreError::BadArgument(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// True when `a - floor I` admits a Cholesky factorization, i.e. every
/// eigenvalue of `a` is at least `floor` up to roundoff.
fn comfortably_psd<T: Scalar>(a: &Mat<T>, floor: T) -> bool {
    let mut shifted = a.clone();
    for i in 0..a.n_rows() {
        shifted[(i, i)] -= floor;
    }
    shifted.cholesky().is_some()
}

/// Projects a symmetric matrix onto the PSD cone by raising every
/// eigenvalue below `floor` to `floor`. Inputs whose smallest eigenvalue
/// already clears the floor are returned unchanged.
pub fn psd_project<T: Scalar>(a: &Mat<T>, floor: T) -> Result<Mat<T>> {
    check_symmetric_square(a, "projection input")?;
    if !(floor > T::zero()) {
        return Err(CoreError::BadArgument("psd floor must be positive".into()));
    }
    if comfortably_psd(a, floor) {
        return Ok(a.clone());
    }
    let n = a.n_rows();
    let spectrum = spectra::eig_symmetric(a, &uniform_reference(n))?;
    let mut out = Mat::zeros(n, n);
    for j in 0..n {
        let lam = spectrum.eigenvalues[j].max(floor);
        out.add_scaled_outer(&spectrum.eigenvector(j), lam);
    }
    Ok(out)
}

/// Factor `L` with `L L^T` equal to `sigma` clipped at the floor, plus a
/// flag telling whether clipping changed the matrix. Comfortably PSD
/// inputs take the Cholesky fast path.
fn conditional_factor<T: Scalar>(sigma: &Mat<T>, floor: T) -> Result<(Mat<T>, bool)> {
    if comfortably_psd(sigma, floor) {
        if let Some(l) = sigma.cholesky() {
            return Ok((l, false));
        }
    }
    let n = sigma.n_rows();
    let spectrum = spectra::eig_symmetric(sigma, &uniform_reference(n))?;
    let active = spectrum.lambda_min() < floor;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let scale = spectrum.eigenvalues[j].max(floor).sqrt();
        let v = spectrum.eigenvector(j);
        for i in 0..n {
            l[(i, j)] = v[i] * scale;
        }
    }
    Ok((l, active))
}

/// Stationary unit-variance AR(1) series, standardized in-sample.
pub fn ar1_indicator<T: Scalar>(phi: T, t_len: usize, seed: u64) -> Result<Indicator<T>> {
    if !(phi.abs() < T::one()) {
        return Err(CoreError::BadArgument(format!(
            "AR(1) coefficient must satisfy |phi| < 1, got {phi}"
        )));
    }
    if t_len < 2 {
        return Err(CoreError::SeriesTooShort {
            needed: 2,
            actual: t_len,
        });
    }
    let mut rng = substream(seed, "ar1", 0);
    let innovation = (T::one() - phi * phi).sqrt();
    let mut values = Vec::with_capacity(t_len);
    let mut x = T::standard_normal(&mut rng);
    values.push(x);
    for _ in 1..t_len {
        x = phi * x + innovation * T::standard_normal(&mut rng);
        values.push(x);
    }
    stats::standardize_in_place(&mut values, "AR(1) indicator")?;
    Ok(Indicator {
        values,
        valid_from: 0,
        kind: IndicatorKind::Synthetic,
        beta: None,
        cutoff: None,
    })
}

/// Exogenous indicator with the autocorrelation of a truncated EMA: a
/// decay-`beta` kernel applied to i.i.d. noise (with a kernel-length
/// lead-in, so every date is fully defined), standardized in-sample.
pub fn ema_target_indicator<T: Scalar>(beta: T, t_len: usize, seed: u64) -> Result<Indicator<T>> {
    if !(beta > T::zero()) {
        return Err(CoreError::BadArgument(format!(
            "decay rate must be positive, got {beta}"
        )));
    }
    if t_len < 2 {
        return Err(CoreError::SeriesTooShort {
            needed: 2,
            actual: t_len,
        });
    }
    let t_k = ema_cutoff(beta);
    let mut rng = substream(seed, "ema-target", 0);
    let eta: Vec<T> = (0..t_len + t_k)
        .map(|_| T::standard_normal(&mut rng))
        .collect();
    let mut values: Vec<T> = if t_k == 0 {
        eta
    } else {
        let weights: Vec<T> = (0..t_k)
            .map(|s| (-beta * T::cast(s as f64)).exp())
            .collect();
        (0..t_len)
            .map(|t| {
                let mut acc = T::zero();
                for (s, w) in weights.iter().enumerate() {
                    acc += *w * eta[t + t_k - s];
                }
                acc
            })
            .collect()
    };
    stats::standardize_in_place(&mut values, "EMA-target indicator")?;
    Ok(Indicator {
        values,
        valid_from: 0,
        kind: IndicatorKind::Synthetic,
        beta: Some(beta),
        cutoff: Some(t_k),
    })
}

/// One planted conditioning channel: `values[t]` scales `sensitivity` in
/// the covariance of date `t`. The caller applies any lag before building
/// the channel (entry `t` multiplies the covariance of date `t` itself).
#[derive(Debug, Clone, Copy)]
pub struct PlantedChannel<'a, T: Scalar> {
    pub values: &'a [T],
    pub sensitivity: &'a Mat<T>,
}

/// Draws a panel whose date-`t` covariance is `C*` plus every channel's
/// scaled sensitivity, clipped to the PSD cone. Returns the standardized
/// panel and the fraction of dates where clipping was active; that
/// fraction reaching one half aborts the run as infeasible.
pub fn generate_conditional_panel<T: Scalar>(
    c_star: &Mat<T>,
    channels: &[PlantedChannel<'_, T>],
    assets: Vec<AssetMeta>,
    psd_floor: T,
    seed: u64,
) -> Result<(ReturnsPanel<T>, f64)> {
    check_symmetric_square(c_star, "base correlation")?;
    let n = c_star.n_rows();
    if assets.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{} assets for a {n} x {n} base correlation",
            assets.len()
        )));
    }
    if channels.is_empty() {
        return Err(CoreError::BadArgument(
            "need at least one channel; plant a zero series for pure noise".into(),
        ));
    }
    if !(psd_floor > T::zero()) {
        return Err(CoreError::BadArgument("psd floor must be positive".into()));
    }
    let t_len = channels[0].values.len();
    if t_len < 2 {
        return Err(CoreError::SeriesTooShort {
            needed: 2,
            actual: t_len,
        });
    }
    for (idx, channel) in channels.iter().enumerate() {
        if channel.values.len() != t_len {
            return Err(CoreError::DimensionMismatch(format!(
                "channel {idx} has {} values, channel 0 has {t_len}",
                channel.values.len()
            )));
        }
        if channel.values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite(format!("channel {idx} values")));
        }
        check_symmetric_square(channel.sensitivity, "channel sensitivity")?;
        if channel.sensitivity.n_rows() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "channel {idx} sensitivity is {} x {}, panel has {n} assets",
                channel.sensitivity.n_rows(),
                channel.sensitivity.n_cols()
            )));
        }
    }

    let mut returns = Mat::zeros(n, t_len);
    let mut active_count = 0usize;
    for t in 0..t_len {
        let mut sigma = c_star.clone();
        for channel in channels {
            sigma = sigma.add_scaled(channel.sensitivity, channel.values[t]);
        }
        let (l, clipped) = conditional_factor(&sigma, psd_floor)?;
        if clipped {
            active_count += 1;
        }
        let mut rng = substream(seed, "synth-date", t as u64);
        let eta: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
        let r = l.matvec(&eta);
        for i in 0..n {
            returns[(i, t)] = r[i];
        }
    }
    let active_fraction = active_count as f64 / t_len as f64;
    if active_fraction >= 0.5 {
        return Err(CoreError::Infeasible { active_fraction });
    }
    for i in 0..n {
        stats::standardize_in_place(returns.row_mut(i), "generated returns")?;
    }
    let dates = (0..t_len).map(|t| format!("t{t:06}")).collect();
    let panel = ReturnsPanel::from_standardized(assets, dates, returns)?;
    Ok((panel, active_fraction))
}

fn planted_direction<T: Scalar>(
    spec: &SyntheticSpec<T>,
    c_star: &Mat<T>,
    reference: &[T],
) -> Result<Mat<T>> {
    if !(spec.effect_amplitude >= T::zero()) {
        return Err(CoreError::BadArgument(format!(
            "effect amplitude must be non-negative, got {}",
            spec.effect_amplitude
        )));
    }
    let n = c_star.n_rows();
    match &spec.effect_direction {
        EffectDirection::MarketMode => {
            let spectrum = spectra::eig_symmetric(c_star, reference)?;
            let v1 = spectrum.eigenvector(0);
            let mut d = Mat::zeros(n, n);
            d.add_scaled_outer(&v1, -spec.effect_amplitude);
            Ok(d)
        }
        EffectDirection::Custom(m) => {
            check_symmetric_square(m, "custom effect direction")?;
            if m.n_rows() != n {
                return Err(CoreError::DimensionMismatch(format!(
                    "custom direction is {} x {}, panel has {n} assets",
                    m.n_rows(),
                    m.n_cols()
                )));
            }
            let mut d = m.clone();
            d.scale_in_place(spec.effect_amplitude);
            Ok(d)
        }
    }
}

fn endogenous_panel<T: Scalar>(
    spec: &SyntheticSpec<T>,
    c_star: Mat<T>,
    d_star: Mat<T>,
    assets: Vec<AssetMeta>,
    beta: T,
    t_len: usize,
) -> Result<SyntheticPanel<T>> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(CoreError::BadArgument(format!(
            "endogenous smoothing needs a finite positive decay rate, got {beta}"
        )));
    }
    let n = assets.len();
    let t_k = ema_cutoff(beta);
    if t_len <= t_k + 2 {
        return Err(CoreError::SeriesTooShort {
            needed: t_k + 3,
            actual: t_len,
        });
    }
    let signs: Vec<T> = assets.iter().map(|a| a.sector.sign()).collect();
    let weights: Vec<T> = (0..t_k)
        .map(|s| (-beta * T::cast(s as f64)).exp())
        .collect();
    // Normalize the smoothed signed average to roughly unit variance:
    // Var(I0) = s^T C* s / N^2 and the kernel taps are serially nearly
    // uncorrelated, so the raw EMA has scale |w| sqrt(s^T C* s) / N.
    let sum_sq: T = weights.iter().map(|w| *w * *w).sum();
    let kappa = (sum_sq.sqrt() * c_star.quadratic_form(&signs).sqrt()) / T::cast(n as f64);
    if !(kappa > T::zero()) {
        return Err(CoreError::ZeroVariance(
            "signed average return under the planted correlation".into(),
        ));
    }

    let mut values = vec![T::zero(); t_len];
    let mut i0 = vec![T::zero(); t_len];
    let mut returns = Mat::zeros(n, t_len);
    let mut active_count = 0usize;
    for t in 0..t_len {
        let x_eff = if t == 0 { T::zero() } else { values[t - 1] };
        let sigma = c_star.add_scaled(&d_star, x_eff);
        let (l, clipped) = conditional_factor(&sigma, spec.psd_floor)?;
        if clipped {
            active_count += 1;
        }
        let mut rng = substream(spec.seed, "synth-date", t as u64);
        let eta: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
        let r = l.matvec(&eta);
        for i in 0..n {
            returns[(i, t)] = r[i];
        }
        i0[t] = stats::dot(&signs, &r) / T::cast(n as f64);
        if t >= t_k {
            let mut acc = T::zero();
            for (s, w) in weights.iter().enumerate() {
                acc += *w * i0[t - s];
            }
            values[t] = acc / kappa;
        }
    }
    let active_fraction = active_count as f64 / t_len as f64;
    if active_fraction >= 0.5 {
        return Err(CoreError::Infeasible { active_fraction });
    }
    for i in 0..n {
        stats::standardize_in_place(returns.row_mut(i), "generated returns")?;
    }
    let dates = (0..t_len).map(|t| format!("t{t:06}")).collect();
    let panel = ReturnsPanel::from_standardized(assets, dates, returns)?;
    Ok(SyntheticPanel {
        panel,
        indicator: Indicator {
            values,
            valid_from: t_k,
            kind: IndicatorKind::Synthetic,
            beta: Some(beta),
            cutoff: Some(t_k),
        },
        c_star,
        d_star,
        projection_active_fraction: active_fraction,
        exact_ground_truth: false,
    })
}

/// Generates a panel of length `t_len` from the spec, returning the
/// ground truth alongside it.
///
/// Dates are conditioned on the previous date's indicator value; the
/// first date (and, for the endogenous process, the kernel burn-in) is
/// drawn unconditionally. Exogenous indicator processes leave the planted
/// matrices exact; the endogenous process marks them approximate.
pub fn generate_panel<T: Scalar>(spec: &SyntheticSpec<T>, t_len: usize) -> Result<SyntheticPanel<T>> {
    let assets = spec_assets(spec)?;
    let n = assets.len();
    if t_len < 10 * n {
        return Err(CoreError::SampleTooSmall {
            needed: 10 * n,
            actual: t_len,
        });
    }
    if !(spec.psd_floor > T::zero()) {
        return Err(CoreError::BadArgument("psd floor must be positive".into()));
    }
    let c_star = build_block_correlation(spec)?;
    let signs: Vec<T> = assets.iter().map(|a| a.sector.sign()).collect();
    let scale = T::cast(1.0 / (n as f64).sqrt());
    let e0: Vec<T> = signs.iter().map(|s| *s * scale).collect();
    let d_star = planted_direction(spec, &c_star, &e0)?;

    let indicator = match spec.indicator_process {
        IndicatorProcess::Ar1 { phi } => ar1_indicator(phi, t_len, spec.seed)?,
        IndicatorProcess::ExogenousEmaTarget { beta } => {
            ema_target_indicator(beta, t_len, spec.seed)?
        }
        IndicatorProcess::EndogenousEma { beta } => {
            return endogenous_panel(spec, c_star, d_star, assets, beta, t_len);
        }
    };

    let mut lagged = vec![T::zero(); t_len];
    lagged[1..].copy_from_slice(&indicator.values[..t_len - 1]);
    let channel = PlantedChannel {
        values: &lagged,
        sensitivity: &d_star,
    };
    let (panel, active_fraction) =
        generate_conditional_panel(&c_star, &[channel], assets, spec.psd_floor, spec.seed)?;
    Ok(SyntheticPanel {
        panel,
        indicator,
        c_star,
        d_star,
        projection_active_fraction: active_fraction,
        exact_ground_truth: true,
    })
}
