//! Subcommand implementations: each one wires the core estimators to the
//! deterministic artifact writers and echoes its effective parameters
//! into the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use pra_core::analysis::{self, AngleMode, SweepBase};
use pra_core::indicators;
use pra_core::panel::{self, Sector};
use pra_core::pra::{self, PraConfig};
use pra_core::significance::{self, NullPredictor, TailStatistic};
use pra_core::spectra::{self, Spectrum};
use pra_core::stats;
use pra_core::synthetic::{self, EffectDirection, IndicatorProcess, SyntheticSpec};
use pra_core::{CoreError, Panel, Real, Result, Series};
use serde::{Deserialize, Serialize};

use crate::factor::FactorSpec;
use crate::io::{self, PanelMeta, RunWriter};

/// Seed used when the command line does not pass one.
pub const DEFAULT_SEED: u64 = 42;

fn asset_ids(panel: &Panel) -> Vec<String> {
    panel.assets.iter().map(|a| a.asset_id.clone()).collect()
}

fn parse_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        CoreError::BadArgument(format!("failed to parse {}: {e}", path.display()))
    })
}

// ----- ingest -----

pub fn ingest(
    w: &mut RunWriter,
    prices: &Path,
    assets: &Path,
    vol_window: usize,
    clip: Real,
) -> Result<()> {
    w.input(prices)?;
    w.input(assets)?;
    w.param("vol_window", vol_window);
    w.param("clip", clip);

    let price_panel = panel::load_price_csv::<Real>(prices, assets)?;
    let raw = panel::vol_adjusted_returns(&price_panel, vol_window, clip)?;
    let standardized = panel::standardize_panel(&raw)?;

    w.write_bytes("panel.csv", &io::panel_csv(&standardized)?)?;
    let meta = PanelMeta {
        assets: standardized.assets.clone(),
        n_dates: standardized.n_dates(),
        source: "ingest".to_string(),
        vol_window: Some(vol_window),
        clip: Some(clip),
        burn_in: Some(raw.burn_in),
        degenerate_cells: Some(raw.degenerate.len()),
    };
    w.write_json("panel_meta.json", &meta)
}

// ----- describe -----

pub fn describe(w: &mut RunWriter, panel_path: &Path, meta_path: &Path) -> Result<()> {
    w.input(panel_path)?;
    w.input(meta_path)?;
    let (panel, _) = io::read_panel(panel_path, meta_path)?;
    let config = PraConfig::default();
    w.param("normalization", config.normalization);

    let c = pra::unconditional_correlation(&panel, &config)?;
    let spectrum = spectra::eig_symmetric(&c, &panel.uniform_mode)?;
    w.write_bytes("C.csv", &io::matrix_csv(&asset_ids(&panel), &c)?)?;
    w.write_json("spectrum_C.json", &io::spectrum_report(&spectrum, "uniform_mode"))?;

    let (groups, sectors) = analysis::sector_groups(&panel);
    let averages = analysis::group_average_matrix(&c, &groups, sectors.len())?;
    let labels: Vec<String> = sectors.iter().map(|s| s.to_string()).collect();
    w.write_bytes("C_sectors.csv", &io::matrix_csv(&labels, &averages)?)?;
    w.figure("fig1-2");
    Ok(())
}

// ----- shared fit reporting -----

#[derive(Debug, Serialize)]
struct PValueEntry {
    p: Real,
    formatted: String,
}

#[derive(Debug, Serialize)]
struct NullReport {
    predictor: String,
    n_records: usize,
    failures: usize,
    p_floor: Real,
    lambda_min: PValueEntry,
    lambda_max: PValueEntry,
    bottom_overlap: PValueEntry,
    top_overlap: PValueEntry,
    mean_spectrum: Vec<Real>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ObservedStats {
    lambda_min: Real,
    lambda_max: Real,
    bottom_overlap: Real,
    top_overlap: Real,
}

fn observed_stats(spectrum: &Spectrum<Real>) -> ObservedStats {
    let n = spectrum.order();
    ObservedStats {
        lambda_min: spectrum.lambda_min(),
        lambda_max: spectrum.lambda_max(),
        bottom_overlap: stats::dot(&spectrum.alignment_reference, &spectrum.eigenvector(n - 1)),
        top_overlap: stats::dot(&spectrum.alignment_reference, &spectrum.eigenvector(0)),
    }
}

fn null_report(
    panel: &Panel,
    config: &PraConfig,
    n_trials: usize,
    seed: u64,
    predictor: NullPredictor<'_, Real>,
    predictor_name: &str,
    valid_from: usize,
    observed: ObservedStats,
) -> Result<NullReport> {
    let null = significance::null_ensemble_at(panel, config, n_trials, seed, predictor, valid_from)?;
    let n_records = null.records.len();
    let entry = |statistic, value| -> Result<PValueEntry> {
        let p = significance::p_value(&null, statistic, value)?;
        Ok(PValueEntry {
            p,
            formatted: significance::format_p_value(p, n_records),
        })
    };
    Ok(NullReport {
        predictor: predictor_name.to_string(),
        n_records,
        failures: null.failures,
        p_floor: significance::p_value_floor(&null),
        lambda_min: entry(TailStatistic::MinEigenvalue, observed.lambda_min)?,
        lambda_max: entry(TailStatistic::MaxEigenvalue, observed.lambda_max)?,
        bottom_overlap: entry(TailStatistic::AbsOverlap, observed.bottom_overlap)?,
        top_overlap: entry(TailStatistic::AbsOverlap, observed.top_overlap)?,
        mean_spectrum: null.mean_spectrum.clone(),
    })
}

#[derive(Debug, Serialize)]
struct FitReport {
    factor: String,
    tau: usize,
    sample_count: usize,
    residual_power: Real,
    spectrum: io::SpectrumReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_iid: Option<NullReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_matched: Option<NullReport>,
}

// ----- pra -----

pub struct PraArgs {
    pub factor: String,
    pub tau: usize,
    pub k_window: Option<usize>,
    pub n_trials: usize,
    pub n_bins: usize,
    pub seed: u64,
}

pub fn pra_fit(w: &mut RunWriter, panel_path: &Path, meta_path: &Path, args: &PraArgs) -> Result<()> {
    w.input(panel_path)?;
    w.input(meta_path)?;
    let spec = FactorSpec::parse(&args.factor)?;
    w.param("factor", spec.name());
    w.param("tau", args.tau);
    w.param("k_window", args.k_window);
    w.param("n_trials", args.n_trials);
    w.param("n_bins", args.n_bins);
    w.param("seed", args.seed);

    let (panel, _) = io::read_panel(panel_path, meta_path)?;
    let x = spec.build(&panel, args.k_window)?;
    let config = PraConfig {
        tau: args.tau,
        ..PraConfig::default()
    };
    let fit = pra::fit_single(&panel, &x, &config)?;
    let ids = asset_ids(&panel);

    w.write_bytes("C.csv", &io::matrix_csv(&ids, &fit.intercept)?)?;
    w.write_json(
        "spectrum_C.json",
        &io::spectrum_report(&fit.intercept_spectrum, "uniform_mode"),
    )?;

    let d_spectrum = &fit.sensitivity_spectra[0];
    let observed = observed_stats(d_spectrum);
    let (p_iid, p_matched) = if args.n_trials > 0 {
        let iid = null_report(
            &panel,
            &config,
            args.n_trials,
            args.seed,
            NullPredictor::Gaussian,
            "gaussian_iid",
            x.valid_from,
            observed,
        )?;
        let matched = match spec.beta() {
            Some(beta) => Some(null_report(
                &panel,
                &config,
                args.n_trials,
                args.seed,
                NullPredictor::GaussianEma { beta },
                "gaussian_ema",
                x.valid_from,
                observed,
            )?),
            None => None,
        };
        (Some(iid), matched)
    } else {
        (None, None)
    };

    let slug = spec.slug();
    w.write_bytes(&format!("D_{slug}.csv"), &io::matrix_csv(&ids, &fit.sensitivities[0])?)?;
    let report = FitReport {
        factor: spec.name(),
        tau: args.tau,
        sample_count: fit.sample_count,
        residual_power: fit.residual_power,
        spectrum: io::spectrum_report(d_spectrum, "market_mode"),
        n_trials: (args.n_trials > 0).then_some(args.n_trials),
        seed: (args.n_trials > 0).then_some(args.seed),
        p_iid,
        p_matched,
    };
    w.write_json(&format!("spectrum_D_{slug}.json"), &report)?;

    if args.n_bins > 0 {
        let t0 = x.valid_from + config.tau;
        let t_len = panel.n_dates();
        let mut z: Vec<Real> = x.values[t0 - config.tau..t_len - config.tau].to_vec();
        stats::standardize_in_place(&mut z, "lagged factor over the aligned sample")?;
        let rho = pra::avg_signed_correlation_series(&panel);
        let curve = analysis::binned_means(&z, &rho[t0..], args.n_bins)?;
        w.write_bytes(
            "bins_fig3.csv",
            &io::curve_csv(&curve, "mean_signed_correlation", None)?,
        )?;
        let empirical =
            analysis::conditional_angle_curve(&panel, &x, &config, args.n_bins, AngleMode::EmpiricalBins)?;
        w.write_bytes(
            "bins_fig9.csv",
            &io::curve_csv(&empirical.curve, "angle_rad", Some(empirical.baseline))?,
        )?;
        let implied =
            analysis::conditional_angle_curve(&panel, &x, &config, args.n_bins, AngleMode::ModelImplied)?;
        w.write_bytes(
            "bins_fig10.csv",
            &io::curve_csv(&implied.curve, "angle_rad", Some(implied.baseline))?,
        )?;
    }
    w.figure("fig3-12");
    Ok(())
}

// ----- pra-sectors -----

pub fn pra_sectors(
    w: &mut RunWriter,
    panel_path: &Path,
    meta_path: &Path,
    beta: Real,
    tau: usize,
) -> Result<()> {
    w.input(panel_path)?;
    w.input(meta_path)?;
    w.param("beta", beta);
    w.param("tau", tau);

    let (panel, _) = io::read_panel(panel_path, meta_path)?;
    let config = PraConfig {
        tau,
        ..PraConfig::default()
    };
    let sectors: Vec<Sector> = Sector::ALL
        .into_iter()
        .filter(|s| !panel.sector_members(*s).is_empty())
        .collect();
    let mut factors: Vec<Series> = Vec::with_capacity(sectors.len());
    for sector in &sectors {
        let index = indicators::sector_index(&panel, *sector)?;
        factors.push(if beta.is_finite() {
            indicators::ema_smooth(&index, beta)?
        } else {
            index
        });
    }
    let fit = pra::fit_multi(&panel, &factors, &config)?;
    let ids = asset_ids(&panel);

    w.write_bytes("C.csv", &io::matrix_csv(&ids, &fit.intercept)?)?;
    w.write_json(
        "spectrum_C.json",
        &io::spectrum_report(&fit.intercept_spectrum, "uniform_mode"),
    )?;
    for (i, sector) in sectors.iter().enumerate() {
        let (name, slug) = if beta.is_finite() {
            (
                format!("sector:{sector}:ema:{beta}"),
                format!("sector_{sector}_ema_{beta}"),
            )
        } else {
            (format!("sector:{sector}"), format!("sector_{sector}"))
        };
        w.write_bytes(&format!("D_{slug}.csv"), &io::matrix_csv(&ids, &fit.sensitivities[i])?)?;
        let report = FitReport {
            factor: name,
            tau,
            sample_count: fit.sample_count,
            residual_power: fit.residual_power,
            spectrum: io::spectrum_report(&fit.sensitivity_spectra[i], "market_mode"),
            n_trials: None,
            seed: None,
            p_iid: None,
            p_matched: None,
        };
        w.write_json(&format!("spectrum_D_{slug}.json"), &report)?;
    }
    w.figure("fig13");
    Ok(())
}

// ----- sweep -----

/// Sweep settings file; command line flags override any field.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigFile {
    pub base: Option<String>,
    pub grid_days: Option<Vec<Real>>,
    pub tau: Option<usize>,
    pub n_trials: Option<usize>,
    pub k_window: Option<usize>,
}

pub struct SweepArgs {
    pub base: Option<String>,
    pub grid_days: Option<String>,
    pub tau: Option<usize>,
    pub n_trials: Option<usize>,
    pub k_window: Option<usize>,
    pub seed: u64,
}

fn parse_grid_days(text: &str) -> Result<Vec<Real>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<Real>()
                .map_err(|_| CoreError::BadArgument(format!("bad grid timescale '{part}'")))
        })
        .collect()
}

pub fn sweep(
    w: &mut RunWriter,
    panel_path: &Path,
    meta_path: &Path,
    config_path: Option<&Path>,
    args: &SweepArgs,
) -> Result<()> {
    w.input(panel_path)?;
    w.input(meta_path)?;
    let mut cfg = SweepConfigFile::default();
    if let Some(path) = config_path {
        w.input(path)?;
        cfg = parse_json_file(path)?;
    }
    if let Some(base) = &args.base {
        cfg.base = Some(base.clone());
    }
    if let Some(grid) = &args.grid_days {
        cfg.grid_days = Some(parse_grid_days(grid)?);
    }
    if args.tau.is_some() {
        cfg.tau = args.tau;
    }
    if args.n_trials.is_some() {
        cfg.n_trials = args.n_trials;
    }
    if args.k_window.is_some() {
        cfg.k_window = args.k_window;
    }

    let base_name = cfg.base.clone().unwrap_or_else(|| "market_ema".to_string());
    let (base, figure) = match base_name.as_str() {
        "market_ema" => (SweepBase::EmaOfMarketIndex, "fig6"),
        "eigenfactor" => (SweepBase::EigenFactor { window: cfg.k_window }, "fig8"),
        other => {
            return Err(CoreError::BadArgument(format!(
                "unknown sweep base '{other}' (expected market_ema or eigenfactor)"
            )))
        }
    };
    let days = cfg
        .grid_days
        .clone()
        .unwrap_or_else(|| analysis::DEFAULT_SWEEP_DAYS.to_vec());
    for &day in &days {
        if !day.is_finite() || !(day > 0.0) {
            return Err(CoreError::BadArgument(format!(
                "grid timescales must be positive and finite, got {day}"
            )));
        }
    }
    let grid: Vec<Real> = days.iter().map(|d| d.recip()).collect();
    let tau = cfg.tau.unwrap_or(1);
    let n_trials = cfg.n_trials.unwrap_or(0);

    w.param("base", &base_name);
    w.param("grid_days", &days);
    w.param("tau", tau);
    w.param("n_trials", n_trials);
    w.param("k_window", cfg.k_window);
    w.param("seed", args.seed);

    let (panel, _) = io::read_panel(panel_path, meta_path)?;
    let config = PraConfig {
        tau,
        ..PraConfig::default()
    };
    let result = analysis::beta_sweep(&panel, base, &grid, &config, n_trials, args.seed)?;
    w.write_bytes("sweep.csv", &io::sweep_csv(&result)?)?;
    w.figure(figure);
    Ok(())
}

// ----- null -----

pub fn null_cmd(
    w: &mut RunWriter,
    panel_path: &Path,
    meta_path: &Path,
    factor: &str,
    tau: usize,
    k_window: Option<usize>,
    n_trials: usize,
    seed: u64,
) -> Result<()> {
    w.input(panel_path)?;
    w.input(meta_path)?;
    let spec = FactorSpec::parse(factor)?;
    w.param("factor", spec.name());
    w.param("tau", tau);
    w.param("k_window", k_window);
    w.param("n_trials", n_trials);
    w.param("seed", seed);

    let (panel, _) = io::read_panel(panel_path, meta_path)?;
    let x = spec.build(&panel, k_window)?;
    let config = PraConfig {
        tau,
        ..PraConfig::default()
    };
    let fit = pra::fit_single(&panel, &x, &config)?;
    let observed = observed_stats(&fit.sensitivity_spectra[0]);

    let mut ensembles = vec![null_report(
        &panel,
        &config,
        n_trials,
        seed,
        NullPredictor::Gaussian,
        "gaussian_iid",
        x.valid_from,
        observed,
    )?];
    if let Some(beta) = spec.beta() {
        ensembles.push(null_report(
            &panel,
            &config,
            n_trials,
            seed,
            NullPredictor::GaussianEma { beta },
            "gaussian_ema",
            x.valid_from,
            observed,
        )?);
    }
    ensembles.push(null_report(
        &panel,
        &config,
        n_trials,
        seed,
        NullPredictor::CircularShift { indicator: &x },
        "circular_shift",
        x.valid_from,
        observed,
    )?);

    #[derive(Serialize)]
    struct NullJson {
        factor: String,
        tau: usize,
        n_trials: usize,
        seed: u64,
        observed: ObservedStats,
        ensembles: Vec<NullReport>,
    }
    w.write_json(
        "null.json",
        &NullJson {
            factor: spec.name(),
            tau,
            n_trials,
            seed,
            observed,
            ensembles,
        },
    )
}

// ----- synth -----

fn synthetic_meta(panel: &Panel) -> PanelMeta {
    PanelMeta {
        assets: panel.assets.clone(),
        n_dates: panel.n_dates(),
        source: "synth".to_string(),
        vol_window: None,
        clip: None,
        burn_in: None,
        degenerate_cells: None,
    }
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    spec: &'a SyntheticSpec<Real>,
    t_len: usize,
    c_star: &'a pra_core::Matrix,
    d_star: &'a pra_core::Matrix,
    indicator_valid_from: usize,
    indicator_beta: Option<Real>,
    indicator_cutoff: Option<usize>,
    projection_active_fraction: f64,
    exact_ground_truth: bool,
}

pub fn synth(w: &mut RunWriter, spec_path: &Path, t_len: usize, seed: Option<u64>) -> Result<()> {
    w.input(spec_path)?;
    let mut spec: SyntheticSpec<Real> = parse_json_file(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    w.param("t_len", t_len);
    w.param("seed", spec.seed);
    w.param("spec", &spec);

    let generated = synthetic::generate_panel(&spec, t_len)?;
    w.write_bytes("panel.csv", &io::panel_csv(&generated.panel)?)?;
    w.write_json("panel_meta.json", &synthetic_meta(&generated.panel))?;
    w.write_bytes(
        "indicator.csv",
        &io::series_csv(&generated.panel.dates, &generated.indicator.values)?,
    )?;
    w.write_json(
        "ground_truth.json",
        &GroundTruth {
            spec: &spec,
            t_len,
            c_star: &generated.c_star,
            d_star: &generated.d_star,
            indicator_valid_from: generated.indicator.valid_from,
            indicator_beta: generated.indicator.beta,
            indicator_cutoff: generated.indicator.cutoff,
            projection_active_fraction: generated.projection_active_fraction,
            exact_ground_truth: generated.exact_ground_truth,
        },
    )
}

// ----- verify -----

/// The built-in recovery benchmark: four equal sectors, anti-correlated
/// bonds, a strong market-mode effect driven by a persistent AR(1)
/// indicator.
pub fn recovery_spec() -> SyntheticSpec<Real> {
    let sectors = [Sector::Idx, Sector::Cmd, Sector::Fxr, Sector::Yld];
    let cross = |first, second, rho| synthetic::CrossCorrelation { first, second, rho };
    SyntheticSpec {
        sector_sizes: BTreeMap::from(sectors.map(|s| (s, 5))),
        within_correlations: BTreeMap::from(sectors.map(|s| (s, 0.4))),
        cross_correlations: vec![
            cross(Sector::Idx, Sector::Cmd, 0.1),
            cross(Sector::Idx, Sector::Fxr, 0.1),
            cross(Sector::Cmd, Sector::Fxr, 0.1),
            cross(Sector::Idx, Sector::Yld, -0.1),
            cross(Sector::Cmd, Sector::Yld, -0.1),
            cross(Sector::Fxr, Sector::Yld, -0.1),
        ],
        effect_amplitude: 5.0,
        effect_direction: EffectDirection::MarketMode,
        indicator_process: IndicatorProcess::Ar1 { phi: 0.9 },
        psd_floor: synthetic::DEFAULT_PSD_FLOOR,
        seed: DEFAULT_SEED,
    }
}

pub fn verify(
    w: &mut RunWriter,
    spec_path: Option<&Path>,
    t_len: usize,
    n_trials: usize,
    tau: usize,
    seed: Option<u64>,
) -> Result<()> {
    let mut spec = match spec_path {
        Some(path) => {
            w.input(path)?;
            parse_json_file::<SyntheticSpec<Real>>(path)?
        }
        None => recovery_spec(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    w.param("t_len", t_len);
    w.param("n_trials", n_trials);
    w.param("tau", tau);
    w.param("seed", spec.seed);
    w.param("spec", &spec);

    let generated = synthetic::generate_panel(&spec, t_len)?;
    let config = PraConfig {
        tau,
        ..PraConfig::default()
    };
    let fit = pra::fit_single(&generated.panel, &generated.indicator, &config)?;

    let d_hat = &fit.sensitivities[0];
    let d_star_norm = generated.d_star.frobenius();
    let d_relative_error = (d_star_norm > 0.0)
        .then(|| d_hat.add_scaled(&generated.d_star, -1.0).frobenius() / d_star_norm);
    let c_relative_error =
        fit.intercept.add_scaled(&generated.c_star, -1.0).frobenius() / generated.c_star.frobenius();

    let star_spectrum = spectra::eig_symmetric(&generated.c_star, &generated.panel.uniform_mode)?;
    let v1_star = star_spectrum.eigenvector(0);
    let d_spectrum = &fit.sensitivity_spectra[0];
    let bottom = d_spectrum.eigenvector(d_spectrum.order() - 1);
    let market_mode_overlap = stats::dot(&v1_star, &bottom).abs();
    let lambda_min = d_spectrum.lambda_min();

    let p_lambda_min = if n_trials > 0 {
        let null = significance::null_ensemble_at(
            &generated.panel,
            &config,
            n_trials,
            spec.seed,
            NullPredictor::Gaussian,
            generated.indicator.valid_from,
        )?;
        let p = significance::p_value(&null, TailStatistic::MinEigenvalue, lambda_min)?;
        Some(PValueEntry {
            p,
            formatted: significance::format_p_value(p, null.records.len()),
        })
    } else {
        None
    };

    #[derive(Serialize)]
    struct Recovery {
        d_relative_frobenius_error: Option<Real>,
        c_relative_frobenius_error: Real,
        lambda_min_d_hat: Real,
        lambda_min_negative: bool,
        market_mode_overlap: Real,
        sample_count: usize,
        residual_power: Real,
        projection_active_fraction: f64,
        exact_ground_truth: bool,
    }
    #[derive(Serialize)]
    struct VerifyReport<'a> {
        spec: &'a SyntheticSpec<Real>,
        t_len: usize,
        tau: usize,
        n_trials: usize,
        seed: u64,
        recovery: Recovery,
        p_lambda_min: Option<PValueEntry>,
    }

    let ids = asset_ids(&generated.panel);
    w.write_bytes("C_hat.csv", &io::matrix_csv(&ids, &fit.intercept)?)?;
    w.write_bytes("D_hat.csv", &io::matrix_csv(&ids, d_hat)?)?;
    w.write_bytes("C_star.csv", &io::matrix_csv(&ids, &generated.c_star)?)?;
    w.write_bytes("D_star.csv", &io::matrix_csv(&ids, &generated.d_star)?)?;
    w.write_json(
        "spectrum_C_hat.json",
        &io::spectrum_report(&fit.intercept_spectrum, "uniform_mode"),
    )?;
    w.write_json(
        "spectrum_D_hat.json",
        &io::spectrum_report(d_spectrum, "market_mode"),
    )?;
    w.write_json(
        "verify.json",
        &VerifyReport {
            spec: &spec,
            t_len,
            tau,
            n_trials,
            seed: spec.seed,
            recovery: Recovery {
                d_relative_frobenius_error: d_relative_error,
                c_relative_frobenius_error: c_relative_error,
                lambda_min_d_hat: lambda_min,
                lambda_min_negative: lambda_min < 0.0,
                market_mode_overlap,
                sample_count: fit.sample_count,
                residual_power: fit.residual_power,
                projection_active_fraction: generated.projection_active_fraction,
                exact_ground_truth: generated.exact_ground_truth,
            },
            p_lambda_min,
        },
    )
}
