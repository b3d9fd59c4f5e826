//! Deterministic run artifacts: CSV and JSON writers, content digests,
//! and the manifest tying a run's parameters to its inputs and outputs.
//!
//! Floats are written through Rust's shortest round-trip `Display`, so
//! re-reading an artifact recovers the exact bits and re-running a
//! manifest's command line reproduces every output byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pra_core::analysis::{BinnedCurve, StatPValues, SweepRecord, SweepResult};
use pra_core::matrix::Mat;
use pra_core::panel::{AssetMeta, ReturnsPanel};
use pra_core::spectra::Spectrum;
use pra_core::stats;
use pra_core::{CoreError, Panel, Real, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn io_err(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> CoreError {
    CoreError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest.iter() {
        write!(hex, "{byte:02x}").expect("writing to a string");
    }
    hex
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex_digest(&bytes))
}

/// Serializes to pretty JSON with a trailing newline.
pub fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    params: &'a BTreeMap<String, serde_json::Value>,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    figure: Option<&'a str>,
}

/// Collects one run's effective parameters, input digests, and output
/// files, then seals them into `manifest.json`.
///
/// Worker-count and output-location settings are deliberately not
/// recorded: the manifest describes content, and content is invariant to
/// where the run wrote and how parallel it was.
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    params: BTreeMap<String, serde_json::Value>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    figure: Option<String>,
}

impl RunWriter {
    pub fn new(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            params: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            figure: None,
        })
    }

    /// Records one effective parameter under a stable key.
    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameter serializes");
        self.params.insert(key.to_string(), value);
    }

    /// Registers an input file and digests its current content.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    /// Tags the run with the figure its artifacts correspond to.
    pub fn figure(&mut self, tag: &str) {
        self.figure = Some(tag.to_string());
    }

    /// Writes one artifact under the run directory and records its digest.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: hex_digest(bytes),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write_bytes(name, &json_bytes(value))
    }

    /// Writes `manifest.json`; output digests appear in write order.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            command: &self.command,
            params: &self.params,
            inputs: &self.inputs,
            outputs: &self.outputs,
            figure: self.figure.as_deref(),
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, json_bytes(&manifest)).map_err(|e| io_err(&path, e))
    }
}

fn encode_err(e: impl std::fmt::Display) -> CoreError {
    CoreError::BadArgument(format!("csv encode failed: {e}"))
}

fn encode_csv(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer).map_err(encode_err)?;
    writer.into_inner().map_err(|e| encode_err(e.into_error()))
}

fn fmt(v: Real) -> String {
    format!("{v}")
}

/// Square matrix CSV: an empty corner cell, one label per column, one
/// labeled row per line.
pub fn matrix_csv(labels: &[String], m: &Mat<Real>) -> Result<Vec<u8>> {
    encode_csv(|w| {
        let mut header = vec![String::new()];
        header.extend(labels.iter().cloned());
        w.write_record(&header)?;
        for i in 0..m.n_rows() {
            let mut row = vec![labels[i].clone()];
            row.extend(m.row(i).iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Wide panel CSV: `date` plus one column per asset, one row per date.
pub fn panel_csv(panel: &Panel) -> Result<Vec<u8>> {
    encode_csv(|w| {
        let mut header = vec!["date".to_string()];
        header.extend(panel.assets.iter().map(|a| a.asset_id.clone()));
        w.write_record(&header)?;
        for t in 0..panel.n_dates() {
            let mut row = vec![panel.dates[t].clone()];
            row.extend((0..panel.n_assets()).map(|i| fmt(panel.returns[(i, t)])));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// `date,value` rows for one series aligned to panel dates.
pub fn series_csv(dates: &[String], values: &[Real]) -> Result<Vec<u8>> {
    encode_csv(|w| {
        w.write_record(["date", "value"])?;
        for (date, value) in dates.iter().zip(values) {
            w.write_record([date.as_str(), &fmt(*value)])?;
        }
        Ok(())
    })
}

/// Binned curve CSV; empty bins leave the value field blank, and an
/// optional constant baseline column rides along for reference lines.
pub fn curve_csv(
    curve: &BinnedCurve<Real>,
    value_name: &str,
    baseline: Option<Real>,
) -> Result<Vec<u8>> {
    encode_csv(|w| {
        let mut header = vec![
            "bin_left".to_string(),
            "bin_right".to_string(),
            "bin_center".to_string(),
            "count".to_string(),
            value_name.to_string(),
        ];
        if baseline.is_some() {
            header.push("baseline".to_string());
        }
        w.write_record(&header)?;
        let n_bins = curve.bin_counts.len();
        for b in 0..n_bins {
            let left = curve.bin_edges[b];
            let right = curve.bin_edges[b + 1];
            let mut row = vec![
                fmt(left),
                fmt(right),
                fmt(0.5 * (left + right)),
                curve.bin_counts[b].to_string(),
                curve.bin_means[b].map(fmt).unwrap_or_default(),
            ];
            if let Some(base) = baseline {
                row.push(fmt(base));
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

fn p_fields(p: &Option<StatPValues<Real>>) -> [String; 4] {
    match p {
        Some(p) => [
            fmt(p.lambda_min),
            fmt(p.lambda_max),
            fmt(p.bottom_overlap),
            fmt(p.top_overlap),
        ],
        None => Default::default(),
    }
}

fn sweep_row(kind: &str, rec: &SweepRecord<Real>) -> Vec<String> {
    let mut row = vec![
        kind.to_string(),
        fmt(rec.inverse_beta),
        fmt(rec.beta),
        rec.cutoff.to_string(),
        fmt(rec.lambda_min),
        fmt(rec.lambda_max),
        fmt(rec.bottom_overlap),
        fmt(rec.top_overlap),
    ];
    row.extend(p_fields(&rec.p_iid));
    row.extend(p_fields(&rec.p_matched));
    row.push(String::new());
    row
}

/// Sweep CSV: the unsmoothed reference row, one row per grid timescale,
/// then any failed grid points with their error text.
pub fn sweep_csv(result: &SweepResult<Real>) -> Result<Vec<u8>> {
    encode_csv(|w| {
        w.write_record([
            "kind",
            "inverse_beta_days",
            "beta",
            "cutoff",
            "lambda_min",
            "lambda_max",
            "bottom_overlap",
            "top_overlap",
            "p_iid_lambda_min",
            "p_iid_lambda_max",
            "p_iid_bottom_overlap",
            "p_iid_top_overlap",
            "p_matched_lambda_min",
            "p_matched_lambda_max",
            "p_matched_bottom_overlap",
            "p_matched_top_overlap",
            "error",
        ])?;
        w.write_record(&sweep_row("reference", &result.reference))?;
        for rec in &result.records {
            w.write_record(&sweep_row("grid", rec))?;
        }
        for (beta, error) in &result.failed {
            let mut row = vec![
                "failed".to_string(),
                fmt(beta.recip()),
                fmt(*beta),
            ];
            row.resize(16, String::new());
            row.push(error.clone());
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Sidecar describing a panel CSV: the asset table plus, for ingested
/// panels, the ingestion settings.
#[derive(Debug, Serialize, Deserialize)]
pub struct PanelMeta {
    pub assets: Vec<AssetMeta>,
    pub n_dates: usize,
    /// "ingest" or "synth".
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vol_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate_cells: Option<usize>,
}

/// The sidecar lives next to the panel CSV unless pointed elsewhere.
pub fn default_meta_path(panel_path: &Path) -> PathBuf {
    panel_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
        .join("panel_meta.json")
}

/// Loads a panel CSV against its sidecar. Column order must match the
/// sidecar's asset table; values must round-trip as standardized rows.
pub fn read_panel(panel_path: &Path, meta_path: &Path) -> Result<(Panel, PanelMeta)> {
    let meta_bytes = fs::read(meta_path).map_err(|e| io_err(meta_path, e))?;
    let meta: PanelMeta = serde_json::from_slice(&meta_bytes).map_err(|e| {
        CoreError::BadArgument(format!("failed to parse {}: {e}", meta_path.display()))
    })?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(panel_path)
        .map_err(|e| csv_err(panel_path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(panel_path, e))?.clone();
    let n = meta.assets.len();
    if headers.len() != n + 1 || &headers[0] != "date" {
        return Err(CoreError::BadArgument(format!(
            "panel header has {} columns for {} assets (expected date plus one per asset)",
            headers.len(),
            n
        )));
    }
    for (i, asset) in meta.assets.iter().enumerate() {
        if &headers[i + 1] != asset.asset_id.as_str() {
            return Err(CoreError::BadArgument(format!(
                "panel column {} is '{}' but the sidecar lists '{}'",
                i + 1,
                &headers[i + 1],
                asset.asset_id
            )));
        }
    }

    let mut dates: Vec<String> = Vec::new();
    let mut cells: Vec<Real> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(panel_path, e))?;
        if record.len() != n + 1 {
            return Err(CoreError::BadArgument(format!(
                "panel row for date '{}' has {} fields, expected {}",
                record.get(0).unwrap_or(""),
                record.len(),
                n + 1
            )));
        }
        dates.push(record[0].to_string());
        for j in 0..n {
            let value: Real = record[j + 1].parse().map_err(|_| {
                CoreError::BadArgument(format!(
                    "bad number '{}' at date '{}', column '{}'",
                    &record[j + 1],
                    &record[0],
                    meta.assets[j].asset_id
                ))
            })?;
            cells.push(value);
        }
    }

    let t_len = dates.len();
    let mut returns: Mat<Real> = Mat::zeros(n, t_len);
    for t in 0..t_len {
        for i in 0..n {
            returns[(i, t)] = cells[t * n + i];
        }
    }
    let panel = ReturnsPanel::from_standardized(meta.assets.clone(), dates, returns)?;
    Ok((panel, meta))
}

/// Spectrum serialized for a report: eigenvalues descending plus the two
/// extreme eigenvectors and their alignment with the named reference.
#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub reference: String,
    pub eigenvalues: Vec<Real>,
    pub lambda_max: Real,
    pub lambda_min: Real,
    pub top_overlap: Real,
    pub bottom_overlap: Real,
    pub top_eigenvector: Vec<Real>,
    pub bottom_eigenvector: Vec<Real>,
}

pub fn spectrum_report(spectrum: &Spectrum<Real>, reference: &str) -> SpectrumReport {
    let n = spectrum.order();
    let top = spectrum.eigenvector(0);
    let bottom = spectrum.eigenvector(n - 1);
    SpectrumReport {
        reference: reference.to_string(),
        eigenvalues: spectrum.eigenvalues.clone(),
        lambda_max: spectrum.lambda_max(),
        lambda_min: spectrum.lambda_min(),
        top_overlap: stats::dot(&spectrum.alignment_reference, &top),
        bottom_overlap: stats::dot(&spectrum.alignment_reference, &bottom),
        top_eigenvector: top,
        bottom_eigenvector: bottom,
    }
}
