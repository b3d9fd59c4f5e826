//! Price ingestion and the standardized returns panel.
//!
//! The pipeline is: long-format price CSV -> aligned price matrix ->
//! volatility-adjusted raw returns (clipped, with a causal trailing-std
//! normalizer) -> per-asset standardized returns panel. Every stage keeps
//! assets ordered by (sector, asset id) and dates ascending, so all
//! downstream matrices index identically.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::stats;

/// Default trailing window for the volatility normalizer, in price
/// differences.
pub const DEFAULT_VOL_WINDOW: usize = 30;

/// Default symmetric clip applied to raw volatility-adjusted returns.
pub const DEFAULT_CLIP: f64 = 5.0;

/// Trailing standard deviations below this are treated as degenerate: the
/// return is recorded as zero and the cell is flagged instead of dividing
/// by noise.
const DEGENERATE_VOL: f64 = 1e-12;

/// Asset class. The declaration order is the canonical sort order; YLD is
/// the class whose returns move against the rest of the market, which is
/// where the sign vector below comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    #[serde(rename = "IDX")]
    Idx,
    #[serde(rename = "CMD")]
    Cmd,
    #[serde(rename = "FXR")]
    Fxr,
    #[serde(rename = "YLD")]
    Yld,
}

impl Sector {
    /// All sectors in canonical order.
    pub const ALL: [Sector; 4] = [Sector::Idx, Sector::Cmd, Sector::Fxr, Sector::Yld];

    /// Sign convention: -1 for YLD, +1 otherwise.
    pub fn sign<T: Scalar>(self) -> T {
        if self == Sector::Yld {
            -T::one()
        } else {
            T::one()
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let s = match self {
            Sector::Idx => "IDX",
            Sector::Cmd => "CMD",
            Sector::Fxr => "FXR",
            Sector::Yld => "YLD",
        };
        f.write_str(s)
    }
}

impl FromStr for Sector {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "IDX" => Ok(Sector::Idx),
            "CMD" => Ok(Sector::Cmd),
            "FXR" => Ok(Sector::Fxr),
            "YLD" => Ok(Sector::Yld),
            other => Err(CoreError::UnknownSector(other.to_string())),
        }
    }
}

/// One asset's static attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub asset_id: String,
    pub sector: Sector,
    pub market: String,
}

/// Aligned price matrix: one row per asset, one column per date.
#[derive(Debug, Clone)]
pub struct PricePanel<T> {
    pub assets: Vec<AssetMeta>,
    pub dates: Vec<String>,
    /// N x T_p, row i = price series of `assets[i]`.
    pub prices: Mat<T>,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    asset_id: String,
    price: f64,
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    asset_id: String,
    sector: String,
    market: String,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CoreError::Csv {
            path: path.display().to_string(),
            source: e,
        })
}

/// Loads a long-format price CSV (`date,asset_id,price`) against an asset
/// table (`asset_id,sector,market`).
///
/// The asset table defines the panel's asset set: a price row naming an
/// unlisted asset is an error, as is a (date, asset) cell that is missing
/// or supplied twice. Assets come back sorted by (sector, asset id) and
/// dates ascending.
pub fn load_price_csv<T: Scalar>(
    prices_path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
) -> Result<PricePanel<T>> {
    let meta_path = meta_path.as_ref();
    let prices_path = prices_path.as_ref();

    let mut assets: Vec<AssetMeta> = Vec::new();
    let mut reader = csv_reader(meta_path)?;
    for row in reader.deserialize::<MetaRow>() {
        let row = row.map_err(|e| CoreError::Csv {
            path: meta_path.display().to_string(),
            source: e,
        })?;
        if assets.iter().any(|a| a.asset_id == row.asset_id) {
            return Err(CoreError::BadArgument(format!(
                "duplicate asset '{}' in asset table",
                row.asset_id
            )));
        }
        assets.push(AssetMeta {
            asset_id: row.asset_id,
            sector: row.sector.parse()?,
            market: row.market,
        });
    }
    if assets.is_empty() {
        return Err(CoreError::BadArgument("asset table is empty".into()));
    }
    assets.sort_by(|a, b| (a.sector, &a.asset_id).cmp(&(b.sector, &b.asset_id)));
    let asset_index: HashMap<&str, usize> = assets
        .iter()
        .enumerate()
        .map(|(i, a)| (a.asset_id.as_str(), i))
        .collect();

    let mut rows: Vec<PriceRow> = Vec::new();
    let mut reader = csv_reader(prices_path)?;
    for row in reader.deserialize::<PriceRow>() {
        let row = row.map_err(|e| CoreError::Csv {
            path: prices_path.display().to_string(),
            source: e,
        })?;
        if !row.price.is_finite() {
            return Err(CoreError::BadArgument(format!(
                "non-finite price for date {}, asset {}",
                row.date, row.asset_id
            )));
        }
        rows.push(row);
    }

    let mut dates: Vec<String> = rows.iter().map(|r| r.date.clone()).collect();
    dates.sort();
    dates.dedup();
    let date_index: HashMap<&str, usize> = dates
        .iter()
        .enumerate()
        .map(|(t, d)| (d.as_str(), t))
        .collect();

    let n = assets.len();
    let t_len = dates.len();
    let mut prices: Mat<T> = Mat::zeros(n, t_len);
    let mut filled = vec![false; n * t_len];
    for row in &rows {
        let &i = asset_index
            .get(row.asset_id.as_str())
            .ok_or_else(|| CoreError::UnknownAsset(row.asset_id.clone()))?;
        let t = date_index[row.date.as_str()];
        if filled[i * t_len + t] {
            return Err(CoreError::DuplicateRow {
                date: row.date.clone(),
                asset_id: row.asset_id.clone(),
            });
        }
        filled[i * t_len + t] = true;
        prices[(i, t)] = T::cast(row.price);
    }
    for i in 0..n {
        for t in 0..t_len {
            if !filled[i * t_len + t] {
                return Err(CoreError::MissingCell {
                    date: dates[t].clone(),
                    asset_id: assets[i].asset_id.clone(),
                });
            }
        }
    }

    Ok(PricePanel { assets, dates, prices })
}

/// Volatility-adjusted raw returns before panel standardization.
#[derive(Debug, Clone)]
pub struct RawReturns<T> {
    pub assets: Vec<AssetMeta>,
    /// Dates of the difference columns: entry `j` is the date of price
    /// column `j + 1` in the source panel.
    pub dates: Vec<String>,
    /// N x (T_p - 1); the first `burn_in` columns carry no defined value.
    pub values: Mat<T>,
    /// Columns before this index lack a full trailing window.
    pub burn_in: usize,
    /// (asset row, column) cells whose trailing std was degenerate; their
    /// values are zero.
    pub degenerate: Vec<(usize, usize)>,
}

/// Divides each price difference by the sample standard deviation of the
/// `vol_window` differences strictly before it, then clips to `+-clip`.
///
/// The normalizer window ends at the previous difference, so the value at
/// date t uses no information from date t. Clipping happens on these raw
/// normalized returns, before any panel standardization. The first
/// `vol_window` columns have no full window and are emitted as burn-in
/// zeros.
pub fn vol_adjusted_returns<T: Scalar>(
    panel: &PricePanel<T>,
    vol_window: usize,
    clip: T,
) -> Result<RawReturns<T>> {
    if vol_window < 2 {
        return Err(CoreError::BadArgument(format!(
            "vol_window must be at least 2, got {vol_window}"
        )));
    }
    if !(clip > T::zero()) {
        return Err(CoreError::BadArgument("clip must be positive".into()));
    }
    let t_p = panel.dates.len();
    if t_p < vol_window + 2 {
        return Err(CoreError::SeriesTooShort {
            needed: vol_window + 2,
            actual: t_p,
        });
    }
    let n = panel.assets.len();
    let n_diff = t_p - 1;
    let mut values: Mat<T> = Mat::zeros(n, n_diff);
    let mut degenerate = Vec::new();
    let degenerate_vol = T::cast(DEGENERATE_VOL);

    for i in 0..n {
        let price = panel.prices.row(i);
        let diffs: Vec<T> = (0..n_diff).map(|j| price[j + 1] - price[j]).collect();
        for j in vol_window..n_diff {
            let window = &diffs[j - vol_window..j];
            let sd = stats::sample_variance(window).sqrt();
            if sd < degenerate_vol {
                degenerate.push((i, j));
                continue;
            }
            values[(i, j)] = num_traits::clamp(diffs[j] / sd, -clip, clip);
        }
    }

    Ok(RawReturns {
        assets: panel.assets.clone(),
        dates: panel.dates[1..].to_vec(),
        values,
        burn_in: vol_window,
        degenerate,
    })
}

/// Standardized returns panel: the common input of every estimator here.
///
/// Invariants: each row has mean 0 and unit sample standard deviation
/// (divisor T - 1) over the full date range; `sign_vector` is the sector
/// sign convention; `uniform_mode` is the unit vector proportional to it.
#[derive(Debug, Clone)]
pub struct ReturnsPanel<T> {
    pub assets: Vec<AssetMeta>,
    pub dates: Vec<String>,
    /// N x T, row i = standardized return series of `assets[i]`.
    pub returns: Mat<T>,
    /// +1 per asset, -1 for YLD assets.
    pub sign_vector: Vec<T>,
    /// `sign_vector / sqrt(N)`.
    pub uniform_mode: Vec<T>,
}

impl<T: Scalar> ReturnsPanel<T> {
    /// Number of assets N.
    pub fn n_assets(&self) -> usize {
        self.returns.n_rows()
    }

    /// Number of dates T.
    pub fn n_dates(&self) -> usize {
        self.returns.n_cols()
    }

    /// Return vector r(t) (one value per asset).
    pub fn returns_at(&self, t: usize) -> Vec<T> {
        self.returns.col(t)
    }

    /// Row indices of the assets in `sector`.
    pub fn sector_members(&self, sector: Sector) -> Vec<usize> {
        self.assets
            .iter()
            .enumerate()
            .filter(|(_, a)| a.sector == sector)
            .map(|(i, _)| i)
            .collect()
    }

    /// Group index per asset in canonical sector order, plus the list of
    /// sectors present.
    pub fn sector_grouping(&self) -> (Vec<usize>, Vec<Sector>) {
        let present: Vec<Sector> = Sector::ALL
            .into_iter()
            .filter(|s| self.assets.iter().any(|a| a.sector == *s))
            .collect();
        let groups = self
            .assets
            .iter()
            .map(|a| present.iter().position(|s| *s == a.sector).expect("present"))
            .collect();
        (groups, present)
    }

    fn sign_vectors(assets: &[AssetMeta]) -> (Vec<T>, Vec<T>) {
        let n = assets.len();
        let sign_vector: Vec<T> = assets.iter().map(|a| a.sector.sign()).collect();
        let inv = T::cast(n as f64).sqrt().recip();
        let uniform_mode = sign_vector.iter().map(|s| *s * inv).collect();
        (sign_vector, uniform_mode)
    }

    /// Builds a panel from rows that are already standardized, validating
    /// the invariants to a loose tolerance (covers CSV round-trips).
    pub fn from_standardized(
        assets: Vec<AssetMeta>,
        dates: Vec<String>,
        returns: Mat<T>,
    ) -> Result<Self> {
        if assets.len() != returns.n_rows() || dates.len() != returns.n_cols() {
            return Err(CoreError::DimensionMismatch(format!(
                "panel shape {}x{} vs {} assets, {} dates",
                returns.n_rows(),
                returns.n_cols(),
                assets.len(),
                dates.len()
            )));
        }
        if !returns.all_finite() {
            return Err(CoreError::NonFinite("returns panel".into()));
        }
        let tol = T::cast(1e-6);
        for i in 0..assets.len() {
            let row = returns.row(i);
            if stats::mean(row).abs() > tol
                || (stats::sample_variance(row).sqrt() - T::one()).abs() > tol
            {
                return Err(CoreError::BadArgument(format!(
                    "row for asset '{}' is not standardized",
                    assets[i].asset_id
                )));
            }
        }
        let (sign_vector, uniform_mode) = Self::sign_vectors(&assets);
        Ok(ReturnsPanel {
            assets,
            dates,
            returns,
            sign_vector,
            uniform_mode,
        })
    }

    /// Internal constructor that trusts the caller about standardization;
    /// unit tests use it to plant exact return values.
    pub(crate) fn new_unchecked(
        assets: Vec<AssetMeta>,
        dates: Vec<String>,
        returns: Mat<T>,
    ) -> Self {
        let (sign_vector, uniform_mode) = Self::sign_vectors(&assets);
        ReturnsPanel {
            assets,
            dates,
            returns,
            sign_vector,
            uniform_mode,
        }
    }
}

/// Drops the burn-in columns of `raw` and standardizes each asset row to
/// mean 0, unit sample standard deviation (divisor T - 1).
///
/// Standardization is idempotent: applying it to an already standardized
/// panel reproduces the input to rounding.
pub fn standardize_panel<T: Scalar>(raw: &RawReturns<T>) -> Result<ReturnsPanel<T>> {
    let n = raw.values.n_rows();
    let total = raw.values.n_cols();
    if total <= raw.burn_in + 1 {
        return Err(CoreError::SeriesTooShort {
            needed: raw.burn_in + 2,
            actual: total,
        });
    }
    let t_len = total - raw.burn_in;
    let mut returns: Mat<T> = Mat::zeros(n, t_len);
    for i in 0..n {
        let src = &raw.values.row(i)[raw.burn_in..];
        returns.row_mut(i).copy_from_slice(src);
        stats::standardize_in_place(
            returns.row_mut(i),
            &format!("returns of asset '{}'", raw.assets[i].asset_id),
        )?;
    }
    let dates = raw.dates[raw.burn_in..].to_vec();
    Ok(ReturnsPanel::new_unchecked(
        raw.assets.clone(),
        dates,
        returns,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    pub(crate) fn meta(specs: &[(&str, Sector)]) -> Vec<AssetMeta> {
        specs
            .iter()
            .map(|(id, sector)| AssetMeta {
                asset_id: id.to_string(),
                sector: *sector,
                market: "TEST".into(),
            })
            .collect()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn tiny_meta_csv() -> tempfile::NamedTempFile {
        write_temp("asset_id,sector,market\nbond1,YLD,US\nspx,IDX,US\n")
    }

    #[test]
    fn load_orders_assets_and_dates() {
        let meta = tiny_meta_csv();
        let prices = write_temp(
            "date,asset_id,price\n\
             2020-01-02,bond1,10\n\
             2020-01-01,bond1,11\n\
             2020-01-01,spx,100\n\
             2020-01-02,spx,101\n",
        );
        let p: PricePanel<f64> = load_price_csv(prices.path(), meta.path()).unwrap();
        // IDX sorts before YLD regardless of file order.
        assert_eq!(p.assets[0].asset_id, "spx");
        assert_eq!(p.assets[1].asset_id, "bond1");
        assert_eq!(p.dates, vec!["2020-01-01", "2020-01-02"]);
        assert_eq!(p.prices.row(0), &[100.0, 101.0]);
        assert_eq!(p.prices.row(1), &[11.0, 10.0]);
    }

    #[test]
    fn load_rejects_bad_inputs() {
        let meta = tiny_meta_csv();
        let missing = write_temp(
            "date,asset_id,price\n2020-01-01,spx,100\n2020-01-01,bond1,10\n2020-01-02,spx,101\n",
        );
        assert!(matches!(
            load_price_csv::<f64>(missing.path(), meta.path()),
            Err(CoreError::MissingCell { .. })
        ));

        let dup = write_temp(
            "date,asset_id,price\n2020-01-01,spx,100\n2020-01-01,spx,100\n2020-01-01,bond1,10\n",
        );
        assert!(matches!(
            load_price_csv::<f64>(dup.path(), meta.path()),
            Err(CoreError::DuplicateRow { .. })
        ));

        let unknown = write_temp("date,asset_id,price\n2020-01-01,ghost,1\n");
        assert!(matches!(
            load_price_csv::<f64>(unknown.path(), meta.path()),
            Err(CoreError::UnknownAsset(_))
        ));

        let bad_meta = write_temp("asset_id,sector,market\nx,EQUITY,US\n");
        let prices = write_temp("date,asset_id,price\n2020-01-01,x,1\n");
        assert!(matches!(
            load_price_csv::<f64>(prices.path(), bad_meta.path()),
            Err(CoreError::UnknownSector(_))
        ));
    }

    fn panel_from_diffs(diffs: &[f64]) -> PricePanel<f64> {
        let mut price = 100.0;
        let mut prices = vec![price];
        for d in diffs {
            price += d;
            prices.push(price);
        }
        let t = prices.len();
        PricePanel {
            assets: meta(&[("a", Sector::Idx)]),
            dates: (0..t).map(|i| format!("d{i:04}")).collect(),
            prices: Mat::from_rows(vec![prices]).unwrap(),
        }
    }

    #[test]
    fn alternating_differences_have_known_normalizer() {
        // Diffs alternate +1/-1: any 30-wide window has mean 0 and sample
        // std sqrt(30/29) ~= 1.0170953, so each kept return is
        // +-0.9831921.
        let diffs: Vec<f64> = (0..39).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let p = panel_from_diffs(&diffs);
        let raw = vol_adjusted_returns(&p, 30, 5.0).unwrap();
        assert_eq!(raw.burn_in, 30);
        assert_eq!(raw.values.n_cols(), 39);
        for j in 30..39 {
            assert_relative_eq!(raw.values[(0, j)].abs(), 0.9831921, epsilon = 1e-6);
        }
        assert!(raw.degenerate.is_empty());
    }

    #[test]
    fn clip_caps_extreme_returns_exactly() {
        let mut diffs: Vec<f64> = (0..30).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        diffs.push(100.0); // ~98 normalizer units, far past the clip
        let p = panel_from_diffs(&diffs);
        let raw = vol_adjusted_returns(&p, 30, 5.0).unwrap();
        assert_eq!(raw.values[(0, 30)], 5.0);
    }

    #[test]
    fn constant_differences_are_degenerate_not_infinite() {
        // A perfect linear price ramp has zero trailing std everywhere.
        let diffs = vec![2.0; 40];
        let p = panel_from_diffs(&diffs);
        let raw = vol_adjusted_returns(&p, 30, 5.0).unwrap();
        assert_eq!(raw.values[(0, 35)], 0.0);
        assert!(raw.degenerate.contains(&(0, 35)));
    }

    #[test]
    fn too_short_series_is_rejected() {
        let p = panel_from_diffs(&vec![1.0; 30]); // T_p = 31 < 32
        assert!(matches!(
            vol_adjusted_returns(&p, 30, 5.0),
            Err(CoreError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn standardize_panel_normalizes_and_is_idempotent() {
        let diffs: Vec<f64> = (0..80).map(|j| ((j * 37 % 11) as f64) - 5.0).collect();
        let p = panel_from_diffs(&diffs);
        let raw = vol_adjusted_returns(&p, 30, 5.0).unwrap();
        let panel = standardize_panel(&raw).unwrap();
        assert_eq!(panel.n_dates(), 80 - 30);
        let row = panel.returns.row(0);
        assert!(stats::mean(row).abs() < 1e-12);
        assert_relative_eq!(stats::sample_variance(row).sqrt(), 1.0, epsilon = 1e-12);

        // Standardizing again moves nothing.
        let mut again = row.to_vec();
        stats::standardize_in_place(&mut again, "again").unwrap();
        for (a, b) in again.iter().zip(row) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sign_vector_flips_yld_only() {
        let assets = meta(&[("i", Sector::Idx), ("c", Sector::Cmd), ("y", Sector::Yld)]);
        let returns = Mat::from_rows(vec![
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![1.0, -1.0],
        ])
        .unwrap();
        let panel = ReturnsPanel::new_unchecked(assets, vec!["a".into(), "b".into()], returns);
        assert_eq!(panel.sign_vector, vec![1.0, 1.0, -1.0]);
        let r = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(panel.uniform_mode[0], r);
        assert_relative_eq!(panel.uniform_mode[2], -r);
        assert_eq!(panel.sector_members(Sector::Yld), vec![2]);
    }

    #[test]
    fn from_standardized_validates_rows() {
        let assets = meta(&[("a", Sector::Idx)]);
        let bad = Mat::from_rows(vec![vec![5.0, 6.0, 7.0]]).unwrap();
        assert!(ReturnsPanel::from_standardized(
            assets.clone(),
            vec!["a".into(), "b".into(), "c".into()],
            bad
        )
        .is_err());

        let good = Mat::from_rows(vec![vec![-1.0, 0.0, 1.0]]).unwrap();
        let p = ReturnsPanel::from_standardized(
            assets,
            vec!["a".into(), "b".into(), "c".into()],
            good,
        )
        .unwrap();
        assert_eq!(p.n_assets(), 1);
    }
}
