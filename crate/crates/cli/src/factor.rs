//! Factor selectors of the form `market`, `sector:<IDX|CMD|FXR|YLD>`,
//! `ema:<beta>`, or `eigenfactor:<beta>`.

use pra_core::indicators;
use pra_core::panel::Sector;
use pra_core::{CoreError, Panel, Real, Result, Series};

/// A parsed factor selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorSpec {
    /// Sign-weighted average return across the panel.
    Market,
    /// Sign-weighted average return of one sector.
    Sector(Sector),
    /// Truncated EMA of the market index; `inf` is the unsmoothed limit.
    Ema { beta: Real },
    /// Smoothed projection on the trailing top eigenvector.
    EigenFactor { beta: Real },
}

impl FactorSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let (head, arg) = match text.split_once(':') {
            Some((head, arg)) => (head, Some(arg)),
            None => (text, None),
        };
        match (head, arg) {
            ("market", None) => Ok(FactorSpec::Market),
            ("sector", Some(arg)) => Ok(FactorSpec::Sector(arg.parse()?)),
            ("ema", Some(arg)) => Ok(FactorSpec::Ema { beta: parse_beta(arg)? }),
            ("eigenfactor", Some(arg)) => Ok(FactorSpec::EigenFactor { beta: parse_beta(arg)? }),
            _ => Err(CoreError::BadArgument(format!(
                "unknown factor '{text}' (expected market, sector:<F>, ema:<beta>, or eigenfactor:<beta>)"
            ))),
        }
    }

    /// Canonical parseable form, e.g. `ema:0.1`.
    pub fn name(&self) -> String {
        match self {
            FactorSpec::Market => "market".to_string(),
            FactorSpec::Sector(s) => format!("sector:{s}"),
            FactorSpec::Ema { beta } => format!("ema:{beta}"),
            FactorSpec::EigenFactor { beta } => format!("eigenfactor:{beta}"),
        }
    }

    /// File-name form: the canonical name with `:` replaced by `_`.
    pub fn slug(&self) -> String {
        self.name().replace(':', "_")
    }

    /// Finite decay rate, when the factor is a smoothed series. Drives
    /// the autocorrelation-matched null.
    pub fn beta(&self) -> Option<Real> {
        match *self {
            FactorSpec::Ema { beta } | FactorSpec::EigenFactor { beta } if beta.is_finite() => {
                Some(beta)
            }
            _ => None,
        }
    }

    /// Builds the indicator on a panel. `k_window` only applies to the
    /// eigen-factor's trailing estimation window (default 3N).
    pub fn build(&self, panel: &Panel, k_window: Option<usize>) -> Result<Series> {
        match *self {
            FactorSpec::Market => indicators::market_index(panel),
            FactorSpec::Sector(s) => indicators::sector_index(panel, s),
            FactorSpec::Ema { beta } => {
                indicators::ema_smooth(&indicators::market_index(panel)?, beta)
            }
            FactorSpec::EigenFactor { beta } => indicators::eigen_factor(panel, k_window, beta),
        }
    }
}

fn parse_beta(text: &str) -> Result<Real> {
    let beta: Real = text
        .parse()
        .map_err(|_| CoreError::BadArgument(format!("invalid decay rate '{text}'")))?;
    if !(beta > 0.0) {
        return Err(CoreError::BadArgument(format!(
            "decay rate must be positive, got {beta}"
        )));
    }
    Ok(beta)
}
