use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::selection::Method;

fn snr_or_clean<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
}

/// One experiment. `snr_db` may be `null` in JSON for noiseless data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: f64,
    pub delta_theta: f64,
    pub kappa_b: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub rank: usize,
    #[serde(deserialize_with = "snr_or_clean")]
    pub snr_db: f64,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    /// Permit `M == m`.
    pub allow_exact_order: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 3,
            d: 45,
            n: 200,
            rho: 0.98,
            delta_theta: 0.01,
            kappa_b: 1.0,
            l: 64,
            rank: 15,
            snr_db: 10.0,
            methods: Method::ALL.to_vec(),
            trials: 100,
            master_seed: 0,
            allow_exact_order: false,
        }
    }
}

impl ExperimentConfig {
    /// Snapshot columns `N - L`.
    pub fn n_cols(&self) -> usize {
        self.n.saturating_sub(self.l)
    }

    /// Number of singular values of `X0`.
    pub fn svd_len(&self) -> usize {
        (self.d * self.l).min(self.n_cols())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_instance()?;
        if self.methods.is_empty() {
            return Err(invalid("no methods requested"));
        }
        for &method in &self.methods {
            if self.l < method.min_delay() {
                return Err(invalid(format!(
                    "{method} needs L >= {}, got L = {}",
                    method.min_delay(),
                    self.l
                )));
            }
            if method.is_order_only() && self.rank >= self.svd_len() {
                return Err(invalid(format!(
                    "{method} searches orders up to M and needs M < min(D*L, N-L) = {}",
                    self.svd_len()
                )));
            }
        }
        Ok(())
    }

    /// Checks everything except the method list.
    pub fn validate_instance(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(invalid(format!("need m >= 1 and D >= 1 (m={}, D={})", self.m, self.d)));
        }
        if self.l == 0 || self.n < self.l + 2 {
            return Err(invalid(format!(
                "need L >= 1 and N - L >= 2 (N={}, L={})",
                self.n, self.l
            )));
        }
        if self.rank < self.m || (self.rank == self.m && !self.allow_exact_order) {
            return Err(invalid(format!(
                "M must exceed m (M={}, m={}); set allow_exact_order to permit M == m",
                self.rank, self.m
            )));
        }
        if self.rank > self.svd_len() {
            return Err(invalid(format!(
                "M = {} exceeds min(D*L, N-L) = {}",
                self.rank,
                self.svd_len()
            )));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(invalid(format!("snr_db must be finite or +inf, got {}", self.snr_db)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate_instance()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let integer = || -> Result<usize> {
            let r = value.round();
            if (value - r).abs() > 1e-9 || r < 0.0 {
                return Err(invalid(format!(
                    "{param} takes nonnegative integer values, got {value}"
                )));
            }
            Ok(r as usize)
        };
        match param {
            SweepParam::Snr => cfg.snr_db = value,
            SweepParam::DeltaTheta => cfg.delta_theta = value,
            SweepParam::Rho => cfg.rho = value,
            SweepParam::Kappa => cfg.kappa_b = value,
            SweepParam::TrueOrder => cfg.m = integer()?,
            SweepParam::Rank => cfg.rank = integer()?,
            SweepParam::Delay => cfg.l = integer()?,
        }
        Ok(cfg)
    }
}

/// Swept parameter. Names are case-sensitive: `m` is the true order, `M`
/// the truncation rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "snr")]
    Snr,
    #[serde(rename = "dtheta")]
    DeltaTheta,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "m")]
    TrueOrder,
    #[serde(rename = "M")]
    Rank,
    #[serde(rename = "L")]
    Delay,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::Snr,
        SweepParam::DeltaTheta,
        SweepParam::Rho,
        SweepParam::Kappa,
        SweepParam::TrueOrder,
        SweepParam::Rank,
        SweepParam::Delay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Snr => "snr",
            SweepParam::DeltaTheta => "dtheta",
            SweepParam::Rho => "rho",
            SweepParam::Kappa => "kappa",
            SweepParam::TrueOrder => "m",
            SweepParam::Rank => "M",
            SweepParam::Delay => "L",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            Error::Parse(format!(
                "unknown sweep parameter {s:?}; valid names: {}",
                names.join(", ")
            ))
        })
    }
}

/// `a:b:n` (n evenly spaced points from a to b) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad grid value {t:?}: {e}")))
    };
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("grid {s:?} is not of the form a:b:n")));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad grid count {:?}: {e}", parts[2])))?;
        match n {
            0 => return Err(Error::Parse("grid needs at least one point".into())),
            1 if a != b => return Err(Error::Parse(format!("a one-point grid needs a == b, got {a}:{b}:1"))),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(invalid("grid values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("grid must be strictly increasing, got {grid:?}")));
    }
    Ok(())
}
