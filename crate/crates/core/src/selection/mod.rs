//! Per-mode scores, the binary true/spurious split, and the order-only
//! baselines that work from singular values alone.

mod cluster;
mod order;
mod scores;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c64;

pub use cluster::{binary_select, split_cost, ModeLabel, SelectionResult};
pub use order::{bic_curve, bic_order, bic_order_from_sigma, gap_order, gap_order_from_sigma};
pub use scores::{
    eig_magnitude_scores, esr_scores, fekvf_score, fekvf_scores, mode_norm_scores, nested_kv_fit, nested_kv_score,
    nested_kv_scores, score_modes, stc_score, stc_scores, NestedKvFit, SENTINEL_SCORE,
};

/// Offset inside `log(score + EPSILON)`.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    EsrEnergy,
    NestedKv,
    Fekvf,
    Stc,
    ExactModeNorm,
    EigMagnitude,
    Bic,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    SmallerIsTrue,
    LargerIsTrue,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::EsrEnergy,
        Method::NestedKv,
        Method::Fekvf,
        Method::Stc,
        Method::ExactModeNorm,
        Method::EigMagnitude,
        Method::Bic,
        Method::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::EsrEnergy => "EsrEnergy",
            Method::NestedKv => "NestedKv",
            Method::Fekvf => "Fekvf",
            Method::Stc => "Stc",
            Method::ExactModeNorm => "ExactModeNorm",
            Method::EigMagnitude => "EigMagnitude",
            Method::Bic => "Bic",
            Method::Gap => "Gap",
        }
    }

    /// Bic and Gap pick an order from singular values and never score modes.
    pub fn is_order_only(self) -> bool {
        matches!(self, Method::Bic | Method::Gap)
    }

    /// `None` for the order-only baselines.
    pub fn orientation(self) -> Option<Orientation> {
        match self {
            Method::EsrEnergy | Method::NestedKv | Method::Fekvf | Method::Stc => Some(Orientation::SmallerIsTrue),
            Method::ExactModeNorm | Method::EigMagnitude => Some(Orientation::LargerIsTrue),
            Method::Bic | Method::Gap => None,
        }
    }

    /// Smallest delay length the method is defined for.
    pub fn min_delay(self) -> usize {
        match self {
            Method::NestedKv => 3,
            Method::Stc => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let m = match key.as_str() {
            "esrenergy" | "esr" => Method::EsrEnergy,
            "nestedkv" | "nested" | "nesteddmd" => Method::NestedKv,
            "fekvf" => Method::Fekvf,
            "stc" => Method::Stc,
            "exactmodenorm" | "modenorm" => Method::ExactModeNorm,
            "eigmagnitude" | "eigenvaluemagnitude" => Method::EigMagnitude,
            "bic" => Method::Bic,
            "gap" => Method::Gap,
            _ => {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                return Err(Error::Parse(format!(
                    "unknown method {s:?}; expected one of {}",
                    names.join(", ")
                )));
            }
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScoreVector {
    pub method: Method,
    pub scores: Vec<f64>,
    pub orientation: Orientation,
    pub epsilon: f64,
}

impl ModeScoreVector {
    pub fn new(method: Method, scores: Vec<f64>) -> Result<Self> {
        let orientation = method
            .orientation()
            .ok_or_else(|| Error::InvalidParameter(format!("{method} does not score modes")))?;
        Ok(ModeScoreVector {
            method,
            scores,
            orientation,
            epsilon: EPSILON,
        })
    }

    /// Transformed scores on which the split runs; lower means more likely true.
    pub fn features(&self) -> Vec<f64> {
        match self.orientation {
            Orientation::SmallerIsTrue => self.scores.iter().map(|s| (s + self.epsilon).ln()).collect(),
            Orientation::LargerIsTrue => self.scores.iter().map(|s| -s).collect(),
        }
    }
}

/// One line of the per-trial score export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub trial_id: u64,
    pub method: Method,
    pub mode_index: usize,
    pub score: f64,
    pub label: ModeLabel,
    pub eigval_re: f64,
    pub eigval_im: f64,
}

pub fn score_rows(
    trial_id: u64,
    scores: &ModeScoreVector,
    selection: &SelectionResult,
    eigenvalues: &[c64],
) -> Vec<ScoreRow> {
    scores
        .scores
        .iter()
        .zip(&selection.labels)
        .zip(eigenvalues)
        .enumerate()
        .map(|(j, ((&score, &label), lam))| ScoreRow {
            trial_id,
            method: scores.method,
            mode_index: j,
            score,
            label,
            eigval_re: lam.re,
            eigval_im: lam.im,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert_eq!("nested-kv".parse::<Method>().unwrap(), Method::NestedKv);
        assert_eq!("ESR".parse::<Method>().unwrap(), Method::EsrEnergy);
        let err = "nope".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("EsrEnergy") && err.contains("Gap"));
    }

    #[test]
    fn orientations_are_fixed_per_method() {
        for m in [Method::EsrEnergy, Method::NestedKv, Method::Fekvf, Method::Stc] {
            assert_eq!(m.orientation(), Some(Orientation::SmallerIsTrue));
        }
        for m in [Method::ExactModeNorm, Method::EigMagnitude] {
            assert_eq!(m.orientation(), Some(Orientation::LargerIsTrue));
        }
        assert!(ModeScoreVector::new(Method::Bic, vec![1.0]).is_err());
    }

    #[test]
    fn score_rows_carry_labels_and_eigenvalues() {
        let scores = ModeScoreVector::new(Method::EsrEnergy, vec![0.0, 1.0]).unwrap();
        let sel = binary_select(&scores).unwrap();
        let rows = score_rows(7, &scores, &sel, &[c64::new(0.9, 0.1), c64::new(0.2, -0.3)]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].label, ModeLabel::True);
        assert_eq!(rows[1].label, ModeLabel::Spurious);
        assert_eq!((rows[1].trial_id, rows[1].mode_index, rows[1].eigval_im), (7, 1, -0.3));
    }
}
