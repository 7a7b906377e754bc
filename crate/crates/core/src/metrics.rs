//! Factuality measures over per-atom verdicts and posteriors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the band around 0.5 whose posteriors count as undecided.
pub const UNDECIDED_TOLERANCE: f64 = 1e-6;
/// Floor applied to probabilities inside the logarithm of [`e_measure`].
pub const E_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Supported,
    Contradicted,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomVerdict {
    pub atom_id: String,
    /// Posterior probability of the atom; absent for assessors that only
    /// produce a label.
    pub p_true: Option<f64>,
    pub label: Label,
}

impl AtomVerdict {
    pub fn from_posterior(atom_id: impl Into<String>, p_true: f64) -> Self {
        Self {
            atom_id: atom_id.into(),
            p_true: Some(p_true),
            label: classify_atom(p_true, UNDECIDED_TOLERANCE),
        }
    }

    pub fn from_label(atom_id: impl Into<String>, label: Label) -> Self {
        Self {
            atom_id: atom_id.into(),
            p_true: None,
            label,
        }
    }
}

pub fn classify_atom(p_true: f64, tolerance: f64) -> Label {
    if p_true > 0.5 + tolerance {
        Label::Supported
    } else if p_true < 0.5 - tolerance {
        Label::Contradicted
    } else {
        Label::Undecided
    }
}

/// `(S, C, U)`.
pub fn counts(verdicts: &[AtomVerdict]) -> (usize, usize, usize) {
    verdicts.iter().fold((0, 0, 0), |(s, c, u), v| match v.label {
        Label::Supported => (s + 1, c, u),
        Label::Contradicted => (s, c + 1, u),
        Label::Undecided => (s, c, u + 1),
    })
}

fn supported(verdicts: &[AtomVerdict]) -> Result<usize> {
    if verdicts.is_empty() {
        return Err(Error::InvalidArgument("no atoms to score".into()));
    }
    Ok(counts(verdicts).0)
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of atoms that are supported.
pub fn precision(verdicts: &[AtomVerdict]) -> Result<f64> {
    Ok(supported(verdicts)? as f64 / verdicts.len() as f64)
}

/// `min(S / K, 1)`.
pub fn recall_at_k(verdicts: &[AtomVerdict], k: usize) -> Result<f64> {
    check_k(k)?;
    Ok((supported(verdicts)? as f64 / k as f64).min(1.0))
}

/// Harmonic mean of precision and recall at `k`, zero when nothing is
/// supported.
pub fn f1_at_k(verdicts: &[AtomVerdict], k: usize) -> Result<f64> {
    check_k(k)?;
    if supported(verdicts)? == 0 {
        return Ok(0.0);
    }
    let p = precision(verdicts)?;
    let r = recall_at_k(verdicts, k)?;
    Ok(2.0 * p * r / (p + r))
}

/// Mean of `-p log10 p` over atoms, with `p` floored at `epsilon` inside the
/// logarithm.
pub fn e_measure(p_trues: &[f64], epsilon: f64) -> Result<f64> {
    if p_trues.is_empty() {
        return Err(Error::InvalidArgument("no atoms to score".into()));
    }
    let sum: f64 = p_trues
        .iter()
        .map(|&p| {
            let e = -p * p.clamp(epsilon, 1.0).log10();
            // -0.0 at p = 1
            e.max(0.0)
        })
        .sum();
    Ok(sum / p_trues.len() as f64)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    Ok(())
}

pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), truth.len())?;
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

pub fn brier(p_trues: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(p_trues.len(), truth.len())?;
    let sum: f64 = p_trues
        .iter()
        .zip(truth)
        .map(|(p, &t)| {
            let y = if t { 1.0 } else { 0.0 };
            (p - y) * (p - y)
        })
        .sum();
    Ok(sum / p_trues.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactualityReport {
    pub verdicts: Vec<AtomVerdict>,
    pub supported: usize,
    pub contradicted: usize,
    pub undecided: usize,
    pub precision: f64,
    pub recall_at_k: f64,
    pub f1_at_k: f64,
    pub k: usize,
    /// Only defined when every verdict carries a posterior.
    pub e_measure: Option<f64>,
    /// Precision of the gold labels, when known.
    pub gold_precision: Option<f64>,
    /// `|precision - gold_precision|`.
    pub abs_error: Option<f64>,
    pub brier: Option<f64>,
}

impl FactualityReport {
    /// Scores a set of verdicts. `gold` holds one truth label per verdict,
    /// in the same order.
    pub fn new(verdicts: Vec<AtomVerdict>, k: usize, gold: Option<&[bool]>) -> Result<Self> {
        let (s, c, u) = counts(&verdicts);
        let precision = precision(&verdicts)?;
        let recall_at_k = recall_at_k(&verdicts, k)?;
        let f1_at_k = f1_at_k(&verdicts, k)?;
        let posteriors: Option<Vec<f64>> = verdicts.iter().map(|v| v.p_true).collect();
        let e_measure = posteriors.as_deref().map(|p| e_measure(p, E_EPSILON)).transpose()?;
        let (gold_precision, abs_error, brier) = match gold {
            Some(g) => {
                check_lengths(verdicts.len(), g.len())?;
                let gp = g.iter().filter(|&&t| t).count() as f64 / g.len() as f64;
                let b = posteriors.as_deref().map(|p| brier(p, g)).transpose()?;
                (Some(gp), Some(mae(&[precision], &[gp])?), b)
            }
            None => (None, None, None),
        };
        Ok(Self {
            verdicts,
            supported: s,
            contradicted: c,
            undecided: u,
            precision,
            recall_at_k,
            f1_at_k,
            k,
            e_measure,
            gold_precision,
            abs_error,
            brier,
        })
    }
}
