//! Error measures for surrogate validation and calibration studies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("reference norm is zero")]
    ZeroReference,
    #[error("true parameter is zero")]
    ZeroParameter,
    #[error("need at least two values, got {0}")]
    TooFew(usize),
}

fn check(pred: &[f64], reference: &[f64]) -> Result<(), MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::Length(pred.len(), reference.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Mean absolute component-wise deviation.
pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64, MetricsError> {
    check(pred, reference)?;
    Ok(pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum::<f64>() / pred.len() as f64)
}

/// Relative L² error `‖p − r‖ / ‖r‖`.
pub fn rl2(pred: &[f64], reference: &[f64]) -> Result<f64, MetricsError> {
    check(pred, reference)?;
    let den = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>().sqrt() / den)
}

/// Absolute relative error of an identified parameter.
pub fn are(identified: f64, truth: f64) -> Result<f64, MetricsError> {
    if truth == 0.0 {
        return Err(MetricsError::ZeroParameter);
    }
    Ok(((identified - truth) / truth).abs())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 normalization).
pub fn sample_std(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFew(values.len()));
    }
    let m = mean(values);
    Ok((values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt())
}

/// Standard error of the mean.
pub fn sem(values: &[f64]) -> Result<f64, MetricsError> {
    Ok(sample_std(values)? / (values.len() as f64).sqrt())
}

/// Summary statistics of a set of relative errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub sem: f64,
}

impl AreSummary {
    pub fn from_values(values: &[f64]) -> Result<Self, MetricsError> {
        let sem = sem(values)?;
        Ok(Self {
            mean: mean(values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sem,
        })
    }
}

/// Field accuracy and, when available, per-parameter identification errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mae: f64,
    pub rl2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub are_k: Option<AreSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub are_g: Option<AreSummary>,
}

impl ErrorReport {
    pub fn field(pred: &[f64], reference: &[f64]) -> Result<Self, MetricsError> {
        Ok(Self { mae: mae(pred, reference)?, rl2: rl2(pred, reference)?, are_k: None, are_g: None })
    }
}
