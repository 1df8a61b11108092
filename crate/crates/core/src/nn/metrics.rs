//! Evaluation metrics and the constant baseline.

use super::NnError;
use serde::{Deserialize, Serialize};

/// Lower bound on |y| in the MAPE denominator.
pub const MAPE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae: Option<f64>,
    /// Percent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mape: Option<f64>,
    /// Percent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<Metrics, NnError> {
    if truth.is_empty() {
        return Err(NnError::EmptySplit("evaluation"));
    }
    if pred.len() != truth.len() {
        return Err(NnError::Width { what: "predictions", expected: truth.len(), got: pred.len() });
    }
    let n = truth.len() as f64;
    let (mut se, mut ae, mut pe) = (0.0, 0.0, 0.0);
    for (&p, &y) in pred.iter().zip(truth) {
        let e = p - y;
        se += e * e;
        ae += e.abs();
        pe += e.abs() / y.abs().max(MAPE_EPS);
    }
    Ok(Metrics { n: truth.len(), rmse: Some((se / n).sqrt()), mae: Some(ae / n), mape: Some(100.0 * pe / n), accuracy: None })
}

pub fn classification_metrics(pred: &[usize], truth: &[usize]) -> Result<Metrics, NnError> {
    if truth.is_empty() {
        return Err(NnError::EmptySplit("evaluation"));
    }
    if pred.len() != truth.len() {
        return Err(NnError::Width { what: "predictions", expected: truth.len(), got: pred.len() });
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(Metrics { n: truth.len(), rmse: None, mae: None, mape: None, accuracy: Some(100.0 * hits as f64 / truth.len() as f64) })
}

/// Training-label statistics; the baseline predicts `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: f64,
    pub median: f64,
}

pub fn baseline(train_labels: &[f64]) -> Result<Baseline, NnError> {
    if train_labels.is_empty() {
        return Err(NnError::EmptySplit("train"));
    }
    let mean = train_labels.iter().sum::<f64>() / train_labels.len() as f64;
    let mut s = train_labels.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    let median = if k % 2 == 1 { s[k / 2] } else { 0.5 * (s[k / 2 - 1] + s[k / 2]) };
    Ok(Baseline { mean, median })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_worked_metrics() {
        let m = regression_metrics(&[3.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!((m.rmse.unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.mae, Some(1.5));
        assert_eq!(m.mape, Some(125.0));
        let z = regression_metrics(&[4.0, 5.0], &[4.0, 5.0]).unwrap();
        assert_eq!((z.rmse, z.mae, z.mape), (Some(0.0), Some(0.0), Some(0.0)));
        assert!(regression_metrics(&[], &[]).is_err());
        assert_eq!(classification_metrics(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap().accuracy, Some(50.0));
    }

    #[test]
    fn baseline_is_the_mean() {
        assert_eq!(baseline(&[1.0, 2.0, 3.0]).unwrap().mean, 2.0);
        assert_eq!(baseline(&[5.0]).unwrap(), Baseline { mean: 5.0, median: 5.0 });
        assert_eq!(baseline(&[1.0, 2.0, 10.0, 11.0]).unwrap().median, 6.0);
        assert!(baseline(&[]).is_err());
    }
}
