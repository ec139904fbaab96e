//! Serializable result document (`attribution.json`).
//!
//! Field names and layout are part of the tool's external contract:
//! `{"scores", "f_target", "f_baseline", "residual", "shift_per_lead",
//! "W", "E", "lambda", "regimes", "bins"}` with `E`/`lambda` null in the
//! degenerate regime. Serialization is byte-deterministic for identical
//! results.

use serde::{Deserialize, Serialize};

use crate::binning::BIN_LABELS;
use crate::error::Result;
use crate::pipeline::PipelineResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    /// C×T integrated-gradients scores.
    pub scores: Vec<Vec<f64>>,
    pub f_target: f64,
    pub f_baseline: f64,
    /// Completeness residual `(f_target − f_baseline) − Σ scores`.
    pub residual: f64,
    pub shift_per_lead: Vec<usize>,
    /// Pairwise alignment scores, full symmetric C×C matrix.
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    /// λ-normalized edge scores; null when the alignment total is
    /// degenerate.
    #[serde(rename = "E")]
    pub e: Option<Vec<Vec<f64>>>,
    pub lambda: Option<f64>,
    /// Regime label per pair: "positive" | "negative" | "near_zero".
    pub regimes: Vec<Vec<String>>,
    pub bins: BinReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub totals: Vec<f64>,
    pub counts: Vec<usize>,
    pub labels: Vec<String>,
}

fn matrix_rows(m: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl AttributionReport {
    pub fn from_pipeline(result: &PipelineResult) -> Self {
        Self {
            scores: matrix_rows(result.attribution.scores()),
            f_target: result.attribution.f_target(),
            f_baseline: result.attribution.f_baseline(),
            residual: result.attribution.completeness_residual(),
            shift_per_lead: result.aligned.shift_per_lead().to_vec(),
            w: matrix_rows(result.alignment.matrix()),
            e: result.edges.as_ref().map(|e| matrix_rows(e.matrix())),
            lambda: result.edges.as_ref().map(|e| e.lambda()),
            regimes: result
                .regimes
                .labels()
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|l| l.name().to_string()).collect())
                .collect(),
            bins: BinReport {
                totals: result.bins.totals().to_vec(),
                counts: result.bins.counts().to_vec(),
                labels: BIN_LABELS.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> AttributionReport {
        AttributionReport {
            scores: vec![vec![0.25, -0.5], vec![0.1, 0.2]],
            f_target: 1.5,
            f_baseline: 0.5,
            residual: 1e-9,
            shift_per_lead: vec![3, 7],
            w: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
            e: Some(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            lambda: Some(0.5),
            regimes: vec![
                vec!["near_zero".into(), "positive".into()],
                vec!["positive".into(), "near_zero".into()],
            ],
            bins: BinReport {
                totals: vec![0.1, 0.2, 0.3, 0.4],
                counts: vec![4, 4, 4, 4],
                labels: BIN_LABELS.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let report = sample_report();
        let text = report.to_json_string();
        let back = AttributionReport::from_json_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn roundtrip_preserves_bits_of_long_fractions() {
        // Values with full 17-digit shortest representations stress the
        // float parser; round-tripping must reproduce the exact bits.
        let mut report = sample_report();
        report.scores = vec![(0..64)
            .map(|k| (k as f64 * 0.1234567890123).sin() * 0.037_f64.powi(1 + (k % 3) as i32))
            .collect()];
        report.f_target = 0.452_534_187_971_393_9;
        report.residual = 2.775_557_561_562_891_4e-17;
        let back = AttributionReport::from_json_str(&report.to_json_string()).unwrap();
        assert_eq!(back.f_target.to_bits(), report.f_target.to_bits());
        assert_eq!(back.residual.to_bits(), report.residual.to_bits());
        for (a, b) in back.scores[0].iter().zip(&report.scores[0]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn field_names_match_contract() {
        let text = sample_report().to_json_string();
        for field in [
            "\"scores\"",
            "\"f_target\"",
            "\"f_baseline\"",
            "\"residual\"",
            "\"shift_per_lead\"",
            "\"W\"",
            "\"E\"",
            "\"lambda\"",
            "\"regimes\"",
            "\"bins\"",
            "\"totals\"",
            "\"counts\"",
            "\"labels\"",
        ] {
            assert!(text.contains(field), "missing {field}");
        }
    }

    #[test]
    fn degenerate_fields_serialize_as_null() {
        let mut report = sample_report();
        report.e = None;
        report.lambda = None;
        let text = report.to_json_string();
        assert!(text.contains("\"E\":null"));
        assert!(text.contains("\"lambda\":null"));
        let back = AttributionReport::from_json_str(&text).unwrap();
        assert_eq!(back.e, None);
        assert_eq!(back.lambda, None);
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = sample_report().to_json_string();
        let b = sample_report().to_json_string();
        assert_eq!(a, b);
    }
}
