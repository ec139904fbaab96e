//! End-to-end attribution pipeline: normalize, detect, align, attribute,
//! score, bin.
//!
//! Keeps all computation in the library so the CLI and the browser demo
//! drive exactly the same code.

use crate::alignment::{
    self, classify_regimes, edge_scores, AlignmentMatrix, EdgeScoreMatrix, RegimeLabelMatrix,
};
use crate::attribution::{AttributionMap, PathSpec, Scheme};
use crate::baseline::{align_baseline, align_baseline_shared, estimate_period, AlignedBaseline};
use crate::binning::{bin_attributions, detect_rpeaks, BinProfile, RPeakList};
use crate::error::{Error, Result};
use crate::model::{DifferentiableModel, OutputMode};
use crate::signal::{normalize, LeadTimeMatrix};

/// Knobs of the attribution pipeline. Defaults mirror the CLI defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Quadrature step count m.
    pub steps: usize,
    pub scheme: Scheme,
    /// One shift shared across leads instead of per-lead shifts.
    pub shared_shift: bool,
    /// Lead used for R-peak detection and binning (label or 0-based index);
    /// defaults to the first lead.
    pub bin_lead: Option<String>,
    /// Overrides the model's stored class index.
    pub class_index: Option<usize>,
    /// Attribute the softmax probability instead of the raw logit.
    pub softmax: bool,
    /// Near-zero cutoff for regime labels, as a fraction of the peak |W|.
    pub regime_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            steps: 256,
            scheme: Scheme::Trapezoid,
            shared_shift: false,
            bin_lead: None,
            class_index: None,
            softmax: false,
            regime_threshold: alignment::DEFAULT_REGIME_THRESHOLD,
        }
    }
}

/// Everything the pipeline produces. `edges` is `None` exactly when the
/// pairwise alignment total was degenerate.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub normalized_target: LeadTimeMatrix,
    pub aligned: AlignedBaseline,
    pub period: usize,
    pub attribution: AttributionMap,
    pub alignment: AlignmentMatrix,
    pub edges: Option<EdgeScoreMatrix>,
    pub regimes: RegimeLabelMatrix,
    pub bins: BinProfile,
    pub bin_lead_index: usize,
    pub baseline_peaks: RPeakList,
    pub target_peaks: RPeakList,
    pub constant_target_leads: Vec<usize>,
    pub constant_baseline_leads: Vec<usize>,
}

impl PipelineResult {
    pub fn is_degenerate(&self) -> bool {
        self.edges.is_none()
    }
}

/// Runs the full pipeline on raw (unnormalized) target and baseline
/// segments.
pub fn run(
    target: &LeadTimeMatrix,
    baseline: &LeadTimeMatrix,
    model: &DifferentiableModel,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    target.same_shape(baseline)?;
    if target.sample_rate_hz() != baseline.sample_rate_hz() {
        return Err(Error::SampleRateMismatch {
            a: target.sample_rate_hz(),
            b: baseline.sample_rate_hz(),
        });
    }

    let norm_target = normalize(target)?;
    let norm_baseline = normalize(baseline)?;

    let bin_lead_index = match &cfg.bin_lead {
        Some(selector) => norm_target.signal.lead_index(selector)?,
        None => 0,
    };

    let baseline_peaks = detect_rpeaks(&norm_baseline.signal, bin_lead_index)?;
    let period = estimate_period(&norm_baseline.signal, &baseline_peaks)?;
    let aligned = if cfg.shared_shift {
        align_baseline_shared(&norm_baseline.signal, &norm_target.signal, period)?
    } else {
        align_baseline(&norm_baseline.signal, &norm_target.signal, period)?
    };

    let mut model = model.clone();
    if let Some(k) = cfg.class_index {
        model = model.with_class_index(k)?;
    }
    if cfg.softmax {
        model = model.with_output_mode(OutputMode::SoftmaxProbability);
    }

    let path = PathSpec::new(
        aligned.baseline().clone(),
        norm_target.signal.clone(),
        cfg.steps,
        cfg.scheme,
    )?;
    let (attribution, alignment) = alignment::attribute_with_alignment(&model, &path)?;

    let edges = match edge_scores(&alignment, attribution.f_target(), attribution.f_baseline()) {
        Ok(e) => Some(e),
        Err(Error::DegenerateAlignment) => None,
        Err(other) => return Err(other),
    };
    let regimes = classify_regimes(&alignment, cfg.regime_threshold)?;

    let target_peaks = detect_rpeaks(&norm_target.signal, bin_lead_index)?;
    let bins = bin_attributions(&attribution, &target_peaks, bin_lead_index)?;

    Ok(PipelineResult {
        normalized_target: norm_target.signal,
        aligned,
        period,
        attribution,
        alignment,
        edges,
        regimes,
        bins,
        bin_lead_index,
        baseline_peaks,
        target_peaks,
        constant_target_leads: norm_target.constant_leads,
        constant_baseline_leads: norm_baseline.constant_leads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::completeness_check;
    use crate::fixtures;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn synthetic_end_to_end() {
        let (target, baseline, model) = fixtures::exertion_scenario(1).unwrap();
        let cfg = PipelineConfig {
            steps: 64,
            ..PipelineConfig::default()
        };
        let result = run(&target, &baseline, &model, &cfg).unwrap();

        assert!(!result.is_degenerate());
        assert!(completeness_check(&result.attribution, 1e-6));
        assert_eq!(result.period, 512);
        assert_eq!(result.bins.cycles_used() + 1, result.target_peaks.len());

        // The baseline is a rotated variant of the target's beat grid, so
        // the recovered shifts live within one period.
        for &s in result.aligned.shift_per_lead() {
            assert!(s < 512);
        }
    }

    #[test]
    fn identical_inputs_are_degenerate_with_zero_scores() {
        let (signal, _) = generate(&SynthConfig::default()).unwrap();
        let model = fixtures::exertion_detector(&SynthConfig::default()).unwrap();
        let result = run(&signal, &signal, &model, &PipelineConfig::default()).unwrap();
        assert!(result.is_degenerate());
        assert!(result.attribution.scores().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (target, baseline, model) = fixtures::exertion_scenario(2).unwrap();
        let cfg = PipelineConfig {
            steps: 32,
            ..PipelineConfig::default()
        };
        let a = run(&target, &baseline, &model, &cfg).unwrap();
        let b = run(&target, &baseline, &model, &cfg).unwrap();
        assert_eq!(a.attribution, b.attribution);
        assert_eq!(a.alignment, b.alignment);
        assert_eq!(a.aligned.shift_per_lead(), b.aligned.shift_per_lead());
    }

    #[test]
    fn shared_shift_flag_unifies_shifts() {
        let (target, baseline, model) = fixtures::exertion_scenario(3).unwrap();
        let cfg = PipelineConfig {
            steps: 16,
            shared_shift: true,
            ..PipelineConfig::default()
        };
        let result = run(&target, &baseline, &model, &cfg).unwrap();
        let shifts = result.aligned.shift_per_lead();
        assert!(shifts.iter().all(|&s| s == shifts[0]));
    }
}
