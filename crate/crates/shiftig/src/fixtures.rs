//! Deterministic bundled models and random signals.
//!
//! Everything here is seeded, so verification runs, demos, and tests see
//! bit-identical fixtures across machines.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::{Activation, DenseLayer, DifferentiableModel};
use crate::signal::LeadTimeMatrix;
use crate::synth::{self, SynthConfig};

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

/// Random linear model with weights scaled to keep outputs O(1) on [0,1]
/// inputs.
pub fn linear_model(c: usize, t: usize, seed: u64) -> DifferentiableModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / ((c * t) as f64).sqrt();
    let weights = normal_matrix(&mut rng, c, t, scale);
    let bias: f64 = rng.sample::<f64, _>(StandardNormal) * 0.1;
    DifferentiableModel::linear(weights, bias).expect("finite by construction")
}

fn dense_stack(
    c: usize,
    t: usize,
    hidden: &[usize],
    outputs: usize,
    activation: Activation,
    seed: u64,
) -> Vec<DenseLayer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut dim = c * t;
    for &h in hidden {
        let scale = 1.0 / (dim as f64).sqrt();
        layers.push(
            DenseLayer::new(
                normal_matrix(&mut rng, h, dim, scale),
                normal_vector(&mut rng, h, 0.05),
                activation,
            )
            .expect("finite by construction"),
        );
        dim = h;
    }
    let scale = 1.0 / (dim as f64).sqrt();
    layers.push(
        DenseLayer::new(
            normal_matrix(&mut rng, outputs, dim, scale),
            normal_vector(&mut rng, outputs, 0.05),
            Activation::Identity,
        )
        .expect("finite by construction"),
    );
    layers
}

/// Random scalar-output tanh MLP over the flattened input.
pub fn tanh_mlp(c: usize, t: usize, hidden: &[usize], seed: u64) -> DifferentiableModel {
    DifferentiableModel::mlp((c, t), dense_stack(c, t, hidden, 1, Activation::Tanh, seed), 0)
        .expect("dimensions chain by construction")
}

/// Random scalar-output relu MLP over the flattened input.
pub fn relu_mlp(c: usize, t: usize, hidden: &[usize], seed: u64) -> DifferentiableModel {
    DifferentiableModel::mlp((c, t), dense_stack(c, t, hidden, 1, Activation::Relu, seed), 0)
        .expect("dimensions chain by construction")
}

/// Random multi-class tanh MLP reporting the logit of `class_index`.
pub fn logits_mlp(
    c: usize,
    t: usize,
    hidden: &[usize],
    classes: usize,
    class_index: usize,
    seed: u64,
) -> DifferentiableModel {
    DifferentiableModel::mlp(
        (c, t),
        dense_stack(c, t, hidden, classes, Activation::Tanh, seed),
        class_index,
    )
    .expect("dimensions chain by construction")
}

/// The named model family exercised by `verify` and the acceptance suite.
pub fn bundled_models(c: usize, t: usize) -> Vec<(String, DifferentiableModel)> {
    vec![
        ("linear".to_string(), linear_model(c, t, 101)),
        ("tanh-16".to_string(), tanh_mlp(c, t, &[16], 102)),
        ("tanh-32-16".to_string(), tanh_mlp(c, t, &[32, 16], 103)),
        ("relu-16".to_string(), relu_mlp(c, t, &[16], 104)),
        (
            "logits-3class".to_string(),
            logits_mlp(c, t, &[16], 3, 1, 105),
        ),
    ]
}

/// Linear model whose sensitivity is concentrated on the P- and T-wave
/// windows of the nominal (jitter-free) beat grid of `cfg`. Stands in for a
/// classifier that reacts to exertion-driven P/T morphology changes. Lead
/// rows are scaled by `cfg.lead_amplitudes`, so leads carry distinct
/// gradients.
pub fn exertion_detector(cfg: &SynthConfig) -> Result<DifferentiableModel> {
    let fs = cfg.sample_rate_hz;
    let n = (fs * cfg.duration_s).round() as usize;
    let period = fs * 60.0 / cfg.heart_rate_bpm;
    let mut template = vec![0.0_f64; n];
    let mut pos = period / 2.0;
    while pos.round() <= (n - 1) as f64 {
        for wave in [cfg.t_wave, cfg.p_wave] {
            synth::add_bump(
                &mut template,
                pos + wave.center_frac * period,
                wave.width_s * fs,
                1.0,
            );
        }
        pos += period;
    }
    let c = cfg.num_leads();
    let weights =
        Array2::from_shape_fn((c, n), |(i, k)| cfg.lead_amplitudes[i] * template[k]);
    DifferentiableModel::linear(weights, 0.0)
}

/// A complete synthetic "exertion" scenario: a resting baseline, a target
/// whose P bumps shrink and T bumps grow, and a matched linear detector.
///
/// Leads differ in waveform shape (per-lead P/T amplitudes), so pairwise
/// alignment is non-degenerate after normalization. The baseline carries a
/// seeded circular phase offset for the alignment stage to recover; the
/// target sits on the detector's nominal beat grid.
pub fn exertion_scenario(
    seed: u64,
) -> Result<(LeadTimeMatrix, LeadTimeMatrix, DifferentiableModel)> {
    exertion_scenario_with(seed, &ExertionKnobs::default())
}

/// Tunable variant of [`exertion_scenario`] for demos.
#[derive(Debug, Clone, PartialEq)]
pub struct ExertionKnobs {
    /// Multiplies the target's P-bump amplitude (exertion shrinks it).
    pub p_scale: f64,
    /// Multiplies the target's T-bump amplitude (exertion grows it).
    pub t_scale: f64,
    /// Baseline phase offset in samples; `None` draws one from the seed.
    pub baseline_offset: Option<usize>,
    /// Segment length in seconds.
    pub duration_s: f64,
}

impl Default for ExertionKnobs {
    fn default() -> Self {
        Self {
            p_scale: 0.4,
            t_scale: 1.8,
            baseline_offset: None,
            duration_s: 10.0,
        }
    }
}

pub fn exertion_scenario_with(
    seed: u64,
    knobs: &ExertionKnobs,
) -> Result<(LeadTimeMatrix, LeadTimeMatrix, DifferentiableModel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let grid = SynthConfig {
        duration_s: knobs.duration_s,
        ..SynthConfig::default()
    };
    let fs = grid.sample_rate_hz;
    let n = (fs * grid.duration_s).round() as usize;
    let drawn = rng.random_range(1..(fs * 60.0 / grid.heart_rate_bpm) as usize);
    let offset = knobs.baseline_offset.unwrap_or(drawn);

    // Per-lead morphology: same beat grid, different P/T projections.
    let t_amps = [0.30, 0.36, 0.24];
    let p_amps = [0.15, 0.12, 0.18];
    let morph_jitter: Vec<f64> = (0..3).map(|_| rng.random_range(0.9..1.1)).collect();

    let mut baseline_rows = Array2::<f64>::zeros((3, n));
    let mut target_rows = Array2::<f64>::zeros((3, n));
    for lead in 0..3 {
        let mut lead_cfg = SynthConfig {
            lead_amplitudes: vec![1.0],
            ..grid.clone()
        };
        lead_cfg.t_wave.amplitude_mv = t_amps[lead] * morph_jitter[lead];
        lead_cfg.p_wave.amplitude_mv = p_amps[lead] * morph_jitter[lead];

        let mut base_cfg = lead_cfg.clone();
        base_cfg.phase_offset_samples = offset;
        let (base_lead, _) = synth::generate(&base_cfg)?;
        for k in 0..n {
            baseline_rows[(lead, k)] = base_lead.data()[(0, k)];
        }

        let mut target_cfg = lead_cfg;
        target_cfg.p_wave.amplitude_mv *= knobs.p_scale;
        target_cfg.t_wave.amplitude_mv *= knobs.t_scale;
        target_cfg.t_wave.width_s *= 1.2;
        let (target_lead, _) = synth::generate(&target_cfg)?;
        for k in 0..n {
            target_rows[(lead, k)] = target_lead.data()[(0, k)];
        }
    }

    let names = vec!["I".to_string(), "II".to_string(), "III".to_string()];
    let baseline = LeadTimeMatrix::new(baseline_rows, names.clone(), fs)?;
    let target = LeadTimeMatrix::new(target_rows, names, fs)?;
    let model = exertion_detector(&grid)?;
    Ok((target, baseline, model))
}

/// Uniform random segment with entries in [lo, hi), shaped like a
/// normalized recording.
pub fn random_signal(
    c: usize,
    t: usize,
    sample_rate_hz: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> LeadTimeMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((c, t), |_| rng.random_range(lo..hi));
    LeadTimeMatrix::with_default_names(data, sample_rate_hz)
        .expect("finite by construction")
}

/// A (target, baseline) pair of independent uniform segments.
pub fn random_pair(
    c: usize,
    t: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> (LeadTimeMatrix, LeadTimeMatrix) {
    (
        random_signal(c, t, sample_rate_hz, 0.0, 1.0, seed.wrapping_mul(2).wrapping_add(1)),
        random_signal(c, t, sample_rate_hz, 0.0, 1.0, seed.wrapping_mul(2).wrapping_add(2)),
    )
}
