//! Browser demo bindings.
//!
//! Three interactive operations over the core library: synthetic signal
//! preview, circular baseline alignment, and the full attribution pipeline
//! on a constructed exertion scenario. Functions return SVG markup or JSON
//! strings for a plain static page to render.

use wasm_bindgen::prelude::*;

use shiftig::attribution::Scheme;
use shiftig::baseline::align_baseline;
use shiftig::fixtures::{self, ExertionKnobs};
use shiftig::signal::normalize;
use shiftig::synth::{generate, SynthConfig};
use shiftig::{pipeline, svg, AttributionReport};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// SVG preview of a synthetic multi-lead signal.
#[wasm_bindgen]
pub fn synth_preview(
    bpm: f64,
    duration_s: f64,
    jitter: f64,
    noise_snr_db: Option<f64>,
    phase_offset: usize,
    seed: u64,
) -> Result<String, JsValue> {
    let cfg = SynthConfig {
        heart_rate_bpm: bpm,
        duration_s,
        rr_jitter_frac: jitter,
        noise_snr_db,
        phase_offset_samples: phase_offset,
        seed,
        ..SynthConfig::default()
    };
    let (signal, _) = generate(&cfg).map_err(js_err)?;
    Ok(svg::render_traces(&signal))
}

/// Aligns a rotated copy of a synthetic baseline back to it and reports
/// the recovered shift plus the full inner-product curve of lead 0.
#[wasm_bindgen]
pub fn align_demo(bpm: f64, offset: usize, seed: u64) -> Result<String, JsValue> {
    let cfg = SynthConfig {
        heart_rate_bpm: bpm,
        duration_s: 4.0,
        seed,
        ..SynthConfig::default()
    };
    let (baseline, _) = generate(&cfg).map_err(js_err)?;
    let shifted = SynthConfig {
        phase_offset_samples: offset,
        ..cfg
    };
    let (target, _) = generate(&shifted).map_err(js_err)?;

    let period = (cfg.sample_rate_hz * 60.0 / bpm).round() as usize;
    let period = period.min(baseline.num_samples()).max(2);
    let aligned = align_baseline(&baseline, &target, period).map_err(js_err)?;

    // Inner-product curve for lead 0, for plotting n[p].
    let t_row = target.lead(0).to_vec();
    let b_row = baseline.lead(0).to_vec();
    let t_len = t_row.len();
    let curve: Vec<f64> = (0..period)
        .map(|p| {
            let mut acc = 0.0;
            for k in 0..t_len {
                acc += t_row[k] * b_row[(k + p) % t_len];
            }
            acc
        })
        .collect();

    let doc = serde_json::json!({
        "period_samples": period,
        "injected_offset": offset % baseline.num_samples(),
        "shift_per_lead": aligned.shift_per_lead(),
        "score_per_lead": aligned.score_per_lead(),
        "inner_products_lead0": curve,
        "exact_recovery": aligned.baseline() == &target,
    });
    Ok(doc.to_string())
}

/// Runs the full attribution pipeline on the exertion scenario and returns
/// a JSON document with the result summary plus heatmap SVG.
#[wasm_bindgen]
pub fn attribution_demo(
    seed: u64,
    steps: usize,
    p_scale: f64,
    t_scale: f64,
) -> Result<String, JsValue> {
    let knobs = ExertionKnobs {
        p_scale,
        t_scale,
        duration_s: 4.0,
        ..ExertionKnobs::default()
    };
    let (target, baseline, model) =
        fixtures::exertion_scenario_with(seed, &knobs).map_err(js_err)?;
    let cfg = pipeline::PipelineConfig {
        steps,
        scheme: Scheme::Trapezoid,
        ..pipeline::PipelineConfig::default()
    };
    let result = pipeline::run(&target, &baseline, &model, &cfg).map_err(js_err)?;
    let report = AttributionReport::from_pipeline(&result);
    let heatmap = svg::render_heatmap(&result.normalized_target, &result.attribution);
    let norm_target = normalize(&target).map_err(js_err)?;
    let traces = svg::render_traces(&norm_target.signal);

    let doc = serde_json::json!({
        "period_samples": result.period,
        "shift_per_lead": report.shift_per_lead,
        "f_target": report.f_target,
        "f_baseline": report.f_baseline,
        "residual": report.residual,
        "lambda": report.lambda,
        "W": report.w,
        "E": report.e,
        "regimes": report.regimes,
        "bins": {
            "totals": report.bins.totals,
            "counts": report.bins.counts,
            "labels": report.bins.labels,
        },
        "degenerate": result.is_degenerate(),
        "heatmap_svg": heatmap,
        "traces_svg": traces,
    });
    Ok(doc.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_preview_returns_svg() {
        let svg = synth_preview(60.0, 2.0, 0.0, None, 0, 1).unwrap();
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn align_demo_recovers_offset() {
        let text = align_demo(60.0, 300, 5).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["exact_recovery"], true);
        assert_eq!(doc["shift_per_lead"][0], 300);
    }

    #[test]
    fn attribution_demo_reports_bins() {
        let text = attribution_demo(3, 32, 0.4, 1.8).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["degenerate"], false);
        assert_eq!(doc["bins"]["labels"][0], "ST");
        assert!(doc["heatmap_svg"].as_str().unwrap().starts_with("<svg"));
    }
}
