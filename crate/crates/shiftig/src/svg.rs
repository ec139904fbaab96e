//! SVG rendering of attribution heatmaps and signal traces.
//!
//! One row per lead: per-sample rectangles colored on a diverging scale
//! symmetric about zero, with the normalized trace drawn on top. Output is
//! deterministic for identical inputs.

use std::fmt::Write as _;

use crate::attribution::AttributionMap;
use crate::signal::LeadTimeMatrix;

const ROW_HEIGHT: f64 = 72.0;
const ROW_GAP: f64 = 14.0;
const LEFT_MARGIN: f64 = 52.0;
const TOP_MARGIN: f64 = 26.0;
const PLOT_WIDTH: f64 = 960.0;

/// Diverging blue-white-red map for v in [-1, 1].
fn diverging_color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (lo, hi): ([f64; 3], [f64; 3]) = if v < 0.0 {
        ([255.0, 255.0, 255.0], [59.0, 76.0, 192.0])
    } else {
        ([255.0, 255.0, 255.0], [180.0, 4.0, 38.0])
    };
    let t = v.abs();
    let ch = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        ch(lo[0], hi[0]),
        ch(lo[1], hi[1]),
        ch(lo[2], hi[2])
    )
}

fn lead_min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        (lo, lo + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the attribution heatmap with the signal trace overlaid.
///
/// `signal` provides the traces (normally the normalized target) and must
/// share the attribution map's shape.
pub fn render_heatmap(signal: &LeadTimeMatrix, attribution: &AttributionMap) -> String {
    let (c, t_len) = signal.shape();
    let max_abs = attribution
        .scores()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let total_height = TOP_MARGIN + c as f64 * (ROW_HEIGHT + ROW_GAP);
    let cell_w = PLOT_WIDTH / t_len as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        LEFT_MARGIN + PLOT_WIDTH + 10.0,
        total_height,
        LEFT_MARGIN + PLOT_WIDTH + 10.0,
        total_height
    );
    let _ = writeln!(
        out,
        "<text x=\"{LEFT_MARGIN}\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">attribution heatmap, max |score| = {max_abs:.3e}</text>"
    );

    for i in 0..c {
        let row_top = TOP_MARGIN + i as f64 * (ROW_HEIGHT + ROW_GAP);
        let _ = writeln!(
            out,
            "<text x=\"6\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            row_top + ROW_HEIGHT / 2.0,
            signal.lead_names()[i]
        );
        for t in 0..t_len {
            let v = if max_abs > 0.0 {
                attribution.scores()[(i, t)] / max_abs
            } else {
                0.0
            };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.1}\" width=\"{:.2}\" height=\"{ROW_HEIGHT}\" fill=\"{}\"/>",
                LEFT_MARGIN + t as f64 * cell_w,
                row_top,
                cell_w + 0.1,
                diverging_color(v)
            );
        }
        let row = signal.lead(i).to_vec();
        let (lo, hi) = lead_min_max(&row);
        let mut points = String::new();
        for (t, &v) in row.iter().enumerate() {
            let x = LEFT_MARGIN + (t as f64 + 0.5) * cell_w;
            let y = row_top + ROW_HEIGHT - (v - lo) / (hi - lo) * ROW_HEIGHT;
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#222\" stroke-width=\"1\"/>",
            points.trim_end()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Renders plain signal traces, one row per lead (no heatmap).
pub fn render_traces(signal: &LeadTimeMatrix) -> String {
    let (c, t_len) = signal.shape();
    let total_height = TOP_MARGIN + c as f64 * (ROW_HEIGHT + ROW_GAP);
    let cell_w = PLOT_WIDTH / t_len as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        LEFT_MARGIN + PLOT_WIDTH + 10.0,
        total_height,
        LEFT_MARGIN + PLOT_WIDTH + 10.0,
        total_height
    );
    for i in 0..c {
        let row_top = TOP_MARGIN + i as f64 * (ROW_HEIGHT + ROW_GAP);
        let _ = writeln!(
            out,
            "<text x=\"6\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            row_top + ROW_HEIGHT / 2.0,
            signal.lead_names()[i]
        );
        let row = signal.lead(i).to_vec();
        let (lo, hi) = lead_min_max(&row);
        let mut points = String::new();
        for (t, &v) in row.iter().enumerate() {
            let x = LEFT_MARGIN + (t as f64 + 0.5) * cell_w;
            let y = row_top + ROW_HEIGHT - (v - lo) / (hi - lo) * ROW_HEIGHT;
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1660a8\" stroke-width=\"1\"/>",
            points.trim_end()
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::AttributionMap;
    use ndarray::{array, Array2};
    use crate::signal::LeadTimeMatrix;

    #[test]
    fn heatmap_contains_rects_and_traces() {
        let signal = LeadTimeMatrix::with_default_names(
            Array2::from_shape_vec((2, 4), vec![0.0, 1.0, 0.5, 0.25, 1.0, 0.0, 0.75, 0.5])
                .unwrap(),
            512.0,
        )
        .unwrap();
        let a = AttributionMap::from_parts(
            array![[0.5, -0.5, 0.0, 0.25], [0.1, 0.0, -0.9, 0.3]],
            1.0,
            0.0,
            4,
        )
        .unwrap();
        let svg = render_heatmap(&signal, &a);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 8);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("L1"));
        assert_eq!(svg, render_heatmap(&signal, &a));
    }

    #[test]
    fn diverging_scale_endpoints() {
        assert_eq!(diverging_color(0.0), "#ffffff");
        assert_eq!(diverging_color(1.0), "#b40426");
        assert_eq!(diverging_color(-1.0), "#3b4cc0");
    }
}
