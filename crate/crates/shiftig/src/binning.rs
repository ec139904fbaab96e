//! R-peak detection and aggregation of attribution scores into four bins
//! per cardiac cycle.
//!
//! Each RR interval is split into four contiguous, near-equal bins; at
//! typical rates these line up approximately with the ST segment, T wave,
//! P wave, and PQ segment, in that order. The detector is a
//! Pan-Tompkins-style squared-derivative energy detector with an adaptive
//! rolling-max threshold.

use crate::attribution::AttributionMap;
use crate::error::{Error, Result};
use crate::signal::LeadTimeMatrix;

/// Annotation labels for the four RR bins, in order.
pub const BIN_LABELS: [&str; 4] = ["ST", "T", "P", "PQ"];

const PRE_SMOOTH_S: f64 = 0.040;
const SMOOTH_WINDOW_S: f64 = 0.150;
const ROLLING_MAX_WINDOW_S: f64 = 2.0;
const THRESHOLD_FACTOR: f64 = 0.5;
const REFRACTORY_S: f64 = 0.200;
const REFINE_WINDOW_S: f64 = 0.025;

/// Detected (or ground-truth) R-peak sample indices for one lead.
#[derive(Debug, Clone, PartialEq)]
pub struct RPeakList {
    indices: Vec<usize>,
    lead_used: String,
    sample_rate_hz: f64,
}

impl RPeakList {
    /// `indices` must be non-empty and strictly increasing.
    pub fn new(indices: Vec<usize>, lead_used: String, sample_rate_hz: f64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput);
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "R-peak indices must be strictly increasing".to_string(),
            ));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            indices,
            lead_used,
            sample_rate_hz,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn lead_used(&self) -> &str {
        &self.lead_used
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Attribution totals aggregated over the four bins of every complete RR
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BinProfile {
    totals: [f64; 4],
    counts: [usize; 4],
    cycles_used: usize,
    coverage_fraction: f64,
}

impl BinProfile {
    /// Summed scores per bin, ordered bin 1..4.
    pub fn totals(&self) -> &[f64; 4] {
        &self.totals
    }

    /// Samples per bin across all complete cycles.
    pub fn counts(&self) -> &[usize; 4] {
        &self.counts
    }

    pub fn cycles_used(&self) -> usize {
        self.cycles_used
    }

    /// Fraction of the segment covered by complete RR intervals.
    pub fn coverage_fraction(&self) -> f64 {
        self.coverage_fraction
    }
}

fn centered_moving_average(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in v {
        acc += x;
        prefix.push(acc);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn centered_rolling_max(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = 0usize; // next index to push
    for k in 0..n {
        let hi = (k + half + 1).min(n);
        while next < hi {
            while let Some(&back) = deque.back() {
                if v[back] <= v[next] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = k.saturating_sub(half);
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        out[k] = v[*deque.front().expect("window never empty")];
    }
    out
}

fn window_samples(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize).max(1)
}

/// Detects R-peaks on one lead.
///
/// The lead is lightly lowpassed (40 ms moving average) so that wideband
/// noise does not dominate the squared first-difference energy. The energy
/// is smoothed with a 150 ms moving average and thresholded at half the 2 s
/// rolling maximum; each suprathreshold region yields one candidate at its
/// midpoint. Candidates closer than the 200 ms refractory period are pruned
/// and survivors are refined to the raw-signal maximum within ±25 ms.
pub fn detect_rpeaks(x: &LeadTimeMatrix, lead: usize) -> Result<RPeakList> {
    let fs = x.sample_rate_hz();
    let t_len = x.num_samples();
    if lead >= x.num_leads() {
        return Err(Error::LeadNotFound(lead.to_string()));
    }
    if (t_len as f64) < fs {
        return Err(Error::InvalidConfig(
            "segment must be at least one second long".to_string(),
        ));
    }
    let sig = x.lead(lead).to_vec();
    let lowpassed = centered_moving_average(&sig, window_samples(PRE_SMOOTH_S, fs) / 2);

    let mut energy = vec![0.0; t_len];
    for k in 0..t_len - 1 {
        let d = lowpassed[k + 1] - lowpassed[k];
        energy[k] = d * d;
    }
    let smoothed = centered_moving_average(&energy, window_samples(SMOOTH_WINDOW_S, fs) / 2);
    let rollmax = centered_rolling_max(&smoothed, window_samples(ROLLING_MAX_WINDOW_S, fs) / 2);

    if smoothed.iter().fold(0.0_f64, |m, &v| m.max(v)) <= 0.0 {
        return Err(Error::NoPeaksFound);
    }

    // Suprathreshold regions -> one candidate each, at the region midpoint
    // (the smoothed energy is flat-topped, so an argmax would sit at the
    // plateau edge rather than over the crest).
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    let mut region: Option<(usize, usize, f64)> = None; // (start, end, peak energy)
    for k in 0..t_len {
        let above = smoothed[k] > 0.0 && smoothed[k] >= THRESHOLD_FACTOR * rollmax[k];
        if above {
            region = match region {
                Some((start, _, e)) => Some((start, k, e.max(smoothed[k]))),
                None => Some((k, k, smoothed[k])),
            };
        } else if let Some((start, end, e)) = region.take() {
            candidates.push(((start + end) / 2, e));
        }
    }
    if let Some((start, end, e)) = region.take() {
        candidates.push(((start + end) / 2, e));
    }
    if candidates.is_empty() {
        return Err(Error::NoPeaksFound);
    }

    // Refractory pruning: keep the stronger of any two candidates closer
    // than the refractory period.
    let refractory = window_samples(REFRACTORY_S, fs);
    let mut pruned: Vec<(usize, f64)> = Vec::new();
    for (idx, e) in candidates {
        match pruned.last() {
            Some(&(last_idx, last_e)) if idx - last_idx < refractory => {
                if e > last_e {
                    *pruned.last_mut().unwrap() = (idx, e);
                }
            }
            _ => pruned.push((idx, e)),
        }
    }

    // Refine to the raw-signal crest.
    let refine = window_samples(REFINE_WINDOW_S, fs);
    let mut refined: Vec<usize> = pruned
        .iter()
        .map(|&(idx, _)| {
            let lo = idx.saturating_sub(refine);
            let hi = (idx + refine + 1).min(t_len);
            let mut best = lo;
            for k in lo..hi {
                if sig[k] > sig[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    refined.dedup();

    // Refinement can pull neighbours together; enforce the refractory gap on
    // the final indices, preferring the taller crest.
    let mut final_peaks: Vec<usize> = Vec::new();
    for idx in refined {
        match final_peaks.last() {
            Some(&last) if idx <= last || idx - last < refractory => {
                if sig[idx] > sig[*final_peaks.last().unwrap()] {
                    *final_peaks.last_mut().unwrap() = idx;
                }
            }
            _ => final_peaks.push(idx),
        }
    }
    if final_peaks.is_empty() {
        return Err(Error::NoPeaksFound);
    }

    RPeakList::new(final_peaks, x.lead_names()[lead].clone(), fs)
}

/// Bin boundaries for one RR interval of `len` samples: four contiguous
/// bins of ⌊len/4⌋, the remainder distributed one sample each to the
/// leading bins.
pub fn bin_sizes(len: usize) -> [usize; 4] {
    let base = len / 4;
    let rem = len % 4;
    let mut sizes = [base; 4];
    for slot in sizes.iter_mut().take(rem) {
        *slot += 1;
    }
    sizes
}

/// Aggregates one lead's attribution scores into four bins per complete RR
/// interval. Samples before the first and after the last peak are excluded
/// and reflected in the coverage fraction.
pub fn bin_attributions(
    a: &AttributionMap,
    peaks: &RPeakList,
    lead: usize,
) -> Result<BinProfile> {
    let (c, t_len) = a.scores().dim();
    if lead >= c {
        return Err(Error::LeadNotFound(lead.to_string()));
    }
    let idx = peaks.indices();
    if idx.len() < 2 {
        return Err(Error::InsufficientPeaks {
            needed: 2,
            got: idx.len(),
        });
    }
    // The final peak may sit at the one-past-end boundary.
    if idx[idx.len() - 1] > t_len {
        return Err(Error::InvalidConfig(format!(
            "R-peak index {} outside segment of length {t_len}",
            idx[idx.len() - 1]
        )));
    }
    let scores = a.scores();
    let mut totals = [0.0_f64; 4];
    let mut counts = [0usize; 4];
    for w in idx.windows(2) {
        let (start, end) = (w[0], w[1]);
        let sizes = bin_sizes(end - start);
        let mut pos = start;
        for (b, &size) in sizes.iter().enumerate() {
            for t in pos..pos + size {
                totals[b] += scores[(lead, t)];
            }
            counts[b] += size;
            pos += size;
        }
    }
    let covered = idx[idx.len() - 1] - idx[0];
    Ok(BinProfile {
        totals,
        counts,
        cycles_used: idx.len() - 1,
        coverage_fraction: covered as f64 / t_len as f64,
    })
}

/// Per-bin mean of totals weighted by each profile's cycle count.
pub fn average_bin_profile(profiles: &[BinProfile]) -> Result<BinProfile> {
    if profiles.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total_cycles: usize = profiles.iter().map(|p| p.cycles_used).sum();
    if total_cycles == 0 {
        return Err(Error::EmptyInput);
    }
    let mut totals = [0.0_f64; 4];
    let mut counts = [0usize; 4];
    let mut coverage = 0.0;
    for p in profiles {
        let w = p.cycles_used as f64;
        for b in 0..4 {
            totals[b] += p.totals[b] * w;
            counts[b] += p.counts[b];
        }
        coverage += p.coverage_fraction * w;
    }
    let denom = total_cycles as f64;
    for t in totals.iter_mut() {
        *t /= denom;
    }
    Ok(BinProfile {
        totals,
        counts,
        cycles_used: total_cycles,
        coverage_fraction: coverage / denom,
    })
}
