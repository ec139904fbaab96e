//! Circular-shift matching of a resting baseline segment to a target.
//!
//! For each lead the baseline is compared against the target at every
//! circular shift `p` within one estimated period, and the shift with the
//! largest absolute inner product wins. Re-indexing is modulo the full
//! segment length, so the match is well defined even when the segment holds
//! several periods; shifts are restricted to `[0, period)` because a
//! quasi-periodic signal repeats beyond that.

use ndarray::Array2;

use crate::binning::RPeakList;
use crate::error::{Error, Result};
use crate::signal::LeadTimeMatrix;

/// A baseline segment re-indexed to its best circular alignment with a
/// target, along with the winning shift and inner-product score per lead.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedBaseline {
    baseline: LeadTimeMatrix,
    shift_per_lead: Vec<usize>,
    score_per_lead: Vec<f64>,
    period_samples: usize,
}

impl AlignedBaseline {
    /// The re-indexed baseline (lead i is the original lead i rotated by
    /// `shift_per_lead[i]`).
    pub fn baseline(&self) -> &LeadTimeMatrix {
        &self.baseline
    }

    pub fn shift_per_lead(&self) -> &[usize] {
        &self.shift_per_lead
    }

    /// Winning |inner product| per lead, maximal over all candidate shifts.
    pub fn score_per_lead(&self) -> &[f64] {
        &self.score_per_lead
    }

    pub fn period_samples(&self) -> usize {
        self.period_samples
    }
}

/// Estimates the period in samples as the rounded mean spacing between
/// successive R-peaks.
pub fn estimate_period(x: &LeadTimeMatrix, rpeaks: &RPeakList) -> Result<usize> {
    let idx = rpeaks.indices();
    if idx.len() < 2 {
        return Err(Error::InsufficientPeaks {
            needed: 2,
            got: idx.len(),
        });
    }
    let t_len = x.num_samples();
    if idx[idx.len() - 1] >= t_len {
        return Err(Error::InvalidConfig(format!(
            "R-peak index {} outside segment of length {t_len}",
            idx[idx.len() - 1]
        )));
    }
    let mean_spacing = idx
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .sum::<f64>()
        / (idx.len() - 1) as f64;
    let period = mean_spacing.round() as usize;
    if period < 2 || period > t_len {
        return Err(Error::InvalidPeriod {
            period,
            len: t_len,
        });
    }
    Ok(period)
}

/// Inner products of `target` with every circular shift of `base`:
/// `n[p] = Σ_k target[k] · base[(k+p) mod T]` for `p` in `[0, period)`.
///
/// The accumulation order (k ascending) is part of the contract; results are
/// bit-identical to a literal evaluation of the sum.
fn circular_inner_products(target: &[f64], base: &[f64], period: usize) -> Vec<f64> {
    let t_len = target.len();
    (0..period)
        .map(|p| {
            let mut acc = 0.0;
            let mut j = p;
            for &tv in target {
                acc += tv * base[j];
                j += 1;
                if j == t_len {
                    j = 0;
                }
            }
            acc
        })
        .collect()
}

/// argmax of |n[p]|, ties broken by the smallest shift.
fn best_shift(n: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_mag = n[0].abs();
    for (p, &v) in n.iter().enumerate().skip(1) {
        if v.abs() > best_mag {
            best = p;
            best_mag = v.abs();
        }
    }
    (best, best_mag)
}

pub(crate) fn rotate_row(v: &[f64], shift: usize) -> Vec<f64> {
    let n = v.len();
    let s = shift % n;
    (0..n).map(|k| v[(k + s) % n]).collect()
}

fn validate_alignment_inputs(
    baseline: &LeadTimeMatrix,
    target: &LeadTimeMatrix,
    period: usize,
) -> Result<()> {
    baseline.same_shape(target)?;
    let t_len = baseline.num_samples();
    if period < 2 || period > t_len {
        return Err(Error::InvalidPeriod {
            period,
            len: t_len,
        });
    }
    Ok(())
}

fn build_aligned(
    baseline: &LeadTimeMatrix,
    shifts: Vec<usize>,
    scores: Vec<f64>,
    period: usize,
) -> Result<AlignedBaseline> {
    let (c, t_len) = baseline.shape();
    let mut data = Array2::<f64>::zeros((c, t_len));
    for i in 0..c {
        let row = baseline.lead(i).to_vec();
        let rotated = rotate_row(&row, shifts[i]);
        for (k, v) in rotated.into_iter().enumerate() {
            data[(i, k)] = v;
        }
    }
    let aligned =
        LeadTimeMatrix::new(data, baseline.lead_names().to_vec(), baseline.sample_rate_hz())?;
    Ok(AlignedBaseline {
        baseline: aligned,
        shift_per_lead: shifts,
        score_per_lead: scores,
        period_samples: period,
    })
}

/// Selects, per lead, the circular shift of the baseline nearest to the
/// target (maximal |inner product| over shifts in `[0, period)`), and
/// returns the re-indexed baseline.
pub fn align_baseline(
    baseline: &LeadTimeMatrix,
    target: &LeadTimeMatrix,
    period: usize,
) -> Result<AlignedBaseline> {
    validate_alignment_inputs(baseline, target, period)?;
    let c = baseline.num_leads();
    let mut shifts = Vec::with_capacity(c);
    let mut scores = Vec::with_capacity(c);
    for i in 0..c {
        let t_row = target.lead(i).to_vec();
        let b_row = baseline.lead(i).to_vec();
        let n = circular_inner_products(&t_row, &b_row, period);
        let (s, mag) = best_shift(&n);
        shifts.push(s);
        scores.push(mag);
    }
    build_aligned(baseline, shifts, scores, period)
}

/// Like [`align_baseline`], but picks one shift shared by all leads: the
/// maximizer of the summed per-lead |inner product|. Leads stay in cardiac
/// phase with each other at the cost of per-lead artifact robustness.
pub fn align_baseline_shared(
    baseline: &LeadTimeMatrix,
    target: &LeadTimeMatrix,
    period: usize,
) -> Result<AlignedBaseline> {
    validate_alignment_inputs(baseline, target, period)?;
    let c = baseline.num_leads();
    let mut per_lead: Vec<Vec<f64>> = Vec::with_capacity(c);
    for i in 0..c {
        let t_row = target.lead(i).to_vec();
        let b_row = baseline.lead(i).to_vec();
        per_lead.push(circular_inner_products(&t_row, &b_row, period));
    }
    let combined: Vec<f64> = (0..period)
        .map(|p| per_lead.iter().map(|n| n[p].abs()).sum())
        .collect();
    let (s, _) = best_shift(&combined);
    let shifts = vec![s; c];
    let scores = per_lead.iter().map(|n| n[s].abs()).collect();
    build_aligned(baseline, shifts, scores, period)
}
