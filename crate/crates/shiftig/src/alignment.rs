//! Pairwise lead alignment scores, normalized edge scores, and regime
//! labels.
//!
//! The alignment score of a lead pair integrates, along the attribution
//! path, the inner product between the gradient difference and the
//! deviation difference of the two leads. It is symmetric by construction
//! and reuses the exact per-node gradient evaluations of the attribution
//! map so the two quadratures cannot drift apart. Edge scores rescale the
//! alignment matrix so that the pairwise total equals the model's output
//! change; when the pairwise total cancels there is no stable rescaling and
//! the edge scores are refused.

use ndarray::Array2;

use crate::attribution::{AttributionMap, PathEvaluation, PathSpec};
use crate::error::{Error, Result};
use crate::model::Differentiable;

/// Relative tolerance below which the pairwise alignment total counts as
/// degenerate.
pub const DEGENERACY_EPSILON: f64 = 1e-9;

/// Default fraction of the peak |W| under which a pair is labeled
/// near-zero.
pub const DEFAULT_REGIME_THRESHOLD: f64 = 0.05;

/// Symmetric C×C matrix of pairwise alignment scores with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    w: Array2<f64>,
    steps_used: usize,
}

impl AlignmentMatrix {
    /// Wraps an existing symmetric zero-diagonal matrix.
    pub fn from_matrix(w: Array2<f64>, steps_used: usize) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() < 2 {
            return Err(Error::InvalidConfig(format!(
                "alignment matrix must be square with at least 2 leads, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for i in 0..w.nrows() {
            if w[(i, i)] != 0.0 {
                return Err(Error::InvalidConfig(
                    "alignment matrix diagonal must be zero".to_string(),
                ));
            }
            for j in 0..i {
                if w[(i, j)] != w[(j, i)] {
                    return Err(Error::InvalidConfig(
                        "alignment matrix must be symmetric".to_string(),
                    ));
                }
            }
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { w, steps_used })
    }

    pub fn matrix(&self) -> ndarray::ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn num_leads(&self) -> usize {
        self.w.nrows()
    }

    pub fn steps_used(&self) -> usize {
        self.steps_used
    }

    /// Sum over unique pairs (i < j).
    pub fn pairwise_sum(&self) -> f64 {
        let c = self.num_leads();
        let mut acc = 0.0;
        for i in 0..c {
            for j in i + 1..c {
                acc += self.w[(i, j)];
            }
        }
        acc
    }

    fn pairwise_max_abs(&self) -> f64 {
        let c = self.num_leads();
        let mut m = 0.0_f64;
        for i in 0..c {
            for j in i + 1..c {
                m = m.max(self.w[(i, j)].abs());
            }
        }
        m
    }
}

/// Alignment scores rescaled so the pairwise total equals `delta_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScoreMatrix {
    e: Array2<f64>,
    lambda: f64,
    delta_f: f64,
}

impl EdgeScoreMatrix {
    pub fn matrix(&self) -> ndarray::ArrayView2<'_, f64> {
        self.e.view()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }
}

/// Qualitative label of a lead pair's alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    Positive,
    Negative,
    NearZero,
}

impl RegimeLabel {
    pub fn name(self) -> &'static str {
        match self {
            RegimeLabel::Positive => "positive",
            RegimeLabel::Negative => "negative",
            RegimeLabel::NearZero => "near_zero",
        }
    }
}

/// Per-pair regime labels with the threshold that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLabelMatrix {
    labels: Array2<RegimeLabel>,
    threshold: f64,
}

impl RegimeLabelMatrix {
    pub fn labels(&self) -> ndarray::ArrayView2<'_, RegimeLabel> {
        self.labels.view()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

pub(crate) fn alignment_from_evaluation(
    pe: &PathEvaluation,
    path: &PathSpec,
) -> Result<AlignmentMatrix> {
    let (c, t_len) = path.target().shape();
    if c < 2 {
        return Err(Error::InvalidConfig(
            "alignment scores need at least 2 leads".to_string(),
        ));
    }
    let target = path.target().data();
    let baseline = path.baseline().data();
    let mut w = Array2::<f64>::zeros((c, c));
    let mut node_values = vec![0.0; pe.node_gradients.len()];
    for i in 0..c {
        for j in i + 1..c {
            for (slot, g) in node_values.iter_mut().zip(&pe.node_gradients) {
                let mut inner = 0.0;
                for t in 0..t_len {
                    let dg = g[(i, t)] - g[(j, t)];
                    let dx = (target[(i, t)] - baseline[(i, t)])
                        - (target[(j, t)] - baseline[(j, t)]);
                    inner += dg * dx;
                }
                *slot = inner;
            }
            let value = pe.integrate_scalars(&node_values);
            w[(i, j)] = value;
            w[(j, i)] = value;
        }
    }
    Ok(AlignmentMatrix {
        w,
        steps_used: path.steps(),
    })
}

/// Pairwise alignment scores over the attribution path.
pub fn alignment_scores<M>(model: &M, path: &PathSpec) -> Result<AlignmentMatrix>
where
    M: Differentiable + Sync + ?Sized,
{
    let pe = PathEvaluation::evaluate(model, path)?;
    alignment_from_evaluation(&pe, path)
}

/// Computes the attribution map and the alignment matrix from a single set
/// of path gradient evaluations.
pub fn attribute_with_alignment<M>(
    model: &M,
    path: &PathSpec,
) -> Result<(AttributionMap, AlignmentMatrix)>
where
    M: Differentiable + Sync + ?Sized,
{
    let pe = PathEvaluation::evaluate(model, path)?;
    let attribution = crate::attribution::attribution_from_evaluation(&pe, path)?;
    let alignment = alignment_from_evaluation(&pe, path)?;
    Ok((attribution, alignment))
}

/// Rescales alignment scores by `λ = (f_target − f_baseline) / Σ_{i<j} W`.
///
/// Fails with [`Error::DegenerateAlignment`] when the pairwise total
/// vanishes (relative to the largest pair) and no stable normalization
/// exists.
pub fn edge_scores(
    w: &AlignmentMatrix,
    f_target: f64,
    f_baseline: f64,
) -> Result<EdgeScoreMatrix> {
    let total = w.pairwise_sum();
    let max_abs = w.pairwise_max_abs();
    if max_abs == 0.0 || total.abs() <= DEGENERACY_EPSILON * max_abs {
        return Err(Error::DegenerateAlignment);
    }
    let delta_f = f_target - f_baseline;
    let lambda = delta_f / total;
    Ok(EdgeScoreMatrix {
        e: w.matrix().mapv(|v| lambda * v),
        lambda,
        delta_f,
    })
}

/// Labels each pair positive/negative/near-zero; a pair is near-zero when
/// its |W| is at most `threshold_frac` of the largest pair.
pub fn classify_regimes(
    w: &AlignmentMatrix,
    threshold_frac: f64,
) -> Result<RegimeLabelMatrix> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::InvalidThreshold(threshold_frac));
    }
    let max_abs = w.pairwise_max_abs();
    let cutoff = threshold_frac * max_abs;
    let labels = w.matrix().mapv(|v| {
        if v.abs() <= cutoff {
            RegimeLabel::NearZero
        } else if v > 0.0 {
            RegimeLabel::Positive
        } else {
            RegimeLabel::Negative
        }
    });
    Ok(RegimeLabelMatrix {
        labels,
        threshold: threshold_frac,
    })
}

/// The unordered pair with the smallest |W| (the least aligned, most
/// complementary leads); ties break lexicographically.
pub fn complementary_pair(w: &AlignmentMatrix) -> (usize, usize) {
    let c = w.num_leads();
    let mut best = (0usize, 1usize);
    let mut best_mag = f64::INFINITY;
    for i in 0..c {
        for j in i + 1..c {
            let mag = w.matrix()[(i, j)].abs();
            if mag < best_mag {
                best = (i, j);
                best_mag = mag;
            }
        }
    }
    best
}
