//! Integrated-gradients attribution along the straight-line path from an
//! aligned baseline to a target segment.
//!
//! The path integral is discretized with a trapezoid (default) or midpoint
//! rule. Interpolation points and the quadrature reduction are evaluated in
//! a direction-symmetric order, so swapping target and baseline negates
//! every score bit for bit under the trapezoid scheme. The per-node gradient
//! fields are shared with the pairwise lead-alignment scores to keep both
//! quadratures identical.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::model::Differentiable;
use crate::signal::LeadTimeMatrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Quadrature rule for the path integral over α ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Nodes at j/m including both endpoints; endpoint weight halved.
    #[default]
    Trapezoid,
    /// Nodes at (j + 1/2)/m.
    Midpoint,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Trapezoid => "trapezoid",
            Scheme::Midpoint => "midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(Scheme::Trapezoid),
            "midpoint" => Ok(Scheme::Midpoint),
            other => Err(Error::InvalidConfig(format!(
                "unknown quadrature scheme `{other}`"
            ))),
        }
    }

    fn node_count(self, steps: usize) -> usize {
        match self {
            Scheme::Trapezoid => steps + 1,
            Scheme::Midpoint => steps,
        }
    }

    /// Interpolation weights (baseline, target) of node `j`. Both weights
    /// are quotients of exact small integers, so the node set is closed
    /// under the swap j -> (last - j) with weights exchanged.
    fn node_weights(self, steps: usize, j: usize) -> (f64, f64) {
        let m = steps as f64;
        match self {
            Scheme::Trapezoid => (((steps - j) as f64) / m, (j as f64) / m),
            Scheme::Midpoint => {
                let denom = 2.0 * m;
                (
                    ((2 * (steps - 1 - j) + 1) as f64) / denom,
                    ((2 * j + 1) as f64) / denom,
                )
            }
        }
    }
}

/// The straight-line integration path: baseline, target, step count, and
/// quadrature scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    baseline: LeadTimeMatrix,
    target: LeadTimeMatrix,
    steps: usize,
    scheme: Scheme,
}

impl PathSpec {
    pub fn new(
        baseline: LeadTimeMatrix,
        target: LeadTimeMatrix,
        steps: usize,
        scheme: Scheme,
    ) -> Result<Self> {
        baseline.same_shape(&target)?;
        if baseline.sample_rate_hz() != target.sample_rate_hz() {
            return Err(Error::SampleRateMismatch {
                a: baseline.sample_rate_hz(),
                b: target.sample_rate_hz(),
            });
        }
        if steps < 1 {
            return Err(Error::InvalidSteps);
        }
        Ok(Self {
            baseline,
            target,
            steps,
            scheme,
        })
    }

    pub fn baseline(&self) -> &LeadTimeMatrix {
        &self.baseline
    }

    pub fn target(&self) -> &LeadTimeMatrix {
        &self.target
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

/// One term of the symmetric quadrature reduction: either a pair of nodes
/// sharing a weight, or a lone self-symmetric node.
enum ReduceStep {
    Pair(usize, usize, f64),
    Single(usize, f64),
}

fn reduction_plan(scheme: Scheme, steps: usize) -> Vec<ReduceStep> {
    let m = steps as f64;
    let mut plan = Vec::new();
    match scheme {
        Scheme::Trapezoid => {
            plan.push(ReduceStep::Pair(0, steps, 1.0 / (2.0 * m)));
            let mut j = 1;
            while j < steps - j {
                plan.push(ReduceStep::Pair(j, steps - j, 1.0 / m));
                j += 1;
            }
            if steps % 2 == 0 && steps >= 2 {
                plan.push(ReduceStep::Single(steps / 2, 1.0 / m));
            }
        }
        Scheme::Midpoint => {
            let mut j = 0;
            while j < steps - 1 - j {
                plan.push(ReduceStep::Pair(j, steps - 1 - j, 1.0 / m));
                j += 1;
            }
            if steps % 2 == 1 {
                plan.push(ReduceStep::Single(steps / 2, 1.0 / m));
            }
        }
    }
    plan
}

/// Gradient fields at every quadrature node of a path, plus the endpoint
/// model values. Built once and consumed by both the attribution map and
/// the pairwise alignment scores.
pub(crate) struct PathEvaluation {
    pub(crate) node_gradients: Vec<Array2<f64>>,
    pub(crate) f_target: f64,
    pub(crate) f_baseline: f64,
    steps: usize,
    scheme: Scheme,
}

impl PathEvaluation {
    pub(crate) fn evaluate<M>(model: &M, path: &PathSpec) -> Result<Self>
    where
        M: Differentiable + Sync + ?Sized,
    {
        let shape = path.target.shape();
        if model.input_shape() != shape {
            let (er, ec) = model.input_shape();
            return Err(Error::ShapeMismatch {
                expected_rows: er,
                expected_cols: ec,
                rows: shape.0,
                cols: shape.1,
            });
        }

        let f_target = model.value(&path.target.data());
        let f_baseline = model.value(&path.baseline.data());
        if !(f_target.is_finite() && f_baseline.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }

        let n_nodes = path.scheme.node_count(path.steps);
        let eval_node = |j: usize| -> Result<Array2<f64>> {
            let (wb, wt) = path.scheme.node_weights(path.steps, j);
            let mut point = Array2::<f64>::zeros(shape);
            Zip::from(&mut point)
                .and(path.baseline.data())
                .and(path.target.data())
                .for_each(|p, &b, &t| *p = wb * b + wt * t);
            let g = model.grad(&point.view());
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient);
            }
            Ok(g)
        };

        #[cfg(feature = "parallel")]
        let node_gradients: Vec<Array2<f64>> =
            (0..n_nodes).into_par_iter().map(eval_node).collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let node_gradients: Vec<Array2<f64>> =
            (0..n_nodes).map(eval_node).collect::<Result<_>>()?;

        Ok(Self {
            node_gradients,
            f_target,
            f_baseline,
            steps: path.steps,
            scheme: path.scheme,
        })
    }

    /// Quadrature combination of the node gradient fields (the matrix Q of
    /// path-averaged partials), accumulated in symmetric-pair order.
    pub(crate) fn integrate_fields(&self) -> Array2<f64> {
        let mut acc = Array2::<f64>::zeros(self.node_gradients[0].dim());
        for step in reduction_plan(self.scheme, self.steps) {
            match step {
                ReduceStep::Pair(a, b, w) => {
                    Zip::from(&mut acc)
                        .and(&self.node_gradients[a])
                        .and(&self.node_gradients[b])
                        .for_each(|o, &x, &y| *o += (x + y) * w);
                }
                ReduceStep::Single(a, w) => {
                    Zip::from(&mut acc)
                        .and(&self.node_gradients[a])
                        .for_each(|o, &x| *o += x * w);
                }
            }
        }
        acc
    }

    /// Quadrature combination of one scalar per node, using the same plan
    /// as [`integrate_fields`].
    pub(crate) fn integrate_scalars(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for step in reduction_plan(self.scheme, self.steps) {
            match step {
                ReduceStep::Pair(a, b, w) => acc += (values[a] + values[b]) * w,
                ReduceStep::Single(a, w) => acc += values[a] * w,
            }
        }
        acc
    }
}

/// Per-(lead, time) integrated-gradients scores with completeness
/// accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    scores: Array2<f64>,
    f_target: f64,
    f_baseline: f64,
    completeness_residual: f64,
    steps_used: usize,
}

impl AttributionMap {
    /// Rebuilds a map from stored scores and endpoint values, recomputing
    /// the residual. Used when re-loading serialized results.
    pub fn from_parts(
        scores: Array2<f64>,
        f_target: f64,
        f_baseline: f64,
        steps_used: usize,
    ) -> Result<Self> {
        if !scores.iter().all(|v| v.is_finite())
            || !f_target.is_finite()
            || !f_baseline.is_finite()
        {
            return Err(Error::NonFiniteInput);
        }
        let total: f64 = scores.iter().sum();
        Ok(Self {
            scores,
            f_target,
            f_baseline,
            completeness_residual: (f_target - f_baseline) - total,
            steps_used,
        })
    }

    pub fn scores(&self) -> ndarray::ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn f_target(&self) -> f64 {
        self.f_target
    }

    pub fn f_baseline(&self) -> f64 {
        self.f_baseline
    }

    /// `(f_target − f_baseline) − Σ scores`.
    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    pub fn steps_used(&self) -> usize {
        self.steps_used
    }
}

/// Computes IG scores: `(X − X′) ⊙ Q` with Q the quadrature approximation
/// of the path-averaged gradient.
pub fn integrated_gradients<M>(model: &M, path: &PathSpec) -> Result<AttributionMap>
where
    M: Differentiable + Sync + ?Sized,
{
    let pe = PathEvaluation::evaluate(model, path)?;
    attribution_from_evaluation(&pe, path)
}

pub(crate) fn attribution_from_evaluation(
    pe: &PathEvaluation,
    path: &PathSpec,
) -> Result<AttributionMap> {
    let q = pe.integrate_fields();
    let mut scores = Array2::<f64>::zeros(q.dim());
    Zip::from(&mut scores)
        .and(path.target.data())
        .and(path.baseline.data())
        .and(&q)
        .for_each(|s, &t, &b, &qv| *s = (t - b) * qv);
    let total: f64 = scores.iter().sum();
    Ok(AttributionMap {
        scores,
        f_target: pe.f_target,
        f_baseline: pe.f_baseline,
        completeness_residual: (pe.f_target - pe.f_baseline) - total,
        steps_used: path.steps,
    })
}

/// True iff `|residual| ≤ rel_tol · max(1, |f_target − f_baseline|)`.
pub fn completeness_check(a: &AttributionMap, rel_tol: f64) -> bool {
    a.completeness_residual.abs() <= rel_tol * f64::max(1.0, (a.f_target - a.f_baseline).abs())
}
