//! Differentiable scalar-output models with exact analytic input gradients.
//!
//! Models map a C×T segment to a scalar: either a linear functional of the
//! matrix or a dense multi-layer perceptron over the flattened (lead-major)
//! input, with the output taken from a selected class logit. Gradients are
//! exact backpropagation; [`fd_gradient`] provides the central-difference
//! oracle used to verify them.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::LeadTimeMatrix;

/// Elementwise nonlinearity of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the preactivation. The relu derivative at
    /// exactly zero is defined as 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidModel(format!("unknown activation `{other}`"))),
        }
    }
}

/// One dense layer: `a = act(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.nrows() {
            return Err(Error::InvalidModel(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weights.nrows()
            )));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidModel(
                "layer parameters must be finite".to_string(),
            ));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Whether the model reports the selected class's raw logit or its softmax
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    #[default]
    Logit,
    SoftmaxProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Mlp,
}

/// A scalar-valued differentiable function of a C×T segment.
///
/// Implemented by [`DifferentiableModel`]; tests implement it for closed-form
/// functions to provide independent oracles.
pub trait Differentiable {
    /// Expected input shape (C, T).
    fn input_shape(&self) -> (usize, usize);

    /// F(x) for a raw C×T matrix.
    fn value(&self, x: &ArrayView2<'_, f64>) -> f64;

    /// Exact ∇F(x), same shape as the input.
    fn grad(&self, x: &ArrayView2<'_, f64>) -> Array2<f64>;
}

/// A loadable model: a linear functional or a dense MLP stack.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiableModel {
    kind: ModelKind,
    input_shape: (usize, usize),
    class_index: usize,
    output_mode: OutputMode,
    layers: Vec<DenseLayer>,
}

impl DifferentiableModel {
    /// Linear model `F(x) = <W, x> + b` stored as a single identity dense
    /// layer over the flattened input.
    pub fn linear(weights: Array2<f64>, bias: f64) -> Result<Self> {
        let (c, t) = weights.dim();
        if !bias.is_finite() {
            return Err(Error::InvalidModel("bias must be finite".to_string()));
        }
        let flat: Vec<f64> = weights.iter().cloned().collect();
        let layer = DenseLayer::new(
            Array2::from_shape_vec((1, c * t), flat)
                .expect("flattened weight row always well-shaped"),
            Array1::from_vec(vec![bias]),
            Activation::Identity,
        )?;
        Ok(Self {
            kind: ModelKind::Linear,
            input_shape: (c, t),
            class_index: 0,
            output_mode: OutputMode::Logit,
            layers: vec![layer],
        })
    }

    /// Dense MLP over the flattened (lead-major) input.
    pub fn mlp(
        input_shape: (usize, usize),
        layers: Vec<DenseLayer>,
        class_index: usize,
    ) -> Result<Self> {
        let (c, t) = input_shape;
        if c == 0 || t == 0 {
            return Err(Error::InvalidModel("input shape must be non-empty".to_string()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidModel("model needs at least one layer".to_string()));
        }
        let mut dim = c * t;
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_dim() != dim {
                return Err(Error::InvalidModel(format!(
                    "layer {i} expects input dim {}, previous stage provides {dim}",
                    layer.input_dim()
                )));
            }
            dim = layer.output_dim();
        }
        if class_index >= dim {
            return Err(Error::InvalidModel(format!(
                "class index {class_index} out of range for {dim} outputs"
            )));
        }
        Ok(Self {
            kind: ModelKind::Mlp,
            input_shape,
            class_index,
            output_mode: OutputMode::Logit,
            layers,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").output_dim()
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    pub fn with_output_mode(mut self, mode: OutputMode) -> Self {
        self.output_mode = mode;
        self
    }

    pub fn with_class_index(mut self, class_index: usize) -> Result<Self> {
        if class_index >= self.output_dim() {
            return Err(Error::InvalidModel(format!(
                "class index {class_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        self.class_index = class_index;
        Ok(self)
    }

    fn flatten(x: &ArrayView2<'_, f64>) -> Array1<f64> {
        Array1::from_iter(x.iter().cloned())
    }

    /// Forward pass keeping preactivations and activations for backprop.
    fn trace(&self, input: Array1<f64>) -> (Vec<Array1<f64>>, Vec<Array1<f64>>) {
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for layer in &self.layers {
            let z = layer.weights.dot(acts.last().expect("non-empty")) + &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            preacts.push(z);
            acts.push(a);
        }
        (preacts, acts)
    }

    fn softmax(logits: &Array1<f64>) -> Array1<f64> {
        let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps = logits.mapv(|v| (v - max).exp());
        let sum = exps.sum();
        exps / sum
    }

    /// Boolean relu gates (preactivation > 0) concatenated over all relu
    /// layers, used by gradient verification to exclude kink coordinates.
    pub fn relu_gates(&self, x: &ArrayView2<'_, f64>) -> Vec<bool> {
        let (preacts, _) = self.trace(Self::flatten(x));
        let mut gates = Vec::new();
        for (layer, z) in self.layers.iter().zip(&preacts) {
            if layer.activation == Activation::Relu {
                gates.extend(z.iter().map(|&v| v > 0.0));
            }
        }
        gates
    }
}

impl Differentiable for DifferentiableModel {
    fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    fn value(&self, x: &ArrayView2<'_, f64>) -> f64 {
        let (_, acts) = self.trace(Self::flatten(x));
        let out = acts.last().expect("non-empty");
        match self.output_mode {
            OutputMode::Logit => out[self.class_index],
            OutputMode::SoftmaxProbability => Self::softmax(out)[self.class_index],
        }
    }

    fn grad(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        let (preacts, acts) = self.trace(Self::flatten(x));
        let out = acts.last().expect("non-empty");
        // Seed: derivative of the reported scalar w.r.t. the output vector.
        let mut da = match self.output_mode {
            OutputMode::Logit => {
                let mut seed = Array1::zeros(out.len());
                seed[self.class_index] = 1.0;
                seed
            }
            OutputMode::SoftmaxProbability => {
                let p = Self::softmax(out);
                let pk = p[self.class_index];
                let mut seed = p.mapv(|pj| -pk * pj);
                seed[self.class_index] += pk;
                seed
            }
        };
        for (layer, z) in self.layers.iter().zip(&preacts).rev() {
            let dz = Array1::from_iter(
                da.iter()
                    .zip(z.iter())
                    .map(|(&g, &zv)| g * layer.activation.derivative(zv)),
            );
            da = layer.weights.t().dot(&dz);
        }
        let (c, t) = self.input_shape;
        Array2::from_shape_vec((c, t), da.to_vec()).expect("gradient matches input size")
    }
}

/// Per-(lead, time) gradient of a model at one point; finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    data: Array2<f64>,
}

impl GradientField {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

fn check_shape<M: Differentiable + ?Sized>(m: &M, x: &LeadTimeMatrix) -> Result<()> {
    if m.input_shape() != x.shape() {
        let (er, ec) = m.input_shape();
        let (r, c) = x.shape();
        return Err(Error::ShapeMismatch {
            expected_rows: er,
            expected_cols: ec,
            rows: r,
            cols: c,
        });
    }
    Ok(())
}

/// F(x).
pub fn forward<M: Differentiable + ?Sized>(m: &M, x: &LeadTimeMatrix) -> Result<f64> {
    check_shape(m, x)?;
    Ok(m.value(&x.data()))
}

/// Exact backpropagated ∇F(x).
pub fn gradient<M: Differentiable + ?Sized>(m: &M, x: &LeadTimeMatrix) -> Result<GradientField> {
    check_shape(m, x)?;
    GradientField::new(m.grad(&x.data()))
}

/// Central-difference gradient oracle: `(F(x+h·e) − F(x−h·e)) / 2h` per
/// coordinate. Independent of the backpropagation path.
pub fn fd_gradient<M: Differentiable + ?Sized>(
    m: &M,
    x: &LeadTimeMatrix,
    h: f64,
) -> Result<GradientField> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep);
    }
    check_shape(m, x)?;
    let mut work = x.data().to_owned();
    let (c, t) = work.dim();
    let mut out = Array2::<f64>::zeros((c, t));
    for i in 0..c {
        for j in 0..t {
            let original = work[(i, j)];
            work[(i, j)] = original + h;
            let fp = m.value(&work.view());
            work[(i, j)] = original - h;
            let fm = m.value(&work.view());
            work[(i, j)] = original;
            out[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    GradientField::new(out)
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kind: String,
    input_shape: [usize; 2],
    #[serde(default)]
    class_index: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: String,
}

impl DifferentiableModel {
    /// Parses the JSON weight document:
    /// `{"kind", "input_shape", "class_index", "layers": [{"w", "b", "act"}]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (li, layer) in doc.layers.iter().enumerate() {
            let rows = layer.w.len();
            let cols = layer.w.first().map(|r| r.len()).unwrap_or(0);
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidModel(format!("layer {li} has empty weights")));
            }
            if layer.w.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidModel(format!(
                    "layer {li} weight rows have unequal lengths"
                )));
            }
            let flat: Vec<f64> = layer.w.iter().flatten().cloned().collect();
            layers.push(DenseLayer::new(
                Array2::from_shape_vec((rows, cols), flat)
                    .expect("checked rectangular"),
                Array1::from_vec(layer.b.clone()),
                Activation::parse(&layer.act)?,
            )?);
        }
        let shape = (doc.input_shape[0], doc.input_shape[1]);
        match doc.kind.as_str() {
            "linear" => {
                if layers.len() != 1
                    || layers[0].output_dim() != 1
                    || layers[0].activation != Activation::Identity
                {
                    return Err(Error::InvalidModel(
                        "linear kind requires a single identity layer with one output"
                            .to_string(),
                    ));
                }
                let mut model = Self::mlp(shape, layers, doc.class_index)?;
                model.kind = ModelKind::Linear;
                Ok(model)
            }
            "mlp" => Self::mlp(shape, layers, doc.class_index),
            other => Err(Error::InvalidModel(format!("unknown kind `{other}`"))),
        }
    }

    pub fn to_json_string(&self) -> String {
        let doc = ModelDoc {
            kind: match self.kind {
                ModelKind::Linear => "linear".to_string(),
                ModelKind::Mlp => "mlp".to_string(),
            },
            input_shape: [self.input_shape.0, self.input_shape.1],
            class_index: self.class_index,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    w: l.weights
                        .rows()
                        .into_iter()
                        .map(|r| r.to_vec())
                        .collect(),
                    b: l.bias.to_vec(),
                    act: l.activation.name().to_string(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn ltm(rows: Vec<Vec<f64>>) -> LeadTimeMatrix {
        let c = rows.len();
        let t = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        LeadTimeMatrix::with_default_names(Array2::from_shape_vec((c, t), flat).unwrap(), 512.0)
            .unwrap()
    }

    /// Test-only closed-form model: F(x) = Σ x². Gradient 2x.
    struct SquareModel(usize, usize);

    impl Differentiable for SquareModel {
        fn input_shape(&self) -> (usize, usize) {
            (self.0, self.1)
        }
        fn value(&self, x: &ArrayView2<'_, f64>) -> f64 {
            x.iter().map(|v| v * v).sum()
        }
        fn grad(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
            x.mapv(|v| 2.0 * v)
        }
    }

    #[test]
    fn linear_forward_is_dot_product() {
        let m = DifferentiableModel::linear(array![[1.0, 1.0, 1.0]], 0.0).unwrap();
        let x = ltm(vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(forward(&m, &x).unwrap(), 6.0);
    }

    #[test]
    fn linear_at_zero_is_bias() {
        let m = DifferentiableModel::linear(array![[3.0, -2.0, 0.5]], 1.25).unwrap();
        let x = ltm(vec![vec![0.0, 0.0, 0.0]]);
        assert_eq!(forward(&m, &x).unwrap(), 1.25);
    }

    #[test]
    fn identity_mlp_reduces_to_linear() {
        let w = array![[2.0, -1.0, 0.5]];
        let linear = DifferentiableModel::linear(w.clone(), 0.75).unwrap();
        let mlp = DifferentiableModel::mlp(
            (1, 3),
            vec![DenseLayer::new(w, Array1::from_vec(vec![0.75]), Activation::Identity).unwrap()],
            0,
        )
        .unwrap();
        let x = ltm(vec![vec![0.2, -0.4, 1.0]]);
        assert_eq!(forward(&linear, &x).unwrap(), forward(&mlp, &x).unwrap());
    }

    #[test]
    fn linear_gradient_is_weight_matrix() {
        let w = array![[2.0, -1.0], [0.5, 4.0]];
        let m = DifferentiableModel::linear(w.clone(), 3.0).unwrap();
        for x in [
            ltm(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
            ltm(vec![vec![5.0, -3.0], vec![2.0, 7.0]]),
        ] {
            let g = gradient(&m, &x).unwrap();
            assert_eq!(g.data(), w.view());
        }
    }

    #[test]
    fn square_model_gradient_analytic() {
        let m = SquareModel(1, 2);
        let x = ltm(vec![vec![1.0, 1.0]]);
        let g = gradient(&m, &x).unwrap();
        assert_eq!(g.data(), array![[2.0, 2.0]].view());
    }

    #[test]
    fn square_model_fd_matches() {
        let m = SquareModel(1, 2);
        let x = ltm(vec![vec![1.0, 1.0]]);
        let g = fd_gradient(&m, &x, 1e-4).unwrap();
        assert_abs_diff_eq!(g.data()[(0, 0)], 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(g.data()[(0, 1)], 2.0, epsilon = 1e-7);
    }

    #[test]
    fn fd_on_linear_is_exact_to_rounding() {
        let w = array![[2.0, -1.0, 0.5]];
        let m = DifferentiableModel::linear(w.clone(), 0.0).unwrap();
        let x = ltm(vec![vec![0.3, 0.7, -0.2]]);
        let g = fd_gradient(&m, &x, 0.01).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(g.data()[(0, j)], w[(0, j)], epsilon = 1e-9);
        }
    }

    #[test]
    fn fd_rejects_bad_step() {
        let m = SquareModel(1, 2);
        let x = ltm(vec![vec![1.0, 1.0]]);
        assert!(matches!(fd_gradient(&m, &x, 0.0), Err(Error::InvalidStep)));
        assert!(matches!(
            fd_gradient(&m, &x, -1e-3),
            Err(Error::InvalidStep)
        ));
    }

    #[test]
    fn relu_kink_uses_zero_side() {
        let m = DifferentiableModel::mlp(
            (1, 2),
            vec![DenseLayer::new(
                array![[1.0, 1.0]],
                Array1::from_vec(vec![0.0]),
                Activation::Relu,
            )
            .unwrap()],
            0,
        )
        .unwrap();
        let x = ltm(vec![vec![0.0, 0.0]]);
        let g = gradient(&m, &x).unwrap();
        assert_eq!(g.data(), array![[0.0, 0.0]].view());
    }

    #[test]
    fn tanh_mlp_gradient_matches_fd() {
        let m = DifferentiableModel::mlp(
            (2, 3),
            vec![
                DenseLayer::new(
                    array![
                        [0.1, -0.2, 0.3, 0.05, -0.4, 0.25],
                        [-0.3, 0.15, 0.2, -0.1, 0.35, -0.05],
                    ],
                    Array1::from_vec(vec![0.01, -0.02]),
                    Activation::Tanh,
                )
                .unwrap(),
                DenseLayer::new(
                    array![[0.7, -0.6]],
                    Array1::from_vec(vec![0.1]),
                    Activation::Identity,
                )
                .unwrap(),
            ],
            0,
        )
        .unwrap();
        let x = ltm(vec![vec![0.4, -0.1, 0.9], vec![0.2, 0.8, -0.5]]);
        let g = gradient(&m, &x).unwrap();
        let fd = fd_gradient(&m, &x, 1e-5).unwrap();
        for (a, b) in g.data().iter().zip(fd.data().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn softmax_probability_gradient_matches_fd() {
        let m = DifferentiableModel::mlp(
            (1, 2),
            vec![DenseLayer::new(
                array![[0.8, -0.3], [-0.2, 0.9], [0.1, 0.4]],
                Array1::from_vec(vec![0.0, 0.1, -0.1]),
                Activation::Identity,
            )
            .unwrap()],
            1,
        )
        .unwrap()
        .with_output_mode(OutputMode::SoftmaxProbability);
        let x = ltm(vec![vec![0.6, -0.4]]);
        let g = gradient(&m, &x).unwrap();
        let fd = fd_gradient(&m, &x, 1e-6).unwrap();
        for (a, b) in g.data().iter().zip(fd.data().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn json_roundtrip_preserves_model() {
        let m = DifferentiableModel::mlp(
            (1, 2),
            vec![
                DenseLayer::new(
                    array![[0.5, -0.25], [1.5, 0.75]],
                    Array1::from_vec(vec![0.0, -1.0]),
                    Activation::Tanh,
                )
                .unwrap(),
                DenseLayer::new(
                    array![[1.0, 2.0]],
                    Array1::from_vec(vec![0.5]),
                    Activation::Identity,
                )
                .unwrap(),
            ],
            0,
        )
        .unwrap();
        let text = m.to_json_string();
        for field in ["\"kind\"", "\"input_shape\"", "\"class_index\"", "\"layers\"", "\"w\"", "\"b\"", "\"act\""] {
            assert!(text.contains(field), "missing {field} in {text}");
        }
        let back = DifferentiableModel::from_json_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_bad_chain() {
        let text = r#"{
            "kind": "mlp",
            "input_shape": [1, 2],
            "class_index": 0,
            "layers": [{"w": [[0.1, 0.2, 0.3]], "b": [0.0], "act": "tanh"}]
        }"#;
        assert!(matches!(
            DifferentiableModel::from_json_str(text),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn forward_shape_mismatch() {
        let m = DifferentiableModel::linear(array![[1.0, 1.0, 1.0]], 0.0).unwrap();
        let x = ltm(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            forward(&m, &x),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
