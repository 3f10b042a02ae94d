use serde::{Deserialize, Serialize};

use super::BaseClassifier;
use crate::error::{Error, Result};
use crate::rng::SeededStream;
use crate::scalar::Scalar;

const FORMAT_VERSION: u32 = 1;

/// One affine layer; `w` is row-major with one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T> {
    pub w: Vec<Vec<T>>,
    pub b: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { w: vec![vec![T::zero(); inputs]; outputs], b: vec![T::zero(); outputs] }
    }

    pub fn inputs(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct MlpDocument<T> {
    version: u32,
    layers: Vec<Layer<T>>,
}

/// Fully connected network: ReLU on hidden layers, raw logits out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "MlpDocument<T>", into = "MlpDocument<T>")]
pub struct MlpModel<T: Scalar> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> TryFrom<MlpDocument<T>> for MlpModel<T> {
    type Error = Error;

    fn try_from(doc: MlpDocument<T>) -> Result<Self> {
        if doc.version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported model version {}", doc.version)));
        }
        MlpModel::new(doc.layers)
    }
}

impl<T: Scalar> From<MlpModel<T>> for MlpDocument<T> {
    fn from(m: MlpModel<T>) -> Self {
        MlpDocument { version: FORMAT_VERSION, layers: m.layers }
    }
}

/// Per-layer activations recorded by [`MlpModel::forward_trace`].
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `inputs[l]` is the input of layer `l` (post-ReLU for l > 0).
    pub inputs: Vec<Vec<T>>,
    pub logits: Vec<T>,
}

/// Gradient storage shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn scale(&mut self, factor: T) {
        for g in self.values_mut() {
            *g = *g * factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a = *a + b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    /// Flattened in the same order as [`MlpModel::params`].
    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| l.w.iter().flatten().chain(l.b.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().flatten().chain(l.b.iter_mut()))
    }
}

impl<T: Scalar> MlpModel<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.outputs() == 0 || l.w.len() != l.outputs() || l.inputs() == 0 {
                return Err(Error::InvalidConfig(format!("layer {i} has an empty or ragged shape")));
            }
            if l.w.iter().any(|row| row.len() != l.inputs()) {
                return Err(Error::InvalidConfig(format!("layer {i} weight rows differ in length")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::InvalidConfig(format!(
                    "layer {i} expects {} inputs but layer {} has {} outputs",
                    l.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
            let finite = l.w.iter().flatten().chain(&l.b).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidConfig(format!("layer {i} has non-finite parameters")));
            }
        }
        if layers.last().map_or(0, Layer::outputs) < 2 {
            return Err(Error::InvalidConfig("model needs at least two output classes".into()));
        }
        Ok(MlpModel { layers })
    }

    /// All-zero parameters for the given layer sizes `[d, h1, ..., K]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig("layer sizes need at least [input, classes]".into()));
        }
        MlpModel::new(sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect())
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`, seeded.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = MlpModel::zeros(sizes)?;
        let mut cursor = SeededStream::new(seed, 0x1417).cursor(0);
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            for v in layer.w.iter_mut().flatten().chain(layer.b.iter_mut()) {
                *v = T::of(bound * (2.0 * cursor.next_open01() - 1.0));
            }
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Layer::outputs));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Flattened parameters: per layer, weights row by row, then biases.
    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| l.w.iter().flatten().chain(l.b.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().flatten().chain(l.b.iter_mut()))
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients { layers: self.layers.iter().map(|l| Layer::zeros(l.inputs(), l.outputs())).collect() }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        let d = self.layers[0].inputs();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut h = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            relu_in_place(&mut h);
            h = layer.apply(&h);
        }
        Ok(h)
    }

    /// Forward pass keeping every layer input for backpropagation.
    pub fn forward_trace(&self, x: &[T]) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.apply(&h);
            inputs.push(h);
            if i + 1 < self.layers.len() {
                relu_in_place(&mut out);
            }
            h = out;
        }
        Ok(Trace { inputs, logits: h })
    }

    /// Accumulates into `grads` the parameter gradient of a loss whose
    /// gradient with respect to the logits of `trace` is `grad_logits`.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &[T], grads: &mut Gradients<T>) {
        let mut delta = grad_logits.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                g.b[o] = g.b[o] + d;
                for (gw, &a) in g.w[o].iter_mut().zip(input) {
                    *gw = *gw + d * a;
                }
            }
            if l == 0 {
                break;
            }
            // Input of layer l is ReLU output of layer l - 1; zero where inactive.
            let mut next = vec![T::zero(); layer.inputs()];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (n, &w) in next.iter_mut().zip(&layer.w[o]) {
                    *n = *n + d * w;
                }
            }
            for (n, &a) in next.iter_mut().zip(input) {
                if a <= T::zero() {
                    *n = T::zero();
                }
            }
            delta = next;
        }
    }

    /// Plain SGD step `p -= lr * g`.
    pub fn apply_step(&mut self, grads: &Gradients<T>, lr: T) {
        for (p, g) in self.params_mut().zip(grads.values()) {
            *p = *p - lr * g;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

impl<T: Scalar> BaseClassifier<T> for MlpModel<T> {
    fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::softmax;

    /// Straight-line re-evaluation of a 2-layer network, written out by hand.
    fn reference_forward(m: &MlpModel<f64>, x: &[f64]) -> Vec<f64> {
        let l0 = &m.layers()[0];
        let l1 = &m.layers()[1];
        let mut hidden = Vec::new();
        for j in 0..l0.outputs() {
            let mut s = l0.b[j];
            for i in 0..x.len() {
                s += l0.w[j][i] * x[i];
            }
            hidden.push(if s > 0.0 { s } else { 0.0 });
        }
        let mut out = Vec::new();
        for k in 0..l1.outputs() {
            let mut s = l1.b[k];
            for j in 0..hidden.len() {
                s += l1.w[k][j] * hidden[j];
            }
            out.push(s);
        }
        out
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let m = MlpModel::<f64>::zeros(&[3, 5, 4]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_layer() {
        let d = 3;
        let w = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let m = MlpModel::new(vec![Layer { w, b: vec![0.0; d] }]).unwrap();
        assert_eq!(m.forward(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_reference_arithmetic() {
        let m = MlpModel::<f64>::init(&[4, 7, 3], 99).unwrap();
        for x in [[0.3, -1.2, 2.0, 0.0], [1.0, 1.0, 1.0, 1.0], [-3.0, 0.5, 0.25, 9.0]] {
            let a = m.forward(&x).unwrap();
            let b = reference_forward(&m, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
            assert!((softmax(&a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::<f64>::init(&[2, 4, 2], 1).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn init_respects_fan_in_bound_and_seed() {
        let a = MlpModel::<f64>::init(&[16, 8, 2], 5).unwrap();
        let b = MlpModel::<f64>::init(&[16, 8, 2], 5).unwrap();
        let c = MlpModel::<f64>::init(&[16, 8, 2], 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers()[0].w.iter().flatten().all(|v| v.abs() <= 0.25));
        assert_eq!(a.num_params(), 8 * 17 + 2 * 9);
        assert_eq!(a.params().count(), a.num_params());
    }

    #[test]
    fn json_format_and_round_trip() {
        let m = MlpModel::new(vec![Layer { w: vec![vec![1.0, 2.0], vec![3.0, 4.5]], b: vec![0.0, -1.0] }]).unwrap();
        let js = m.to_json().unwrap();
        assert_eq!(js, r#"{"version":1,"layers":[{"w":[[1.0,2.0],[3.0,4.5]],"b":[0.0,-1.0]}]}"#);
        assert_eq!(MlpModel::<f64>::from_json(&js).unwrap(), m);
        let f32_model = MlpModel::<f32>::from_json(&js).unwrap();
        assert_eq!(f32_model.forward(&[1.0, 1.0]).unwrap(), vec![3.0, 6.5]);
        assert!(MlpModel::<f64>::from_json(&js.replace("\"version\":1", "\"version\":2")).is_err());
        assert!(MlpModel::<f64>::from_json(r#"{"version":1,"layers":[{"w":[[1.0]],"b":[0.0,1.0]}]}"#).is_err());
    }

    #[test]
    fn rejects_single_class_and_mismatched_layers() {
        assert!(MlpModel::<f64>::zeros(&[2, 1]).is_err());
        let l0 = Layer::<f64>::zeros(2, 3);
        let l1 = Layer::<f64>::zeros(4, 2);
        assert!(MlpModel::new(vec![l0, l1]).is_err());
    }
}
