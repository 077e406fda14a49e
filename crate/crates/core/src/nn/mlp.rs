use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W` stored row-major (out × in).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    /// Uniform Glorot initialization, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self { inputs, outputs, weights, biases: vec![0.0; outputs], activation }
    }

    pub fn from_parts(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if inputs == 0 || outputs == 0 || weights.len() != inputs * outputs || biases.len() != outputs {
            return Err(NnError::Shape(format!(
                "layer {inputs}->{outputs} given {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("layer parameters".into()));
        }
        Ok(Self { inputs, outputs, weights, biases, activation })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            let pre = row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi);
            self.activation.apply(pre)
        }));
    }
}

/// Weight and bias gradients for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter gradients shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat-index access in the same order as [`Mlp::param`].
    pub fn get(&self, index: usize) -> f64 {
        *self.values().nth(index).expect("gradient index in range")
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|&v| v == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<(), NnError> {
        if !self.same_shape(other) {
            return Err(NnError::Shape("gradient shapes differ".into()));
        }
        self.values_mut().zip(other.values()).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn same_shape(&self, other: &Gradients) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.len() == b.weights.len() && a.biases.len() == b.biases.len())
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }
}

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Activations recorded by [`Mlp::forward`] for use by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    revision: u64,
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input at least")
    }
}

/// A feed-forward stack of dense layers.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    // Changes whenever parameters change, so caches from an older state are detectable.
    revision: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self { layers: self.layers.clone(), revision: fresh_revision() }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Shape("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Self { layers, revision: fresh_revision() })
    }

    /// Glorot-initialized network with layer widths `dims` (input first).
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self, NnError> {
        if dims.len() != activations.len() + 1 {
            return Err(NnError::Shape(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    /// Parameter by flat index: each layer's weights (row-major) then its biases.
    pub fn param(&self, index: usize) -> f64 {
        *self.params().nth(index).expect("parameter index in range")
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let slot = self
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
            .nth(index)
            .expect("parameter index in range");
        *slot = value;
        self.revision = fresh_revision();
    }

    /// Zeroes every weight and bias of one layer.
    pub fn zero_layer(&mut self, layer: usize) {
        let l = &mut self.layers[layer];
        l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v = 0.0);
        self.revision = fresh_revision();
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::Dimension { expected: self.input_dim(), found: input.len() });
        }
        Ok(())
    }

    /// Evaluates the network and records the activations needed by [`backward`](Self::backward).
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(activations.last().expect("non-empty"), &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite(format!("output of layer {i}")));
            }
            activations.push(out);
        }
        let output = activations.last().expect("non-empty").clone();
        Ok((output, ForwardCache { revision: self.revision, activations }))
    }

    /// Evaluation without keeping a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFinite(format!("output of layer {i}")));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Chain-rule gradients given `dL/d(output)`; returns parameter gradients
    /// and `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<(Gradients, Vec<f64>), NnError> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_accumulate(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`backward`](Self::backward) but adds into an existing gradient buffer.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>, NnError> {
        if cache.revision != self.revision || cache.activations.len() != self.layers.len() + 1 {
            return Err(NnError::StaleCache);
        }
        if output_grad.len() != self.output_dim() {
            return Err(NnError::Dimension { expected: self.output_dim(), found: output_grad.len() });
        }
        if !grads.matches(self) {
            return Err(NnError::Shape("gradient buffer does not match network".into()));
        }
        let mut upstream = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(y)
                .map(|(g, &out)| g * layer.activation.derivative_from_output(out))
                .collect();
            let lg = &mut grads.layers[l];
            let mut downstream = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                lg.biases[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let grow = &mut lg.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for i in 0..layer.inputs {
                    grow[i] += d * x[i];
                    downstream[i] += d * row[i];
                }
            }
            upstream = downstream;
        }
        Ok(upstream)
    }

    /// Applies `f(param, grad)` to every parameter in place.
    pub(crate) fn update_params(&mut self, grads: &Gradients, mut f: impl FnMut(usize, f64, f64) -> f64) {
        let mut k = 0;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, &gv) in layer.weights.iter_mut().zip(&g.weights).chain(layer.biases.iter_mut().zip(&g.biases)) {
                *p = f(k, *p, gv);
                k += 1;
            }
        }
        self.revision = fresh_revision();
    }

    pub(crate) fn shape_matches(&self, grads: &Gradients) -> bool {
        grads.matches(self)
    }
}
