use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::seed;

/// Anything that can be integrated as a time-dependent vector field.
pub trait VectorField {
    fn sample_dim(&self) -> usize;
    fn cond_dim(&self) -> usize;
    fn velocity(&self, z: &[f64], cond: &[f64], t: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn id(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected layer, `rows` outputs by `cols` inputs, row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weight
                .chunks_exact(self.cols)
                .zip(&self.bias)
                .map(|(row, b)| dot(row, input) + b),
        );
    }
}

/// Dot product with eight interleaved partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    acc.iter().sum::<f64>() + tail
}

/// Architecture of a [`VectorFieldModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    /// Trailing condition inputs whose first-layer weights start at zero.
    /// The reward-prompt extension uses these so that a model trained without
    /// reward prompts is exactly invariant to them.
    #[serde(default)]
    pub disconnected_cond_inputs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 128],
            disconnected_cond_inputs: 0,
        }
    }
}

/// MLP vector field `u_t(z; θ)` over inputs `[z, cond, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldModel {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    sample_dim: usize,
    cond_dim: usize,
}

/// Gradient with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `acts[0]` is the network input, `acts[i]` the output of layer `i-1`.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl VectorFieldModel {
    /// Random initialisation with `N(0, 1/fan_in)` weights and zero biases.
    pub fn init(sample_dim: usize, cond_dim: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        if sample_dim == 0 {
            return Err(Error::InvalidArgument("sample_dim must be positive".into()));
        }
        if config.disconnected_cond_inputs > cond_dim {
            return Err(Error::InvalidArgument(format!(
                "disconnected_cond_inputs {} exceeds cond_dim {}",
                config.disconnected_cond_inputs, cond_dim
            )));
        }
        if config.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        let mut rng = seed::rng(seed);
        let input_dim = sample_dim + cond_dim + 1;
        let mut widths = vec![input_dim];
        widths.extend(&config.hidden);
        widths.push(sample_dim);

        let normal = rand_distr::StandardNormal;
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (cols, rows) = (pair[0], pair[1]);
            let scale = (1.0 / cols as f64).sqrt();
            let mut layer = Dense::zeros(rows, cols);
            for w in &mut layer.weight {
                let x: f64 = rng.sample(normal);
                *w = x * scale;
            }
            layers.push(layer);
        }

        let first = &mut layers[0];
        let tail_start = sample_dim + cond_dim - config.disconnected_cond_inputs;
        for r in 0..first.rows {
            for c in tail_start..sample_dim + cond_dim {
                first.weight[r * first.cols + c] = 0.0;
            }
        }

        Ok(Self {
            layers,
            activation: Activation::Tanh,
            sample_dim,
            cond_dim,
        })
    }

    /// Assembles a model from explicit layers, checking that they chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        let (first, last) = match (layers.first(), layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidArgument("model needs at least one layer".into())),
        };
        for pair in layers.windows(2) {
            check_dim(pair[0].rows, pair[1].cols)?;
        }
        for layer in &layers {
            check_dim(layer.rows * layer.cols, layer.weight.len())?;
            check_dim(layer.rows, layer.bias.len())?;
        }
        let sample_dim = last.rows;
        if first.cols < sample_dim + 1 {
            return Err(Error::InvalidArgument(format!(
                "input width {} cannot hold sample dim {} plus time",
                first.cols, sample_dim
            )));
        }
        let cond_dim = first.cols - sample_dim - 1;
        Ok(Self {
            layers,
            activation,
            sample_dim,
            cond_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sample_dim + self.cond_dim + 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter by flat index: per layer, weights then biases.
    pub fn param(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            if index < l.weight.len() {
                return l.weight[index];
            }
            index -= l.weight.len();
            if index < l.bias.len() {
                return l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for l in &mut self.layers {
            if index < l.weight.len() {
                l.weight[index] = value;
                return;
            }
            index -= l.weight.len();
            if index < l.bias.len() {
                l.bias[index] = value;
                return;
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn zero_gradient(&self) -> Gradient {
        Gradient {
            layers: self.layers.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
        }
    }

    fn assemble_input(&self, z: &[f64], cond: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim(self.sample_dim, z.len())?;
        check_dim(self.cond_dim, cond.len())?;
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(z);
        input.extend_from_slice(cond);
        input.push(t);
        Ok(input)
    }

    /// Forward pass keeping intermediate activations.
    pub fn forward_trace(&self, z: &[f64], cond: &[f64], t: f64) -> Result<Trace> {
        let input = self.assemble_input(z, cond, t)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.rows);
            layer.forward_into(&acts[i], &mut out);
            if i != last {
                for v in &mut out {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    pub fn forward(&self, z: &[f64], cond: &[f64], t: f64) -> Result<Vec<f64>> {
        let input = self.assemble_input(z, cond, t)?;
        let last = self.layers.len() - 1;
        let mut cur = input;
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i != last {
                for v in &mut next {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Accumulates `∂(d_output · output)/∂θ` into `grad`.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grad: &mut Gradient) {
        debug_assert_eq!(d_output.len(), self.sample_dim);
        let mut delta = d_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.acts[i];
            let g = &mut grad.layers[i];
            for (r, d) in delta.iter().enumerate() {
                g.bias[r] += d;
                let row = &mut g.weight[r * layer.cols..(r + 1) * layer.cols];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.cols];
            for (r, d) in delta.iter().enumerate() {
                let row = &layer.weight[r * layer.cols..(r + 1) * layer.cols];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, y) in prev.iter_mut().zip(input) {
                *p *= self.activation.derivative_from_output(*y);
            }
            delta = prev;
        }
    }

    /// Applies `f(param, grad)` to every parameter in flat order.
    pub fn update_with(&mut self, grad: &Gradient, mut f: impl FnMut(usize, &mut f64, f64)) {
        let mut idx = 0;
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (p, d) in l.weight.iter_mut().zip(&g.weight) {
                f(idx, p, *d);
                idx += 1;
            }
            for (p, d) in l.bias.iter_mut().zip(&g.bias) {
                f(idx, p, *d);
                idx += 1;
            }
        }
    }

    /// SHA-256 over the exact bit patterns of every parameter.
    pub fn parameter_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for l in &self.layers {
            h.update((l.rows as u64).to_le_bytes());
            h.update((l.cols as u64).to_le_bytes());
            for v in l.weight.iter().chain(&l.bias) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl VectorField for VectorFieldModel {
    fn sample_dim(&self) -> usize {
        self.sample_dim
    }

    fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    fn velocity(&self, z: &[f64], cond: &[f64], t: f64) -> Vec<f64> {
        self.forward(z, cond, t).expect("input dimensions checked by caller")
    }
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v *= factor;
            }
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.iter_mut().zip(&b.weight) {
                *x += factor * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += factor * y;
            }
        }
    }

    /// `self += factor · (a − b)`; exactly zero contribution when `a == b`.
    pub fn add_scaled_difference(&mut self, a: &Gradient, b: &Gradient, factor: f64) {
        for ((s, x), y) in self.layers.iter_mut().zip(&a.layers).zip(&b.layers) {
            for ((v, p), q) in s.weight.iter_mut().zip(&x.weight).zip(&y.weight) {
                *v += factor * (p - q);
            }
            for ((v, p), q) in s.bias.iter_mut().zip(&x.bias).zip(&y.bias) {
                *v += factor * (p - q);
            }
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| *v == 0.0))
    }
}
