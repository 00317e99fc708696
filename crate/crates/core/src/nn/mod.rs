//! A minimal dense feed-forward network engine.
//!
//! Supports exactly what the adaptation pipeline needs: affine layers with
//! tanh / identity / sigmoid activations, squared-error training on ±1 (or
//! soft) targets by mini-batch gradient descent, per-layer weight freezing,
//! and a flat text serialization for caching.
//!
//! Weight matrices have shape `(fan_in, fan_out)`; a layer maps `a` to
//! `act(Wᵀa + b)`. Training is a pure function of `(data, config, seed)`:
//! the input net is never mutated and repeated calls produce bit-identical
//! results.

pub(crate) mod io;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Element-wise layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
    /// Logistic sigmoid rescaled to (−1, 1): `2σ(z) − 1`, so classifier
    /// scores share the ±1 label convention. Equals `tanh(z/2)`.
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
            Activation::Sigmoid => 2.0 / (1.0 + (-z).exp()) - 1.0,
        }
    }

    /// Derivative of the activation expressed through its output value.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
            Activation::Sigmoid => 0.5 * (1.0 - y * y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Domain(format!("unknown activation '{other}'"))),
        }
    }
}

/// One dense layer: `a ↦ act(Wᵀa + b)` with `W` of shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
    activation: Activation,
    trainable: bool,
}

impl DenseLayer {
    pub fn new(
        weights: DMatrix<f64>,
        bias: DVector<f64>,
        activation: Activation,
        trainable: bool,
    ) -> Result<Self> {
        if bias.len() != weights.ncols() {
            return Err(Error::Dimension(format!(
                "bias length {} does not match fan_out {}",
                bias.len(),
                weights.ncols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            trainable,
        })
    }

    /// The exact identity map on `d` inputs: unit diagonal, zero bias,
    /// identity activation, trainable.
    pub fn identity(d: usize) -> Self {
        Self {
            weights: DMatrix::identity(d, d),
            bias: DVector::zeros(d),
            activation: Activation::Identity,
            trainable: true,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub(crate) fn set_weights(&mut self, weights: DMatrix<f64>) {
        assert_eq!(weights.shape(), self.weights.shape(), "weight shape change");
        self.weights = weights;
    }

    pub(crate) fn zero_bias(&mut self) {
        self.bias.fill(0.0);
    }

    #[cfg(test)]
    pub(crate) fn fill_weights(&mut self, v: f64) {
        self.weights.fill(v);
    }

    pub(crate) fn with_trainable(mut self, trainable: bool) -> Self {
        self.trainable = trainable;
        self
    }

    fn forward(&self, input: &DVector<f64>) -> DVector<f64> {
        let mut z = self.bias.clone();
        z.gemv_tr(1.0, &self.weights, input, 1.0);
        z.apply(|v| *v = self.activation.apply(*v));
        z
    }

    /// Allocation-free forward into a preallocated output buffer.
    fn forward_into(&self, input: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&self.bias);
        out.gemv_tr(1.0, &self.weights, input, 1.0);
        out.apply(|v| *v = self.activation.apply(*v));
    }
}

/// Gradient of the loss with respect to one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl LayerGradient {
    fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: DMatrix::zeros(layer.fan_in(), layer.fan_out()),
            bias: DVector::zeros(layer.fan_out()),
        }
    }

    fn reset(&mut self) {
        self.weights.fill(0.0);
        self.bias.fill(0.0);
    }
}

/// Reusable per-sample buffers for the training and scoring hot paths.
pub(crate) struct Scratch {
    /// Post-activation of every layer; `acts[0]` holds the input.
    acts: Vec<DVector<f64>>,
    /// dLoss/dz per layer.
    deltas: Vec<DVector<f64>>,
}

impl Scratch {
    pub(crate) fn for_net(net: &FeedForwardNet) -> Self {
        let mut acts = Vec::with_capacity(net.layers.len() + 1);
        acts.push(DVector::zeros(net.input_dim()));
        for layer in &net.layers {
            acts.push(DVector::zeros(layer.fan_out()));
        }
        let deltas = net
            .layers
            .iter()
            .map(|l| DVector::zeros(l.fan_out()))
            .collect();
        Self { acts, deltas }
    }
}

/// Gradient-descent training parameters. Identical config and data yield
/// bit-identical trained nets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Number of passes over the data; 0 leaves the net untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be positive".into()));
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(Error::Domain(format!(
                "l2_penalty must be nonnegative, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A stack of dense layers ending (for classifiers) in a single output whose
/// sign is the predicted label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<DenseLayer>,
}

/// Initializes a dense net: weights uniform on `±1/√fan_in`, biases zero,
/// every layer trainable.
///
/// `layer_sizes` lists the input dimension followed by each layer's width;
/// `activations` has one entry per layer.
pub fn mlp_init(
    layer_sizes: &[usize],
    activations: &[Activation],
    seed: u64,
) -> Result<FeedForwardNet> {
    if layer_sizes.len() < 2 {
        return Err(Error::Dimension(format!(
            "need at least an input and an output size, got {layer_sizes:?}"
        )));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Dimension(format!(
            "{} activations for {} layers",
            activations.len(),
            layer_sizes.len() - 1
        )));
    }
    if let Some(&z) = layer_sizes.iter().find(|&&s| s == 0) {
        return Err(Error::Domain(format!("layer size must be >= 1, got {z}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(activations.len());
    for (l, &act) in activations.iter().enumerate() {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let weights =
            DMatrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-scale..scale));
        layers.push(DenseLayer {
            weights,
            bias: DVector::zeros(fan_out),
            activation: act,
            trainable: true,
        });
    }
    FeedForwardNet::from_layers(layers)
}

impl FeedForwardNet {
    /// Assembles a net, checking that adjacent layer dimensions chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("a net needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::Dimension(format!(
                    "layer fan_out {} feeds layer fan_in {}",
                    w[0].fan_out(),
                    w[1].fan_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layer_mut(&mut self, index: usize) -> &mut DenseLayer {
        &mut self.layers[index]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    /// Splits off the first `depth` layers (front, back).
    pub(crate) fn split_at(&self, depth: usize) -> (Vec<DenseLayer>, Vec<DenseLayer>) {
        let front = self.layers[..depth].to_vec();
        let back = self.layers[depth..].to_vec();
        (front, back)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has length {}, net expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Full forward pass returning the final activation vector.
    pub fn forward_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a);
        }
        Ok(a)
    }

    /// Classifier score: the single output of a net with final fan_out 1.
    /// The sign of the score is the predicted label.
    pub fn forward(&self, x: &DVector<f64>) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::Dimension(format!(
                "score requires output dimension 1, net has {}",
                self.output_dim()
            )));
        }
        Ok(self.forward_vec(x)?[0])
    }

    /// Scores every row of `x`.
    pub fn forward_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "data has {} columns, net expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if self.output_dim() != 1 {
            return Err(Error::Dimension(format!(
                "score requires output dimension 1, net has {}",
                self.output_dim()
            )));
        }
        let mut scratch = Scratch::for_net(self);
        let mut out = DVector::zeros(x.nrows());
        for i in 0..x.nrows() {
            out[i] = self.forward_row(x, i, &mut scratch);
        }
        Ok(out)
    }

    /// Scratch-based single-row score; shapes must have been validated.
    pub(crate) fn forward_row(&self, x: &DMatrix<f64>, row: usize, scratch: &mut Scratch) -> f64 {
        for c in 0..x.ncols() {
            scratch.acts[0][c] = x[(row, c)];
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            layer.forward_into(&before[l], &mut after[0]);
        }
        scratch.acts[self.layers.len()][0]
    }

    /// Mean squared error `mean_j (score(x_j) − y_j)²`.
    pub fn mse(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
        let scores = self.forward_rows(x)?;
        if y.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} targets for {} rows",
                y.len(),
                scores.len()
            )));
        }
        let n = y.len() as f64;
        Ok((scores - y).norm_squared() / n)
    }

    /// Mean squared loss over the data and its analytic gradient for every
    /// parameter (frozen layers included; the L2 penalty is not part of this
    /// loss).
    pub fn loss_and_gradient(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<(f64, Vec<LayerGradient>)> {
        self.check_training_data(x, y)?;
        let mut grads: Vec<LayerGradient> =
            self.layers.iter().map(LayerGradient::zeros_like).collect();
        let mut scratch = Scratch::for_net(self);
        let mut loss = 0.0;
        for i in 0..x.nrows() {
            loss += self.accumulate_sample_gradient(x, i, y[i], &mut scratch, &mut grads);
        }
        let inv_n = 1.0 / x.nrows() as f64;
        loss *= inv_n;
        for g in &mut grads {
            g.weights *= inv_n;
            g.bias *= inv_n;
        }
        Ok((loss, grads))
    }

    /// Trains a copy of the net by seeded mini-batch gradient descent on the
    /// squared error, leaving non-trainable layers bit-identical. Returns the
    /// trained copy.
    pub fn train(&self, x: &DMatrix<f64>, y: &DVector<f64>, cfg: &TrainConfig) -> Result<Self> {
        self.train_with_hooks(x, y, cfg, |_| {}, |_, _| {})
    }

    /// Training loop with callbacks: `on_step` runs after every mini-batch
    /// parameter update (and may adjust the net, e.g. to project weights onto
    /// a constraint set); `on_epoch` runs after every full pass.
    pub(crate) fn train_with_hooks(
        &self,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        cfg: &TrainConfig,
        mut on_step: impl FnMut(&mut FeedForwardNet),
        mut on_epoch: impl FnMut(&FeedForwardNet, usize),
    ) -> Result<Self> {
        cfg.validate()?;
        self.check_training_data(x, y)?;

        let mut net = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut grads: Vec<LayerGradient> =
            net.layers.iter().map(LayerGradient::zeros_like).collect();
        let mut scratch = Scratch::for_net(&net);

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                for g in &mut grads {
                    g.reset();
                }
                for &i in batch {
                    net.accumulate_sample_gradient(x, i, y[i], &mut scratch, &mut grads);
                }
                let inv_b = 1.0 / batch.len() as f64;
                let lr = cfg.learning_rate;
                let l2 = cfg.l2_penalty;
                for (layer, grad) in net.layers.iter_mut().zip(&mut grads) {
                    if !layer.trainable {
                        continue;
                    }
                    layer
                        .weights
                        .zip_apply(&grad.weights, |w, g| *w -= lr * (inv_b * g + 2.0 * l2 * *w));
                    layer.bias.axpy(-lr * inv_b, &grad.bias, 1.0);
                }
                on_step(&mut net);
            }
            on_epoch(&net, epoch);
        }
        Ok(net)
    }

    fn check_training_data(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        if x.nrows() == 0 {
            return Err(Error::Domain("training data is empty".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "data has {} columns, net expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if self.output_dim() != 1 {
            return Err(Error::Dimension(format!(
                "training requires output dimension 1, net has {}",
                self.output_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite training data".into()));
        }
        Ok(())
    }

    /// Backpropagates one sample, adding its parameter gradients into
    /// `grads`, and returns the sample's squared error.
    fn accumulate_sample_gradient(
        &self,
        x: &DMatrix<f64>,
        row: usize,
        target: f64,
        scratch: &mut Scratch,
        grads: &mut [LayerGradient],
    ) -> f64 {
        let score = self.forward_row(x, row, scratch);
        let err = score - target;
        let Scratch { acts, deltas } = scratch;

        // delta = dLoss/dz for the current layer, starting at the output.
        let last = self.layers.len() - 1;
        deltas[last][0] = 2.0 * err * self.layers[last].activation.derivative_from_output(score);

        for l in (0..self.layers.len()).rev() {
            grads[l].weights.ger(1.0, &acts[l], &deltas[l], 1.0);
            grads[l].bias += &deltas[l];
            if l > 0 {
                let (upstream, current) = deltas.split_at_mut(l);
                let upstream = &mut upstream[l - 1];
                upstream.gemv(1.0, &self.layers[l].weights, &current[0], 0.0);
                let prev_act = self.layers[l - 1].activation;
                for (u, a) in upstream.iter_mut().zip(acts[l].iter()) {
                    *u *= prev_act.derivative_from_output(*a);
                }
            }
        }
        err * err
    }
}
