//! Fully connected ReLU network with a softmax output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs × outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// He-uniform initialization.
    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let weights = Array2::from_shape_simple_fn((inputs, outputs), || dist.sample(rng));
        Dense { weights, bias: Array1::zeros(outputs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Inverted-dropout masks for the hidden layers, drawn by the caller.
pub struct DropoutMasks(pub Vec<Array2<f64>>);

impl DropoutMasks {
    pub fn sample(net: &Mlp, batch: usize, rate: f64, rng: &mut impl Rng) -> Self {
        let keep = 1.0 - rate;
        let masks = net.layers[..net.layers.len() - 1]
            .iter()
            .map(|l| {
                Array2::from_shape_simple_fn((batch, l.bias.len()), || {
                    if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }
                })
            })
            .collect();
        DropoutMasks(masks)
    }
}

impl Mlp {
    /// `sizes` lists every width from input to output.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let layers = sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Mlp { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").bias.len()
    }

    /// Returns the activations of every layer (input first, logits last).
    fn forward_all(&self, x: ArrayView2<f64>, masks: Option<&DropoutMasks>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
                if let Some(m) = masks {
                    z *= &m.0[i];
                }
            }
            acts.push(z);
        }
        acts
    }

    pub fn probabilities(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let acts = self.forward_all(x, None);
        softmax_rows(acts.last().expect("logits"))
    }

    /// Mean cross-entropy of a batch against integer class targets.
    pub fn loss(&self, x: ArrayView2<f64>, targets: &[usize], masks: Option<&DropoutMasks>) -> f64 {
        let acts = self.forward_all(x, masks);
        let probs = softmax_rows(acts.last().expect("logits"));
        cross_entropy(&probs, targets)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: &[usize],
        masks: Option<&DropoutMasks>,
    ) -> (f64, Gradients) {
        let acts = self.forward_all(x, masks);
        let probs = softmax_rows(acts.last().expect("logits"));
        let loss = cross_entropy(&probs, targets);
        let n = targets.len() as f64;

        let mut delta = probs;
        for (row, &t) in targets.iter().enumerate() {
            delta[[row, t]] -= 1.0;
        }
        delta /= n;

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &acts[i];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                // acts[i] is post-ReLU (and post-dropout) output of layer i-1
                if let Some(m) = masks {
                    back *= &m.0[i - 1];
                }
                ndarray::Zip::from(&mut back).and(&acts[i]).for_each(|g, a| {
                    if *a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable access to the flat parameter at `index` (weights then bias, layer by layer).
    pub fn parameter_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                let cols = layer.weights.ncols();
                return &mut layer.weights[[index / cols, index % cols]];
            }
            index -= nw;
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }
}

fn cross_entropy(probs: &Array2<f64>, targets: &[usize]) -> f64 {
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(row, &t)| -(probs[[row, t]].max(1e-300)).ln())
        .sum();
    total / targets.len() as f64
}

/// Plain momentum SGD state.
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Sgd {
    pub fn new(net: &Mlp, learning_rate: f64, momentum: f64) -> Self {
        let velocity = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
            .collect();
        Sgd { learning_rate, momentum, velocity }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        for ((layer, (gw, gb)), (vw, vb)) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.velocity) {
            vw.zip_mut_with(gw, |v, g| *v = self.momentum * *v - self.learning_rate * g);
            vb.zip_mut_with(gb, |v, g| *v = self.momentum * *v - self.learning_rate * g);
            layer.weights += &*vw;
            layer.bias += &*vb;
        }
    }
}
