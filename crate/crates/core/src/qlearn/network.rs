//! Fully-connected Q-network with ReLU hidden layers and a linear output
//! layer, trained by plain SGD.

use rand::Rng;

use crate::env::Action;
use crate::error::{Error, Result};

/// One dense layer. `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks(self.inputs).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    layers: Vec<Dense>,
}

impl Gradients {
    /// Flattened in the same order as [`QNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

impl QNetwork {
    /// Random network with uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(Action::COUNT);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let bound = 1.0 / (w[0] as f64).sqrt();
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        QNetwork { layers }
    }

    /// Builds a network from explicit layers. Consecutive layers must chain
    /// and the last one must have one output per action.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for l in &layers {
            if l.inputs == 0
                || l.outputs == 0
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(Error::Config(format!(
                    "layer {}x{} has inconsistent parameter counts",
                    l.outputs, l.inputs
                )));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[1].inputs,
                    actual: pair[0].outputs,
                });
            }
        }
        let out = layers.last().unwrap().outputs;
        if out != Action::COUNT {
            return Err(Error::DimensionMismatch {
                expected: Action::COUNT,
                actual: out,
            });
        }
        Ok(QNetwork { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_len()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.weights.fill(0.0);
        last.biases.fill(0.0);
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = it.next().unwrap();
            }
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Q-value per action for one input.
    pub fn predict_q(&self, input: &[f64]) -> Result<[f64; Action::COUNT]> {
        self.check_input(input)?;
        let acts = self.activations(input);
        let q = acts.last().unwrap();
        Ok([q[0], q[1], q[2], q[3]])
    }

    /// Outputs of every layer (post-ReLU for hidden layers), input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut out);
            if i != last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error of `Q(input, action)` against fixed targets, and its
    /// gradient with respect to every parameter.
    pub fn td_gradient(
        &self,
        samples: &[(&[f64], Action, f64)],
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        };
        let n = samples.len() as f64;
        let mut loss = 0.0;
        for &(input, action, target) in samples {
            self.check_input(input)?;
            let acts = self.activations(input);
            let err = acts.last().unwrap()[action.index()] - target;
            loss += err * err;
            // Only the taken action's output contributes to the loss.
            let mut delta = vec![0.0; Action::COUNT];
            delta[action.index()] = 2.0 * err / n;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads.layers[li];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, x) in row.iter_mut().zip(input) {
                        *w += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU derivative of the hidden layer feeding this one.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss / n, grads))
    }

    /// `params -= lr * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in l.biases.iter_mut().zip(&g.biases) {
                *b -= lr * d;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

/// Index of the largest Q-value; ties go to the lowest action index.
pub fn greedy_action(q: &[f64; Action::COUNT]) -> Action {
    let mut best = 0;
    for i in 1..Action::COUNT {
        if q[i] > q[best] {
            best = i;
        }
    }
    Action::ALL[best]
}
