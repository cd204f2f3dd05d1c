//! Classical feed-forward head: four affine layers, ReLU after the first three,
//! inverted dropout on hidden activations during training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out × n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense { n_in, n_out, weights: vec![0.0; n_in * n_out], bias: vec![0.0; n_out] }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
    pub dropout_rate: f64,
}

impl MlpParams {
    /// All-zero network with the given layer widths (`dims[0]` inputs, last is 1).
    pub fn zeros(dims: &[usize], dropout_rate: f64) -> Self {
        MlpParams {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            dropout_rate,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers.is_empty() {
            return Err(ModelError::Dimension("network has no layers".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Dimension(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(ModelError::Dimension(format!("layer {k} storage does not match {}x{}", l.n_out, l.n_in)));
            }
            if k > 0 && self.layers[k - 1].n_out != l.n_in {
                return Err(ModelError::Dimension(format!("layer {k} expects {} inputs, previous emits {}", l.n_in, self.layers[k - 1].n_out)));
            }
        }
        if self.layers.last().map(|l| l.n_out) != Some(1) {
            return Err(ModelError::Dimension("last layer must have one output".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    /// Hidden widths, one per layer except the last.
    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.n_out).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }
}

/// Keep flags for each hidden layer's activations.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<Vec<bool>>,
}

impl DropoutMask {
    pub fn sample(params: &MlpParams, rng: &mut impl Rng) -> Self {
        let p_keep = 1.0 - params.dropout_rate;
        DropoutMask {
            keep: params
                .hidden_dims()
                .into_iter()
                .map(|w| (0..w).map(|_| rng.random::<f64>() < p_keep).collect())
                .collect(),
        }
    }

    pub fn keep_all(params: &MlpParams) -> Self {
        DropoutMask { keep: params.hidden_dims().into_iter().map(|w| vec![true; w]).collect() }
    }
}

/// Activations recorded during a forward pass, consumed by [`mlp_backward`].
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// Input to each layer (post-activation, post-dropout of the previous layer).
    inputs: Vec<Vec<f64>>,
    /// Derivative of each hidden layer's output w.r.t. its pre-activation.
    gates: Vec<Vec<f64>>,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Dense>,
}

impl MlpGrad {
    pub fn to_flat(&self) -> Vec<f64> {
        MlpParams { layers: self.layers.clone(), dropout_rate: 0.0 }.to_flat()
    }
}

fn check_input(z: &[f64], params: &MlpParams) -> Result<(), ModelError> {
    if z.len() != params.n_inputs() {
        return Err(ModelError::Dimension(format!("expected {} features, got {}", params.n_inputs(), z.len())));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("feature vector"));
    }
    Ok(())
}

pub fn mlp_forward_tape(
    z: &[f64],
    params: &MlpParams,
    dropout_mask: Option<&DropoutMask>,
    training: bool,
) -> Result<MlpTape, ModelError> {
    check_input(z, params)?;
    let n_layers = params.layers.len();
    let mask = if training && params.dropout_rate > 0.0 {
        let m = dropout_mask.ok_or(ModelError::MissingDropoutMask)?;
        if m.keep.len() != n_layers - 1
            || m.keep.iter().zip(&params.layers).any(|(k, l)| k.len() != l.n_out)
        {
            return Err(ModelError::Dimension("dropout mask does not match hidden widths".into()));
        }
        Some(m)
    } else {
        None
    };
    let scale = 1.0 / (1.0 - params.dropout_rate);
    let mut inputs = Vec::with_capacity(n_layers);
    let mut gates = Vec::with_capacity(n_layers - 1);
    let mut x = z.to_vec();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut y = layer.forward(&x);
        inputs.push(x);
        if k + 1 < n_layers {
            let mut g = vec![0.0; y.len()];
            for (u, (v, gu)) in y.iter_mut().zip(g.iter_mut()).enumerate() {
                let kept = mask.map_or(1.0, |m| if m.keep[k][u] { scale } else { 0.0 });
                if *v > 0.0 {
                    *gu = kept;
                    *v *= kept;
                } else {
                    *v = 0.0;
                }
            }
            gates.push(g);
        }
        x = y;
    }
    Ok(MlpTape { inputs, gates, output: x[0] })
}

pub fn mlp_forward(
    z: &[f64],
    params: &MlpParams,
    dropout_mask: Option<&DropoutMask>,
    training: bool,
) -> Result<f64, ModelError> {
    Ok(mlp_forward_tape(z, params, dropout_mask, training)?.output)
}

/// Gradient of `upstream · output` w.r.t. the weights and the input features.
pub fn mlp_backward(tape: &MlpTape, params: &MlpParams, upstream: f64) -> (MlpGrad, Vec<f64>) {
    let n_layers = params.layers.len();
    let mut grads: Vec<Dense> = params.layers.iter().map(|l| Dense::zeros(l.n_in, l.n_out)).collect();
    let mut delta = vec![upstream];
    for k in (0..n_layers).rev() {
        let layer = &params.layers[k];
        let x = &tape.inputs[k];
        let g = &mut grads[k];
        for (o, &d) in delta.iter().enumerate() {
            g.bias[o] = d;
            let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w = d * xi;
            }
        }
        let mut back = vec![0.0; layer.n_in];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
            for (b, &w) in back.iter_mut().zip(row) {
                *b += d * w;
            }
        }
        if k > 0 {
            for (b, &gate) in back.iter_mut().zip(&tape.gates[k - 1]) {
                *b *= gate;
            }
        }
        delta = back;
    }
    (MlpGrad { layers: grads }, delta)
}
