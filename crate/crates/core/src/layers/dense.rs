use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected layer `y = act(Wᵀx + b)` with `W` stored `In×Out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseParams {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseParams {
            weights: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub fn dense(x: &Tensor, p: &DenseParams) -> Result<Tensor> {
    if x.len() != p.inputs() {
        return Err(Error::ShapeMismatch {
            op: "dense",
            left: x.shape().to_vec(),
            right: p.weights.shape().to_vec(),
        });
    }
    let out = p.outputs();
    let mut y = p.bias.data().to_vec();
    for (xi, row) in x.data().iter().zip(p.weights.data().chunks_exact(out)) {
        for (acc, wv) in y.iter_mut().zip(row) {
            *acc += xi * wv;
        }
    }
    if p.activation == Activation::Relu {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Tensor::from_parts(vec![out], y).ensure_finite("dense")
}

/// `y` is the forward output; it carries the ReLU mask.
pub fn dense_backward(x: &Tensor, p: &DenseParams, y: &Tensor, dy: &Tensor) -> Result<(Tensor, DenseParams)> {
    let out = p.outputs();
    if dy.len() != out || y.len() != out || x.len() != p.inputs() {
        return Err(Error::ShapeMismatch {
            op: "dense_backward",
            left: dy.shape().to_vec(),
            right: p.weights.shape().to_vec(),
        });
    }
    let dpre: Vec<f64> = match p.activation {
        Activation::Linear => dy.data().to_vec(),
        Activation::Relu => dy
            .data()
            .iter()
            .zip(y.data())
            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
            .collect(),
    };
    let mut dx = vec![0.0; p.inputs()];
    let mut dw = vec![0.0; p.weights.len()];
    for (i, (row, drow)) in p
        .weights
        .data()
        .chunks_exact(out)
        .zip(dw.chunks_exact_mut(out))
        .enumerate()
    {
        let xi = x.data()[i];
        let mut acc = 0.0;
        for ((wv, dwv), g) in row.iter().zip(drow.iter_mut()).zip(&dpre) {
            *dwv = xi * g;
            acc += wv * g;
        }
        dx[i] = acc;
    }
    let grads = DenseParams {
        weights: Tensor::from_parts(p.weights.shape().to_vec(), dw),
        bias: Tensor::from_parts(vec![out], dpre),
        activation: p.activation,
    };
    Ok((Tensor::from_parts(x.shape().to_vec(), dx), grads))
}
