//! Dense row-major tensors and the primitive operations layers are built from.
//!
//! Images use `H×W×C` layout with the channel index varying fastest. Values are
//! held in `f64`; parameters are rounded to `f32` when they are persisted.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Elementwise operation selector for [`elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
    Relu,
    Sigmoid,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::invalid(
                "tensor",
                format!("extents must be positive, got {shape:?}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::invalid(
                "tensor",
                format!(
                    "shape {shape:?} holds {expected} values but {} were given",
                    data.len()
                ),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "extents must be positive: {shape:?}"
        );
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector tensor must be non-empty");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interprets the tensor as an `H×W×C` image.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::invalid(
                "dims3",
                format!("expected a rank-3 H×W×C tensor, got {:?}", self.shape),
            )),
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        check_same_shape(op, self, other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        check_same_shape("add_assign", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Fails with [`Error::NonFinite`] if any element is NaN or infinite.
    pub fn ensure_finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite { op })
        }
    }

    /// Index of the largest element; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    /// Rounds every element to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        self.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
}

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            op,
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(())
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies `op` elementwise. Binary ops require `b` with an identical shape.
pub fn elementwise(op: Elementwise, a: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let out = match op {
        Elementwise::Add | Elementwise::Mul => {
            let b = b.ok_or_else(|| Error::invalid("elementwise", format!("{op:?} needs two operands")))?;
            if op == Elementwise::Add {
                a.zip_map(b, "add", |x, y| x + y)?
            } else {
                a.zip_map(b, "mul", |x, y| x * y)?
            }
        }
        Elementwise::Relu => a.map(|x| x.max(0.0)),
        Elementwise::Sigmoid => a.map(sigmoid_scalar),
    };
    out.ensure_finite("elementwise")
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|x| x.max(0.0))
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    a.map(sigmoid_scalar)
}

/// Numerically stable softmax over a flat tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if !logits.is_finite() {
        return Err(Error::invalid("softmax", "non-finite logits"));
    }
    let max = logits.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(Tensor::from_parts(
        logits.shape.clone(),
        exps.into_iter().map(|e| e / total).collect(),
    ))
}

/// Softmax backward: given probabilities `p` and `dL/dp`, returns `dL/dlogits`.
pub fn softmax_backward(probs: &Tensor, dprobs: &Tensor) -> Tensor {
    let dot: f64 = probs.data.iter().zip(&dprobs.data).map(|(p, d)| p * d).sum();
    Tensor::from_parts(
        probs.shape.clone(),
        probs
            .data
            .iter()
            .zip(&dprobs.data)
            .map(|(p, d)| p * (d - dot))
            .collect(),
    )
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ha, wa, ca) = a.dims3()?;
    let (hb, wb, cb) = b.dims3()?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::ShapeMismatch {
            op: "concat_channels",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let c = ca + cb;
    let mut data = Vec::with_capacity(ha * wa * c);
    for (pa, pb) in a.data.chunks_exact(ca).zip(b.data.chunks_exact(cb)) {
        data.extend_from_slice(pa);
        data.extend_from_slice(pb);
    }
    Ok(Tensor::from_parts(vec![ha, wa, c], data))
}

/// Inverse of [`concat_channels`]: the first `split` channels go left.
pub fn split_channels(x: &Tensor, split: usize) -> Result<(Tensor, Tensor)> {
    let (h, w, c) = x.dims3()?;
    if split == 0 || split >= c {
        return Err(Error::invalid(
            "split_channels",
            format!("split point {split} outside 1..{c}"),
        ));
    }
    let mut left = Vec::with_capacity(h * w * split);
    let mut right = Vec::with_capacity(h * w * (c - split));
    for px in x.data.chunks_exact(c) {
        left.extend_from_slice(&px[..split]);
        right.extend_from_slice(&px[split..]);
    }
    Ok((
        Tensor::from_parts(vec![h, w, split], left),
        Tensor::from_parts(vec![h, w, c - split], right),
    ))
}

/// Removes `border` pixels from every spatial edge.
pub fn crop_border(x: &Tensor, border: usize) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    if h <= 2 * border || w <= 2 * border {
        return Err(Error::invalid(
            "crop_border",
            format!("{h}×{w} image cannot lose {border} pixels per edge"),
        ));
    }
    let (ho, wo) = (h - 2 * border, w - 2 * border);
    let mut data = Vec::with_capacity(ho * wo * c);
    for i in 0..ho {
        let start = ((i + border) * w + border) * c;
        data.extend_from_slice(&x.data[start..start + wo * c]);
    }
    Ok(Tensor::from_parts(vec![ho, wo, c], data))
}

/// Adjoint of [`crop_border`]: embeds `x` in a zero frame.
pub fn pad_border(x: &Tensor, border: usize) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    let (ho, wo) = (h + 2 * border, w + 2 * border);
    let mut data = vec![0.0; ho * wo * c];
    for i in 0..h {
        let dst = ((i + border) * wo + border) * c;
        data[dst..dst + w * c].copy_from_slice(&x.data[i * w * c..(i + 1) * w * c]);
    }
    Ok(Tensor::from_parts(vec![ho, wo, c], data))
}
