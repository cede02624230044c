use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const POOL_WINDOW: usize = 5;
pub const POOL_STRIDE: usize = 2;

/// Flat input index of each output element's maximum.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }
}

pub fn maxpool_output_side(side: usize) -> Option<usize> {
    (side >= POOL_WINDOW).then(|| (side - POOL_WINDOW) / POOL_STRIDE + 1)
}

/// 5×5 stride-2 valid max pooling.
pub fn maxpool(x: &Tensor) -> Result<(Tensor, PoolIndices)> {
    let (h, w, c) = x.dims3()?;
    let (Some(ho), Some(wo)) = (maxpool_output_side(h), maxpool_output_side(w)) else {
        return Err(Error::invalid(
            "maxpool",
            format!("{h}×{w} input is smaller than the {POOL_WINDOW}×{POOL_WINDOW} window"),
        ));
    };
    let data = x.data();
    let mut out = Vec::with_capacity(ho * wo * c);
    let mut argmax = Vec::with_capacity(ho * wo * c);
    for i in 0..ho {
        for j in 0..wo {
            for ch in 0..c {
                let mut best = ((i * POOL_STRIDE) * w + j * POOL_STRIDE) * c + ch;
                for di in 0..POOL_WINDOW {
                    for dj in 0..POOL_WINDOW {
                        let idx = ((i * POOL_STRIDE + di) * w + j * POOL_STRIDE + dj) * c + ch;
                        // strict comparison keeps the first maximum in scan order
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![ho, wo, c], out),
        PoolIndices {
            input_shape: vec![h, w, c],
            argmax,
        },
    ))
}

pub fn maxpool_backward(indices: &PoolIndices, dy: &Tensor) -> Result<Tensor> {
    if dy.len() != indices.argmax.len() {
        return Err(Error::invalid(
            "maxpool_backward",
            format!("gradient has {} values, pooling produced {}", dy.len(), indices.argmax.len()),
        ));
    }
    let mut dx = Tensor::zeros(&indices.input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in indices.argmax.iter().zip(dy.data()) {
        d[idx] += g;
    }
    Ok(dx)
}

/// Per-channel spatial mean.
pub fn global_average_pool(x: &Tensor) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    let mut sums = vec![0.0; c];
    for px in x.data().chunks_exact(c) {
        for (s, v) in sums.iter_mut().zip(px) {
            *s += v;
        }
    }
    let n = (h * w) as f64;
    Ok(Tensor::from_parts(vec![c], sums.into_iter().map(|s| s / n).collect()))
}

pub fn global_average_pool_backward(input_shape: &[usize], dy: &Tensor) -> Result<Tensor> {
    let [h, w, c] = *input_shape else {
        return Err(Error::invalid("global_average_pool_backward", "input must be rank 3"));
    };
    if dy.len() != c {
        return Err(Error::ShapeMismatch {
            op: "global_average_pool_backward",
            left: dy.shape().to_vec(),
            right: vec![c],
        });
    }
    let scale = 1.0 / (h * w) as f64;
    let mut data = Vec::with_capacity(h * w * c);
    for _ in 0..h * w {
        data.extend(dy.data().iter().map(|g| g * scale));
    }
    Ok(Tensor::from_parts(vec![h, w, c], data))
}
