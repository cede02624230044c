use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Separable fractional-coverage weights for area downsampling.
///
/// Output cell `i` averages the source interval `[i·s, (i+1)·s)` with
/// `s = input / output`; a source pixel partly inside the interval contributes
/// in proportion to the covered length.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaWeights {
    input: usize,
    output: usize,
    /// For each output cell: (first source index, weights of consecutive sources).
    taps: Vec<(usize, Vec<f64>)>,
}

impl AreaWeights {
    pub fn new(input: usize, output: usize) -> Result<Self> {
        if output == 0 || output >= input {
            return Err(Error::invalid(
                "area_downsample",
                format!("cannot resample {input} to {output}; only downsampling is supported"),
            ));
        }
        // Work in units of 1/output source pixels so every boundary is an integer.
        let taps = (0..output)
            .map(|i| {
                let lo = i * input;
                let hi = (i + 1) * input;
                let first = lo / output;
                let last = (hi - 1) / output;
                let weights = (first..=last)
                    .map(|k| {
                        let covered = hi.min((k + 1) * output) - lo.max(k * output);
                        covered as f64 / input as f64
                    })
                    .collect();
                (first, weights)
            })
            .collect();
        Ok(AreaWeights { input, output, taps })
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn output(&self) -> usize {
        self.output
    }
}

/// Downsamples an `H×W×C` image to `rows.output()×cols.output()×C`.
pub fn area_downsample(x: &Tensor, rows: &AreaWeights, cols: &AreaWeights) -> Result<Tensor> {
    let (h, w, c) = x.dims3()?;
    if h != rows.input || w != cols.input {
        return Err(Error::ShapeMismatch {
            op: "area_downsample",
            left: x.shape().to_vec(),
            right: vec![rows.input, cols.input, c],
        });
    }
    let data = x.data();
    // columns first: h × wo × c
    let wo = cols.output;
    let mut tmp = vec![0.0; h * wo * c];
    for r in 0..h {
        for (j, (first, weights)) in cols.taps.iter().enumerate() {
            let dst = &mut tmp[(r * wo + j) * c..(r * wo + j + 1) * c];
            for (k, wt) in weights.iter().enumerate() {
                let src = &data[(r * w + first + k) * c..(r * w + first + k + 1) * c];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wt * s;
                }
            }
        }
    }
    let ho = rows.output;
    let mut out = vec![0.0; ho * wo * c];
    for (i, (first, weights)) in rows.taps.iter().enumerate() {
        let dst = &mut out[i * wo * c..(i + 1) * wo * c];
        for (k, wt) in weights.iter().enumerate() {
            let src = &tmp[(first + k) * wo * c..(first + k + 1) * wo * c];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wt * s;
            }
        }
    }
    Tensor::from_parts(vec![ho, wo, c], out).ensure_finite("area_downsample")
}

pub fn area_downsample_backward(dy: &Tensor, rows: &AreaWeights, cols: &AreaWeights) -> Result<Tensor> {
    let (ho, wo, c) = dy.dims3()?;
    if ho != rows.output || wo != cols.output {
        return Err(Error::ShapeMismatch {
            op: "area_downsample_backward",
            left: dy.shape().to_vec(),
            right: vec![rows.output, cols.output, c],
        });
    }
    let h = rows.input;
    let w = cols.input;
    let g = dy.data();
    let mut tmp = vec![0.0; h * wo * c];
    for (i, (first, weights)) in rows.taps.iter().enumerate() {
        let src = &g[i * wo * c..(i + 1) * wo * c];
        for (k, wt) in weights.iter().enumerate() {
            let dst = &mut tmp[(first + k) * wo * c..(first + k + 1) * wo * c];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wt * s;
            }
        }
    }
    let mut dx = vec![0.0; h * w * c];
    for r in 0..h {
        for (j, (first, weights)) in cols.taps.iter().enumerate() {
            let src = &tmp[(r * wo + j) * c..(r * wo + j + 1) * c];
            for (k, wt) in weights.iter().enumerate() {
                let dst = &mut dx[(r * w + first + k) * c..(r * w + first + k + 1) * c];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wt * s;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![h, w, c], dx))
}
