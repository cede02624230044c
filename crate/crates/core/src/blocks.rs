//! Minception blocks: parallel 3×3 and 5×5 same-padded convolutions, concatenated
//! and fused by a valid 3×3 convolution producing `2N` channels, in four variants.
//!
//! | variant | output                                                       |
//! |---------|--------------------------------------------------------------|
//! | A       | `relu(fuse(cat))`                                            |
//! | B       | `relu(fuse(cat)) + crop(skip(x))`                            |
//! | C       | `relu(fuse(cat)) ⊙ sigmoid(crop(skip(x)))`                   |
//! | D       | `relu(fuse(cat))` scaled per channel by squeeze-excitation   |
//!
//! The skip path is a 1×1 convolution to `2N` channels, center-cropped by one
//! pixel per edge to line up with the valid fuse output.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{
    conv2d, conv2d_backward, dense, dense_backward, global_average_pool, global_average_pool_backward,
    Activation, ConvParams, DenseParams, Padding,
};
use crate::tensor::{concat_channels, crop_border, pad_border, relu, sigmoid_scalar, split_channels, Tensor};

pub const DEFAULT_SE_REDUCTION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// (A) standard block.
    Standard,
    /// (B) residual skip connection.
    Residual,
    /// (C) sigmoid-gated skip connection.
    Attention,
    /// (D) squeeze-and-excitation channel gating.
    SqueezeExcitation,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Standard,
        Variant::Residual,
        Variant::Attention,
        Variant::SqueezeExcitation,
    ];

    pub fn letter(self) -> char {
        match self {
            Variant::Standard => 'a',
            Variant::Residual => 'b',
            Variant::Attention => 'c',
            Variant::SqueezeExcitation => 'd',
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Variant> {
        Variant::ALL.get(code as usize).copied()
    }

    fn has_skip(self) -> bool {
        matches!(self, Variant::Residual | Variant::Attention)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter().to_ascii_uppercase())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "standard" => Ok(Variant::Standard),
            "b" | "residual" => Ok(Variant::Residual),
            "c" | "attention" => Ok(Variant::Attention),
            "d" | "se" => Ok(Variant::SqueezeExcitation),
            other => Err(Error::invalid("variant", format!("unknown block variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub variant: Variant,
    pub n_kernels: usize,
    pub in_channels: usize,
    /// Only read for [`Variant::SqueezeExcitation`].
    pub se_reduction: usize,
}

impl BlockSpec {
    pub fn new(variant: Variant, n_kernels: usize, in_channels: usize) -> Self {
        BlockSpec {
            variant,
            n_kernels,
            in_channels,
            se_reduction: DEFAULT_SE_REDUCTION,
        }
    }

    pub fn out_channels(&self) -> usize {
        2 * self.n_kernels
    }

    /// Width of the squeeze layer: `max(1, ceil(2N / r))`.
    pub fn se_hidden(&self) -> usize {
        self.out_channels().div_ceil(self.se_reduction).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.n_kernels == 0 || self.in_channels == 0 || self.se_reduction == 0 {
            return Err(Error::invalid(
                "block",
                format!("kernel count, input channels and reduction must be positive: {self:?}"),
            ));
        }
        Ok(())
    }

    /// Zero-valued parameters with the shapes this spec requires.
    pub fn zero_params(&self) -> BlockParams {
        let n = self.n_kernels;
        let out = self.out_channels();
        let se = self.variant == Variant::SqueezeExcitation;
        BlockParams {
            branch3: ConvParams::zeros(3, self.in_channels, n, Padding::Same),
            branch5: ConvParams::zeros(5, self.in_channels, n, Padding::Same),
            fuse: ConvParams::zeros(3, out, out, Padding::Valid),
            skip: self
                .variant
                .has_skip()
                .then(|| ConvParams::zeros(1, self.in_channels, out, Padding::Same)),
            se_fc1: se.then(|| DenseParams::zeros(out, self.se_hidden(), Activation::Relu)),
            se_fc2: se.then(|| DenseParams::zeros(self.se_hidden(), out, Activation::Linear)),
        }
    }
}

/// Exact number of learnable scalars in a block.
pub fn block_param_count(spec: &BlockSpec) -> usize {
    let p = spec.zero_params();
    p.tensors().iter().map(|(_, t)| t.len()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub branch3: ConvParams,
    pub branch5: ConvParams,
    pub fuse: ConvParams,
    pub skip: Option<ConvParams>,
    pub se_fc1: Option<DenseParams>,
    pub se_fc2: Option<DenseParams>,
}

impl BlockParams {
    /// Learnable tensors in canonical order, with their names inside the block.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = vec![
            ("branch3.kernel", &self.branch3.kernel),
            ("branch3.bias", &self.branch3.bias),
            ("branch5.kernel", &self.branch5.kernel),
            ("branch5.bias", &self.branch5.bias),
            ("fuse.kernel", &self.fuse.kernel),
            ("fuse.bias", &self.fuse.bias),
        ];
        if let Some(s) = &self.skip {
            out.push(("skip.kernel", &s.kernel));
            out.push(("skip.bias", &s.bias));
        }
        if let Some(d) = &self.se_fc1 {
            out.push(("se_fc1.weights", &d.weights));
            out.push(("se_fc1.bias", &d.bias));
        }
        if let Some(d) = &self.se_fc2 {
            out.push(("se_fc2.weights", &d.weights));
            out.push(("se_fc2.bias", &d.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out = vec![
            ("branch3.kernel", &mut self.branch3.kernel),
            ("branch3.bias", &mut self.branch3.bias),
            ("branch5.kernel", &mut self.branch5.kernel),
            ("branch5.bias", &mut self.branch5.bias),
            ("fuse.kernel", &mut self.fuse.kernel),
            ("fuse.bias", &mut self.fuse.bias),
        ];
        if let Some(s) = &mut self.skip {
            out.push(("skip.kernel", &mut s.kernel));
            out.push(("skip.bias", &mut s.bias));
        }
        if let Some(d) = &mut self.se_fc1 {
            out.push(("se_fc1.weights", &mut d.weights));
            out.push(("se_fc1.bias", &mut d.bias));
        }
        if let Some(d) = &mut self.se_fc2 {
            out.push(("se_fc2.weights", &mut d.weights));
            out.push(("se_fc2.bias", &mut d.bias));
        }
        out
    }
}

/// Intermediates kept from the forward pass for [`block_backward`].
#[derive(Debug, Clone)]
pub struct BlockCache {
    r3: Tensor,
    r5: Tensor,
    cat: Tensor,
    /// Post-ReLU fuse output.
    y0: Tensor,
    gate: Gate,
}

#[derive(Debug, Clone)]
enum Gate {
    None,
    /// Cropped skip output (B) or its sigmoid (C).
    Spatial(Tensor),
    Channel {
        squeezed: Tensor,
        hidden: Tensor,
        gates: Tensor,
    },
}

fn check_params(spec: &BlockSpec, params: &BlockParams) -> Result<()> {
    spec.validate()?;
    let expected = spec.zero_params();
    let same = expected
        .tensors()
        .iter()
        .zip(params.tensors())
        .all(|((_, a), (_, b))| a.shape() == b.shape())
        && expected.tensors().len() == params.tensors().len();
    if !same {
        return Err(Error::invalid("block", format!("parameters do not match {spec:?}")));
    }
    Ok(())
}

pub fn block_forward(x: &Tensor, spec: &BlockSpec, params: &BlockParams) -> Result<Tensor> {
    block_forward_cached(x, spec, params).map(|(y, _)| y)
}

pub fn block_forward_cached(x: &Tensor, spec: &BlockSpec, params: &BlockParams) -> Result<(Tensor, BlockCache)> {
    check_params(spec, params)?;
    let (h, w, c) = x.dims3()?;
    if c != spec.in_channels {
        return Err(Error::ShapeMismatch {
            op: "block_forward",
            left: x.shape().to_vec(),
            right: vec![h, w, spec.in_channels],
        });
    }
    if h < 3 || w < 3 {
        return Err(Error::invalid("block_forward", format!("{h}×{w} input is smaller than 3×3")));
    }

    let r3 = relu(&conv2d(x, &params.branch3)?);
    let r5 = relu(&conv2d(x, &params.branch5)?);
    let cat = concat_channels(&r3, &r5)?;
    let y0 = relu(&conv2d(&cat, &params.fuse)?);

    let (y, gate) = match spec.variant {
        Variant::Standard => (y0.clone(), Gate::None),
        Variant::Residual => {
            let skip = crop_border(&conv2d(x, params.skip.as_ref().expect("checked"))?, 1)?;
            let y = y0.zip_map(&skip, "residual", |a, b| a + b)?;
            (y, Gate::Spatial(skip))
        }
        Variant::Attention => {
            let skip = crop_border(&conv2d(x, params.skip.as_ref().expect("checked"))?, 1)?;
            let gates = skip.map(sigmoid_scalar);
            let y = y0.zip_map(&gates, "attention", |a, g| a * g)?;
            (y, Gate::Spatial(gates))
        }
        Variant::SqueezeExcitation => {
            let squeezed = global_average_pool(&y0)?;
            let hidden = dense(&squeezed, params.se_fc1.as_ref().expect("checked"))?;
            let gates = dense(&hidden, params.se_fc2.as_ref().expect("checked"))?.map(sigmoid_scalar);
            let out_c = spec.out_channels();
            let mut y = y0.clone();
            for px in y.data_mut().chunks_exact_mut(out_c) {
                for (v, g) in px.iter_mut().zip(gates.data()) {
                    *v *= g;
                }
            }
            (
                y,
                Gate::Channel {
                    squeezed,
                    hidden,
                    gates,
                },
            )
        }
    };
    let y = y.ensure_finite("block_forward")?;
    Ok((y, BlockCache { r3, r5, cat, y0, gate }))
}

fn relu_mask(grad: &Tensor, activated: &Tensor) -> Result<Tensor> {
    grad.zip_map(activated, "relu_backward", |g, a| if a > 0.0 { g } else { 0.0 })
}

/// Returns `dL/dx` and the parameter gradients for one block.
pub fn block_backward(
    x: &Tensor,
    spec: &BlockSpec,
    params: &BlockParams,
    cache: &BlockCache,
    dy: &Tensor,
) -> Result<(Tensor, BlockParams)> {
    if dy.shape() != cache.y0.shape() {
        return Err(Error::ShapeMismatch {
            op: "block_backward",
            left: dy.shape().to_vec(),
            right: cache.y0.shape().to_vec(),
        });
    }
    let mut skip_grads = None;
    let mut se_grads = None;
    let mut dx_skip = None;

    let dy0 = match (&cache.gate, spec.variant) {
        (Gate::None, _) => dy.clone(),
        (Gate::Spatial(_), Variant::Residual) => {
            let skip = params.skip.as_ref().expect("checked");
            let (dxs, gs) = conv2d_backward(x, skip, &pad_border(dy, 1)?)?;
            dx_skip = Some(dxs);
            skip_grads = Some(gs);
            dy.clone()
        }
        (Gate::Spatial(gates), _) => {
            let dgate = dy
                .zip_map(&cache.y0, "attention_backward", |g, a| g * a)?
                .zip_map(gates, "attention_backward", |d, s| d * s * (1.0 - s))?;
            let skip = params.skip.as_ref().expect("checked");
            let (dxs, gs) = conv2d_backward(x, skip, &pad_border(&dgate, 1)?)?;
            dx_skip = Some(dxs);
            skip_grads = Some(gs);
            dy.zip_map(gates, "attention_backward", |g, s| g * s)?
        }
        (
            Gate::Channel {
                squeezed,
                hidden,
                gates,
            },
            _,
        ) => {
            let c = spec.out_channels();
            let mut dgates = vec![0.0; c];
            let mut dy0 = dy.clone();
            for (dpx, ypx) in dy0.data_mut().chunks_exact_mut(c).zip(cache.y0.data().chunks_exact(c)) {
                for ch in 0..c {
                    dgates[ch] += dpx[ch] * ypx[ch];
                    dpx[ch] *= gates.data()[ch];
                }
            }
            let dz = Tensor::from_vec(
                dgates
                    .iter()
                    .zip(gates.data())
                    .map(|(d, s)| d * s * (1.0 - s))
                    .collect(),
            );
            let fc1 = params.se_fc1.as_ref().expect("checked");
            let fc2 = params.se_fc2.as_ref().expect("checked");
            let z = dense(hidden, fc2)?;
            let (dhidden, g2) = dense_backward(hidden, fc2, &z, &dz)?;
            let (dsq, g1) = dense_backward(squeezed, fc1, hidden, &dhidden)?;
            dy0.add_assign(&global_average_pool_backward(cache.y0.shape(), &dsq)?)?;
            se_grads = Some((g1, g2));
            dy0
        }
    };

    let df = relu_mask(&dy0, &cache.y0)?;
    let (dcat, fuse_g) = conv2d_backward(&cache.cat, &params.fuse, &df)?;
    let (dr3, dr5) = split_channels(&dcat, spec.n_kernels)?;
    let (mut dx, b3_g) = conv2d_backward(x, &params.branch3, &relu_mask(&dr3, &cache.r3)?)?;
    let (dx5, b5_g) = conv2d_backward(x, &params.branch5, &relu_mask(&dr5, &cache.r5)?)?;
    dx.add_assign(&dx5)?;
    if let Some(d) = dx_skip {
        dx.add_assign(&d)?;
    }
    let (se_fc1, se_fc2) = match se_grads {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    Ok((
        dx,
        BlockParams {
            branch3: b3_g,
            branch5: b5_g,
            fuse: fuse_g,
            skip: skip_grads,
            se_fc1,
            se_fc2,
        },
    ))
}
