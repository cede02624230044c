use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so the output keeps the input's spatial extent.
    Same,
    Valid,
}

/// Stride-1 2-D convolution parameters.
///
/// `kernel` is laid out `kh×kw×Cin×Cout`; `bias` has `Cout` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub padding: Padding,
}

impl ConvParams {
    pub fn zeros(size: usize, in_channels: usize, out_channels: usize, padding: Padding) -> Self {
        assert!(
            matches!(size, 1 | 3 | 5),
            "kernel extent must be 1, 3 or 5, got {size}"
        );
        ConvParams {
            kernel: Tensor::zeros(&[size, size, in_channels, out_channels]),
            bias: Tensor::zeros(&[out_channels]),
            padding,
        }
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernel.shape()[0], self.kernel.shape()[1])
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel_size();
        match self.padding {
            Padding::Same => Ok((h, w)),
            Padding::Valid => {
                if h < kh || w < kw {
                    return Err(Error::invalid(
                        "conv2d",
                        format!("{h}×{w} image is smaller than the {kh}×{kw} kernel"),
                    ));
                }
                Ok((h - kh + 1, w - kw + 1))
            }
        }
    }

    fn pad(&self) -> (usize, usize) {
        let (kh, kw) = self.kernel_size();
        match self.padding {
            Padding::Same => ((kh - 1) / 2, (kw - 1) / 2),
            Padding::Valid => (0, 0),
        }
    }
}

/// Output indices `o` for which `o + offset` lands in `0..input`.
fn overlap(offset: isize, input: usize, output: usize) -> std::ops::Range<usize> {
    let lo = (-offset).max(0) as usize;
    let hi = (input as isize - offset).clamp(0, output as isize) as usize;
    lo..hi.max(lo)
}

fn to_planar(data: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w * c];
    for (p, px) in data.chunks_exact(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            out[ch * h * w + p] = v;
        }
    }
    out
}

fn from_planar(planes: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w * c];
    for (p, px) in out.chunks_exact_mut(c).enumerate() {
        for (ch, v) in px.iter_mut().enumerate() {
            *v = planes[ch * h * w + p];
        }
    }
    out
}

fn check_input(x: &Tensor, p: &ConvParams) -> Result<(usize, usize, usize)> {
    let (h, w, c) = x.dims3()?;
    if c != p.in_channels() {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            left: x.shape().to_vec(),
            right: p.kernel.shape().to_vec(),
        });
    }
    Ok((h, w, c))
}

/// Stride-1 convolution (cross-correlation) plus bias. No activation.
pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (h, w, cin) = check_input(x, p)?;
    let (ho, wo) = p.output_extent(h, w)?;
    let (kh, kw) = p.kernel_size();
    let (ph, pw) = p.pad();
    let cout = p.out_channels();
    let xp = to_planar(x.data(), h, w, cin);
    let kernel = p.kernel.data();

    let mut out = vec![0.0; cout * ho * wo];
    for (o, plane) in out.chunks_exact_mut(ho * wo).enumerate() {
        plane.fill(p.bias.data()[o]);
        for c in 0..cin {
            let src = &xp[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                let di = ki as isize - ph as isize;
                for kj in 0..kw {
                    let dj = kj as isize - pw as isize;
                    let weight = kernel[((ki * kw + kj) * cin + c) * cout + o];
                    if weight == 0.0 {
                        continue;
                    }
                    let cols = overlap(dj, w, wo);
                    for i in overlap(di, h, ho) {
                        let ii = (i as isize + di) as usize;
                        let jj0 = (cols.start as isize + dj) as usize;
                        let dst = &mut plane[i * wo + cols.start..i * wo + cols.end];
                        let row = &src[ii * w + jj0..ii * w + jj0 + cols.len()];
                        for (d, s) in dst.iter_mut().zip(row) {
                            *d += weight * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_parts(vec![ho, wo, cout], from_planar(&out, ho, wo, cout)).ensure_finite("conv2d")
}

/// Returns `dL/dx` and the parameter gradients (packed as a [`ConvParams`]).
pub fn conv2d_backward(x: &Tensor, p: &ConvParams, dy: &Tensor) -> Result<(Tensor, ConvParams)> {
    let (h, w, cin) = check_input(x, p)?;
    let (ho, wo) = p.output_extent(h, w)?;
    let cout = p.out_channels();
    if dy.shape() != [ho, wo, cout] {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: dy.shape().to_vec(),
            right: vec![ho, wo, cout],
        });
    }
    let (kh, kw) = p.kernel_size();
    let (ph, pw) = p.pad();
    let xp = to_planar(x.data(), h, w, cin);
    let dyp = to_planar(dy.data(), ho, wo, cout);
    let kernel = p.kernel.data();

    let mut dxp = vec![0.0; cin * h * w];
    let mut dkernel = vec![0.0; kernel.len()];
    let mut dbias = vec![0.0; cout];
    for o in 0..cout {
        let g = &dyp[o * ho * wo..(o + 1) * ho * wo];
        dbias[o] = g.iter().sum();
        for c in 0..cin {
            let src = &xp[c * h * w..(c + 1) * h * w];
            let dsrc = &mut dxp[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                let di = ki as isize - ph as isize;
                for kj in 0..kw {
                    let dj = kj as isize - pw as isize;
                    let idx = ((ki * kw + kj) * cin + c) * cout + o;
                    let weight = kernel[idx];
                    let cols = overlap(dj, w, wo);
                    let jj0 = (cols.start as isize + dj) as usize;
                    let mut acc = 0.0;
                    for i in overlap(di, h, ho) {
                        let ii = (i as isize + di) as usize;
                        let grow = &g[i * wo + cols.start..i * wo + cols.end];
                        let xrow = &src[ii * w + jj0..ii * w + jj0 + cols.len()];
                        acc += grow.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>();
                        let drow = &mut dsrc[ii * w + jj0..ii * w + jj0 + cols.len()];
                        for (d, gv) in drow.iter_mut().zip(grow) {
                            *d += weight * gv;
                        }
                    }
                    dkernel[idx] = acc;
                }
            }
        }
    }
    let dx = Tensor::from_parts(vec![h, w, cin], from_planar(&dxp, h, w, cin));
    let grads = ConvParams {
        kernel: Tensor::from_parts(p.kernel.shape().to_vec(), dkernel),
        bias: Tensor::from_parts(vec![cout], dbias),
        padding: p.padding,
    };
    Ok((dx.ensure_finite("conv2d_backward")?, grads))
}
