//! Central-difference gradient checks for every differentiable piece.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sgqc::blocks::{block_backward, block_forward, block_forward_cached, BlockSpec, Variant};
use sgqc::layers::{
    area_downsample, area_downsample_backward, conv2d, conv2d_backward, dense, dense_backward, global_average_pool,
    global_average_pool_backward, maxpool, maxpool_backward, Activation, AreaWeights, ConvParams, DenseParams, Padding,
};
use sgqc::network::{build_network, Network, NetworkSpec};
use sgqc::tensor::{crop_border, pad_border, softmax, softmax_backward, Tensor};
use sgqc::training::cross_entropy;
use sgqc::Label;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// One-sided slopes differing by more than this mark a coordinate whose probe
/// straddles a kink (ReLU threshold or max-pool switch).
pub const KINK_SLOPE_GAP: f64 = 1e-4;
/// Largest share of coordinates that may be excluded as kinks.
pub const MAX_KINK_SHARE: f64 = 0.01;

/// Central differences of `f` with respect to every entry of `x`; `None`
/// where the probe straddles a point of non-differentiability.
pub fn numeric_gradient(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<Option<f64>> {
    let mut probe = x.clone();
    let center = f(x);
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + STEP;
            let up = f(&probe);
            probe.data_mut()[i] = orig - STEP;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            let forward = (up - center) / STEP;
            let backward = (center - down) / STEP;
            let smooth = (forward - backward).abs() <= KINK_SLOPE_GAP * (1.0 + forward.abs().max(backward.abs()));
            smooth.then_some((up - down) / (2.0 * STEP))
        })
        .collect()
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Projection weights turning a tensor output into a scalar loss.
fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub struct Check {
    pub name: String,
    pub error: f64,
    pub coordinates: usize,
    pub kinks: usize,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error < TOLERANCE && (self.kinks as f64) <= MAX_KINK_SHARE * self.coordinates as f64
    }
}

fn push(out: &mut Vec<Check>, name: impl Into<String>, analytic: &Tensor, numeric: Vec<Option<f64>>) {
    let (a, n): (Vec<f64>, Vec<f64>) = analytic
        .data()
        .iter()
        .zip(&numeric)
        .filter_map(|(a, n)| n.map(|n| (*a, n)))
        .unzip();
    out.push(Check {
        name: name.into(),
        error: relative_error(&a, &n),
        coordinates: numeric.len(),
        kinks: numeric.len() - a.len(),
    });
}

fn conv_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let cases = [(1, Padding::Same), (3, Padding::Same), (5, Padding::Same), (3, Padding::Valid)];
    for (k, padding) in cases {
        let (h, w) = (rng.random_range(5..9), rng.random_range(5..9));
        let (cin, cout) = (rng.random_range(1..4), rng.random_range(1..4));
        let x = randn(rng, &[h, w, cin], 1.0);
        let mut p = ConvParams::zeros(k, cin, cout, padding);
        p.kernel = randn(rng, p.kernel.shape(), 0.5);
        p.bias = randn(rng, p.bias.shape(), 0.5);
        let y = conv2d(&x, &p).unwrap();
        let wts = randn(rng, y.shape(), 1.0);
        let (dx, g) = conv2d_backward(&x, &p, &wts).unwrap();
        let tag = format!("conv{k}x{k} {padding:?}");
        push(out, format!("{tag} input"), &dx, numeric_gradient(&x, |x| dot(&conv2d(x, &p).unwrap(), &wts)));
        let kernel = numeric_gradient(&p.kernel, |k| {
            let q = ConvParams { kernel: k.clone(), ..p.clone() };
            dot(&conv2d(&x, &q).unwrap(), &wts)
        });
        push(out, format!("{tag} kernel"), &g.kernel, kernel);
        let bias = numeric_gradient(&p.bias, |b| {
            let q = ConvParams { bias: b.clone(), ..p.clone() };
            dot(&conv2d(&x, &q).unwrap(), &wts)
        });
        push(out, format!("{tag} bias"), &g.bias, bias);
    }
}

fn dense_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    for act in [Activation::Relu, Activation::Linear] {
        let (n_in, n_out) = (rng.random_range(3..12), rng.random_range(2..8));
        let x = randn(rng, &[n_in], 1.0);
        let mut p = DenseParams::zeros(n_in, n_out, act);
        p.weights = randn(rng, p.weights.shape(), 0.5);
        p.bias = randn(rng, p.bias.shape(), 0.5);
        let y = dense(&x, &p).unwrap();
        let wts = randn(rng, y.shape(), 1.0);
        let (dx, g) = dense_backward(&x, &p, &y, &wts).unwrap();
        let tag = format!("dense {act:?}");
        push(out, format!("{tag} input"), &dx, numeric_gradient(&x, |x| dot(&dense(x, &p).unwrap(), &wts)));
        let weights = numeric_gradient(&p.weights, |w| {
            let q = DenseParams { weights: w.clone(), ..p.clone() };
            dot(&dense(&x, &q).unwrap(), &wts)
        });
        push(out, format!("{tag} weights"), &g.weights, weights);
        let bias = numeric_gradient(&p.bias, |b| {
            let q = DenseParams { bias: b.clone(), ..p.clone() };
            dot(&dense(&x, &q).unwrap(), &wts)
        });
        push(out, format!("{tag} bias"), &g.bias, bias);
    }
}

fn pool_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let (h, w) = (rng.random_range(7..14), rng.random_range(7..14));
    let x = randn(rng, &[h, w, 2], 1.0);
    let (y, idx) = maxpool(&x).unwrap();
    let wts = randn(rng, y.shape(), 1.0);
    let dx = maxpool_backward(&idx, &wts).unwrap();
    push(out, "maxpool input", &dx, numeric_gradient(&x, |x| dot(&maxpool(x).unwrap().0, &wts)));

    let y = global_average_pool(&x).unwrap();
    let wts = randn(rng, y.shape(), 1.0);
    let dx = global_average_pool_backward(x.shape(), &wts).unwrap();
    push(out, "global average pool input", &dx, numeric_gradient(&x, |x| dot(&global_average_pool(x).unwrap(), &wts)));
}

fn resample_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let rows = AreaWeights::new(13, 5).unwrap();
    let cols = AreaWeights::new(11, 4).unwrap();
    let x = randn(rng, &[13, 11, 1], 1.0);
    let wts = randn(rng, &[5, 4, 1], 1.0);
    let dx = area_downsample_backward(&wts, &rows, &cols).unwrap();
    push(out, "area downsample input", &dx, numeric_gradient(&x, |x| dot(&area_downsample(x, &rows, &cols).unwrap(), &wts)));
}

fn softmax_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let z = randn(rng, &[5], 2.0);
    let p = softmax(&z).unwrap();
    let wts = randn(rng, &[5], 1.0);
    let dz = softmax_backward(&p, &wts);
    push(out, "softmax logits", &dz, numeric_gradient(&z, |z| dot(&softmax(z).unwrap(), &wts)));

    let z = randn(rng, &[3], 1.0);
    let p = softmax(&z).unwrap();
    let mut dp = Tensor::zeros(&[3]);
    dp.data_mut()[1] = -1.0 / p.data()[1];
    let dz = softmax_backward(&p, &dp);
    let numeric = numeric_gradient(&z, |z| cross_entropy(&softmax(z).unwrap(), 1).unwrap());
    push(out, "softmax cross-entropy logits", &dz, numeric);
}

/// Crop and pad are mutually adjoint, which is what their backward passes rely on.
fn border_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    let x = randn(rng, &[9, 7, 3], 1.0);
    let y = randn(rng, &[7, 5, 3], 1.0);
    let lhs = dot(&crop_border(&x, 1).unwrap(), &y);
    let rhs = dot(&x, &pad_border(&y, 1).unwrap());
    out.push(Check {
        name: "crop/pad adjoint".into(),
        error: relative_error(&[lhs], &[rhs]),
        coordinates: 1,
        kinks: 0,
    });
}

fn block_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    for variant in Variant::ALL {
        let spec = BlockSpec::new(variant, 2, rng.random_range(1..3));
        let (h, w) = (rng.random_range(6..10), rng.random_range(6..10));
        let x = randn(rng, &[h, w, spec.in_channels], 1.0);
        let mut params = spec.zero_params();
        for (_, t) in params.tensors_mut() {
            *t = randn(rng, t.shape(), 0.5);
        }
        let (y, cache) = block_forward_cached(&x, &spec, &params).unwrap();
        let wts = randn(rng, y.shape(), 1.0);
        let (dx, grads) = block_backward(&x, &spec, &params, &cache, &wts).unwrap();
        let tag = format!("block {variant}");
        push(out, format!("{tag} input"), &dx, numeric_gradient(&x, |x| dot(&block_forward(x, &spec, &params).unwrap(), &wts)));
        for (i, (name, t)) in params.tensors().into_iter().enumerate() {
            let numeric = numeric_gradient(t, |v| {
                let mut q = params.clone();
                *q.tensors_mut()[i].1 = v.clone();
                dot(&block_forward(&x, &spec, &q).unwrap(), &wts)
            });
            push(out, format!("{tag} {name}"), grads.tensors()[i].1, numeric);
        }
    }
}

/// Two blocks on a 29×29 input downsampled to 23×23, with a narrow head.
pub fn shrunken_spec(variant: Variant) -> NetworkSpec {
    NetworkSpec {
        input_side: 29,
        downsample_side: Some(23),
        base_kernels: vec![1, 2],
        head_widths: vec![6, 5],
        ..NetworkSpec::minception(variant, 1)
    }
}

/// Checks one random point of the shrunken network; kinks show up as skipped
/// coordinates in the returned checks.
fn network_point(rng: &mut ChaCha8Rng, variant: Variant) -> Vec<Check> {
    let mut out = Vec::new();
    let spec = shrunken_spec(variant);
    let net = Network::new(&spec).unwrap();
    let mut store = build_network(&spec, rng.random()).unwrap();
    for t in store.params.tensors_mut() {
        if t.shape().len() == 1 {
            *t = randn(rng, t.shape(), 0.1);
        }
    }
    let image = randn(rng, &[29, 29, 1], 1.0);
    // the least likely class keeps -ln p well away from cancellation near p = 1
    let probs = net.forward(&image, &store.params).unwrap();
    let label = Label::ALL
        .into_iter()
        .min_by(|a, b| probs.data()[a.index()].total_cmp(&probs.data()[b.index()]))
        .unwrap();
    let loss = |img: &Tensor, params: &sgqc::NetworkParams| {
        cross_entropy(&net.forward(img, params).unwrap(), label.index()).unwrap()
    };
    let g = net.backprop(&image, label, &store.params).unwrap();
    let tag = format!("network {variant}");
    let numeric = numeric_gradient(&image, |img| loss(img, &store.params));
    push(&mut out, format!("{tag} input"), g.input_grad.as_ref().unwrap(), numeric);
    let names: Vec<String> = store.params.named().into_iter().map(|(n, _)| n).collect();
    let analytic = g.grads.tensors();
    for (i, name) in names.iter().enumerate() {
        let t = store.params.tensors()[i].clone();
        let numeric = numeric_gradient(&t, |v| {
            let mut q = store.params.clone();
            *q.tensors_mut()[i] = v.clone();
            loss(&image, &q)
        });
        push(&mut out, format!("{tag} {name}"), analytic[i], numeric);
    }
    out
}

/// Draws network test points until one is differentiable everywhere probed.
fn network_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) {
    const ATTEMPTS: usize = 5;
    for variant in Variant::ALL {
        let mut checks = network_point(rng, variant);
        for _ in 1..ATTEMPTS {
            if checks.iter().all(|c| c.kinks == 0) {
                break;
            }
            checks = network_point(rng, variant);
        }
        out.extend(checks);
    }
}

/// Runs every check from a fixed seed.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    conv_checks(&mut rng, &mut out);
    dense_checks(&mut rng, &mut out);
    pool_checks(&mut rng, &mut out);
    resample_checks(&mut rng, &mut out);
    softmax_checks(&mut rng, &mut out);
    border_checks(&mut rng, &mut out);
    block_checks(&mut rng, &mut out);
    network_checks(&mut rng, &mut out);
    out
}
