//! Full MinceptionNet: area downsampling, four blocks each followed by 5×5/2 max
//! pooling, then a 32-32-3 dense head and softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::blocks::{block_backward, block_forward_cached, BlockCache, BlockParams, BlockSpec, Variant, DEFAULT_SE_REDUCTION};
use crate::error::{Error, Result};
use crate::label::{Label, CLASS_COUNT};
use crate::layers::{
    area_downsample, area_downsample_backward, dense, dense_backward, maxpool, maxpool_backward, maxpool_output_side,
    Activation, AreaWeights, DenseParams, PoolIndices,
};
use crate::tensor::{softmax, softmax_backward, Tensor};
use crate::training::{cross_entropy, PROB_FLOOR};

pub const INPUT_SIDE: usize = 299;
pub const DOWNSAMPLED_SIDE: usize = 99;
pub const BASE_KERNELS: [usize; 4] = [1, 2, 4, 8];
pub const HEAD_WIDTHS: [usize; 2] = [32, 32];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub variant: Variant,
    pub alpha: usize,
    /// Side of the square single-channel input image.
    pub input_side: usize,
    /// Side after area downsampling; `None` feeds the input to block 1 directly.
    pub downsample_side: Option<usize>,
    /// Per-block kernel counts before the `alpha` multiplier.
    pub base_kernels: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub class_count: usize,
    pub se_reduction: usize,
}

impl NetworkSpec {
    /// The standard architecture: 299×299 input, blocks with `[1,2,4,8]·α` kernels.
    pub fn minception(variant: Variant, alpha: usize) -> Self {
        NetworkSpec {
            variant,
            alpha,
            input_side: INPUT_SIDE,
            downsample_side: Some(DOWNSAMPLED_SIDE),
            base_kernels: BASE_KERNELS.to_vec(),
            head_widths: HEAD_WIDTHS.to_vec(),
            class_count: CLASS_COUNT,
            se_reduction: DEFAULT_SE_REDUCTION,
        }
    }

    pub fn block_kernels(&self) -> Vec<usize> {
        self.base_kernels.iter().map(|k| k * self.alpha).collect()
    }

    pub fn block_specs(&self) -> Vec<BlockSpec> {
        let mut in_channels = 1;
        self.block_kernels()
            .into_iter()
            .map(|n| {
                let spec = BlockSpec {
                    variant: self.variant,
                    n_kernels: n,
                    in_channels,
                    se_reduction: self.se_reduction,
                };
                in_channels = spec.out_channels();
                spec
            })
            .collect()
    }

    /// True when this is the standard architecture for some variant and alpha.
    pub fn is_standard(&self) -> bool {
        *self == NetworkSpec::minception(self.variant, self.alpha)
    }

    /// Closed-form output shape after every stage, starting with the input.
    pub fn layer_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let mut shapes = vec![("input".to_string(), vec![self.input_side, self.input_side, 1])];
        let mut side = self.input_side;
        if let Some(d) = self.downsample_side {
            side = d;
            shapes.push(("downsample".into(), vec![side, side, 1]));
        }
        for (i, spec) in self.block_specs().iter().enumerate() {
            side -= 2;
            let channels = spec.out_channels();
            shapes.push((format!("block{}", i + 1), vec![side, side, channels]));
            side = maxpool_output_side(side).expect("validated");
            shapes.push((format!("pool{}", i + 1), vec![side, side, channels]));
        }
        for (i, w) in self.head_widths.iter().enumerate() {
            shapes.push((format!("fc{}", i + 1), vec![*w]));
        }
        shapes.push((format!("fc{}", self.head_widths.len() + 1), vec![self.class_count]));
        shapes.push(("softmax".into(), vec![self.class_count]));
        Ok(shapes)
    }

    fn feature_len(&self) -> usize {
        let mut side = self.downsample_side.unwrap_or(self.input_side);
        for _ in &self.base_kernels {
            side = maxpool_output_side(side - 2).expect("validated");
        }
        side * side * 2 * self.base_kernels.last().copied().unwrap_or(0) * self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("network spec", reason));
        if self.alpha == 0 || self.base_kernels.is_empty() || self.base_kernels.contains(&0) {
            return bad(format!("alpha and kernel counts must be positive: {self:?}"));
        }
        if self.class_count < 2 || self.head_widths.contains(&0) || self.se_reduction == 0 {
            return bad(format!("invalid head: {self:?}"));
        }
        let mut side = match self.downsample_side {
            Some(d) if d >= self.input_side => return bad(format!("cannot downsample {} to {d}", self.input_side)),
            Some(d) => d,
            None => self.input_side,
        };
        for i in 0..self.base_kernels.len() {
            match side.checked_sub(2).and_then(maxpool_output_side) {
                Some(s) => side = s,
                None => return bad(format!("spatial extent {side} too small for block {}", i + 1)),
            }
        }
        Ok(())
    }

    /// Parameters with correct shapes and zero values.
    pub fn zero_params(&self) -> NetworkParams {
        let blocks = self.block_specs().iter().map(BlockSpec::zero_params).collect();
        let mut head = Vec::new();
        let mut width = self.feature_len();
        for (i, &w) in self.head_widths.iter().enumerate() {
            let act = if i == 0 { Activation::Relu } else { Activation::Linear };
            head.push(DenseParams::zeros(width, w, act));
            width = w;
        }
        head.push(DenseParams::zeros(width, self.class_count, Activation::Linear));
        NetworkParams { blocks, head }
    }
}

/// Learnable tensors of a whole network; also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub blocks: Vec<BlockParams>,
    pub head: Vec<DenseParams>,
}

impl NetworkParams {
    /// `(layer path, tensor)` pairs in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, t) in b.tensors() {
                out.push((format!("block{}.{name}", i + 1), t));
            }
        }
        for (i, d) in self.head.iter().enumerate() {
            out.push((format!("fc{}.weights", i + 1), &d.weights));
            out.push((format!("fc{}.bias", i + 1), &d.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.tensors_mut().into_iter().map(|(_, t)| t));
        }
        for d in &mut self.head {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zeroed(&self) -> NetworkParams {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &NetworkParams) -> Result<()> {
        let others = other.tensors();
        let mine = self.tensors_mut();
        if mine.len() != others.len() {
            return Err(Error::invalid("params", "parameter sets differ in layout"));
        }
        for (a, b) in mine.into_iter().zip(others) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.scale(factor);
        }
    }

    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.round_to_f32();
        }
    }
}

/// Parameters plus Adam moment state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub spec: NetworkSpec,
    pub seed: u64,
    pub params: NetworkParams,
    pub first_moment: NetworkParams,
    pub second_moment: NetworkParams,
    pub step: u64,
}

impl ParamStore {
    pub fn from_params(spec: NetworkSpec, seed: u64, params: NetworkParams) -> Self {
        let zeros = params.zeroed();
        ParamStore {
            spec,
            seed,
            first_moment: zeros.clone(),
            second_moment: zeros,
            params,
            step: 0,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        self.params.named()
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }
}

/// Builds a network with seeded initialization.
///
/// Convolution kernels draw from `N(0, 2/fan_in)`, dense weights from
/// `U(±sqrt(6/(fan_in+fan_out)))`, biases start at zero. Values are rounded to
/// `f32` so a freshly built store survives a checkpoint round trip unchanged.
pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<ParamStore> {
    spec.validate()?;
    let mut params = spec.zero_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        match *t.shape() {
            [kh, kw, cin, _] => {
                let std = (2.0 / (kh * kw * cin) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                t.data_mut().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            }
            [fan_in, fan_out] => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
            }
            _ => {}
        }
    }
    params.round_to_f32();
    Ok(ParamStore::from_params(spec.clone(), seed, params))
}

/// Precomputed geometry for running a [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    blocks: Vec<BlockSpec>,
    resample: Option<AreaWeights>,
}

/// Per-stage values recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    block_inputs: Vec<Tensor>,
    block_caches: Vec<BlockCache>,
    pools: Vec<PoolIndices>,
    pool_shape: Vec<usize>,
    head_inputs: Vec<Tensor>,
    head_outputs: Vec<Tensor>,
    pub probs: Tensor,
}

impl ForwardTrace {
    /// Output shape of every stage after the input stage, in layer order.
    pub fn stage_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for (i, pool) in self.pools.iter().enumerate() {
            out.push(pool.input_shape().to_vec());
            out.push(match self.block_inputs.get(i + 1) {
                Some(next) => next.shape().to_vec(),
                None => self.pool_shape.clone(),
            });
        }
        out.extend(self.head_outputs.iter().map(|t| t.shape().to_vec()));
        out.push(self.probs.shape().to_vec());
        out
    }
}

/// Result of one sample's forward and backward pass.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub probs: Tensor,
    pub grads: NetworkParams,
    /// Gradient with respect to the raw network input.
    pub input_grad: Option<Tensor>,
}

impl Network {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let resample = spec
            .downsample_side
            .map(|d| AreaWeights::new(spec.input_side, d))
            .transpose()?;
        Ok(Network {
            spec: spec.clone(),
            blocks: spec.block_specs(),
            resample,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Shape of the tensor block 1 consumes.
    pub fn prepared_shape(&self) -> [usize; 3] {
        let s = self.spec.downsample_side.unwrap_or(self.spec.input_side);
        [s, s, 1]
    }

    /// Applies the fixed (non-learnable) input stage: shape check and downsampling.
    pub fn prepare(&self, image: &Tensor) -> Result<Tensor> {
        let side = self.spec.input_side;
        if image.shape() != [side, side, 1] {
            return Err(Error::ShapeMismatch {
                op: "network input",
                left: image.shape().to_vec(),
                right: vec![side, side, 1],
            });
        }
        if !image.is_finite() {
            return Err(Error::invalid("network input", "image contains non-finite values"));
        }
        match &self.resample {
            Some(a) => area_downsample(image, a, a),
            None => Ok(image.clone()),
        }
    }

    /// Forward pass from a prepared input, recording everything backward needs.
    pub fn forward_prepared(&self, x: &Tensor, params: &NetworkParams) -> Result<ForwardTrace> {
        if x.shape() != self.prepared_shape() {
            return Err(Error::ShapeMismatch {
                op: "forward",
                left: x.shape().to_vec(),
                right: self.prepared_shape().to_vec(),
            });
        }
        if params.blocks.len() != self.blocks.len() || params.head.len() != self.spec.head_widths.len() + 1 {
            return Err(Error::invalid("forward", "parameters do not match the network spec"));
        }
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        let mut pools = Vec::with_capacity(self.blocks.len());
        let mut current = x.clone();
        for (spec, p) in self.blocks.iter().zip(&params.blocks) {
            let (y, cache) = block_forward_cached(&current, spec, p)?;
            let (pooled, idx) = maxpool(&y)?;
            block_inputs.push(current);
            block_caches.push(cache);
            pools.push(idx);
            current = pooled;
        }
        let pool_shape = current.shape().to_vec();
        let mut h = current.reshape(vec![pool_shape.iter().product()])?;
        let mut head_inputs = Vec::with_capacity(params.head.len());
        let mut head_outputs = Vec::with_capacity(params.head.len());
        for d in &params.head {
            let y = dense(&h, d)?;
            head_inputs.push(h);
            head_outputs.push(y.clone());
            h = y;
        }
        let probs = softmax(&h)?;
        Ok(ForwardTrace {
            block_inputs,
            block_caches,
            pools,
            pool_shape,
            head_inputs,
            head_outputs,
            probs,
        })
    }

    /// Class probabilities for a raw input image.
    pub fn forward(&self, image: &Tensor, params: &NetworkParams) -> Result<Tensor> {
        let x = self.prepare(image)?;
        Ok(self.forward_prepared(&x, params)?.probs)
    }

    /// Cross-entropy loss and parameter gradients for one prepared sample.
    pub fn backprop_prepared(&self, x: &Tensor, label: Label, params: &NetworkParams) -> Result<SampleGradient> {
        let trace = self.forward_prepared(x, params)?;
        let (grads, dx) = self.backward(&trace, label, params)?;
        Ok(SampleGradient {
            loss: cross_entropy(&trace.probs, label.index())?,
            probs: trace.probs,
            grads,
            input_grad: Some(dx),
        })
    }

    /// Like [`Network::backprop_prepared`] but starting from the raw image, so the
    /// input gradient also passes back through the downsampling stage.
    pub fn backprop(&self, image: &Tensor, label: Label, params: &NetworkParams) -> Result<SampleGradient> {
        let x = self.prepare(image)?;
        let mut g = self.backprop_prepared(&x, label, params)?;
        if let (Some(a), Some(dx)) = (&self.resample, g.input_grad.take()) {
            g.input_grad = Some(area_downsample_backward(&dx, a, a)?);
        }
        Ok(g)
    }

    fn backward(&self, trace: &ForwardTrace, label: Label, params: &NetworkParams) -> Result<(NetworkParams, Tensor)> {
        let probs = &trace.probs;
        let target = label.index();
        if target >= probs.len() {
            return Err(Error::LabelOutOfRange(target));
        }
        // d(-ln max(p, floor))/dp
        let mut dprobs = vec![0.0; probs.len()];
        if probs.data()[target] >= PROB_FLOOR {
            dprobs[target] = -1.0 / probs.data()[target];
        }
        let mut grad = softmax_backward(probs, &Tensor::from_vec(dprobs));

        let mut head_grads = Vec::with_capacity(params.head.len());
        for ((d, x), y) in params
            .head
            .iter()
            .zip(&trace.head_inputs)
            .zip(&trace.head_outputs)
            .rev()
        {
            let (dx, g) = dense_backward(x, d, y, &grad)?;
            head_grads.push(g);
            grad = dx;
        }
        head_grads.reverse();

        let mut grad = grad.reshape(trace.pool_shape.clone())?;
        let mut block_grads = Vec::with_capacity(self.blocks.len());
        for i in (0..self.blocks.len()).rev() {
            let dy = maxpool_backward(&trace.pools[i], &grad)?;
            let (dx, g) = block_backward(
                &trace.block_inputs[i],
                &self.blocks[i],
                &params.blocks[i],
                &trace.block_caches[i],
                &dy,
            )?;
            block_grads.push(g);
            grad = dx;
        }
        block_grads.reverse();
        Ok((
            NetworkParams {
                blocks: block_grads,
                head: head_grads,
            },
            grad,
        ))
    }
}

/// Class probabilities for a raw image under the store's own spec.
pub fn forward(image: &Tensor, store: &ParamStore) -> Result<Tensor> {
    Network::new(&store.spec)?.forward(image, &store.params)
}

/// Most probable class; ties resolve toward the lower class index.
pub fn predict(image: &Tensor, store: &ParamStore) -> Result<Label> {
    label_from_probs(&forward(image, store)?)
}

pub fn label_from_probs(probs: &Tensor) -> Result<Label> {
    Label::from_index(probs.argmax())
}
