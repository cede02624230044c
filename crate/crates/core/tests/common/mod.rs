#![allow(dead_code)]

pub mod contracts;
pub mod gradcheck;
pub mod oracles;
pub mod shapes;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgqc::metrics::ConfusionMatrix;
use sgqc::network::{Network, NetworkSpec};
use sgqc::synth::{derive_seed, sample_gather};
use sgqc::tensor::Tensor;
use sgqc::{Example, Label, TrainConfig, Variant};

/// Test-set confusion counts of the reference evaluation: 970/319/3 correct,
/// 76 good→bad, 15 bad→ugly, 6 bad→good.
pub fn reference_test_confusion() -> ConfusionMatrix {
    ConfusionMatrix {
        counts: [[970, 76, 0], [6, 319, 15], [0, 0, 3]],
    }
}

/// Seed for the overfit fixture's gathers and training run.
pub const OVERFIT_DATA_SEED: u64 = 7;
pub const OVERFIT_TRAIN_SEED: u64 = 0;
/// Epoch at which the overfit fixture first reaches 100% training accuracy.
pub const OVERFIT_FIT_EPOCH: usize = 45;

/// Full-size synthetic gathers cycling good, bad, ugly.
pub fn synthetic_examples(spec: &NetworkSpec, count: usize, seed: u64) -> Vec<Example> {
    let net = Network::new(spec).unwrap();
    (0..count)
        .map(|i| {
            let label = Label::ALL[i % 3];
            let g = sample_gather(label, derive_seed(seed, i as u64)).unwrap();
            Example {
                input: net.prepare(&g.image).unwrap(),
                label,
            }
        })
        .collect()
}

/// The 32-sample balanced overfit set (11 good, 11 bad, 10 ugly).
pub fn overfit_set() -> (NetworkSpec, Vec<Example>, TrainConfig) {
    let spec = NetworkSpec::minception(Variant::Standard, 1);
    let examples = synthetic_examples(&spec, 32, OVERFIT_DATA_SEED);
    // early stopping would cut the run short on a transient plateau
    let cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        seed: OVERFIT_TRAIN_SEED,
        ..TrainConfig::default()
    };
    (spec, examples, cfg)
}

/// Images for the shrunken network whose class is given by the mean gray level.
pub fn separable_examples(spec: &NetworkSpec, per_class: usize, seed: u64) -> Vec<Example> {
    let net = Network::new(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = spec.input_side;
    let mut out = Vec::new();
    for i in 0..3 * per_class {
        let label = Label::ALL[i % 3];
        let level = [0.15, 0.5, 0.85][label.index()];
        let data = (0..side * side).map(|_| level + rng.random_range(-0.02..0.02)).collect();
        let image = Tensor::new(vec![side, side, 1], data).unwrap();
        out.push(Example {
            input: net.prepare(&image).unwrap(),
            label,
        });
    }
    out
}

/// Uniform-noise images with arbitrary labels for the shrunken network.
pub fn noise_examples(spec: &NetworkSpec, count: usize, seed: u64) -> Vec<Example> {
    let net = Network::new(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = spec.input_side;
    (0..count)
        .map(|i| {
            let data = (0..side * side).map(|_| rng.random::<f64>()).collect();
            let image = Tensor::new(vec![side, side, 1], data).unwrap();
            Example {
                input: net.prepare(&image).unwrap(),
                label: Label::ALL[i % 3],
            }
        })
        .collect()
}
