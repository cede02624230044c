//! Labeled dataset generation, CSV manifests, and train/test splitting.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gather::{
    compose, noise_to_signal, render_components, Cavitation, GatherParams, Interference, LabeledGather, NoiseRecipe,
    PressureVariation, ReflectorEvent, Swell, Tugging, GATHER_SIDE,
};
use crate::error::{Error, Result};
use crate::label::{Label, CLASS_COUNT};
use crate::pgm;
use crate::split::stratified_split;

/// Reference class totals (good, bad, ugly) of the surveyed dataset.
pub const REFERENCE_COUNTS: [usize; CLASS_COUNT] = [4410, 2086, 117];

pub const DEFAULT_TEST_FRACTION: f64 = 0.21;

/// Target nsr ranges per class. They sit strictly inside the label thresholds
/// with a margin on each side of every boundary.
pub const NSR_RANGES: [(f64, f64); CLASS_COUNT] = [(0.0, 0.1), (0.4, 0.8), (1.6, 4.0)];

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const IMAGE_DIR: &str = "images";

/// Class proportions of [`REFERENCE_COUNTS`] (66.68%, 31.54%, 1.76%).
pub fn reference_proportions() -> [f64; CLASS_COUNT] {
    let total: usize = REFERENCE_COUNTS.iter().sum();
    REFERENCE_COUNTS.map(|c| c as f64 / total as f64)
}

/// Per-class counts: bad and ugly are rounded, good takes the remainder.
pub fn class_counts(count: usize, proportions: [f64; CLASS_COUNT]) -> Result<[usize; CLASS_COUNT]> {
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || proportions.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::invalid(
            "generate",
            format!("proportions must be non-negative and sum to 1, got {proportions:?}"),
        ));
    }
    let nonzero = proportions.iter().filter(|&&p| p > 0.0).count();
    if count < nonzero {
        return Err(Error::invalid(
            "generate",
            format!("{count} samples cannot cover {nonzero} classes"),
        ));
    }
    let bad = (count as f64 * proportions[1]).round() as usize;
    let ugly = (count as f64 * proportions[2]).round() as usize;
    let good = count
        .checked_sub(bad + ugly)
        .ok_or_else(|| Error::invalid("generate", "rounded class counts exceed the total"))?;
    Ok([good, bad, ugly])
}

/// Mixes a base seed and an index into a well-spread per-item seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn random_params(rng: &mut ChaCha8Rng, seed: u64) -> GatherParams {
    let events = (0..rng.random_range(2..=5))
        .map(|_| ReflectorEvent {
            t0: rng.random_range(20.0..260.0),
            velocity: rng.random_range(1.2..4.0),
            amplitude: rng.random_range(0.5..1.2) * if rng.random_bool(0.8) { 1.0 } else { -1.0 },
            frequency: rng.random_range(0.03..0.08),
        })
        .collect();
    let slope_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    GatherParams {
        n_receivers: GATHER_SIDE,
        n_samples: GATHER_SIDE,
        events,
        noise: NoiseRecipe {
            swell: Swell {
                channels: rng.random_range(4..=40),
                amplitude: 0.0,
            },
            pressure_variation: PressureVariation {
                amplitude: 0.0,
                cutoff: rng.random_range(0.003..0.02),
            },
            tugging: Tugging {
                channels: rng.random_range(5..=60),
                amplitude: 0.0,
            },
            interference: Interference {
                slope: slope_sign * rng.random_range(1.5..3.0),
                amplitude: 0.0,
            },
            cavitation: Cavitation {
                amplitude: 0.0,
                band: rng.random_range(0.04..0.12),
            },
        },
        seed,
    }
}

/// Draws a random gather whose nsr falls in `label`'s target range.
pub fn sample_gather(label: Label, seed: u64) -> Result<LabeledGather> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = random_params(&mut rng, seed);
    let (lo, hi) = NSR_RANGES[label.index()];
    let target = rng.random_range(lo..hi);
    let components = render_components(&params)?;

    // swell always leads the mix; the other families join at random
    let mut weights = [0.0; NoiseRecipe::FAMILIES];
    weights[0] = rng.random_range(0.5..1.0);
    for w in &mut weights[1..] {
        *w = if rng.random_bool(0.5) { rng.random_range(0.05..0.3) } else { 0.0 };
    }
    let energies = components.noise_energies();
    let total: f64 = weights.iter().sum();
    let signal = components.signal_energy();
    let mut amps = [0.0; NoiseRecipe::FAMILIES];
    for k in 0..NoiseRecipe::FAMILIES {
        if weights[k] > 0.0 && energies[k] > 0.0 {
            amps[k] = (target * signal * weights[k] / total / energies[k]).sqrt();
        }
    }
    // families that rendered nothing would leave the target short; rescale
    let achieved = noise_to_signal(&components, &amps);
    if achieved > 0.0 {
        let fix = (target / achieved).sqrt();
        amps.iter_mut().for_each(|a| *a *= fix);
    }
    params.noise.set_amplitudes(amps);
    let gather = compose(&params, &components)?;
    if gather.label != label {
        return Err(Error::Dataset(format!(
            "sampled nsr {} does not map to {label}",
            gather.nsr
        )));
    }
    Ok(gather)
}

/// Shuffled per-sample class plan realizing [`class_counts`] exactly.
pub fn plan_labels(count: usize, proportions: [f64; CLASS_COUNT], seed: u64) -> Result<Vec<Label>> {
    let counts = class_counts(count, proportions)?;
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, counts[l.index()]))
        .collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(labels)
}

/// One row of a dataset manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path relative to the dataset directory.
    pub filename: String,
    pub label: Label,
    pub nsr: f64,
    pub seed: u64,
}

/// Generates `count` gathers into `dir/images/` and writes `dir/manifest.csv`,
/// plus a stratified `train.csv` / `test.csv` split.
pub fn generate_dataset(
    dir: &Path,
    count: usize,
    proportions: [f64; CLASS_COUNT],
    seed: u64,
    test_fraction: f64,
) -> Result<Vec<ManifestEntry>> {
    let labels = plan_labels(count, proportions, seed)?;
    let images = dir.join(IMAGE_DIR);
    fs::create_dir_all(&images).map_err(|e| Error::io(format!("creating {}", images.display()), e))?;
    let entries = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let item_seed = derive_seed(seed, i as u64);
            let gather = sample_gather(label, item_seed)?;
            let filename = format!("{IMAGE_DIR}/gather_{i:06}.pgm");
            pgm::write(&dir.join(&filename), &gather.image)?;
            Ok(ManifestEntry {
                filename,
                label,
                nsr: gather.nsr,
                seed: item_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&dir.join(MANIFEST_FILE), &entries)?;
    let (train, test) = split_train_test(&entries, test_fraction, seed)?;
    write_manifest(&dir.join(TRAIN_FILE), &train)?;
    write_manifest(&dir.join(TEST_FILE), &test)?;
    Ok(entries)
}

/// Stratified random split into `(train, test)` manifests.
pub fn split_train_test(
    entries: &[ManifestEntry],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    let labels: Vec<Label> = entries.iter().map(|e| e.label).collect();
    let (train, test) = stratified_split(&labels, test_fraction, seed)?;
    Ok((
        train.into_iter().map(|i| entries[i].clone()).collect(),
        test.into_iter().map(|i| entries[i].clone()).collect(),
    ))
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["filename", "label", "nsr", "seed"])?;
    for e in entries {
        w.write_record([
            e.filename.clone(),
            e.label.to_string(),
            e.nsr.to_string(),
            e.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::Dataset(format!("{}: row {} is missing column {i}", path.display(), line + 2)))
        };
        let parse_err = |what: &str| Error::Dataset(format!("{}: row {} has a bad {what}", path.display(), line + 2));
        out.push(ManifestEntry {
            filename: field(0)?.to_string(),
            label: field(1)?.parse()?,
            nsr: field(2)?.parse().map_err(|_| parse_err("nsr"))?,
            seed: field(3)?.parse().map_err(|_| parse_err("seed"))?,
        });
    }
    Ok(out)
}

/// Absolute image path for a manifest entry.
pub fn image_path(dir: &Path, entry: &ManifestEntry) -> PathBuf {
    dir.join(&entry.filename)
}
