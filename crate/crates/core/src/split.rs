//! Stratified partitioning: train/test splits and k-fold assignment.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::{Label, CLASS_COUNT};

fn class_groups(labels: &[Label], rng: &mut ChaCha8Rng) -> [Vec<usize>; CLASS_COUNT] {
    let mut groups: [Vec<usize>; CLASS_COUNT] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        groups[l.index()].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

/// Per-class quotas summing to `round(total·fraction)` (largest-remainder
/// rounding), never taking the last sample of a class.
fn allocate(counts: &[usize; CLASS_COUNT], fraction: f64) -> [usize; CLASS_COUNT] {
    let n: usize = counts.iter().sum();
    let target = (n as f64 * fraction).round() as usize;
    let cap = |c: usize| counts[c].saturating_sub(1);
    let mut quota = [0usize; CLASS_COUNT];
    let mut remainders = Vec::new();
    for c in 0..CLASS_COUNT {
        let exact = counts[c] as f64 * fraction;
        quota[c] = (exact.floor() as usize).min(cap(c));
        remainders.push((exact - exact.floor(), c));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut assigned: usize = quota.iter().sum();
    // two passes: first by remainder, then anything still below its cap
    for pass in 0..2 {
        for &(rem, c) in &remainders {
            if assigned >= target {
                break;
            }
            if quota[c] < cap(c) && (pass == 1 || rem > 0.0) {
                quota[c] += 1;
                assigned += 1;
            }
        }
    }
    quota
}

/// Stratified random split into `(train, test)` index lists, both sorted.
pub fn stratified_split(labels: &[Label], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(
            "split",
            format!("test fraction must lie strictly between 0 and 1, got {test_fraction}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = class_groups(labels, &mut rng);
    let counts = [groups[0].len(), groups[1].len(), groups[2].len()];
    let quota = allocate(&counts, test_fraction);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, g) in groups.iter().enumerate() {
        test.extend_from_slice(&g[..quota[c]]);
        train.extend_from_slice(&g[quota[c]..]);
        if !g.is_empty() && quota[c] == 0 {
            warn!("split leaves class {} without test samples", Label::ALL[c]);
        }
    }
    if train.is_empty() {
        return Err(Error::Dataset("split leaves the training set empty".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fold index (`0..folds`) for every sample.
///
/// Samples are grouped by class, shuffled, and dealt round-robin so each fold's
/// class counts are within one of proportional. If some present class has fewer
/// samples than folds, plain shuffled folds are used instead.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("folds", format!("need at least 2 folds, got {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::Dataset(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = class_groups(labels, &mut rng);
    let order: Vec<usize> = if groups.iter().any(|g| !g.is_empty() && g.len() < folds) {
        warn!("a class has fewer than {folds} samples; using unstratified folds");
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        all
    } else {
        groups.concat()
    };
    let mut assignment = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}
