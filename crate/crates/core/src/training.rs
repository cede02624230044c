//! Loss, Adam, the minibatch training loop with early stopping, and the
//! cross-validation / alpha grid-search drivers.

use std::fmt::Write as _;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blocks::Variant;
use crate::error::{Error, Result};
use crate::label::{Label, CLASS_COUNT};
use crate::metrics::{mean_std, EvalReport};
use crate::network::{build_network, Network, NetworkParams, NetworkSpec, ParamStore};
use crate::split::{stratified_folds, stratified_split};
use crate::tensor::Tensor;

/// Probabilities are floored here before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Fraction of a training set held out for early stopping when no explicit
/// validation set exists.
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

const SHUFFLE_SALT: u64 = 0x5eed_5401_ff1e;

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &Tensor, label: usize) -> Result<f64> {
    let p = probs.data().get(label).ok_or(Error::LabelOutOfRange(label))?;
    Ok(-p.max(PROB_FLOOR).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.patience <= self.max_epochs
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("train config", format!("{self:?}")))
        }
    }
}

/// One bias-corrected Adam update of every parameter; increments the step counter.
pub fn adam_step(store: &mut ParamStore, grads: &NetworkParams, cfg: &TrainConfig) -> Result<()> {
    let grads = grads.tensors();
    let params = store.params.tensors_mut();
    if grads.len() != params.len() {
        return Err(Error::invalid("adam_step", "gradient layout differs from the parameter store"));
    }
    for (p, g) in params.iter().zip(&grads) {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .into_iter()
        .zip(grads)
        .zip(store.first_moment.tensors_mut())
        .zip(store.second_moment.tensors_mut())
    {
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
    Ok(())
}

/// A network-ready input (already through the fixed input stage) and its label.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: Tensor,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainLog {
    pub fn best_val_accuracy(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_accuracy
    }

    /// Line-delimited `epoch,loss,val_acc` records. Wall-clock time is left out
    /// so the file is reproducible.
    pub fn to_lines(&self) -> String {
        let mut s = String::from("epoch,loss,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.8},{:.6}", e.epoch, e.train_loss, e.val_accuracy);
        }
        s
    }
}

fn check_examples(net: &Network, set: &[Example], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Dataset(format!("{what} set is empty")));
    }
    let want = net.prepared_shape();
    if let Some(bad) = set.iter().find(|e| e.input.shape() != want) {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: bad.input.shape().to_vec(),
            right: want.to_vec(),
        });
    }
    Ok(())
}

/// Predicted labels for prepared inputs, in order.
pub fn predict_examples(net: &Network, params: &NetworkParams, set: &[Example]) -> Result<Vec<Label>> {
    set.par_iter()
        .map(|e| {
            let trace = net.forward_prepared(&e.input, params)?;
            Label::from_index(trace.probs.argmax())
        })
        .collect()
}

pub fn evaluate(net: &Network, params: &NetworkParams, set: &[Example]) -> Result<EvalReport> {
    let predicted = predict_examples(net, params, set)?;
    let truth: Vec<Label> = set.iter().map(|e| e.label).collect();
    EvalReport::from_labels(&truth, &predicted)
}

fn accuracy(net: &Network, params: &NetworkParams, set: &[Example]) -> Result<f64> {
    let predicted = predict_examples(net, params, set)?;
    let correct = predicted.iter().zip(set).filter(|(p, e)| **p == e.label).count();
    Ok(correct as f64 / set.len() as f64)
}

/// Trains a fresh network and returns the parameters from the epoch with the
/// best validation accuracy (earliest on ties), rounded to `f32`.
pub fn train(train_set: &[Example], val_set: &[Example], spec: &NetworkSpec, cfg: &TrainConfig) -> Result<(ParamStore, TrainLog)> {
    cfg.validate()?;
    let net = Network::new(spec)?;
    check_examples(&net, train_set, "training")?;
    check_examples(&net, val_set, "validation")?;
    for l in Label::ALL {
        if !train_set.iter().any(|e| e.label == l) {
            warn!("training set has no {l} samples");
        }
    }

    let mut store = build_network(spec, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(usize, f64, NetworkParams)> = None;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<_> = batch
                .par_iter()
                .map(|&i| net.backprop_prepared(&train_set[i].input, train_set[i].label, &store.params))
                .collect::<Result<_>>()?;
            let mut grads = store.params.zeroed();
            for s in &samples {
                grads.add_assign(&s.grads)?;
                loss_sum += s.loss;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut store, &grads, cfg)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_accuracy = accuracy(&net, &store.params, val_set)?;
        let seconds = started.elapsed().as_secs_f64();
        info!("epoch {epoch}: loss {train_loss:.5}, val acc {val_accuracy:.4} ({seconds:.1}s)");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
            seconds,
        });

        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, store.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    let (best_epoch, _, mut params) = best.expect("at least one epoch runs");
    params.round_to_f32();
    store.params = params;
    Ok((
        store,
        TrainLog {
            epochs,
            best_epoch,
            stop_reason,
        },
    ))
}

/// Splits off a stratified validation set and trains on the rest.
pub fn train_with_holdout(
    examples: &[Example],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    val_fraction: f64,
) -> Result<(ParamStore, TrainLog)> {
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let (fit_idx, val_idx) = stratified_split(&labels, val_fraction, cfg.seed)?;
    if val_idx.is_empty() {
        return Err(Error::Dataset("validation split is empty".into()));
    }
    let fit: Vec<Example> = fit_idx.iter().map(|&i| examples[i].clone()).collect();
    let val: Vec<Example> = val_idx.iter().map(|&i| examples[i].clone()).collect();
    train(&fit, &val, spec, cfg)
}

/// Mean ± sample standard deviation of F1-W and per-class F1 across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub f1_weighted: (f64, f64),
    pub f1_per_class: [(f64, f64); CLASS_COUNT],
}

impl MetricSummary {
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let f1w: Vec<f64> = reports.iter().map(|r| r.f1_weighted).collect();
        let mut per = [(0.0, 0.0); CLASS_COUNT];
        for (c, slot) in per.iter_mut().enumerate() {
            let v: Vec<f64> = reports.iter().map(|r| r.per_class[c].f1).collect();
            *slot = mean_std(&v);
        }
        MetricSummary {
            f1_weighted: mean_std(&f1w),
            f1_per_class: per,
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn pm(v: (f64, f64)) -> String {
    format!("{} ± {}", pct(v.0), pct(v.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub folds: Vec<EvalReport>,
    pub summary: MetricSummary,
}

impl CrossValReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,f1_w,f1_g,f1_b,f1_u\n");
        for (i, r) in self.folds.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                i + 1,
                r.f1_weighted,
                r.per_class[0].f1,
                r.per_class[1].f1,
                r.per_class[2].f1
            );
        }
        let m = &self.summary;
        let _ = writeln!(
            s,
            "mean,{:.6},{:.6},{:.6},{:.6}",
            m.f1_weighted.0, m.f1_per_class[0].0, m.f1_per_class[1].0, m.f1_per_class[2].0
        );
        let _ = writeln!(
            s,
            "stddev,{:.6},{:.6},{:.6},{:.6}",
            m.f1_weighted.1, m.f1_per_class[0].1, m.f1_per_class[1].1, m.f1_per_class[2].1
        );
        s
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:>18}{:>18}{:>18}{:>18}", "Fold", "F1-W (%)", "F1-G (%)", "F1-B (%)", "F1-U (%)");
        for (i, r) in self.folds.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<8}{:>18}{:>18}{:>18}{:>18}",
                i + 1,
                pct(r.f1_weighted),
                pct(r.per_class[0].f1),
                pct(r.per_class[1].f1),
                pct(r.per_class[2].f1)
            );
        }
        let m = &self.summary;
        let _ = writeln!(
            s,
            "{:<8}{:>18}{:>18}{:>18}{:>18}",
            "mean",
            pm(m.f1_weighted),
            pm(m.f1_per_class[0]),
            pm(m.f1_per_class[1]),
            pm(m.f1_per_class[2])
        );
        s
    }
}

/// k-fold cross-validation. Each fold trains on the other folds (minus a
/// stratified early-stopping holdout) with seed `cfg.seed + fold`.
pub fn cross_validate(examples: &[Example], spec: &NetworkSpec, cfg: &TrainConfig, folds: usize) -> Result<CrossValReport> {
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let assignment = stratified_folds(&labels, folds, cfg.seed)?;
    let reports = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (held, rest): (Vec<usize>, Vec<usize>) = (0..examples.len()).partition(|&i| assignment[i] == k);
            let held: Vec<Example> = held.iter().map(|&i| examples[i].clone()).collect();
            let rest: Vec<Example> = rest.iter().map(|&i| examples[i].clone()).collect();
            let fold_cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(k as u64),
                ..cfg.clone()
            };
            let (store, log) = train_with_holdout(&rest, spec, &fold_cfg, DEFAULT_VAL_FRACTION)?;
            let report = evaluate(&Network::new(spec)?, &store.params, &held)?;
            info!(
                "fold {}/{folds}: best epoch {}, F1-W {:.4}",
                k + 1,
                log.best_epoch,
                report.f1_weighted
            );
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossValReport {
        summary: MetricSummary::from_reports(&reports),
        folds: reports,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub alpha: usize,
    pub report: CrossValReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchReport {
    pub variant: Variant,
    pub rows: Vec<GridRow>,
    /// Index into `rows` with the highest mean F1-W (first on ties).
    pub best: usize,
}

impl GridSearchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,f1_w_mean,f1_w_std,f1_g_mean,f1_g_std,f1_b_mean,f1_b_std,f1_u_mean,f1_u_std,best\n");
        for (i, row) in self.rows.iter().enumerate() {
            let m = &row.report.summary;
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                row.alpha,
                m.f1_weighted.0,
                m.f1_weighted.1,
                m.f1_per_class[0].0,
                m.f1_per_class[0].1,
                m.f1_per_class[1].0,
                m.f1_per_class[1].1,
                m.f1_per_class[2].0,
                m.f1_per_class[2].1,
                i == self.best
            );
        }
        s
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:>18}{:>18}{:>18}{:>18}", "alpha", "F1-W (%)", "F1-G (%)", "F1-B (%)", "F1-U (%)");
        for (i, row) in self.rows.iter().enumerate() {
            let m = &row.report.summary;
            let _ = writeln!(
                s,
                "{:<8}{:>18}{:>18}{:>18}{:>18}{}",
                row.alpha,
                pm(m.f1_weighted),
                pm(m.f1_per_class[0]),
                pm(m.f1_per_class[1]),
                pm(m.f1_per_class[2]),
                if i == self.best { "  *best" } else { "" }
            );
        }
        s
    }
}

/// Cross-validates the standard architecture once per alpha.
pub fn grid_search_alpha(
    examples: &[Example],
    variant: Variant,
    alphas: &[usize],
    cfg: &TrainConfig,
    folds: usize,
) -> Result<GridSearchReport> {
    if alphas.is_empty() {
        return Err(Error::invalid("grid search", "no alpha values given"));
    }
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let spec = NetworkSpec::minception(variant, alpha);
            Ok(GridRow {
                alpha,
                report: cross_validate(examples, &spec, cfg, folds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.report.summary.f1_weighted.0 > rows[best].report.summary.f1_weighted.0 {
            best = i;
        }
    }
    Ok(GridSearchReport { variant, rows, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_values() {
        let u = Tensor::from_vec(vec![1.0 / 3.0; 3]);
        assert!((cross_entropy(&u, 2).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&Tensor::from_vec(vec![0.0, 1.0, 0.0]), 1).unwrap(), 0.0);
        let q = Tensor::from_vec(vec![0.25, 0.5, 0.25]);
        assert!((cross_entropy(&q, 0).unwrap() - 4f64.ln()).abs() < 1e-12);
        let z = Tensor::from_vec(vec![0.0, 1.0, 0.0]);
        assert!((cross_entropy(&z, 0).unwrap() - 1e12f64.ln()).abs() < 1e-9);
        assert!(cross_entropy(&u, 3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 200,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
