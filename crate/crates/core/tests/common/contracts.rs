//! End-to-end reproducibility checks shared by the integration tests and the
//! acceptance runner.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgqc::checkpoint;
use sgqc::data::load_split;
use sgqc::network::{build_network, forward, Network, NetworkSpec};
use sgqc::synth::{generate_dataset, reference_proportions, TEST_FILE, TRAIN_FILE};
use sgqc::tensor::Tensor;
use sgqc::training::{cross_validate, evaluate, train_with_holdout, DEFAULT_VAL_FRACTION};
use sgqc::{TrainConfig, Variant};

/// Every byte a generate → train → eval → crossval pipeline writes.
fn pipeline_artifacts(dir: &Path, threads: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let err = |e: sgqc::Error| e.to_string();
        generate_dataset(dir, 40, reference_proportions(), 3, 0.25).map_err(err)?;
        let spec = NetworkSpec::minception(Variant::SqueezeExcitation, 1);
        let net = Network::new(&spec).map_err(err)?;
        let (_, train) = load_split(dir, TRAIN_FILE, &net).map_err(err)?;
        let (_, test) = load_split(dir, TEST_FILE, &net).map_err(err)?;
        let cfg = TrainConfig {
            batch_size: 8,
            max_epochs: 3,
            patience: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let (store, log) = train_with_holdout(&train, &spec, &cfg, DEFAULT_VAL_FRACTION).map_err(err)?;
        let report = evaluate(&net, &store.params, &test).map_err(err)?;
        let cv = cross_validate(&train, &spec, &TrainConfig { max_epochs: 2, ..cfg }, 3).map_err(err)?;
        let mut out = vec![
            ("model.mncp".to_string(), checkpoint::encode(&store).map_err(err)?),
            ("train_log.csv".to_string(), log.to_lines().into_bytes()),
            ("report.csv".to_string(), report.to_csv().into_bytes()),
            ("confusion.csv".to_string(), report.confusion.to_csv().into_bytes()),
            ("crossval.csv".to_string(), cv.to_csv().into_bytes()),
        ];
        for name in ["manifest.csv", TRAIN_FILE, TEST_FILE] {
            out.push((name.to_string(), fs::read(dir.join(name)).map_err(|e| e.to_string())?));
        }
        Ok(out)
    })
}

/// Two runs with identical seeds (one single-threaded, one with three
/// workers) must write identical bytes.
pub fn determinism() -> Result<(), String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline_artifacts(a.path(), 1)?;
    let second = pipeline_artifacts(b.path(), 3)?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(())
}

/// save → load → forward is bitwise identical on 10 random inputs per variant.
pub fn checkpoint_round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (i, variant) in Variant::ALL.into_iter().enumerate() {
        let alpha = 1 + i % 2;
        let store = build_network(&NetworkSpec::minception(variant, alpha), rng.random()).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{variant}.mncp"));
        checkpoint::save(&store, &path).map_err(|e| e.to_string())?;
        let back = checkpoint::load(&path).map_err(|e| e.to_string())?;
        if back.spec != store.spec || back.params != store.params {
            return Err(format!("{variant}: loaded store differs"));
        }
        for _ in 0..10 {
            let data = (0..299 * 299).map(|_| rng.random::<f64>()).collect();
            let x = Tensor::new(vec![299, 299, 1], data).map_err(|e| e.to_string())?;
            let p = forward(&x, &store).map_err(|e| e.to_string())?;
            let q = forward(&x, &back).map_err(|e| e.to_string())?;
            if p.data().iter().zip(q.data()).any(|(u, v)| u.to_bits() != v.to_bits()) {
                return Err(format!("{variant}: forward differs after reload"));
            }
        }
    }
    Ok(())
}
