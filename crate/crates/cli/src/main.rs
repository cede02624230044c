//! `sgqc`: generate synthetic gathers, train and evaluate MinceptionNet models.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sgqc::checkpoint;
use sgqc::data::load_split;
use sgqc::network::{forward, label_from_probs, Network, NetworkSpec};
use sgqc::pgm;
use sgqc::synth::{class_counts, generate_dataset, reference_proportions, DEFAULT_TEST_FRACTION, MANIFEST_FILE, TEST_FILE, TRAIN_FILE};
use sgqc::training::{cross_validate, evaluate, grid_search_alpha, train_with_holdout, DEFAULT_VAL_FRACTION};
use sgqc::{Example, Label, TrainConfig, Variant};

/// Exit codes, one per failure class.
mod exit {
    pub const BAD_FLAG: u8 = 2;
    pub const UNREADABLE: u8 = 3;
    pub const SHAPE: u8 = 4;
    pub const CHECKPOINT: u8 = 5;
    pub const OTHER: u8 = 1;
}

#[derive(Parser, Debug)]
#[command(name = "sgqc", version, about = "Shot-gather quality classification with MinceptionNet")]
struct Cli {
    /// Seed for generation, initialization, shuffling and splits.
    #[arg(long, global = true, env = "SGQC_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labeled synthetic dataset (images, manifest, train/test split) to --out.
    Generate {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Class shares good,bad,ugly (default: the reference mix).
        #[arg(long, value_parser = parse_proportions)]
        proportions: Option<[f64; 3]>,
        #[arg(long, default_value_t = DEFAULT_TEST_FRACTION, value_parser = parse_fraction)]
        test_fraction: f64,
    },
    /// Train on DIR/train.csv and write a checkpoint plus train_log.csv.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = DEFAULT_VAL_FRACTION, value_parser = parse_fraction)]
        val_fraction: f64,
        /// Checkpoint path; relative paths are placed under --out.
        #[arg(long, default_value = "model.mncp")]
        model: PathBuf,
    },
    /// Evaluate a checkpoint on DIR/test.csv; writes eval.csv, eval.txt and confusion matrices.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Manifest inside DIR to evaluate.
        #[arg(long, default_value = TEST_FILE)]
        manifest: String,
    },
    /// Print the label and class probabilities for one 299×299 PGM.
    Predict {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Stratified k-fold cross-validation; writes crossval.csv and crossval.txt.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
        folds: u32,
    },
    /// Cross-validate once per alpha; writes gridsearch.csv and gridsearch.txt.
    Gridsearch {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "a", value_parser = parse_variant)]
        variant: Variant,
        /// Alphas as a list and/or ranges, e.g. `1-10` or `1,2,8`.
        #[arg(long, default_value = "1-10", value_parser = parse_alphas)]
        alphas: Alphas,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
        folds: u32,
    },
}

#[derive(Args, Debug)]
struct NetArgs {
    /// Block variant: a standard, b residual, c attention, d squeeze-excitation.
    #[arg(long, default_value = "a", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    alpha: u32,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    epochs: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    patience: u32,
    #[arg(long, default_value_t = 0.001, value_parser = parse_rate)]
    lr: f64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    batch: u32,
}

impl FitArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch as usize,
            max_epochs: self.epochs as usize,
            patience: self.patience as usize,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Alphas(Vec<usize>);

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: sgqc::Error| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number strictly between 0 and 1, got {s:?}")),
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_proportions(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad share {p:?}")))
        .collect::<Result<_, _>>()?;
    let shares: [f64; 3] = parts.try_into().map_err(|_| "expected three shares g,b,u".to_string())?;
    if shares.iter().any(|p| *p < 0.0) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(format!("shares must be non-negative and sum to 1, got {s:?}"));
    }
    Ok(shares)
}

fn parse_alphas(s: &str) -> Result<Alphas, String> {
    let bad = || format!("bad alpha list {s:?}");
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    out.dedup();
    Ok(Alphas(out))
}

/// A failure with its exit code and one-line diagnostic.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<sgqc::Error> for Failure {
    fn from(e: sgqc::Error) -> Self {
        use sgqc::Error as E;
        let code = match &e {
            E::Io { .. } | E::Image { .. } | E::Csv(_) => exit::UNREADABLE,
            E::ShapeMismatch { .. } => exit::SHAPE,
            E::Checkpoint(_) => exit::CHECKPOINT,
            E::InvalidInput { .. } => exit::BAD_FLAG,
            _ => exit::OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn write_out(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure {
        code: exit::UNREADABLE,
        message: format!("writing {}: {e}", path.display()),
    })
}

/// Examples for training-style commands: `train.csv` when present, else the full manifest.
fn training_examples(dir: &Path, spec: &NetworkSpec) -> Result<Vec<Example>, Failure> {
    let manifest = if dir.join(TRAIN_FILE).exists() { TRAIN_FILE } else { MANIFEST_FILE };
    let net = Network::new(spec)?;
    let (_, examples) = load_split(dir, manifest, &net)?;
    info!("loaded {} examples from {}", examples.len(), dir.join(manifest).display());
    Ok(examples)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global();
    }
    fs::create_dir_all(&cli.out).map_err(|e| Failure {
        code: exit::UNREADABLE,
        message: format!("creating {}: {e}", cli.out.display()),
    })?;
    let out = &cli.out;
    match cli.command {
        Command::Generate {
            count,
            proportions,
            test_fraction,
        } => {
            let proportions = proportions.unwrap_or_else(reference_proportions);
            let counts = class_counts(count, proportions)?;
            let entries = generate_dataset(out, count, proportions, cli.seed, test_fraction)?;
            println!(
                "wrote {} gathers to {} (good {}, bad {}, ugly {})",
                entries.len(),
                out.display(),
                counts[0],
                counts[1],
                counts[2]
            );
        }
        Command::Train {
            data,
            net,
            fit,
            val_fraction,
            model,
        } => {
            let spec = NetworkSpec::minception(net.variant, net.alpha as usize);
            let cfg = fit.config(cli.seed);
            cfg.validate()?;
            let examples = training_examples(&data, &spec)?;
            let (store, log) = train_with_holdout(&examples, &spec, &cfg, val_fraction)?;
            let model = out.join(model);
            checkpoint::save(&store, &model)?;
            write_out(&out.join("train_log.csv"), log.to_lines())?;
            println!(
                "best epoch {} of {} (validation accuracy {:.4}); model written to {}",
                log.best_epoch,
                log.epochs.len(),
                log.best_val_accuracy(),
                model.display()
            );
        }
        Command::Eval { data, model, manifest } => {
            let store = checkpoint::load(&model)?;
            let net = Network::new(&store.spec)?;
            let (_, examples) = load_split(&data, &manifest, &net)?;
            let report = evaluate(&net, &store.params, &examples)?;
            write_out(&out.join("eval.csv"), report.to_csv())?;
            write_out(&out.join("eval.txt"), report.render_table())?;
            write_out(&out.join("confusion.csv"), report.confusion.to_csv())?;
            write_out(&out.join("confusion_normalized.csv"), report.confusion.normalized_csv())?;
            print!("{}", report.render_table());
        }
        Command::Predict { image, model } => {
            let store = checkpoint::load(&model)?;
            let probs = forward(&pgm::read(&image)?, &store)?;
            let label: Label = label_from_probs(&probs)?;
            let p = probs.data();
            println!("{label} {:.6} {:.6} {:.6}", p[0], p[1], p[2]);
        }
        Command::Crossval { data, net, fit, folds } => {
            let spec = NetworkSpec::minception(net.variant, net.alpha as usize);
            let cfg = fit.config(cli.seed);
            cfg.validate()?;
            let examples = training_examples(&data, &spec)?;
            let report = cross_validate(&examples, &spec, &cfg, folds as usize)?;
            write_out(&out.join("crossval.csv"), report.to_csv())?;
            write_out(&out.join("crossval.txt"), report.render_table())?;
            print!("{}", report.render_table());
        }
        Command::Gridsearch {
            data,
            variant,
            alphas,
            fit,
            folds,
        } => {
            let cfg = fit.config(cli.seed);
            cfg.validate()?;
            let examples = training_examples(&data, &NetworkSpec::minception(variant, 1))?;
            let report = grid_search_alpha(&examples, variant, &alphas.0, &cfg, folds as usize)?;
            write_out(&out.join("gridsearch.csv"), report.to_csv())?;
            write_out(&out.join("gridsearch.txt"), report.render_table())?;
            print!("{}", report.render_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::BAD_FLAG } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sgqc: {f}");
            ExitCode::from(f.code)
        }
    }
}
