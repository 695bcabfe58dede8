use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ArgMatches;
use serde::Serialize;
use spurprobe_core::corpus::{join, load_embeddings};
use spurprobe_core::evaluation::{Prediction, Predictions};
use spurprobe_core::hex::{hex_forward, hex_infer, save_head, train_hex, HexConfig, NaiveFeaturizer, LAMBDA_WARN};
use spurprobe_core::random::derive_seed;
use spurprobe_core::tensor::{predict_classes, siamese_matrix, train_mlp, AdamWConfig, TrainConfig};
use spurprobe_core::{Corpus, LabelScheme, Matrix};

use super::{create_dir, load_corpus, parse_list, write_file, write_json};
use crate::cli::{HexTrainArgs, TrainProbeArgs};
use crate::config::resolve_seed;
use crate::manifest::{dir_manifest, RunManifest};

/// Where a probe's input vectors come from.
enum Features<'a> {
    Pooled(&'a Path),
    Siamese(&'a Path, &'a Path),
}

impl Features<'_> {
    fn from_flags<'a>(
        emb: &'a Option<PathBuf>,
        premise: &'a Option<PathBuf>,
        hypothesis: &'a Option<PathBuf>,
    ) -> Option<Features<'a>> {
        match (emb, premise, hypothesis) {
            (Some(e), _, _) => Some(Features::Pooled(e)),
            (None, Some(p), Some(h)) => Some(Features::Siamese(p, h)),
            _ => None,
        }
    }

    fn record(&self, man: &mut RunManifest, prefix: &str) -> Result<()> {
        match self {
            Features::Pooled(e) => man.input(&format!("{prefix}emb"), e),
            Features::Siamese(p, h) => {
                man.input(&format!("{prefix}premise-emb"), p)?;
                man.input(&format!("{prefix}hypothesis-emb"), h)
            }
        }
    }

    fn load(&self, corpus: &Corpus) -> Result<Matrix> {
        let aligned = |path: &Path| -> Result<Matrix> {
            let m = load_embeddings(path)?;
            let view = join(corpus, &m).with_context(|| format!("aligning {} to the corpus", path.display()))?;
            Ok(view.to_matrix())
        };
        match self {
            Features::Pooled(e) => aligned(e),
            Features::Siamese(p, h) => Ok(siamese_matrix(&aligned(p)?, &aligned(h)?)?),
        }
    }
}

/// Argmax labels (under `scheme`) with their logits.
fn predictions(corpus: &Corpus, logits: &Matrix, scheme: LabelScheme) -> Result<Predictions> {
    let labels = scheme.labels();
    let items = corpus
        .examples
        .iter()
        .zip(predict_classes(logits))
        .enumerate()
        .map(|(i, (ex, c))| Prediction {
            id: ex.id.clone(),
            label: labels[c],
            logits: Some(logits.row(i).to_vec()),
        })
        .collect();
    Ok(Predictions::new(items)?)
}

fn losses_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in losses.iter().enumerate() {
        out.push_str(&format!("{e},{l}\n"));
    }
    out
}

fn optimizer(lr: f64, weight_decay: f64) -> AdamWConfig {
    AdamWConfig {
        lr,
        weight_decay,
        ..AdamWConfig::default()
    }
}

pub fn train_probe(a: TrainProbeArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    let corpus = load_corpus(&a.corpus, a.scheme)?;
    let features = Features::from_flags(&a.emb, &a.premise_emb, &a.hypothesis_emb)
        .context("give --emb or both --premise-emb and --hypothesis-emb")?;
    let x = features.load(&corpus)?;

    let eval = match &a.eval_corpus {
        None => None,
        Some(p) => {
            let f = Features::from_flags(&a.eval_emb, &a.eval_premise_emb, &a.eval_hypothesis_emb)
                .context("--eval-corpus needs --eval-emb or both --eval-premise-emb and --eval-hypothesis-emb")?;
            if matches!((&features, &f), (Features::Pooled(_), Features::Siamese(..)) | (Features::Siamese(..), Features::Pooled(_))) {
                bail!("evaluation features must have the same form as training features");
            }
            let c = load_corpus(p, a.eval_scheme.unwrap_or(a.scheme))?;
            let ex = f.load(&c)?;
            Some((p, f, c, ex))
        }
    };

    let config = TrainConfig {
        hidden: parse_list(&a.hidden)?,
        classes: a.scheme.num_classes(),
        epochs: a.epochs,
        batch_size: a.batch_size,
        optimizer: optimizer(a.lr, a.weight_decay),
        adapter_reduction: a.adapter_reduction,
    };
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();

    create_dir(&a.out)?;
    let mut man = RunManifest::new("train-probe", m, Some(seed))
        .derived("probe-init", derive_seed(seed, "probe-init"))
        .derived("epoch-shuffle", seed);
    man.input("corpus", &a.corpus)?;
    features.record(&mut man, "")?;
    if let Some((p, f, _, _)) = &eval {
        man.input("eval-corpus", p)?;
        f.record(&mut man, "eval-")?;
    }
    let outputs = ["dynamics.jsonl", "losses.csv", "predictions.jsonl"];
    for o in outputs {
        man.output(&a.out.join(o));
    }
    if eval.is_some() {
        man.output(&a.out.join("eval_predictions.jsonl"));
    }
    man.write(&dir_manifest(&a.out))?;

    let out = train_mlp(&config, &x, &corpus.gold_indices(), &ids, seed)?;
    out.log.write(&a.out.join("dynamics.jsonl"))?;
    write_file(&a.out.join("losses.csv"), losses_csv(&out.epoch_losses))?;
    let logits = out.probe.forward(&x)?;
    write_file(
        &a.out.join("predictions.jsonl"),
        predictions(&corpus, &logits, a.scheme)?.to_jsonl(),
    )?;
    if let Some((_, _, c, ex)) = &eval {
        let logits = out.probe.forward(ex)?;
        write_file(
            &a.out.join("eval_predictions.jsonl"),
            predictions(c, &logits, a.scheme)?.to_jsonl(),
        )?;
    }
    if out.skipped_steps > 0 {
        eprintln!("warning: {} updates skipped on non-finite gradients", out.skipped_steps);
    }
    println!(
        "{} examples, {} epochs, final loss {:.6}",
        ids.len(),
        a.epochs,
        out.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(0)
}

#[derive(Serialize)]
struct NaiveInfo {
    dim: usize,
    seed: u64,
}

pub fn naive_features(corpus: &Corpus, featurizer: &NaiveFeaturizer) -> Matrix {
    featurizer.matrix(
        corpus
            .examples
            .iter()
            .map(|e| (e.premise.as_str(), e.hypothesis.as_str())),
    )
}

pub fn hex_train(a: HexTrainArgs, m: &ArgMatches) -> Result<i32> {
    let seed = resolve_seed(a.seed)?;
    if a.naive_dim < 2 {
        bail!("--naive-dim must be at least 2");
    }
    let corpus = load_corpus(&a.corpus, a.scheme)?;
    let main = load_embeddings(&a.main_emb)?;
    let x_main = join(&corpus, &main)
        .with_context(|| format!("aligning {} to the corpus", a.main_emb.display()))?
        .to_matrix();
    let naive_seed = derive_seed(seed, "naive-hash");
    let featurizer = NaiveFeaturizer::new(a.naive_dim, naive_seed);
    let x_naive = naive_features(&corpus, &featurizer);

    let eval = match (&a.eval_corpus, &a.eval_main_emb) {
        (Some(c), Some(e)) => {
            let corpus = load_corpus(c, a.eval_scheme.unwrap_or(a.scheme))?;
            let emb = load_embeddings(e)?;
            let x = join(&corpus, &emb)
                .with_context(|| format!("aligning {} to {}", e.display(), c.display()))?
                .to_matrix();
            Some((c, e, corpus, x))
        }
        _ => None,
    };

    let config = HexConfig {
        dim: a.dim,
        classes: a.scheme.num_classes(),
        epochs: a.epochs,
        batch_size: a.batch_size,
        optimizer: optimizer(a.lr, a.weight_decay),
        lambda: a.lambda,
        fixed_lambda: a.fixed_lambda,
        naive_weight: a.naive_weight,
    };
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();

    create_dir(&a.out)?;
    let mut man = RunManifest::new("hex-train", m, Some(seed))
        .derived("hex-init", derive_seed(seed, "hex-init"))
        .derived("naive-hash", naive_seed)
        .derived("epoch-shuffle", seed);
    man.input("corpus", &a.corpus)?;
    man.input("main-emb", &a.main_emb)?;
    if let Some((c, e, _, _)) = &eval {
        man.input("eval-corpus", c)?;
        man.input("eval-main-emb", e)?;
    }
    for o in ["head", "naive.json", "lambda.csv", "dynamics.jsonl", "losses.csv", "predictions.jsonl"] {
        man.output(&a.out.join(o));
    }
    if eval.is_some() {
        man.output(&a.out.join("eval_predictions.jsonl"));
    }
    man.write(&dir_manifest(&a.out))?;

    let out = train_hex(&config, &x_main, &x_naive, &corpus.gold_indices(), &ids, seed)?;
    create_dir(&a.out.join("head"))?;
    save_head(&out.head, &a.out.join("head"))?;
    write_json(
        &a.out.join("naive.json"),
        &NaiveInfo {
            dim: a.naive_dim,
            seed: naive_seed,
        },
    )?;
    write_file(&a.out.join("lambda.csv"), out.lambda_csv())?;
    out.log.write(&a.out.join("dynamics.jsonl"))?;
    write_file(&a.out.join("losses.csv"), losses_csv(&out.epoch_losses))?;
    let infer = |c: &Corpus, x: &Matrix| -> Result<Matrix> {
        if a.infer_projected {
            Ok(hex_forward(&out.head, x, &naive_features(c, &featurizer))?.f_l)
        } else {
            Ok(hex_infer(&out.head, x)?)
        }
    };
    let logits = infer(&corpus, &x_main)?;
    write_file(
        &a.out.join("predictions.jsonl"),
        predictions(&corpus, &logits, a.scheme)?.to_jsonl(),
    )?;
    if let Some((_, _, c, x)) = &eval {
        let logits = infer(c, x)?;
        write_file(
            &a.out.join("eval_predictions.jsonl"),
            predictions(c, &logits, a.scheme)?.to_jsonl(),
        )?;
    }
    if out.lambda_flagged() {
        eprintln!("warning: lambda exceeded {LAMBDA_WARN:e} during training");
    }
    if out.skipped_steps > 0 {
        eprintln!("warning: {} updates skipped on non-finite gradients", out.skipped_steps);
    }
    println!(
        "{} examples, {} epochs, final loss {:.6}, lambda {:e}",
        ids.len(),
        a.epochs,
        out.epoch_losses.last().copied().unwrap_or(f64::NAN),
        out.head.lambda()
    );
    Ok(0)
}
