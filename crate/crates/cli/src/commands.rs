use std::path::{Path, PathBuf};

use dgn_core::corpus::{generate_synthetic_corpus, Corpus, Split, SyntheticSpec};
use dgn_core::iodp::{build_prototype, DispersionMetric, Prototype};
use dgn_core::model::{evaluate, train as fit, AblationMode, DgnModel, TrainConfig};
use dgn_core::write_atomic;

use crate::{EvalArgs, Failure, GenArgs, IodpArgs, TrainArgs};

type Outcome = Result<(), Failure>;

/// `test.manifest` loads as the test split, anything else as training data.
pub fn load_corpus(manifest: &Path) -> Result<Corpus, Failure> {
    let split = match manifest.file_stem().and_then(|s| s.to_str()) {
        Some("test") => Split::Test,
        _ => Split::Train,
    };
    Corpus::load(manifest, split).map_err(|e| Failure::data(format!("{}: {e}", manifest.display())))
}

pub fn load_prototype(path: &Path) -> Result<Prototype, Failure> {
    Prototype::load(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn gen(a: &GenArgs) -> Outcome {
    let spec = SyntheticSpec {
        num_classes: a.classes,
        num_objects: a.objects,
        discriminative_per_class: a.disc_per_class,
        common_objects: a.common,
        cells: a.cells,
        pixels_per_cell: a.pixels_per_cell,
        train_per_class: a.per_class,
        test_per_class: a.test_per_class,
        channels: a.channels,
        noise_std: a.noise,
        discriminative_rate: a.disc_rate,
        seed: a.seed,
    };
    let (train_set, test_set) = generate_synthetic_corpus(&spec)?;
    let train_manifest = train_set.save(&a.out)?;
    let test_manifest = test_set.save(&a.out)?;
    println!("train_instances={}", train_set.len());
    println!("test_instances={}", test_set.len());
    println!("train_manifest={}", train_manifest.display());
    println!("test_manifest={}", test_manifest.display());
    Ok(())
}

pub fn iodp(a: &IodpArgs) -> Outcome {
    let corpus = load_corpus(&a.manifest)?;
    let metric = DispersionMetric {
        kind: a.metric.into(),
        passivate: !a.no_passivate,
    };
    let proto = build_prototype(&corpus, a.mode.into(), metric)?;
    proto.save(&a.out)?;
    let values = proto.omega().as_slice();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    println!("L={}", proto.num_objects());
    println!("C={}", proto.num_classes());
    println!("mode={}", proto.mode());
    println!(
        "metric={}{}",
        if metric.passivate { "sqrt-" } else { "" },
        metric.kind
    );
    println!("omega_min={min:.6}");
    println!("omega_max={max:.6}");
    println!("omega_mean={mean:.6}");
    Ok(())
}

pub fn train(a: &TrainArgs) -> Outcome {
    let mode = AblationMode::from(a.mode);
    let config = TrainConfig {
        mode,
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        lr_milestones: a.milestones.clone(),
        weight_decay: a.weight_decay,
        lambda: a.lambda,
        hidden_dim: a.hidden_dim,
        seed: a.seed,
        aux_activation: !a.linear_aux,
        ..TrainConfig::default()
    };
    config.validate()?;
    let prototype = match (&a.prototype, mode.uses_graph()) {
        (Some(p), true) => Some(load_prototype(p)?),
        (None, true) => return Err(Failure::data(format!("mode {mode} needs --prototype"))),
        (_, false) => None,
    };
    let train_set = load_corpus(&a.manifest)?;
    let held_out = a.test_manifest.as_deref().map(load_corpus).transpose()?;
    let (model, trace) = fit(&train_set, prototype.as_ref(), &config, held_out.as_ref())?;
    let trace_path = a
        .trace
        .clone()
        .unwrap_or_else(|| with_suffix(&a.checkpoint, "trace.csv"));
    model.save(&a.checkpoint)?;
    write_atomic(&trace_path, trace.to_csv().as_bytes())?;
    let last = trace.epochs.last().expect("at least one epoch");
    println!("mode={mode}");
    println!("epochs={}", trace.epochs.len());
    println!("final_loss={:.6}", last.loss);
    println!("final_train_accuracy={:.6}", last.train_accuracy);
    if let Some(v) = last.validation_accuracy {
        println!("final_test_accuracy={v:.6}");
    }
    println!("parameters={}", model.trainable_parameter_count());
    println!("checkpoint={}", a.checkpoint.display());
    println!("trace={}", trace_path.display());
    Ok(())
}

/// Picks the model to evaluate from the checkpoint and the requested mode.
fn eval_model(checkpoint: DgnModel, requested: Option<AblationMode>) -> Result<DgnModel, Failure> {
    match requested {
        None => Ok(checkpoint),
        Some(m) if m == checkpoint.mode() => Ok(checkpoint),
        Some(AblationMode::EvalOnlyIodp) => Ok(checkpoint.to_eval_only()?),
        Some(m) => Err(Failure::data(format!(
            "checkpoint holds a {} model, cannot evaluate as {m}",
            checkpoint.mode()
        ))),
    }
}

pub fn eval(a: &EvalArgs) -> Outcome {
    let checkpoint = DgnModel::load(&a.checkpoint)
        .map_err(|e| Failure::data(format!("{}: {e}", a.checkpoint.display())))?;
    let model = eval_model(checkpoint, a.mode.map(AblationMode::from))?;
    let prototype = match (&a.prototype, model.mode().uses_graph()) {
        (Some(p), true) => Some(load_prototype(p)?),
        (None, true) => return Err(Failure::data(format!("mode {} needs --prototype", model.mode()))),
        (_, false) => None,
    };
    let corpus = load_corpus(&a.manifest)?;
    let report = evaluate(&model, &corpus, prototype.as_ref())?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&a.checkpoint, "eval.csv"));
    write_atomic(&report_path, report.to_csv().as_bytes())?;
    println!("mode={}", model.mode());
    println!("accuracy={:.6}", report.accuracy);
    println!("correct={}", report.correct());
    println!("total={}", report.instances);
    for (c, acc) in report.per_class.iter().enumerate() {
        match acc.accuracy() {
            Some(v) => println!("class_{c}={v:.6} ({}/{})", acc.correct, acc.total),
            None => println!("class_{c}=n/a (0/0)"),
        }
    }
    println!("report={}", report_path.display());
    Ok(())
}
