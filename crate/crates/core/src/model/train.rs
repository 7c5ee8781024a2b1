use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AblationMode, DgnModel, Gradients, ModelInput};
use crate::corpus::Corpus;
use crate::error::{validation, Error, Result};
use crate::graph::{build_instance_graph, flatten};
use crate::iodp::Prototype;
use crate::nn::{self, adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: AblationMode,
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate of the graph module and heads.
    pub learning_rate: f64,
    /// Epochs (0-based) at which the learning rate is multiplied by `lr_decay`.
    pub lr_milestones: Vec<usize>,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    /// Hidden width `d`; `None` means equal to the input channel count.
    pub hidden_dim: Option<usize>,
    pub seed: u64,
    /// Sigmoid after `VW` on the auxiliary path.
    pub aux_activation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: AblationMode::Full,
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_milestones: vec![10, 15, 20],
            lr_decay: 0.1,
            weight_decay: 1e-5,
            lambda: 0.25,
            hidden_dim: None,
            seed: 304,
            aux_activation: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(validation("epochs and batch size must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(validation(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(validation(format!("bad weight decay {}", self.weight_decay)));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0) {
            return Err(validation(format!("bad learning-rate decay {}", self.lr_decay)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(validation(format!("bad λ {}", self.lambda)));
        }
        if self.hidden_dim == Some(0) {
            return Err(validation("hidden dimension must be positive"));
        }
        if self.mode == AblationMode::EvalOnlyIodp {
            return Err(validation(
                "eval-only-iodp is evaluation only; train a baseline and plug the prototype in at evaluation",
            ));
        }
        Ok(())
    }

    /// Step schedule: base rate times `lr_decay` per milestone reached.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self.lr_milestones.iter().filter(|&&m| epoch >= m).count();
        self.learning_rate * self.lr_decay.powi(passed as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean total loss over the epoch's instances.
    pub loss: f64,
    pub main_loss: f64,
    pub aux_loss: f64,
    /// Accuracy of the main head on the training forward passes.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,loss,loss_main,loss_aux,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e
                .validation_accuracy
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:.9},{:.9},{:.9},{:.6},{}\n",
                e.epoch, e.learning_rate, e.loss, e.main_loss, e.aux_loss, e.train_accuracy, val
            ));
        }
        out
    }
}

/// Builds per-instance inputs, propagating through the discriminative graph
/// when `mode` uses one.
pub fn prepare_inputs(
    corpus: &Corpus,
    prototype: Option<&Prototype>,
    mode: AblationMode,
) -> Result<Vec<ModelInput>> {
    if mode.uses_graph() {
        let p = prototype.ok_or_else(|| validation(format!("mode {mode} needs a prototype")))?;
        if p.num_objects() != corpus.num_objects() {
            return Err(validation(format!(
                "prototype has L={}, corpus has L={}",
                p.num_objects(),
                corpus.num_objects()
            )));
        }
        if p.num_classes() != corpus.num_classes() {
            return Err(validation(format!(
                "prototype was built over C={}, corpus has C={}",
                p.num_classes(),
                corpus.num_classes()
            )));
        }
    }
    corpus
        .instances()
        .par_iter()
        .enumerate()
        .map(|(idx, inst)| {
            let fm = inst
                .feature_map
                .as_ref()
                .ok_or_else(|| validation(format!("instance {idx} has no feature map")))?;
            match (mode.uses_graph(), prototype) {
                (true, Some(p)) => ModelInput::from_graph(&build_instance_graph(fm, &inst.label_map, p)?),
                _ => {
                    let resized = inst.label_map.nn_resize(fm.width(), fm.height())?;
                    Ok(ModelInput::without_graph(flatten(fm, &resized)?.features))
                }
            }
        })
        .collect()
}

/// Trains a model of `config.mode` on `train_corpus`. Deterministic for a
/// given seed regardless of the rayon thread count.
pub fn train(
    train_corpus: &Corpus,
    prototype: Option<&Prototype>,
    config: &TrainConfig,
    validation_corpus: Option<&Corpus>,
) -> Result<(DgnModel, TrainTrace)> {
    config.validate()?;
    if train_corpus.is_empty() {
        return Err(validation("training corpus is empty"));
    }
    let (_, _, channels) = train_corpus
        .feature_shape()
        .ok_or_else(|| validation("training corpus carries no feature maps"))?;
    let inputs = prepare_inputs(train_corpus, prototype, config.mode)?;
    let targets: Vec<usize> = train_corpus.instances().iter().map(|i| i.scene_id).collect();
    let validation_inputs = match validation_corpus {
        Some(v) => Some((prepare_inputs(v, prototype, config.mode)?, v)),
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let hidden = config.hidden_dim.unwrap_or(channels);
    let mut model = DgnModel::init_with(
        config.mode,
        channels,
        hidden,
        train_corpus.num_classes(),
        config.lambda,
        &mut rng,
    )?;
    model.aux_activation = config.aux_activation;
    let mut optim = OptimizerState::new(&model);
    // a zero-weight auxiliary loss has no gradient path: keep the aux head frozen
    let train_aux = config.mode == AblationMode::Full && config.lambda > 0.0;

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut trace = TrainTrace::default();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        let adam = AdamConfig {
            learning_rate: lr,
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        };
        order.shuffle(&mut rng);
        let (mut sum_total, mut sum_main, mut sum_aux, mut correct) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let per_instance: Vec<(Gradients, bool)> = batch
                .par_iter()
                .map(|&i| {
                    let output = model.forward(&inputs[i], true)?;
                    let hit = nn::argmax(&output.main_logits) == targets[i];
                    Ok((model.backward(&inputs[i], &output, targets[i])?, hit))
                })
                .collect::<Result<_>>()?;
            let mut iter = per_instance.into_iter();
            let (mut grads, first_hit) = iter.next().expect("chunks are non-empty");
            correct += usize::from(first_hit);
            for (g, hit) in iter {
                grads.accumulate(&g);
                correct += usize::from(hit);
            }
            sum_total += grads.loss.total;
            sum_main += grads.loss.main;
            sum_aux += grads.loss.aux;
            if !grads.loss.total.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss in epoch {epoch}")));
            }
            grads.scale(1.0 / batch.len() as f64);
            optim.step(&mut model, &grads, &adam, train_aux)?;
        }
        let n = inputs.len() as f64;
        let validation_accuracy = match &validation_inputs {
            Some((v_inputs, v_corpus)) => Some(score(&model, v_inputs, v_corpus)?.accuracy),
            None => None,
        };
        trace.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            loss: sum_total / n,
            main_loss: sum_main / n,
            aux_loss: sum_aux / n,
            train_accuracy: correct as f64 / n,
            validation_accuracy,
        });
    }
    Ok((model, trace))
}

struct OptimizerState {
    gcn: Option<AdamState>,
    main_weight: AdamState,
    main_bias: AdamState,
    aux_weight: Option<AdamState>,
    aux_bias: Option<AdamState>,
}

impl OptimizerState {
    fn new(model: &DgnModel) -> Self {
        OptimizerState {
            gcn: model.gcn().map(|w| AdamState::new(w.weight.as_slice().len())),
            main_weight: AdamState::new(model.main_head().weight.as_slice().len()),
            main_bias: AdamState::new(model.main_head().bias.len()),
            aux_weight: model
                .aux_head()
                .map(|a| AdamState::new(a.weight.as_slice().len())),
            aux_bias: model.aux_head().map(|a| AdamState::new(a.bias.len())),
        }
    }

    fn step(
        &mut self,
        model: &mut DgnModel,
        grads: &Gradients,
        adam: &AdamConfig,
        train_aux: bool,
    ) -> Result<()> {
        if let (Some(w), Some(g), Some(s)) = (model.gcn_mut(), &grads.gcn, &mut self.gcn) {
            adam_step(w.weight.as_mut_slice(), g.as_slice(), s, adam)?;
        }
        let head = model.main_head_mut();
        adam_step(
            head.weight.as_mut_slice(),
            grads.main_weight.as_slice(),
            &mut self.main_weight,
            adam,
        )?;
        adam_step(&mut head.bias, &grads.main_bias, &mut self.main_bias, adam)?;
        if train_aux {
            if let (Some(aux), Some(gw), Some(gb), Some(sw), Some(sb)) = (
                model.aux_head_mut(),
                &grads.aux_weight,
                &grads.aux_bias,
                &mut self.aux_weight,
                &mut self.aux_bias,
            ) {
                adam_step(aux.weight.as_mut_slice(), gw.as_slice(), sw, adam)?;
                adam_step(&mut aux.bias, gb, sb, adam)?;
            }
        }
        model.bump_version();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl ClassAccuracy {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Top-1 accuracy of the main head.
    pub accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    pub instances: usize,
    pub predictions: Vec<usize>,
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        self.per_class.iter().map(|c| c.correct).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,correct,total,accuracy\n");
        for (c, acc) in self.per_class.iter().enumerate() {
            let a = acc.accuracy().map(|a| format!("{a:.6}")).unwrap_or_default();
            out.push_str(&format!("{c},{},{},{a}\n", acc.correct, acc.total));
        }
        out.push_str(&format!(
            "all,{},{},{:.6}\n",
            self.correct(),
            self.instances,
            self.accuracy
        ));
        out
    }
}

/// Top-1 evaluation with the main head (argmax, ties to the lowest class).
pub fn evaluate(model: &DgnModel, corpus: &Corpus, prototype: Option<&Prototype>) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(validation("test corpus is empty"));
    }
    if corpus.num_classes() != model.num_classes() {
        return Err(validation(format!(
            "corpus has C={}, model predicts {} classes",
            corpus.num_classes(),
            model.num_classes()
        )));
    }
    let inputs = prepare_inputs(corpus, prototype, model.mode())?;
    score(model, &inputs, corpus)
}

fn score(model: &DgnModel, inputs: &[ModelInput], corpus: &Corpus) -> Result<EvalReport> {
    let predictions: Vec<usize> = inputs
        .par_iter()
        .map(|x| Ok(nn::argmax(&model.forward(x, false)?.main_logits)))
        .collect::<Result<_>>()?;
    let mut per_class = vec![ClassAccuracy { correct: 0, total: 0 }; corpus.num_classes()];
    for (inst, &pred) in corpus.instances().iter().zip(&predictions) {
        let slot = &mut per_class[inst.scene_id];
        slot.total += 1;
        slot.correct += usize::from(pred == inst.scene_id);
    }
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    Ok(EvalReport {
        accuracy: correct as f64 / inputs.len() as f64,
        per_class,
        instances: inputs.len(),
        predictions,
    })
}
