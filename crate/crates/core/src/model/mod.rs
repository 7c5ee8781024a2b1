//! The discriminative graph network and its ablation variants.
//!
//! Main path: `V* = sigmoid(D⁻¹ÃVW)` → GAP → main head. Auxiliary path
//! (training only, [`AblationMode::Full`]): `sigmoid(VW)` → GAP → aux head,
//! sharing `W` with the main path. The total loss is `l_o + λ·l_a`.

mod checkpoint;
mod train;

use std::fmt;

pub use checkpoint::CHECKPOINT_MAGIC;
pub use train::{
    evaluate, prepare_inputs, train, ClassAccuracy, EpochRecord, EvalReport, TrainConfig, TrainTrace,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{format_err, validation, Error, Result};
use crate::graph::DiscriminativeGraph;
use crate::nn::{self, init::xavier_with, ClassifierParams, GcnParams, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationMode {
    /// GAP over raw features, then a fully connected head.
    Baseline,
    /// A trained baseline head applied to `GAP(D⁻¹ÃV)`; no weights, no activation.
    EvalOnlyIodp,
    /// Graph convolution trained and evaluated, no auxiliary loss.
    TrainEvalIodp,
    /// Graph convolution plus the shared-weight auxiliary classifier.
    Full,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Baseline,
        AblationMode::EvalOnlyIodp,
        AblationMode::TrainEvalIodp,
        AblationMode::Full,
    ];

    pub fn code(self) -> u8 {
        match self {
            AblationMode::Baseline => 0,
            AblationMode::EvalOnlyIodp => 1,
            AblationMode::TrainEvalIodp => 2,
            AblationMode::Full => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.code() == code)
            .ok_or_else(|| format_err(format!("unknown ablation mode byte {code}")))
    }

    /// Whether this mode owns a graph-convolution weight.
    pub fn has_gcn(self) -> bool {
        matches!(self, AblationMode::TrainEvalIodp | AblationMode::Full)
    }

    /// Whether inputs need the prototype-driven propagation.
    pub fn uses_graph(self) -> bool {
        self != AblationMode::Baseline
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationMode::Baseline => "baseline",
            AblationMode::EvalOnlyIodp => "eval-only-iodp",
            AblationMode::TrainEvalIodp => "train-eval-iodp",
            AblationMode::Full => "full",
        })
    }
}

/// Per-instance network input: raw node features `V` and, for graph modes,
/// the propagated features `D⁻¹ÃV` (parameter-free, so computed once).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub features: Matrix,
    pub propagated: Option<Matrix>,
}

impl ModelInput {
    pub fn from_graph(graph: &DiscriminativeGraph) -> Result<Self> {
        Ok(ModelInput {
            propagated: Some(graph.propagated_features()?),
            features: graph.nodes.features.clone(),
        })
    }

    pub fn without_graph(features: Matrix) -> Self {
        ModelInput {
            features,
            propagated: None,
        }
    }

    fn propagated(&self) -> Result<&Matrix> {
        self.propagated
            .as_ref()
            .ok_or_else(|| validation("this mode needs graph-propagated features"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgnModel {
    mode: AblationMode,
    in_dim: usize,
    num_classes: usize,
    lambda: f64,
    gcn: Option<GcnParams>,
    main_head: ClassifierParams,
    aux_head: Option<ClassifierParams>,
    aux_activation: bool,
    version: u64,
}

impl DgnModel {
    /// Xavier-initialized model; biases start at zero. `hidden_dim` is ignored
    /// by the baseline modes.
    pub fn init(
        mode: AblationMode,
        in_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(mode, in_dim, hidden_dim, num_classes, lambda, &mut rng)
    }

    pub(crate) fn init_with(
        mode: AblationMode,
        in_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        lambda: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if in_dim == 0 || num_classes == 0 {
            return Err(validation("model needs positive input width and class count"));
        }
        if mode.has_gcn() && hidden_dim == 0 {
            return Err(validation("hidden dimension must be positive"));
        }
        let gcn = if mode.has_gcn() {
            Some(GcnParams::new(xavier_with(in_dim, hidden_dim, rng))?)
        } else {
            None
        };
        let head_in = if mode.has_gcn() { hidden_dim } else { in_dim };
        let main_head =
            ClassifierParams::new(xavier_with(head_in, num_classes, rng), vec![0.0; num_classes])?;
        let aux_head = if mode.has_gcn() {
            Some(ClassifierParams::new(
                xavier_with(hidden_dim, num_classes, rng),
                vec![0.0; num_classes],
            )?)
        } else {
            None
        };
        DgnModel::from_parts(mode, in_dim, num_classes, lambda, gcn, main_head, aux_head)
    }

    pub fn from_parts(
        mode: AblationMode,
        in_dim: usize,
        num_classes: usize,
        lambda: f64,
        gcn: Option<GcnParams>,
        main_head: ClassifierParams,
        aux_head: Option<ClassifierParams>,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(validation(format!(
                "λ = {lambda} must be finite and non-negative"
            )));
        }
        if main_head.num_classes() != num_classes {
            return Err(validation("main head class count mismatch"));
        }
        match (&gcn, mode.has_gcn()) {
            (Some(w), true) => {
                if w.in_dim() != in_dim || main_head.in_dim() != w.hidden_dim() {
                    return Err(validation("graph convolution weight shape mismatch"));
                }
                let aux = aux_head
                    .as_ref()
                    .ok_or_else(|| validation("graph modes need an auxiliary head"))?;
                if aux.in_dim() != w.hidden_dim() || aux.num_classes() != num_classes {
                    return Err(validation("auxiliary head shape mismatch"));
                }
            }
            (None, false) => {
                if main_head.in_dim() != in_dim || aux_head.is_some() {
                    return Err(validation("baseline head must map input features to classes"));
                }
            }
            _ => return Err(validation(format!("mode {mode} and parameters disagree"))),
        }
        Ok(DgnModel {
            mode,
            in_dim,
            num_classes,
            lambda,
            gcn,
            main_head,
            aux_head,
            aux_activation: true,
            version: 0,
        })
    }

    pub fn mode(&self) -> AblationMode {
        self.mode
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// `d`, or 0 for the baseline modes.
    pub fn hidden_dim(&self) -> usize {
        self.gcn.as_ref().map_or(0, GcnParams::hidden_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gcn(&self) -> Option<&GcnParams> {
        self.gcn.as_ref()
    }

    pub fn main_head(&self) -> &ClassifierParams {
        &self.main_head
    }

    pub fn aux_head(&self) -> Option<&ClassifierParams> {
        self.aux_head.as_ref()
    }

    pub fn aux_activation(&self) -> bool {
        self.aux_activation
    }

    /// Toggles the sigmoid after `VW` on the auxiliary path.
    pub fn set_aux_activation(&mut self, on: bool) {
        self.aux_activation = on;
        self.version += 1;
    }

    /// Bumped on every parameter change; forward records remember it.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Parameters that take part in this mode's computation.
    pub fn trainable_parameter_count(&self) -> usize {
        let mut n = self.main_head.num_parameters();
        if let Some(w) = &self.gcn {
            n += w.weight.as_slice().len();
        }
        if self.mode == AblationMode::Full {
            n += self.aux_head.as_ref().map_or(0, ClassifierParams::num_parameters);
        }
        n
    }

    /// Re-labels a trained baseline for plug-and-play evaluation with the prototype.
    pub fn to_eval_only(&self) -> Result<DgnModel> {
        match self.mode {
            AblationMode::Baseline | AblationMode::EvalOnlyIodp => Ok(DgnModel {
                mode: AblationMode::EvalOnlyIodp,
                ..self.clone()
            }),
            other => Err(validation(format!(
                "plug-and-play evaluation needs a baseline model, got {other}"
            ))),
        }
    }

    /// Flat parameter vector: `W`, main weight, main bias, aux weight, aux bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(w) = &self.gcn {
            out.extend_from_slice(w.weight.as_slice());
        }
        out.extend_from_slice(self.main_head.weight.as_slice());
        out.extend_from_slice(&self.main_head.bias);
        if let Some(aux) = &self.aux_head {
            out.extend_from_slice(aux.weight.as_slice());
            out.extend_from_slice(&aux.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameters().len() {
            return Err(validation(format!(
                "expected {} parameters, got {}",
                self.parameters().len(),
                values.len()
            )));
        }
        let mut rest = values;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        if let Some(w) = &mut self.gcn {
            take(w.weight.as_mut_slice());
        }
        take(self.main_head.weight.as_mut_slice());
        take(&mut self.main_head.bias);
        if let Some(aux) = &mut self.aux_head {
            take(aux.weight.as_mut_slice());
            take(&mut aux.bias);
        }
        self.version += 1;
        Ok(())
    }

    /// Runs the network. The auxiliary logits are produced only when
    /// `training` is set and the mode is [`AblationMode::Full`].
    pub fn forward(&self, input: &ModelInput, training: bool) -> Result<ForwardOutput> {
        let features = &input.features;
        if features.cols() != self.in_dim {
            return Err(validation(format!(
                "node features have width {}, model expects {}",
                features.cols(),
                self.in_dim
            )));
        }
        if features.rows() == 0 {
            return Err(validation("graph has no nodes"));
        }
        let mut record = ForwardRecord {
            version: self.version,
            mode: self.mode,
            nodes: features.rows(),
            pooled_main: Vec::new(),
            activated_main: None,
            pooled_aux: None,
            activated_aux: None,
        };
        let (main_logits, aux_logits) = match (self.mode, &self.gcn) {
            (AblationMode::Baseline, _) => {
                record.pooled_main = nn::gap(features)?;
                (nn::linear(&record.pooled_main, &self.main_head)?, None)
            }
            (AblationMode::EvalOnlyIodp, _) => {
                record.pooled_main = nn::gap(input.propagated()?)?;
                (nn::linear(&record.pooled_main, &self.main_head)?, None)
            }
            (_, Some(w)) => {
                let activated = input.propagated()?.matmul(&w.weight)?.map(nn::sigmoid);
                record.pooled_main = nn::gap(&activated)?;
                record.activated_main = Some(activated);
                let main = nn::linear(&record.pooled_main, &self.main_head)?;
                let aux = match (&self.aux_head, training && self.mode == AblationMode::Full) {
                    (Some(aux_head), true) => {
                        let mut hidden = features.matmul(&w.weight)?;
                        if self.aux_activation {
                            hidden = hidden.map(nn::sigmoid);
                        }
                        let pooled = nn::gap(&hidden)?;
                        let logits = nn::linear(&pooled, aux_head)?;
                        record.pooled_aux = Some(pooled);
                        record.activated_aux = Some(hidden);
                        Some(logits)
                    }
                    _ => None,
                };
                (main, aux)
            }
            (mode, None) => return Err(validation(format!("mode {mode} is missing its graph weight"))),
        };
        Ok(ForwardOutput {
            main_logits,
            aux_logits,
            record,
        })
    }

    /// Loss parts for one instance; `l_a` is zero when no auxiliary logits were produced.
    pub fn loss(&self, output: &ForwardOutput, target: usize) -> Result<LossParts> {
        let main = nn::softmax_ce(&output.main_logits, target)?;
        let aux = match &output.aux_logits {
            Some(l) => nn::softmax_ce(l, target)?,
            None => 0.0,
        };
        Ok(LossParts::new(main, aux, self.lambda))
    }

    /// Analytic gradients of `l_o + λ·l_a` for the instance recorded in `output`.
    /// The shared weight `W` receives the sum of both paths' contributions.
    pub fn backward(&self, input: &ModelInput, output: &ForwardOutput, target: usize) -> Result<Gradients> {
        let record = &output.record;
        if record.version != self.version {
            return Err(Error::StaleRecord {
                recorded: record.version,
                current: self.version,
            });
        }
        if record.mode != self.mode || record.nodes != input.features.rows() {
            return Err(validation("forward record does not match this model and input"));
        }
        if target >= self.num_classes {
            return Err(validation(format!(
                "target {target} not below C={}",
                self.num_classes
            )));
        }
        let n = record.nodes as f64;
        let main_loss = self.loss(output, target)?;

        let dlogits = nn::softmax_ce_grad(&output.main_logits, target);
        let main_weight = outer(&record.pooled_main, &dlogits);
        let main_bias = dlogits.clone();

        let mut gcn_grad = None;
        let mut aux_grads = None;
        if let (Some(w), Some(activated)) = (&self.gcn, &record.activated_main) {
            let d = w.hidden_dim();
            let dpooled = mat_vec(&self.main_head.weight, &dlogits);
            let dpre = sigmoid_backward(activated, &dpooled, n, true);
            let mut dw = input.propagated()?.t_matmul(&dpre)?;

            if let Some(aux_head) = &self.aux_head {
                let mut aux_weight = Matrix::zeros(d, self.num_classes);
                let mut aux_bias = vec![0.0; self.num_classes];
                if let (Some(aux_logits), Some(pooled), Some(hidden)) =
                    (&output.aux_logits, &record.pooled_aux, &record.activated_aux)
                {
                    let dlogits_aux: Vec<f64> = nn::softmax_ce_grad(aux_logits, target)
                        .into_iter()
                        .map(|g| self.lambda * g)
                        .collect();
                    aux_weight = outer(pooled, &dlogits_aux);
                    aux_bias = dlogits_aux.clone();
                    let dpooled_aux = mat_vec(&aux_head.weight, &dlogits_aux);
                    let dpre_aux = sigmoid_backward(hidden, &dpooled_aux, n, self.aux_activation);
                    dw.add_scaled(&input.features.t_matmul(&dpre_aux)?, 1.0);
                }
                aux_grads = Some((aux_weight, aux_bias));
            }
            gcn_grad = Some(dw);
        }

        let (aux_weight, aux_bias) = match aux_grads {
            Some((w, b)) => (Some(w), Some(b)),
            None => (None, None),
        };
        Ok(Gradients {
            gcn: gcn_grad,
            main_weight,
            main_bias,
            aux_weight,
            aux_bias,
            loss: main_loss,
        })
    }

    /// Forward and backward in one go (training mode).
    pub fn loss_and_gradients(&self, input: &ModelInput, target: usize) -> Result<Gradients> {
        let output = self.forward(input, true)?;
        self.backward(input, &output, target)
    }

    pub(crate) fn gcn_mut(&mut self) -> Option<&mut GcnParams> {
        self.gcn.as_mut()
    }

    pub(crate) fn main_head_mut(&mut self) -> &mut ClassifierParams {
        &mut self.main_head
    }

    pub(crate) fn aux_head_mut(&mut self) -> Option<&mut ClassifierParams> {
        self.aux_head.as_mut()
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }
}

fn outer(a: &[f64], b: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    for (i, &x) in a.iter().enumerate() {
        for (slot, &y) in m.row_mut(i).iter_mut().zip(b) {
            *slot = x * y;
        }
    }
    m
}

/// `weight · v` for a `rows x cols` weight and length-`cols` vector.
fn mat_vec(weight: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..weight.rows())
        .map(|i| weight.row(i).iter().zip(v).map(|(w, x)| w * x).sum())
        .collect()
}

/// Gradient w.r.t. the pre-activation of `GAP(act(pre))` given the pooled
/// gradient. `activated` holds `act(pre)`; identity activation when `sigmoid` is off.
fn sigmoid_backward(activated: &Matrix, dpooled: &[f64], n: f64, sigmoid: bool) -> Matrix {
    let mut out = Matrix::zeros(activated.rows(), activated.cols());
    for i in 0..activated.rows() {
        for ((slot, &s), &g) in out.row_mut(i).iter_mut().zip(activated.row(i)).zip(dpooled) {
            let local = if sigmoid { s * (1.0 - s) } else { 1.0 };
            *slot = g / n * local;
        }
    }
    out
}

/// What backward needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    version: u64,
    mode: AblationMode,
    nodes: usize,
    pooled_main: Vec<f64>,
    activated_main: Option<Matrix>,
    pooled_aux: Option<Vec<f64>>,
    activated_aux: Option<Matrix>,
}

impl ForwardRecord {
    /// Pre-GAP node representation of the main path (graph modes).
    pub fn main_nodes(&self) -> Option<&Matrix> {
        self.activated_main.as_ref()
    }

    /// Pre-GAP node representation of the auxiliary path.
    pub fn aux_nodes(&self) -> Option<&Matrix> {
        self.activated_aux.as_ref()
    }

    /// Pooled image representation fed to the main head.
    pub fn pooled(&self) -> &[f64] {
        &self.pooled_main
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub main_logits: Vec<f64>,
    pub aux_logits: Option<Vec<f64>>,
    pub record: ForwardRecord,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub main: f64,
    pub aux: f64,
}

impl LossParts {
    pub fn new(main: f64, aux: f64, lambda: f64) -> Self {
        LossParts {
            total: total_loss(main, aux, lambda),
            main,
            aux,
        }
    }
}

/// `l = l_o + λ·l_a`.
pub fn total_loss(main: f64, aux: f64, lambda: f64) -> f64 {
    main + lambda * aux
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub gcn: Option<Matrix>,
    pub main_weight: Matrix,
    pub main_bias: Vec<f64>,
    pub aux_weight: Option<Matrix>,
    pub aux_bias: Option<Vec<f64>>,
    pub loss: LossParts,
}

impl Gradients {
    /// Same order as [`DgnModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(w) = &self.gcn {
            out.extend_from_slice(w.as_slice());
        }
        out.extend_from_slice(self.main_weight.as_slice());
        out.extend_from_slice(&self.main_bias);
        if let Some(w) = &self.aux_weight {
            out.extend_from_slice(w.as_slice());
        }
        if let Some(b) = &self.aux_bias {
            out.extend_from_slice(b);
        }
        out
    }

    fn accumulate(&mut self, other: &Gradients) {
        fn add(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        if let (Some(a), Some(b)) = (&mut self.gcn, &other.gcn) {
            add(a.as_mut_slice(), b.as_slice());
        }
        add(self.main_weight.as_mut_slice(), other.main_weight.as_slice());
        add(&mut self.main_bias, &other.main_bias);
        if let (Some(a), Some(b)) = (&mut self.aux_weight, &other.aux_weight) {
            add(a.as_mut_slice(), b.as_slice());
        }
        if let (Some(a), Some(b)) = (&mut self.aux_bias, &other.aux_bias) {
            add(a, b);
        }
        self.loss.total += other.loss.total;
        self.loss.main += other.loss.main;
        self.loss.aux += other.loss.aux;
    }

    fn scale(&mut self, factor: f64) {
        let mut slices: Vec<&mut [f64]> = vec![self.main_weight.as_mut_slice(), &mut self.main_bias];
        if let Some(w) = &mut self.gcn {
            slices.push(w.as_mut_slice());
        }
        if let Some(w) = &mut self.aux_weight {
            slices.push(w.as_mut_slice());
        }
        if let Some(b) = &mut self.aux_bias {
            slices.push(b);
        }
        for s in slices {
            s.iter_mut().for_each(|v| *v *= factor);
        }
        self.loss.total *= factor;
        self.loss.main *= factor;
        self.loss.aux *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(features: Matrix, adjacency: Option<&Matrix>) -> ModelInput {
        ModelInput {
            propagated: adjacency.map(|a| nn::propagate(a, &features).unwrap()),
            features,
        }
    }

    #[test]
    fn mode_codes_round_trip() {
        for m in AblationMode::ALL {
            assert_eq!(AblationMode::from_code(m.code()).unwrap(), m);
        }
        assert!(AblationMode::from_code(7).is_err());
    }

    #[test]
    fn single_node_paths_coincide() {
        let mut model = DgnModel::init(AblationMode::Full, 3, 3, 2, 0.25, 9).unwrap();
        let head = model.main_head().clone();
        *model.aux_head_mut().unwrap() = head;
        let x = input(
            Matrix::from_rows(&[[0.3, -1.0, 2.0]]),
            Some(&Matrix::from_rows(&[[1.0]])),
        );
        let out = model.forward(&x, true).unwrap();
        assert_eq!(out.record.main_nodes(), out.record.aux_nodes());
        assert_eq!(Some(&out.main_logits), out.aux_logits.as_ref());
    }

    #[test]
    fn aux_logits_only_in_full_training() {
        let x = input(
            Matrix::from_rows(&[[0.3, -1.0]]),
            Some(&Matrix::from_rows(&[[1.0]])),
        );
        let full = DgnModel::init(AblationMode::Full, 2, 2, 2, 0.25, 1).unwrap();
        assert!(full.forward(&x, true).unwrap().aux_logits.is_some());
        assert!(full.forward(&x, false).unwrap().aux_logits.is_none());
        let te = DgnModel::init(AblationMode::TrainEvalIodp, 2, 2, 2, 0.25, 1).unwrap();
        assert!(te.forward(&x, true).unwrap().aux_logits.is_none());
    }

    #[test]
    fn baseline_hand_example() {
        let head = ClassifierParams::new(Matrix::from_rows(&[[1.0, 0.0]]), vec![0.0, 0.0]).unwrap();
        let model = DgnModel::from_parts(AblationMode::Baseline, 1, 2, 0.0, None, head, None).unwrap();
        let out = model
            .forward(
                &ModelInput::without_graph(Matrix::from_rows(&[[1.0], [3.0]])),
                false,
            )
            .unwrap();
        assert_eq!(out.main_logits, vec![2.0, 0.0]);
    }

    #[test]
    fn eval_only_uniform_graph_matches_shifted_baseline() {
        let base = DgnModel::init(AblationMode::Baseline, 2, 0, 3, 0.0, 4).unwrap();
        let eval_only = base.to_eval_only().unwrap();
        let v = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]);
        let uniform = Matrix::from_rows(&[[1.0 / 3.0; 3]; 3]);
        let plugged = eval_only
            .forward(&input(v.clone(), Some(&uniform)), false)
            .unwrap();
        let mean = v.column_means();
        let mut shifted = v.clone();
        for i in 0..3 {
            for (s, m) in shifted.row_mut(i).iter_mut().zip(&mean) {
                *s = (*s + m) / 2.0;
            }
        }
        let reference = base.forward(&ModelInput::without_graph(shifted), false).unwrap();
        for (a, b) in plugged.main_logits.iter().zip(&reference.main_logits) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            eval_only.trainable_parameter_count(),
            base.trainable_parameter_count()
        );
        assert!(DgnModel::init(AblationMode::Full, 2, 2, 3, 0.0, 4)
            .unwrap()
            .to_eval_only()
            .is_err());
    }

    #[test]
    fn zero_lambda_zeroes_aux_gradient_and_doubling_doubles_it() {
        let v = Matrix::from_rows(&[[0.2, -0.4], [1.0, 0.3], [-0.7, 0.9]]);
        let a = Matrix::from_rows(&[[0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [0.6, 0.2, 0.2]]);
        let x = input(v, Some(&a));
        let mut model = DgnModel::init(AblationMode::Full, 2, 3, 2, 0.0, 11).unwrap();
        let g0 = model.loss_and_gradients(&x, 1).unwrap();
        assert!(g0
            .aux_weight
            .as_ref()
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        assert!(g0.aux_bias.as_ref().unwrap().iter().all(|&v| v == 0.0));
        let te = DgnModel::from_parts(
            AblationMode::TrainEvalIodp,
            2,
            2,
            0.0,
            model.gcn.clone(),
            model.main_head.clone(),
            model.aux_head.clone(),
        )
        .unwrap();
        assert_eq!(te.loss_and_gradients(&x, 1).unwrap().gcn, g0.gcn);

        model.lambda = 0.3;
        let g1 = model.loss_and_gradients(&x, 1).unwrap();
        model.lambda = 0.6;
        let g2 = model.loss_and_gradients(&x, 1).unwrap();
        for (a, b) in g1
            .aux_weight
            .unwrap()
            .as_slice()
            .iter()
            .zip(g2.aux_weight.unwrap().as_slice())
        {
            assert_eq!(2.0 * a, *b);
        }
        assert_eq!(g1.main_weight, g2.main_weight);
    }

    #[test]
    fn stale_record_is_rejected() {
        let x = input(
            Matrix::from_rows(&[[0.3, -1.0]]),
            Some(&Matrix::from_rows(&[[1.0]])),
        );
        let mut model = DgnModel::init(AblationMode::Full, 2, 2, 2, 0.25, 1).unwrap();
        let out = model.forward(&x, true).unwrap();
        let params = model.parameters();
        model.set_parameters(&params).unwrap();
        assert!(matches!(
            model.backward(&x, &out, 0),
            Err(Error::StaleRecord { .. })
        ));
    }

    #[test]
    fn parameter_counts() {
        let (c, d, k) = (4, 3, 5);
        let base = DgnModel::init(AblationMode::Baseline, c, d, k, 0.25, 0).unwrap();
        assert_eq!(base.trainable_parameter_count(), c * k + k);
        let te = DgnModel::init(AblationMode::TrainEvalIodp, c, d, k, 0.25, 0).unwrap();
        assert_eq!(te.trainable_parameter_count(), c * d + d * k + k);
        let full = DgnModel::init(AblationMode::Full, c, d, k, 0.25, 0).unwrap();
        assert_eq!(full.trainable_parameter_count(), c * d + 2 * (d * k + k));
    }

    #[test]
    fn loss_decomposition() {
        assert_eq!(total_loss(1.0, 0.8, 0.0), 1.0);
        assert!((total_loss(1.0, 0.8, 0.25) - 1.2).abs() < 1e-15);
        assert_eq!(total_loss(1.0, 0.0, 1.0), 1.0);
    }
}
