//! Small deterministic inputs shared by the test suites.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, FeatureMap, Instance, LabelMap, Split};
use crate::error::Result;
use crate::graph::build_graph;
use crate::iodp::{CooccurrenceMode, DispersionMetric, Prototype};
use crate::model::{AblationMode, DgnModel, ModelInput};
use crate::nn::Matrix;

/// Corpus T: two scenes over three objects.
///
/// Scene 0 holds `{o0, o1}` and `{o0}`, scene 1 holds `{o1, o2}` and `{o2}`.
pub fn toy_corpus() -> Corpus {
    let inst = |scene_id, labels: Vec<u16>| Instance {
        scene_id,
        label_map: LabelMap::new(labels.len(), 1, 3, labels).expect("valid toy labels"),
        feature_map: None,
    };
    Corpus::new(
        2,
        3,
        vec![
            inst(0, vec![0, 1, 0]),
            inst(0, vec![0, 0]),
            inst(1, vec![1, 2]),
            inst(1, vec![2]),
        ],
        Split::Train,
    )
    .expect("toy corpus is valid")
}

/// Label-only corpus with `C ≤ max_classes`, `L ≤ max_objects` and at most
/// `max_instances` instances, each scene represented at least once.
pub fn random_label_corpus(
    seed: u64,
    max_classes: usize,
    max_objects: usize,
    max_instances: usize,
) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.random_range(1..=max_classes.min(max_instances));
    let objects = rng.random_range(1..=max_objects);
    let count = rng.random_range(classes..=max_instances);
    let instances = (0..count)
        .map(|k| {
            let scene_id = if k < classes {
                k
            } else {
                rng.random_range(0..classes)
            };
            // draw from a per-instance palette so that presence sets vary
            let palette_len = rng.random_range(1..=objects);
            let palette: Vec<u16> = sample(&mut rng, objects, palette_len)
                .into_iter()
                .map(|o| o as u16)
                .collect();
            let (w, h) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let labels = (0..w * h)
                .map(|_| palette[rng.random_range(0..palette.len())])
                .collect();
            Instance {
                scene_id,
                label_map: LabelMap::new(w, h, objects, labels).expect("labels drawn below L"),
                feature_map: None,
            }
        })
        .collect();
    Corpus::new(classes, objects, instances, Split::Train).expect("random corpus is valid")
}

/// Random non-negative symmetric `Ω`, with a sprinkling of exact zeros.
pub fn random_prototype(seed: u64, objects: usize, classes: usize) -> Prototype {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Matrix::zeros(objects, objects);
    for i in 0..objects {
        for j in i..objects {
            let v = if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random::<f64>()
            };
            omega.as_mut_slice()[i * objects + j] = v;
            omega.as_mut_slice()[j * objects + i] = v;
        }
    }
    Prototype::new(
        omega,
        CooccurrenceMode::Independent,
        DispersionMetric::default(),
        classes,
    )
    .expect("random prototype is valid")
}

/// A single-row instance of `n` nodes with `c` channels, graph built from a
/// random prototype over `objects` ids.
pub fn random_graph_input(seed: u64, n: usize, c: usize, objects: usize) -> Result<ModelInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * c).map(|_| rng.sample(StandardNormal)).collect();
    let features = FeatureMap::new(n, 1, c, values)?;
    let labels = (0..n).map(|_| rng.random_range(0..objects) as u16).collect();
    let labels = LabelMap::new(n, 1, objects, labels)?;
    let prototype = random_prototype(rng.random(), objects, 2);
    ModelInput::from_graph(&build_graph(&features, &labels, &prototype)?)
}

/// A tiny model with non-trivial biases, an input graph and a target.
#[derive(Debug, Clone)]
pub struct TinyCase {
    pub model: DgnModel,
    pub input: ModelInput,
    pub target: usize,
}

/// Draws a tiny case of the given mode: `n ≤ 6`, `c ≤ 4`, `d ≤ 4`, `C ≤ 3`.
pub fn random_tiny_case(seed: u64, mode: AblationMode, lambda: f64) -> Result<TinyCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let c = rng.random_range(1..=4);
    let d = rng.random_range(1..=4);
    let classes = rng.random_range(2..=3);
    let mut model = DgnModel::init(mode, c, d, classes, lambda, rng.random())?;
    // move biases off zero so their gradients are exercised at a generic point
    let params: Vec<f64> = model
        .parameters()
        .into_iter()
        .map(|p| p + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    model.set_parameters(&params)?;
    let input = random_graph_input(rng.random(), n, c, 3)?;
    let target = rng.random_range(0..classes);
    Ok(TinyCase { model, input, target })
}
