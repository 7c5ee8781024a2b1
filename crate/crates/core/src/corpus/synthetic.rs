//! Planted-object benchmark corpora.
//!
//! Every scene class owns a disjoint block of "discriminative" object ids;
//! the remaining "common" ids are shared by all classes. Each instance is a
//! grid of cells, each cell one object. Pixel features are a fixed per-object
//! embedding plus isotropic Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Corpus, FeatureMap, Instance, LabelMap, Split};
use crate::error::{validation, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub num_objects: usize,
    pub discriminative_per_class: usize,
    pub common_objects: usize,
    /// Cells per side of the instance grid; also the feature-map side length.
    pub cells: usize,
    /// Label-map pixels per cell side (label maps are `cells * pixels_per_cell` square).
    pub pixels_per_cell: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub channels: usize,
    pub noise_std: f64,
    /// Probability that a cell holds a discriminative object.
    pub discriminative_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 7,
            num_objects: 20,
            discriminative_per_class: 2,
            common_objects: 6,
            cells: 8,
            pixels_per_cell: 4,
            train_per_class: 100,
            test_per_class: 20,
            channels: 16,
            noise_std: 2.0,
            discriminative_rate: 0.25,
            seed: 304,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("classes", self.num_classes),
            ("objects", self.num_objects),
            ("discriminative objects per class", self.discriminative_per_class),
            ("common objects", self.common_objects),
            ("cells", self.cells),
            ("pixels per cell", self.pixels_per_cell),
            ("train instances per class", self.train_per_class),
            ("test instances per class", self.test_per_class),
            ("channels", self.channels),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(validation(format!("{name} must be positive")));
        }
        let needed = self
            .discriminative_per_class
            .checked_mul(self.num_classes)
            .and_then(|n| n.checked_add(self.common_objects));
        match needed {
            Some(n) if n <= self.num_objects => {}
            _ => {
                return Err(validation(format!(
                    "{} classes x {} discriminative + {} common objects exceed L={}",
                    self.num_classes, self.discriminative_per_class, self.common_objects, self.num_objects
                )))
            }
        }
        if self.num_objects > usize::from(u16::MAX) + 1 {
            return Err(validation("object ids must fit in 16 bits"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(validation(format!("bad noise std {}", self.noise_std)));
        }
        if !(0.0..=1.0).contains(&self.discriminative_rate) {
            return Err(validation(format!(
                "discriminative rate {} outside [0, 1]",
                self.discriminative_rate
            )));
        }
        let side = self.cells.checked_mul(self.pixels_per_cell);
        if side.and_then(|s| s.checked_mul(s)).is_none() {
            return Err(validation("label map size overflows"));
        }
        Ok(())
    }

    /// Discriminative ids owned by `class`.
    pub fn discriminative_ids(&self, class: usize) -> std::ops::Range<usize> {
        let k = self.discriminative_per_class;
        class * k..(class + 1) * k
    }

    pub fn common_ids(&self) -> std::ops::Range<usize> {
        let start = self.num_classes * self.discriminative_per_class;
        start..start + self.common_objects
    }
}

/// Deterministic embedding of `object` under `seed`: `channels` standard normals.
pub fn object_embedding(seed: u64, object: usize, channels: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + object as u64);
    (0..channels).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Generates the train and test corpora described by `spec`; a pure function of `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<(Corpus, Corpus)> {
    spec.validate()?;
    let embeddings: Vec<Vec<f64>> = (0..spec.num_objects)
        .map(|o| object_embedding(spec.seed, o, spec.channels))
        .collect();
    let train = generate_split(spec, &embeddings, Split::Train)?;
    let test = generate_split(spec, &embeddings, Split::Test)?;
    Ok((train, test))
}

fn generate_split(spec: &SyntheticSpec, embeddings: &[Vec<f64>], split: Split) -> Result<Corpus> {
    let (per_class, stream) = match split {
        Split::Train => (spec.train_per_class, 0),
        Split::Test => (spec.test_per_class, 1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // object embeddings use streams 1..=L, splits live above them
    rng.set_stream((1u64 << 32) + stream);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| validation(e.to_string()))?;

    let mut instances = Vec::with_capacity(per_class * spec.num_classes);
    for _ in 0..per_class {
        for class in 0..spec.num_classes {
            let cells = draw_cells(spec, class, &mut rng);
            let label_map = upsample_cells(spec, &cells)?;
            let mut values = Vec::with_capacity(cells.len() * spec.channels);
            for &object in &cells {
                for &e in &embeddings[object as usize] {
                    let v = e + noise.sample(&mut rng);
                    // quantize now so in-memory corpora match their on-disk form
                    values.push(f64::from(v as f32));
                }
            }
            let feature_map = FeatureMap::new(spec.cells, spec.cells, spec.channels, values)?;
            instances.push(Instance {
                scene_id: class,
                label_map,
                feature_map: Some(feature_map),
            });
        }
    }
    Corpus::new(spec.num_classes, spec.num_objects, instances, split)
}

fn draw_cells(spec: &SyntheticSpec, class: usize, rng: &mut ChaCha8Rng) -> Vec<u16> {
    let disc = spec.discriminative_ids(class);
    let common = spec.common_ids();
    let pick_disc = |rng: &mut ChaCha8Rng| rng.random_range(disc.clone()) as u16;
    let n = spec.cells * spec.cells;
    let mut cells = Vec::with_capacity(n);
    let mut any_disc = false;
    for _ in 0..n {
        if rng.random_bool(spec.discriminative_rate) {
            cells.push(pick_disc(rng));
            any_disc = true;
        } else {
            cells.push(rng.random_range(common.clone()) as u16);
        }
    }
    if !any_disc {
        let at = rng.random_range(0..n);
        cells[at] = pick_disc(rng);
    }
    cells
}

fn upsample_cells(spec: &SyntheticSpec, cells: &[u16]) -> Result<LabelMap> {
    let side = spec.cells * spec.pixels_per_cell;
    let mut labels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            labels.push(cells[(y / spec.pixels_per_cell) * spec.cells + x / spec.pixels_per_cell]);
        }
    }
    LabelMap::new(side, side, spec.num_objects, labels)
}
