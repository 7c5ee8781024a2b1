//! Inter-object discriminative prototype.
//!
//! For every object pair `(i, j)` the per-scene co-occurrence likelihoods are
//! turned into a scene posterior under a uniform prior; the dispersion of that
//! posterior (range, standard deviation or coefficient of variation),
//! optionally square-rooted, is the pair's discriminative correlation `Ω[i][j]`.
//!
//! Counts are taken from object presence in the full-resolution label maps.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{dim_u32, write_atomic, Reader, Writer};
use crate::corpus::Corpus;
use crate::error::{format_err, validation, Error, Result};
use crate::nn::Matrix;

pub const PROTOTYPE_MAGIC: &[u8; 4] = b"DGNP";

/// How `P(o_i, o_j | S_c)` is estimated from counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CooccurrenceMode {
    /// Joint presence frequency `N_ij / N_S`.
    NonIndependent,
    /// Product of marginal presence frequencies `N_i·N_j / N_S²`.
    Independent,
}

impl CooccurrenceMode {
    pub fn code(self) -> u8 {
        match self {
            CooccurrenceMode::NonIndependent => 0,
            CooccurrenceMode::Independent => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(CooccurrenceMode::NonIndependent),
            1 => Ok(CooccurrenceMode::Independent),
            _ => Err(format_err(format!("unknown co-occurrence mode byte {code}"))),
        }
    }
}

impl fmt::Display for CooccurrenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CooccurrenceMode::NonIndependent => "nonindependent",
            CooccurrenceMode::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dispersion {
    Range,
    StdDev,
    CoeffVar,
}

impl Dispersion {
    pub const ALL: [Dispersion; 3] = [Dispersion::Range, Dispersion::StdDev, Dispersion::CoeffVar];

    pub fn code(self) -> u8 {
        match self {
            Dispersion::Range => 0,
            Dispersion::StdDev => 1,
            Dispersion::CoeffVar => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dispersion::Range),
            1 => Ok(Dispersion::StdDev),
            2 => Ok(Dispersion::CoeffVar),
            _ => Err(format_err(format!("unknown dispersion metric byte {code}"))),
        }
    }
}

impl fmt::Display for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dispersion::Range => "range",
            Dispersion::StdDev => "std",
            Dispersion::CoeffVar => "cv",
        })
    }
}

/// Dispersion measure plus whether the square-root passivation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DispersionMetric {
    pub kind: Dispersion,
    pub passivate: bool,
}

impl Default for DispersionMetric {
    /// `√cv`.
    fn default() -> Self {
        DispersionMetric {
            kind: Dispersion::CoeffVar,
            passivate: true,
        }
    }
}

/// Presence counts per scene category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    num_classes: usize,
    num_objects: usize,
    scene_totals: Vec<u64>,
    /// `[c][i]`, flattened.
    object_counts: Vec<u64>,
    /// `[c][i][j]`, flattened.
    pair_counts: Vec<u64>,
}

impl CooccurrenceCounts {
    fn empty(num_classes: usize, num_objects: usize) -> Self {
        CooccurrenceCounts {
            num_classes,
            num_objects,
            scene_totals: vec![0; num_classes],
            object_counts: vec![0; num_classes * num_objects],
            pair_counts: vec![0; num_classes * num_objects * num_objects],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        let add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.scene_totals, &other.scene_totals);
        add(&mut self.object_counts, &other.object_counts);
        add(&mut self.pair_counts, &other.pair_counts);
        self
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    /// `N_Sc`.
    pub fn scene_total(&self, c: usize) -> u64 {
        self.scene_totals[c]
    }

    /// Instances of scene `c` containing object `i`.
    pub fn object_count(&self, c: usize, i: usize) -> u64 {
        self.object_counts[c * self.num_objects + i]
    }

    /// Instances of scene `c` containing both `i` and `j`.
    pub fn pair_count(&self, c: usize, i: usize, j: usize) -> u64 {
        let l = self.num_objects;
        self.pair_counts[(c * l + i) * l + j]
    }
}

/// Tallies full-resolution object presence per scene category.
pub fn count(corpus: &Corpus) -> Result<CooccurrenceCounts> {
    let (c_count, l) = (corpus.num_classes(), corpus.num_objects());
    if corpus.is_empty() {
        return Err(validation("cannot count an empty corpus"));
    }
    let counts = corpus
        .instances()
        .par_iter()
        .fold(
            || CooccurrenceCounts::empty(c_count, l),
            |mut acc, inst| {
                let c = inst.scene_id;
                let present: Vec<usize> = inst.label_map.object_presence().into_iter().collect();
                acc.scene_totals[c] += 1;
                for &i in &present {
                    acc.object_counts[c * l + i] += 1;
                    let row = (c * l + i) * l;
                    for &j in &present {
                        acc.pair_counts[row + j] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || CooccurrenceCounts::empty(c_count, l),
            CooccurrenceCounts::merge,
        );
    if let Some(missing) = counts.scene_totals.iter().position(|&n| n == 0) {
        return Err(validation(format!("scene category {missing} has no instances")));
    }
    Ok(counts)
}

/// `P(o_i, o_j | S_c)` under `mode`.
pub fn cooccurrence_prob(
    counts: &CooccurrenceCounts,
    mode: CooccurrenceMode,
    i: usize,
    j: usize,
    c: usize,
) -> f64 {
    let total = counts.scene_total(c) as f64;
    match mode {
        CooccurrenceMode::NonIndependent => counts.pair_count(c, i, j) as f64 / total,
        CooccurrenceMode::Independent => {
            (counts.object_count(c, i) as f64 * counts.object_count(c, j) as f64) / (total * total)
        }
    }
}

/// Scene posterior for one object pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Distribution(Vec<f64>),
    /// Every likelihood was zero: the pair never co-occurs.
    ZeroEvidence,
}

/// Normalizes per-scene likelihoods under a uniform scene prior.
pub fn posterior(likelihoods: &[f64]) -> Result<Posterior> {
    if let Some(bad) = likelihoods.iter().find(|l| !l.is_finite() || **l < 0.0) {
        return Err(validation(format!(
            "likelihood {bad} is not a non-negative number"
        )));
    }
    // the uniform prior 1/C cancels between numerator and evidence
    let evidence: f64 = likelihoods.iter().sum();
    if evidence == 0.0 {
        return Ok(Posterior::ZeroEvidence);
    }
    Ok(Posterior::Distribution(
        likelihoods.iter().map(|&l| l / evidence).collect(),
    ))
}

/// Dispersion `θ` of a posterior; zero for [`Posterior::ZeroEvidence`].
pub fn dispersion(posterior: &Posterior, kind: Dispersion) -> f64 {
    let p = match posterior {
        Posterior::Distribution(p) if !p.is_empty() => p,
        _ => return 0.0,
    };
    let n = p.len() as f64;
    match kind {
        Dispersion::Range => {
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = p.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        }
        Dispersion::StdDev => population_std(p),
        // μ of a probability vector over C scenes is 1/C
        Dispersion::CoeffVar => population_std(p) * n,
    }
}

fn population_std(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    (p.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// `√θ` when `enabled`, else `θ`.
pub fn passivate(theta: f64, enabled: bool) -> Result<f64> {
    if theta.is_nan() || theta < 0.0 {
        return Err(validation(format!("dispersion {theta} is negative")));
    }
    Ok(if enabled { theta.sqrt() } else { theta })
}

/// The `L x L` matrix `Ω` and how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    omega: Matrix,
    mode: CooccurrenceMode,
    metric: DispersionMetric,
    num_classes: usize,
}

impl Prototype {
    /// Wraps an explicit `Ω`, checking it is square, symmetric, finite and non-negative.
    pub fn new(
        omega: Matrix,
        mode: CooccurrenceMode,
        metric: DispersionMetric,
        num_classes: usize,
    ) -> Result<Self> {
        let l = omega.rows();
        if omega.cols() != l || l == 0 {
            return Err(validation(format!(
                "prototype must be a non-empty square matrix, got {}x{}",
                omega.rows(),
                omega.cols()
            )));
        }
        if num_classes == 0 {
            return Err(validation("prototype needs C >= 1"));
        }
        for i in 0..l {
            for j in 0..l {
                let v = omega[(i, j)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(validation(format!(
                        "Ω[{i}][{j}] = {v} is not a finite non-negative value"
                    )));
                }
                if v != omega[(j, i)] {
                    return Err(validation(format!("Ω is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Prototype {
            omega,
            mode,
            metric,
            num_classes,
        })
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.omega[(i, j)]
    }

    pub fn num_objects(&self) -> usize {
        self.omega.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mode(&self) -> CooccurrenceMode {
        self.mode
    }

    pub fn metric(&self) -> DispersionMetric {
        self.metric
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::with_header(PROTOTYPE_MAGIC);
        w.u32(dim_u32(self.num_objects(), "L")?);
        w.u8(self.mode.code());
        w.u8(self.metric.kind.code());
        w.u8(u8::from(self.metric.passivate));
        w.u32(dim_u32(self.num_classes, "C")?);
        for &v in self.omega.as_slice() {
            w.f64(v);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(PROTOTYPE_MAGIC)?;
        let l = r.u32()? as usize;
        let mode = CooccurrenceMode::from_code(r.u8()?)?;
        let kind = Dispersion::from_code(r.u8()?)?;
        let passivate = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(format_err(format!("bad passivation flag {b}"))),
        };
        let num_classes = r.u32()? as usize;
        let count = l
            .checked_mul(l)
            .ok_or_else(|| validation("prototype size overflows"))?;
        let values = r.f64_array(count)?;
        r.finish()?;
        let omega = Matrix::from_vec(l, l, values)?;
        Prototype::new(omega, mode, DispersionMetric { kind, passivate }, num_classes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }
}

/// Builds `Ω` from a corpus.
pub fn build_prototype(
    corpus: &Corpus,
    mode: CooccurrenceMode,
    metric: DispersionMetric,
) -> Result<Prototype> {
    let counts = count(corpus)?;
    prototype_from_counts(&counts, mode, metric)
}

pub fn prototype_from_counts(
    counts: &CooccurrenceCounts,
    mode: CooccurrenceMode,
    metric: DispersionMetric,
) -> Result<Prototype> {
    let (c_count, l) = (counts.num_classes(), counts.num_objects());
    let mut omega = Matrix::zeros(l, l);
    let mut likelihoods = vec![0.0; c_count];
    for i in 0..l {
        for j in i..l {
            for (c, slot) in likelihoods.iter_mut().enumerate() {
                *slot = cooccurrence_prob(counts, mode, i, j, c);
            }
            let theta = dispersion(&posterior(&likelihoods)?, metric.kind);
            let value = passivate(theta, metric.passivate)?;
            if !value.is_finite() {
                return Err(Error::Numeric(format!("Ω[{i}][{j}] is not finite")));
            }
            omega[(i, j)] = value;
            omega[(j, i)] = value;
        }
    }
    Prototype::new(omega, mode, metric, c_count)
}
