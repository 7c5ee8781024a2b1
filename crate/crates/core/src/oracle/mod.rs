//! Brute-force references for tests.
//!
//! Nothing here calls into the code it checks: presence is re-derived by
//! scanning pixels, the posterior applies the uniform prior literally, and
//! propagation is a scalar triple loop over `A + I`.

pub mod fixtures;

use crate::corpus::Corpus;
use crate::error::{validation, Error, Result};
use crate::iodp::{CooccurrenceMode, Dispersion, DispersionMetric, Prototype};
use crate::nn::Matrix;

/// Worst disagreement between two equally long value sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_abs: f64,
    /// `|a − b| / max(|a|, |b|)`, taken as 0 where both are 0.
    pub max_rel: f64,
    /// Index of the largest absolute deviation.
    pub worst: Option<usize>,
}

pub fn compare(actual: &[f64], expected: &[f64]) -> OracleReport {
    assert_eq!(
        actual.len(),
        expected.len(),
        "compared sequences differ in length"
    );
    let mut report = OracleReport {
        max_abs: 0.0,
        max_rel: 0.0,
        worst: None,
    };
    for (idx, (&a, &b)) in actual.iter().zip(expected).enumerate() {
        let abs = (a - b).abs();
        let scale = a.abs().max(b.abs());
        let rel = if scale == 0.0 { 0.0 } else { abs / scale };
        if report.worst.is_none() || abs > report.max_abs {
            report.max_abs = abs;
            report.worst = Some(idx);
        }
        report.max_rel = report.max_rel.max(rel);
    }
    report
}

/// Nested loops over scenes and object pairs, straight from the definitions.
pub fn naive_prototype(
    corpus: &Corpus,
    mode: CooccurrenceMode,
    metric: DispersionMetric,
) -> Result<Prototype> {
    let scenes = corpus.num_classes();
    let objects = corpus.num_objects();
    if corpus.is_empty() {
        return Err(validation("empty corpus"));
    }
    let contains = |labels: &[u16], object: usize| labels.iter().any(|&l| l as usize == object);

    // likelihood[c][i][j] = P(o_i, o_j | S_c)
    let mut likelihood = vec![vec![vec![0.0f64; objects]; objects]; scenes];
    for (c, scene_table) in likelihood.iter_mut().enumerate() {
        let members: Vec<&[u16]> = corpus
            .instances()
            .iter()
            .filter(|inst| inst.scene_id == c)
            .map(|inst| inst.label_map.labels())
            .collect();
        if members.is_empty() {
            return Err(validation(format!("scene {c} has no instances")));
        }
        let n_scene = members.len() as f64;
        for (i, row) in scene_table.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = match mode {
                    CooccurrenceMode::NonIndependent => {
                        let both = members
                            .iter()
                            .filter(|m| contains(m, i) && contains(m, j))
                            .count();
                        both as f64 / n_scene
                    }
                    CooccurrenceMode::Independent => {
                        let n_i = members.iter().filter(|m| contains(m, i)).count() as f64;
                        let n_j = members.iter().filter(|m| contains(m, j)).count() as f64;
                        (n_i / n_scene) * (n_j / n_scene)
                    }
                };
            }
        }
    }

    let prior = 1.0 / scenes as f64;
    let mut omega = Matrix::zeros(objects, objects);
    for i in 0..objects {
        for j in 0..objects {
            let mut evidence = 0.0;
            for scene_table in &likelihood {
                evidence += scene_table[i][j] * prior;
            }
            let theta = if evidence == 0.0 {
                0.0
            } else {
                let post: Vec<f64> = likelihood.iter().map(|t| t[i][j] * prior / evidence).collect();
                let mean = post.iter().sum::<f64>() / scenes as f64;
                let mut var = 0.0;
                for p in &post {
                    var += (p - mean) * (p - mean);
                }
                let sigma = (var / scenes as f64).sqrt();
                match metric.kind {
                    Dispersion::Range => {
                        let mut hi = post[0];
                        let mut lo = post[0];
                        for &p in &post {
                            if p > hi {
                                hi = p;
                            }
                            if p < lo {
                                lo = p;
                            }
                        }
                        hi - lo
                    }
                    Dispersion::StdDev => sigma,
                    Dispersion::CoeffVar => sigma / mean,
                }
            };
            omega[(i, j)] = if metric.passivate { theta.sqrt() } else { theta };
        }
    }
    // tiny asymmetries cannot arise: every quantity above is symmetric in (i, j)
    Prototype::new(omega, mode, metric, scenes)
}

/// `D⁻¹(A + I)V` by explicit scalar loops.
pub fn naive_propagate(adjacency: &Matrix, features: &Matrix) -> Result<Matrix> {
    let n = adjacency.rows();
    if adjacency.cols() != n || features.rows() != n {
        return Err(validation("adjacency and features disagree on node count"));
    }
    let c = features.cols();
    let mut out = Matrix::zeros(n, c);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            degree += adjacency[(i, j)] + if i == j { 1.0 } else { 0.0 };
        }
        for k in 0..c {
            let mut acc = 0.0;
            for j in 0..n {
                let a_tilde = adjacency[(i, j)] + if i == j { 1.0 } else { 0.0 };
                acc += a_tilde * features[(j, k)];
            }
            out[(i, k)] = acc / degree;
        }
    }
    Ok(out)
}

/// Central differences `(f(θ + h·e_k) − f(θ − h·e_k)) / 2h` for every coordinate.
pub fn fd_gradient(mut loss: impl FnMut(&[f64]) -> f64, params: &[f64], h: f64) -> Result<Vec<f64>> {
    if h.is_nan() || h <= 0.0 {
        return Err(validation(format!("step {h} must be positive")));
    }
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        probe[k] = params[k] + h;
        let up = loss(&probe);
        probe[k] = params[k] - h;
        let down = loss(&probe);
        probe[k] = params[k];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numeric(format!("loss not finite around coordinate {k}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_quadratic_and_constant() {
        let g = fd_gradient(|p| p[0] * p[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = fd_gradient(|_| 4.2, &[1.0, -2.0], 1e-6).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(fd_gradient(|_| f64::NAN, &[1.0], 1e-6).is_err());
        assert!(fd_gradient(|_| 0.0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn propagate_examples() {
        let a = Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]);
        let v = Matrix::from_rows(&[[1.0], [0.0]]);
        let out = naive_propagate(&a, &v).unwrap();
        assert_eq!(out.as_slice(), &[0.75, 0.5]);

        let u = Matrix::from_rows(&[[0.25; 4]; 4]);
        let v = Matrix::from_rows(&[[1.0, 0.0], [2.0, 4.0], [3.0, 0.0], [6.0, 0.0]]);
        let out = naive_propagate(&u, &v).unwrap();
        assert!((out[(0, 0)] - (1.0 + 3.0) / 2.0).abs() < 1e-12);
        assert!((out[(1, 1)] - (4.0 + 1.0) / 2.0).abs() < 1e-12);

        let single =
            naive_propagate(&Matrix::from_rows(&[[1.0]]), &Matrix::from_rows(&[[2.5, -1.0]])).unwrap();
        assert_eq!(single.as_slice(), &[2.5, -1.0]);
    }

    #[test]
    fn compare_reports_worst() {
        let r = compare(&[1.0, 2.0, 0.0], &[1.0, 2.5, 0.0]);
        assert_eq!(r.worst, Some(1));
        assert_eq!(r.max_abs, 0.5);
        assert_eq!(r.max_rel, 0.2);
    }
}
