//! Dense numeric core: the one-layer graph convolution, pooling, affine
//! heads, softmax cross-entropy, Adam and Xavier initialization.
//!
//! Everything runs in `f64`. Gradients are hand-derived in [`crate::model`];
//! there is no general autodiff.

mod adam;
pub(crate) mod init;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use init::xavier_init;
pub use matrix::Matrix;

use crate::error::{validation, Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Graph-convolution weight `W` (`in_dim x hidden_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub weight: Matrix,
}

impl GcnParams {
    pub fn new(weight: Matrix) -> Result<Self> {
        if weight.rows() == 0 || weight.cols() == 0 {
            return Err(validation("graph convolution weight needs positive dimensions"));
        }
        Ok(GcnParams { weight })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Affine classifier `x ↦ xᵀ·weight + bias`, weight `in_dim x num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl ClassifierParams {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(validation(format!(
                "bias length {} does not match {} classes",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(ClassifierParams { weight, bias })
    }

    pub fn zeros(in_dim: usize, num_classes: usize) -> Self {
        ClassifierParams {
            weight: Matrix::zeros(in_dim, num_classes),
            bias: vec![0.0; num_classes],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.weight.cols()
    }

    pub fn num_parameters(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

/// Propagation operator applied to node features: `D⁻¹ (A + I) V`, with
/// `D = diag(rowsums(A + I))`.
pub fn propagate(adjacency: &Matrix, features: &Matrix) -> Result<Matrix> {
    let n = adjacency.rows();
    if adjacency.cols() != n || features.rows() != n {
        return Err(validation(format!(
            "adjacency {}x{} incompatible with {} node rows",
            adjacency.rows(),
            adjacency.cols(),
            features.rows()
        )));
    }
    let mut out = adjacency.matmul(features)?;
    for i in 0..n {
        let degree: f64 = adjacency.row(i).iter().sum::<f64>() + 1.0;
        for (o, &v) in out.row_mut(i).iter_mut().zip(features.row(i)) {
            *o = (*o + v) / degree;
        }
    }
    Ok(out)
}

/// Single graph-convolution layer: returns the pre-activation
/// `D⁻¹ÃVW` and `V* = sigmoid(D⁻¹ÃVW)`.
pub fn gcn_forward(adjacency: &Matrix, features: &Matrix, weight: &Matrix) -> Result<(Matrix, Matrix)> {
    if features.cols() != weight.rows() {
        return Err(validation(format!(
            "feature width {} does not match weight rows {}",
            features.cols(),
            weight.rows()
        )));
    }
    let pre = propagate(adjacency, features)?.matmul(weight)?;
    let activated = pre.map(sigmoid);
    Ok((pre, activated))
}

/// Global average pooling over nodes.
pub fn gap(x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(validation("cannot pool zero nodes"));
    }
    Ok(x.column_means())
}

pub fn linear(x: &[f64], params: &ClassifierParams) -> Result<Vec<f64>> {
    if x.len() != params.in_dim() {
        return Err(validation(format!(
            "input length {} does not match classifier input {}",
            x.len(),
            params.in_dim()
        )));
    }
    let mut logits = params.bias.clone();
    for (&xi, row) in x
        .iter()
        .zip(params.weight.as_slice().chunks_exact(params.num_classes()))
    {
        for (l, &w) in logits.iter_mut().zip(row) {
            *l += xi * w;
        }
    }
    Ok(logits)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[target]`, stable under large logits.
pub fn softmax_ce(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(validation(format!(
            "target {target} out of range for {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logits {logits:?}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted = logits[target] - max;
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target)
        .map(|(_, &l)| (l - max).exp())
        .sum();
    // log-sum-exp minus the target logit; ln_1p keeps near-zero losses precise
    let loss = if shifted == 0.0 {
        rest.ln_1p()
    } else {
        (rest + shifted.exp()).ln() - shifted
    };
    Ok(loss.max(0.0))
}

/// Gradient of [`softmax_ce`] with respect to the logits.
pub fn softmax_ce_grad(logits: &[f64], target: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[target] -= 1.0;
    g
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gcn_single_node() {
        let (pre, out) = gcn_forward(
            &Matrix::from_rows(&[[1.0]]),
            &Matrix::from_rows(&[[0.0]]),
            &Matrix::from_rows(&[[3.7]]),
        )
        .unwrap();
        assert_eq!(pre.as_slice(), &[0.0]);
        assert_eq!(out.as_slice(), &[0.5]);
    }

    #[test]
    fn gcn_two_nodes_hand_computed() {
        let a = Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]);
        let v = Matrix::from_rows(&[[1.0], [0.0]]);
        let (pre, out) = gcn_forward(&a, &v, &Matrix::from_rows(&[[1.0]])).unwrap();
        assert!(close(pre[(0, 0)], 0.75, 1e-15));
        assert!(close(pre[(1, 0)], 0.5, 1e-15));
        assert!(close(out[(0, 0)], 0.679179, 1e-6));
        assert!(close(out[(1, 0)], 0.622459, 1e-6));
    }

    #[test]
    fn gcn_zero_weight_is_half() {
        let a = Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]);
        let v = Matrix::from_rows(&[[1.0, -2.0], [0.3, 4.0]]);
        let (_, out) = gcn_forward(&a, &v, &Matrix::zeros(2, 3)).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.5));
        assert!(gcn_forward(&a, &v, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn pooling() {
        assert_eq!(gap(&Matrix::from_rows(&[[1.0, 2.0]])).unwrap(), vec![1.0, 2.0]);
        assert_eq!(gap(&Matrix::from_rows(&[[1.0], [3.0]])).unwrap(), vec![2.0]);
        let g = gap(&Matrix::from_rows(&[[0.679179], [0.622459]])).unwrap();
        assert!(close(g[0], 0.650819, 1e-12));
        assert!(gap(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn linear_layer() {
        let zero = ClassifierParams::zeros(3, 2);
        assert_eq!(linear(&[1.0, 2.0, 3.0], &zero).unwrap(), vec![0.0, 0.0]);
        let eye =
            ClassifierParams::new(Matrix::from_rows(&[[0.2, 0.7], [1.0, 0.0]]), vec![0.0, 0.0]).unwrap();
        assert_eq!(linear(&[1.0, 0.0], &eye).unwrap(), vec![0.2, 0.7]);
        let p = ClassifierParams::new(Matrix::from_rows(&[[1.0, -1.0]]), vec![0.0, 1.0]).unwrap();
        assert_eq!(linear(&[2.0], &p).unwrap(), vec![2.0, -1.0]);
        assert!(linear(&[2.0, 1.0], &p).is_err());
    }

    #[test]
    fn cross_entropy_values() {
        assert!(close(
            softmax_ce(&[0.0, 0.0], 0).unwrap(),
            std::f64::consts::LN_2,
            1e-15
        ));
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!(close(softmax_ce(&[2.0, 0.0], 0).unwrap(), expected, 1e-15));
        assert!(close(softmax_ce(&[2.0, 0.0], 0).unwrap(), 0.126928, 1e-6));
        let tiny = softmax_ce(&[30.0, 0.0], 0).unwrap();
        assert!(close(tiny, 9.357622968840175e-14, 1e-20), "{tiny}");
        assert!(softmax_ce(&[0.0, 30.0], 0).unwrap() > 29.9);
        assert!(softmax_ce(&[1.0], 1).is_err());
        assert!(matches!(softmax_ce(&[f64::NAN, 0.0], 1), Err(Error::Numeric(_))));
        assert!(matches!(
            softmax_ce(&[f64::INFINITY, 0.0], 0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0; 7]), 0);
    }
}
