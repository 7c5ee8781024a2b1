//! Discriminative graph over pixel-level features.
//!
//! Nodes are feature-map pixels in row-major order; the raw edge weight
//! between two nodes is `Ω` looked up at their object ids, and the adjacency
//! is that matrix row-normalized.

use crate::corpus::{FeatureMap, LabelMap};
use crate::error::{validation, Result};
use crate::iodp::Prototype;
use crate::nn::{self, Matrix};

/// Node features `V` (`n x c`) and node semantics `M″`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub features: Matrix,
    pub semantics: Vec<u16>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.semantics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantics.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminativeGraph {
    pub nodes: NodeSet,
    /// Raw gathered knowledge `A⁰`.
    pub raw: Matrix,
    /// Row-stochastic adjacency `A`.
    pub adjacency: Matrix,
}

impl DiscriminativeGraph {
    /// `D⁻¹(A + I)V`, the weight-free propagation of the node features.
    pub fn propagated_features(&self) -> Result<Matrix> {
        nn::propagate(&self.adjacency, &self.nodes.features)
    }
}

/// Pairs each feature-map pixel with the resized label at the same position.
pub fn flatten(feature_map: &FeatureMap, resized_labels: &LabelMap) -> Result<NodeSet> {
    if (feature_map.width(), feature_map.height()) != (resized_labels.width(), resized_labels.height()) {
        return Err(validation(format!(
            "label map {}x{} does not match feature map {}x{}",
            resized_labels.width(),
            resized_labels.height(),
            feature_map.width(),
            feature_map.height()
        )));
    }
    let features = Matrix::from_vec(
        feature_map.num_pixels(),
        feature_map.channels(),
        feature_map.values().to_vec(),
    )?;
    Ok(NodeSet {
        features,
        semantics: resized_labels.labels().to_vec(),
    })
}

/// `A⁰[i][j] = Ω[m_i][m_j]`.
pub fn extract_local_knowledge(semantics: &[u16], prototype: &Prototype) -> Result<Matrix> {
    let l = prototype.num_objects();
    if let Some(&bad) = semantics.iter().find(|&&m| m as usize >= l) {
        return Err(validation(format!("node object id {bad} not below L={l}")));
    }
    let n = semantics.len();
    let omega = prototype.omega();
    let mut raw = Matrix::zeros(n, n);
    for (i, &mi) in semantics.iter().enumerate() {
        let omega_row = omega.row(mi as usize);
        for (slot, &mj) in raw.row_mut(i).iter_mut().zip(semantics) {
            *slot = omega_row[mj as usize];
        }
    }
    Ok(raw)
}

/// Divides each row by its sum; an all-zero row becomes uniform `1/n`.
pub fn row_normalize(raw: &Matrix) -> Matrix {
    let n = raw.cols();
    let mut out = raw.clone();
    for i in 0..raw.rows() {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|v| *v /= sum);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / n as f64);
        }
    }
    out
}

pub fn build_graph(
    feature_map: &FeatureMap,
    resized_labels: &LabelMap,
    prototype: &Prototype,
) -> Result<DiscriminativeGraph> {
    let nodes = flatten(feature_map, resized_labels)?;
    let raw = extract_local_knowledge(&nodes.semantics, prototype)?;
    let adjacency = row_normalize(&raw);
    Ok(DiscriminativeGraph {
        nodes,
        raw,
        adjacency,
    })
}

/// Resizes `label_map` to the feature resolution and builds the graph.
pub fn build_instance_graph(
    feature_map: &FeatureMap,
    label_map: &LabelMap,
    prototype: &Prototype,
) -> Result<DiscriminativeGraph> {
    let resized = label_map.nn_resize(feature_map.width(), feature_map.height())?;
    build_graph(feature_map, &resized, prototype)
}
