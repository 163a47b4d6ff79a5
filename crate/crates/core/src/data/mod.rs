//! Datasets: node features, labels, splits, and the graph they live on.

mod canonical;
mod citation;
mod sbm;
mod split;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Matrix;

pub use canonical::{load_canonical, save_canonical};
pub use citation::load_citation_plaintext;
pub use sbm::{synth_sbm, SbmParams};
pub use split::{make_split, perturb_edges, perturb_features, subsample_labels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Val,
    Test,
    None,
}

/// Disjoint train/validation/test node masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    roles: Vec<SplitRole>,
}

impl Masks {
    pub fn unassigned(n: usize) -> Self {
        Self {
            roles: vec![SplitRole::None; n],
        }
    }

    pub fn from_roles(roles: Vec<SplitRole>) -> Self {
        Self { roles }
    }

    pub fn role(&self, node: usize) -> SplitRole {
        self.roles[node]
    }

    pub fn roles(&self) -> &[SplitRole] {
        &self.roles
    }

    pub fn mask(&self, role: SplitRole) -> Vec<bool> {
        self.roles.iter().map(|&r| r == role).collect()
    }

    pub fn count(&self, role: SplitRole) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    pub fn nodes(&self, role: SplitRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn train(&self) -> Vec<bool> {
        self.mask(SplitRole::Train)
    }

    pub fn val(&self) -> Vec<bool> {
        self.mask(SplitRole::Val)
    }

    pub fn test(&self) -> Vec<bool> {
        self.mask(SplitRole::Test)
    }
}

/// Provenance flags carried alongside the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Edges were added to join disconnected components.
    pub connectivity_augmented: bool,
    pub row_normalized: bool,
    pub dropped_edge_refs: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    graph: Graph,
    features: Matrix<f64>,
    labels: Vec<usize>,
    masks: Masks,
    class_count: usize,
    meta: DatasetMeta,
}

/// Content equality: graph, features, labels, masks and class count.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.features == other.features
            && self.labels == other.labels
            && self.masks == other.masks
            && self.class_count == other.class_count
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: Matrix<f64>,
        labels: Vec<usize>,
        masks: Masks,
        class_count: usize,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if graph.is_self_looped() {
            return Err(Error::Dataset("dataset graphs are stored without self loops".into()));
        }
        if features.rows() != n || labels.len() != n || masks.roles.len() != n {
            return Err(Error::Dataset(format!(
                "graph has {n} nodes but features have {} rows, labels {} entries, masks {} entries",
                features.rows(),
                labels.len(),
                masks.roles.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::Dataset(format!("label {bad} outside [0, {class_count})")));
        }
        if !features.all_finite() {
            return Err(Error::Dataset("non-finite feature value".into()));
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            masks,
            class_count,
            meta: DatasetMeta::default(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        if masks.roles.len() != self.num_nodes() {
            return Err(Error::Dataset("mask length does not match node count".into()));
        }
        self.masks = masks;
        Ok(self)
    }

    pub fn with_graph(mut self, graph: Graph) -> Result<Self> {
        if graph.num_nodes() != self.num_nodes() || graph.is_self_looped() {
            return Err(Error::Dataset("replacement graph must match node count and carry no self loops".into()));
        }
        self.graph = graph;
        Ok(self)
    }

    pub fn with_features(mut self, features: Matrix<f64>) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::Dataset("replacement features must keep one row per node".into()));
        }
        self.features = features;
        Ok(self)
    }

    /// Divides each row by its L1 norm; all-zero rows stay zero.
    pub fn row_normalized(mut self) -> Self {
        for i in 0..self.features.rows() {
            let row = self.features.row_mut(i);
            let norm: f64 = row.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
        self.meta.row_normalized = true;
        self
    }

    /// Nodes per class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &y in &self.labels {
            sizes[y] += 1;
        }
        sizes
    }

    /// Byte-exact serialization used for content hashing; identical to the
    /// concatenated canonical TSV files.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let files = canonical::render(self);
        let mut out = Vec::new();
        for (name, body) in files {
            out.extend_from_slice(name.as_bytes());
            out.push(0);
            out.extend_from_slice(body.as_bytes());
        }
        out
    }

    /// Hex SHA-256 of `"dataset <len>\0" ++ canonical bytes`, git-object style.
    pub fn content_hash(&self) -> String {
        let body = self.canonical_bytes();
        let mut h = Sha256::new();
        h.update(format!("dataset {}\0", body.len()).as_bytes());
        h.update(&body);
        hex::encode(h.finalize())
    }
}
