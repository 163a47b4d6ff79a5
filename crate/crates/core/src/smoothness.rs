//! Node and graph smoothing levels (mean pairwise cosine similarity) and
//! their trajectories under repeated propagation.
//!
//! Cosine similarity with an all-zero row is taken to be 0.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::model::{train_model, Architecture, ModelConfig};
use crate::tensor::{dot, Matrix, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// GSL of `Â^k X` for `k = 0..=k_max`.
    pub gsl: Vec<f64>,
    /// Per-step NSL vectors, when requested.
    pub nsl: Option<Vec<Vec<f64>>>,
    /// GSL of the infinite-propagation representation; `None` for
    /// disconnected graphs.
    pub stationary_gsl: Option<f64>,
}

fn check_rows<T: Real>(features: &Matrix<T>) -> Result<()> {
    if features.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "smoothness needs at least 2 nodes, got {}",
            features.rows()
        )));
    }
    Ok(())
}

#[inline]
fn cosine<T: Real>(a: &[T], b: &[T], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c = dot(a, b).to_f64() / (na * nb).sqrt();
    c.clamp(-1.0, 1.0)
}

/// NSL of every node: mean cosine similarity to every other node.
pub fn node_smoothness_all<T: Real>(features: &Matrix<T>) -> Result<Vec<f64>> {
    check_rows(features)?;
    let n = features.rows();
    let norms: Vec<f64> = (0..n).map(|i| dot(features.row(i), features.row(i)).to_f64()).collect();
    let mut sums = vec![0.0; n];
    for i in 0..n {
        let ri = features.row(i);
        for j in i + 1..n {
            let c = cosine(ri, features.row(j), norms[i], norms[j]);
            sums[i] += c;
            sums[j] += c;
        }
    }
    let denom = (n - 1) as f64;
    Ok(sums.into_iter().map(|s| s / denom).collect())
}

/// NSL of node `i`.
pub fn node_smoothness<T: Real>(features: &Matrix<T>, i: usize) -> Result<f64> {
    check_rows(features)?;
    let n = features.rows();
    if i >= n {
        return Err(Error::InvalidArgument(format!("node {i} out of range for {n} nodes")));
    }
    let ri = features.row(i);
    let ni = dot(ri, ri).to_f64();
    let mut s = 0.0;
    for j in (0..n).filter(|&j| j != i) {
        let rj = features.row(j);
        s += cosine(ri, rj, ni, dot(rj, rj).to_f64());
    }
    Ok(s / (n - 1) as f64)
}

/// GSL: mean of NSL over all nodes.
pub fn graph_smoothness<T: Real>(features: &Matrix<T>) -> Result<f64> {
    let nsl = node_smoothness_all(features)?;
    Ok(nsl.iter().sum::<f64>() / nsl.len() as f64)
}

/// `Â^∞ X` computed through the rank-one structure of the limit:
/// row `i` is `d̃_i^r · Σ_j d̃_j^{1-r} X_j / Σ_k d̃_k`.
pub fn stationary_representation(graph: &Graph, r: f64, features: &Matrix<f64>) -> Result<Matrix<f64>> {
    if !graph.is_connected() {
        return Err(Error::Disconnected {
            components: graph.components().0,
        });
    }
    let d: Vec<f64> = if graph.is_self_looped() {
        graph.degrees().to_vec()
    } else {
        graph.degrees().iter().map(|x| x + 1.0).collect()
    };
    let mass: f64 = d.iter().sum();
    let mut common = vec![0.0; features.cols()];
    for (j, &dj) in d.iter().enumerate() {
        let wj = dj.powf(1.0 - r);
        for (c, &x) in common.iter_mut().zip(features.row(j)) {
            *c += wj * x;
        }
    }
    Ok(Matrix::from_fn(features.rows(), features.cols(), |i, k| {
        d[i].powf(r) * common[k] / mass
    }))
}

/// GSL of `Â^k X` for `k = 0..=k_max`, plus the stationary GSL when the
/// graph is connected. Accepts the raw graph or its self-looped form.
pub fn gsl_trajectory(graph: &Graph, features: &Matrix<f64>, k_max: usize, r: f64, keep_nsl: bool) -> Result<SmoothnessReport> {
    let looped = if graph.is_self_looped() {
        graph.clone()
    } else {
        graph.add_self_loops()?
    };
    let adj = normalize_adjacency(&looped, r)?;
    let mut h = features.clone();
    let mut gsl = Vec::with_capacity(k_max + 1);
    let mut nsl = keep_nsl.then(Vec::new);
    for k in 0..=k_max {
        if k > 0 {
            h = adj.matrix().spmm(&h)?;
        }
        let per_node = node_smoothness_all(&h)?;
        gsl.push(per_node.iter().sum::<f64>() / per_node.len() as f64);
        if let Some(all) = nsl.as_mut() {
            all.push(per_node);
        }
    }
    let stationary_gsl = if looped.is_connected() {
        Some(graph_smoothness(&stationary_representation(&looped, r, features)?)?)
    } else {
        None
    };
    Ok(SmoothnessReport {
        gsl,
        nsl,
        stationary_gsl,
    })
}

/// GSL of a trained model's final representations for each transformation
/// depth in `depths`, at the propagation depth fixed in `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSmoothness {
    pub d_t: usize,
    pub gsl: f64,
    pub test_acc: f64,
}

/// Trains one propagate-first model per entry of `depths` and measures the
/// GSL of its evaluation-mode logits.
pub fn gsl_vs_dt_probe(base: &ModelConfig, ds: &Dataset, depths: &[usize]) -> Result<Vec<DepthSmoothness>> {
    if base.architecture != Architecture::Pptt {
        return Err(Error::Config("the d_t smoothness probe needs the pptt architecture".into()));
    }
    depths
        .iter()
        .map(|&d_t| {
            let cfg = ModelConfig { d_t, ..base.clone() };
            let (report, model) = train_model::<f64>(&cfg, ds)?;
            let logits = model.predict(&model.prepare(ds)?)?;
            Ok(DepthSmoothness {
                d_t,
                gsl: graph_smoothness(&logits)?,
                test_acc: report.test_acc,
            })
        })
        .collect()
}
