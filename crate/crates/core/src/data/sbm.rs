//! Stochastic block model graphs with class-informative Gaussian features.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, Masks};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    /// Scale of the per-class mean vector relative to unit noise.
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            n: 300,
            classes: 3,
            p_in: 0.1,
            p_out: 0.01,
            feat_dim: 16,
            signal_strength: 1.0,
            seed: 0,
        }
    }
}

/// Nodes are split into contiguous, near-equal blocks, one per class.
/// Within-block pairs connect with `p_in`, cross-block pairs with `p_out`.
/// Features are `signal_strength · μ_class + N(0, I)` with unit-norm random
/// class means. A disconnected draw is joined by linking consecutive nodes of
/// a shuffled order whenever they lie in different components; this is
/// flagged in the dataset metadata. No split is assigned.
pub fn synth_sbm(params: &SbmParams) -> Result<Dataset> {
    let SbmParams {
        n,
        classes,
        p_in,
        p_out,
        feat_dim,
        signal_strength,
        seed,
    } = *params;
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidArgument(format!(
            "SBM needs 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if classes == 0 || n < classes {
        return Err(Error::InvalidArgument(format!("cannot split {n} nodes into {classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|v| v * classes / n).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    // Join components along a shuffled order.
    let mut uf = UnionFind::new(n);
    for &(u, v) in &edges {
        uf.union(u, v);
    }
    let mut augmented = false;
    if uf.components > 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for pair in order.windows(2) {
            if uf.union(pair[0], pair[1]) {
                edges.push((pair[0], pair[1]));
                augmented = true;
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..feat_dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut features = Matrix::zeros(n, feat_dim);
    for (i, &y) in labels.iter().enumerate() {
        for (j, f) in features.row_mut(i).iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *f = signal_strength * means[y][j] + noise;
        }
    }

    let name = format!("sbm-n{n}-c{classes}-s{seed}");
    Ok(Dataset::new(name, graph, features, labels, Masks::unassigned(n), classes)?.with_meta(DatasetMeta {
        connectivity_augmented: augmented,
        ..DatasetMeta::default()
    }))
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when `a` and `b` were in different sets.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        self.components -= 1;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cliques_joined_by_a_path() {
        let ds = synth_sbm(&SbmParams {
            n: 10,
            classes: 2,
            p_in: 1.0,
            p_out: 0.0,
            ..SbmParams::default()
        })
        .unwrap();
        // two K5 plus one connecting edge
        assert_eq!(ds.graph().num_edges(), 2 * 10 + 1);
        assert!(ds.graph().is_connected());
        assert!(ds.meta().connectivity_augmented);
    }

    #[test]
    fn zero_signal_features_are_pure_noise() {
        let params = SbmParams {
            n: 2000,
            classes: 2,
            signal_strength: 0.0,
            feat_dim: 4,
            p_in: 0.0,
            p_out: 0.0,
            ..SbmParams::default()
        };
        let ds = synth_sbm(&params).unwrap();
        // class means of the features should both be ~0
        for c in 0..2 {
            let rows: Vec<usize> = (0..2000).filter(|&i| ds.labels()[i] == c).collect();
            for j in 0..4 {
                let m: f64 = rows.iter().map(|&i| ds.features().get(i, j)).sum::<f64>() / rows.len() as f64;
                assert!(m.abs() < 0.15, "class {c} dim {j} mean {m}");
            }
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let bad = SbmParams {
            p_in: 0.1,
            p_out: 0.2,
            ..SbmParams::default()
        };
        assert!(synth_sbm(&bad).is_err());
        assert!(synth_sbm(&SbmParams {
            p_in: 1.5,
            p_out: 0.0,
            ..SbmParams::default()
        })
        .is_err());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let p = SbmParams::default();
        assert_eq!(synth_sbm(&p).unwrap(), synth_sbm(&p).unwrap());
    }
}
