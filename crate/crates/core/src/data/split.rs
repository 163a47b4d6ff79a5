//! Seeded splits and sparsity perturbations. Every function here is a pure
//! function of its inputs and seed.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Masks, SplitRole};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// `per_class_train` nodes of every class for training, then `val_count` and
/// `test_count` nodes drawn from the remainder.
pub fn make_split(ds: &Dataset, per_class_train: usize, val_count: usize, test_count: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.num_nodes();
    let mut roles = vec![SplitRole::None; n];
    for c in 0..ds.class_count() {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.labels()[i] == c).collect();
        if members.len() < per_class_train {
            return Err(Error::Dataset(format!(
                "class {c} has {} nodes, fewer than the {per_class_train} requested for training",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for &i in &members[..per_class_train] {
            roles[i] = SplitRole::Train;
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| roles[i] == SplitRole::None).collect();
    if rest.len() < val_count + test_count {
        return Err(Error::Dataset(format!(
            "only {} nodes remain after training selection; need {val_count} val + {test_count} test",
            rest.len()
        )));
    }
    rest.shuffle(&mut rng);
    for &i in &rest[..val_count] {
        roles[i] = SplitRole::Val;
    }
    for &i in &rest[val_count..val_count + test_count] {
        roles[i] = SplitRole::Test;
    }
    ds.clone().with_masks(Masks::from_roles(roles))
}

/// Keeps each undirected edge independently with probability `keep_rate`.
pub fn perturb_edges(ds: &Dataset, keep_rate: f64, seed: u64) -> Result<Dataset> {
    check_rate(keep_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<(usize, usize, f64)> = ds
        .graph()
        .edges()
        .into_iter()
        .filter(|_| rng.random::<f64>() < keep_rate)
        .collect();
    let graph = Graph::from_weighted_edges(ds.num_nodes(), kept)?;
    ds.clone().with_graph(graph)
}

/// Zeroes each node's feature row independently with probability `1 - keep_rate`.
pub fn perturb_features(ds: &Dataset, keep_rate: f64, seed: u64) -> Result<Dataset> {
    check_rate(keep_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = ds.features().clone();
    for i in 0..features.rows() {
        if rng.random::<f64>() >= keep_rate {
            features.row_mut(i).fill(0.0);
        }
    }
    ds.clone().with_features(features)
}

/// Shrinks the training mask to `per_class` seeded picks per class. Classes
/// with fewer training nodes keep all of them.
pub fn subsample_labels(ds: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roles = ds.masks().roles().to_vec();
    let train = ds.masks().nodes(SplitRole::Train);
    for c in 0..ds.class_count() {
        let mut members: Vec<usize> = train.iter().copied().filter(|&i| ds.labels()[i] == c).collect();
        if members.is_empty() {
            return Err(Error::Dataset(format!("class {c} has no training nodes to subsample")));
        }
        if members.len() < per_class {
            warn!("class {c} has only {} training nodes (< {per_class})", members.len());
        }
        members.shuffle(&mut rng);
        for &i in members.iter().skip(per_class) {
            roles[i] = SplitRole::None;
        }
    }
    ds.clone().with_masks(Masks::from_roles(roles))
}

fn check_rate(keep_rate: f64) -> Result<()> {
    if keep_rate > 0.0 && keep_rate <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("keep rate {keep_rate} outside (0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_sbm, SbmParams};

    fn base() -> Dataset {
        synth_sbm(&SbmParams {
            n: 120,
            classes: 3,
            ..SbmParams::default()
        })
        .unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = base();
        let a = make_split(&ds, 5, 30, 40, 9).unwrap();
        assert_eq!(a.masks().count(SplitRole::Train), 15);
        assert_eq!(a.masks().count(SplitRole::Val), 30);
        assert_eq!(a.masks().count(SplitRole::Test), 40);
        assert_eq!(a.masks(), make_split(&ds, 5, 30, 40, 9).unwrap().masks());
        let one = make_split(&ds, 1, 0, 0, 1).unwrap();
        assert_eq!(one.masks().count(SplitRole::Train), 3);
        assert!(make_split(&ds, 41, 0, 0, 1).is_err());
        assert!(make_split(&ds, 20, 60, 10, 1).is_err());
    }

    #[test]
    fn full_keep_rates_are_identity() {
        let ds = base();
        assert_eq!(perturb_edges(&ds, 1.0, 3).unwrap(), ds);
        assert_eq!(perturb_features(&ds, 1.0, 3).unwrap(), ds);
        assert!(perturb_edges(&ds, 0.0, 3).is_err());
    }

    #[test]
    fn perturbations_are_seeded() {
        let ds = base();
        assert_eq!(perturb_edges(&ds, 0.5, 11).unwrap(), perturb_edges(&ds, 0.5, 11).unwrap());
        assert_eq!(perturb_features(&ds, 0.3, 11).unwrap(), perturb_features(&ds, 0.3, 11).unwrap());
    }

    #[test]
    fn label_subsample_is_subset() {
        let ds = make_split(&base(), 10, 20, 20, 0).unwrap();
        let sub = subsample_labels(&ds, 2, 5).unwrap();
        assert_eq!(sub.masks().count(SplitRole::Train), 6);
        for i in sub.masks().nodes(SplitRole::Train) {
            assert_eq!(ds.masks().role(i), SplitRole::Train);
        }
        assert_eq!(sub.masks().nodes(SplitRole::Val), ds.masks().nodes(SplitRole::Val));
        assert_eq!(sub.masks().nodes(SplitRole::Test), ds.masks().nodes(SplitRole::Test));
        assert!(subsample_labels(&base(), 1, 0).is_err(), "no training nodes at all");
    }
}
