use std::sync::Arc;

use airgnn_core::data::{make_split, synth_sbm, Dataset, SbmParams};
use airgnn_core::graph::{normalize_adjacency, stationary_limit};
use airgnn_core::model::{train, Architecture, Model, ModelConfig};
use airgnn_core::smoothness::gsl_vs_dt_probe;
use airgnn_core::Matrix;

fn sbm(n: usize, seed: u64) -> Dataset {
    synth_sbm(&SbmParams {
        n,
        classes: 3,
        p_in: 0.1,
        p_out: 0.01,
        feat_dim: 16,
        signal_strength: 1.0,
        seed,
    })
    .unwrap()
}

fn split(ds: &Dataset) -> Dataset {
    let n = ds.num_nodes();
    make_split(ds, (n / 15).min(20), n / 5, n / 3, 3).unwrap()
}

fn sized(base: ModelConfig) -> ModelConfig {
    ModelConfig {
        num_classes: 3,
        hidden_width: 16,
        ..base
    }
}

#[test]
fn two_layer_gcn_separates_easy_blocks() {
    let ds = split(&sbm(300, 1));
    let report = train(&sized(ModelConfig::gcn(2)), &ds).unwrap();
    assert_eq!(report.epochs.len(), 500);
    assert!(report.test_acc >= 0.9, "test accuracy {}", report.test_acc);
}

#[test]
fn pptt_equals_propagated_features_through_mlp() {
    let ds = split(&sbm(60, 2));
    let d_p = 4;
    let cfg = sized(ModelConfig {
        architecture: Architecture::Pptt,
        d_p,
        d_t: 2,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    });
    let pptt = Model::<f64>::new(&cfg, 16).unwrap();
    let prepared = pptt.prepare(&ds).unwrap();

    let adj = normalize_adjacency(&ds.graph().add_self_loops().unwrap(), 0.5).unwrap();
    let mut h = ds.features().clone();
    for _ in 0..d_p {
        h = adj.matrix().spmm(&h).unwrap();
    }
    let mlp = Model::<f64>::new(&sized(ModelConfig::mlp(2)), 16).unwrap();
    assert_eq!(mlp.params(), pptt.params());
    let direct = mlp
        .predict(&mlp.prepare_with(adj.operator(), Arc::new(h)).unwrap())
        .unwrap();
    assert_eq!(pptt.predict(&prepared).unwrap(), direct);
}

#[test]
fn deep_precomputation_reaches_stationary_rows() {
    let ds = sbm(120, 5);
    assert!(ds.graph().is_connected());
    let cfg = sized(ModelConfig {
        architecture: Architecture::Pptt,
        d_p: 200,
        d_t: 1,
        ..ModelConfig::default()
    });
    let model = Model::<f64>::new(&cfg, 16).unwrap();
    let prepared = model.prepare(&ds).unwrap();
    let limit = stationary_limit(ds.graph(), 0.5).unwrap();
    let expected = limit.matmul(ds.features()).unwrap();
    let got = prepared.propagated().unwrap();
    assert!(got.max_abs_diff(&expected) <= 1e-5, "{}", got.max_abs_diff(&expected));
}

#[test]
fn power_one_and_even_split_match_vanilla_gcn() {
    let ds = split(&sbm(90, 3));
    let vanilla = sized(ModelConfig::gcn(2));
    let base = train(&vanilla, &ds).unwrap();
    let split = train(&sized(ModelConfig::gcn_split(2)), &ds).unwrap();
    let power = train(&sized(ModelConfig::gcn_power(2, 1)), &ds).unwrap();
    assert_eq!(base.epochs, split.epochs);
    assert_eq!(base.epochs, power.epochs);
}

#[test]
fn squared_adjacency_changes_logits() {
    let ds = split(&sbm(90, 3));
    let one = Model::<f64>::new(&sized(ModelConfig::gcn(2)), 16).unwrap();
    let two = Model::<f64>::new(&sized(ModelConfig::gcn_power(2, 2)), 16).unwrap();
    let a = one.predict(&one.prepare(&ds).unwrap()).unwrap();
    let b = two.predict(&two.prepare(&ds).unwrap()).unwrap();
    assert!(a.max_abs_diff(&b) > 1e-6);
}

#[test]
fn squared_triangle_layer_is_idempotent() {
    use airgnn_core::data::{Masks, SplitRole};
    use airgnn_core::Graph;
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]);
    let masks = Masks::from_roles(vec![SplitRole::Train, SplitRole::Val, SplitRole::Test]);
    let ds = Dataset::new("triangle", g, x, vec![0, 1, 1], masks, 2).unwrap();
    let cfg = ModelConfig {
        num_classes: 2,
        d_t: 1,
        ..ModelConfig::gcn_power(1, 2)
    };
    let squared = Model::<f64>::new(&cfg, 2).unwrap();
    let single = Model::<f64>::new(&ModelConfig { num_classes: 2, ..ModelConfig::gcn(1) }, 2).unwrap();
    let a = squared.predict(&squared.prepare(&ds).unwrap()).unwrap();
    let b = single.predict(&single.prepare(&ds).unwrap()).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-14);
}

#[test]
fn dt_probe_emits_one_value_per_depth_and_repeats() {
    let ds = split(&sbm(150, 4));
    let cfg = sized(ModelConfig {
        architecture: Architecture::Pptt,
        d_p: 3,
        d_t: 1,
        epochs: 30,
        ..ModelConfig::default()
    });
    let depths = [1, 2, 3, 4, 5];
    let a = gsl_vs_dt_probe(&cfg, &ds, &depths).unwrap();
    assert_eq!(a.len(), 5);
    assert!(a.iter().all(|r| (-1.0..=1.0).contains(&r.gsl)));
    assert_eq!(a, gsl_vs_dt_probe(&cfg, &ds, &depths).unwrap());
    assert!(gsl_vs_dt_probe(&sized(ModelConfig::gcn(2)), &ds, &depths).is_err());
}
