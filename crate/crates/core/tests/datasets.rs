use airgnn_core::data::{
    load_canonical, make_split, perturb_edges, save_canonical, subsample_labels, synth_sbm, SbmParams, SplitRole,
};
use proptest::prelude::*;

#[test]
fn canonical_round_trip_on_small_sbm() {
    let ds = synth_sbm(&SbmParams {
        n: 10,
        classes: 2,
        ..SbmParams::default()
    })
    .unwrap();
    let ds = make_split(&ds, 2, 2, 2, 0).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join(ds.name());
    save_canonical(&ds, &dir).unwrap();
    let back = load_canonical(&dir).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.content_hash(), ds.content_hash());
}

#[test]
fn intra_block_edge_counts_follow_binomial_statistics() {
    let (n, p_in) = (60usize, 0.2);
    let block = n / 2;
    let pairs = (block * (block - 1) / 2) as f64;
    let mean = 2.0 * pairs * p_in;
    let sigma = (2.0 * pairs * p_in * (1.0 - p_in)).sqrt();
    for seed in 0..20 {
        let ds = synth_sbm(&SbmParams {
            n,
            classes: 2,
            p_in,
            p_out: 0.0,
            seed,
            ..SbmParams::default()
        })
        .unwrap();
        let labels = ds.labels();
        let intra = ds
            .graph()
            .edges()
            .iter()
            .filter(|(u, v, _)| labels[*u] == labels[*v])
            .count() as f64;
        // the connectivity join may add at most one intra-block edge per block
        assert!((intra - mean).abs() <= 3.0 * sigma + 2.0, "seed {seed}: {intra} vs {mean}±{sigma}");
    }
}

#[test]
fn half_edge_retention_is_near_half() {
    let ds = synth_sbm(&SbmParams {
        n: 200,
        classes: 2,
        p_in: 0.1,
        p_out: 0.01,
        ..SbmParams::default()
    })
    .unwrap();
    let m = ds.graph().num_edges();
    assert!(m > 900 && m < 1300, "{m}");
    let kept = perturb_edges(&ds, 0.5, 1).unwrap().graph().num_edges() as f64;
    let sigma = (m as f64 * 0.25).sqrt();
    assert!((kept - m as f64 / 2.0).abs() <= 3.0 * sigma, "kept {kept} of {m}");
}

#[test]
fn equal_seeds_give_equal_hashes_across_methods() {
    let ds = synth_sbm(&SbmParams::default()).unwrap();
    let a = perturb_edges(&ds, 0.7, 42).unwrap();
    let b = perturb_edges(&ds.clone(), 0.7, 42).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    assert_ne!(a.content_hash(), ds.content_hash());
}

#[test]
fn one_label_per_class() {
    let ds = make_split(&synth_sbm(&SbmParams::default()).unwrap(), 10, 50, 100, 0).unwrap();
    let sub = subsample_labels(&ds, 1, 0).unwrap();
    assert_eq!(sub.masks().count(SplitRole::Train), ds.class_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_is_exact_for_any_seed(seed in 0u64..1000, n in 6usize..40, train in 1usize..3) {
        let ds = synth_sbm(&SbmParams { n, classes: 2, seed, p_in: 0.3, p_out: 0.05, ..SbmParams::default() }).unwrap();
        let ds = make_split(&ds, train, 1, 1, seed).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        save_canonical(&ds, tmp.path()).unwrap();
        let back = load_canonical(tmp.path()).unwrap();
        prop_assert_eq!(back.features(), ds.features());
        prop_assert_eq!(back.graph(), ds.graph());
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.masks(), ds.masks());
    }

    #[test]
    fn masks_never_overlap(seed in 0u64..1000) {
        let ds = make_split(&synth_sbm(&SbmParams { seed, ..SbmParams::default() }).unwrap(), 5, 40, 60, seed).unwrap();
        let (tr, va, te) = (ds.masks().train(), ds.masks().val(), ds.masks().test());
        for i in 0..ds.num_nodes() {
            prop_assert!(u8::from(tr[i]) + u8::from(va[i]) + u8::from(te[i]) <= 1);
            prop_assert!(ds.labels()[i] < ds.class_count());
        }
    }
}
