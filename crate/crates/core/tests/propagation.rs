use airgnn_core::data::{synth_sbm, SbmParams};
use airgnn_core::graph::{normalize_adjacency, stationary_limit};
use airgnn_core::{Graph, Matrix};
use proptest::prelude::*;

/// Dense `Ã = A + I` and its degree vector, built straight from an edge list.
fn dense_looped(n: usize, edges: &[(usize, usize)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v) in edges {
        a[u][v] += 1.0;
        a[v][u] += 1.0;
    }
    let d = a.iter().map(|r| r.iter().sum()).collect();
    (a, d)
}

fn oracle_normalized(n: usize, edges: &[(usize, usize)], r: f64) -> Vec<Vec<f64>> {
    let (a, d) = dense_looped(n, edges);
    (0..n)
        .map(|i| (0..n).map(|j| d[i].powf(r - 1.0) * a[i][j] * d[j].powf(-r)).collect())
        .collect()
}

fn oracle_power(m: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut acc: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..k {
        acc = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|l| m[i][l] * acc[l][j]).sum()).collect())
            .collect();
    }
    acc
}

fn oracle_limit(n: usize, edges: &[(usize, usize)], r: f64) -> Vec<Vec<f64>> {
    let (_, d) = dense_looped(n, edges);
    let total = (2 * edges.len() + n) as f64;
    (0..n)
        .map(|i| (0..n).map(|j| d[i].powf(r) * d[j].powf(1.0 - r) / total).collect())
        .collect()
}

fn max_diff(a: &Matrix<f64>, b: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (i, row) in b.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m = m.max((a.get(i, j) - v).abs());
        }
    }
    m
}

fn small_graphs() -> Vec<(&'static str, usize, Vec<(usize, usize)>)> {
    vec![
        ("k2", 2, vec![(0, 1)]),
        ("triangle", 3, vec![(0, 1), (1, 2), (0, 2)]),
        ("star", 4, vec![(0, 1), (0, 2), (0, 3)]),
        ("path", 5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]),
    ]
}

#[test]
fn normalization_matches_dense_oracle() {
    for (name, n, edges) in small_graphs() {
        let g = Graph::from_edges(n, edges.clone()).unwrap().add_self_loops().unwrap();
        for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let adj = normalize_adjacency(&g, r).unwrap();
            let d = max_diff(&adj.matrix().to_dense(), &oracle_normalized(n, &edges, r));
            assert!(d < 1e-15, "{name} r={r}: {d}");
        }
    }
}

#[test]
fn closed_form_limit_matches_long_power_iteration() {
    for (name, n, edges) in small_graphs() {
        let g = Graph::from_edges(n, edges.clone()).unwrap();
        for r in [0.0, 0.5, 1.0] {
            let limit = stationary_limit(&g, r).unwrap();
            assert!(max_diff(&limit, &oracle_limit(n, &edges, r)) < 1e-15);
            let walked = oracle_power(&oracle_normalized(n, &edges, r), 300);
            let d = max_diff(&limit, &walked);
            assert!(d <= 1e-6, "{name} r={r}: {d}");
        }
    }
}

#[test]
fn sbm_powers_approach_the_limit() {
    for seed in 0..5 {
        let ds = synth_sbm(&SbmParams {
            n: 40,
            classes: 2,
            p_in: 0.3,
            p_out: 0.05,
            seed,
            ..SbmParams::default()
        })
        .unwrap();
        let g = ds.graph().add_self_loops().unwrap();
        let adj = normalize_adjacency(&g, 0.5).unwrap();
        let d = adj.dense_power(200).max_abs_diff(&stationary_limit(ds.graph(), 0.5).unwrap());
        assert!(d <= 1e-6, "seed {seed}: {d}");
    }
}

#[test]
fn triangle_operator_is_its_own_limit() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let adj = normalize_adjacency(&g.add_self_loops().unwrap(), 0.5).unwrap();
    let limit = stationary_limit(&g, 0.5).unwrap();
    assert!(adj.matrix().to_dense().max_abs_diff(&limit) <= 1e-12);
    assert!(adj.dense_power(7).max_abs_diff(&limit) <= 1e-12);
}

fn edge_list(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0..n, 0..n), 0..3 * n)
        .prop_map(|pairs| {
            let mut seen = std::collections::BTreeSet::new();
            for (u, v) in pairs {
                if u != v {
                    seen.insert((u.min(v), u.max(v)));
                }
            }
            seen.into_iter().collect()
        })
}

proptest! {
    #[test]
    fn symmetric_normalization_is_symmetric(edges in edge_list(12)) {
        let g = Graph::from_edges(12, edges).unwrap().add_self_loops().unwrap();
        let adj = normalize_adjacency(&g, 0.5).unwrap();
        prop_assert!(adj.matrix().is_symmetric());
    }

    #[test]
    fn random_walk_normalizations_are_stochastic(edges in edge_list(12)) {
        let g = Graph::from_edges(12, edges).unwrap().add_self_loops().unwrap();
        let rows = normalize_adjacency(&g, 0.0).unwrap();
        for i in 0..12 {
            prop_assert!((rows.matrix().row_sum(i) - 1.0).abs() < 1e-12);
        }
        let cols = normalize_adjacency(&g, 1.0).unwrap().matrix().transpose();
        for j in 0..12 {
            prop_assert!((cols.row_sum(j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_product_matches_dense(edges in edge_list(10), vals in proptest::collection::vec(-3.0f64..3.0, 30)) {
        let g = Graph::from_edges(10, edges).unwrap().add_self_loops().unwrap();
        let adj = normalize_adjacency(&g, 0.3).unwrap();
        let h = Matrix::from_vec(10, 3, vals).unwrap();
        let sparse = adj.matrix().spmm(&h).unwrap();
        let dense = adj.matrix().to_dense().matmul(&h).unwrap();
        prop_assert!(sparse.max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn limit_rows_are_stochastic_for_random_walk(edges in edge_list(8)) {
        let g = Graph::from_edges(8, edges).unwrap();
        match stationary_limit(&g, 0.0) {
            Ok(limit) => {
                for i in 0..8 {
                    let s: f64 = limit.row(i).iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
            Err(_) => prop_assert!(!g.is_connected()),
        }
    }
}
