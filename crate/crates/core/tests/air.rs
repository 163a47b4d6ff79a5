use std::sync::Arc;

use airgnn_core::data::{synth_sbm, SbmParams};
use airgnn_core::graph::normalize_adjacency;
use airgnn_core::ops::{air_alpha, p_op, p_with_air, t_op, t_with_air, Activation, AirGate};
use airgnn_core::sparse::SparseOperator;
use airgnn_core::tensor::{Tape, Var};
use airgnn_core::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
}

fn operator(seed: u64) -> Arc<SparseOperator<f64>> {
    let ds = synth_sbm(&SbmParams {
        n: 20,
        classes: 2,
        p_in: 0.3,
        p_out: 0.05,
        seed,
        ..SbmParams::default()
    })
    .unwrap();
    normalize_adjacency(&ds.graph().add_self_loops().unwrap(), 0.5)
        .unwrap()
        .operator()
}

#[test]
fn pinned_gates_reduce_to_plain_or_initial_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let adj = operator(trial);
        let (hp, h0) = (random(&mut rng, 20, 5), random(&mut rng, 20, 5));
        let mut tape = Tape::<f64>::new();
        let (a, b) = (tape.leaf(hp, false), tape.leaf(h0, false));
        let closed = AirGate::pinned(0.0, 2).unwrap();
        let open = AirGate::pinned(1.0, 2).unwrap();
        let g0 = p_with_air(&mut tape, &adj, a, b, &closed).unwrap();
        let g1 = p_with_air(&mut tape, &adj, a, b, &open).unwrap();
        let pa = p_op(&mut tape, &adj, a).unwrap();
        let pb = p_op(&mut tape, &adj, b).unwrap();
        assert!(tape.value(g0).max_abs_diff(tape.value(pa)) <= 1e-12);
        assert!(tape.value(g1).max_abs_diff(tape.value(pb)) <= 1e-12);
    }
}

#[test]
fn zero_initial_input_reduces_gated_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let mut tape = Tape::<f64>::new();
        let hp = tape.leaf(random(&mut rng, 15, 6), false);
        let zero = tape.leaf(Matrix::zeros(15, 4), false);
        let proj = tape.leaf(random(&mut rng, 4, 6), false);
        let w = tape.leaf(random(&mut rng, 6, 3), false);
        let b = tape.leaf(random(&mut rng, 1, 3), false);
        let gated = t_with_air(&mut tape, hp, zero, w, Activation::Relu, Some(b), Some(proj)).unwrap();
        let plain = t_op(&mut tape, hp, w, Activation::Relu, Some(b)).unwrap();
        assert!(tape.value(gated).max_abs_diff(tape.value(plain)) <= 1e-12);
    }
}

fn gate_values(hp: Matrix<f64>, h0: Matrix<f64>, u: Matrix<f64>) -> Vec<f64> {
    let mut tape = Tape::<f64>::new();
    let (a, b): (Var, Var) = (tape.leaf(hp, false), tape.leaf(h0, false));
    let u = tape.leaf(u, false);
    let gate = AirGate::learned(u, 2).unwrap();
    let alpha = air_alpha(&mut tape, &gate, a, b).unwrap();
    tape.value(alpha).as_slice().to_vec()
}

#[test]
fn zero_gate_vector_gives_even_mixing() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let alpha = gate_values(random(&mut rng, 9, 3), random(&mut rng, 9, 3), Matrix::zeros(6, 1));
    assert!(alpha.iter().all(|&a| a == 0.5));
}

proptest! {
    #[test]
    fn gates_lie_strictly_inside_unit_interval(
        hp in proptest::collection::vec(-2.0f64..2.0, 12),
        h0 in proptest::collection::vec(-2.0f64..2.0, 12),
        u in proptest::collection::vec(-2.0f64..2.0, 6),
    ) {
        let alpha = gate_values(
            Matrix::from_vec(4, 3, hp).unwrap(),
            Matrix::from_vec(4, 3, h0).unwrap(),
            Matrix::from_vec(6, 1, u).unwrap(),
        );
        for a in alpha {
            prop_assert!(a > 0.0 && a < 1.0, "alpha {}", a);
        }
    }

    #[test]
    fn saturated_gates_stay_finite_and_bounded(scale in 1.0f64..1e6) {
        let hp = Matrix::filled(3, 2, scale);
        let h0 = Matrix::filled(3, 2, -scale);
        let alpha = gate_values(hp, h0, Matrix::from_rows(&[[1.0], [1.0], [-1.0], [-1.0]]));
        for a in alpha {
            prop_assert!(a.is_finite() && (0.0..=1.0).contains(&a));
        }
    }
}
