use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use approx::assert_abs_diff_eq;
use nlgame::eval::{classical_threshold, evaluate_exact, evaluate_noisy, inequality_value, NoiseModel, NoiseOptions};
use nlgame::game::min_monochromatic_edges;
use nlgame::hamiltonian::{build_beta, build_hamiltonian};
use nlgame::*;

fn g14() -> GameSpec {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/g13.txt");
    coloring_game(&load_graph(path, true).unwrap(), 4, 2).unwrap()
}

fn chsh_optimal() -> Strategy {
    let mut layer = MeasurementLayer::new(LayerKind::Ry, 2, 2, 1).unwrap();
    layer.set_phi(&[0.0, -FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4]).unwrap();
    Strategy { reference: ReferenceState::AllZero, ansatz: vec![("YX".parse().unwrap(), FRAC_PI_4)], layer }
}

#[test]
fn chsh_bell_state_reaches_tsirelson() {
    let s = chsh_optimal();
    let psi = s.prepare_state().unwrap();
    let a = psi.amplitudes();
    // e^{i pi/4 YX}|00> = (|00> - |11>)/sqrt 2
    assert_abs_diff_eq!(a[0].re, 1.0 / SQRT_2, epsilon = 1e-12);
    assert_abs_diff_eq!(a[3].re, -1.0 / SQRT_2, epsilon = 1e-12);
    let game = chsh_game();
    let ineq = inequality_value(&game, &s).unwrap().unwrap();
    assert_abs_diff_eq!(ineq, 2.0 * SQRT_2, epsilon = 1e-12);
    let report = evaluate_exact(&game, &s).unwrap();
    assert_abs_diff_eq!(report.overall_value, (PI / 8.0).cos().powi(2), epsilon = 1e-12);
    assert_abs_diff_eq!(psi.mutual_information(&[0], &[1]).unwrap(), 2.0, epsilon = 1e-9);
}

#[test]
fn chsh_classical_values() {
    let game = chsh_game();
    let b = classical_brute_force(&game, 1e3).unwrap();
    assert_eq!(b.best_value, 0.75);
    let t = classical_threshold(&game).unwrap();
    assert_eq!(t.inequality_bound, Some(2.0));
}

#[test]
fn beta_is_affine_in_chsh_operator() {
    let mut layer = MeasurementLayer::new(LayerKind::Ry, 2, 2, 1).unwrap();
    layer.set_phi(&[0.3, -1.1, 2.0, 0.7]).unwrap();
    let beta = build_beta(&chsh_game(), &layer).unwrap().matrix;
    let ineq = hamiltonian::chsh_inequality_operator(&layer).unwrap().matrix;
    let lhs = &beta.scale(8.0) - &DenseOperator::identity(4).scale(4.0);
    assert!(lhs.max_abs_diff(&ineq) < 1e-12);
}

#[test]
fn nps_product_state_sits_on_classical_bound() {
    // All angles zero on |0...0>: every correlator is +1, so
    // I = -2N + N(N-1)/2 (1 - 2 + 1) + 2N = 0.
    let game = nps_game(6).unwrap();
    let layer = MeasurementLayer::new(LayerKind::Ry, 6, 2, 1).unwrap();
    let s = Strategy { reference: ReferenceState::AllZero, ansatz: vec![], layer };
    assert_abs_diff_eq!(inequality_value(&game, &s).unwrap().unwrap(), 0.0, epsilon = 1e-12);
}

/// Deterministic classical coloring as a quantum strategy on `|0..0>`:
/// `Ry(pi)` flips a qubit, so each vertex sets the bits of its color.
fn classical_coloring_strategy(n_vertices: usize, coloring: &[usize], kind: LayerKind) -> Strategy {
    let mut layer = MeasurementLayer::new(kind, 2, n_vertices, 2).unwrap();
    for slot in 0..2 {
        for (v, &c) in coloring.iter().enumerate() {
            for q in 0..2 {
                if (c >> (1 - q)) & 1 == 1 {
                    let k = if kind == LayerKind::Ry { 0 } else { kind.params_per_qubit() - 1 };
                    let i = layer.param_index(slot, v, q, k);
                    layer.phi_mut()[i] = PI;
                }
            }
        }
    }
    Strategy { reference: ReferenceState::AllZero, ansatz: vec![], layer }
}

#[test]
fn perfect_classical_colorings_have_unit_beta() {
    for (n, colors) in [(3usize, 3usize), (4, 4)] {
        let game = coloring_game(&Graph::complete(n), colors, 2).unwrap();
        let coloring: Vec<usize> = (0..n).collect();
        for kind in [LayerKind::Ry, LayerKind::U3Ry] {
            let s = classical_coloring_strategy(n, &coloring, kind);
            let psi = s.prepare_state().unwrap();
            let beta = GameObjective::beta(&game).unwrap();
            assert_abs_diff_eq!(beta.energy(&s.layer, &psi).unwrap(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(evaluate_exact(&game, &s).unwrap().overall_value, 1.0, epsilon = 1e-10);
        }
    }
}

#[test]
fn hamiltonian_forms_shift_spectrum() {
    let game = coloring_game(&Graph::complete(3), 3, 2).unwrap();
    let mut layer = MeasurementLayer::new(LayerKind::Ry, 2, 3, 2).unwrap();
    layer.set_phi(&(0..12).map(|i| 0.37 * i as f64).collect::<Vec<_>>()).unwrap();
    let beta = build_beta(&game, &layer).unwrap();
    let value = build_hamiltonian(&beta, HamiltonianForm::Value).unwrap().matrix;
    let violation = build_hamiltonian(&beta, HamiltonianForm::Violation).unwrap().matrix;
    let diff = &violation - &value;
    assert!(diff.max_abs_diff(&DenseOperator::identity(16)) < 1e-12);
}

#[test]
fn g14_graph_shape_and_classical_threshold() {
    let game = g14();
    assert_eq!(game.questions().len(), 88);
    let GameKind::Coloring { graph, .. } = &game.kind else { unreachable!() };
    assert_eq!(graph.edges().len(), 37);
    let g13 = Graph::new(13, graph.edges().iter().copied().filter(|&(_, v)| v < 13)).unwrap();
    // The 13-vertex core is not 3-colorable, so the apex forces a fifth color.
    assert_eq!(min_monochromatic_edges(&g13, 3, 1_000_000).unwrap().0, 1);
    let t = classical_threshold(&game).unwrap();
    assert_eq!(t.monochromatic_edges, Some(1));
    assert_abs_diff_eq!(t.edge_rate.unwrap(), 36.0 / 37.0, epsilon = 1e-15);
}

#[test]
fn g14_ansatz_state_is_maximally_entangled() {
    let game = g14();
    let mut psi = StateVector::<f64>::plus(4).unwrap();
    psi.rotate_pauli(&"YIZI".parse().unwrap(), FRAC_PI_4).unwrap();
    psi.rotate_pauli(&"YZYY".parse().unwrap(), FRAC_PI_4).unwrap();
    assert_abs_diff_eq!(psi.mutual_information(&[0, 1], &[2, 3]).unwrap(), 4.0, epsilon = 1e-9);
    assert_eq!(game.total_qubits(), 4);
}

#[test]
fn noisy_vertex_question_matches_pauli_counting() {
    // Two Bell pairs (0,2) and (1,3) give perfectly correlated colors. Zero
    // angles leave one CNOT per player; with p_err = 1 each player's colour
    // is XOR-ed with the X part of a uniform non-identity Pauli, which is 00
    // for 3 of the 15 and each other pattern for 4. Equal colors then occur
    // with probability (3/15)^2 + 3 (4/15)^2 = 57/225.
    let game = coloring_game(&Graph::complete(2), 4, 2).unwrap();
    let layer = MeasurementLayer::new(LayerKind::U3Ry, 2, 2, 2).unwrap();
    let s = Strategy {
        reference: ReferenceState::AllZero,
        ansatz: vec![("YIXI".parse().unwrap(), FRAC_PI_4), ("IYIX".parse().unwrap(), FRAC_PI_4)],
        layer,
    };
    assert_abs_diff_eq!(evaluate_exact(&game, &s).unwrap().per_question[0].win_rate, 1.0, epsilon = 1e-12);
    let opts = NoiseOptions { model: NoiseModel::uniform(1.0).unwrap(), shots: 40_000, seed: 5, compile_ansatz: false };
    let r = evaluate_noisy(&game, &s, &opts).unwrap();
    let vertex = &r.per_question[0];
    assert_eq!(vertex.category.as_deref(), Some("vertex"));
    let expected = 57.0 / 225.0;
    assert!((vertex.win_rate - expected).abs() < 4.0 * vertex.stderr, "{} vs {expected}", vertex.win_rate);

    let clean = NoiseOptions { model: NoiseModel::uniform(0.0).unwrap(), shots: 500, seed: 5, compile_ansatz: true };
    assert_eq!(evaluate_noisy(&game, &s, &clean).unwrap().per_question[0].win_rate, 1.0);
}

#[test]
fn dpo_solves_chsh() {
    let r = dpo(&chsh_game(), LayerKind::Ry, &DpoConfig::chsh()).unwrap();
    assert_abs_diff_eq!(r.final_energy, -(PI / 8.0).cos().powi(2), epsilon = 1e-6);
    assert!(r.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert_eq!(r.strategy.layer.phi()[0], 0.0);
    let ineq = inequality_value(&chsh_game(), &r.strategy).unwrap().unwrap();
    assert_abs_diff_eq!(ineq, 2.0 * SQRT_2, epsilon = 1e-4);
}
