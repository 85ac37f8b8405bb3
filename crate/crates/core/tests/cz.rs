use std::sync::Arc;

use ensemble_qc::correction::{apply_corrections, Correction};
use ensemble_qc::detection::{measure, Execution};
use ensemble_qc::optics::LossModel;
use ensemble_qc::protocols::{cz_fuse, cz_network, encode_cluster, logical_state, readout_swap, ClusterGraph, CzStatus};
use ensemble_qc::{Cutoff, MixedState, ModeRegistry, PureState, C64};

const TOL: f64 = 1e-8;

struct Setup {
    registry: Arc<ModeRegistry>,
    graph: ClusterGraph,
    input: PureState,
}

fn setup(graph: ClusterGraph) -> Setup {
    let registry = ModeRegistry::with_qubits(graph.vertices()).unwrap();
    let input = encode_cluster(registry.clone(), Cutoff::default(), &graph).unwrap();
    Setup { registry, graph, input }
}

fn two_lines(a: &[&str], b: &[&str]) -> ClusterGraph {
    ClusterGraph::line(a).unwrap().union(&ClusterGraph::line(b).unwrap()).unwrap()
}

/// `CZ₃₄|Φ′⟩`: the graph without links, with the 3–4 edge toggled.
fn fused_reference(s: &Setup) -> PureState {
    let mut g = s.graph.delete_vertex("1").unwrap().delete_vertex("2").unwrap();
    g.toggle_edge("3", "4").unwrap();
    encode_cluster(s.registry.clone(), Cutoff::default(), &g).unwrap()
}

fn check_success(graph: ClusterGraph) {
    let s = setup(graph);
    let out = cz_fuse(
        &MixedState::from_pure(s.input.clone()),
        ["1", "2"],
        ["3", "4"],
        LossModel::ideal(),
        Execution::Analytic,
    )
    .unwrap();
    assert!((out.p_success - 0.5).abs() < 1e-10, "{}", out.p_success);
    assert!((out.p_failure - 0.5).abs() < 1e-10);
    assert!(out.p_indeterminate.abs() < 1e-10);
    let reference = fused_reference(&s);
    let success: Vec<_> = out.branches.iter().filter(|b| b.status == CzStatus::Success).collect();
    assert_eq!(success.len(), 4);
    for b in success {
        let f = b.branch.corrected().unwrap().fidelity(&reference).unwrap();
        assert!((f - 1.0).abs() < TOL, "pattern {} fidelity {f}", b.branch.pattern);
    }
    let merged = out.success().corrected_state().unwrap();
    assert!((merged.fidelity(&reference).unwrap() - 1.0).abs() < TOL);
}

#[test]
fn fuses_two_two_qubit_lines() {
    check_success(two_lines(&["3", "1"], &["2", "4"]));
}

#[test]
fn fuses_two_and_three_qubit_lines() {
    check_success(two_lines(&["3", "1"], &["2", "4", "5"]));
    check_success(two_lines(&["5", "3", "1"], &["2", "4"]));
}

#[test]
fn fusing_the_ends_of_one_path_toggles_the_edge() {
    check_success(ClusterGraph::line(&["1", "3", "4", "2"]).unwrap());
    check_success(ClusterGraph::line(&["1", "3", "x", "4", "2"]).unwrap());
}

/// Conditional atomic amplitude of every two-photon pattern against the
/// operator the pattern should apply to `|Φ′⟩`.
#[test]
fn intermediate_state_term_groups() {
    let s = setup(two_lines(&["3", "1"], &["2", "4", "5"]));
    let cut = Cutoff::default();
    let phi = encode_cluster(s.registry.clone(), cut, &s.graph.delete_vertex("1").unwrap().delete_vertex("2").unwrap())
        .unwrap();
    let fused = fused_reference(&s);
    let z = |st: &PureState, qs: &[&str]| {
        let c: Vec<Correction> = qs.iter().map(|q| Correction::z(q)).collect();
        apply_corrections(st, &c).unwrap()
    };
    let plus_z3 = phi.superpose(&z(&phi, &["3"])).unwrap();
    let minus_z3 = phi.superpose(&z(&phi, &["3"]).scaled(C64::new(-1.0, 0.0))).unwrap();
    let groups: [(&str, [u8; 4], [u8; 4], PureState); 4] = [
        ("Z4 CZ", [1, 1, 0, 0], [0, 0, 1, 1], z(&fused, &["4"])),
        ("Z3 Z4 CZ", [1, 0, 0, 1], [0, 1, 1, 0], z(&fused, &["3", "4"])),
        ("1 + Z3", [2, 0, 0, 0], [0, 0, 2, 0], plus_z3),
        ("Z4 (1 - Z3)", [0, 2, 0, 0], [0, 0, 0, 2], z(&minus_z3, &["4"])),
    ];

    let swapped = readout_swap(&readout_swap(&s.input, "1").unwrap(), "2").unwrap();
    let net = cz_network(&s.registry, ["1", "2"], LossModel::ideal()).unwrap();
    let psi = net.evolve(&swapped).unwrap();
    let detections = measure(&psi, net.detectors()).unwrap();
    let coefficient = |pattern: [u8; 4], reference: &PureState| -> C64 {
        let d = detections.iter().find(|d| d.pattern.counts == pattern).expect("pattern present");
        let branch = &d.state.branches()[0];
        assert!((branch.fidelity(reference).unwrap() - 1.0).abs() < TOL, "pattern {pattern:?}");
        branch.normalized().inner_product(&reference.normalized()).unwrap().conj() * d.probability.sqrt()
    };
    let mut opposite = 0.0;
    for (name, first, second, reference) in &groups {
        let c1 = coefficient(*first, reference);
        let c2 = coefficient(*second, reference);
        // Within a group the two patterns carry opposite signs.
        assert!((c2 / c1 + 1.0).norm() < 1e-10, "{name}: {c1} {c2}");
        if name.contains("CZ") {
            opposite += c1.norm_sqr() + c2.norm_sqr();
        }
    }
    assert!((opposite - 0.5).abs() < 1e-10);
    let total: f64 = detections.iter().map(|d| d.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(detections.iter().all(|d| d.pattern.total() == 2));
}

#[test]
fn same_polarization_removes_the_target() {
    for graph in [
        two_lines(&["3", "1"], &["2", "4"]),
        two_lines(&["5", "3", "1"], &["2", "4"]),
        two_lines(&["3", "1"], &["2", "4", "5"]),
    ] {
        let s = setup(graph);
        let out = cz_fuse(
            &MixedState::from_pure(s.input.clone()),
            ["1", "2"],
            ["3", "4"],
            LossModel::ideal(),
            Execution::Analytic,
        )
        .unwrap();
        let rest = s.graph.delete_vertex("1").unwrap().delete_vertex("2").unwrap();
        let without_3 = rest.delete_vertex("3").unwrap();
        let neighbors: Vec<&str> = rest.neighbors("3").unwrap();
        let failures: Vec<_> = out.branches.iter().filter(|b| matches!(b.status, CzStatus::Failure { .. })).collect();
        assert_eq!(failures.len(), 4);
        for b in failures {
            let CzStatus::Failure { z3 } = b.status else { unreachable!() };
            let amps = if z3 == 1 {
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            } else {
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
            };
            let q3 = logical_state(s.registry.clone(), Cutoff::default(), &["3"], &amps).unwrap();
            let reference = q3.tensor(&encode_cluster(s.registry.clone(), Cutoff::default(), &without_3).unwrap()).unwrap();
            let mut corrected = b.branch.corrected().unwrap();
            if z3 == -1 {
                let zs: Vec<Correction> = neighbors.iter().map(|n| Correction::z(n)).collect();
                corrected = ensemble_qc::correction::apply_corrections_mixed(&corrected, &zs).unwrap();
            }
            let f = corrected.fidelity(&reference).unwrap();
            assert!((f - 1.0).abs() < TOL, "pattern {} z3 {z3} fidelity {f}", b.branch.pattern);
        }
    }
}

#[test]
fn lossy_fusion_flags_missing_photons() {
    let s = setup(two_lines(&["3", "1"], &["2", "4"]));
    let out = cz_fuse(
        &MixedState::from_pure(s.input.clone()),
        ["1", "2"],
        ["3", "4"],
        LossModel::new(0.9, 0.9).unwrap(),
        Execution::Analytic,
    )
    .unwrap();
    let eta: f64 = 0.81;
    assert!((out.p_success - 0.5 * eta * eta).abs() < 1e-10);
    assert!((out.p_indeterminate - (1.0 - eta * eta)).abs() < 1e-10);
    assert_eq!(out.recovery, ["3", "4"]);
    assert_eq!(out.consumed, ["1", "2"]);
    let reference = fused_reference(&s);
    let f = out.success().corrected_state().unwrap().fidelity(&reference).unwrap();
    assert!((f - 1.0).abs() < TOL);
}

#[test]
fn sampled_fusion_keeps_one_branch() {
    use rand::SeedableRng;
    let s = setup(two_lines(&["3", "1"], &["2", "4"]));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut successes = 0;
    for _ in 0..200 {
        let out = cz_fuse(
            &MixedState::from_pure(s.input.clone()),
            ["1", "2"],
            ["3", "4"],
            LossModel::ideal(),
            Execution::Sampled(&mut rng),
        )
        .unwrap();
        assert_eq!(out.branches.len(), 1);
        assert!((out.p_success - 0.5).abs() < 1e-10);
        if out.status() == CzStatus::Success {
            successes += 1;
        }
    }
    assert!((70..=130).contains(&successes), "{successes}");
}
