use std::time::Instant;

use ensemble_qc::density::{mixed_fidelity, trace_distance};
use ensemble_qc::detection::Execution;
use ensemble_qc::optics::LossModel;
use ensemble_qc::protocols::{encode_cluster, ideal_eme_inputs, prepare_three_cluster, ClusterGraph};
use ensemble_qc::verify::{id_ghz_reference, loss_rate, LossForm};
use ensemble_qc::{Cutoff, Error, MixedState, ModeRegistry};

const LABELS: [&str; 6] = ["q0", "q1", "q2", "q3", "q4", "q5"];
const KEPT: [&str; 3] = ["q1", "q3", "q5"];

fn input(cutoff: Cutoff) -> MixedState {
    let reg = ModeRegistry::with_qubits(&LABELS).unwrap();
    MixedState::from_pure(ideal_eme_inputs(reg, cutoff, LABELS).unwrap())
}

#[test]
fn ideal_success_probability_and_output() {
    for cutoff in [Cutoff::new(2), Cutoff::new(3)] {
        let start = Instant::now();
        let s = input(cutoff);
        let out = prepare_three_cluster(&s, LABELS, LossModel::ideal(), Execution::Analytic).unwrap();
        assert!((out.probability - 1.0 / 32.0).abs() < 1e-10, "{}", out.probability);
        assert_eq!(out.branches.len(), 8);
        assert_eq!(out.consumed, ["q0", "q2", "q4"]);
        let cluster = encode_cluster(s.registry().clone(), cutoff, &ClusterGraph::line(&KEPT).unwrap()).unwrap();
        for b in &out.branches {
            assert!((b.probability - 1.0 / 256.0).abs() < 1e-12);
            let f = b.corrected().unwrap().fidelity(&cluster).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "pattern {} fidelity {f}", b.pattern);
        }
        assert!(start.elapsed().as_secs_f64() < 10.0);
    }
}

#[test]
fn lossy_output_is_independently_degraded() {
    let cutoff = Cutoff::new(2);
    for eta in [1.0, 0.9, 0.8, 2.0 / 3.0] {
        let s = input(cutoff);
        let loss = LossModel::new(eta, 1.0).unwrap();
        let out = prepare_three_cluster(&s, LABELS, loss, Execution::Analytic).unwrap();
        let state = out.corrected_state().unwrap();
        let r = loss_rate(eta).unwrap();
        let reference = id_ghz_reference(s.registry().clone(), cutoff, KEPT, r, LossForm::AmplitudeDamping).unwrap();
        let f = mixed_fidelity(&state, &reference).unwrap();
        assert!(f >= 1.0 - 1e-8, "eta {eta}: fidelity {f}");
        assert!(trace_distance(&state, &reference).unwrap() < 1e-10);
        if eta < 1.0 {
            let literal = id_ghz_reference(s.registry().clone(), cutoff, KEPT, r, LossForm::Literal).unwrap();
            assert!(mixed_fidelity(&state, &literal).unwrap() < 0.99);
        }
    }
}

#[test]
fn loss_split_between_stages_does_not_matter() {
    let cutoff = Cutoff::new(2);
    let s = input(cutoff);
    let a = prepare_three_cluster(&s, LABELS, LossModel::new(0.9, 0.9).unwrap(), Execution::Analytic).unwrap();
    let b = prepare_three_cluster(&s, LABELS, LossModel::new(0.81, 1.0).unwrap(), Execution::Analytic).unwrap();
    assert!((a.probability - b.probability).abs() < 1e-12);
    let d = trace_distance(&a.corrected_state().unwrap(), &b.corrected_state().unwrap()).unwrap();
    assert!(d < 1e-10);
}

#[test]
fn sampled_runs_report_rejections() {
    use rand::SeedableRng;
    let s = input(Cutoff::new(2));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (mut ok, mut rejected) = (0, 0);
    for _ in 0..200 {
        match prepare_three_cluster(&s, LABELS, LossModel::ideal(), Execution::Sampled(&mut rng)) {
            Ok(out) => {
                assert_eq!(out.branches.len(), 1);
                ok += 1;
            }
            Err(Error::HeraldFailed { .. }) => rejected += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(ok > 0 && rejected > ok);
}
