use ensemble_qc::density::{mixed_fidelity, trace_distance};
use ensemble_qc::detection::{distribution, Execution};
use ensemble_qc::optics::LossModel;
use ensemble_qc::protocols::{
    eme_round_network, eme_round_probability, excite, ideal_eme, leakage_fraction, prepare_eme, ExcitationParams,
    Polarization,
};
use ensemble_qc::verify::eme_error_reference;
use ensemble_qc::{Cutoff, MixedState, ModeRegistry, PureState};

fn vacuum(cutoff: Cutoff) -> MixedState {
    let reg = ModeRegistry::with_qubits(&["i", "j"]).unwrap();
    MixedState::from_pure(PureState::vacuum(reg, cutoff).unwrap())
}

#[test]
fn round_distribution_is_complete() {
    let s = vacuum(Cutoff::new(3));
    let params = ExcitationParams::new(0.1, 3).unwrap();
    for loss in [LossModel::ideal(), LossModel::new(0.9, 0.8).unwrap()] {
        for pol in [Polarization::H, Polarization::V] {
            let b = &s.branches()[0];
            let excited = excite(&excite(b, "i", pol, params).unwrap(), "j", pol, params).unwrap();
            let net = eme_round_network(s.registry(), "i", "j", pol, loss).unwrap();
            let dist = distribution(&net.run(&excited).unwrap(), net.detectors()).unwrap();
            let total: f64 = dist.values().sum();
            assert!((total - 1.0).abs() < 1e-10);
            let single = dist.get(&vec![1, 0]).unwrap() + dist.get(&vec![0, 1]).unwrap();
            let want = eme_round_probability(0.1, loss.eta(), 3).unwrap();
            assert!((single - want).abs() < 1e-12, "{single} {want}");
        }
    }
}

#[test]
fn ideal_efficiency_gives_the_exact_pair() {
    for p in [0.01, 0.1, 0.3] {
        let s = vacuum(Cutoff::new(3));
        let params = ExcitationParams::new(p, 3).unwrap();
        let out = prepare_eme(&s, "i", "j", params, LossModel::ideal(), Execution::Analytic).unwrap();
        let ideal = ideal_eme(s.registry().clone(), Cutoff::new(3), "i", "j").unwrap();
        assert!((out.corrected_state().unwrap().fidelity(&ideal).unwrap() - 1.0).abs() < 1e-10);
        assert!(leakage_fraction(&out.state().unwrap(), &["i", "j"]).unwrap() < 1e-12);
        // Both sign outcomes of each round are equally likely.
        for b in &out.branches {
            assert!((b.probability - out.probability / 4.0).abs() < 1e-12);
        }
    }
}

#[test]
fn lossy_pair_matches_excitation_error_map() {
    let cutoff = Cutoff::new(2);
    for (p, eta) in [(0.01, 0.8), (0.02, 0.8), (0.05, 0.9)] {
        let s = vacuum(cutoff);
        let params = ExcitationParams::new(p, 2).unwrap();
        let out = prepare_eme(&s, "i", "j", params, LossModel::new(eta, 1.0).unwrap(), Execution::Analytic).unwrap();
        let state = out.corrected_state().unwrap();
        let reference = eme_error_reference(s.registry().clone(), cutoff, "i", "j", p, eta).unwrap();
        assert!(mixed_fidelity(&state, &reference).unwrap() >= 1.0 - 1e-8);
        assert!(trace_distance(&state, &reference).unwrap() < 1e-10);
        let round = eme_round_probability(p, eta, 2).unwrap();
        assert!((out.probability - round * round).abs() < 1e-12);
    }
}

#[test]
fn leakage_is_linear_in_p() {
    let leak = |p: f64| {
        let s = vacuum(Cutoff::new(2));
        let params = ExcitationParams::new(p, 2).unwrap();
        let out = prepare_eme(&s, "i", "j", params, LossModel::new(0.8, 1.0).unwrap(), Execution::Analytic).unwrap();
        leakage_fraction(&out.state().unwrap(), &["i", "j"]).unwrap()
    };
    let (a, b) = (leak(0.01), leak(0.02));
    assert!(a > 0.0);
    assert!((b / a - 2.0).abs() < 0.1, "{}", b / a);
    // Leading weight ≈ 6 p(1−η).
    assert!((a / (0.01 * 0.2) - 6.0).abs() < 0.5, "{}", a / 0.002);
}
