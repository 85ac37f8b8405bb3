use ensemble_qc::detection::distribution;
use ensemble_qc::optics::{beamsplitter_matrix, Network, Stage};
use ensemble_qc::{Cutoff, MixedState, ModeId, ModeRegistry, PureState, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn state_strategy(modes: usize, max_quanta: u8) -> impl Strategy<Value = Vec<(Vec<u8>, (f64, f64))>> {
    prop::collection::vec(
        (prop::collection::vec(0..=max_quanta, modes), (-1.0f64..1.0, -1.0f64..1.0)),
        1..6,
    )
}

fn build(modes: usize, terms: Vec<(Vec<u8>, (f64, f64))>) -> PureState {
    let reg = ModeRegistry::anonymous(modes);
    let terms = terms.into_iter().map(|(k, (re, im))| (k, C64::new(re, im)));
    PureState::from_terms(reg, Cutoff::uniform(3), terms).unwrap()
}

fn phase_shifter(phi: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(1, 1, &[C64::from_polar(1.0, phi)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// At most one quantum per mode on three modes never reaches the cutoff,
    /// so a passive transform is norm preserving.
    #[test]
    fn passive_transforms_preserve_norm(terms in state_strategy(3, 1), t in 0.0f64..1.0, phi in 0.0f64..6.3) {
        let s = build(3, terms);
        let bs = beamsplitter_matrix(t).unwrap();
        let out = s
            .apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs).unwrap()
            .apply_mode_unitary(&[ModeId(2)], &phase_shifter(phi)).unwrap()
            .apply_mode_unitary(&[ModeId(1), ModeId(2)], &bs).unwrap();
        prop_assert!((out.norm_sqr() - s.norm_sqr()).abs() < 1e-10);
        prop_assert_eq!(out.truncation().events, 0);
        let total = |st: &PureState| (0..3).map(|m| st.number_expectation(ModeId(m)).unwrap()).sum::<f64>();
        prop_assert!((total(&out) - total(&s)).abs() < 1e-10);
    }

    #[test]
    fn inverse_undoes_transform(terms in state_strategy(2, 1), t in 0.0f64..1.0) {
        let s = build(2, terms);
        let bs = beamsplitter_matrix(t).unwrap();
        let back = s.apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs).unwrap()
            .apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs.adjoint()).unwrap();
        prop_assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn click_distribution_sums_to_weight(terms in state_strategy(2, 2), eta in 0.05f64..1.0, t in 0.0f64..1.0) {
        let reg = ModeRegistry::builder()
            .lossy_mode(ensemble_qc::ModeKind::OpticalH, "x", "a")
            .lossy_mode(ensemble_qc::ModeKind::OpticalV, "x", "b")
            .build()
            .unwrap();
        let (a, b) = (reg.lookup("a").unwrap(), reg.lookup("b").unwrap());
        let mut occ_terms = Vec::new();
        for (k, (re, im)) in terms {
            let mut full = vec![0u8; reg.len()];
            full[a.0] = k[0];
            full[b.0] = k[1];
            occ_terms.push((full, C64::new(re, im)));
        }
        let s = PureState::from_terms(reg.clone(), Cutoff::uniform(2), occ_terms).unwrap().normalized();
        let mut net = Network::new(reg, &[a, b], &[a, b]).unwrap();
        net.beamsplitter(a, b, t).unwrap();
        net.loss(a, eta, Stage::Detector).unwrap();
        net.loss(b, eta, Stage::Detector).unwrap();
        let out: MixedState = net.run(&s).unwrap();
        let dist = distribution(&out, &[a, b]).unwrap();
        prop_assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(dist.values().all(|&p| p >= 0.0));
    }
}

#[test]
fn hong_ou_mandel_dip() {
    let s = build(2, vec![(vec![1, 1], (1.0, 0.0))]);
    let out = s.apply_mode_unitary(&[ModeId(0), ModeId(1)], &beamsplitter_matrix(0.5).unwrap()).unwrap();
    assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
    assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-15);
}
