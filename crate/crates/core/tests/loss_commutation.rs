use std::collections::BTreeMap;

use ensemble_qc::detection::distribution;
use ensemble_qc::optics::{commute_loss_to_sources, LossModel, Network};
use ensemble_qc::protocols::{
    cz_network, eme_round_network, encode_cluster, excite, ghz_network, ideal_eme_inputs, readout_swap, ClusterGraph,
    ExcitationParams, Polarization,
};
use ensemble_qc::{Cutoff, ModeRegistry, PureState};

fn loss() -> LossModel {
    LossModel::new(0.9, 0.9).unwrap()
}

fn compare(net: &Network, input: &PureState) -> usize {
    let commuted = commute_loss_to_sources(net).unwrap();
    assert!(commuted.elements().iter().filter(|e| e.is_loss()).count() == net.inputs().len());
    let a = distribution(&net.run(input).unwrap(), net.detectors()).unwrap();
    let b = distribution(&commuted.run(input).unwrap(), commuted.detectors()).unwrap();
    let keys: Vec<&Vec<u8>> = a.keys().chain(b.keys()).collect();
    let get = |d: &BTreeMap<Vec<u8>, f64>, k: &Vec<u8>| d.get(k).copied().unwrap_or(0.0);
    for k in &keys {
        assert!((get(&a, k) - get(&b, k)).abs() < 1e-10, "pattern {k:?}");
    }
    assert!((a.values().sum::<f64>() - 1.0).abs() < 1e-10);
    a.len()
}

#[test]
fn eme_round() {
    let reg = ModeRegistry::with_qubits(&["i", "j"]).unwrap();
    let params = ExcitationParams::new(0.2, 2).unwrap();
    let vac = PureState::vacuum(reg.clone(), Cutoff::new(2)).unwrap();
    let excited = excite(&excite(&vac, "i", Polarization::H, params).unwrap(), "j", Polarization::H, params).unwrap();
    let net = eme_round_network(&reg, "i", "j", Polarization::H, loss()).unwrap();
    assert!(compare(&net, &excited) > 3);
}

#[test]
fn ghz() {
    let labels = ["q0", "q1", "q2", "q3", "q4", "q5"];
    let reg = ModeRegistry::with_qubits(&labels).unwrap();
    let mut s = ideal_eme_inputs(reg.clone(), Cutoff::new(2), labels).unwrap();
    for l in ["q0", "q2", "q4"] {
        s = readout_swap(&s, l).unwrap();
    }
    let net = ghz_network(&reg, ["q0", "q2", "q4"], loss()).unwrap();
    assert!(compare(&net, &s) > 8);
}

#[test]
fn cz() {
    let graph = ClusterGraph::line(&["3", "1"]).unwrap().union(&ClusterGraph::line(&["2", "4"]).unwrap()).unwrap();
    let reg = ModeRegistry::with_qubits(graph.vertices()).unwrap();
    let s = encode_cluster(reg.clone(), Cutoff::new(2), &graph).unwrap();
    let s = readout_swap(&readout_swap(&s, "1").unwrap(), "2").unwrap();
    let net = cz_network(&reg, ["1", "2"], loss()).unwrap();
    assert!(compare(&net, &s) > 8);
}
