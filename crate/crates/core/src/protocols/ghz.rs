use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use crate::correction::Correction;
use crate::detection::{herald, measure_mixed, ClickPattern, Execution, HeraldRule, ProtocolOutcome};
use crate::error::{Error, Result};
use crate::optics::{insert_loss, LossModel, Network};
use crate::registry::ModeRegistry;
use crate::state::{Cutoff, MixedState, PureState};

use super::eme::ideal_eme;
use super::pulses::readout_swap;
use super::qubit;

/// Tensor product of three ideal pairs `(q0,q1)`, `(q2,q3)`, `(q4,q5)`.
pub fn ideal_eme_inputs(registry: Arc<ModeRegistry>, cutoff: Cutoff, labels: [&str; 6]) -> Result<PureState> {
    let mut s = ideal_eme(registry.clone(), cutoff, labels[0], labels[1])?;
    for k in [2, 4] {
        s = s.tensor(&ideal_eme(registry.clone(), cutoff, labels[k], labels[k + 1])?)?;
    }
    Ok(s)
}

/// Network on the photons read out of the three `readout` qubits: π/4
/// rotators on each, PBS between the first and second, PBS between the
/// second and third, π/4 rotators again. Detectors are `(h, v)` of each.
pub fn ghz_network(registry: &Arc<ModeRegistry>, readout: [&str; 3], loss: LossModel) -> Result<Network> {
    let q = readout
        .iter()
        .map(|l| qubit(registry, l).map(|q| q.optical()))
        .collect::<Result<Vec<_>>>()?;
    let modes: Vec<_> = q.iter().flatten().copied().collect();
    let mut net = Network::new(Arc::clone(registry), &modes, &modes)?;
    for [h, v] in &q {
        net.rotator(*h, *v, FRAC_PI_4)?;
    }
    net.pbs(q[0][0], q[0][1], q[1][0], q[1][1])?;
    net.pbs(q[1][0], q[1][1], q[2][0], q[2][1])?;
    for [h, v] in &q {
        net.rotator(*h, *v, FRAC_PI_4)?;
    }
    insert_loss(&net, loss)
}

/// Corrections for an accepted pattern (counts over `h,v` of each readout
/// photon): X on the middle kept qubit when an odd number of photons were h,
/// then a Hadamard on it, turning the heralded GHZ-type state into the
/// linear three-qubit cluster.
pub fn three_cluster_corrections(pattern: &ClickPattern, middle: &str) -> Option<Vec<Correction>> {
    let c = &pattern.counts;
    if c.len() != 6 || c.chunks(2).any(|pair| pair[0] + pair[1] != 1) {
        return None;
    }
    let h_clicks = c[0] + c[2] + c[4];
    let mut out = Vec::new();
    if h_clicks % 2 == 1 {
        out.push(Correction::x(middle));
    }
    out.push(Correction::hadamard(middle));
    Some(out)
}

/// Reads out `labels[0]`, `labels[2]`, `labels[4]` of three pairs, runs the
/// GHZ network and heralds one photon in each spatial mode. On success the
/// corrected state of `labels[1]`, `labels[3]`, `labels[5]` is the linear
/// cluster with `labels[3]` in the middle.
///
/// In sampled mode a rejected pattern returns [`Error::HeraldFailed`].
pub fn prepare_three_cluster(
    input: &MixedState,
    labels: [&str; 6],
    loss: LossModel,
    exec: Execution<'_>,
) -> Result<ProtocolOutcome> {
    let readout = [labels[0], labels[2], labels[4]];
    let swapped = input.map_branches(|b| {
        let mut s = b.clone();
        for l in readout {
            s = readout_swap(&s, l)?;
        }
        Ok(s)
    })?;
    let net = ghz_network(input.registry(), readout, loss)?;
    let detections = measure_mixed(&net.run_mixed(&swapped)?, net.detectors())?;
    let middle = labels[3];
    let rule = HeraldRule::new("one-per-mode", |p: &ClickPattern| three_cluster_corrections(p, middle));
    let sampled = !exec.is_analytic();
    let mut outcome = herald(detections, &rule, exec);
    if sampled && !outcome.success {
        return Err(Error::HeraldFailed {
            pattern: outcome.branches[0].pattern.describe(input.registry()),
        });
    }
    outcome.consumed = readout.iter().map(|s| s.to_string()).collect();
    Ok(outcome)
}
