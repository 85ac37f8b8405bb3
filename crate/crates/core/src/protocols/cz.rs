use std::sync::Arc;

use crate::correction::Correction;
use crate::detection::{draw, herald, measure_mixed, ClickPattern, Execution, HeraldRule, HeraldedBranch, ProtocolOutcome};
use crate::error::Result;
use crate::optics::{insert_loss, LossModel, Network};
use crate::registry::ModeRegistry;
use crate::state::MixedState;

use super::pulses::readout_swap;
use super::qubit;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CzStatus {
    /// Opposite polarizations: CZ applied between the targets.
    Success,
    /// Same polarizations: the first target is left in the `Z = z3`
    /// eigenstate and drops out of the cluster.
    Failure { z3: i8 },
    /// Fewer than two clicks (or more, from leakage): the outcome is unknown;
    /// measuring both targets in Z recovers the rest of the clusters.
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct CzBranch {
    pub status: CzStatus,
    pub branch: HeraldedBranch,
}

#[derive(Clone, Debug)]
pub struct CzOutcome {
    /// Every outcome (analytic) or the drawn outcome (sampled). The
    /// probabilities below always cover the full distribution.
    pub branches: Vec<CzBranch>,
    pub p_success: f64,
    pub p_failure: f64,
    pub p_indeterminate: f64,
    /// Link qubits read out and destroyed.
    pub consumed: Vec<String>,
    /// Qubits to measure in Z when the outcome is indeterminate.
    pub recovery: Vec<String>,
    /// Total weight of the input state.
    pub incoming: f64,
}

impl CzOutcome {
    /// Status of the first (in sampled mode, the only) branch.
    pub fn status(&self) -> CzStatus {
        self.branches[0].status
    }

    /// Branches with the given status as a protocol outcome.
    pub fn select<F: Fn(CzStatus) -> bool>(&self, keep: F) -> ProtocolOutcome {
        let branches: Vec<HeraldedBranch> = self
            .branches
            .iter()
            .filter(|b| keep(b.status))
            .map(|b| b.branch.clone())
            .collect();
        let p: f64 = branches.iter().map(|b| b.probability).sum();
        ProtocolOutcome {
            success: !branches.is_empty(),
            probability: if self.incoming > 0.0 { p / self.incoming } else { 0.0 },
            branches,
            consumed: self.consumed.clone(),
        }
    }

    pub fn success(&self) -> ProtocolOutcome {
        self.select(|s| s == CzStatus::Success)
    }
}

/// Hadamard on the first link photon, then 50/50 beamsplitters mixing the h
/// modes and the v modes of the two link photons. Detectors are
/// `(h_a, v_a, h_b, v_b)`.
pub fn cz_network(registry: &Arc<ModeRegistry>, links: [&str; 2], loss: LossModel) -> Result<Network> {
    let [h1, v1] = qubit(registry, links[0])?.optical();
    let [h2, v2] = qubit(registry, links[1])?.optical();
    let modes = [h1, v1, h2, v2];
    let mut net = Network::new(Arc::clone(registry), &modes, &modes)?;
    net.hadamard(h1, v1)?;
    net.beamsplitter(h1, h2, 0.5)?;
    net.beamsplitter(v1, v2, 0.5)?;
    insert_loss(&net, loss)
}

fn classify(pattern: &ClickPattern, targets: [&str; 2]) -> (CzStatus, Vec<Correction>) {
    let [ha, va, hb, vb] = [0, 1, 2, 3].map(|i| pattern.counts[i]);
    let total = ha + va + hb + vb;
    if total != 2 {
        return (CzStatus::Indeterminate, Vec::new());
    }
    let z3 = Correction::z(targets[0]);
    let z4 = Correction::z(targets[1]);
    if ha + hb == 2 {
        (CzStatus::Failure { z3: 1 }, Vec::new())
    } else if va + vb == 2 {
        (CzStatus::Failure { z3: -1 }, vec![z4])
    } else if (ha == 1 && va == 1) || (hb == 1 && vb == 1) {
        (CzStatus::Success, vec![z4])
    } else {
        (CzStatus::Success, vec![z3, z4])
    }
}

/// Destructive CZ between `targets` through the singly attached `links`.
///
/// Reads out both link qubits, runs [`cz_network`] and classifies every
/// click pattern. The same-polarization failure with h photons leaves
/// `targets[0]` in `H` (`Z = +1`); with v photons in `V` (`Z = −1`) with a
/// pending Z on `targets[1]`.
pub fn cz_fuse(
    state: &MixedState,
    links: [&str; 2],
    targets: [&str; 2],
    loss: LossModel,
    exec: Execution<'_>,
) -> Result<CzOutcome> {
    for t in targets {
        qubit(state.registry(), t)?;
    }
    let swapped = state.map_branches(|b| readout_swap(&readout_swap(b, links[0])?, links[1]))?;
    let net = cz_network(state.registry(), links, loss)?;
    let detections = measure_mixed(&net.run_mixed(&swapped)?, net.detectors())?;
    let everything = HeraldRule::new("all", |_| Some(Vec::new()));
    let all = herald(detections, &everything, Execution::Analytic);
    let mut out = CzOutcome {
        branches: Vec::new(),
        p_success: 0.0,
        p_failure: 0.0,
        p_indeterminate: 0.0,
        consumed: links.iter().map(|s| s.to_string()).collect(),
        recovery: targets.iter().map(|s| s.to_string()).collect(),
        incoming: 0.0,
    };
    for mut b in all.branches {
        let (status, corrections) = classify(&b.pattern, targets);
        match status {
            CzStatus::Success => out.p_success += b.probability,
            CzStatus::Failure { .. } => out.p_failure += b.probability,
            CzStatus::Indeterminate => out.p_indeterminate += b.probability,
        }
        b.accepted = status == CzStatus::Success;
        b.corrections = corrections;
        out.branches.push(CzBranch { status, branch: b });
    }
    let total = out.p_success + out.p_failure + out.p_indeterminate;
    out.incoming = total;
    if total > 0.0 {
        out.p_success /= total;
        out.p_failure /= total;
        out.p_indeterminate /= total;
    }
    if let Execution::Sampled(rng) = exec {
        let weights: Vec<f64> = out.branches.iter().map(|b| b.branch.probability).collect();
        let k = draw(&weights, total, rng);
        out.branches = vec![out.branches.swap_remove(k)];
    }
    Ok(out)
}
