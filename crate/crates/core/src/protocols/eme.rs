use std::sync::Arc;

use rand::RngCore;

use crate::correction::{Correction, LocalOp};
use crate::detection::{herald, measure_mixed, ClickPattern, Execution, HeraldRule, HeraldedBranch, ProtocolOutcome};
use crate::error::{check_unit_interval, Error, Result};
use crate::optics::{insert_loss, LossModel, Network};
use crate::registry::ModeRegistry;
use crate::state::{Cutoff, MixedState, PureState, C64};

use super::pulses::{excite, ExcitationParams, Polarization};
use super::qubit;

/// Attempts spent in each round of a sampled preparation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmeAttempts {
    pub h: u32,
    pub v: u32,
}

/// Stokes photons of one round interfered on a 50/50 beamsplitter; detectors
/// are its two outputs.
pub fn eme_round_network(
    registry: &Arc<ModeRegistry>,
    i: &str,
    j: &str,
    pol: Polarization,
    loss: LossModel,
) -> Result<Network> {
    let (_, a) = pol.modes(qubit(registry, i)?);
    let (_, b) = pol.modes(qubit(registry, j)?);
    let mut net = Network::new(Arc::clone(registry), &[a, b], &[a, b])?;
    net.beamsplitter(a, b, 0.5)?;
    insert_loss(&net, loss)
}

fn round_sign(pattern: &ClickPattern) -> Option<i8> {
    match pattern.counts.as_slice() {
        [1, 0] => Some(1),
        [0, 1] => Some(-1),
        _ => None,
    }
}

/// One heralded round. Returns the accepted branches with the sign of the
/// `(S_i† ± S_j†)` combination they carry.
fn round(
    state: &MixedState,
    i: &str,
    j: &str,
    pol: Polarization,
    params: ExcitationParams,
    loss: LossModel,
    exec: Execution<'_>,
) -> Result<Vec<(i8, HeraldedBranch)>> {
    let excited = state.map_branches(|b| excite(&excite(b, i, pol, params)?, j, pol, params))?;
    let net = eme_round_network(state.registry(), i, j, pol, loss)?;
    let detections = measure_mixed(&net.run_mixed(&excited)?, net.detectors())?;
    let rule = HeraldRule::new("single-click", |p: &ClickPattern| round_sign(p).map(|_| Vec::new()));
    let sampled = !exec.is_analytic();
    let outcome = herald(detections, &rule, exec);
    if sampled && !outcome.success {
        return Err(Error::RoundFailed {
            round: pol.label(),
            clicks: outcome.branches[0].pattern.total(),
        });
    }
    Ok(outcome
        .branches
        .into_iter()
        .map(|b| (round_sign(&b.pattern).expect("accepted patterns carry a sign"), b))
        .collect())
}

/// Mode unitary on qubit `j` taking `(H_i† + a H_j†)(V_i† + b V_j†)` to
/// `(H_i† + V_j†)(V_i† + H_j†)`: `H_j† → a V_j†`, `V_j† → b H_j†`.
pub fn eme_correction(j: &str, a: i8, b: i8) -> Correction {
    let z = C64::new(0.0, 0.0);
    let (a, b) = (C64::new(a as f64, 0.0), C64::new(b as f64, 0.0));
    Correction::new(j, LocalOp::Unitary([[z, b], [a, z]]))
}

fn combine(h: (i8, HeraldedBranch), v: (i8, HeraldedBranch), j: &str) -> HeraldedBranch {
    let (a, hb) = h;
    let (b, vb) = v;
    let mut modes = hb.pattern.modes.clone();
    modes.extend(&vb.pattern.modes);
    let mut counts = hb.pattern.counts.clone();
    counts.extend(&vb.pattern.counts);
    HeraldedBranch {
        pattern: ClickPattern { modes, counts },
        probability: vb.probability,
        state: vb.state,
        accepted: true,
        corrections: vec![eme_correction(j, a, b)],
    }
}

/// Heralded preparation of an entangled pair on qubits `i`, `j`: an h round
/// then a v round, each exciting both ensembles, interfering the Stokes
/// photons on a 50/50 beamsplitter and accepting exactly one click.
///
/// In sampled mode a failed round returns [`Error::RoundFailed`].
pub fn prepare_eme(
    state: &MixedState,
    i: &str,
    j: &str,
    params: ExcitationParams,
    loss: LossModel,
    mut exec: Execution<'_>,
) -> Result<ProtocolOutcome> {
    let incoming = state.total_weight();
    let mut branches = Vec::new();
    for h in round(state, i, j, Polarization::H, params, loss, exec.reborrow())? {
        for v in round(&h.1.state, i, j, Polarization::V, params, loss, exec.reborrow())? {
            branches.push(combine(h.clone(), v, j));
        }
    }
    let accepted: f64 = branches.iter().map(|b| b.probability).sum();
    Ok(ProtocolOutcome {
        success: !branches.is_empty(),
        probability: accepted / incoming,
        branches,
        consumed: Vec::new(),
    })
}

/// Sampled preparation that repeats each round until it succeeds, restarting
/// from the state before the failed round.
pub fn prepare_eme_with_retry(
    state: &MixedState,
    i: &str,
    j: &str,
    params: ExcitationParams,
    loss: LossModel,
    rng: &mut dyn RngCore,
    max_attempts: u32,
) -> Result<(ProtocolOutcome, EmeAttempts)> {
    let mut attempts = EmeAttempts::default();
    let mut retry = |st: &MixedState, pol: Polarization, count: &mut u32| -> Result<(i8, HeraldedBranch)> {
        loop {
            *count += 1;
            match round(st, i, j, pol, params, loss, Execution::Sampled(&mut *rng)) {
                Ok(mut b) => return Ok(b.remove(0)),
                Err(e @ Error::RoundFailed { .. }) if *count >= max_attempts => return Err(e),
                Err(Error::RoundFailed { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    };
    let h = retry(state, Polarization::H, &mut attempts.h)?;
    let v = retry(&h.1.state, Polarization::V, &mut attempts.v)?;
    let probability = v.1.probability / state.total_weight();
    let branch = combine(h, v, j);
    Ok((
        ProtocolOutcome {
            success: true,
            probability,
            branches: vec![branch],
            consumed: Vec::new(),
        },
        attempts,
    ))
}

/// `(H_i† + a H_j†)(V_i† + b V_j†)|G⟩ / 2`.
pub fn raw_eme(registry: Arc<ModeRegistry>, cutoff: Cutoff, i: &str, j: &str, a: i8, b: i8) -> Result<PureState> {
    let qi = qubit(&registry, i)?.clone();
    let qj = qubit(&registry, j)?.clone();
    let n = registry.len();
    let mut terms = Vec::new();
    for (h, sh) in [(qi.atomic_h, 1.0), (qj.atomic_h, a as f64)] {
        for (v, sv) in [(qi.atomic_v, 1.0), (qj.atomic_v, b as f64)] {
            let mut occ = vec![0u8; n];
            occ[h.0] += 1;
            occ[v.0] += 1;
            terms.push((occ, C64::new(0.5 * sh * sv, 0.0)));
        }
    }
    PureState::from_terms(registry, cutoff, terms)
}

/// `(H_i† + V_j†)(V_i† + H_j†)|G⟩ / 2`: four terms of amplitude 1/2.
pub fn ideal_eme(registry: Arc<ModeRegistry>, cutoff: Cutoff, i: &str, j: &str) -> Result<PureState> {
    let qi = qubit(&registry, i)?.clone();
    let qj = qubit(&registry, j)?.clone();
    let n = registry.len();
    let mut terms = Vec::new();
    for x in [qi.atomic_h, qj.atomic_v] {
        for y in [qi.atomic_v, qj.atomic_h] {
            let mut occ = vec![0u8; n];
            occ[x.0] += 1;
            occ[y.0] += 1;
            terms.push((occ, C64::new(0.5, 0.0)));
        }
    }
    PureState::from_terms(registry, cutoff, terms)
}

/// Weight fraction of terms carrying more atomic excitations on the listed
/// qubits than one per qubit.
pub fn leakage_fraction(state: &MixedState, qubits: &[&str]) -> Result<f64> {
    let modes = qubits
        .iter()
        .map(|l| qubit(state.registry(), l).map(|q| q.atomic()))
        .collect::<Result<Vec<_>>>()?;
    let ideal = qubits.len() as u32;
    Ok(state.fraction_where(|k| {
        modes.iter().flatten().map(|m| k.get(*m) as u32).sum::<u32>() > ideal
    }))
}

/// Closed-form single-round herald probability with per-ensemble excitation
/// distribution `P(n) ∝ pⁿ` (`n ≤ n_max`) and overall efficiency `η`:
/// `Σ P(n)P(m) (n+m) η (1−η)^{n+m−1}`.
pub fn eme_round_probability(p: f64, eta: f64, n_max: u8) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    ExcitationParams::new(p, n_max)?;
    let z: f64 = (0..=n_max as i32).map(|n| p.powi(n)).sum();
    let mut total = 0.0;
    for n in 0..=n_max as i32 {
        for m in 0..=n_max as i32 {
            let k = n + m;
            if k == 0 {
                continue;
            }
            let detect_one = k as f64 * eta * (1.0 - eta).powi(k - 1);
            total += p.powi(n) * p.powi(m) / (z * z) * detect_one;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correction::apply_corrections;

    fn setup() -> MixedState {
        let reg = ModeRegistry::with_qubits(&["i", "j"]).unwrap();
        MixedState::from_pure(PureState::vacuum(reg, Cutoff::new(2)).unwrap())
    }

    #[test]
    fn ideal_eme_terms() {
        let s = setup();
        let e = ideal_eme(s.registry().clone(), Cutoff::new(2), "i", "j").unwrap();
        assert_eq!(e.len(), 4);
        assert!((e.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn correction_maps_raw_to_ideal() {
        let s = setup();
        let reg = s.registry().clone();
        let ideal = ideal_eme(reg.clone(), Cutoff::new(2), "i", "j").unwrap();
        for a in [1, -1] {
            for b in [1, -1] {
                let raw = raw_eme(reg.clone(), Cutoff::new(2), "i", "j", a, b).unwrap();
                let fixed = apply_corrections(&raw, &[eme_correction("j", a, b)]).unwrap();
                assert!((fixed.fidelity(&ideal).unwrap() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lossless_preparation_is_exact() {
        let s = setup();
        let params = ExcitationParams::new(0.05, 2).unwrap();
        let out = prepare_eme(&s, "i", "j", params, LossModel::ideal(), Execution::Analytic).unwrap();
        assert_eq!(out.branches.len(), 4);
        let ideal = ideal_eme(s.registry().clone(), Cutoff::new(2), "i", "j").unwrap();
        let f = out.corrected_state().unwrap().fidelity(&ideal).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let round = eme_round_probability(0.05, 1.0, 2).unwrap();
        assert!((out.probability - round * round).abs() < 1e-12);
    }

    #[test]
    fn sampled_round_failure_is_reported() {
        use rand::SeedableRng;
        let s = setup();
        let params = ExcitationParams::new(0.01, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let failures = (0..50)
            .filter(|_| {
                let r = prepare_eme(&s, "i", "j", params, LossModel::ideal(), Execution::Sampled(&mut rng));
                matches!(r, Err(Error::RoundFailed { .. }))
            })
            .count();
        assert!(failures > 0);
        let (out, attempts) =
            prepare_eme_with_retry(&s, "i", "j", params, LossModel::ideal(), &mut rng, 100_000).unwrap();
        assert!(out.success && attempts.h >= 1 && attempts.v >= 1);
    }
}
