//! Reference constructions for the loss and excitation error analysis, the
//! threshold formulas, and equivalence checks against protocol outputs.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::correction::{apply_corrections_mixed, Correction, LocalOp};
use crate::density::mixed_fidelity;
use crate::error::{check_unit_interval, Error, Result};
use crate::optics::LossModel;
use crate::protocols::{encode_cluster, ideal_eme, ClusterGraph};
use crate::registry::{ModeId, ModeRegistry};
use crate::state::{Cutoff, MixedState, PureState, C64};

/// Fidelity threshold for "equal up to corrections".
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;

/// Default bound on the number of correction-group elements searched.
pub const DEFAULT_GROUP_BOUND: usize = 4096;

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Applies `ρ → Σ_i K_i ρ K_i†` to every branch, where `kraus(ψ)` returns
/// the unnormalized `K_i ψ`. Outputs are renormalized to the input weight.
fn apply_kraus<F>(state: &MixedState, kraus: F) -> Result<MixedState>
where
    F: Fn(&PureState) -> Result<Vec<PureState>>,
{
    let total_in = state.total_weight();
    let mut out = MixedState::empty(state.registry().clone(), state.cutoff());
    for b in state.branches() {
        let n = b.norm_sqr();
        if n == 0.0 {
            continue;
        }
        for k in kraus(b)? {
            let p = b.weight() * k.norm_sqr() / n;
            if p > 0.0 {
                out.push(k.normalized().with_weight(p))?;
            }
        }
    }
    let total_out = out.total_weight();
    Ok(if total_out > 0.0 {
        out.scale_weights(total_in / total_out)
    } else {
        out
    })
}

/// Excitation error map on one atomic mode:
/// `ρ → Σ_i (pⁱ(1−η)ⁱ/i!) (S†)ⁱ ρ Sⁱ`, truncated at the cutoff, normalized.
pub fn apply_excitation_superop(state: &MixedState, mode: ModeId, p: f64, eta: f64) -> Result<MixedState> {
    check_unit_interval("p", p)?;
    check_unit_interval("eta", eta)?;
    let order = state.cutoff().atomic.max(state.cutoff().photonic) as u32;
    apply_kraus(state, |b| {
        let mut out = vec![b.clone()];
        let c = p * (1.0 - eta);
        if c == 0.0 {
            return Ok(out);
        }
        let mut cur = b.clone();
        for i in 1..=order {
            cur = cur.create(mode)?;
            if cur.is_empty() {
                break;
            }
            let coeff = (c.powi(i as i32) / factorial(i)).sqrt();
            out.push(cur.scaled(C64::new(coeff, 0.0)));
        }
        Ok(out)
    })
}

/// Form of the single-mode loss map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum LossForm {
    /// Bosonic amplitude damping: each quantum survives with probability
    /// `1−r`. On a single excitation this is `(1−r)ρ + r SρS†`, plus the
    /// coherence-preserving no-jump evolution on higher occupations.
    #[default]
    AmplitudeDamping,
    /// `(1−r)ρ + r(SρS† + P₀ρP₀)` with `P₀` the vacuum projector of the
    /// mode (the `SS†` of a two-level collective excitation).
    Literal,
}

/// Loss map on one mode at rate `r`, normalized to the input weight.
pub fn apply_loss_superop(state: &MixedState, mode: ModeId, r: f64, form: LossForm) -> Result<MixedState> {
    let r = check_unit_interval("r", r)?;
    if r == 0.0 {
        return Ok(state.clone());
    }
    match form {
        LossForm::Literal => apply_kraus(state, |b| {
            let keep = b.scaled(C64::new((1.0 - r).sqrt(), 0.0));
            let jump = b.annihilate(mode)?.scaled(C64::new(r.sqrt(), 0.0));
            let (vac, prob) = b.project_where(|k| k.get(mode) == 0);
            let vac = vac.with_weight(b.weight()).scaled(C64::new((r * prob * b.norm_sqr()).sqrt(), 0.0));
            Ok(vec![keep, jump, vac])
        }),
        LossForm::AmplitudeDamping => apply_kraus(state, |b| {
            let max = b.terms().map(|(k, _)| k.get(mode)).max().unwrap_or(0) as u32;
            let mut out = Vec::new();
            for lost in 0..=max {
                let piece = b.map_terms(|k, a, emit| {
                    let n = k.get(mode) as u32;
                    if n >= lost {
                        let amp = (binomial(n, lost) * (1.0 - r).powi((n - lost) as i32) * r.powi(lost as i32)).sqrt();
                        let mut key = k.as_slice().to_vec();
                        key[mode.0] = (n - lost) as u8;
                        emit(key, a * C64::new(amp, 0.0));
                    }
                });
                if !piece.is_empty() {
                    out.push(piece);
                }
            }
            Ok(out)
        }),
    }
}

/// `r = 1 − 1/(2−η)`.
pub fn loss_rate(eta: f64) -> Result<f64> {
    let eta = check_unit_interval("eta", eta)?;
    Ok(1.0 - 1.0 / (2.0 - eta))
}

/// `g = η/(2−η)`.
pub fn gate_factor(eta: f64) -> Result<f64> {
    let eta = check_unit_interval("eta", eta)?;
    Ok(eta / (2.0 - eta))
}

/// `g − 1/2`; positive exactly when `η > 2/3`.
pub fn threshold_margin(eta: f64) -> Result<f64> {
    Ok(gate_factor(eta)? - 0.5)
}

/// Local loss rate `f = 1 − η_S/(2−η_S)` of an ID-GHZ source with source
/// efficiency `η_S`.
pub fn source_loss_rate(eta_s: f64) -> Result<f64> {
    Ok(1.0 - gate_factor(eta_s)?)
}

impl LossModel {
    pub fn loss_rate(&self) -> f64 {
        loss_rate(self.eta()).expect("efficiencies are validated")
    }

    pub fn gate_factor(&self) -> f64 {
        gate_factor(self.eta()).expect("efficiencies are validated")
    }
}

/// Root of [`threshold_margin`] on `[0, 1]` by bisection to `tol`.
pub fn threshold_by_bisection(tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if threshold_margin(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossScanRow {
    pub eta: f64,
    pub r: f64,
    pub g: f64,
    pub margin: f64,
}

/// `(η, r, g, margin)` on each grid point, evaluated in parallel.
pub fn loss_scan(grid: &[f64]) -> Result<Vec<LossScanRow>> {
    grid.par_iter()
        .map(|&eta| {
            Ok(LossScanRow {
                eta,
                r: loss_rate(eta)?,
                g: gate_factor(eta)?,
                margin: threshold_margin(eta)?,
            })
        })
        .collect()
}

/// CSV with columns `eta,r,g,margin`.
pub fn write_loss_scan_csv<W: Write>(out: W, rows: &[LossScanRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eta", "r", "g", "margin"])?;
    for row in rows {
        w.write_record([row.eta, row.r, row.g, row.margin].map(|x| format!("{x:.6}")))?;
    }
    w.flush()?;
    Ok(())
}

fn atomic_modes(registry: &ModeRegistry, labels: &[&str]) -> Result<Vec<ModeId>> {
    let mut out = Vec::new();
    for l in labels {
        let q = registry.qubit(registry.qubit_by_label(l)?);
        out.extend(q.atomic());
    }
    Ok(out)
}

/// Loss map at rate `r` on both atomic modes of every listed qubit.
pub fn apply_qubit_loss(state: &MixedState, labels: &[&str], r: f64, form: LossForm) -> Result<MixedState> {
    let mut s = state.clone();
    for m in atomic_modes(state.registry(), labels)? {
        s = apply_loss_superop(&s, m, r, form)?;
    }
    Ok(s)
}

/// Independently degraded linear cluster on three qubits (middle one is
/// `labels[1]`): the ideal cluster with the loss map at rate `r` on all six
/// atomic modes.
pub fn id_ghz_reference(
    registry: Arc<ModeRegistry>,
    cutoff: Cutoff,
    labels: [&str; 3],
    r: f64,
    form: LossForm,
) -> Result<MixedState> {
    let cluster = encode_cluster(registry, cutoff, &ClusterGraph::line(&labels)?)?;
    apply_qubit_loss(&MixedState::from_pure(cluster), &labels, r, form)
}

/// Cluster state of `graph` with the loss map at rate `r` applied to the
/// qubits in `degraded`.
pub fn id_cluster(
    registry: Arc<ModeRegistry>,
    cutoff: Cutoff,
    graph: &ClusterGraph,
    degraded: &[&str],
    r: f64,
) -> Result<MixedState> {
    let cluster = encode_cluster(registry, cutoff, graph)?;
    apply_qubit_loss(&MixedState::from_pure(cluster), degraded, r, LossForm::AmplitudeDamping)
}

/// Ideal pair with the excitation error map applied to `H_i`, `H_j`, `V_i`, `V_j`.
pub fn eme_error_reference(
    registry: Arc<ModeRegistry>,
    cutoff: Cutoff,
    i: &str,
    j: &str,
    p: f64,
    eta: f64,
) -> Result<MixedState> {
    let ideal = ideal_eme(registry.clone(), cutoff, i, j)?;
    let qi = registry.qubit(registry.qubit_by_label(i)?).clone();
    let qj = registry.qubit(registry.qubit_by_label(j)?).clone();
    let mut s = MixedState::from_pure(ideal);
    for m in [qi.atomic_v, qj.atomic_v, qi.atomic_h, qj.atomic_h] {
        s = apply_excitation_superop(&s, m, p, eta)?;
    }
    Ok(s)
}

/// Finite set of candidate correction sequences, searched in order.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionGroup {
    elements: Vec<Vec<Correction>>,
}

impl CorrectionGroup {
    /// Only the identity.
    pub fn trivial() -> Self {
        CorrectionGroup { elements: vec![Vec::new()] }
    }

    pub fn from_elements(elements: Vec<Vec<Correction>>) -> Self {
        CorrectionGroup { elements }
    }

    /// All products of `{I, Z, X, XZ}` over the listed qubits, after the
    /// `base` corrections. Errors above `bound` elements.
    pub fn paulis(qubits: &[&str], base: &[Correction], bound: usize) -> Result<Self> {
        Self::generated(qubits, &[vec![], vec![LocalOp::Z], vec![LocalOp::X], vec![LocalOp::Z, LocalOp::X]], base, bound)
    }

    /// Products of `{I, Z}` over the listed qubits, after `base`.
    pub fn z_only(qubits: &[&str], base: &[Correction], bound: usize) -> Result<Self> {
        Self::generated(qubits, &[vec![], vec![LocalOp::Z]], base, bound)
    }

    fn generated(qubits: &[&str], local: &[Vec<LocalOp>], base: &[Correction], bound: usize) -> Result<Self> {
        let size = local
            .len()
            .checked_pow(qubits.len() as u32)
            .filter(|&s| s <= bound)
            .ok_or(Error::GroupTooLarge {
                size: local.len().saturating_pow(qubits.len() as u32),
                bound,
            })?;
        let mut elements = Vec::with_capacity(size);
        for idx in 0..size {
            let mut seq = base.to_vec();
            let mut rest = idx;
            for q in qubits {
                let choice = &local[rest % local.len()];
                rest /= local.len();
                seq.extend(choice.iter().map(|op| Correction::new(q, op.clone())));
            }
            elements.push(seq);
        }
        Ok(CorrectionGroup { elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Vec<Correction>] {
        &self.elements
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// First group element reaching the tolerance.
    pub corrections: Option<Vec<Correction>>,
    /// Best fidelity found.
    pub fidelity: f64,
}

/// Searches `group` in order for corrections that bring `state` to within
/// fidelity `1 − 1e-8` of `reference`.
pub fn equivalent_up_to_corrections(
    state: &MixedState,
    reference: &MixedState,
    group: &CorrectionGroup,
) -> Result<Equivalence> {
    if group.len() > DEFAULT_GROUP_BOUND {
        return Err(Error::GroupTooLarge {
            size: group.len(),
            bound: DEFAULT_GROUP_BOUND,
        });
    }
    let mut best: f64 = 0.0;
    for element in group.elements() {
        let corrected = apply_corrections_mixed(state, element)?;
        let f = mixed_fidelity(&corrected, reference)?;
        best = best.max(f);
        if f >= 1.0 - EQUIVALENCE_TOLERANCE {
            return Ok(Equivalence {
                equivalent: true,
                corrections: Some(element.clone()),
                fidelity: f,
            });
        }
    }
    Ok(Equivalence {
        equivalent: false,
        corrections: None,
        fidelity: best,
    })
}
