use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::detection::{draw, herald, measure_mixed, Execution, HeraldRule, HeraldedBranch};
use crate::error::Result;
use crate::optics::{insert_loss, LossModel, Network};
use crate::state::{check_unitary, MixedState, PureState, C64};

use super::pulses::readout_swap;
use super::qubit;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureResult {
    Plus,
    Minus,
    /// No click: the photon was lost and the loss is heralded.
    Lost,
    /// More than one photon: the qubit had left the computational subspace.
    Leakage,
}

#[derive(Clone, Debug)]
pub struct MeasureOutcome {
    pub branches: Vec<(MeasureResult, HeraldedBranch)>,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_lost: f64,
    pub p_leakage: f64,
}

impl MeasureOutcome {
    pub fn result(&self) -> MeasureResult {
        self.branches[0].0
    }

    /// Merged post-measurement state of the branches with the given result.
    pub fn state_for(&self, result: MeasureResult) -> Result<Option<MixedState>> {
        let mut out: Option<MixedState> = None;
        for (r, b) in &self.branches {
            if *r == result {
                match &mut out {
                    Some(m) => m.extend(b.state.clone())?,
                    None => out = Some(b.state.clone()),
                }
            }
        }
        Ok(out)
    }
}

/// Photonic rotation sending the `+1` eigenvector of `sinθ X + cosθ Y` to
/// `h` and the `−1` eigenvector to `v`.
pub fn measurement_basis(theta: f64) -> DMatrix<C64> {
    let phi = FRAC_PI_2 - theta;
    let e = C64::from_polar(FRAC_1_SQRT_2, -phi);
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    DMatrix::from_row_slice(2, 2, &[s, e, s, -e])
}

/// Measures `sinθ X + cosθ Y` on a qubit: readout, basis rotation on the
/// photon, loss, and h/v detection. The readout and detection losses of the
/// measured qubit are applied here.
pub fn measure_qubit(
    state: &MixedState,
    label: &str,
    theta: f64,
    loss: LossModel,
    exec: Execution<'_>,
) -> Result<MeasureOutcome> {
    let registry = Arc::clone(state.registry());
    let [h, v] = qubit(&registry, label)?.optical();
    let swapped = state.map_branches(|b| readout_swap(b, label))?;
    let mut net = Network::new(registry, &[h, v], &[h, v])?;
    net.unitary(&[h, v], measurement_basis(theta))?;
    let net = insert_loss(&net, loss)?;
    let detections = measure_mixed(&net.run_mixed(&swapped)?, net.detectors())?;
    let all = herald(detections, &HeraldRule::new("all", |_| Some(Vec::new())), Execution::Analytic);
    let mut out = MeasureOutcome {
        branches: Vec::new(),
        p_plus: 0.0,
        p_minus: 0.0,
        p_lost: 0.0,
        p_leakage: 0.0,
    };
    let mut total = 0.0;
    for b in all.branches {
        let result = match b.pattern.counts.as_slice() {
            [1, 0] => MeasureResult::Plus,
            [0, 1] => MeasureResult::Minus,
            [0, 0] => MeasureResult::Lost,
            _ => MeasureResult::Leakage,
        };
        let slot = match result {
            MeasureResult::Plus => &mut out.p_plus,
            MeasureResult::Minus => &mut out.p_minus,
            MeasureResult::Lost => &mut out.p_lost,
            MeasureResult::Leakage => &mut out.p_leakage,
        };
        *slot += b.probability;
        total += b.probability;
        out.branches.push((result, b));
    }
    for p in [&mut out.p_plus, &mut out.p_minus, &mut out.p_lost, &mut out.p_leakage] {
        *p /= total;
    }
    if let Execution::Sampled(rng) = exec {
        let weights: Vec<f64> = out.branches.iter().map(|b| b.1.probability).collect();
        let k = draw(&weights, total, rng);
        out.branches = vec![out.branches.swap_remove(k)];
    }
    Ok(out)
}

/// Largest amplitude difference between `R ∘ U(atomic)` and `U(optical) ∘ R`
/// on `state`, where `R` is the lossless readout of `label`.
pub fn deferral_deviation(state: &PureState, label: &str, u: &DMatrix<C64>) -> Result<f64> {
    check_unitary(u, 2)?;
    let q = qubit(state.registry(), label)?;
    let atomic_first = readout_swap(&state.apply_mode_unitary(&q.atomic(), u)?, label)?;
    let optical_after = readout_swap(state, label)?.apply_mode_unitary(&q.optical(), u)?;
    let mut dev: f64 = 0.0;
    for (k, a) in atomic_first.terms() {
        dev = dev.max((a - optical_after.amplitude(k.as_slice())).norm());
    }
    for (k, b) in optical_after.terms() {
        dev = dev.max((b - atomic_first.amplitude(k.as_slice())).norm());
    }
    Ok(dev)
}

/// Whether a local unitary on the atomic modes can be replaced by the same
/// unitary on the photon after readout, to 1e-10.
pub fn defer_unitary_check(state: &PureState, label: &str, u: &DMatrix<C64>) -> Result<bool> {
    Ok(deferral_deviation(state, label, u)? <= 1e-10)
}
