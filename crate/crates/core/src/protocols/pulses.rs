use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{insert_loss, LossModel, Network};
use crate::registry::{LogicalQubit, ModeId};
use crate::state::{MixedState, PureState, C64};

use super::qubit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    /// `(atomic, optical)` modes of this polarization.
    pub fn modes(self, q: &LogicalQubit) -> (ModeId, ModeId) {
        match self {
            Polarization::H => (q.atomic_h, q.optical_h),
            Polarization::V => (q.atomic_v, q.optical_v),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::H => "h",
            Polarization::V => "v",
        }
    }
}

/// Excitation pulse strength and the order at which the pair-creation
/// series is cut off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationParams {
    pub p: f64,
    pub n_max: u8,
}

impl ExcitationParams {
    pub fn new(p: f64, n_max: u8) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "p",
                value: p,
                range: "[0, 1)",
            });
        }
        Ok(ExcitationParams { p, n_max })
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Excitation pulse on one polarization of a qubit: multiplies the state by
/// `Σ_{n ≤ n_max} (p^{n/2}/n!) (S† s†)ⁿ` and renormalizes, where `S` is the
/// collective atomic mode and `s` its Stokes photon mode.
pub fn excite(state: &PureState, label: &str, pol: Polarization, params: ExcitationParams) -> Result<PureState> {
    let q = qubit(state.registry(), label)?;
    let (atom, photon) = pol.modes(q);
    state.require_empty(&[photon])?;
    if params.p == 0.0 {
        return Ok(state.clone());
    }
    let out = state.map_terms(|k, a, emit| {
        let base = k.get(atom) as u32;
        for n in 0..=params.n_max as u32 {
            let coeff = params.p.powf(n as f64 / 2.0) / factorial(n)
                * (factorial(base + n) / factorial(base)).sqrt()
                * factorial(n).sqrt();
            let mut key = k.as_slice().to_vec();
            key[atom.0] = (base + n) as u8;
            key[photon.0] = n as u8;
            emit(key, a * C64::new(coeff, 0.0));
        }
    });
    Ok(out.normalized())
}

/// Lossless readout pulse: swaps `H ↔ h` and `V ↔ v`. The optical modes
/// must be empty.
pub fn readout_swap(state: &PureState, label: &str) -> Result<PureState> {
    let q = qubit(state.registry(), label)?;
    state.require_empty(&q.optical())?;
    let swap = crate::optics::swap_matrix();
    state
        .apply_mode_unitary(&[q.atomic_h, q.optical_h], &swap)?
        .apply_mode_unitary(&[q.atomic_v, q.optical_v], &swap)
}

/// Readout followed by coupling loss `η_E` on both optical modes (detector
/// efficiency is not applied here).
pub fn readout(state: &PureState, label: &str, loss: LossModel) -> Result<MixedState> {
    let swapped = readout_swap(state, label)?;
    let q = qubit(state.registry(), label)?;
    let net = Network::new(state.registry().clone(), &q.optical(), &q.optical())?;
    let net = insert_loss(&net, LossModel::source_only(loss.eta_e)?)?;
    net.run(&swapped)
}
