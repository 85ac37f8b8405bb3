//! Local single-qubit operations recorded by heralding rules and applied as
//! 2×2 mode unitaries on a qubit's atomic `(H, V)` modes.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::registry::ModeRegistry;
use crate::state::{MixedState, PureState, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum LocalOp {
    X,
    Y,
    Z,
    Hadamard,
    /// Arbitrary 2×2 unitary in the `(H, V)` basis; column k is the image of
    /// basis state k.
    Unitary([[C64; 2]; 2]),
}

impl LocalOp {
    pub fn matrix(&self) -> DMatrix<C64> {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            LocalOp::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            LocalOp::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            LocalOp::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
            LocalOp::Hadamard => DMatrix::from_row_slice(2, 2, &[s, s, s, -s]),
            LocalOp::Unitary(m) => DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
        }
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        LocalOp::Unitary([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
    }
}

impl fmt::Display for LocalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalOp::X => write!(f, "X"),
            LocalOp::Y => write!(f, "Y"),
            LocalOp::Z => write!(f, "Z"),
            LocalOp::Hadamard => write!(f, "H"),
            LocalOp::Unitary(m) => {
                let e = |c: C64| format!("{:.6}{:+.6}i", c.re, c.im);
                write!(
                    f,
                    "U[[{}, {}], [{}, {}]]",
                    e(m[0][0]),
                    e(m[0][1]),
                    e(m[1][0]),
                    e(m[1][1])
                )
            }
        }
    }
}

impl Serialize for LocalOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// A local operation on the qubit with the given label.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Correction {
    pub qubit: String,
    pub op: LocalOp,
}

impl Correction {
    pub fn new(qubit: &str, op: LocalOp) -> Self {
        Correction {
            qubit: qubit.to_string(),
            op,
        }
    }

    pub fn x(qubit: &str) -> Self {
        Self::new(qubit, LocalOp::X)
    }

    pub fn z(qubit: &str) -> Self {
        Self::new(qubit, LocalOp::Z)
    }

    pub fn hadamard(qubit: &str) -> Self {
        Self::new(qubit, LocalOp::Hadamard)
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.op, self.qubit)
    }
}

fn atomic_modes(registry: &ModeRegistry, label: &str) -> Result<[crate::registry::ModeId; 2]> {
    Ok(registry.qubit(registry.qubit_by_label(label)?).atomic())
}

/// Applies the corrections in order.
pub fn apply_corrections(state: &PureState, corrections: &[Correction]) -> Result<PureState> {
    let mut s = state.clone();
    for c in corrections {
        let modes = atomic_modes(state.registry(), &c.qubit)?;
        s = s.apply_mode_unitary(&modes, &c.op.matrix())?;
    }
    Ok(s)
}

pub fn apply_corrections_mixed(state: &MixedState, corrections: &[Correction]) -> Result<MixedState> {
    state.map_branches(|b| apply_corrections(b, corrections))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{unitarity_deviation, Cutoff};

    #[test]
    fn paulis_are_unitary() {
        for op in [LocalOp::X, LocalOp::Y, LocalOp::Z, LocalOp::Hadamard] {
            assert!(unitarity_deviation(&op.matrix()) < 1e-15);
        }
    }

    #[test]
    fn x_flips_logical_state() {
        let reg = ModeRegistry::with_qubits(&["a"]).unwrap();
        let q = reg.qubit(reg.qubit_by_label("a").unwrap()).clone();
        let s = PureState::vacuum(reg, Cutoff::default()).unwrap().create(q.atomic_h).unwrap();
        let flipped = apply_corrections(&s, &[Correction::x("a")]).unwrap();
        assert_eq!(flipped.fraction_where(|k| k.get(q.atomic_v) == 1), 1.0);
        assert!(apply_corrections(&s, &[Correction::x("b")]).is_err());
        assert_eq!(Correction::z("a").to_string(), "Z_a");
    }
}
