//! Density matrices on the support of a branch mixture, used to compare
//! mixed states with each other.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::state::{MixedState, Occupation, PureState, C64};

/// Eigenvalue cutoff when compressing a mixture.
const EIGEN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Vec<Occupation>,
    matrix: DMatrix<C64>,
}

fn support(states: &[&MixedState]) -> Vec<Occupation> {
    let mut set = BTreeSet::new();
    for m in states {
        for b in m.branches() {
            for (k, _) in b.terms() {
                set.insert(k.clone());
            }
        }
    }
    set.into_iter().collect()
}

impl DensityMatrix {
    /// Unit-trace density matrix of the mixture on `basis`.
    pub fn on_basis(state: &MixedState, basis: Vec<Occupation>) -> Self {
        let d = basis.len();
        let mut matrix = DMatrix::zeros(d, d);
        let total = state.total_weight();
        for b in state.branches() {
            let norm = b.norm_sqr();
            if norm == 0.0 {
                continue;
            }
            let w = b.probability() / total / norm;
            let v = nalgebra::DVector::from_vec(b.to_vec(&basis));
            matrix += (&v * v.adjoint()) * C64::new(w, 0.0);
        }
        DensityMatrix { basis, matrix }
    }

    pub fn from_mixed(state: &MixedState) -> Self {
        Self::on_basis(state, support(&[state]))
    }

    pub fn basis(&self) -> &[Occupation] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `ρ = A A†` with one column `√(w_b/‖ψ_b‖²) ψ_b` per branch, trace one.
fn factor(state: &MixedState, basis: &[Occupation]) -> DMatrix<C64> {
    let total = state.total_weight();
    let cols: Vec<_> = state
        .branches()
        .iter()
        .filter(|b| b.norm_sqr() > 0.0)
        .map(|b| {
            let w = (b.probability() / total / b.norm_sqr()).sqrt();
            nalgebra::DVector::from_vec(b.to_vec(basis)) * C64::new(w, 0.0)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// `R` with `ρ = R† R`, from a thin QR of `A†`.
fn gram_root(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.adjoint().qr().r()
}

/// Uhlmann fidelity `(tr|√ρ √σ|)²` of the normalized mixtures.
///
/// Evaluated as the squared trace norm of `R_ρ R_σ†` where `ρ = R_ρ† R_ρ`,
/// which avoids square roots of near-zero eigenvalues.
pub fn mixed_fidelity(a: &MixedState, b: &MixedState) -> Result<f64> {
    if a.registry() != b.registry() {
        return Err(crate::error::Error::RegistryMismatch);
    }
    if a.total_weight() == 0.0 || b.total_weight() == 0.0 {
        return Ok(0.0);
    }
    let basis = support(&[a, b]);
    let ra = gram_root(&factor(a, &basis));
    let rb = gram_root(&factor(b, &basis));
    let m = &ra * rb.adjoint();
    let norm: f64 = m.singular_values().iter().sum();
    Ok(norm * norm)
}

/// `½ ‖ρ − σ‖₁` of the normalized mixtures.
pub fn trace_distance(a: &MixedState, b: &MixedState) -> Result<f64> {
    if a.registry() != b.registry() {
        return Err(crate::error::Error::RegistryMismatch);
    }
    let basis = support(&[a, b]);
    let diff = DensityMatrix::on_basis(a, basis.clone()).matrix - DensityMatrix::on_basis(b, basis).matrix;
    let (vals, _) = hermitian_eigen(&diff);
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

impl MixedState {
    /// Equivalent mixture with one branch per eigenvector of the density
    /// matrix (eigenvalues below the relative tolerance are dropped). Total
    /// weight is preserved.
    pub fn compress(&self) -> Self {
        if self.len() <= 1 {
            return self.clone();
        }
        let total = self.total_weight();
        let rho = DensityMatrix::from_mixed(self);
        let (vals, vecs) = hermitian_eigen(&rho.matrix);
        let mut out = MixedState::empty(self.registry().clone(), self.cutoff());
        let template: &PureState = &self.branches()[0];
        for (k, &lambda) in vals.iter().enumerate() {
            if lambda <= EIGEN_TOLERANCE {
                continue;
            }
            let terms = rho
                .basis
                .iter()
                .enumerate()
                .map(|(i, occ)| (occ.as_slice().to_vec(), vecs[(i, k)]));
            let branch = PureState::from_terms(template.registry().clone(), template.cutoff(), terms)
                .expect("basis comes from valid states")
                .normalized()
                .with_weight(lambda * total);
            out.push(branch).expect("same registry");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{ModeId, ModeRegistry};
    use crate::state::Cutoff;

    fn mix() -> (MixedState, MixedState) {
        let reg = ModeRegistry::anonymous(2);
        let v = PureState::vacuum(reg.clone(), Cutoff::uniform(2)).unwrap();
        let a = v.create(ModeId(0)).unwrap();
        let b = v.create(ModeId(1)).unwrap();
        let plus = a.superpose(&b).unwrap().normalized();
        let minus = a.superpose(&b.scaled(C64::new(-1.0, 0.0))).unwrap().normalized();
        let m1 = MixedState::from_branches(reg.clone(), v.cutoff(), vec![a.with_weight(0.5), b.with_weight(0.5)]).unwrap();
        let m2 = MixedState::from_branches(reg, v.cutoff(), vec![plus.with_weight(0.3), minus.with_weight(0.3)]).unwrap();
        (m1, m2)
    }

    #[test]
    fn equal_mixtures_in_different_decompositions() {
        let (m1, m2) = mix();
        assert!((mixed_fidelity(&m1, &m2).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&m1, &m2).unwrap() < 1e-12);
    }

    #[test]
    fn compress_preserves_state() {
        let (m1, _) = mix();
        let c = m1.compress();
        assert!((c.total_weight() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&m1, &c).unwrap() < 1e-12);
    }

    #[test]
    fn pure_against_mixture() {
        let (m1, _) = mix();
        let pure = MixedState::from_pure(m1.branches()[0].clone());
        assert!((mixed_fidelity(&pure, &m1).unwrap() - 0.5).abs() < 1e-12);
        assert!((m1.fidelity(&m1.branches()[0]).unwrap() - 0.5).abs() < 1e-12);
    }
}
