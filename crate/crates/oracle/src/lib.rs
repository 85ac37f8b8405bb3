//! Dense reference implementation of truncated multimode Fock space.
//!
//! Every operator is an explicit matrix over the full mixed-radix basis
//! `{0..=cutoff}^modes`. Passive linear optics is computed from matrix
//! permanents, independently of any polynomial expansion. Only intended for
//! a handful of modes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Full truncated basis over `modes` modes, each holding `0..=cutoff` quanta.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseSpace {
    modes: usize,
    cutoff: usize,
    dim: usize,
}

impl DenseSpace {
    pub fn new(modes: usize, cutoff: usize) -> Self {
        let dim = (cutoff + 1).pow(modes as u32);
        DenseSpace { modes, cutoff, dim }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Basis index of an occupation vector; mode 0 is the most significant digit.
    pub fn index(&self, occ: &[u8]) -> usize {
        assert_eq!(occ.len(), self.modes);
        occ.iter().fold(0, |acc, &n| {
            assert!(n as usize <= self.cutoff);
            acc * (self.cutoff + 1) + n as usize
        })
    }

    pub fn occupation(&self, mut index: usize) -> Vec<u8> {
        let mut occ = vec![0u8; self.modes];
        for slot in occ.iter_mut().rev() {
            *slot = (index % (self.cutoff + 1)) as u8;
            index /= self.cutoff + 1;
        }
        occ
    }

    pub fn basis_vector(&self, occ: &[u8]) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim);
        v[self.index(occ)] = C64::new(1.0, 0.0);
        v
    }

    /// Truncated creation operator `a†` on `mode`.
    pub fn creation(&self, mode: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let mut occ = self.occupation(col);
            let n = occ[mode] as usize;
            if n < self.cutoff {
                occ[mode] += 1;
                m[(self.index(&occ), col)] = C64::new(((n + 1) as f64).sqrt(), 0.0);
            }
        }
        m
    }

    /// Annihilation operator `a` on `mode`.
    pub fn annihilation(&self, mode: usize) -> DMatrix<C64> {
        self.creation(mode).adjoint()
    }

    /// Number operator on `mode`.
    pub fn number(&self, mode: usize) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| C64::new(self.occupation(i)[mode] as f64, 0.0)),
        ))
    }

    /// Projector onto `n` quanta in `mode`.
    pub fn projector(&self, mode: usize, n: u8) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| {
                if self.occupation(i)[mode] == n {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        ))
    }

    /// Fock-space operator of the passive transform `a_k† -> Σ_j U[j,k] a_j†`
    /// on the listed modes, restricted to the truncated basis.
    ///
    /// Matrix elements are `perm(U[m, n]) / sqrt(Π n_k! Π m_j!)`, where the
    /// submatrix repeats row `j` `m_j` times and column `k` `n_k` times.
    pub fn passive(&self, u: &DMatrix<C64>, targets: &[usize]) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let v = self.apply_passive_basis(u, targets, &self.occupation(col));
            for (row, amp) in v {
                out[(row, col)] = amp;
            }
        }
        out
    }

    /// Applies the passive transform to a state vector.
    pub fn apply_passive(&self, u: &DMatrix<C64>, targets: &[usize], psi: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim);
        for (col, amp) in psi.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            for (row, c) in self.apply_passive_basis(u, targets, &self.occupation(col)) {
                out[row] += c * amp;
            }
        }
        out
    }

    fn apply_passive_basis(&self, u: &DMatrix<C64>, targets: &[usize], input: &[u8]) -> Vec<(usize, C64)> {
        let d = targets.len();
        assert_eq!(u.nrows(), d);
        let local_in: Vec<u8> = targets.iter().map(|&t| input[t]).collect();
        let total: usize = local_in.iter().map(|&n| n as usize).sum();
        let cols: Vec<usize> = local_in
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
            .collect();
        let norm_in: f64 = local_in.iter().map(|&n| factorial(n as usize)).product();
        let mut result = Vec::new();
        for local_out in compositions(total, d, self.cutoff) {
            let rows: Vec<usize> = local_out
                .iter()
                .enumerate()
                .flat_map(|(j, &m)| std::iter::repeat_n(j, m as usize))
                .collect();
            let sub = DMatrix::from_fn(total, total, |r, c| u[(rows[r], cols[c])]);
            let norm_out: f64 = local_out.iter().map(|&m| factorial(m as usize)).product();
            let amp = permanent(&sub) / (norm_in * norm_out).sqrt();
            if amp.norm() == 0.0 {
                continue;
            }
            let mut occ = input.to_vec();
            for (slot, &t) in targets.iter().enumerate() {
                occ[t] = local_out[slot];
            }
            result.push((self.index(&occ), amp));
        }
        result
    }

    /// Partial trace of a density matrix over the listed modes. The reduced
    /// matrix lives in `DenseSpace::new(modes - traced.len(), cutoff)` with
    /// the remaining modes in their original order.
    pub fn partial_trace(&self, rho: &DMatrix<C64>, traced: &[usize]) -> DMatrix<C64> {
        let kept: Vec<usize> = (0..self.modes).filter(|m| !traced.contains(m)).collect();
        let reduced = DenseSpace::new(kept.len(), self.cutoff);
        let mut out = DMatrix::zeros(reduced.dim, reduced.dim);
        for i in 0..self.dim {
            let oi = self.occupation(i);
            for j in 0..self.dim {
                let oj = self.occupation(j);
                if traced.iter().any(|&t| oi[t] != oj[t]) {
                    continue;
                }
                let ki: Vec<u8> = kept.iter().map(|&m| oi[m]).collect();
                let kj: Vec<u8> = kept.iter().map(|&m| oj[m]).collect();
                out[(reduced.index(&ki), reduced.index(&kj))] += rho[(i, j)];
            }
        }
        out
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn density(psi: &DVector<C64>) -> DMatrix<C64> {
    psi * psi.adjoint()
}

/// `⟨ψ|ρ|ψ⟩ / (⟨ψ|ψ⟩ tr ρ)`.
pub fn fidelity_pure_mixed(psi: &DVector<C64>, rho: &DMatrix<C64>) -> f64 {
    let num = (psi.adjoint() * rho * psi)[(0, 0)].re;
    let den = psi.norm_squared() * rho.trace().re;
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Permanent by Ryser's formula.
pub fn permanent(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for subset in 1u64..(1u64 << n) {
        let mut prod = C64::new(1.0, 0.0);
        for r in 0..n {
            let mut row_sum = C64::new(0.0, 0.0);
            for c in 0..n {
                if subset & (1 << c) != 0 {
                    row_sum += m[(r, c)];
                }
            }
            prod *= row_sum;
        }
        let sign = if (n - subset.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All ways to place `total` quanta in `parts` modes with at most `cap` each.
fn compositions(total: usize, parts: usize, cap: usize) -> Vec<Vec<u8>> {
    fn rec(rem: usize, parts: usize, cap: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if parts == 0 {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for n in 0..=rem.min(cap) {
            cur.push(n as u8);
            rec(rem - n, parts - 1, cap, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, cap, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn index_roundtrip() {
        let s = DenseSpace::new(3, 2);
        assert_eq!(s.dim(), 27);
        for i in 0..s.dim() {
            assert_eq!(s.index(&s.occupation(i)), i);
        }
    }

    #[test]
    fn permanent_small() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        assert!((permanent(&m) - c(10.0)).norm() < 1e-14);
        let ones = DMatrix::from_element(4, 4, c(1.0));
        assert!((permanent(&ones) - c(24.0)).norm() < 1e-12);
    }

    #[test]
    fn commutator_below_cutoff() {
        let s = DenseSpace::new(1, 3);
        let a = s.annihilation(0);
        let ad = s.creation(0);
        let comm = &a * &ad - &ad * &a;
        for n in 0..3 {
            assert!((comm[(n, n)] - c(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn passive_is_unitary_on_closed_sectors() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bs = DMatrix::from_row_slice(2, 2, &[c(r), c(r), c(r), c(-r)]);
        let s = DenseSpace::new(2, 2);
        let u = s.passive(&bs, &[0, 1]);
        let psi = s.basis_vector(&[1, 1]);
        let out = &u * &psi;
        assert!(out[s.index(&[1, 1])].norm() < 1e-14);
        assert!((out[s.index(&[2, 0])] - c(r)).norm() < 1e-14);
        assert!((out[s.index(&[0, 2])] + c(r)).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_product() {
        let s = DenseSpace::new(2, 1);
        let psi = s.basis_vector(&[1, 0]);
        let red = s.partial_trace(&density(&psi), &[1]);
        assert_eq!(red.nrows(), 2);
        assert!((red[(1, 1)] - c(1.0)).norm() < 1e-14);
    }
}
