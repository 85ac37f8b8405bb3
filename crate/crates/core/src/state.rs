//! Sparse multimode Fock states.
//!
//! A [`PureState`] maps occupation vectors to complex amplitudes and carries
//! a branch weight: the probability of the heralding history that produced
//! it. Amplitudes are not forced to unit norm (ladder operators change the
//! norm); the probability mass of a branch is `weight * norm_sqr()`.
//!
//! Collective atomic excitations are treated as bosonic modes. This is the
//! usual low-excitation approximation for an ensemble of many atoms and is
//! the regime every protocol here runs in.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{ModeId, ModeRegistry};

pub type C64 = Complex64;

/// Amplitudes with magnitude below this are not stored.
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// Unitarity tolerance for mode transforms.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Occupation numbers for every registered mode.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Box<[u8]>);

impl Occupation {
    pub fn zeros(len: usize) -> Self {
        Occupation(vec![0; len].into_boxed_slice())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, mode: ModeId) -> u8 {
        self.0[mode.0]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    fn with(&self, mode: ModeId, n: u8) -> Self {
        let mut v = self.0.clone();
        v[mode.0] = n;
        Occupation(v)
    }
}

impl From<Vec<u8>> for Occupation {
    fn from(v: Vec<u8>) -> Self {
        Occupation(v.into_boxed_slice())
    }
}

impl fmt::Debug for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// Per-mode occupation limits. Atomic modes use `atomic`; optical and loss
/// modes use `photonic`, which is kept large enough that passive optics never
/// truncates the photon numbers the protocols produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoff {
    pub atomic: u8,
    pub photonic: u8,
}

impl Cutoff {
    pub const DEFAULT_ATOMIC: u8 = 3;

    pub fn new(atomic: u8) -> Self {
        Cutoff {
            atomic,
            photonic: (2 * atomic).max(6),
        }
    }

    pub fn uniform(cutoff: u8) -> Self {
        Cutoff {
            atomic: cutoff,
            photonic: cutoff,
        }
    }

    fn validate(self) -> Result<Self> {
        if self.atomic == 0 || self.photonic == 0 {
            return Err(Error::OutOfRange {
                name: "cutoff",
                value: self.atomic.min(self.photonic) as f64,
                range: ">= 1",
            });
        }
        Ok(self)
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::new(Self::DEFAULT_ATOMIC)
    }
}

/// Record of terms dropped because an occupation exceeded its cutoff.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Truncation {
    pub events: u64,
    /// Squared norm removed, in units of the state's own normalization.
    pub dropped_norm_sqr: f64,
}

impl Truncation {
    fn absorb(&mut self, other: Truncation) {
        self.events += other.events;
        self.dropped_norm_sqr += other.dropped_norm_sqr;
    }
}

#[derive(Clone)]
pub struct PureState {
    registry: Arc<ModeRegistry>,
    limits: Arc<[u8]>,
    cutoff: Cutoff,
    terms: BTreeMap<Occupation, C64>,
    weight: f64,
    truncation: Truncation,
}

impl fmt::Debug for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PureState")
            .field("weight", &self.weight)
            .field("terms", &self.terms)
            .finish()
    }
}

/// Collects amplitudes for a new state, separating out terms that exceed the
/// per-mode limits.
struct Accumulator<'a> {
    limits: &'a [u8],
    kept: BTreeMap<Occupation, C64>,
    dropped: BTreeMap<Occupation, C64>,
}

impl<'a> Accumulator<'a> {
    fn new(limits: &'a [u8]) -> Self {
        Accumulator {
            limits,
            kept: BTreeMap::new(),
            dropped: BTreeMap::new(),
        }
    }

    fn add(&mut self, key: Occupation, amp: C64) {
        let within = key.0.iter().zip(self.limits).all(|(n, max)| n <= max);
        let map = if within {
            &mut self.kept
        } else {
            &mut self.dropped
        };
        *map.entry(key).or_insert(C64::new(0.0, 0.0)) += amp;
    }

    fn finish(self) -> (BTreeMap<Occupation, C64>, Truncation) {
        let mut kept = self.kept;
        kept.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
        let mut truncation = Truncation::default();
        for amp in self.dropped.values() {
            let w = amp.norm_sqr();
            if w > PRUNE_TOLERANCE * PRUNE_TOLERANCE {
                truncation.events += 1;
                truncation.dropped_norm_sqr += w;
            }
        }
        (kept, truncation)
    }
}

fn limits_for(registry: &ModeRegistry, cutoff: Cutoff) -> Arc<[u8]> {
    registry
        .modes()
        .iter()
        .map(|m| {
            if m.kind.is_atomic() {
                cutoff.atomic
            } else {
                cutoff.photonic
            }
        })
        .collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl PureState {
    /// All modes empty, amplitude 1, weight 1.
    pub fn vacuum(registry: Arc<ModeRegistry>, cutoff: Cutoff) -> Result<Self> {
        if registry.is_empty() {
            return Err(Error::Network("empty registry".into()));
        }
        let cutoff = cutoff.validate()?;
        let limits = limits_for(&registry, cutoff);
        let mut terms = BTreeMap::new();
        terms.insert(Occupation::zeros(registry.len()), C64::new(1.0, 0.0));
        Ok(PureState {
            registry,
            limits,
            cutoff,
            terms,
            weight: 1.0,
            truncation: Truncation::default(),
        })
    }

    /// Builds a state from explicit basis terms (duplicates are summed).
    pub fn from_terms<I>(registry: Arc<ModeRegistry>, cutoff: Cutoff, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, C64)>,
    {
        let mut state = Self::vacuum(registry, cutoff)?;
        state.terms.clear();
        let mut acc = Accumulator::new(&state.limits);
        for (occ, amp) in terms {
            if occ.len() != state.registry.len() {
                return Err(Error::Network(format!(
                    "occupation vector of length {} for {} modes",
                    occ.len(),
                    state.registry.len()
                )));
            }
            acc.add(occ.into(), amp);
        }
        let (kept, truncation) = acc.finish();
        if truncation.events > 0 {
            return Err(Error::OutOfRange {
                name: "occupation",
                value: f64::NAN,
                range: "within cutoff",
            });
        }
        state.terms = kept;
        Ok(state)
    }

    fn with_terms(&self, terms: BTreeMap<Occupation, C64>, extra: Truncation) -> Self {
        let mut truncation = self.truncation;
        truncation.absorb(extra);
        PureState {
            registry: Arc::clone(&self.registry),
            limits: Arc::clone(&self.limits),
            cutoff: self.cutoff,
            terms,
            weight: self.weight,
            truncation,
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Occupation limit of one mode.
    pub fn limit(&self, mode: ModeId) -> u8 {
        self.limits[mode.0]
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occupation: &[u8]) -> C64 {
        self.terms
            .get(&Occupation::from(occupation.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Probability mass of this branch: `weight * norm²`.
    pub fn probability(&self) -> f64 {
        self.weight * self.norm_sqr()
    }

    /// Unit-norm copy; a zero state is returned unchanged.
    pub fn normalized(&self) -> Self {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return self.clone();
        }
        self.scaled(C64::new(1.0 / norm, 0.0))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, a)| (k.clone(), a * factor))
            .filter(|(_, a)| a.norm() >= PRUNE_TOLERANCE)
            .collect();
        self.with_terms(terms, Truncation::default())
    }

    /// Coherent sum `self + other` (weights are taken from `self`).
    pub fn superpose(&self, other: &PureState) -> Result<Self> {
        self.same_space(other)?;
        let mut acc = Accumulator::new(&self.limits);
        for (k, a) in self.terms.iter().chain(other.terms.iter()) {
            acc.add(k.clone(), *a);
        }
        let (terms, t) = acc.finish();
        Ok(self.with_terms(terms, t))
    }

    fn same_space(&self, other: &PureState) -> Result<()> {
        if !(Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry)
            || self.cutoff != other.cutoff
        {
            return Err(Error::RegistryMismatch);
        }
        Ok(())
    }

    fn check_modes(&self, modes: &[ModeId]) -> Result<()> {
        self.registry.check(modes)
    }

    /// Applies the creation operator of `mode` (√(n+1) factor). Terms pushed
    /// past the cutoff are dropped and counted.
    pub fn create(&self, mode: ModeId) -> Result<Self> {
        self.check_modes(&[mode])?;
        let mut acc = Accumulator::new(&self.limits);
        for (k, a) in &self.terms {
            let n = k.get(mode);
            acc.add(k.with(mode, n + 1), a * ((n as f64 + 1.0).sqrt()));
        }
        let (terms, t) = acc.finish();
        Ok(self.with_terms(terms, t))
    }

    /// Applies the annihilation operator of `mode` (√n factor).
    pub fn annihilate(&self, mode: ModeId) -> Result<Self> {
        self.check_modes(&[mode])?;
        let mut acc = Accumulator::new(&self.limits);
        for (k, a) in &self.terms {
            let n = k.get(mode);
            if n > 0 {
                acc.add(k.with(mode, n - 1), a * (n as f64).sqrt());
            }
        }
        let (terms, t) = acc.finish();
        Ok(self.with_terms(terms, t))
    }

    /// `⟨a†a⟩` for the normalized state.
    pub fn number_expectation(&self, mode: ModeId) -> Result<f64> {
        self.check_modes(&[mode])?;
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok(self
            .terms
            .iter()
            .map(|(k, a)| k.get(mode) as f64 * a.norm_sqr())
            .sum::<f64>()
            / norm)
    }

    /// Passive mode transform: every creation operator `a_k†` on the listed
    /// modes is replaced by `Σ_j U[j,k] a_j†` and each basis term re-expanded.
    pub fn apply_mode_unitary(&self, modes: &[ModeId], unitary: &DMatrix<C64>) -> Result<Self> {
        self.check_modes(modes)?;
        check_unitary(unitary, modes.len())?;
        let d = modes.len();
        let mut cache: BTreeMap<Vec<u8>, Vec<(Vec<u8>, C64)>> = BTreeMap::new();
        let mut acc = Accumulator::new(&self.limits);
        for (k, a) in &self.terms {
            let local: Vec<u8> = modes.iter().map(|m| k.get(*m)).collect();
            let expansion = cache
                .entry(local)
                .or_insert_with_key(|local| expand_product(local, unitary));
            for (out, c) in expansion.iter() {
                let mut key = k.0.clone();
                for (slot, m) in modes.iter().enumerate() {
                    key[m.0] = out[slot];
                }
                acc.add(Occupation(key), a * c);
            }
        }
        debug_assert_eq!(d, unitary.nrows());
        let (terms, t) = acc.finish();
        Ok(self.with_terms(terms, t))
    }

    /// Keeps only terms with `n` quanta in `mode`. Returns the renormalized
    /// branch (weight multiplied by the outcome probability) and the
    /// conditional probability of the outcome.
    pub fn project_occupation(&self, mode: ModeId, n: u8) -> Result<(Self, f64)> {
        self.check_modes(&[mode])?;
        if n > self.limit(mode) {
            return Err(Error::OutOfRange {
                name: "occupation",
                value: n as f64,
                range: "[0, cutoff]",
            });
        }
        Ok(self.project_where(|k| k.get(mode) == n))
    }

    /// Projection onto the terms selected by `keep`; see
    /// [`project_occupation`](Self::project_occupation).
    pub fn project_where<F: Fn(&Occupation) -> bool>(&self, keep: F) -> (Self, f64) {
        let total = self.norm_sqr();
        let terms: BTreeMap<_, _> = self
            .terms
            .iter()
            .filter(|(k, _)| keep(k))
            .map(|(k, a)| (k.clone(), *a))
            .collect();
        let part: f64 = terms.values().map(|a| a.norm_sqr()).sum();
        let prob = if total > 0.0 { part / total } else { 0.0 };
        let mut out = self.with_terms(terms, Truncation::default());
        out.weight = self.weight * prob;
        (out.normalized(), prob)
    }

    /// Splits the state by the joint occupation of `modes`, sets those modes
    /// back to vacuum in each piece and returns the pieces as weighted
    /// branches. The map is keyed by the observed occupations.
    pub(crate) fn split_on(&self, modes: &[ModeId]) -> Result<BTreeMap<Vec<u8>, PureState>> {
        self.check_modes(modes)?;
        let total = self.norm_sqr();
        let mut groups: BTreeMap<Vec<u8>, BTreeMap<Occupation, C64>> = BTreeMap::new();
        for (k, a) in &self.terms {
            let pattern: Vec<u8> = modes.iter().map(|m| k.get(*m)).collect();
            let mut key = k.0.clone();
            for m in modes {
                key[m.0] = 0;
            }
            groups.entry(pattern).or_default().insert(Occupation(key), *a);
        }
        Ok(groups
            .into_iter()
            .map(|(pattern, terms)| {
                let part: f64 = terms.values().map(|a| a.norm_sqr()).sum();
                let mut branch = self.with_terms(terms, Truncation::default());
                branch.weight = if total > 0.0 {
                    self.weight * part / total
                } else {
                    0.0
                };
                (pattern, branch.normalized())
            })
            .collect())
    }

    /// Partial trace over modes that are never touched again. Because the
    /// traced modes are only ever looked at in the number basis, the reduced
    /// state is block diagonal in their occupations and decomposes into one
    /// pure branch per occupation pattern.
    pub fn trace_modes(&self, modes: &[ModeId]) -> Result<MixedState> {
        let branches = self.split_on(modes)?.into_values().collect();
        MixedState::from_branches(Arc::clone(&self.registry), self.cutoff, branches)
    }

    /// Sets the listed modes back to vacuum by tracing them out; returns the
    /// resulting branches.
    pub fn reset_modes(&self, modes: &[ModeId]) -> Result<MixedState> {
        self.trace_modes(modes)
    }

    /// `⟨self|other⟩` on raw amplitudes.
    pub fn inner_product(&self, other: &PureState) -> Result<C64> {
        self.same_space(other)?;
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut sum = C64::new(0.0, 0.0);
        for (k, a) in &small.terms {
            if let Some(b) = large.terms.get(k) {
                sum += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(sum)
    }

    /// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        let ip = self.inner_product(other)?;
        let n = self.norm_sqr() * other.norm_sqr();
        Ok(if n > 0.0 { ip.norm_sqr() / n } else { 0.0 })
    }

    /// Product of two states that occupy disjoint modes.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        self.same_space(other)?;
        let mut acc = Accumulator::new(&self.limits);
        for (ka, a) in &self.terms {
            for (kb, b) in &other.terms {
                let mut key = ka.0.clone();
                for (slot, n) in key.iter_mut().zip(kb.0.iter()) {
                    if *slot != 0 && *n != 0 {
                        let clash = ka
                            .0
                            .iter()
                            .zip(kb.0.iter())
                            .enumerate()
                            .filter(|(_, (x, y))| **x != 0 && **y != 0)
                            .map(|(i, _)| i)
                            .collect();
                        return Err(Error::ModesOccupied(clash));
                    }
                    *slot += n;
                }
                acc.add(Occupation(key), a * b);
            }
        }
        let (terms, t) = acc.finish();
        let mut out = self.with_terms(terms, t);
        out.weight = self.weight * other.weight;
        out.truncation.absorb(other.truncation);
        Ok(out)
    }

    /// Errors unless every listed mode is empty in every term.
    pub fn require_empty(&self, modes: &[ModeId]) -> Result<()> {
        self.check_modes(modes)?;
        let busy: Vec<usize> = modes
            .iter()
            .filter(|m| self.terms.keys().any(|k| k.get(**m) != 0))
            .map(|m| m.0)
            .collect();
        if busy.is_empty() {
            Ok(())
        } else {
            Err(Error::ModesOccupied(busy))
        }
    }

    /// Total squared norm carried by terms satisfying `pred`, relative to the
    /// state's norm.
    pub fn fraction_where<F: Fn(&Occupation) -> bool>(&self, pred: F) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            / total
    }

    /// Dense copy of the amplitudes of the listed basis vectors.
    pub fn to_vec(&self, basis: &[Occupation]) -> Vec<C64> {
        basis
            .iter()
            .map(|k| self.terms.get(k).copied().unwrap_or_default())
            .collect()
    }

    pub(crate) fn map_terms<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&Occupation, C64, &mut dyn FnMut(Vec<u8>, C64)),
    {
        let mut acc = Accumulator::new(&self.limits);
        for (k, a) in &self.terms {
            f(k, *a, &mut |key, amp| acc.add(key.into(), amp));
        }
        let (terms, t) = acc.finish();
        self.with_terms(terms, t)
    }
}

/// Expands `Π_k (Σ_j U[j,k] a_j†)^{n_k} / √(n_k!)` acting on vacuum into
/// normalized Fock components on the local modes.
fn expand_product(local: &[u8], unitary: &DMatrix<C64>) -> Vec<(Vec<u8>, C64)> {
    let d = local.len();
    // Polynomial in the output creation operators: exponent vector -> coefficient.
    let mut poly: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
    poly.insert(vec![0; d], C64::new(1.0, 0.0));
    for (k, &n) in local.iter().enumerate() {
        for _ in 0..n {
            let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
            for (exps, c) in &poly {
                for j in 0..d {
                    let u = unitary[(j, k)];
                    if u.norm() == 0.0 {
                        continue;
                    }
                    let mut e = exps.clone();
                    e[j] += 1;
                    *next.entry(e).or_insert(C64::new(0.0, 0.0)) += c * u;
                }
            }
            poly = next;
        }
    }
    let input_norm: f64 = local.iter().map(|&n| factorial(n as u32)).product::<f64>().sqrt();
    poly.into_iter()
        .map(|(exps, c)| {
            let out_norm: f64 = exps.iter().map(|&m| factorial(m as u32)).product::<f64>().sqrt();
            (exps, c * (out_norm / input_norm))
        })
        .filter(|(_, c)| c.norm() >= PRUNE_TOLERANCE)
        .collect()
}

/// Max-entry deviation of `U†U` from the identity.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

pub(crate) fn check_unitary(u: &DMatrix<C64>, modes: usize) -> Result<()> {
    if u.nrows() != modes || u.ncols() != modes {
        return Err(Error::ShapeMismatch {
            rows: u.nrows(),
            cols: u.ncols(),
            modes,
        });
    }
    let deviation = unitarity_deviation(u);
    if deviation > UNITARITY_TOLERANCE {
        return Err(Error::NonUnitary { deviation });
    }
    Ok(())
}

/// A finite ensemble of weighted pure branches over one registry.
#[derive(Clone, Debug)]
pub struct MixedState {
    registry: Arc<ModeRegistry>,
    cutoff: Cutoff,
    branches: Vec<PureState>,
}

impl MixedState {
    pub fn empty(registry: Arc<ModeRegistry>, cutoff: Cutoff) -> Self {
        MixedState {
            registry,
            cutoff,
            branches: Vec::new(),
        }
    }

    pub fn from_pure(state: PureState) -> Self {
        MixedState {
            registry: Arc::clone(&state.registry),
            cutoff: state.cutoff,
            branches: vec![state],
        }
    }

    /// Branches with zero probability mass are dropped.
    pub fn from_branches(
        registry: Arc<ModeRegistry>,
        cutoff: Cutoff,
        branches: Vec<PureState>,
    ) -> Result<Self> {
        let mut out = Self::empty(registry, cutoff);
        for b in branches {
            out.push(b)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, branch: PureState) -> Result<()> {
        if !(Arc::ptr_eq(&self.registry, &branch.registry) || *self.registry == *branch.registry)
            || self.cutoff != branch.cutoff
        {
            return Err(Error::RegistryMismatch);
        }
        if branch.probability() > 0.0 && !branch.is_empty() {
            self.branches.push(branch);
        }
        Ok(())
    }

    pub fn extend(&mut self, other: MixedState) -> Result<()> {
        for b in other.branches {
            self.push(b)?;
        }
        Ok(())
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn branches(&self) -> &[PureState] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<PureState> {
        self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Σ weight · norm² over branches.
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(PureState::probability).sum()
    }

    pub fn truncation(&self) -> Truncation {
        let mut t = Truncation::default();
        for b in &self.branches {
            t.absorb(b.truncation);
        }
        t
    }

    /// Copy with unit-norm branches whose weights sum to one.
    pub fn normalized(&self) -> Self {
        let total = self.total_weight();
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let p = b.probability();
                b.normalized().with_weight(if total > 0.0 { p / total } else { 0.0 })
            })
            .collect();
        MixedState {
            registry: Arc::clone(&self.registry),
            cutoff: self.cutoff,
            branches,
        }
    }

    pub fn scale_weights(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.weight *= factor;
        }
        out
    }

    /// Fidelity of the normalized mixture with a pure reference:
    /// `Σ_b w_b |⟨ref|b⟩|² / Σ_b w_b`.
    pub fn fidelity(&self, reference: &PureState) -> Result<f64> {
        let total = self.total_weight();
        if total == 0.0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for b in &self.branches {
            acc += b.probability() * b.fidelity(reference)?;
        }
        Ok(acc / total)
    }

    /// Applies `f` to every branch and collects the results.
    pub fn map_branches<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&PureState) -> Result<PureState>,
    {
        let mut out = Self::empty(Arc::clone(&self.registry), self.cutoff);
        for b in &self.branches {
            out.push(f(b)?)?;
        }
        Ok(out)
    }

    /// Applies a branch-splitting map to every branch.
    pub fn flat_map_branches<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&PureState) -> Result<MixedState>,
    {
        let mut out = Self::empty(Arc::clone(&self.registry), self.cutoff);
        for b in &self.branches {
            out.extend(f(b)?)?;
        }
        Ok(out)
    }

    pub fn apply_mode_unitary(&self, modes: &[ModeId], unitary: &DMatrix<C64>) -> Result<Self> {
        self.map_branches(|b| b.apply_mode_unitary(modes, unitary))
    }

    pub fn trace_modes(&self, modes: &[ModeId]) -> Result<Self> {
        self.flat_map_branches(|b| b.trace_modes(modes))
    }

    /// Branchwise product with another mixture on disjoint modes.
    pub fn tensor(&self, other: &MixedState) -> Result<Self> {
        let mut out = Self::empty(Arc::clone(&self.registry), self.cutoff);
        for a in &self.branches {
            for b in &other.branches {
                out.push(a.tensor(b)?)?;
            }
        }
        Ok(out)
    }

    /// Probability mass (relative to the total) on terms satisfying `pred`.
    pub fn fraction_where<F: Fn(&Occupation) -> bool + Copy>(&self, pred: F) -> f64 {
        let total = self.total_weight();
        if total == 0.0 {
            return 0.0;
        }
        self.branches
            .iter()
            .map(|b| b.probability() * b.fraction_where(pred))
            .sum::<f64>()
            / total
    }
}

impl From<PureState> for MixedState {
    fn from(state: PureState) -> Self {
        MixedState::from_pure(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::ModeRegistry;
    use approx::assert_relative_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bs50() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
    }

    #[test]
    fn vacuum_is_single_term() {
        let reg = ModeRegistry::anonymous(2);
        let v = PureState::vacuum(reg, Cutoff::uniform(3)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.amplitude(&[0, 0]), c(1.0));
        assert_eq!(v.weight(), 1.0);
        for n in 1..=8 {
            let v = PureState::vacuum(ModeRegistry::anonymous(n), Cutoff::default()).unwrap();
            assert_relative_eq!(v.norm_sqr(), 1.0);
        }
    }

    #[test]
    fn vacuum_rejects_bad_inputs() {
        assert!(PureState::vacuum(ModeRegistry::anonymous(0), Cutoff::default()).is_err());
        assert!(PureState::vacuum(ModeRegistry::anonymous(1), Cutoff::uniform(0)).is_err());
    }

    #[test]
    fn ladder_factors() {
        let reg = ModeRegistry::anonymous(1);
        let v = PureState::vacuum(reg, Cutoff::uniform(3)).unwrap();
        let one = v.create(ModeId(0)).unwrap();
        assert_eq!(one.amplitude(&[1]), c(1.0));
        let two = one.create(ModeId(0)).unwrap();
        assert_relative_eq!(two.amplitude(&[2]).re, 2f64.sqrt(), epsilon = 1e-15);
        let back = one.annihilate(ModeId(0)).unwrap();
        assert_eq!(back.amplitude(&[0]), c(1.0));
        assert!(v.annihilate(ModeId(0)).unwrap().is_empty());
    }

    #[test]
    fn creation_past_cutoff_is_counted() {
        let reg = ModeRegistry::anonymous(1);
        let v = PureState::vacuum(reg, Cutoff::uniform(1)).unwrap();
        let two = v.create(ModeId(0)).unwrap().create(ModeId(0)).unwrap();
        assert!(two.is_empty());
        assert_eq!(two.truncation().events, 1);
        assert_relative_eq!(two.truncation().dropped_norm_sqr, 2.0);
    }

    #[test]
    fn beamsplitter_on_single_photon() {
        let reg = ModeRegistry::anonymous(2);
        let s = PureState::vacuum(reg, Cutoff::uniform(2))
            .unwrap()
            .create(ModeId(0))
            .unwrap();
        let out = s.apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs50()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(out.amplitude(&[1, 0]).re, r, epsilon = 1e-15);
        assert_relative_eq!(out.amplitude(&[0, 1]).re, r, epsilon = 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let reg = ModeRegistry::anonymous(2);
        let s = PureState::vacuum(reg, Cutoff::uniform(2))
            .unwrap()
            .create(ModeId(0))
            .unwrap()
            .create(ModeId(1))
            .unwrap();
        let out = s.apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs50()).unwrap();
        assert_eq!(out.amplitude(&[1, 1]), C64::default());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(out.amplitude(&[2, 0]).re, r, epsilon = 1e-14);
        assert_relative_eq!(out.amplitude(&[0, 2]).re, -r, epsilon = 1e-14);
    }

    #[test]
    fn non_unitary_rejected() {
        let reg = ModeRegistry::anonymous(2);
        let v = PureState::vacuum(reg, Cutoff::uniform(2)).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.1), c(0.0), c(1.0)]);
        assert!(matches!(
            v.apply_mode_unitary(&[ModeId(0), ModeId(1)], &m),
            Err(Error::NonUnitary { .. })
        ));
        assert!(matches!(
            v.apply_mode_unitary(&[ModeId(0)], &m),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn projection_probabilities() {
        let reg = ModeRegistry::anonymous(1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::from_terms(reg, Cutoff::uniform(2), [(vec![0], c(r)), (vec![1], c(r))])
            .unwrap();
        let (b0, p0) = s.project_occupation(ModeId(0), 0).unwrap();
        assert_relative_eq!(p0, 0.5, epsilon = 1e-15);
        assert_relative_eq!(b0.weight(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(b0.norm_sqr(), 1.0, epsilon = 1e-15);
        let (b2, p2) = s.project_occupation(ModeId(0), 2).unwrap();
        assert_eq!(p2, 0.0);
        assert!(b2.is_empty());
        assert!(s.project_occupation(ModeId(0), 3).is_err());
    }

    #[test]
    fn trace_of_split_photon() {
        let reg = ModeRegistry::anonymous(2);
        let s = PureState::vacuum(reg, Cutoff::uniform(2))
            .unwrap()
            .create(ModeId(0))
            .unwrap()
            .apply_mode_unitary(&[ModeId(0), ModeId(1)], &bs50())
            .unwrap();
        let mixed = s.trace_modes(&[ModeId(1)]).unwrap();
        assert_eq!(mixed.len(), 2);
        for b in mixed.branches() {
            assert_relative_eq!(b.weight(), 0.5, epsilon = 1e-15);
        }
        let vac_only = PureState::vacuum(ModeRegistry::anonymous(2), Cutoff::uniform(2)).unwrap();
        let traced = vac_only.trace_modes(&[ModeId(1)]).unwrap();
        assert_eq!(traced.len(), 1);
        assert_eq!(traced.total_weight(), 1.0);
    }

    #[test]
    fn fidelity_and_orthogonality() {
        let reg = ModeRegistry::anonymous(1);
        let v = PureState::vacuum(reg.clone(), Cutoff::uniform(2)).unwrap();
        let one = v.create(ModeId(0)).unwrap();
        assert_eq!(MixedState::from_pure(v.clone()).fidelity(&v).unwrap(), 1.0);
        assert_eq!(MixedState::from_pure(v.clone()).fidelity(&one).unwrap(), 0.0);
        let other = PureState::vacuum(ModeRegistry::anonymous(2), Cutoff::uniform(2)).unwrap();
        assert_eq!(v.inner_product(&other), Err(Error::RegistryMismatch));
    }

    #[test]
    fn tensor_requires_disjoint_modes() {
        let reg = ModeRegistry::anonymous(2);
        let v = PureState::vacuum(reg, Cutoff::uniform(2)).unwrap();
        let a = v.create(ModeId(0)).unwrap();
        let b = v.create(ModeId(1)).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.amplitude(&[1, 1]), c(1.0));
        assert!(matches!(a.tensor(&a), Err(Error::ModesOccupied(_))));
    }
}
