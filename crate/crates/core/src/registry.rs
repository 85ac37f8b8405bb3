//! Mode bookkeeping: every bosonic mode a state can touch is registered here
//! once, with its role (atomic collective mode, optical mode, loss ancilla)
//! and the qubit that owns it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a registered mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId(pub usize);

impl ModeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Index of a registered logical qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    AtomicH,
    AtomicV,
    OpticalH,
    OpticalV,
    Loss,
}

impl ModeKind {
    pub fn is_atomic(self) -> bool {
        matches!(self, ModeKind::AtomicH | ModeKind::AtomicV)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeInfo {
    pub id: ModeId,
    pub kind: ModeKind,
    /// Label of the owning qubit, or a free-form owner for network modes.
    pub owner: String,
    pub name: String,
}

/// How a logical qubit is stored in the ensemble(s).
///
/// Both encodings expose the same pair of collective modes `(H, V)`; the
/// difference is purely physical (one ensemble with two levels versus two
/// single-level ensembles) and does not change the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Encoding {
    #[default]
    InternalState,
    DualRail,
}

/// The four modes of one logical qubit: collective atomic modes `H`, `V` and
/// the optical modes `h`, `v` they exchange photons with.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalQubit {
    pub id: QubitId,
    pub label: String,
    pub encoding: Encoding,
    pub atomic_h: ModeId,
    pub atomic_v: ModeId,
    pub optical_h: ModeId,
    pub optical_v: ModeId,
}

impl LogicalQubit {
    pub fn atomic(&self) -> [ModeId; 2] {
        [self.atomic_h, self.atomic_v]
    }

    pub fn optical(&self) -> [ModeId; 2] {
        [self.optical_h, self.optical_v]
    }
}

/// Loss ancillas attached to one optical mode: one for the ensemble-photon
/// coupling loss at the source, one for detector inefficiency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossAncillas {
    pub source: ModeId,
    pub detector: ModeId,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModeRegistry {
    modes: Vec<ModeInfo>,
    qubits: Vec<LogicalQubit>,
    names: HashMap<String, ModeId>,
    ancillas: BTreeMap<ModeId, LossAncillas>,
}

impl ModeRegistry {
    pub fn builder() -> RegistryBuilder {
        RegistryBuilder::default()
    }

    /// Registry with one logical qubit per label, each carrying loss ancillas.
    pub fn with_qubits<S: AsRef<str>>(labels: &[S]) -> Result<Arc<Self>> {
        let mut builder = Self::builder();
        for label in labels {
            builder = builder.qubit(label.as_ref(), Encoding::InternalState);
        }
        builder.build()
    }

    /// Registry of `n` anonymous optical modes `m0..m{n-1}` without ancillas.
    pub fn anonymous(n: usize) -> Arc<Self> {
        let mut builder = Self::builder();
        for i in 0..n {
            builder = builder.mode(ModeKind::OpticalH, "free", &format!("m{i}"));
        }
        builder.build().expect("anonymous mode names are unique")
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeInfo] {
        &self.modes
    }

    pub fn mode(&self, id: ModeId) -> Result<&ModeInfo> {
        self.modes.get(id.0).ok_or(Error::UnknownMode(id.0))
    }

    pub fn kind(&self, id: ModeId) -> ModeKind {
        self.modes[id.0].kind
    }

    pub fn name(&self, id: ModeId) -> &str {
        &self.modes[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Result<ModeId> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownModeName(name.to_string()))
    }

    pub fn contains(&self, id: ModeId) -> bool {
        id.0 < self.modes.len()
    }

    pub fn check(&self, ids: &[ModeId]) -> Result<()> {
        for (i, id) in ids.iter().enumerate() {
            if !self.contains(*id) {
                return Err(Error::UnknownMode(id.0));
            }
            if ids[..i].contains(id) {
                return Err(Error::DuplicateMode(id.0));
            }
        }
        Ok(())
    }

    pub fn qubits(&self) -> &[LogicalQubit] {
        &self.qubits
    }

    pub fn qubit(&self, id: QubitId) -> &LogicalQubit {
        &self.qubits[id.0]
    }

    pub fn qubit_by_label(&self, label: &str) -> Result<QubitId> {
        self.qubits
            .iter()
            .find(|q| q.label == label)
            .map(|q| q.id)
            .ok_or_else(|| Error::UnknownQubit(label.to_string()))
    }

    pub fn loss_ancillas(&self, optical: ModeId) -> Result<LossAncillas> {
        self.ancillas
            .get(&optical)
            .copied()
            .ok_or(Error::NoLossMode(optical.0))
    }

    pub fn loss_modes(&self) -> Vec<ModeId> {
        self.modes
            .iter()
            .filter(|m| m.kind == ModeKind::Loss)
            .map(|m| m.id)
            .collect()
    }
}

#[derive(Default)]
pub struct RegistryBuilder {
    registry: ModeRegistry,
    error: Option<Error>,
}

impl RegistryBuilder {
    fn push(&mut self, kind: ModeKind, owner: &str, name: &str) -> ModeId {
        let id = ModeId(self.registry.modes.len());
        if self.registry.names.insert(name.to_string(), id).is_some() && self.error.is_none() {
            self.error = Some(Error::Network(format!("mode name {name:?} registered twice")));
        }
        self.registry.modes.push(ModeInfo {
            id,
            kind,
            owner: owner.to_string(),
            name: name.to_string(),
        });
        id
    }

    fn attach_ancillas(&mut self, optical: ModeId, owner: &str, name: &str) {
        let source = self.push(ModeKind::Loss, owner, &format!("lossE:{name}"));
        let detector = self.push(ModeKind::Loss, owner, &format!("lossD:{name}"));
        self.registry
            .ancillas
            .insert(optical, LossAncillas { source, detector });
    }

    /// Adds a logical qubit: modes `H<label>`, `V<label>`, `h<label>`,
    /// `v<label>` plus source/detector loss ancillas for both optical modes.
    pub fn qubit(mut self, label: &str, encoding: Encoding) -> Self {
        if self.registry.qubits.iter().any(|q| q.label == label) && self.error.is_none() {
            self.error = Some(Error::DuplicateQubit(label.to_string()));
        }
        let atomic_h = self.push(ModeKind::AtomicH, label, &format!("H{label}"));
        let atomic_v = self.push(ModeKind::AtomicV, label, &format!("V{label}"));
        let optical_h = self.push(ModeKind::OpticalH, label, &format!("h{label}"));
        let optical_v = self.push(ModeKind::OpticalV, label, &format!("v{label}"));
        self.attach_ancillas(optical_h, label, &format!("h{label}"));
        self.attach_ancillas(optical_v, label, &format!("v{label}"));
        let id = QubitId(self.registry.qubits.len());
        self.registry.qubits.push(LogicalQubit {
            id,
            label: label.to_string(),
            encoding,
            atomic_h,
            atomic_v,
            optical_h,
            optical_v,
        });
        self
    }

    /// Adds a bare mode with no ancillas.
    pub fn mode(mut self, kind: ModeKind, owner: &str, name: &str) -> Self {
        self.push(kind, owner, name);
        self
    }

    /// Adds an optical mode with its own pair of loss ancillas.
    pub fn lossy_mode(mut self, kind: ModeKind, owner: &str, name: &str) -> Self {
        let id = self.push(kind, owner, name);
        self.attach_ancillas(id, owner, name);
        self
    }

    pub fn build(self) -> Result<Arc<ModeRegistry>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(Arc::new(self.registry)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_layout() {
        let reg = ModeRegistry::with_qubits(&["1", "2"]).unwrap();
        assert_eq!(reg.len(), 16);
        let q2 = reg.qubit(reg.qubit_by_label("2").unwrap());
        assert_eq!(reg.name(q2.atomic_v), "V2");
        assert_eq!(reg.kind(q2.optical_h), ModeKind::OpticalH);
        let anc = reg.loss_ancillas(q2.optical_v).unwrap();
        assert_eq!(reg.kind(anc.detector), ModeKind::Loss);
        assert!(reg.loss_ancillas(q2.atomic_h).is_err());
        assert_eq!(reg.loss_modes().len(), 8);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(ModeRegistry::with_qubits(&["a", "a"]).is_err());
        let reg = ModeRegistry::anonymous(3);
        assert_eq!(reg.check(&[ModeId(0), ModeId(0)]), Err(Error::DuplicateMode(0)));
        assert_eq!(reg.check(&[ModeId(5)]), Err(Error::UnknownMode(5)));
        assert!(reg.check(&[ModeId(2), ModeId(0)]).is_ok());
    }
}
