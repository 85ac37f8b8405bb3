//! Passive linear optics: element matrices, networks of elements, and loss
//! modelled as beamsplitters onto dedicated ancilla modes.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::registry::{ModeId, ModeRegistry};
use crate::state::{check_unitary, MixedState, PureState, C64};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `[[√t, √(1−t)], [√(1−t), −√t]]`.
pub fn beamsplitter_matrix(t: f64) -> Result<DMatrix<C64>> {
    let t = check_unit_interval("transmissivity", t)?;
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    Ok(DMatrix::from_row_slice(2, 2, &[c(a), c(b), c(b), c(-a)]))
}

/// `h → (h+v)/√2`, `v → (h−v)/√2`.
pub fn hadamard_matrix() -> DMatrix<C64> {
    let s = FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
}

/// Real polarization rotation: `h → cosθ h + sinθ v`, `v → −sinθ h + cosθ v`.
pub fn rotator_matrix(theta: f64) -> DMatrix<C64> {
    let (s, co) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

pub fn swap_matrix() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

/// PBS on `(h_a, v_a, h_b, v_b)`: h modes pass, `v_a ↔ v_b`.
pub fn pbs_matrix() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0);
    m[(2, 2)] = c(1.0);
    m[(3, 1)] = c(1.0);
    m[(1, 3)] = c(1.0);
    m
}

/// Haar-random `d × d` unitary (QR of a complex Gaussian matrix with the
/// phases of R's diagonal divided out).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { c(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Where a loss beamsplitter sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Ensemble-to-photon coupling, right after readout.
    Source,
    /// Detector inefficiency, right before detection.
    Detector,
}

impl Stage {
    fn label(self) -> &'static str {
        match self {
            Stage::Source => "source",
            Stage::Detector => "detector",
        }
    }
}

/// Coupling and detector efficiencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub eta_e: f64,
    pub eta_d: f64,
}

impl LossModel {
    pub fn new(eta_e: f64, eta_d: f64) -> Result<Self> {
        Ok(LossModel {
            eta_e: check_unit_interval("eta_e", eta_e)?,
            eta_d: check_unit_interval("eta_d", eta_d)?,
        })
    }

    pub fn ideal() -> Self {
        LossModel {
            eta_e: 1.0,
            eta_d: 1.0,
        }
    }

    /// All loss at the source.
    pub fn source_only(eta: f64) -> Result<Self> {
        Self::new(eta, 1.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta_e * self.eta_d
    }

    pub fn is_ideal(&self) -> bool {
        self.eta_e == 1.0 && self.eta_d == 1.0
    }
}

impl Default for LossModel {
    fn default() -> Self {
        Self::ideal()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Beamsplitter { modes: [ModeId; 2], t: f64 },
    PolRotator { modes: [ModeId; 2], theta: f64 },
    Hadamard { modes: [ModeId; 2] },
    /// `(h_a, v_a, h_b, v_b)`.
    Pbs { modes: [ModeId; 4] },
    Swap { modes: [ModeId; 2] },
    Unitary { modes: Vec<ModeId>, matrix: DMatrix<C64> },
    Loss {
        mode: ModeId,
        ancilla: ModeId,
        efficiency: f64,
        stage: Stage,
    },
}

impl Element {
    pub fn modes(&self) -> Vec<ModeId> {
        match self {
            Element::Beamsplitter { modes, .. }
            | Element::PolRotator { modes, .. }
            | Element::Hadamard { modes }
            | Element::Swap { modes } => modes.to_vec(),
            Element::Pbs { modes } => modes.to_vec(),
            Element::Unitary { modes, .. } => modes.clone(),
            Element::Loss { mode, ancilla, .. } => vec![*mode, *ancilla],
        }
    }

    /// Modes the element acts on (ancilla included for loss) and its matrix.
    pub fn matrix(&self) -> Result<DMatrix<C64>> {
        Ok(match self {
            Element::Beamsplitter { t, .. } => beamsplitter_matrix(*t)?,
            Element::PolRotator { theta, .. } => rotator_matrix(*theta),
            Element::Hadamard { .. } => hadamard_matrix(),
            Element::Pbs { .. } => pbs_matrix(),
            Element::Swap { .. } => swap_matrix(),
            Element::Unitary { matrix, .. } => matrix.clone(),
            Element::Loss { efficiency, .. } => beamsplitter_matrix(*efficiency)?,
        })
    }

    pub fn is_loss(&self) -> bool {
        matches!(self, Element::Loss { .. })
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        state.apply_mode_unitary(&self.modes(), &self.matrix()?)
    }
}

/// Ordered list of elements with declared input and detector modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    registry: Arc<ModeRegistry>,
    elements: Vec<Element>,
    inputs: Vec<ModeId>,
    detectors: Vec<ModeId>,
}

impl Network {
    pub fn new(registry: Arc<ModeRegistry>, inputs: &[ModeId], detectors: &[ModeId]) -> Result<Self> {
        registry.check(inputs)?;
        registry.check(detectors)?;
        Ok(Network {
            registry,
            elements: Vec::new(),
            inputs: inputs.to_vec(),
            detectors: detectors.to_vec(),
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn inputs(&self) -> &[ModeId] {
        &self.inputs
    }

    pub fn detectors(&self) -> &[ModeId] {
        &self.detectors
    }

    /// Appends an element after validating its modes and matrix.
    pub fn push(&mut self, element: Element) -> Result<&mut Self> {
        let modes = element.modes();
        self.registry.check(&modes)?;
        check_unitary(&element.matrix()?, modes.len())?;
        self.elements.push(element);
        Ok(self)
    }

    pub fn beamsplitter(&mut self, a: ModeId, b: ModeId, t: f64) -> Result<&mut Self> {
        self.push(Element::Beamsplitter { modes: [a, b], t })
    }

    pub fn rotator(&mut self, h: ModeId, v: ModeId, theta: f64) -> Result<&mut Self> {
        self.push(Element::PolRotator {
            modes: [h, v],
            theta,
        })
    }

    pub fn hadamard(&mut self, h: ModeId, v: ModeId) -> Result<&mut Self> {
        self.push(Element::Hadamard { modes: [h, v] })
    }

    pub fn pbs(&mut self, h_a: ModeId, v_a: ModeId, h_b: ModeId, v_b: ModeId) -> Result<&mut Self> {
        self.push(Element::Pbs {
            modes: [h_a, v_a, h_b, v_b],
        })
    }

    pub fn swap(&mut self, a: ModeId, b: ModeId) -> Result<&mut Self> {
        self.push(Element::Swap { modes: [a, b] })
    }

    pub fn unitary(&mut self, modes: &[ModeId], matrix: DMatrix<C64>) -> Result<&mut Self> {
        self.push(Element::Unitary {
            modes: modes.to_vec(),
            matrix,
        })
    }

    /// Loss beamsplitter routing `1 − efficiency` of `mode` into the mode's
    /// ancilla for `stage`.
    pub fn loss(&mut self, mode: ModeId, efficiency: f64, stage: Stage) -> Result<&mut Self> {
        let anc = self.registry.loss_ancillas(mode)?;
        let ancilla = match stage {
            Stage::Source => anc.source,
            Stage::Detector => anc.detector,
        };
        check_unit_interval("efficiency", efficiency)?;
        self.push(Element::Loss {
            mode,
            ancilla,
            efficiency,
            stage,
        })
    }

    /// Ancilla modes touched by loss elements, in first-use order.
    pub fn loss_ancillas(&self) -> Vec<ModeId> {
        let mut out = Vec::new();
        for e in &self.elements {
            if let Element::Loss { ancilla, .. } = e {
                if !out.contains(ancilla) {
                    out.push(*ancilla);
                }
            }
        }
        out
    }

    /// Applies every element to a pure state without tracing anything.
    pub fn evolve(&self, state: &PureState) -> Result<PureState> {
        let ancillas = self.loss_ancillas();
        state.require_empty(&ancillas)?;
        let mut s = state.clone();
        for e in &self.elements {
            s = e.apply(&s)?;
        }
        Ok(s)
    }

    /// Applies the network and traces out the loss ancillas (which are left
    /// in vacuum and may be reused by later networks).
    pub fn run(&self, state: &PureState) -> Result<MixedState> {
        let out = self.evolve(state)?;
        let anc = self.loss_ancillas();
        if anc.is_empty() {
            Ok(MixedState::from_pure(out))
        } else {
            out.trace_modes(&anc)
        }
    }

    pub fn run_mixed(&self, state: &MixedState) -> Result<MixedState> {
        state.flat_map_branches(|b| self.run(b))
    }

    /// Copy with the loss elements of `self` removed.
    pub fn lossless(&self) -> Self {
        let mut out = self.clone();
        out.elements.retain(|e| !e.is_loss());
        out
    }

    /// Loss elements as `(stage, mode, efficiency)`.
    fn losses(&self) -> Vec<(Stage, ModeId, f64)> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Loss {
                    mode,
                    efficiency,
                    stage,
                    ..
                } => Some((*stage, *mode, *efficiency)),
                _ => None,
            })
            .collect()
    }

    /// Serializes the network with modes referenced by name.
    pub fn to_json(&self) -> String {
        let name = |m: &ModeId| self.registry.name(*m).to_string();
        let names = |ms: &[ModeId]| ms.iter().map(name).collect::<Vec<_>>();
        let elements = self
            .elements
            .iter()
            .map(|e| {
                let modes = names(&e.modes());
                match e {
                    Element::Beamsplitter { t, .. } => ElementSpec::Beamsplitter { modes, t: *t },
                    Element::PolRotator { theta, .. } => ElementSpec::PolRotator { modes, theta: *theta },
                    Element::Hadamard { .. } => ElementSpec::Hadamard { modes },
                    Element::Pbs { .. } => ElementSpec::Pbs { modes },
                    Element::Swap { .. } => ElementSpec::Swap { modes },
                    Element::Unitary { matrix, .. } => ElementSpec::Unitary {
                        modes,
                        matrix: (0..matrix.nrows())
                            .map(|i| (0..matrix.ncols()).map(|j| [matrix[(i, j)].re, matrix[(i, j)].im]).collect())
                            .collect(),
                    },
                    Element::Loss { efficiency, stage, mode, .. } => ElementSpec::Loss {
                        mode: name(mode),
                        efficiency: *efficiency,
                        stage: *stage,
                    },
                }
            })
            .collect();
        let doc = NetworkSpec {
            inputs: names(&self.inputs),
            detectors: names(&self.detectors),
            elements,
        };
        serde_json::to_string_pretty(&doc).expect("network spec serializes")
    }

    /// Parses a document produced by [`to_json`](Self::to_json) against a registry.
    pub fn from_json(registry: Arc<ModeRegistry>, json: &str) -> Result<Self> {
        let doc: NetworkSpec = serde_json::from_str(json).map_err(|e| Error::Network(e.to_string()))?;
        let ids = |ns: &[String]| -> Result<Vec<ModeId>> { ns.iter().map(|n| registry.lookup(n)).collect() };
        let pair = |ns: &[String]| -> Result<[ModeId; 2]> {
            ids(ns)?
                .try_into()
                .map_err(|_| Error::Network("expected two modes".into()))
        };
        let mut net = Network::new(Arc::clone(&registry), &ids(&doc.inputs)?, &ids(&doc.detectors)?)?;
        for spec in &doc.elements {
            match spec {
                ElementSpec::Beamsplitter { modes, t } => {
                    net.push(Element::Beamsplitter { modes: pair(modes)?, t: *t })?;
                }
                ElementSpec::PolRotator { modes, theta } => {
                    net.push(Element::PolRotator { modes: pair(modes)?, theta: *theta })?;
                }
                ElementSpec::Hadamard { modes } => {
                    net.push(Element::Hadamard { modes: pair(modes)? })?;
                }
                ElementSpec::Swap { modes } => {
                    net.push(Element::Swap { modes: pair(modes)? })?;
                }
                ElementSpec::Pbs { modes } => {
                    let m: [ModeId; 4] = ids(modes)?
                        .try_into()
                        .map_err(|_| Error::Network("PBS needs four modes".into()))?;
                    net.push(Element::Pbs { modes: m })?;
                }
                ElementSpec::Unitary { modes, matrix } => {
                    let d = matrix.len();
                    if matrix.iter().any(|row| row.len() != d) {
                        return Err(Error::Network("unitary matrix is not square".into()));
                    }
                    let m = DMatrix::from_fn(d, d, |i, j| C64::new(matrix[i][j][0], matrix[i][j][1]));
                    net.push(Element::Unitary { modes: ids(modes)?, matrix: m })?;
                }
                ElementSpec::Loss { mode, efficiency, stage } => {
                    net.loss(registry.lookup(mode)?, *efficiency, *stage)?;
                }
            }
        }
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkSpec {
    inputs: Vec<String>,
    detectors: Vec<String>,
    elements: Vec<ElementSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ElementSpec {
    Beamsplitter { modes: Vec<String>, t: f64 },
    PolRotator { modes: Vec<String>, theta: f64 },
    Hadamard { modes: Vec<String> },
    Pbs { modes: Vec<String> },
    Swap { modes: Vec<String> },
    Unitary { modes: Vec<String>, matrix: Vec<Vec<[f64; 2]>> },
    Loss { mode: String, efficiency: f64, stage: Stage },
}

/// Adds η_E loss on every input mode (before all elements) and η_D loss on
/// every detector mode (after all elements). Unit efficiencies add nothing.
pub fn insert_loss(network: &Network, loss: LossModel) -> Result<Network> {
    let mut out = Network::new(Arc::clone(&network.registry), &network.inputs, &network.detectors)?;
    if loss.eta_e < 1.0 {
        for m in &network.inputs {
            out.loss(*m, loss.eta_e, Stage::Source)?;
        }
    }
    for e in &network.elements {
        out.push(e.clone())?;
    }
    if loss.eta_d < 1.0 {
        for m in &network.detectors {
            out.loss(*m, loss.eta_d, Stage::Detector)?;
        }
    }
    Ok(out)
}

/// Rewrites a network with source-side and detector-side loss into one with
/// a single `η_E·η_D` loss beamsplitter per input mode, placed before all
/// passive elements.
///
/// Uniform loss on every mode commutes with any passive unitary on those
/// modes, so the two forms give identical detection statistics. Requires a
/// single efficiency per stage and a passive part that keeps the lossy mode
/// set closed.
pub fn commute_loss_to_sources(network: &Network) -> Result<Network> {
    let losses = network.losses();
    let mut eta = 1.0;
    for stage in [Stage::Source, Stage::Detector] {
        let effs: Vec<f64> = losses.iter().filter(|l| l.0 == stage).map(|l| l.2).collect();
        if let Some(&first) = effs.first() {
            if let Some(&other) = effs.iter().find(|&&e| e != first) {
                return Err(Error::UnequalEfficiencies {
                    stage: stage.label(),
                    first,
                    other,
                });
            }
            eta *= first;
        }
    }
    let passive = network.lossless();
    if losses.is_empty() || eta == 1.0 {
        return Ok(passive);
    }
    // Every mode mixed by the passive part with a lossy mode must itself be
    // lossy at the same rate.
    let stage_modes =
        |stage: Stage| -> Vec<ModeId> { losses.iter().filter(|l| l.0 == stage).map(|l| l.1).collect() };
    let (src, det) = (stage_modes(Stage::Source), stage_modes(Stage::Detector));
    let lossy: Vec<ModeId> = if src.is_empty() { det.clone() } else { src.clone() };
    let same_set = |a: &[ModeId], b: &[ModeId]| a.len() == b.len() && a.iter().all(|m| b.contains(m));
    if !src.is_empty() && !det.is_empty() && !same_set(&src, &det) {
        return Err(Error::Network("source and detector loss act on different mode sets".into()));
    }
    for e in passive.elements() {
        let modes = e.modes();
        let inside = modes.iter().filter(|m| lossy.contains(m)).count();
        if inside != 0 && inside != modes.len() {
            return Err(Error::Network("passive element mixes lossy and lossless modes".into()));
        }
    }
    let mut out = Network::new(Arc::clone(&network.registry), &network.inputs, &network.detectors)?;
    for m in &lossy {
        out.loss(*m, eta, Stage::Source)?;
    }
    for e in passive.elements {
        out.push(e)?;
    }
    Ok(out)
}
