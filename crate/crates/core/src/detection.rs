//! Photon-number-resolving detection and heralded post-selection.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::correction::{apply_corrections_mixed, Correction};
use crate::error::Result;
use crate::registry::ModeRegistry;
use crate::registry::ModeId;
use crate::state::{MixedState, PureState};

/// Photon counts on an ordered list of detector modes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClickPattern {
    pub modes: Vec<ModeId>,
    pub counts: Vec<u8>,
}

impl ClickPattern {
    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&n| n as u32).sum()
    }

    /// Count on a given detector mode.
    pub fn count(&self, mode: ModeId) -> u8 {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .map(|i| self.counts[i])
            .unwrap_or(0)
    }

    /// Detector modes that saw at least one photon.
    pub fn clicked(&self) -> Vec<ModeId> {
        self.modes
            .iter()
            .zip(&self.counts)
            .filter(|(_, n)| **n > 0)
            .map(|(m, _)| *m)
            .collect()
    }

    /// `name=count` pairs joined by spaces.
    pub fn describe(&self, registry: &ModeRegistry) -> String {
        self.modes
            .iter()
            .zip(&self.counts)
            .map(|(m, n)| format!("{}={}", registry.name(*m), n))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.counts {
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// One detection outcome: absolute probability and the post-measurement
/// state with the detector modes reset to vacuum.
#[derive(Clone, Debug)]
pub struct Detection {
    pub pattern: ClickPattern,
    pub probability: f64,
    pub state: MixedState,
}

/// Full branch decomposition of a pure state over `detectors`, in pattern order.
pub fn measure(state: &PureState, detectors: &[ModeId]) -> Result<Vec<Detection>> {
    measure_mixed(&MixedState::from_pure(state.clone()), detectors)
}

/// Full branch decomposition of a mixture. Branches with the same pattern
/// are collected into one mixed post-measurement state.
pub fn measure_mixed(state: &MixedState, detectors: &[ModeId]) -> Result<Vec<Detection>> {
    let mut groups: BTreeMap<Vec<u8>, MixedState> = BTreeMap::new();
    for branch in state.branches() {
        for (counts, piece) in branch.split_on(detectors)? {
            groups
                .entry(counts)
                .or_insert_with(|| MixedState::empty(state.registry().clone(), state.cutoff()))
                .push(piece)?;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(counts, st)| Detection {
            pattern: ClickPattern {
                modes: detectors.to_vec(),
                counts,
            },
            probability: st.total_weight(),
            state: st,
        })
        .filter(|d| d.probability > 0.0)
        .collect())
}

/// Pattern probabilities only.
pub fn distribution(state: &MixedState, detectors: &[ModeId]) -> Result<BTreeMap<Vec<u8>, f64>> {
    Ok(measure_mixed(state, detectors)?
        .into_iter()
        .map(|d| (d.pattern.counts, d.probability))
        .collect())
}

/// Adds independent dark counts: each detector registers one extra count
/// with probability `rate`.
pub fn with_dark_counts(dist: &BTreeMap<Vec<u8>, f64>, rate: f64) -> BTreeMap<Vec<u8>, f64> {
    if rate == 0.0 {
        return dist.clone();
    }
    let mut out = BTreeMap::new();
    for (counts, p) in dist {
        let d = counts.len();
        for mask in 0u32..(1 << d) {
            let k = mask.count_ones() as i32;
            let w = rate.powi(k) * (1.0 - rate).powi(d as i32 - k);
            let mut c = counts.clone();
            for (i, n) in c.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *n += 1;
                }
            }
            *out.entry(c).or_insert(0.0) += p * w;
        }
    }
    out
}

/// Writes `pattern,probability` rows with a header naming the detector modes.
pub fn write_distribution_csv<W: Write>(
    out: W,
    registry: &ModeRegistry,
    detectors: &[ModeId],
    dist: &BTreeMap<Vec<u8>, f64>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&str> = detectors.iter().map(|m| registry.name(*m)).collect();
    w.write_record([names.join("|").as_str(), "probability"])?;
    for (counts, p) in dist {
        let pattern: Vec<String> = counts.iter().map(|n| n.to_string()).collect();
        w.write_record([pattern.join("|"), format!("{p:.12e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Maps each pattern to `Some(corrections)` if it is accepted.
pub struct HeraldRule<'a> {
    pub name: &'static str,
    decide: Box<dyn Fn(&ClickPattern) -> Option<Vec<Correction>> + 'a>,
}

impl<'a> HeraldRule<'a> {
    pub fn new<F>(name: &'static str, decide: F) -> Self
    where
        F: Fn(&ClickPattern) -> Option<Vec<Correction>> + 'a,
    {
        HeraldRule {
            name,
            decide: Box::new(decide),
        }
    }

    pub fn reject_all() -> Self {
        Self::new("reject-all", |_| None)
    }

    pub fn decide(&self, pattern: &ClickPattern) -> Option<Vec<Correction>> {
        (self.decide)(pattern)
    }
}

pub enum Execution<'r> {
    /// Keep every accepted branch with its exact probability.
    Analytic,
    /// Draw one pattern from the outcome distribution.
    Sampled(&'r mut dyn RngCore),
}

impl Execution<'_> {
    pub fn is_analytic(&self) -> bool {
        matches!(self, Execution::Analytic)
    }

    /// Reborrows for a nested call.
    pub fn reborrow(&mut self) -> Execution<'_> {
        match self {
            Execution::Analytic => Execution::Analytic,
            Execution::Sampled(rng) => Execution::Sampled(&mut **rng),
        }
    }
}

/// A heralded branch with the corrections its pattern calls for.
#[derive(Clone, Debug)]
pub struct HeraldedBranch {
    pub pattern: ClickPattern,
    /// Absolute probability mass.
    pub probability: f64,
    pub state: MixedState,
    pub accepted: bool,
    pub corrections: Vec<Correction>,
}

impl HeraldedBranch {
    pub fn corrected(&self) -> Result<MixedState> {
        apply_corrections_mixed(&self.state, &self.corrections)
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub success: bool,
    /// Accepted probability relative to the incoming weight (analytic), or
    /// the probability of the drawn pattern (sampled).
    pub probability: f64,
    /// Accepted branches (analytic) or the single drawn branch (sampled).
    pub branches: Vec<HeraldedBranch>,
    /// Qubits whose ensembles were read out and destroyed.
    pub consumed: Vec<String>,
}

impl ProtocolOutcome {
    /// All branch states merged, without corrections.
    pub fn state(&self) -> Result<MixedState> {
        self.merge(|b| Ok(b.state.clone()))
    }

    /// All branch states merged after applying each branch's corrections.
    pub fn corrected_state(&self) -> Result<MixedState> {
        self.merge(HeraldedBranch::corrected)
    }

    fn merge<F: Fn(&HeraldedBranch) -> Result<MixedState>>(&self, f: F) -> Result<MixedState> {
        let first = self
            .branches
            .first()
            .ok_or_else(|| crate::error::Error::HeraldFailed {
                pattern: "no branches".into(),
            })?;
        let mut out = MixedState::empty(first.state.registry().clone(), first.state.cutoff());
        for b in &self.branches {
            out.extend(f(b)?)?;
        }
        Ok(out)
    }
}

/// Applies a herald rule to a complete set of detection branches.
pub fn herald(branches: Vec<Detection>, rule: &HeraldRule<'_>, exec: Execution<'_>) -> ProtocolOutcome {
    let incoming: f64 = branches.iter().map(|d| d.probability).sum();
    match exec {
        Execution::Analytic => {
            let mut accepted = Vec::new();
            let mut p = 0.0;
            for d in branches {
                if let Some(corrections) = rule.decide(&d.pattern) {
                    p += d.probability;
                    accepted.push(HeraldedBranch {
                        pattern: d.pattern,
                        probability: d.probability,
                        state: d.state,
                        accepted: true,
                        corrections,
                    });
                }
            }
            let probability = if incoming > 0.0 { p / incoming } else { 0.0 };
            ProtocolOutcome {
                success: probability > 0.0,
                probability,
                branches: accepted,
                consumed: Vec::new(),
            }
        }
        Execution::Sampled(rng) => {
            let drawn = sample_index(&branches, incoming, rng);
            let d = branches.into_iter().nth(drawn).expect("non-empty distribution");
            let corrections = rule.decide(&d.pattern);
            let probability = d.probability / incoming;
            ProtocolOutcome {
                success: corrections.is_some(),
                probability,
                branches: vec![HeraldedBranch {
                    accepted: corrections.is_some(),
                    corrections: corrections.unwrap_or_default(),
                    pattern: d.pattern,
                    probability: d.probability,
                    state: d.state,
                }],
                consumed: Vec::new(),
            }
        }
    }
}

fn sample_index(branches: &[Detection], total: f64, rng: &mut dyn RngCore) -> usize {
    let weights: Vec<f64> = branches.iter().map(|d| d.probability).collect();
    draw(&weights, total, rng)
}

/// Index drawn with probability `weights[i] / total`.
pub fn draw(weights: &[f64], total: f64, rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
