use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::ModeRegistry;
use crate::state::{Cutoff, PureState, C64};

use super::qubit;

/// Simple undirected graph over qubit labels.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ClusterGraph {
    vertices: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

impl ClusterGraph {
    pub fn new<S: AsRef<str>>(vertices: &[S]) -> Result<Self> {
        let mut g = ClusterGraph::default();
        for v in vertices {
            g.add_vertex(v.as_ref())?;
        }
        Ok(g)
    }

    /// Path graph through the labels in order.
    pub fn line<S: AsRef<str>>(vertices: &[S]) -> Result<Self> {
        let mut g = Self::new(vertices)?;
        for w in vertices.windows(2) {
            g.add_edge(w[0].as_ref(), w[1].as_ref())?;
        }
        Ok(g)
    }

    pub fn add_vertex(&mut self, label: &str) -> Result<()> {
        if self.vertices.iter().any(|v| v == label) {
            return Err(Error::InvalidGraph(format!("vertex {label:?} added twice")));
        }
        self.vertices.push(label.to_string());
        Ok(())
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.vertices
            .iter()
            .position(|v| v == label)
            .ok_or_else(|| Error::InvalidGraph(format!("no vertex {label:?}")))
    }

    fn key(&self, a: &str, b: &str) -> Result<(usize, usize)> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop on {a:?}")));
        }
        Ok((i.min(j), i.max(j)))
    }

    pub fn add_edge(&mut self, a: &str, b: &str) -> Result<()> {
        let k = self.key(a, b)?;
        self.edges.insert(k);
        Ok(())
    }

    /// Adds the edge if absent, removes it if present.
    pub fn toggle_edge(&mut self, a: &str, b: &str) -> Result<()> {
        let k = self.key(a, b)?;
        if !self.edges.remove(&k) {
            self.edges.insert(k);
        }
        Ok(())
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.key(a, b).map(|k| self.edges.contains(&k)).unwrap_or(false)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(i, j)| (self.vertices[i].as_str(), self.vertices[j].as_str()))
            .collect()
    }

    pub fn neighbors(&self, label: &str) -> Result<Vec<&str>> {
        let i = self.index(label)?;
        Ok(self
            .edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(self.vertices[b].as_str()),
                (_, true) => Some(self.vertices[a].as_str()),
                _ => None,
            })
            .collect())
    }

    /// Graph with the vertex and its edges removed.
    pub fn delete_vertex(&self, label: &str) -> Result<Self> {
        let i = self.index(label)?;
        let mut g = ClusterGraph::new(&self.vertices.iter().filter(|v| *v != label).collect::<Vec<_>>())?;
        for &(a, b) in &self.edges {
            if a != i && b != i {
                g.add_edge(&self.vertices[a], &self.vertices[b])?;
            }
        }
        Ok(g)
    }

    /// Disjoint union; labels must not overlap.
    pub fn union(&self, other: &ClusterGraph) -> Result<Self> {
        let mut g = self.clone();
        for v in &other.vertices {
            g.add_vertex(v)?;
        }
        for (a, b) in other.edges() {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }
}

/// Logical-basis state on the listed qubits: `amplitudes[x]` multiplies the
/// basis state whose bit `k` (most significant first) selects `V` (1) or
/// `H` (0) on `qubits[k]`. Other modes are vacuum. Not normalized.
pub fn logical_state<S: AsRef<str>>(
    registry: Arc<ModeRegistry>,
    cutoff: Cutoff,
    qubits: &[S],
    amplitudes: &[C64],
) -> Result<PureState> {
    let n = qubits.len();
    if amplitudes.len() != 1 << n {
        return Err(Error::InvalidGraph(format!(
            "{} amplitudes for {n} qubits",
            amplitudes.len()
        )));
    }
    let modes = qubits
        .iter()
        .map(|l| qubit(&registry, l.as_ref()).map(|q| q.atomic()))
        .collect::<Result<Vec<_>>>()?;
    let len = registry.len();
    let terms = amplitudes.iter().enumerate().map(|(x, a)| {
        let mut occ = vec![0u8; len];
        for (k, m) in modes.iter().enumerate() {
            let bit = (x >> (n - 1 - k)) & 1;
            occ[m[bit].0] = 1;
        }
        (occ, *a)
    });
    PureState::from_terms(registry, cutoff, terms)
}

/// Normalized cluster state of `graph`: every vertex in `(H+V)/√2`, then a
/// sign `−1` on each edge whose endpoints are both `V`.
pub fn encode_cluster(registry: Arc<ModeRegistry>, cutoff: Cutoff, graph: &ClusterGraph) -> Result<PureState> {
    let n = graph.vertices.len();
    let norm = (0.5f64).powf(n as f64 / 2.0);
    let amps: Vec<C64> = (0..1usize << n)
        .map(|x| {
            let bit = |i: usize| (x >> (n - 1 - i)) & 1;
            let parity = graph.edges.iter().filter(|&&(a, b)| bit(a) & bit(b) == 1).count();
            C64::new(if parity % 2 == 0 { norm } else { -norm }, 0.0)
        })
        .collect();
    logical_state(registry, cutoff, &graph.vertices, &amps)
}
