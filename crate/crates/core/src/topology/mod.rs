//! Network graphs: the families used by the lower-bound constructions, plus
//! an edge-list loader.
//!
//! Every constructor returns a validated [`Topology`]: connected, simple,
//! with its diameter computed by breadth-first search.

mod families;
mod gadget;
mod io;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::NodeId;

pub use families::{build_clique, build_kd, build_line, build_random_connected, KdLayout};
pub use gadget::{build_network_a, build_network_b, validate_copy_property, GadgetParams, NodeMapping};
pub use io::{load_topology, parse_edge_list, save_topology, to_edge_list};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("graph is disconnected: node {0} unreachable from node 0")]
    Disconnected(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    OutOfRange(u32, u32, usize),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("construction infeasible: {0}")]
    Infeasible(String),
    #[error("copy-symmetry property violated at {0}")]
    CopyPropertyViolated(String),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Undirected connected graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    name: String,
    adjacency: Vec<Vec<NodeId>>,
    diameter: u32,
    labels: Vec<String>,
}

impl Topology {
    /// Builds a topology from an edge list. Duplicate edges are merged.
    pub fn from_edges(
        name: impl Into<String>,
        n: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::InvalidParameters("empty graph".into()));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for (u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(TopologyError::OutOfRange(u, v, n));
            }
            if u == v {
                return Err(TopologyError::SelfLoop(NodeId(u)));
            }
            sets[u as usize].insert(NodeId(v));
            sets[v as usize].insert(NodeId(u));
        }
        let adjacency: Vec<Vec<NodeId>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let diameter = compute_diameter(&adjacency)?;
        Ok(Topology {
            name: name.into(),
            adjacency,
            diameter,
            labels: vec![String::new(); n],
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n(), "one label per node");
        self.labels = labels;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn diameter(&self) -> u32 {
        self.diameter
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n()).map(NodeId::from)
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u.index()]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u.index()].len()
    }

    pub fn are_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u.index()].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(smaller, larger)`.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            for &v in nbrs {
                if (u as u32) < v.0 {
                    out.push((NodeId(u as u32), v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn label(&self, u: NodeId) -> &str {
        &self.labels[u.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// First node carrying exactly this label.
    pub fn find_label(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label).map(NodeId::from)
    }

    pub fn nodes_with_label_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.starts_with(prefix))
            .map(|(i, _)| NodeId::from(i))
    }

    /// Hop distances from `source` to every node.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<u32>> {
        bfs(&self.adjacency, source)
    }
}

/// Diameter as the maximum BFS eccentricity.
pub fn diameter(topology: &Topology) -> u32 {
    topology.diameter
}

fn bfs(adjacency: &[Vec<NodeId>], source: NodeId) -> Vec<Option<u32>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source.index()] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.index()].expect("queued nodes have a distance");
        for &v in &adjacency[u.index()] {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn compute_diameter(adjacency: &[Vec<NodeId>]) -> Result<u32, TopologyError> {
    let mut best = 0;
    for u in 0..adjacency.len() {
        let dist = bfs(adjacency, NodeId::from(u));
        for (v, d) in dist.iter().enumerate() {
            match d {
                Some(d) => best = best.max(*d),
                None => return Err(TopologyError::Disconnected(NodeId::from(v))),
            }
        }
    }
    Ok(best)
}
