use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Topology, TopologyError};
use crate::types::NodeId;

/// Complete graph on `n` nodes.
pub fn build_clique(n: usize) -> Result<Topology, TopologyError> {
    if n < 1 {
        return Err(TopologyError::InvalidParameters(format!(
            "clique needs at least 1 node, got {n}"
        )));
    }
    let n32 = n as u32;
    let edges = (0..n32).flat_map(|u| (u + 1..n32).map(move |v| (u, v)));
    Topology::from_edges(format!("clique:n={n}"), n, edges)
}

/// `L_d`: `d + 1` nodes in a line, node `i` adjacent to `i + 1`.
pub fn build_line(d: usize) -> Result<Topology, TopologyError> {
    if d < 1 {
        return Err(TopologyError::InvalidParameters(format!("line needs d >= 1, got {d}")));
    }
    let edges = (0..d as u32).map(|i| (i, i + 1));
    Topology::from_edges(format!("line:d={d}"), d + 1, edges)
}

/// Node groups of a `K_D` network, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KdLayout {
    pub first: Vec<NodeId>,
    pub second: Vec<NodeId>,
    /// The `L_{D-1}` line; `middle[0]` is the endpoint adjacent to both copies.
    pub middle: Vec<NodeId>,
}

impl KdLayout {
    pub fn for_diameter(d: usize) -> Self {
        let first = (0..=d).map(NodeId::from).collect();
        let second = (d + 1..=2 * d + 1).map(NodeId::from).collect();
        let middle = (2 * d + 2..3 * d + 2).map(NodeId::from).collect();
        KdLayout { first, second, middle }
    }

    pub fn endpoint(&self) -> NodeId {
        self.middle[0]
    }

    /// Recovers the layout from `K_D` labels.
    pub fn from_topology(t: &Topology) -> Option<Self> {
        let first: Vec<_> = t.nodes_with_label_prefix("L1:").collect();
        let second: Vec<_> = t.nodes_with_label_prefix("L2:").collect();
        let middle: Vec<_> = t.nodes_with_label_prefix("mid:").collect();
        let endpoint = t.find_label("mid:0")?;
        if first.is_empty() || second.is_empty() || middle.first() != Some(&endpoint) {
            return None;
        }
        Some(KdLayout { first, second, middle })
    }
}

/// `K_D`: two copies of `L_D` plus an `L_{D-1}` line whose endpoint is
/// adjacent to every node of both copies.
///
/// Ids: copy one is `0..=D`, copy two `D+1..=2D+1`, the middle line follows
/// with its endpoint first. Labels are `L1:i`, `L2:i`, `mid:j`.
pub fn build_kd(d: usize) -> Result<Topology, TopologyError> {
    if d <= 1 {
        return Err(TopologyError::InvalidParameters(format!("K_D needs D > 1, got {d}")));
    }
    let layout = KdLayout::for_diameter(d);
    let n = 2 * (d + 1) + d;
    let mut edges = Vec::new();
    for copy in [&layout.first, &layout.second] {
        for w in copy.windows(2) {
            edges.push((w[0].0, w[1].0));
        }
        for u in copy {
            edges.push((u.0, layout.endpoint().0));
        }
    }
    for w in layout.middle.windows(2) {
        edges.push((w[0].0, w[1].0));
    }
    let mut labels = Vec::with_capacity(n);
    labels.extend((0..=d).map(|i| format!("L1:{i}")));
    labels.extend((0..=d).map(|i| format!("L2:{i}")));
    labels.extend((0..d).map(|j| format!("mid:{j}")));
    Ok(Topology::from_edges(format!("kd:D={d}"), n, edges)?.with_labels(labels))
}

/// Random connected graph: a random spanning tree plus each remaining pair
/// independently with probability `extra_edge_prob`.
pub fn build_random_connected(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidParameters(format!(
            "random graph needs n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        edges.push((parent, order[i]));
    }
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.gen_bool(extra_edge_prob) {
                edges.push((u, v));
            }
        }
    }
    Topology::from_edges(format!("random:n={n},seed={seed}"), n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clique_edge_counts() {
        for (n, e) in [(2, 1), (5, 10), (8, 28)] {
            let t = build_clique(n).unwrap();
            assert_eq!(t.edge_count(), e);
            assert_eq!(t.diameter(), 1);
        }
        assert!(build_clique(0).is_err());
        assert_eq!(build_clique(1).unwrap().diameter(), 0);
    }

    #[test]
    fn line_shapes() {
        let t = build_line(1).unwrap();
        assert_eq!((t.n(), t.edge_count()), (2, 1));
        assert_eq!(build_line(4).unwrap().diameter(), 4);
        assert_eq!(build_line(4).unwrap().n(), 5);
        let t = build_line(9).unwrap();
        assert_eq!((t.n(), t.diameter()), (10, 9));
        assert_eq!(build_line(7).unwrap().diameter(), 7);
        assert!(build_line(0).is_err());
    }

    #[test]
    fn kd_sizes() {
        assert_eq!(build_kd(2).unwrap().n(), 8);
        let k4 = build_kd(4).unwrap();
        assert_eq!((k4.n(), k4.diameter()), (14, 4));
        let layout = KdLayout::from_topology(&k4).unwrap();
        assert_eq!(layout.middle.len(), 4);
        assert_eq!(layout, KdLayout::for_diameter(4));
        assert_eq!(build_kd(6).unwrap().diameter(), 6);
        assert!(build_kd(1).is_err());
    }

    #[test]
    fn kd_diameter_range() {
        for d in 2..=12 {
            let t = build_kd(d).unwrap();
            assert_eq!(t.diameter() as usize, d, "K_{d}");
            assert_eq!(t.n(), 2 * (d + 1) + d);
        }
    }

    #[test]
    fn kd_endpoint_touches_both_copies() {
        let t = build_kd(3).unwrap();
        let layout = KdLayout::from_topology(&t).unwrap();
        for u in layout.first.iter().chain(&layout.second) {
            assert!(t.are_adjacent(*u, layout.endpoint()));
        }
        assert_eq!(t.degree(layout.endpoint()), 2 * 4 + 1);
    }

    #[test]
    fn random_graph_is_connected_and_seeded() {
        let a = build_random_connected(12, 0.15, 7).unwrap();
        let b = build_random_connected(12, 0.15, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 12);
        assert!(a.edge_count() >= 11);
    }
}
