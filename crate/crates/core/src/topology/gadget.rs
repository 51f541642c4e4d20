//! Gadget networks A and B used by the anonymous-algorithm impossibility
//! construction.
//!
//! A gadget is a chain `a_1 .. a_d` (with `a_d` and the padding nodes
//! `a*_1 .. a*_k` hanging off `a_{d-1}`), a path `a_1 - a+_2 - a+_3 - a+_4`,
//! and a connector node `c` adjacent to `a_1`, `a+_3` and `a+_4`.
//!
//! Network A joins two gadgets through a bridge `q` adjacent to both `c`
//! nodes and to a clique `C` that pads the node count. Network B has three
//! gadget copies and no bridge; the connector edges `c - a+_3` and
//! `c - a+_4` are wired across copies by cyclic shifts so that every copy of
//! a gadget node sees exactly one copy of each of its gadget neighbours.
//!
//! Gadget positions are numbered `c = 0`, `a_i = i`, `a+_2..a+_4 = d+1..d+3`,
//! `a*_j = d+3+j`. Network A places gadget copy `b` at ids `b*g .. (b+1)*g`,
//! then `q`, then `C`. Network B places copy `i` at ids `i*g .. (i+1)*g`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Topology, TopologyError};
use crate::types::NodeId;

/// Parameters of the gadget construction for a requested `(D, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetParams {
    pub diameter: usize,
    /// `(D - 2) / 2`.
    pub d: usize,
    /// Smallest `k >= 0` with `3(d + k) + 12 >= n`.
    pub k: usize,
    /// `3(d + k) + 12`, the size of both networks.
    pub n_prime: usize,
}

impl GadgetParams {
    pub fn new(diameter: usize, n: usize) -> Result<Self, TopologyError> {
        if diameter < 4 || !diameter.is_multiple_of(2) {
            return Err(TopologyError::InvalidParameters(format!(
                "gadget networks need an even diameter >= 4, got {diameter}"
            )));
        }
        if n < diameter {
            return Err(TopologyError::InvalidParameters(format!(
                "gadget networks need n >= D, got n={n}, D={diameter}"
            )));
        }
        let d = (diameter - 2) / 2;
        let k = n.saturating_sub(3 * d + 12).div_ceil(3);
        debug_assert!(3 * (d + k) + 12 >= n);
        debug_assert!(k == 0 || 3 * (d + k - 1) + 12 < n);
        if d == 1 && k > 0 {
            // a*_j hang off a_{d-1}, which does not exist when d = 1.
            return Err(TopologyError::Infeasible(format!(
                "D=4 admits no padding nodes; n={n} exceeds 15"
            )));
        }
        Ok(GadgetParams {
            diameter,
            d,
            k,
            n_prime: 3 * (d + k) + 12,
        })
    }

    /// Nodes per gadget copy, `d + k + 4`.
    pub fn gadget_size(&self) -> usize {
        self.d + self.k + 4
    }

    /// Size of the padding clique `C` in network A.
    pub fn clique_size(&self) -> usize {
        self.n_prime - 2 * self.gadget_size() - 1
    }

    pub fn connector(&self) -> usize {
        0
    }

    pub fn a(&self, i: usize) -> usize {
        debug_assert!((1..=self.d).contains(&i));
        i
    }

    pub fn a_plus(&self, i: usize) -> usize {
        debug_assert!((2..=4).contains(&i));
        self.d + i - 1
    }

    pub fn a_star(&self, j: usize) -> usize {
        debug_assert!((1..=self.k).contains(&j));
        self.d + 3 + j
    }

    pub fn position_label(&self, pos: usize) -> String {
        if pos == 0 {
            "c".to_string()
        } else if pos <= self.d {
            format!("a_{pos}")
        } else if pos <= self.d + 3 {
            format!("a+_{}", pos - self.d + 1)
        } else {
            format!("a*_{}", pos - self.d - 3)
        }
    }

    /// Gadget edges as position pairs.
    pub fn gadget_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 1..self.d {
            edges.push((self.a(i), self.a(i + 1)));
        }
        for j in 1..=self.k {
            edges.push((self.a(self.d - 1), self.a_star(j)));
        }
        edges.push((self.a(1), self.a_plus(2)));
        edges.push((self.a_plus(2), self.a_plus(3)));
        edges.push((self.a_plus(3), self.a_plus(4)));
        edges.push((self.connector(), self.a(1)));
        edges.push((self.connector(), self.a_plus(3)));
        edges.push((self.connector(), self.a_plus(4)));
        if self.d == 1 {
            // With a one-node chain, a+_2 would sit two hops from c and
            // stretch network A to diameter 6; the shortcut keeps it at 4.
            edges.push((self.connector(), self.a_plus(2)));
        }
        edges
    }

    /// Cross-copy shift applied to each gadget edge in network B: copy `i`
    /// of the first endpoint joins copy `(i + shift) % 3` of the second.
    pub fn network_b_shifts(&self) -> Vec<((usize, usize), usize)> {
        self.gadget_edges()
            .into_iter()
            .map(|e| {
                let shift = if e == (self.connector(), self.a_plus(3)) {
                    1
                } else if e == (self.connector(), self.a_plus(4)) {
                    2
                } else {
                    0
                };
                (e, shift)
            })
            .collect()
    }

    fn gadget_neighbors(&self) -> Vec<BTreeSet<usize>> {
        let mut nbrs = vec![BTreeSet::new(); self.gadget_size()];
        for (u, v) in self.gadget_edges() {
            nbrs[u].insert(v);
            nbrs[v].insert(u);
        }
        nbrs
    }
}

/// Correspondence between gadget positions in network A and their three
/// copies `S_u` in network B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMapping {
    pub params: GadgetParams,
}

impl NodeMapping {
    pub fn new(params: GadgetParams) -> Self {
        NodeMapping { params }
    }

    pub fn positions(&self) -> std::ops::Range<usize> {
        0..self.params.gadget_size()
    }

    /// Node of network A at `pos` in gadget copy `copy` (0 or 1).
    pub fn a_node(&self, copy: usize, pos: usize) -> NodeId {
        assert!(copy < 2);
        NodeId::from(copy * self.params.gadget_size() + pos)
    }

    /// Node of network B at `pos` in copy `copy` (0..3).
    pub fn b_node(&self, copy: usize, pos: usize) -> NodeId {
        assert!(copy < 3);
        NodeId::from(copy * self.params.gadget_size() + pos)
    }

    /// `S_u` for the gadget node at `pos`.
    pub fn copies(&self, pos: usize) -> [NodeId; 3] {
        [0, 1, 2].map(|i| self.b_node(i, pos))
    }

    pub fn bridge(&self) -> NodeId {
        NodeId::from(2 * self.params.gadget_size())
    }

    /// `(A node, B node)` pairs relating gadget copy `copy` of A to B.
    pub fn pairs(&self, copy: usize) -> Vec<(NodeId, NodeId)> {
        self.positions()
            .flat_map(|pos| {
                let a = self.a_node(copy, pos);
                self.copies(pos).into_iter().map(move |b| (a, b))
            })
            .collect()
    }
}

/// Network A for diameter `D` and requested size `n`.
pub fn build_network_a(diameter: usize, n: usize) -> Result<(Topology, GadgetParams), TopologyError> {
    let params = GadgetParams::new(diameter, n)?;
    let g = params.gadget_size();
    let q = 2 * g;
    let clique: Vec<usize> = (q + 1..params.n_prime).collect();
    let mut edges = Vec::new();
    let mut labels = vec![String::new(); params.n_prime];
    for copy in 0..2 {
        let base = copy * g;
        for (u, v) in params.gadget_edges() {
            edges.push(((base + u) as u32, (base + v) as u32));
        }
        for pos in 0..g {
            labels[base + pos] = format!("gadget-{copy}:{}", params.position_label(pos));
        }
        edges.push((q as u32, (base + params.connector()) as u32));
    }
    labels[q] = "q".to_string();
    for (j, &u) in clique.iter().enumerate() {
        labels[u] = format!("C:{j}");
        edges.push((q as u32, u as u32));
        for &v in &clique[j + 1..] {
            edges.push((u as u32, v as u32));
        }
    }
    let topology = Topology::from_edges(format!("netA:D={diameter},n={n}"), params.n_prime, edges)?.with_labels(labels);
    check_size_and_diameter(&topology, &params)?;
    Ok((topology, params))
}

/// Network B for diameter `D` and requested size `n`, validated against the
/// copy-symmetry property before it is returned.
pub fn build_network_b(diameter: usize, n: usize) -> Result<(Topology, NodeMapping), TopologyError> {
    let params = GadgetParams::new(diameter, n)?;
    let topology = network_b_from_shifts(&params, &params.network_b_shifts(), diameter, n)?;
    let mapping = NodeMapping::new(params);
    validate_copy_property(&params, &topology, &mapping)?;
    check_size_and_diameter(&topology, &params)?;
    Ok((topology, mapping))
}

fn network_b_from_shifts(
    params: &GadgetParams,
    shifts: &[((usize, usize), usize)],
    diameter: usize,
    n: usize,
) -> Result<Topology, TopologyError> {
    let g = params.gadget_size();
    let mut edges = Vec::new();
    let mut labels = vec![String::new(); 3 * g];
    for copy in 0..3 {
        for &((u, v), shift) in shifts {
            let other = (copy + shift) % 3;
            edges.push(((copy * g + u) as u32, (other * g + v) as u32));
        }
        for pos in 0..g {
            labels[copy * g + pos] = format!("copy-{copy}:{}", params.position_label(pos));
        }
    }
    Ok(Topology::from_edges(format!("netB:D={diameter},n={n}"), 3 * g, edges)?.with_labels(labels))
}

fn check_size_and_diameter(t: &Topology, params: &GadgetParams) -> Result<(), TopologyError> {
    if t.n() != params.n_prime || t.diameter() as usize != params.diameter {
        return Err(TopologyError::Infeasible(format!(
            "{} has size {} and diameter {}, expected {} and {}",
            t.name(),
            t.n(),
            t.diameter(),
            params.n_prime,
            params.diameter
        )));
    }
    Ok(())
}

/// Checks that for every gadget node `u`, every copy `u' in S_u`, and every
/// gadget neighbour `v` of `u`, `u'` is adjacent to exactly one node of
/// `S_v`, and that `u'` has no other edges.
pub fn validate_copy_property(params: &GadgetParams, b: &Topology, mapping: &NodeMapping) -> Result<(), TopologyError> {
    if b.n() != 3 * params.gadget_size() {
        return Err(TopologyError::CopyPropertyViolated(format!(
            "network has {} nodes, expected {}",
            b.n(),
            3 * params.gadget_size()
        )));
    }
    let nbrs = params.gadget_neighbors();
    for pos in mapping.positions() {
        for u_copy in mapping.copies(pos) {
            let actual: BTreeSet<NodeId> = b.neighbors(u_copy).iter().copied().collect();
            let mut explained = BTreeSet::new();
            for &v_pos in &nbrs[pos] {
                let hits: Vec<NodeId> = mapping
                    .copies(v_pos)
                    .into_iter()
                    .filter(|v| actual.contains(v))
                    .collect();
                if hits.len() != 1 {
                    return Err(TopologyError::CopyPropertyViolated(format!(
                        "node {u_copy} ({}) touches {} copies of {}",
                        b.label(u_copy),
                        hits.len(),
                        params.position_label(v_pos)
                    )));
                }
                explained.insert(hits[0]);
            }
            if let Some(extra) = actual.difference(&explained).next() {
                return Err(TopologyError::CopyPropertyViolated(format!(
                    "node {u_copy} ({}) has an extra edge to {extra}",
                    b.label(u_copy)
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_for_small_cases() {
        let p = GadgetParams::new(4, 4).unwrap();
        assert_eq!((p.d, p.k, p.n_prime), (1, 0, 15));
        assert_eq!(p.gadget_size(), 5);
        assert_eq!(p.clique_size(), 4);

        let p = GadgetParams::new(8, 30).unwrap();
        // d = 3: 3(3 + k) + 12 >= 30 first holds at k = 3.
        assert_eq!((p.d, p.k, p.n_prime), (3, 3, 30));
        let p = GadgetParams::new(8, 31).unwrap();
        assert_eq!((p.k, p.n_prime), (4, 33));
    }

    #[test]
    fn params_reject_bad_inputs() {
        assert!(GadgetParams::new(5, 10).is_err());
        assert!(GadgetParams::new(2, 10).is_err());
        assert!(GadgetParams::new(6, 5).is_err());
        assert!(matches!(GadgetParams::new(4, 16), Err(TopologyError::Infeasible(_))));
    }

    #[test]
    fn network_a_structure() {
        let (a, p) = build_network_a(6, 6).unwrap();
        assert_eq!((a.n(), a.diameter()), (18, 6));
        let q = a.find_label("q").unwrap();
        assert_eq!(a.degree(q), 2 + p.clique_size());
        let c0 = a.find_label("gadget-0:c").unwrap();
        assert!(a.are_adjacent(q, c0));
        assert_eq!(a.degree(c0), 4);
    }

    #[test]
    fn one_node_chain_gets_connector_shortcut() {
        let (a, _) = build_network_a(4, 4).unwrap();
        assert_eq!((a.n(), a.diameter()), (15, 4));
        let c0 = a.find_label("gadget-0:c").unwrap();
        let a2 = a.find_label("gadget-0:a+_2").unwrap();
        assert!(a.are_adjacent(c0, a2));
    }

    #[test]
    fn network_b_matches_figure_wiring() {
        let (b, m) = build_network_b(6, 6).unwrap();
        let p = m.params;
        // c of copy 0 reaches a+_3 of copy 1 and a+_4 of copy 2.
        let c0 = m.b_node(0, p.connector());
        assert!(b.are_adjacent(c0, m.b_node(1, p.a_plus(3))));
        assert!(b.are_adjacent(c0, m.b_node(2, p.a_plus(4))));
        assert_eq!(b.degree(c0), 3);
    }

    #[test]
    fn claim_sizes_and_diameters() {
        for diameter in [4usize, 6, 8, 10] {
            for n in [diameter, diameter + 7, 3 * diameter + 20] {
                if diameter == 4 && n > 15 {
                    continue;
                }
                let (a, p) = build_network_a(diameter, n).unwrap();
                let (b, _) = build_network_b(diameter, n).unwrap();
                assert_eq!(a.n(), p.n_prime);
                assert_eq!(b.n(), p.n_prime);
                assert_eq!(a.diameter() as usize, diameter);
                assert_eq!(b.diameter() as usize, diameter);
                assert!(p.n_prime >= n);
            }
        }
    }

    #[test]
    fn rewired_edge_breaks_copy_property() {
        let (b, m) = build_network_b(6, 6).unwrap();
        let p = m.params;
        let c0 = m.b_node(0, p.connector());
        let from = m.b_node(1, p.a_plus(3));
        let to = m.b_node(2, p.a_plus(3));
        let edges = b.edges().into_iter().map(|(u, v)| {
            if (u, v) == (c0.min(from), c0.max(from)) {
                (c0.0, to.0)
            } else {
                (u.0, v.0)
            }
        });
        let mutated = Topology::from_edges("mutant", b.n(), edges).unwrap();
        assert!(matches!(
            validate_copy_property(&p, &mutated, &m),
            Err(TopologyError::CopyPropertyViolated(_))
        ));
    }

    #[test]
    fn mapping_pairs_cover_every_copy() {
        let (_, m) = build_network_b(6, 6).unwrap();
        let pairs = m.pairs(1);
        assert_eq!(pairs.len(), 3 * m.params.gadget_size());
        let bs: BTreeSet<_> = pairs.iter().map(|(_, b)| *b).collect();
        assert_eq!(bs.len(), 3 * m.params.gadget_size());
    }
}
