//! The unified IDNC conflict graph.
//!
//! A vertex `v(i,k,l)` stands for "device Ri transmits packet Pl to device
//! Rk"; one is generated for every neighbor Rk of a potential transmitter Ri
//! and every packet in Has(Ri) ∩ Wants(Rk). Two vertices are joined by an
//! edge when selecting both would break instant decodability (coding rules
//! C1–C2, evaluated between vertices of the same transmitter) or collide on
//! the shared channel (transmission rules C3–C5, between different
//! transmitters):
//!
//! - C1: same targeted device, different packets;
//! - C2: different targeted devices, different packets, and at least one
//!   target lacks the other packet, so it cannot peel the XOR;
//! - C3: different transmitters aiming at the same device;
//! - C4: different transmitters, different targets, but some target sits in
//!   both coverage zones and would see interference;
//! - C5: a transmitter is itself targeted by the other vertex (a device
//!   cannot send and receive in the same slot).
//!
//! Every feasible slot decision is an independent set of this graph; the
//! action space of the schedulers is the family of maximal independent sets,
//! enumerated with Bron–Kerbosch pivoting on the complement graph.
//!
//! Adjacency is recomputed from vertex endpoints and per-device bitmasks on
//! demand; nothing quadratic is materialized until enumeration needs it.

use std::fmt;

use thiserror::Error;

use crate::model::{ConnectivityMatrix, DeviceId, PacketId, StatusMatrix};

/// Largest vertex count for which exhaustive maximal-independent-set
/// enumeration is attempted by default.
pub const DEFAULT_VERTEX_CAP: usize = 40;

/// Hard ceiling imposed by the bitset representation of the enumerator.
pub const MAX_ENUMERABLE_VERTICES: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph supports at most 64 devices, got {0}")]
    TooManyDevices(usize),
    #[error("graph supports at most 64 packets, got {0}")]
    TooManyPackets(usize),
    #[error(
        "graph has {vertices} vertices, above the enumeration cap {cap}; \
         use the greedy selector instead"
    )]
    VertexCountExceeded { vertices: usize, cap: usize },
    #[error("status matrix has {got} devices but connectivity matrix has {expected}")]
    DeviceCountMismatch { expected: usize, got: usize },
}

/// Conflict rule that induced an edge; the first matching rule is reported,
/// checking the more specific rules first (C1 before C2, C3 and C5 before
/// the catch-all interference rule C4).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum ConflictRule {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl fmt::Display for ConflictRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConflictRule::C1 => write!(f, "C1"),
            ConflictRule::C2 => write!(f, "C2"),
            ConflictRule::C3 => write!(f, "C3"),
            ConflictRule::C4 => write!(f, "C4"),
            ConflictRule::C5 => write!(f, "C5"),
        }
    }
}

/// A candidate transmission: `tx` sends packet `pkt`, targeting `rx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Vertex {
    pub tx: DeviceId,
    pub rx: DeviceId,
    pub pkt: PacketId,
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v({},{},{})", self.tx.0 + 1, self.rx.0 + 1, self.pkt.0 + 1)
    }
}

/// The status matrix restricted to one transmitter's coverage zone (rows)
/// and Has set (columns); vertices are read off its nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalStatusMatrix {
    pub tx: DeviceId,
    pub devices: Vec<DeviceId>,
    pub packets: Vec<PacketId>,
    entries: Vec<u8>,
}

impl LocalStatusMatrix {
    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.packets.len() + col]
    }

    pub fn rows(&self) -> usize {
        self.devices.len()
    }

    pub fn cols(&self) -> usize {
        self.packets.len()
    }
}

/// Local status matrix of device `i`: rows are the coverage zone of `i`,
/// columns its Has set, entries copied from the global status matrix.
pub fn build_lsm(y: &ConnectivityMatrix, f: &StatusMatrix, i: DeviceId) -> LocalStatusMatrix {
    let devices = y.coverage_zone(i);
    let packets = f.has_set(i);
    let mut entries = Vec::with_capacity(devices.len() * packets.len());
    for &k in &devices {
        for &l in &packets {
            entries.push(u8::from(f.is_missing(k, l)));
        }
    }
    LocalStatusMatrix {
        tx: i,
        devices,
        packets,
        entries,
    }
}

/// Set of pairwise non-adjacent vertex indices of some [`IdncGraph`].
/// Members are kept sorted; indices are only meaningful together with the
/// graph they were selected from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndependentSet {
    members: Vec<usize>,
}

impl IndependentSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        IndependentSet { members }
    }

    pub fn empty() -> Self {
        IndependentSet::default()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.binary_search(&idx).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }
}

/// Unified coding/transmission conflict graph for one slot.
#[derive(Clone, Debug)]
pub struct IdncGraph {
    vertices: Vec<Vertex>,
    /// Per-device coverage-zone bitmask over device indices (self included).
    coverage: Vec<u64>,
    /// Per-device Has-set bitmask over packet indices.
    has: Vec<u64>,
}

impl IdncGraph {
    /// Builds the graph for the given connectivity and status matrices.
    /// Vertices are ordered lexicographically by (tx, rx, pkt).
    pub fn build(y: &ConnectivityMatrix, f: &StatusMatrix) -> Result<Self, GraphError> {
        let m = y.device_count();
        let n = f.packet_count();
        if f.device_count() != m {
            return Err(GraphError::DeviceCountMismatch {
                expected: m,
                got: f.device_count(),
            });
        }
        if m > 64 {
            return Err(GraphError::TooManyDevices(m));
        }
        if n > 64 {
            return Err(GraphError::TooManyPackets(n));
        }

        let mut coverage = vec![0u64; m];
        let mut has = vec![0u64; m];
        let mut wants = vec![0u64; m];
        for i in 0..m {
            for k in 0..m {
                if y.connected(DeviceId(i), DeviceId(k)) {
                    coverage[i] |= 1 << k;
                }
            }
            for l in 0..n {
                if f.has(DeviceId(i), PacketId(l)) {
                    has[i] |= 1 << l;
                } else {
                    wants[i] |= 1 << l;
                }
            }
        }

        let mut vertices = Vec::new();
        for i in 0..m {
            for k in 0..m {
                if k == i || coverage[i] & (1 << k) == 0 {
                    continue;
                }
                let mut common = has[i] & wants[k];
                while common != 0 {
                    let l = common.trailing_zeros() as usize;
                    common &= common - 1;
                    vertices.push(Vertex {
                        tx: DeviceId(i),
                        rx: DeviceId(k),
                        pkt: PacketId(l),
                    });
                }
            }
        }
        vertices.sort_unstable();

        Ok(IdncGraph {
            vertices,
            coverage,
            has,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, idx: usize) -> Vertex {
        self.vertices[idx]
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.vertices.binary_search(v).ok()
    }

    fn in_coverage(&self, i: DeviceId, k: DeviceId) -> bool {
        self.coverage[i.0] & (1 << k.0) != 0
    }

    fn has_packet(&self, k: DeviceId, l: PacketId) -> bool {
        self.has[k.0] & (1 << l.0) != 0
    }

    /// First conflict rule violated by the pair, or `None` when the two
    /// transmissions can coexist. Symmetric in its arguments.
    pub fn conflict(&self, u: usize, v: usize) -> Option<ConflictRule> {
        if u == v {
            return None;
        }
        let a = self.vertices[u];
        let b = self.vertices[v];
        if a.tx == b.tx {
            // Coding rules: one XOR combination per transmitter.
            if a.rx == b.rx {
                debug_assert_ne!(a.pkt, b.pkt);
                return Some(ConflictRule::C1);
            }
            if a.pkt != b.pkt
                && !(self.has_packet(b.rx, a.pkt) && self.has_packet(a.rx, b.pkt))
            {
                return Some(ConflictRule::C2);
            }
            None
        } else {
            if a.rx == b.rx {
                return Some(ConflictRule::C3);
            }
            if a.tx == b.rx || b.tx == a.rx {
                return Some(ConflictRule::C5);
            }
            if self.in_coverage(b.tx, a.rx) || self.in_coverage(a.tx, b.rx) {
                return Some(ConflictRule::C4);
            }
            None
        }
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.conflict(u, v).is_some()
    }

    /// All edges as (u, v, rule) with u < v, in index order.
    pub fn edges(&self) -> Vec<(usize, usize, ConflictRule)> {
        let n = self.vertices.len();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if let Some(rule) = self.conflict(u, v) {
                    out.push((u, v, rule));
                }
            }
        }
        out
    }

    pub fn is_independent(&self, members: &[usize]) -> bool {
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                if self.adjacent(u, v) {
                    return false;
                }
            }
        }
        true
    }

    /// Translates an index set into its vertices.
    pub fn resolve(&self, set: &IndependentSet) -> Vec<Vertex> {
        set.iter().map(|i| self.vertices[i]).collect()
    }

    /// Locates the given vertices in this graph. `None` if any is absent.
    pub fn from_vertices(&self, verts: &[Vertex]) -> Option<IndependentSet> {
        let mut members = Vec::with_capacity(verts.len());
        for v in verts {
            members.push(self.index_of(v)?);
        }
        Some(IndependentSet::new(members))
    }

    /// Induced subgraph on the vertices matching the predicate. Vertex order
    /// (and therefore determinism of downstream selections) is preserved.
    pub fn induced(&self, mut keep: impl FnMut(&Vertex) -> bool) -> IdncGraph {
        IdncGraph {
            vertices: self.vertices.iter().copied().filter(|v| keep(v)).collect(),
            coverage: self.coverage.clone(),
            has: self.has.clone(),
        }
    }

    /// Induced subgraph on the kept vertices that are outside `chosen` and
    /// non-adjacent to every member of `chosen`.
    pub fn conflict_free_subgraph(
        &self,
        chosen: &IndependentSet,
        mut keep: impl FnMut(&Vertex) -> bool,
    ) -> IdncGraph {
        let chosen_idx: Vec<usize> = chosen.iter().collect();
        let mut kept = Vec::new();
        for (idx, v) in self.vertices.iter().enumerate() {
            if !keep(v) || chosen.contains(idx) {
                continue;
            }
            if chosen_idx.iter().all(|&c| !self.adjacent(idx, c)) {
                kept.push(*v);
            }
        }
        IdncGraph {
            vertices: kept,
            coverage: self.coverage.clone(),
            has: self.has.clone(),
        }
    }

    /// Splits into the critical graph (vertices targeting a critical device)
    /// and the non-critical graph (all remaining vertices).
    pub fn partition_by_criticality(&self, critical: &[DeviceId]) -> (IdncGraph, IdncGraph) {
        let mut mask = 0u64;
        for d in critical {
            mask |= 1 << d.0;
        }
        (
            self.induced(|v| mask & (1 << v.rx.0) != 0),
            self.induced(|v| mask & (1 << v.rx.0) == 0),
        )
    }

    /// Enumerates all maximal independent sets with the default vertex cap.
    pub fn maximal_independent_sets(&self) -> Result<Vec<IndependentSet>, GraphError> {
        self.maximal_independent_sets_capped(DEFAULT_VERTEX_CAP)
    }

    /// Enumerates all maximal independent sets, refusing graphs with more
    /// than `cap` vertices. The result is sorted lexicographically by member
    /// indices. The empty graph yields the single empty set.
    pub fn maximal_independent_sets_capped(
        &self,
        cap: usize,
    ) -> Result<Vec<IndependentSet>, GraphError> {
        let n = self.vertices.len();
        let cap = cap.min(MAX_ENUMERABLE_VERTICES);
        if n > cap {
            return Err(GraphError::VertexCountExceeded { vertices: n, cap });
        }
        // Maximal independent sets of G are the maximal cliques of the
        // complement; run Bron–Kerbosch with pivoting there.
        let universe = if n == 128 {
            u128::MAX
        } else {
            (1u128 << n) - 1
        };
        let mut indep = vec![0u128; n];
        for u in 0..n {
            for v in u + 1..n {
                if !self.adjacent(u, v) {
                    indep[u] |= 1 << v;
                    indep[v] |= 1 << u;
                }
            }
        }
        let mut found = Vec::new();
        bron_kerbosch(0, universe, 0, &indep, &mut found);
        let mut sets: Vec<IndependentSet> = found
            .into_iter()
            .map(|bits| IndependentSet::new(bits_to_indices(bits)))
            .collect();
        sets.sort_unstable();
        Ok(sets)
    }

    /// Maximal independent set maximizing the weight sum; ties broken by
    /// larger cardinality, then lexicographically smallest member sequence.
    pub fn max_weight_independent_set(
        &self,
        weights: &[f64],
        cap: usize,
    ) -> Result<IndependentSet, GraphError> {
        debug_assert_eq!(weights.len(), self.vertices.len());
        let sets = self.maximal_independent_sets_capped(cap)?;
        Ok(pick_best(sets, |s| s.iter().map(|i| weights[i]).sum()))
    }

    /// Greedy substitute for exhaustive max-weight selection: repeatedly add
    /// the feasible vertex of highest weight (lowest index on ties) until
    /// the set is maximal.
    pub fn greedy_max_weight_independent_set(&self, weights: &[f64]) -> IndependentSet {
        debug_assert_eq!(weights.len(), self.vertices.len());
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = Vec::new();
        for v in order {
            if chosen.iter().all(|&c| !self.adjacent(v, c)) {
                chosen.push(v);
            }
        }
        IndependentSet::new(chosen)
    }
}

/// Among candidate sets, the one with the largest score; ties broken by
/// larger cardinality, then lexicographically smallest member sequence.
pub(crate) fn pick_best(
    sets: Vec<IndependentSet>,
    mut score: impl FnMut(&IndependentSet) -> f64,
) -> IndependentSet {
    let mut best: Option<(f64, IndependentSet)> = None;
    for s in sets {
        let w = score(&s);
        let better = match &best {
            None => true,
            Some((bw, bs)) => match w.total_cmp(bw) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => {
                    s.len() > bs.len() || (s.len() == bs.len() && s.members() < bs.members())
                }
            },
        };
        if better {
            best = Some((w, s));
        }
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

fn bits_to_indices(mut bits: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(bits.count_ones() as usize);
    while bits != 0 {
        out.push(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
    out
}

/// Bron–Kerbosch with Tomita pivoting over bitset neighborhoods. `adj` here
/// is the complement ("compatible with") relation, so the reported cliques
/// are the maximal independent sets of the original graph.
fn bron_kerbosch(r: u128, mut p: u128, mut x: u128, adj: &[u128], out: &mut Vec<u128>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    // Pivot on the candidate covering most of P.
    let mut pivot = usize::MAX;
    let mut best = -1i64;
    let mut scan = p | x;
    while scan != 0 {
        let u = scan.trailing_zeros() as usize;
        scan &= scan - 1;
        let cover = (p & adj[u]).count_ones() as i64;
        if cover > best {
            best = cover;
            pivot = u;
        }
    }
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let bit = 1u128 << v;
        cand &= cand - 1;
        bron_kerbosch(r | bit, p & adj[v], x & adj[v], adj, out);
        p &= !bit;
        x |= bit;
    }
}
