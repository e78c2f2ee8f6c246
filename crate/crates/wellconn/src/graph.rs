//! Multigraph representation shared by every stage.
//!
//! Edges are an explicit list (parallel edges and self-loops are meaningful
//! and retained). Walk semantics are defined through *slots*: vertex `v`
//! exposes one slot per incident half-edge — a standard self-loop owns two
//! slots at its vertex — plus `stay_slots` single slots appended by
//! [`add_self_loops`]. A walk step picks a slot uniformly; loop and stay
//! slots mean "stay put". Degrees, adjacency weights and stationary
//! distributions all count slots, so the transition matrix derived in the
//! spectral module is exactly the matrix the sampled walks follow.
//!
//! The distinction between the two loop kinds is deliberate: loops produced
//! by the permutation-model generator are ordinary multigraph loops (weight
//! 2), while the lazy augmentation must add weight exactly 1 per loop so
//! that augmenting a Δ-regular graph with Δ loops yields stay-probability
//! exactly 1/2 — odd Δ included.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Sentinel for "edge belongs to no batch".
pub const NO_BATCH: u16 = u16::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// First endpoint. Generator-produced edges store the picking vertex here.
    pub a: u32,
    /// Second endpoint (the picked vertex for generator edges).
    pub b: u32,
    /// Batch label, [`NO_BATCH`] when unlabeled.
    pub batch: u16,
}

impl Edge {
    pub fn new(a: u32, b: u32) -> Self {
        Edge { a, b, batch: NO_BATCH }
    }

    pub fn with_batch(a: u32, b: u32, batch: u16) -> Self {
        Edge { a, b, batch }
    }

    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    /// Weight-1 stay slots per vertex, added uniformly by `add_self_loops`.
    stay_slots: u32,
    /// Per-vertex extra stay slots (empty = none), set by
    /// [`pad_to_uniform_degree`] to equalize slot counts on near-regular
    /// graphs.
    stay_extra: Vec<u32>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, edges: Vec::new(), stay_slots: 0, stay_extra: Vec::new() }
    }

    pub fn from_edges(n: usize, edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.a as usize >= n || e.b as usize >= n {
                return Err(Error::Precondition(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.a, e.b
                )));
            }
        }
        Ok(Graph { n, edges, stay_slots: 0, stay_extra: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn stay_slots(&self) -> u32 {
        self.stay_slots
    }

    pub fn push_edge(&mut self, e: Edge) {
        debug_assert!((e.a as usize) < self.n && (e.b as usize) < self.n);
        self.edges.push(e);
    }

    /// Slot count per vertex: standard degree (loops count 2) plus stay slots.
    pub fn walk_degrees(&self) -> Vec<u64> {
        let mut d = vec![u64::from(self.stay_slots); self.n];
        for e in &self.edges {
            d[e.a as usize] += 1;
            d[e.b as usize] += 1;
        }
        if !self.stay_extra.is_empty() {
            for (v, x) in self.stay_extra.iter().enumerate() {
                d[v] += u64::from(*x);
            }
        }
        d
    }

    /// Standard degree only (no stay slots).
    pub fn degrees(&self) -> Vec<u64> {
        let mut d = vec![0u64; self.n];
        for e in &self.edges {
            d[e.a as usize] += 1;
            d[e.b as usize] += 1;
        }
        d
    }

    /// True when every vertex has the same slot count.
    pub fn is_regular(&self) -> bool {
        let d = self.walk_degrees();
        d.windows(2).all(|w| w[0] == w[1])
    }

    /// Adjacency in CSR form, self-loops listed once per slot (twice).
    /// Stay slots are not listed; callers that walk must consult
    /// [`Graph::stay_slots`].
    pub fn adjacency(&self) -> Adjacency {
        Adjacency::build(self)
    }

    pub fn has_isolated_vertices(&self) -> bool {
        self.degrees().iter().any(|&d| d == 0)
    }
}

/// CSR adjacency over slot targets. `targets[offsets[v]..offsets[v+1]]` are
/// the standard slots of `v` in canonical port order: sorted by
/// (neighbor id, edge index, endpoint side). This is the numbering walks,
/// the replacement product and file round-trips all agree on.
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub targets: Vec<u32>,
    /// For each edge index, the port position of its `a` and `b` endpoint
    /// within the owning vertex's slot range. For a self-loop both refer to
    /// the same vertex and are distinct.
    pub edge_ports: Vec<(u32, u32)>,
}

impl Adjacency {
    fn build(g: &Graph) -> Self {
        // half-edge: (owner, other, edge idx, side)
        let mut halves: Vec<(u32, u32, u32, u8)> = Vec::with_capacity(2 * g.edges.len());
        for (i, e) in g.edges.iter().enumerate() {
            halves.push((e.a, e.b, i as u32, 0));
            halves.push((e.b, e.a, i as u32, 1));
        }
        halves.sort_unstable_by_key(|&(own, other, idx, side)| (own, other, idx, side));

        let mut offsets = vec![0usize; g.n + 1];
        for &(own, ..) in &halves {
            offsets[own as usize + 1] += 1;
        }
        for v in 0..g.n {
            offsets[v + 1] += offsets[v];
        }
        let mut targets = vec![0u32; halves.len()];
        let mut edge_ports = vec![(0u32, 0u32); g.edges.len()];
        let mut cursor = offsets.clone();
        for &(own, other, idx, side) in &halves {
            let pos = cursor[own as usize];
            cursor[own as usize] += 1;
            targets[pos] = other;
            let port = (pos - offsets[own as usize]) as u32;
            if side == 0 {
                edge_ports[idx as usize].0 = port;
            } else {
                edge_ports[idx as usize].1 = port;
            }
        }
        Adjacency { offsets, targets, edge_ports }
    }

    pub fn degree(&self, v: u32) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.targets[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }
}

/// Add `count` weight-1 stay slots to every vertex. On a Δ-regular input,
/// `count = Δ` makes every slot count 2Δ and the walk exactly lazy
/// (stay-probability 1/2 per step).
pub fn add_self_loops(g: &Graph, count: u32) -> Graph {
    let mut out = g.clone();
    out.stay_slots += count;
    out
}

/// Equalize slot counts by giving every vertex enough extra stay slots to
/// reach the maximum walk degree. All vertices then share one slot bound,
/// which keeps the walk's transition matrix symmetric (uniform stationary
/// distribution) on near-regular inputs; sub-maximal vertices idle on the
/// padding slots proportionally to their degree deficit.
pub fn pad_to_uniform_degree(g: &Graph) -> Graph {
    let wd = g.walk_degrees();
    let target = wd.iter().copied().max().unwrap_or(0);
    let mut out = g.clone();
    let mut extra = std::mem::take(&mut out.stay_extra);
    if extra.is_empty() {
        extra = vec![0u32; g.n];
    }
    for (v, x) in extra.iter_mut().enumerate() {
        *x += (target - wd[v]) as u32;
    }
    out.stay_extra = extra;
    out
}

/// Each vertex picks `⌊d/2⌋` uniform targets with replacement; directions are
/// recorded (`a` is the picker) but the graph is undirected. Multi-edges and
/// loops are kept.
pub fn gen_gnd(n: usize, d: usize, seed: u64) -> Graph {
    gen_gnd_batch(n, d, seed, NO_BATCH)
}

/// [`gen_gnd`] with every edge carrying a batch label.
pub fn gen_gnd_batch(n: usize, d: usize, seed: u64, batch: u16) -> Graph {
    let picks = d / 2;
    let mut edges = Vec::with_capacity(n * picks);
    for v in 0..n {
        let mut r = rng::stream(seed, "gnd", v as u64);
        for _ in 0..picks {
            let t = r.random_range(0..n) as u32;
            edges.push(Edge::with_batch(v as u32, t, batch));
        }
    }
    Graph { n, edges, stay_slots: 0, stay_extra: Vec::new() }
}

/// Union-find over vertex ids; the connectivity oracle every randomized
/// stage is checked against.
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns true when the two sets were distinct.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        true
    }
}

/// Vertex partition as dense class labels in first-occurrence order, so two
/// partitions are equal as sets of classes iff their label vectors are equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    labels: Vec<u32>,
    classes: usize,
}

impl ComponentPartition {
    /// Canonicalize arbitrary labels to first-occurrence order.
    pub fn from_labels(raw: &[u32]) -> Self {
        let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut next = 0u32;
        for &l in raw {
            let id = *remap.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
            labels.push(id);
        }
        ComponentPartition { labels, classes: next as usize }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_of(&self, v: u32) -> u32 {
        self.labels[v as usize]
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.classes];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.classes];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(v as u32);
        }
        out
    }

    /// True when every class of `self` is contained in a class of `other`.
    pub fn refines(&self, other: &ComponentPartition) -> bool {
        if self.labels.len() != other.labels.len() {
            return false;
        }
        let mut rep: Vec<Option<u32>> = vec![None; self.classes];
        for (v, &l) in self.labels.iter().enumerate() {
            match rep[l as usize] {
                None => rep[l as usize] = Some(other.labels[v]),
                Some(o) => {
                    if o != other.labels[v] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Exact connected components by union-find. Stay slots are irrelevant here.
pub fn oracle_components(g: &Graph) -> ComponentPartition {
    let mut uf = UnionFind::new(g.n);
    for e in &g.edges {
        uf.union(e.a, e.b);
    }
    let roots: Vec<u32> = (0..g.n as u32).map(|v| uf.find(v)).collect();
    ComponentPartition::from_labels(&roots)
}

/// Disjoint union with vertex ids offset in argument order. All parts must
/// carry the same stay-slot count (in practice zero; the lazy augmentation
/// happens after assembly).
pub fn disjoint_union(parts: &[Graph]) -> Result<Graph> {
    let stay = parts.first().map(|g| g.stay_slots).unwrap_or(0);
    if parts.iter().any(|g| g.stay_slots != stay) {
        return Err(Error::Precondition("disjoint_union: mismatched stay-slot counts".into()));
    }
    if parts.iter().any(|g| !g.stay_extra.is_empty()) {
        return Err(Error::Precondition(
            "disjoint_union: pad to uniform degree after the union, not before".into(),
        ));
    }
    let n: usize = parts.iter().map(|g| g.n).sum();
    let mut edges = Vec::with_capacity(parts.iter().map(|g| g.edges.len()).sum());
    let mut off = 0u32;
    for g in parts {
        for e in &g.edges {
            edges.push(Edge { a: e.a + off, b: e.b + off, batch: e.batch });
        }
        off += g.n as u32;
    }
    Ok(Graph { n, edges, stay_slots: stay, stay_extra: Vec::new() })
}

/// Closed range `⟨x ± δ⟩`-style bound used throughout the statistical tests.
#[derive(Clone, Copy, Debug)]
pub struct RangeBound {
    pub lo: f64,
    pub hi: f64,
}

impl RangeBound {
    /// Bound of the form `(1 ± eps) · x`.
    pub fn relative(x: f64, eps: f64) -> Self {
        RangeBound { lo: (1.0 - eps) * x, hi: (1.0 + eps) * x }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Per-vertex incident-slot subsampling: keep at most `keep` random standard
/// slots per vertex; an edge survives if either endpoint keeps it. Preserves
/// connectivity with high probability on graphs whose every vertex has
/// `keep = Ω(log n)` incident edges; used by the desk preset to stop dense
/// inputs from blowing up the regularization stage.
pub fn sparsify_keep_incident(g: &Graph, keep: usize, seed: u64) -> Graph {
    let adj = g.adjacency();
    // Re-derive, per slot, which edge it came from.
    let mut slot_edge: Vec<u32> = vec![0; 2 * g.edges.len()];
    {
        let mut halves: Vec<(u32, u32, u32, u8)> = Vec::with_capacity(2 * g.edges.len());
        for (i, e) in g.edges.iter().enumerate() {
            halves.push((e.a, e.b, i as u32, 0));
            halves.push((e.b, e.a, i as u32, 1));
        }
        halves.sort_unstable_by_key(|&(own, other, idx, side)| (own, other, idx, side));
        for (pos, &(_, _, idx, _)) in halves.iter().enumerate() {
            slot_edge[pos] = idx;
        }
    }
    let mut kept = vec![false; g.edges.len()];
    for v in 0..g.n {
        let lo = adj.offsets[v];
        let hi = adj.offsets[v + 1];
        let deg = hi - lo;
        if deg <= keep {
            for s in lo..hi {
                kept[slot_edge[s] as usize] = true;
            }
            continue;
        }
        // Partial Fisher-Yates over the slot range.
        let mut idx: Vec<usize> = (lo..hi).collect();
        let mut r = rng::stream(seed, "sparsify", v as u64);
        for i in 0..keep {
            let j = i + r.random_range(0..idx.len() - i);
            idx.swap(i, j);
            kept[slot_edge[idx[i]] as usize] = true;
        }
    }
    let edges: Vec<Edge> = g
        .edges
        .iter()
        .zip(&kept)
        .filter_map(|(e, &k)| if k { Some(*e) } else { None })
        .collect();
    Graph { n: g.n, edges, stay_slots: g.stay_slots, stay_extra: g.stay_extra.clone() }
}

// === edge-list text format ===
//
// Header line "n m", then one edge per line: "a b" or "a b batch".

pub fn edge_list_string(g: &Graph) -> String {
    let mut out = String::with_capacity(16 * g.edges.len() + 16);
    let _ = writeln!(out, "{} {}", g.n, g.edges.len());
    for e in &g.edges {
        if e.batch == NO_BATCH {
            let _ = writeln!(out, "{} {}", e.a, e.b);
        } else {
            let _ = writeln!(out, "{} {} {}", e.a, e.b, e.batch);
        }
    }
    out
}

pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    std::fs::write(path, edge_list_string(g))?;
    Ok(())
}

/// Remap table produced when an input file uses non-dense vertex ids.
pub type IdRemap = Vec<u64>;

pub fn read_edge_list(path: &Path) -> Result<(Graph, Option<IdRemap>)> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text)
}

pub fn parse_edge_list(text: &str) -> Result<(Graph, Option<IdRemap>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedInput { line: 0, reason: "empty file".into() })?;
    let mut it = header.split_whitespace();
    let n: usize = parse_field(it.next(), hline, "n")?;
    let m: usize = parse_field(it.next(), hline, "m")?;
    if it.next().is_some() {
        return Err(Error::MalformedInput { line: hline + 1, reason: "header has extra fields".into() });
    }

    let mut raw: Vec<(u64, u64, u16)> = Vec::with_capacity(m);
    let mut dense = true;
    for (ln, line) in lines {
        let mut f = line.split_whitespace();
        let a: u64 = parse_field(f.next(), ln, "endpoint a")?;
        let b: u64 = parse_field(f.next(), ln, "endpoint b")?;
        let batch: u16 = match f.next() {
            Some(s) => s.parse().map_err(|_| Error::MalformedInput {
                line: ln + 1,
                reason: format!("bad batch label {s:?}"),
            })?,
            None => NO_BATCH,
        };
        if f.next().is_some() {
            return Err(Error::MalformedInput { line: ln + 1, reason: "too many fields".into() });
        }
        if a >= n as u64 || b >= n as u64 {
            dense = false;
        }
        raw.push((a, b, batch));
    }
    if raw.len() != m {
        return Err(Error::MalformedInput {
            line: 0,
            reason: format!("header promised {m} edges, found {}", raw.len()),
        });
    }

    if dense {
        let edges = raw
            .into_iter()
            .map(|(a, b, batch)| Edge { a: a as u32, b: b as u32, batch })
            .collect();
        return Ok((Graph { n, edges, stay_slots: 0, stay_extra: Vec::new() }, None));
    }

    // Arbitrary ids: remap in sorted order and report the mapping.
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let lookup: BTreeMap<u64, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
    let edges = raw
        .into_iter()
        .map(|(a, b, batch)| Edge { a: lookup[&a], b: lookup[&b], batch })
        .collect();
    Ok((Graph { n: ids.len(), edges, stay_slots: 0, stay_extra: Vec::new() }, Some(ids)))
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, line: usize, what: &str) -> Result<T> {
    s.ok_or_else(|| Error::MalformedInput { line: line + 1, reason: format!("missing {what}") })?
        .parse()
        .map_err(|_| Error::MalformedInput { line: line + 1, reason: format!("unparseable {what}") })
}

/// Complete graph on `n` vertices (test helper).
pub fn complete(n: usize) -> Graph {
    let mut g = Graph::new(n);
    for a in 0..n as u32 {
        for b in (a + 1)..n as u32 {
            g.push_edge(Edge::new(a, b));
        }
    }
    g
}

/// Cycle graph `C_n` (test helper).
pub fn cycle(n: usize) -> Graph {
    let mut g = Graph::new(n);
    for v in 0..n as u32 {
        g.push_edge(Edge::new(v, (v + 1) % n as u32));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gnd_edge_count_and_mean_degree_are_exact() {
        // n·⌊d/2⌋ edges always; mean slot count is exactly 2⌊d/2⌋.
        for seed in 0..20 {
            let g = gen_gnd(10_000, 100, seed);
            assert_eq!(g.m(), 10_000 * 50);
            let total: u64 = g.walk_degrees().iter().sum();
            let mean = total as f64 / g.n() as f64;
            assert!((95.0..=105.0).contains(&mean), "mean degree {mean}");
        }
    }

    #[test]
    fn gnd_is_almost_regular_at_log_density() {
        // d ≥ 4·ln(n)/ε² ⟹ degrees in (1±ε)d, allowing a 5% failure rate.
        let n = 256;
        let eps = 0.5;
        let d = ((4.0 * (n as f64).ln() / (eps * eps)).ceil() as usize).max(2);
        let mut failures = 0;
        for seed in 0..100 {
            let g = gen_gnd(n, d, seed);
            let bound = RangeBound::relative(2.0 * (d / 2) as f64, eps);
            if g.walk_degrees().iter().any(|&deg| !bound.contains(deg as f64)) {
                failures += 1;
            }
        }
        assert!(failures <= 5, "{failures} of 100 seeds outside (1±ε)d");
    }

    #[test]
    fn gnd_log_degree_connectivity() {
        // d = c·⌈log₂ n⌉ with c = 100 keeps samples connected essentially always.
        for &n in &[256usize, 1024, 4096] {
            let d = 100 * (n as f64).log2().ceil() as usize;
            let mut connected = 0;
            for seed in 0..100 {
                let g = gen_gnd(n, d, 1000 + seed);
                if oracle_components(&g).class_count() == 1 {
                    connected += 1;
                }
            }
            assert!(connected >= 99, "n={n}: only {connected}/100 connected");
        }
    }

    #[test]
    fn gnd_vertex_expansion() {
        let n = 1024;
        let d = 64;
        let g = gen_gnd(n, d, 7);
        let adj = g.adjacency();
        let mut r = rng::stream(7, "expansion-sets", 0);
        for _ in 0..50 {
            let size = 1 + r.random_range(0..n / 20);
            let mut set = vec![false; n];
            let mut chosen = 0;
            while chosen < size {
                let v = r.random_range(0..n);
                if !set[v] {
                    set[v] = true;
                    chosen += 1;
                }
            }
            let mut nbr = vec![false; n];
            for v in 0..n {
                if set[v] {
                    for &t in adj.neighbors(v as u32) {
                        nbr[t as usize] = true;
                    }
                }
            }
            let grown = nbr.iter().filter(|&&b| b).count();
            let want = ((2 * n) as f64 / 3.0).min(d as f64 / 12.0 * size as f64);
            assert!(grown as f64 >= want, "|N(S)| = {grown} < {want} at |S| = {size}");
        }
    }

    #[test]
    fn oracle_matches_handmade_components() {
        let mut g = Graph::new(6);
        g.push_edge(Edge::new(0, 1));
        g.push_edge(Edge::new(1, 2));
        g.push_edge(Edge::new(3, 4));
        let p = oracle_components(&g);
        assert_eq!(p.class_count(), 3); // {0,1,2}, {3,4}, {5}
        assert_eq!(p.class_of(0), p.class_of(2));
        assert_ne!(p.class_of(0), p.class_of(3));
        assert_eq!(p.class_sizes(), vec![3, 2, 1]);
    }

    #[test]
    fn stay_slots_make_walk_degree_2d() {
        let g = cycle(8); // 2-regular
        let aug = add_self_loops(&g, 2);
        assert!(aug.walk_degrees().iter().all(|&d| d == 4));
        // K4 + 3 stay slots: 6 slots, 3 of them stay ⇒ stay-probability 1/2.
        let k4 = complete(4);
        let aug = add_self_loops(&k4, 3);
        assert!(aug.walk_degrees().iter().all(|&d| d == 6));
    }

    #[test]
    fn union_offsets_and_counts() {
        let g1 = cycle(4);
        let g2 = complete(3);
        let u = disjoint_union(&[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(u.n(), 7);
        assert_eq!(u.m(), g1.m() + g2.m());
        assert_eq!(oracle_components(&u).class_count(), 2);
    }

    #[test]
    fn ports_are_canonical_and_paired() {
        let mut g = Graph::new(3);
        g.push_edge(Edge::new(0, 1));
        g.push_edge(Edge::new(1, 2));
        g.push_edge(Edge::new(1, 1)); // loop: two ports at vertex 1
        let adj = g.adjacency();
        assert_eq!(adj.degree(1), 4);
        let (pa, pb) = adj.edge_ports[2];
        assert_ne!(pa, pb);
        // Loop ports both target vertex 1.
        assert_eq!(adj.neighbors(1)[pa as usize], 1);
        assert_eq!(adj.neighbors(1)[pb as usize], 1);
        // Neighbor lists are sorted by (neighbor, edge index).
        assert_eq!(adj.neighbors(1), &[0, 1, 1, 2]);
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        let mut g = gen_gnd_batch(50, 6, 3, 2);
        g.push_edge(Edge::new(7, 7));
        write_edge_list(&g, &path).unwrap();
        let (h, remap) = read_edge_list(&path).unwrap();
        assert!(remap.is_none());
        assert_eq!(h.n(), g.n());
        assert_eq!(h.edges(), g.edges());
    }

    #[test]
    fn edge_list_remaps_sparse_ids() {
        let (g, remap) = parse_edge_list("3 2\n100 205\n205 9\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(remap, Some(vec![9, 100, 205]));
        assert_eq!(g.edges()[0], Edge::new(1, 2));
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("2 1\n0\n").is_err());
        assert!(parse_edge_list("2 2\n0 1\n").is_err());
        assert!(parse_edge_list("2 1\n0 x\n").is_err());
    }

    #[test]
    fn sparsify_keeps_low_degree_graphs_intact() {
        let g = cycle(32);
        let s = sparsify_keep_incident(&g, 4, 9);
        assert_eq!(s.m(), g.m());
        let dense = gen_gnd(128, 400, 5);
        let s = sparsify_keep_incident(&dense, 24, 9);
        assert!(s.m() < dense.m());
        let degs = s.walk_degrees();
        assert!(degs.iter().all(|&d| d >= 24), "kept degree too small");
        assert_eq!(oracle_components(&s).class_count(), oracle_components(&dense).class_count());
    }

    #[test]
    fn partition_refinement() {
        let fine = ComponentPartition::from_labels(&[0, 1, 1, 2]);
        let coarse = ComponentPartition::from_labels(&[5, 5, 5, 9]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }
}
