//! Linear connectivity sketches and the low-memory pipeline built on them.
//!
//! Every vertex compresses its signed edge-incidence vector into a payload
//! of `L × R` one-sparse recovery cells (`L` geometric sampling levels ×
//! `R` independent repetitions, all hashed from one shared seed). The
//! payload is *linear*: adding two vertices' sketches cellwise yields the
//! sketch of their combined incidence vector, so edges inside a merged set
//! cancel and only boundary edges remain visible. A coordinator holding
//! nothing but the per-vertex payloads can therefore run Borůvka-style
//! merging — decode one boundary edge per class per stage, union, add the
//! payloads — and recover the connected components exactly.
//!
//! On top of the sketch sits [`sublinear_conn`], a connectivity pipeline
//! for memory budgets far below the vertex count: length-`t` walks gather
//! `d` distinct same-component contacts per vertex, one leader-election
//! round contracts those contact stars, and the contracted graph — now
//! small enough that all payloads fit on one coordinator — is finished off
//! by the sketch decoder. Merges are witnessed at every stage (walk paths,
//! star edges, decoded edges that must exist in the contracted graph), and
//! the final partition is checked against the input's own edges.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;

use crate::components::{contract, leader_election};
use crate::engine::{MachineConfig, Mpc, RoundStats};
use crate::error::{Error, Result};
use crate::graph::{ComponentPartition, Edge, Graph, UnionFind, NO_BATCH};
use crate::randwalk::distinct_visit_sets;
use crate::rng::{self, sub_seed};

/// Fingerprint modulus 2³¹ − 1 (prime).
pub const FINGERPRINT_MOD: u64 = (1 << 31) - 1;

/// Constant `c` in the per-vertex payload budget `c·⌈log₂ n⌉³` bits.
pub const BIT_BUDGET_FACTOR: usize = 64;

/// Bits per one-sparse recovery cell: a signed edge count, a wrapping sum
/// of edge ids and a mod-p fingerprint, 32 bits each.
pub const CELL_BITS: usize = 96;

/// Desk cap on the nominal walk length of [`sublinear_conn`]; the distance
/// parameter `d` is rescaled through the same cubic law when the cap binds.
pub const WALK_LENGTH_CAP: u64 = 1_000_000;

/// Multiplier `c` in the leader probability `c·⌈log₂ n⌉ / d`.
pub const LEADER_LOG_FACTOR: f64 = 2.0;

/// Multiplier in the contracted-size budget `⌈c·n·⌈log₂ n⌉ / d⌉` that the
/// sketch stage enforces before building payloads.
pub const CLASS_BUDGET_FACTOR: f64 = 4.0;

fn ceil_log2(n: usize) -> u32 {
    n.max(2).next_power_of_two().trailing_zeros()
}

fn modpow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// Payload geometry for sketches over `n` vertices: `levels` geometric
/// sampling levels (rate 2⁻ˡ, level 0 holds every edge), `reps` independent
/// repetitions, and `edge_bits` per packed endpoint.
///
/// Levels must cover the ℓ₀ range of any *merged* class's boundary, which
/// lives in the n²-sized edge universe — boundaries up to ~n² edges are
/// routine on dense inputs — so `L = 2⌈log₂ n⌉ + 2`, guaranteeing some
/// level an expected surviving count in `[½, 1)` for every boundary size.
/// Repetitions are the declared `⌈4·log₂ n⌉` copies, clipped so the
/// payload stays within `64·⌈log₂ n⌉³` bits; below n = 128 the cubic
/// budget is smaller than the twelve repetitions the merge loop needs to
/// make reliable progress, so tiny inputs keep twelve and are exempt from
/// the budget assertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchShape {
    pub n: usize,
    pub levels: usize,
    pub reps: usize,
    pub edge_bits: u32,
}

impl SketchShape {
    pub fn for_n(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("sketch over an empty vertex set".into()));
        }
        let lg = ceil_log2(n) as usize;
        let edge_bits = (lg as u32).max(1);
        if 2 * edge_bits > 32 {
            return Err(Error::Precondition(format!(
                "sketch edge ids pack two {edge_bits}-bit endpoints into 32 bits; \
                 {n} vertices need {} bits",
                2 * edge_bits
            )));
        }
        let levels = 2 * lg + 2;
        let budget_reps = Self::bit_budget(n) / (levels * CELL_BITS);
        let reps = (4 * lg).min(budget_reps.max(12)).max(1);
        let shape = SketchShape { n, levels, reps, edge_bits };
        debug_assert!(n < 128 || shape.payload_bits() <= Self::bit_budget(n));
        Ok(shape)
    }

    /// Declared payload cap, `64·⌈log₂ n⌉³` bits.
    pub fn bit_budget(n: usize) -> usize {
        BIT_BUDGET_FACTOR * (ceil_log2(n) as usize).pow(3)
    }

    pub fn cells(&self) -> usize {
        self.levels * self.reps
    }

    pub fn payload_bits(&self) -> usize {
        self.cells() * CELL_BITS
    }

    /// Payload size in 64-bit machine words.
    pub fn payload_words(&self) -> usize {
        self.payload_bits().div_ceil(64)
    }

    fn pack(&self, lo: u32, hi: u32) -> u32 {
        (lo << self.edge_bits) | hi
    }

    fn unpack(&self, id: u32) -> (u32, u32) {
        (id >> self.edge_bits, id & ((1 << self.edge_bits) - 1))
    }
}

/// Per-repetition hash parameters, all derived from the shared seed:
/// a multiply-shift pair for level sampling and a fingerprint base.
#[derive(Debug, Clone, Copy)]
struct RepHash {
    a: u64,
    b: u64,
    z: u64,
}

fn rep_hashes(seed: u64, reps: usize) -> Vec<RepHash> {
    (0..reps)
        .map(|r| {
            let mut s = rng::stream(seed, "sketch-hash", r as u64);
            RepHash {
                a: s.random::<u64>() | 1,
                b: s.random::<u64>(),
                z: 2 + s.random_range(0..FINGERPRINT_MOD - 3),
            }
        })
        .collect()
}

impl RepHash {
    /// Deepest sampling level that includes edge `id`: levels are nested,
    /// level ℓ keeps an edge with probability 2⁻ˡ (level 0 keeps all).
    fn max_level(&self, id: u32) -> u32 {
        self.a.wrapping_mul(u64::from(id)).wrapping_add(self.b).leading_zeros()
    }

    fn fingerprint(&self, id: u32) -> u64 {
        modpow(self.z, u64::from(id), FINGERPRINT_MOD)
    }
}

/// One one-sparse recovery cell: the signed count of surviving edges, the
/// wrapping sum of their signed packed ids, and the mod-p sum of their
/// signed fingerprints. All three are group homomorphisms, so cells add.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cell {
    pub count: i32,
    pub idsum: u32,
    pub fp: u32,
}

impl Cell {
    fn add_edge(&mut self, id: u32, fp: u64, positive: bool) {
        if positive {
            self.count = self.count.wrapping_add(1);
            self.idsum = self.idsum.wrapping_add(id);
            self.fp = ((u64::from(self.fp) + fp) % FINGERPRINT_MOD) as u32;
        } else {
            self.count = self.count.wrapping_sub(1);
            self.idsum = self.idsum.wrapping_sub(id);
            self.fp = ((u64::from(self.fp) + FINGERPRINT_MOD - fp) % FINGERPRINT_MOD) as u32;
        }
    }

    fn combine(&self, other: &Cell) -> Cell {
        Cell {
            count: self.count.wrapping_add(other.count),
            idsum: self.idsum.wrapping_add(other.idsum),
            fp: ((u64::from(self.fp) + u64::from(other.fp)) % FINGERPRINT_MOD) as u32,
        }
    }

    fn is_zero(&self) -> bool {
        self.count == 0 && self.idsum == 0 && self.fp == 0
    }

    /// One-sparse decode: a cell holding exactly one edge has count ±1,
    /// idsum = ±id and a matching fingerprint. The fingerprint (plus an
    /// endpoint well-formedness check) rejects cells that merely look
    /// one-sparse after cancellation.
    fn decode(&self, shape: &SketchShape, h: &RepHash) -> Option<(u32, u32)> {
        let id = match self.count {
            1 => self.idsum,
            -1 => self.idsum.wrapping_neg(),
            _ => return None,
        };
        let (lo, hi) = shape.unpack(id);
        if lo >= hi || (hi as usize) >= shape.n {
            return None;
        }
        let want = h.fingerprint(id);
        let want = if self.count == 1 { want } else { (FINGERPRINT_MOD - want) % FINGERPRINT_MOD };
        (u64::from(self.fp) == want).then_some((lo, hi))
    }
}

/// A vertex's (or merged vertex set's) linear connectivity sketch: the
/// shared-randomness seed it was hashed with plus `levels × reps` cells in
/// repetition-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSketch {
    pub seed: u64,
    pub cells: Vec<Cell>,
}

impl GraphSketch {
    fn zero(seed: u64, shape: &SketchShape) -> Self {
        GraphSketch { seed, cells: vec![Cell::default(); shape.cells()] }
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(Cell::is_zero)
    }

    /// Fixed-width hex form for cross-run comparison: 24 hex digits per
    /// cell (count, idsum, fingerprint), cells in payload order.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(24 * self.cells.len());
        for c in &self.cells {
            s.push_str(&format!("{:08x}{:08x}{:08x}", c.count as u32, c.idsum, c.fp));
        }
        s
    }
}

/// Cellwise sum of two sketches: by linearity this is exactly the sketch
/// of the summed incidence vectors, so edges between the two underlying
/// vertex sets cancel.
pub fn combine(a: &GraphSketch, b: &GraphSketch) -> Result<GraphSketch> {
    if a.seed != b.seed {
        return Err(Error::Precondition(
            "combining sketches built from different shared seeds".into(),
        ));
    }
    if a.cells.len() != b.cells.len() {
        return Err(Error::Precondition("combining sketches of different shapes".into()));
    }
    Ok(GraphSketch {
        seed: a.seed,
        cells: a.cells.iter().zip(&b.cells).map(|(x, y)| x.combine(y)).collect(),
    })
}

/// Build every vertex's sketch of `h` under one shared seed.
///
/// Edges are encoded in the standard signed incidence form: edge `(u,v)`
/// with `u < v` contributes `+1` to `u`'s vector and `−1` to `v`'s in
/// every sampled cell, so the two endpoint payloads cancel the edge when
/// added. Self-loops contribute nothing (both signs land in one payload);
/// parallel edges stack with multiplicity, so callers that need one-sparse
/// decoding should deduplicate first. Deterministic per `(h, seed)`;
/// vertices are filled in parallel.
pub fn build_vertex_sketches(h: &Graph, seed: u64) -> Result<Vec<GraphSketch>> {
    let shape = SketchShape::for_n(h.n())?;
    let hashes = rep_hashes(seed, shape.reps);

    // Hash every distinct-endpoint edge once per repetition, then let each
    // vertex fold its incident marks with its own sign.
    struct EdgeMark {
        id: u32,
        max_level: u32,
        fp: u64,
    }
    let marks: Vec<Vec<EdgeMark>> = h
        .edges()
        .par_iter()
        .map(|e| {
            if e.is_loop() {
                return Vec::new();
            }
            let (lo, hi) = (e.a.min(e.b), e.a.max(e.b));
            let id = shape.pack(lo, hi);
            hashes
                .iter()
                .map(|rh| EdgeMark { id, max_level: rh.max_level(id), fp: rh.fingerprint(id) })
                .collect()
        })
        .collect();

    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); h.n()];
    for (i, e) in h.edges().iter().enumerate() {
        if e.is_loop() {
            continue;
        }
        incident[e.a as usize].push(i as u32);
        incident[e.b as usize].push(i as u32);
    }

    let edges = h.edges();
    let sketches: Vec<GraphSketch> = (0..h.n())
        .into_par_iter()
        .map(|v| {
            let mut sk = GraphSketch::zero(seed, &shape);
            for &ei in &incident[v] {
                let e = &edges[ei as usize];
                let positive = (v as u32) == e.a.min(e.b);
                for (r, m) in marks[ei as usize].iter().enumerate() {
                    let deepest = (m.max_level as usize).min(shape.levels - 1);
                    for lev in 0..=deepest {
                        sk.cells[r * shape.levels + lev].add_edge(m.id, m.fp, positive);
                    }
                }
            }
            sk
        })
        .collect();
    Ok(sketches)
}

/// What the coordinator's Borůvka decode did, beyond the partition itself.
#[derive(Debug)]
pub struct RecoverDetail {
    pub partition: ComponentPartition,
    /// Every edge decoded from a one-sparse cell, in merge order. Each one
    /// names a real crossing pair at the time it was decoded.
    pub decoded: Vec<(u32, u32)>,
    /// Merge stages consumed (each stage spends one repetition).
    pub stages: u32,
}

/// Borůvka-style component recovery from per-vertex sketches alone.
///
/// Stage `r` gives every active class one shot from repetition `r`: scan
/// the class's combined cells at that repetition, decode the first
/// one-sparse level into a boundary edge, then merge all decoded edges and
/// add the payloads. A class whose *entire* payload is zero has no
/// boundary (its incidence sums cancelled exactly), so it is a finished
/// component — disconnection is all-zero payloads, never an error. Classes
/// that still show nonzero cells after the last repetition are a decode
/// failure.
pub fn recover_components_from_sketches(
    sketches: &[GraphSketch],
    n: usize,
    seed: u64,
) -> Result<ComponentPartition> {
    Ok(recover_detail(sketches, n, seed)?.partition)
}

pub fn recover_detail(sketches: &[GraphSketch], n: usize, seed: u64) -> Result<RecoverDetail> {
    let shape = SketchShape::for_n(n)?;
    if sketches.len() != n {
        return Err(Error::Precondition(format!(
            "recover: {} sketches for {n} vertices",
            sketches.len()
        )));
    }
    if sketches.iter().any(|s| s.seed != seed || s.cells.len() != shape.cells()) {
        return Err(Error::Precondition(
            "recover: sketches were not built with the matching shared seed and shape".into(),
        ));
    }
    let hashes = rep_hashes(seed, shape.reps);

    let mut uf = UnionFind::new(n);
    let mut class: Vec<Option<GraphSketch>> = sketches.iter().cloned().map(Some).collect();
    let mut settled = vec![false; n];
    let mut decoded = Vec::new();
    let mut stages = 0;

    for stage in 0..shape.reps {
        let mut merges: Vec<(u32, u32)> = Vec::new();
        let mut open = 0usize;
        for v in 0..n as u32 {
            if uf.find(v) != v || settled[v as usize] {
                continue;
            }
            let sk = class[v as usize].as_ref().expect("root classes keep their sketch");
            if sk.is_zero() {
                settled[v as usize] = true;
                continue;
            }
            open += 1;
            let rep = &hashes[stage];
            let base = stage * shape.levels;
            if let Some(edge) =
                (0..shape.levels).find_map(|l| sk.cells[base + l].decode(&shape, rep))
            {
                merges.push(edge);
            }
        }
        if open == 0 {
            return Ok(RecoverDetail {
                partition: partition_from(&mut uf, n),
                decoded,
                stages,
            });
        }
        stages = stage as u32 + 1;
        for &(a, b) in &merges {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                continue;
            }
            decoded.push((a, b));
            uf.union(ra, rb);
            let root = uf.find(ra);
            let other = if root == ra { rb } else { ra };
            let sa = class[root as usize].take().expect("merge roots hold sketches");
            let sb = class[other as usize].take().expect("merge roots hold sketches");
            class[root as usize] = Some(combine(&sa, &sb)?);
            settled[root as usize] = false;
        }
    }

    // Final sweep: merges in the last stage may have zeroed everything out.
    let blocked = (0..n as u32)
        .filter(|&v| {
            uf.find(v) == v
                && !settled[v as usize]
                && !class[v as usize].as_ref().is_none_or(|s| s.is_zero())
        })
        .count();
    if blocked > 0 {
        return Err(Error::SketchDecode(format!(
            "{blocked} classes still held nonzero cells after all {} repetitions",
            shape.reps
        )));
    }
    Ok(RecoverDetail { partition: partition_from(&mut uf, n), decoded, stages })
}

fn partition_from(uf: &mut UnionFind, n: usize) -> ComponentPartition {
    let labels: Vec<u32> = (0..n as u32).map(|v| uf.find(v)).collect();
    ComponentPartition::from_labels(&labels)
}

/// Parameters of the low-memory connectivity pipeline for an `n`-vertex
/// input on machines of `s` words.
///
/// The nominal distance parameter is `d = ⌈n·⌈log₂ n⌉⁴ / s⌉` and the
/// nominal walk length `t = d³·100·⌈log₂ n⌉` — long enough that a walk
/// either collects `d` distinct contacts or exhausts its component. The
/// nominal `t` is astronomically large for any feasible run, so lengths
/// above [`WALK_LENGTH_CAP`] are capped and `d` is rescaled back through
/// the same cubic law; both the requested and the effective values are
/// kept. Leaders are sampled at `min(1, 2⌈log₂ n⌉/d)`, which bounds the
/// contracted graph by `class_budget` vertices with high probability.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SublinearParams {
    pub n: usize,
    /// Per-machine memory budget, in words.
    pub s: usize,
    /// Nominal distance parameter `⌈n·⌈log₂ n⌉⁴/s⌉`.
    pub d_requested: f64,
    /// Nominal walk length `d³·100·⌈log₂ n⌉` (before capping).
    pub t_requested: f64,
    /// Effective distance target after capping.
    pub d: u64,
    /// Effective walk length after capping.
    pub t: u64,
    /// Leader sampling probability for the contraction round.
    pub leader_p: f64,
    /// True when the walk-length cap rescaled `d` and `t`.
    pub capped: bool,
    /// Contracted-size bound `⌈4·n·⌈log₂ n⌉/d⌉` enforced before sketching.
    pub class_budget: usize,
}

impl SublinearParams {
    pub fn new(n: usize, s: usize) -> Result<Self> {
        if n == 0 || s == 0 {
            return Err(Error::Precondition("sublinear params need n ≥ 1 and s ≥ 1".into()));
        }
        let lg = f64::from(ceil_log2(n));
        let d_requested = (n as f64 * lg.powi(4) / s as f64).ceil().max(1.0);
        let t_requested = d_requested.powi(3) * 100.0 * lg;
        let (d, t, capped) = if t_requested > WALK_LENGTH_CAP as f64 {
            let d = (WALK_LENGTH_CAP as f64 / (100.0 * lg)).cbrt().floor().max(1.0);
            (d as u64, WALK_LENGTH_CAP, true)
        } else {
            (d_requested as u64, t_requested as u64, false)
        };
        Ok(Self::with_effective(n, s, d_requested, t_requested, d, t, capped))
    }

    /// Same derived quantities from explicitly chosen effective `d`/`t`;
    /// the knob tests and benchmarks use to exercise regimes the desk cap
    /// would otherwise pin.
    pub fn custom(n: usize, s: usize, d: u64, t: u64) -> Self {
        Self::with_effective(n, s, d as f64, t as f64, d, t, false)
    }

    fn with_effective(
        n: usize,
        s: usize,
        d_requested: f64,
        t_requested: f64,
        d: u64,
        t: u64,
        capped: bool,
    ) -> Self {
        let lg = f64::from(ceil_log2(n));
        let leader_p = (LEADER_LOG_FACTOR * lg / d as f64).min(1.0);
        let class_budget = (CLASS_BUDGET_FACTOR * n as f64 * lg / d as f64).ceil() as usize;
        SublinearParams { n, s, d_requested, t_requested, d, t, leader_p, capped, class_budget }
    }
}

/// Everything the low-memory pipeline produced.
#[derive(Debug)]
pub struct SublinearOutcome {
    pub partition: ComponentPartition,
    pub stats: RoundStats,
    pub params: SublinearParams,
    /// Vertices of the contracted graph handed to the sketch stage.
    pub contracted_vertices: usize,
    /// Edges of the contracted graph (after dedup).
    pub contracted_edges: usize,
    /// Edges the coordinator decoded out of the payloads.
    pub decoded_edges: usize,
    /// Borůvka stages the decode consumed.
    pub sketch_stages: u32,
    /// Words held by the dedicated coordinator machine; compare against
    /// `params.s` to see how far a desk-scale run is from the regime where
    /// the payloads genuinely fit on one machine.
    pub coordinator_words: usize,
}

/// Connected components under a memory budget of `s` words per machine.
///
/// Pipeline: length-`t` walks from every vertex collect up to `d` distinct
/// same-component contacts (arbitrary input graphs; no regularity needed);
/// the contact graph gets one leader-election round and is contracted by
/// the resulting stars; the contracted graph's per-vertex sketch payloads
/// go to one coordinator, whose Borůvka decode finishes the job. The
/// output partition is verified structurally: every merge is witnessed by
/// a walk path, a star edge or a decoded contracted edge (each decoded
/// edge must exist in the contracted graph), and no input edge may cross
/// two output classes.
pub fn sublinear_conn(g: &Graph, s: usize, seed: u64) -> Result<SublinearOutcome> {
    sublinear_conn_with(g, SublinearParams::new(g.n().max(1), s)?, seed)
}

pub fn sublinear_conn_with(
    g: &Graph,
    params: SublinearParams,
    seed: u64,
) -> Result<SublinearOutcome> {
    if g.n() == 0 {
        return Err(Error::Precondition("connectivity on an empty graph".into()));
    }
    let n = g.n();
    let s = params.s;
    let mut stats = RoundStats::default();

    // Stage 1: walks. The engine is sized for the nominal mark volume; the
    // simulation stops each walk at d distinct contacts, the charges don't.
    let walk_vol =
        (6u128 * n as u128 * (params.t as u128 + 1)).min(usize::MAX as u128) as usize;
    let mut walk_mpc = Mpc::new(MachineConfig::with_memory(s, walk_vol));
    let visited =
        distinct_visit_sets(&mut walk_mpc, g, params.t, params.d, sub_seed(seed, "sub-walk", 0))?;
    stats.merge(&walk_mpc.stats());

    // Stage 2: the contact graph — original edges plus one edge per
    // distinct visited vertex.
    let mut contact = g.clone();
    for (v, list) in visited.iter().enumerate() {
        for &u in list {
            contact.push_edge(Edge::with_batch(v as u32, u, NO_BATCH));
        }
    }
    let mut graph_mpc = Mpc::new(MachineConfig::with_memory(s, 12 * contact.m().max(1)));
    graph_mpc.charge_local_round((3 * contact.m()).max(1))?;

    // Stage 3: leader election at p = min(1, 2·lg n/d) and contraction of
    // the resulting stars. Orphans stay singleton classes.
    let lg = f64::from(ceil_log2(n));
    let le = leader_election(
        &mut graph_mpc,
        &contact,
        params.d as f64,
        LEADER_LOG_FACTOR * lg,
        sub_seed(seed, "sub-leader", 0),
    )?;
    let contraction = contract(&mut graph_mpc, &contact, &le.partition)?;
    stats.merge(&graph_mpc.stats());

    let k = contraction.classes;
    if k > params.class_budget {
        return Err(Error::SketchBudget { got: k, budget: params.class_budget });
    }

    // Stage 4: sketch the contracted graph and decode at one coordinator.
    // One round shares the seed, one shuffle ships every payload to the
    // coordinator, one local round decodes.
    let h = contraction.to_graph();
    let shape = SketchShape::for_n(k.max(1))?;
    let coordinator_words = k * shape.payload_words();
    let mut sk_mpc = Mpc::new(MachineConfig::with_memory(s, coordinator_words.max(1)));
    sk_mpc.charge_local_round(k.max(1))?;
    let sketches = build_vertex_sketches(&h, sub_seed(seed, "sub-sketch", 0))?;
    sk_mpc.charge_shuffle(coordinator_words.max(1))?;
    let detail = recover_detail(&sketches, k, sub_seed(seed, "sub-sketch", 0))?;
    sk_mpc.charge_local_round(coordinator_words.max(1))?;
    stats.merge(&sk_mpc.stats());

    // Every decoded edge must be a real contracted edge: that pins each
    // sketch-stage merge to a witnessed crossing pair (whose own witness
    // is an original or walk edge), closing the chain walk → star → sketch.
    let h_edges: HashSet<(u32, u32)> = contraction.edges.iter().copied().collect();
    for &(a, b) in &detail.decoded {
        if !h_edges.contains(&(a.min(b), a.max(b))) {
            return Err(Error::Verification(format!(
                "sketch decoded ({a},{b}), which is not an edge of the contracted graph"
            )));
        }
    }

    // Lift the contracted partition back to the vertices and check it is
    // not finer than the input's own connectivity.
    let lifted: Vec<u32> =
        (0..n as u32).map(|v| detail.partition.class_of(le.partition.class_of(v))).collect();
    let partition = ComponentPartition::from_labels(&lifted);
    let mut verify_mpc = Mpc::new(MachineConfig::with_memory(s, 6 * g.m().max(1)));
    verify_mpc.charge_shuffle((3 * g.m()).max(1))?;
    for e in g.edges() {
        if partition.class_of(e.a) != partition.class_of(e.b) {
            return Err(Error::Verification(format!(
                "edge ({},{}) crosses two output classes: partition is finer than the \
                 graph's components",
                e.a, e.b
            )));
        }
    }
    verify_mpc.charge_local_round(n)?;
    stats.merge(&verify_mpc.stats());

    Ok(SublinearOutcome {
        partition,
        stats,
        params,
        contracted_vertices: k,
        contracted_edges: contraction.edges.len(),
        decoded_edges: detail.decoded.len(),
        sketch_stages: detail.stages,
        coordinator_words,
    })
}
