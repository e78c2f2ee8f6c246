//! Massively parallel random walks on a layered universe.
//!
//! A length-`t` walk from every vertex is simulated at once by sampling a
//! *layered* graph: the universe is `V × [2t] × [t+1]` (vertex, copy, layer),
//! and every layered vertex in layers `0..t` samples exactly one outgoing
//! choice — a neighbor slot plus a copy in the next layer. Because each
//! layered vertex has out-degree one, the walk from any source is the unique
//! pointer path, and `log t` rounds of pointer doubling on the engine recover
//! all endpoints simultaneously. The `2t` copies per layer spread concurrent
//! walks out so that most paths are vertex-disjoint, which is what makes the
//! joint endpoint sample close to a product distribution.
//!
//! On top of the doubled tables this module provides:
//! * [`detect_independence`] — the set of sources whose paths share no
//!   layered vertex with any other source path;
//! * [`collect_visited`] — the ordered base-vertex sequence of chosen walks;
//! * [`independent_walks`] — repeated trials until every vertex has an
//!   endpoint from a path that was pairwise disjoint in its trial;
//! * [`randomize_components`] — replaces each component's edge set by bundles
//!   of walk endpoints, randomizing its topology without ever merging
//!   components.

use std::collections::HashSet;
use std::io::Write as IoWrite;

use crate::engine::{DistributedRecords, MachineConfig, Mpc, Rec, RoundStats};
use crate::error::{Error, Result};
use crate::graph::{add_self_loops, pad_to_uniform_degree, Adjacency, Edge, Graph, NO_BATCH};
use crate::rng::{self, keyed_uniform, sub_seed};
use rand::Rng as _;

/// Largest layered-universe size for which the pointer tables are held as
/// materialized arrays. Above this the walk still runs (and is charged
/// identically), but endpoints are computed by re-deriving each source's
/// pointer path from the keyed sampler instead of storing `N_0..N_{log t}`.
pub const TABLE_CAP: usize = 1 << 22;

/// Default multiplier `c` in `trials = ⌈c · log₂ n⌉` for [`independent_walks`].
pub const DEFAULT_TRIALS_FACTOR: u32 = 2;

/// Default trial count for [`independent_walks`]: `⌈2·log₂ n⌉`, at least 1.
pub fn default_trials(n: usize) -> usize {
    let lg = (n.max(1) as f64).log2();
    ((DEFAULT_TRIALS_FACTOR as f64 * lg).ceil() as usize).max(1)
}

/// The sampled layered graph: walk length, copy width, and the seed that
/// keys every layered vertex's single outgoing choice. Choices are never
/// stored; they are recomputed on demand from the seed, so the sample costs
/// O(1) words per layered vertex regardless of the `Δ·2t` potential edges.
#[derive(Clone, Copy, Debug)]
pub struct LayeredSample {
    /// Number of base-graph vertices.
    pub n: usize,
    /// Walk length as requested by the caller.
    pub t_requested: u32,
    /// Walk length actually used: `t_requested` rounded up to a power of two.
    pub t: u32,
    /// Copies per layer (`2t`).
    pub copies: u32,
    /// Seed keying all layered-vertex choices.
    pub seed: u64,
}

impl LayeredSample {
    /// Total number of layered vertices: `n · copies · (t+1)`.
    pub fn universe(&self) -> usize {
        self.n * self.copies as usize * (self.t as usize + 1)
    }

    /// Dense index of the layered vertex `(v, copy, layer)`. Layer-major,
    /// then copy, then vertex — so the walk sources `(v, 0, 0)` occupy the
    /// first `n` indices.
    pub fn index(&self, v: u32, copy: u32, layer: u32) -> usize {
        (layer as usize * self.copies as usize + copy as usize) * self.n + v as usize
    }

    /// Inverse of [`LayeredSample::index`]: `(vertex, copy, layer)`.
    pub fn locate(&self, idx: usize) -> (u32, u32, u32) {
        let v = (idx % self.n) as u32;
        let rest = idx / self.n;
        (v, (rest % self.copies as usize) as u32, (rest / self.copies as usize) as u32)
    }

    /// The single sampled out-choice of a layered vertex: a slot in
    /// `[walk_degree)` and a copy in the next layer. Stateless: recomputing
    /// with the same seed always yields the same choice.
    pub fn choice(&self, idx: usize, walk_degree: u64) -> (u64, u32) {
        let slot = keyed_uniform(self.seed, idx as u64, 0, walk_degree);
        let copy = keyed_uniform(self.seed, idx as u64, 1, u64::from(self.copies)) as u32;
        (slot, copy)
    }
}

/// Pointer tables from the doubling phases. Level `k` maps every layered
/// vertex to the one `2^k` steps along its unique out-path; entries in the
/// last layer point to themselves (the path has ended), so composing a level
/// with itself is always well defined and `levels[log t][source]` is the
/// endpoint of the full-length walk.
#[derive(Debug)]
pub enum PointerTable {
    /// Materialized levels `N_0 ..= N_{log t}`.
    Full { levels: Vec<Vec<u64>> },
    /// Universe larger than [`TABLE_CAP`]: endpoints were computed by
    /// per-source path recomputation under identical round charges, and no
    /// tables are retained. Path-level queries are unavailable in this mode.
    EndpointsOnly,
}

impl PointerTable {
    fn levels(&self) -> Result<&[Vec<u64>]> {
        match self {
            PointerTable::Full { levels } => Ok(levels),
            PointerTable::EndpointsOnly => Err(Error::Precondition(
                "operation requires materialized pointer tables, but the layered universe \
                 exceeded the materialization cap"
                    .into(),
            )),
        }
    }
}

/// Result of simulating one batch of length-`t` walks from every vertex.
#[derive(Debug)]
pub struct WalkOutcome {
    pub sample: LayeredSample,
    pub table: PointerTable,
    /// `endpoints[u]` = final vertex of the walk started at `u`.
    pub endpoints: Vec<u32>,
    pub stats: RoundStats,
}

/// Adjacency plus uniform walk degree, shared by all walk routines.
struct WalkView {
    adj: Adjacency,
    walk_deg: Vec<u64>,
}

impl WalkView {
    fn new(g: &Graph) -> Self {
        WalkView { adj: g.adjacency(), walk_deg: g.walk_degrees() }
    }

    /// Follow slot `slot` out of `v`: standard slots in canonical port order,
    /// then stay slots (walk remains at `v`).
    fn step(&self, v: u32, slot: u64) -> u32 {
        let lo = self.adj.offsets[v as usize];
        let hi = self.adj.offsets[v as usize + 1];
        if slot < (hi - lo) as u64 {
            self.adj.targets[lo + slot as usize]
        } else {
            v
        }
    }
}

/// Dense successor of a layered vertex (self once the last layer is reached).
fn successor(sample: &LayeredSample, view: &WalkView, idx: usize) -> usize {
    let (v, _, layer) = sample.locate(idx);
    if layer == sample.t {
        return idx;
    }
    let (slot, copy) = sample.choice(idx, view.walk_deg[v as usize]);
    sample.index(view.step(v, slot), copy, layer + 1)
}

fn validate_walk_input(g: &Graph, t: u32) -> Result<u32> {
    if g.n() == 0 {
        return Err(Error::Precondition("walk on empty graph".into()));
    }
    if g.has_isolated_vertices() {
        return Err(Error::Precondition(
            "walks are undefined on graphs with isolated vertices".into(),
        ));
    }
    if !g.is_regular() {
        return Err(Error::Precondition(
            "walk input must be regular, or lazily augmented with stay slots to a uniform \
             walk degree"
                .into(),
        ));
    }
    let t_used = t.max(1).next_power_of_two();
    if t_used != t && g.stay_slots() == 0 {
        return Err(Error::Precondition(format!(
            "walk length {t} is padded to {t_used}, which only preserves the walk \
             distribution on lazily augmented graphs (no stay slots present)"
        )));
    }
    Ok(t_used)
}

/// Simulate a length-`t` random walk from every vertex of a regular (or
/// lazily augmented) graph, all at once.
///
/// The walk length is rounded up to the next power of two (extra steps are
/// lazy no-ops, hence the augmentation requirement when rounding occurs).
/// `log t` pointer-doubling phases run on the engine sized for the layered
/// universe; with the balanced machine layout each phase costs
/// `⌈log_s |universe|⌉` rounds. Endpoint `u` is distributed as the t-step
/// walk transition from `u` restricted to `u`'s component.
pub fn simple_random_walk(g: &Graph, t: u32, seed: u64) -> Result<WalkOutcome> {
    walk_inner(g, t, seed, TABLE_CAP)
}

pub(crate) fn walk_inner(g: &Graph, t: u32, seed: u64, table_cap: usize) -> Result<WalkOutcome> {
    let t_used = validate_walk_input(g, t)?;
    let n = g.n();
    let view = WalkView::new(g);
    let sample =
        LayeredSample { n, t_requested: t, t: t_used, copies: 2 * t_used, seed };
    let universe = sample.universe();
    let phases = t_used.trailing_zeros(); // log2 of the padded walk length
    let mut mpc = Mpc::new(MachineConfig::balanced(universe));

    let (table, endpoints) = if universe <= table_cap {
        let rows: Vec<u64> =
            (0..universe).map(|idx| successor(&sample, &view, idx) as u64).collect();
        let mut levels = vec![mpc.dense_from(rows)?];
        for _ in 0..phases {
            let prev = levels.last().unwrap();
            let next = mpc.dense_gather(prev, prev)?;
            levels.push(next);
        }
        // Sources are the first n rows of the top table; extracting their
        // endpoints is one local round over n words.
        let top = levels.last().unwrap();
        let endpoints: Vec<u32> =
            (0..n).map(|u| sample.locate(top.rows[u] as usize).0).collect();
        mpc.charge_local_round(n)?;
        let levels = levels.into_iter().map(|d| d.rows).collect();
        (PointerTable::Full { levels }, endpoints)
    } else {
        // Same program, same charges, no materialization: one round to write
        // N_0, then one gather-shaped shuffle of 2·|universe| words per
        // doubling phase, then the endpoint extraction round.
        mpc.charge_local_round(universe)?;
        for _ in 0..phases {
            mpc.charge_shuffle(2 * universe)?;
        }
        let mut endpoints = Vec::with_capacity(n);
        for u in 0..n {
            let mut idx = u; // index(u, 0, 0) == u
            for _ in 0..t_used {
                idx = successor(&sample, &view, idx);
            }
            endpoints.push(sample.locate(idx).0);
        }
        mpc.charge_local_round(n)?;
        (PointerTable::EndpointsOnly, endpoints)
    };

    Ok(WalkOutcome { sample, table, endpoints, stats: mpc.stats() })
}

/// One record of the mark-set expansion: a layered vertex known to lie on
/// some source's path, with the source slot and the position along the walk.
#[derive(Clone, Copy)]
struct Mark {
    idx: u64,
    src: u32,
    pos: u32,
}

/// Expand the walk paths of `sources` (given as base-vertex ids) into the
/// full list of `(layered vertex, source, position)` marks via descending
/// doubling: seed positions {0, t}, then level `k` fills position `p + 2^(k-1)`
/// from every known position `p` when it stays within the walk. Each of the
/// `t+1` positions of each path is produced exactly once.
fn expand_marks(
    mpc: &mut Mpc,
    sample: &LayeredSample,
    levels: &[Vec<u64>],
    sources: &[u32],
) -> Result<Vec<Mark>> {
    let t = sample.t;
    let top = levels.len() - 1;
    let mut marks = Vec::with_capacity(sources.len() * (t as usize + 1));
    for (slot, &u) in sources.iter().enumerate() {
        let start = sample.index(u, 0, 0) as u64;
        marks.push(Mark { idx: start, src: slot as u32, pos: 0 });
        marks.push(Mark { idx: levels[top][start as usize], src: slot as u32, pos: t });
    }
    for k in (1..=top).rev() {
        let step = 1u32 << (k - 1);
        // One gather-shaped exchange of the current mark-set (3 words each).
        mpc.charge_shuffle(2 * 3 * marks.len())?;
        let cur = marks.len();
        for i in 0..cur {
            let m = marks[i];
            // Positions below t are reached by summing distinct powers in
            // descending order; position t itself was seeded, so it is
            // explicitly excluded to keep every (source, position) unique.
            if m.pos + step < t {
                marks.push(Mark {
                    idx: levels[k - 1][m.idx as usize],
                    src: m.src,
                    pos: m.pos + step,
                });
            }
        }
    }
    Ok(marks)
}

/// Return the walk sources whose paths are vertex-disjoint, in the layered
/// graph, from the path of every other source.
///
/// All `n·(t+1)` path marks are expanded by descending pointer doubling and
/// sorted by layered vertex on the engine; a layered vertex claimed by two
/// or more distinct sources disqualifies all of them.
pub fn detect_independence(
    mpc: &mut Mpc,
    sample: &LayeredSample,
    table: &PointerTable,
) -> Result<Vec<u32>> {
    let levels = table.levels()?;
    let sources: Vec<u32> = (0..sample.n as u32).collect();
    let marks = expand_marks(mpc, sample, levels, &sources)?;

    let recs: Vec<Rec> =
        marks.iter().map(|m| Rec::new(m.idx, u64::from(m.src), u64::from(m.pos))).collect();
    let state = DistributedRecords::from_vec(recs, mpc.cfg())?;
    let sorted = mpc.parallel_sort(state, |r| u128::from(r.k))?;

    let mut conflicted = vec![false; sample.n];
    let mut prev: Option<(u64, u32)> = None;
    for rec in sorted.iter() {
        if let Some((k, prev_src)) = prev {
            if rec.k == k {
                // Two path marks on one layered vertex: every involved source
                // is dependent. (A path visits each layer once, so its own
                // marks are distinct — equal keys always mean distinct
                // sources.)
                conflicted[prev_src as usize] = true;
                conflicted[rec.a as usize] = true;
            }
        }
        prev = Some((rec.k, rec.a as u32));
    }

    Ok((0..sample.n as u32).filter(|&u| !conflicted[u as usize]).collect())
}

/// Recover the ordered base-vertex sequences (length `t+1`) of the walks
/// started at `sources`. Output is parallel to `sources`.
pub fn collect_visited(
    mpc: &mut Mpc,
    sample: &LayeredSample,
    table: &PointerTable,
    sources: &[u32],
) -> Result<Vec<Vec<u32>>> {
    let levels = table.levels()?;
    let marks = expand_marks(mpc, sample, levels, sources)?;

    let recs: Vec<Rec> =
        marks.iter().map(|m| Rec::new(m.idx, u64::from(m.src), u64::from(m.pos))).collect();
    let state = DistributedRecords::from_vec(recs, mpc.cfg())?;
    let sorted = mpc.parallel_sort(state, |r| (u128::from(r.a) << 32) | u128::from(r.b))?;

    let len = sample.t as usize + 1;
    let mut lists = vec![Vec::with_capacity(len); sources.len()];
    for rec in sorted.iter() {
        lists[rec.a as usize].push(sample.locate(rec.k as usize).0);
    }
    debug_assert!(lists.iter().all(|l| l.len() == len));
    Ok(lists)
}

/// Write one comma-separated visited list per line.
pub fn write_walk_trace<W: IoWrite>(lists: &[Vec<u32>], mut w: W) -> Result<()> {
    for list in lists {
        let line: Vec<String> = list.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Jointly independent per-vertex walk endpoints.
#[derive(Debug)]
pub struct IndepOutcome {
    /// `endpoints[u]` = endpoint of the accepted walk for `u`.
    pub endpoints: Vec<u32>,
    /// Lowest trial index in which `u`'s path was pairwise vertex-disjoint
    /// from all other paths of that trial.
    pub trial: Vec<u32>,
    /// Walk length after power-of-two padding.
    pub t: u32,
    /// When requested, the visited list of each vertex's accepted walk.
    pub visited: Option<Vec<Vec<u32>>>,
    pub stats: RoundStats,
}

/// Run up to `trials` batches of [`simple_random_walk`] and assign every
/// vertex the endpoint from the lowest-indexed trial in which its path was
/// vertex-disjoint from all other paths; acceptance makes the joint endpoint
/// sample close to the product of the per-vertex walk distributions.
///
/// `trials` should be at least `⌈2·log₂ n⌉` (see [`default_trials`]); each
/// trial accepts each vertex with probability ≥ roughly 1/2, so that many
/// trials cover every vertex with high probability. Remaining vertices after
/// the last trial are an error — no silent fallback. Trials after full
/// coverage are skipped.
pub fn independent_walks(
    g: &Graph,
    t: u32,
    seed: u64,
    trials: usize,
    collect_paths: bool,
) -> Result<IndepOutcome> {
    if trials == 0 {
        return Err(Error::Precondition("independent_walks needs at least one trial".into()));
    }
    let n = g.n();
    let mut endpoints = vec![0u32; n];
    let mut trial = vec![u32::MAX; n];
    let mut visited: Option<Vec<Vec<u32>>> = collect_paths.then(|| vec![Vec::new(); n]);
    let mut stats = RoundStats::default();
    let mut detect_mpc: Option<Mpc> = None;
    let mut t_used = 0;
    let mut covered = 0usize;

    for tr in 0..trials as u32 {
        let wo = walk_inner(g, t, sub_seed(seed, "walk-trial", u64::from(tr)), TABLE_CAP)?;
        if matches!(wo.table, PointerTable::EndpointsOnly) {
            return Err(Error::Precondition(
                "independent_walks requires materialized pointer tables; the layered \
                 universe exceeds the materialization cap"
                    .into(),
            ));
        }
        t_used = wo.sample.t;
        stats.merge(&wo.stats);
        let dmpc = detect_mpc.get_or_insert_with(|| {
            Mpc::new(MachineConfig::balanced(3 * n * (wo.sample.t as usize + 1)))
        });
        let accepted = detect_independence(dmpc, &wo.sample, &wo.table)?;
        let newly: Vec<u32> =
            accepted.into_iter().filter(|&u| trial[u as usize] == u32::MAX).collect();
        for &u in &newly {
            trial[u as usize] = tr;
            endpoints[u as usize] = wo.endpoints[u as usize];
        }
        if let Some(lists) = visited.as_mut() {
            for (u, path) in
                newly.iter().zip(collect_visited(dmpc, &wo.sample, &wo.table, &newly)?)
            {
                lists[*u as usize] = path;
            }
        }
        covered += newly.len();
        if covered == n {
            break;
        }
    }

    if let Some(dmpc) = detect_mpc {
        stats.merge(&dmpc.stats());
    }
    let uncovered: Vec<u32> =
        (0..n as u32).filter(|&u| trial[u as usize] == u32::MAX).collect();
    if !uncovered.is_empty() {
        return Err(Error::WalkCoverFailure { uncovered, total: n });
    }
    Ok(IndepOutcome { endpoints, trial, t: t_used, visited, stats })
}

/// Distinct vertices (other than the start) seen by a length-`t` walk from
/// every vertex, on an **arbitrary** graph — no regularity or isolation
/// preconditions. Degree-0 vertices simply stay put and report an empty
/// list.
///
/// This is the loose walk mode used by the low-memory connectivity
/// pipeline: each walk only has to *reach* `target` distinct vertices, so
/// the simulation stops early once a walk has seen `target` distinct
/// non-start vertices (or after `t` steps, whichever comes first). Walks
/// use fresh per-vertex randomness; only the marginal law of each walk
/// matters to callers, not joint independence.
///
/// Round accounting always covers the full nominal program — `⌈log₂ t⌉`
/// pointer-doubling phases plus the position-expansion and deduplication
/// shuffles over all `n·(t+1)` walk positions — so charges do not depend
/// on where the simulation short-circuits. Size the engine for
/// `6·n·(t+1)` words.
pub fn distinct_visit_sets(
    mpc: &mut Mpc,
    g: &Graph,
    t: u64,
    target: u64,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if g.n() == 0 {
        return Err(Error::Precondition("walk on empty graph".into()));
    }
    if t == 0 || target == 0 {
        return Err(Error::Precondition("distinct_visit_sets needs t ≥ 1 and target ≥ 1".into()));
    }
    let n = g.n();
    let adj = g.adjacency();
    let wd = g.walk_degrees();

    // Doubling phases: build the 1-step table, then square it ⌈log₂ t⌉
    // times; each phase also expands the known walk positions (the mark
    // volume doubles per phase until it covers all t+1 positions).
    let phases = t.next_power_of_two().trailing_zeros();
    let full_marks = 6u128 * n as u128 * (t as u128 + 1);
    let clamp = |v: u128| v.min(usize::MAX as u128) as usize;
    mpc.charge_shuffle((6 * g.m()).max(1))?;
    for k in 1..=phases {
        mpc.charge_shuffle((6 * n).max(1))?;
        mpc.charge_shuffle(clamp((6u128 * n as u128) << k).min(clamp(full_marks)).max(1))?;
    }
    // Sort all positions to distinct (source, vertex) pairs.
    mpc.charge_shuffle(clamp(full_marks / 2).max(1))?;

    let mut lists = Vec::with_capacity(n);
    let mut out_words = 0usize;
    for v in 0..n as u32 {
        let mut r = rng::stream(seed, "visit", u64::from(v));
        let mut seen: HashSet<u32> = HashSet::new();
        let mut cur = v;
        if wd[v as usize] > 0 {
            for _ in 0..t {
                let slot = r.random_range(0..wd[cur as usize]);
                let lo = adj.offsets[cur as usize];
                let hi = adj.offsets[cur as usize + 1];
                cur = if slot < (hi - lo) as u64 {
                    adj.targets[lo + slot as usize]
                } else {
                    cur
                };
                if cur != v {
                    seen.insert(cur);
                    if seen.len() as u64 >= target {
                        break;
                    }
                }
            }
        }
        let mut list: Vec<u32> = seen.into_iter().collect();
        list.sort_unstable();
        out_words += 3 * list.len();
        lists.push(list);
    }
    mpc.charge_local_round(out_words.max(1))?;
    Ok(lists)
}

/// Result of replacing every component's topology by walk-endpoint bundles.
pub struct RandomizeOutcome {
    /// Same vertex set; `k · n` endpoint edges, each labeled with its batch.
    pub h: Graph,
    /// Walk length used (after padding).
    pub t: u32,
    /// Number of walk batches (one edge per vertex per batch).
    pub k: u32,
    pub stats: RoundStats,
}

/// Randomize every component of a regular graph: run `k = ⌈50·log₂ n⌉`
/// batches of length-`T` walks on the lazily augmented graph and keep, for
/// each vertex and batch, the edge from the vertex to its walk endpoint.
///
/// Walks cannot leave a component, so the output partitions vertices exactly
/// as the input does; within each component the `k` endpoint bundles form a
/// near-uniform random multigraph once `T` reaches the component's mixing
/// time (callers are responsible for choosing `T` that large).
pub fn randomize_components(g: &Graph, t: u32, seed: u64) -> Result<RandomizeOutcome> {
    let k = (50.0 * (g.n().max(1) as f64).log2()).ceil() as u32;
    randomize_components_with_batches(g, t, seed, k)
}

/// [`randomize_components`] with an explicit batch count (the connectivity
/// pipeline uses small per-phase batches instead of the full `50·log₂ n`).
pub fn randomize_components_with_batches(
    g: &Graph,
    t: u32,
    seed: u64,
    k: u32,
) -> Result<RandomizeOutcome> {
    if g.n() == 0 {
        return Err(Error::Precondition("randomize_components on empty graph".into()));
    }
    if g.has_isolated_vertices() {
        return Err(Error::Precondition(
            "randomize_components requires minimum degree 1 (exclude isolated vertices \
             upstream)"
                .into(),
        ));
    }
    if k >= u32::from(NO_BATCH) {
        return Err(Error::Precondition(format!(
            "batch count {k} exceeds the batch label space"
        )));
    }
    let n = g.n();
    // Walks need one uniform slot bound; near-regular inputs are padded
    // with stay slots up to the maximum degree, which preserves the uniform
    // stationary distribution on every component.
    let base = if g.is_regular() { g.clone() } else { pad_to_uniform_degree(g) };
    let delta = base.walk_degrees()[0];
    // Lazy reduction: one stay slot per unit of walk degree halves every
    // step, making walk-length padding and mixing-time bounds applicable.
    let lazy = add_self_loops(&base, delta as u32);
    let t_used = t.max(1).next_power_of_two();

    let mut stats = RoundStats::default();
    let mut outer = Mpc::new(MachineConfig::balanced(3 * n * (k as usize).max(1)));
    let mut edges = Vec::with_capacity(n * k as usize);
    for b in 0..k {
        // Endpoint-only mode: bundles need no path queries, and the charges
        // are identical to the materialized program.
        let wo = walk_inner(&lazy, t_used, sub_seed(seed, "randomize-batch", u64::from(b)), 0)?;
        stats.merge(&wo.stats);
        for (u, &v) in wo.endpoints.iter().enumerate() {
            edges.push(Edge::with_batch(u as u32, v, b as u16));
        }
        outer.charge_local_round(3 * n)?;
    }
    let h = Graph::from_edges(n, edges)?;
    stats.merge(&outer.stats());
    Ok(RandomizeOutcome { h, t: t_used, k, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, disjoint_union, oracle_components};
    use crate::regularize::sample_permutation_model;
    use crate::spectral::mixing_time;

    /// Exact walk transition matrix (slot-uniform, stay slots included).
    fn transition(g: &Graph) -> Vec<Vec<f64>> {
        let n = g.n();
        let adj = g.adjacency();
        let wd = g.walk_degrees();
        let mut w = vec![vec![0.0; n]; n];
        for v in 0..n {
            let p = 1.0 / wd[v] as f64;
            for &u in adj.neighbors(v as u32) {
                w[v][u as usize] += p;
            }
            w[v][v] += (wd[v] - (adj.offsets[v + 1] - adj.offsets[v]) as u64) as f64 * p;
        }
        w
    }

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i][k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
        c
    }

    fn matpow(w: &[Vec<f64>], t: u32) -> Vec<Vec<f64>> {
        let mut out = w.to_vec();
        for _ in 1..t {
            out = matmul(&out, w);
        }
        out
    }

    /// Naive endpoint: follow the sampled layered pointers one step at a time.
    fn naive_endpoint(sample: &LayeredSample, view: &WalkView, u: u32) -> u32 {
        let mut idx = sample.index(u, 0, 0);
        for _ in 0..sample.t {
            idx = successor(sample, view, idx);
        }
        sample.locate(idx).0
    }

    fn naive_path(sample: &LayeredSample, view: &WalkView, u: u32) -> Vec<usize> {
        let mut idx = sample.index(u, 0, 0);
        let mut path = vec![idx];
        for _ in 0..sample.t {
            idx = successor(sample, view, idx);
            path.push(idx);
        }
        path
    }

    #[test]
    fn universe_size_and_index_roundtrip() {
        let g = sample_permutation_model(10, 4, 3);
        let wo = simple_random_walk(&g, 4, 7).unwrap();
        let s = wo.sample;
        assert_eq!(s.t, 4);
        assert_eq!(s.copies, 8);
        assert_eq!(s.universe(), 10 * (2 * 4) * (4 + 1));
        if let PointerTable::Full { levels } = &wo.table {
            assert_eq!(levels.len(), 3); // N_0, N_1, N_2
            assert!(levels.iter().all(|l| l.len() == s.universe()));
        } else {
            panic!("expected materialized tables");
        }
        for idx in 0..s.universe() {
            let (v, c, l) = s.locate(idx);
            assert_eq!(s.index(v, c, l), idx);
            assert!(v < 10 && c < 8 && l <= 4);
        }
    }

    #[test]
    fn pointer_tables_match_naive_traversal() {
        // Universe 32·32·17 = 17408 ≤ 1e5: exhaustive equivalence of every
        // level against step-by-step pointer chasing.
        let g = sample_permutation_model(32, 4, 11);
        let wo = simple_random_walk(&g, 16, 99).unwrap();
        let view = WalkView::new(&g);
        let s = wo.sample;
        let levels = match &wo.table {
            PointerTable::Full { levels } => levels,
            _ => panic!("expected materialized tables"),
        };
        for (k, level) in levels.iter().enumerate() {
            let hops = 1usize << k;
            for alpha in 0..s.universe() {
                let mut idx = alpha;
                for _ in 0..hops {
                    idx = successor(&s, &view, idx);
                }
                assert_eq!(level[alpha] as usize, idx, "level {k} vertex {alpha}");
            }
        }
        for u in 0..32u32 {
            assert_eq!(wo.endpoints[u as usize], naive_endpoint(&s, &view, u));
        }
    }

    #[test]
    fn endpoint_mode_matches_materialized_tables() {
        // Same seed, two execution strategies: identical endpoints and
        // identical round/traffic charges.
        let g = sample_permutation_model(32, 4, 5);
        let full = walk_inner(&g, 16, 42, usize::MAX).unwrap();
        let lean = walk_inner(&g, 16, 42, 0).unwrap();
        assert!(matches!(lean.table, PointerTable::EndpointsOnly));
        assert_eq!(full.endpoints, lean.endpoints);
        assert_eq!(full.stats.rounds, lean.stats.rounds);
        assert_eq!(full.stats.total, lean.stats.total);

        // Balanced sizing pins each doubling phase at ⌈log_s U⌉ = 2 rounds
        // here: 1 (write N_0) + 4 phases · 2 + 1 (endpoint extraction) = 10.
        assert_eq!(full.stats.rounds, 10);
    }

    #[test]
    fn walk_length_padding_rules() {
        let g = sample_permutation_model(16, 4, 2);
        // Non-power-of-two length on a graph without stay slots: refused.
        let err = simple_random_walk(&g, 5, 1).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        // Power of two: accepted as-is.
        let wo = simple_random_walk(&g, 8, 1).unwrap();
        assert_eq!(wo.sample.t, 8);
        // Lazy augmentation: padded up, request recorded.
        let lazy = add_self_loops(&g, 4);
        let wo = simple_random_walk(&lazy, 5, 1).unwrap();
        assert_eq!(wo.sample.t_requested, 5);
        assert_eq!(wo.sample.t, 8);
        assert_eq!(wo.sample.copies, 16);
    }

    #[test]
    fn single_step_walk_is_uniform_neighbor() {
        let g = complete(4);
        let mut counts = [0usize; 4];
        let runs = 6000;
        for seed in 0..runs {
            let wo = simple_random_walk(&g, 1, seed as u64).unwrap();
            counts[wo.endpoints[0] as usize] += 1;
        }
        assert_eq!(counts[0], 0, "one step from 0 cannot stay at 0 in K4");
        let tv: f64 = counts[1..]
            .iter()
            .map(|&c| (c as f64 / runs as f64 - 1.0 / 3.0).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "one-step endpoint TV {tv} vs uniform neighbor");
    }

    #[test]
    fn k3_endpoints_match_fourth_transition_power() {
        // Empirical endpoint distribution over 1e5 sampled layered graphs vs
        // the exact 4-step transition matrix, per source.
        let g = complete(3);
        let w4 = matpow(&transition(&g), 4);
        let runs = 100_000usize;
        let mut counts = [[0usize; 3]; 3];
        for seed in 0..runs {
            let wo = walk_inner(&g, 4, seed as u64, 0).unwrap();
            for u in 0..3 {
                counts[u][wo.endpoints[u] as usize] += 1;
            }
        }
        for u in 0..3 {
            let tv: f64 = (0..3)
                .map(|v| (counts[u][v] as f64 / runs as f64 - w4[u][v]).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.02, "source {u}: TV {tv} vs exact 4-step transition");
        }
    }

    #[test]
    fn endpoint_marginals_match_transition_power_on_regular_bases() {
        // 1e4 runs per base, n ≤ 64: every vertex's endpoint marginal within
        // TV 0.03 of the exact t-step transition row.
        for (g, t, base_seed) in [
            (sample_permutation_model(24, 4, 8), 8u32, 1000u64),
            (add_self_loops(&cycle(12), 2), 4, 2000),
        ] {
            let wt = matpow(&transition(&g), t);
            let n = g.n();
            let runs = 10_000usize;
            let mut counts = vec![vec![0usize; n]; n];
            for r in 0..runs {
                let wo = walk_inner(&g, t, base_seed + r as u64, 0).unwrap();
                for u in 0..n {
                    counts[u][wo.endpoints[u] as usize] += 1;
                }
            }
            for u in 0..n {
                let tv: f64 = (0..n)
                    .map(|v| (counts[u][v] as f64 / runs as f64 - wt[u][v]).abs())
                    .sum::<f64>()
                    / 2.0;
                assert!(tv <= 0.03, "n={n} t={t} source {u}: TV {tv}");
            }
        }
    }

    #[test]
    fn path_counts_into_layers_match_closed_form() {
        // In the *full* layered graph (every neighbor slot × every copy),
        // the number of source paths into any fixed vertex of layer j
        // (1-indexed) is Δ^(j−1)·(2t)^(j−2). DP over layers, all cells.
        for (g, t) in [
            (complete(3), 2u32),
            (sample_permutation_model(8, 4, 1), 4),
            (add_self_loops(&complete(3), 2), 2),
        ] {
            let view = WalkView::new(&g);
            let n = g.n();
            let delta = g.walk_degrees()[0];
            let copies = 2 * t;
            // ways[v][i] = number of source paths reaching (v, i, layer).
            let mut ways = vec![vec![0u64; copies as usize]; n];
            for v in 0..n {
                ways[v][0] = 1; // sources: copy 0 of layer 1
            }
            for layer in 1..=t {
                let mut next = vec![vec![0u64; copies as usize]; n];
                for u in 0..n as u32 {
                    let from: u64 = ways[u as usize].iter().sum();
                    if from == 0 {
                        continue;
                    }
                    for slot in 0..delta {
                        let v = view.step(u, slot) as usize;
                        for i in 0..copies as usize {
                            next[v][i] += from;
                        }
                    }
                }
                ways = next;
                let j = layer + 1; // 1-indexed layer of `ways`
                let expect = u64::from(delta).pow(j - 1)
                    * u64::from(copies).pow(j.saturating_sub(2));
                for v in 0..n {
                    for i in 0..copies as usize {
                        assert_eq!(
                            ways[v][i], expect,
                            "n={n} t={t} layer {j} cell ({v},{i})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn detection_matches_exhaustive_disjointness() {
        for seed in 0..20u64 {
            let g = sample_permutation_model(24, 4, 1000 + seed);
            let wo = simple_random_walk(&g, 8, seed).unwrap();
            let view = WalkView::new(&g);
            let mut mpc = Mpc::new(MachineConfig::balanced(3 * 24 * 9));
            let got = detect_independence(&mut mpc, &wo.sample, &wo.table).unwrap();

            let paths: Vec<HashSet<usize>> = (0..24u32)
                .map(|u| naive_path(&wo.sample, &view, u).into_iter().collect())
                .collect();
            let expected: Vec<u32> = (0..24u32)
                .filter(|&u| {
                    (0..24u32).all(|v| {
                        v == u || paths[u as usize].is_disjoint(&paths[v as usize])
                    })
                })
                .collect();
            assert_eq!(got, expected, "seed {seed}");
        }
    }

    #[test]
    fn detection_on_single_vertex_returns_its_source() {
        let mut g = Graph::new(1);
        g.push_edge(Edge::new(0, 0)); // walk degree 2: one standard self-loop
        let wo = simple_random_walk(&g, 8, 3).unwrap();
        let mut mpc = Mpc::new(MachineConfig::balanced(64));
        assert_eq!(detect_independence(&mut mpc, &wo.sample, &wo.table).unwrap(), vec![0]);
        assert_eq!(wo.endpoints, vec![0]);
    }

    #[test]
    fn mean_accepted_fraction_meets_half_bound() {
        // Copy-spreading keeps roughly half the sources pairwise disjoint;
        // tested in aggregate: mean accepted fraction ≥ 0.5 − 0.05.
        let mut total = 0.0;
        let seeds = 50;
        for seed in 0..seeds {
            let g = sample_permutation_model(64, 8, 7_000 + seed);
            let wo = simple_random_walk(&g, 8, seed).unwrap();
            let mut mpc = Mpc::new(MachineConfig::balanced(3 * 64 * 9));
            let got = detect_independence(&mut mpc, &wo.sample, &wo.table).unwrap();
            total += got.len() as f64 / 64.0;
        }
        let mean = total / seeds as f64;
        assert!(mean >= 0.45, "mean accepted fraction {mean} < 0.45");
    }

    #[test]
    fn visited_lists_are_exact_walks() {
        // 10_016 audited walks: list length t+1, starts at the source, ends
        // at the endpoint, consecutive entries adjacent or equal (stay
        // steps), and identical to naive pointer chasing.
        let g = add_self_loops(&sample_permutation_model(32, 4, 77), 4);
        let adj = g.adjacency();
        let neighbor_sets: Vec<HashSet<u32>> = (0..32u32)
            .map(|v| adj.neighbors(v).iter().copied().collect())
            .collect();
        let all: Vec<u32> = (0..32).collect();
        for seed in 0..313u64 {
            let wo = simple_random_walk(&g, 8, seed).unwrap();
            let view = WalkView::new(&g);
            let mut mpc = Mpc::new(MachineConfig::balanced(3 * 32 * 9));
            let lists = collect_visited(&mut mpc, &wo.sample, &wo.table, &all).unwrap();
            for (u, list) in lists.iter().enumerate() {
                assert_eq!(list.len(), 9);
                assert_eq!(list[0], u as u32);
                assert_eq!(*list.last().unwrap(), wo.endpoints[u]);
                for pair in list.windows(2) {
                    assert!(
                        pair[0] == pair[1]
                            || neighbor_sets[pair[0] as usize].contains(&pair[1]),
                        "non-step {} -> {}",
                        pair[0],
                        pair[1]
                    );
                }
                let naive: Vec<u32> = naive_path(&wo.sample, &view, u as u32)
                    .into_iter()
                    .map(|idx| wo.sample.locate(idx).0)
                    .collect();
                assert_eq!(*list, naive);
            }
        }
    }

    #[test]
    fn visited_list_of_one_step_walk_has_two_entries() {
        let g = complete(4);
        let wo = simple_random_walk(&g, 1, 9).unwrap();
        let mut mpc = Mpc::new(MachineConfig::balanced(64));
        let lists = collect_visited(&mut mpc, &wo.sample, &wo.table, &[2]).unwrap();
        assert_eq!(lists.len(), 1);
        assert_eq!(lists[0].len(), 2);
        assert_eq!(lists[0][0], 2);
    }

    #[test]
    fn walk_trace_dump_one_line_per_source() {
        let lists = vec![vec![0, 1, 2], vec![5, 5, 4]];
        let mut buf = Vec::new();
        write_walk_trace(&lists, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1,2\n5,5,4\n");
    }

    #[test]
    fn distinct_visited_covers_small_component() {
        // A walk in a size-c component should see min{c, d} distinct
        // vertices well within d³·log n steps; empirically ≥ 95% of walks.
        let d = 6usize;
        let g = sample_permutation_model(12, d, 4); // connected for this seed
        assert_eq!(oracle_components(&g).class_count(), 1);
        let all: Vec<u32> = (0..12).collect();
        let mut hits = 0usize;
        let mut walks = 0usize;
        for seed in 0..40u64 {
            let wo = simple_random_walk(&g, 128, 500 + seed).unwrap();
            let mut mpc = Mpc::new(MachineConfig::balanced(3 * 12 * 129));
            for list in collect_visited(&mut mpc, &wo.sample, &wo.table, &all).unwrap() {
                let distinct: HashSet<u32> = list.into_iter().collect();
                walks += 1;
                if distinct.len() >= d.min(12) {
                    hits += 1;
                }
            }
        }
        let rate = hits as f64 / walks as f64;
        assert!(rate >= 0.95, "distinct-visit rate {rate}");
    }

    #[test]
    fn independent_walks_cover_regular_expander_every_seed() {
        // 1024-vertex 8-regular base, t=16, 20 trials (= default ⌈2·log₂ n⌉):
        // every vertex covered, for all 50 seeds.
        assert_eq!(default_trials(1024), 20);
        let g = sample_permutation_model(1024, 8, 123);
        for seed in 0..50u64 {
            let out = independent_walks(&g, 16, seed, 20, false).unwrap();
            assert!(out.trial.iter().all(|&tr| tr < 20));
            assert_eq!(out.endpoints.len(), 1024);
        }
        // Determinism: the same seed reproduces endpoints and trials.
        let a = independent_walks(&g, 16, 0, 20, false).unwrap();
        let b = independent_walks(&g, 16, 0, 20, false).unwrap();
        assert_eq!(a.endpoints, b.endpoints);
        assert_eq!(a.trial, b.trial);
    }

    #[test]
    fn single_trial_on_slow_cycle_reports_uncovered() {
        // Walks on a cycle overlap heavily; one trial cannot cover everyone.
        let g = cycle(32);
        for seed in 0..5u64 {
            match independent_walks(&g, 8, seed, 1, false) {
                Err(Error::WalkCoverFailure { uncovered, total }) => {
                    assert_eq!(total, 32);
                    assert!(!uncovered.is_empty());
                    assert!(uncovered.windows(2).all(|w| w[0] < w[1]));
                    assert!(uncovered.iter().all(|&u| u < 32));
                }
                other => panic!("expected cover failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn accepted_endpoints_pass_pairwise_independence_chi_square() {
        // 100 random vertex pairs; joint endpoint counts over 1000 runs,
        // coarsened to 4 buckets per side, tested against the product of the
        // exact per-vertex marginals. df = 15, chi-square critical value
        // 37.697 at significance 0.001.
        let n = 64usize;
        let t = 8u32;
        let g = sample_permutation_model(n, 8, 321);
        let wt = matpow(&transition(&g), t);
        let bucket = |v: u32| (v % 4) as usize;
        let mut bucket_marg = vec![[0.0f64; 4]; n];
        for u in 0..n {
            for v in 0..n {
                bucket_marg[u][bucket(v as u32)] += wt[u][v];
            }
        }

        let runs = 1000usize;
        let mut endpoints = Vec::with_capacity(runs);
        for r in 0..runs {
            let out = independent_walks(&g, t, 40_000 + r as u64, 20, false).unwrap();
            endpoints.push(out.endpoints);
        }

        let mut pair_rng = crate::rng::stream(77, "chi-square-pairs", 0);
        use rand::Rng;
        for p in 0..100 {
            let u = pair_rng.random_range(0..n);
            let mut v = pair_rng.random_range(0..n);
            while v == u {
                v = pair_rng.random_range(0..n);
            }
            let mut obs = [[0.0f64; 4]; 4];
            for e in &endpoints {
                obs[bucket(e[u])][bucket(e[v])] += 1.0;
            }
            let mut chi2 = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    let expect = runs as f64 * bucket_marg[u][a] * bucket_marg[v][b];
                    assert!(expect > 5.0, "chi-square cell too thin: {expect}");
                    chi2 += (obs[a][b] - expect).powi(2) / expect;
                }
            }
            assert!(chi2 < 37.697, "pair {p} ({u},{v}): chi2 {chi2} rejects independence");
        }
    }

    #[test]
    fn randomize_preserves_partition_and_edge_count() {
        let g = disjoint_union(&[
            sample_permutation_model(24, 4, 15),
            sample_permutation_model(16, 4, 16),
        ])
        .unwrap();
        let before = oracle_components(&g);
        // Honest walk length: at least every component's measured 1e-3
        // mixing time on the lazily augmented graph.
        let lazy = add_self_loops(&g, 4);
        let needed: u32 = crate::spectral::mixing_times_per_component(&lazy, 1e-3)
            .unwrap()
            .into_iter()
            .max()
            .unwrap();
        for seed in 0..3u64 {
            let out = randomize_components(&g, needed, seed).unwrap();
            assert_eq!(out.k, (50.0 * (40f64).log2()).ceil() as u32);
            assert_eq!(out.h.m(), 40 * out.k as usize);
            assert_eq!(oracle_components(&out.h), before, "seed {seed}");
            // Every batch label appears exactly n times.
            let mut per_batch = vec![0usize; out.k as usize];
            for e in out.h.edges() {
                per_batch[e.batch as usize] += 1;
            }
            assert!(per_batch.iter().all(|&c| c == 40));
        }
    }

    #[test]
    fn randomize_marginal_close_to_uniform_on_component() {
        // On a mixed component the per-vertex endpoint marginal is within
        // TV 0.02 of uniform-on-component (γ = 1e-3 walk length).
        let g = cycle(4);
        let lazy = add_self_loops(&g, 2);
        let t = mixing_time(&lazy, 1e-3).unwrap();
        let mut counts = vec![[0usize; 4]; 4];
        let mut samples = 0usize;
        for seed in 0..150u64 {
            let out = randomize_components(&g, t, 9_000 + seed).unwrap();
            assert_eq!(out.k, 100);
            for e in out.h.edges() {
                counts[e.a as usize][e.b as usize] += 1;
            }
            samples += out.k as usize;
        }
        for u in 0..4 {
            let tv: f64 = (0..4)
                .map(|v| (counts[u][v] as f64 / samples as f64 - 0.25).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.02, "vertex {u}: endpoint marginal TV {tv}");
        }
    }

    #[test]
    fn randomize_rejects_bad_inputs() {
        let isolated = {
            let mut g = Graph::new(2);
            g.push_edge(Edge::new(0, 0));
            g
        };
        assert!(matches!(
            randomize_components(&isolated, 8, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(randomize_components(&Graph::new(0), 8, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn randomize_pads_near_regular_inputs() {
        // An irregular (near-regular) graph is padded with stay slots to a
        // uniform slot bound; the endpoint bundles still respect components.
        let mut g = Graph::new(5);
        for (a, b) in [(0, 1), (1, 2), (2, 0), (0, 1), (3, 4), (3, 4), (3, 4)] {
            g.push_edge(Edge::new(a, b));
        }
        assert!(!g.is_regular());
        let out = randomize_components(&g, 8, 17).unwrap();
        assert_eq!(out.h.m(), g.n() * out.k as usize);
        let before = oracle_components(&g);
        let after = oracle_components(&out.h);
        assert!(before.refines(&after) && after.refines(&before));
    }
}
