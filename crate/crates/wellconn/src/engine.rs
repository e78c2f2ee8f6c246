//! Simulated massively-parallel runtime.
//!
//! Machines hold at most `s` 64-bit words; computation proceeds in
//! synchronous rounds where each machine runs a local function over its own
//! records and emits addressed messages. The engine is a logical simulation
//! in one process — the model constraints (per-round send, receive, and held
//! words all ≤ s) are *assertions*, because what the algorithms above it
//! need measured is round and memory structure, not wall-clock behavior.
//!
//! Accounting rules, fixed here so round counts are reproducible:
//! - a record is one key plus two payload words, 3 words total;
//! - dense-table entries (position-indexed values) are 1 word;
//! - `parallel_sort`/`parallel_search` charge exactly `max(1, ⌈log_s N⌉)`
//!   rounds, N in words;
//! - every primitive charges at least one round.
//!
//! The engine core is deliberately single-threaded: machines run in id
//! order and messages are delivered ordered by (sender, emission index), so
//! results are bit-identical regardless of any worker-count setting used
//! elsewhere in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One engine record: a key word plus two payload words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Rec {
    pub k: u64,
    pub a: u64,
    pub b: u64,
}

impl Rec {
    pub fn new(k: u64, a: u64, b: u64) -> Self {
        Rec { k, a, b }
    }
}

/// Words occupied by one [`Rec`].
pub const WORDS_PER_REC: usize = 3;

/// Miss marker written by [`Mpc::parallel_search`] into the `b` field of
/// unmatched queries. Table values must not use it.
pub const MISS: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MachineConfig {
    /// Per-machine memory in words.
    pub s: usize,
    /// Machine count.
    pub m: usize,
    /// Declared memory exponent (s = Θ(N^delta · polylog N)).
    pub delta: f64,
}

impl MachineConfig {
    /// Square-root preset: `s = max(16, 4⌈√N⌉)`, `M = 2⌈N/s⌉`, sized so a
    /// sorted redistribution half-fills every machine. `n_words` is the
    /// total input size in words.
    pub fn balanced(n_words: usize) -> Self {
        let n = n_words.max(1);
        let s = (4 * (n as f64).sqrt().ceil() as usize).max(16);
        let m = (2 * n.div_ceil(s)).max(1);
        MachineConfig { s, m, delta: 0.5 }
    }

    /// Fixed memory per machine, machine count sized for the input.
    pub fn with_memory(s: usize, n_words: usize) -> Self {
        let n = n_words.max(1);
        MachineConfig { s, m: (2 * n.div_ceil(s)).max(1), delta: 0.5 }
    }

    /// Strict-model check: both s and M at most `N^(1−δ′)` with δ′ = 0.25.
    /// Holds for the balanced preset whenever `N ≥ 256`; tiny inputs hit
    /// the s ≥ 16 floor and are exempt (reported, not asserted).
    pub fn is_strict(&self, n_words: usize) -> bool {
        let cap = (n_words as f64).powf(0.75);
        (self.s as f64) <= cap && (self.m as f64) <= cap
    }

    /// Rounds charged for a sort/search over `n_words` words: the smallest
    /// `r ≥ 1` with `s^r ≥ N`, in integer arithmetic.
    pub fn charge(&self, n_words: usize) -> u64 {
        debug_assert!(self.s >= 2);
        let n = n_words as u128;
        let s = self.s as u128;
        let mut acc = s;
        let mut r = 1;
        while acc < n {
            acc = acc.saturating_mul(s);
            r += 1;
        }
        r
    }
}

/// Cumulative accounting. Field names double as the JSON keys.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct RoundStats {
    pub rounds: u64,
    pub max_held: usize,
    pub max_sent: usize,
    pub max_recv: usize,
    /// Total words sent over the whole run.
    pub total: u64,
}

impl RoundStats {
    pub fn merge(&mut self, other: &RoundStats) {
        self.rounds += other.rounds;
        self.max_held = self.max_held.max(other.max_held);
        self.max_sent = self.max_sent.max(other.max_sent);
        self.max_recv = self.max_recv.max(other.max_recv);
        self.total += other.total;
    }

    /// Fold in a program that ran on its own machine group concurrently
    /// with this one: rounds overlap (take the max), per-machine peaks take
    /// the max across groups, and traffic adds up.
    pub fn merge_parallel(&mut self, other: &RoundStats) {
        self.rounds = self.rounds.max(other.rounds);
        self.max_held = self.max_held.max(other.max_held);
        self.max_sent = self.max_sent.max(other.max_sent);
        self.max_recv = self.max_recv.max(other.max_recv);
        self.total += other.total;
    }
}

/// Records partitioned across machines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributedRecords {
    machines: Vec<Vec<Rec>>,
}

impl DistributedRecords {
    /// Distribute records contiguously, `⌈N/M⌉` per machine.
    pub fn from_vec(recs: Vec<Rec>, cfg: &MachineConfig) -> Result<Self> {
        let per = recs.len().div_ceil(cfg.m).max(1);
        if per * WORDS_PER_REC > cfg.s {
            return Err(Error::MemoryExceeded {
                machine: 0,
                words: per * WORDS_PER_REC,
                s: cfg.s,
                context: "initial distribution".into(),
            });
        }
        let mut machines = vec![Vec::new(); cfg.m];
        for (i, r) in recs.into_iter().enumerate() {
            machines[i / per].push(r);
        }
        Ok(DistributedRecords { machines })
    }

    pub fn empty(cfg: &MachineConfig) -> Self {
        DistributedRecords { machines: vec![Vec::new(); cfg.m] }
    }

    pub fn len(&self) -> usize {
        self.machines.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.iter().all(Vec::is_empty)
    }

    pub fn words(&self) -> usize {
        self.len() * WORDS_PER_REC
    }

    pub fn machine(&self, i: usize) -> &[Rec] {
        &self.machines[i]
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    /// Flatten in machine order (the engine's canonical global order).
    pub fn into_vec(self) -> Vec<Rec> {
        self.machines.into_iter().flatten().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rec> {
        self.machines.iter().flatten()
    }
}

/// Message collector handed to the per-machine local function.
pub struct Emitter {
    dest_cap: usize,
    out: Vec<(u32, Rec)>,
}

impl Emitter {
    pub fn send(&mut self, dest: usize, rec: Rec) {
        debug_assert!(dest < self.dest_cap, "destination {dest} out of range");
        self.out.push((dest as u32, rec));
    }
}

/// Position-indexed table of single words, partitioned contiguously in
/// chunks of `⌈len/M⌉` rows per machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseTable {
    pub rows: Vec<u64>,
}

impl DenseTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Engine context: configuration plus cumulative statistics.
pub struct Mpc {
    cfg: MachineConfig,
    stats: RoundStats,
}

impl Mpc {
    pub fn new(cfg: MachineConfig) -> Self {
        Mpc { cfg, stats: RoundStats::default() }
    }

    pub fn cfg(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn stats(&self) -> RoundStats {
        self.stats
    }

    fn charge_rounds(&mut self, r: u64) {
        self.stats.rounds += r;
    }

    fn note_held(&mut self, words: usize, context: &str) -> Result<()> {
        self.stats.max_held = self.stats.max_held.max(words);
        if words > self.cfg.s {
            return Err(Error::MemoryExceeded {
                machine: usize::MAX,
                words,
                s: self.cfg.s,
                context: context.into(),
            });
        }
        Ok(())
    }

    /// One literal synchronous round: every machine runs `f` over its local
    /// records, emitted messages are checked against the send cap, delivered
    /// in (sender, emission index) order, and checked against the receive
    /// cap. The new state is exactly the delivered messages, so retention is
    /// an explicit self-send.
    pub fn execute_round<F>(&mut self, state: DistributedRecords, mut f: F) -> Result<DistributedRecords>
    where
        F: FnMut(usize, &[Rec], &mut Emitter),
    {
        let m = self.cfg.m;
        if state.machines.len() != m {
            return Err(Error::Precondition(format!(
                "state has {} machines, config has {m}",
                state.machines.len()
            )));
        }
        let mut inboxes: Vec<Vec<Rec>> = vec![Vec::new(); m];
        let mut max_sent = 0usize;
        let mut total_sent = 0u64;
        for mid in 0..m {
            let held = state.machines[mid].len() * WORDS_PER_REC;
            self.stats.max_held = self.stats.max_held.max(held);
            if held > self.cfg.s {
                return Err(Error::MemoryExceeded {
                    machine: mid,
                    words: held,
                    s: self.cfg.s,
                    context: "records held entering round".into(),
                });
            }
            let mut em = Emitter { dest_cap: m, out: Vec::new() };
            f(mid, &state.machines[mid], &mut em);
            let sent = em.out.len() * WORDS_PER_REC;
            if sent > self.cfg.s {
                return Err(Error::MemoryExceeded {
                    machine: mid,
                    words: sent,
                    s: self.cfg.s,
                    context: "words sent in round".into(),
                });
            }
            max_sent = max_sent.max(sent);
            total_sent += sent as u64;
            // Delivery order: machines are processed in id order and each
            // machine's emissions are appended in emission order.
            for (dest, rec) in em.out {
                inboxes[dest as usize].push(rec);
            }
        }
        let mut max_recv = 0usize;
        for (mid, inbox) in inboxes.iter().enumerate() {
            let recv = inbox.len() * WORDS_PER_REC;
            if recv > self.cfg.s {
                return Err(Error::MemoryExceeded {
                    machine: mid,
                    words: recv,
                    s: self.cfg.s,
                    context: "words received in round".into(),
                });
            }
            max_recv = max_recv.max(recv);
        }
        self.stats.rounds += 1;
        self.stats.max_sent = self.stats.max_sent.max(max_sent);
        self.stats.max_recv = self.stats.max_recv.max(max_recv);
        self.stats.total += total_sent;
        self.stats.max_held = self
            .stats
            .max_held
            .max(inboxes.iter().map(|i| i.len() * WORDS_PER_REC).max().unwrap_or(0));
        Ok(DistributedRecords { machines: inboxes })
    }

    /// Global sort by a derived key, ties broken by (original machine id,
    /// local index). The multi-phase bucket exchange is abstracted: the
    /// engine computes the sorted assignment in process, charges the full
    /// `max(1, ⌈log_s N⌉)` rounds, and performs the final redistribution as
    /// one literal round so the memory caps are enforced on real loads.
    pub fn parallel_sort<K>(&mut self, state: DistributedRecords, key: K) -> Result<DistributedRecords>
    where
        K: Fn(&Rec) -> u128,
    {
        let n = state.len();
        let rounds = self.cfg.charge(state.words());
        if n == 0 {
            self.charge_rounds(rounds);
            return Ok(DistributedRecords::empty(&self.cfg));
        }
        // (key, machine, index) → destination slot, stable by construction.
        let mut tagged: Vec<(u128, u32, u32)> = Vec::with_capacity(n);
        for (mid, recs) in state.machines.iter().enumerate() {
            for (idx, r) in recs.iter().enumerate() {
                tagged.push((key(r), mid as u32, idx as u32));
            }
        }
        tagged.sort_unstable_by_key(|&(k, m, i)| (k, m, i));
        let per = n.div_ceil(self.cfg.m);
        if per * WORDS_PER_REC > self.cfg.s {
            return Err(Error::MemoryExceeded {
                machine: 0,
                words: per * WORDS_PER_REC,
                s: self.cfg.s,
                context: "sorted redistribution".into(),
            });
        }
        // destination of (machine, idx), reconstructed per machine
        let mut dest: Vec<Vec<u32>> = state.machines.iter().map(|r| vec![0u32; r.len()]).collect();
        for (pos, &(_, mid, idx)) in tagged.iter().enumerate() {
            dest[mid as usize][idx as usize] = (pos / per) as u32;
        }
        let out = self.execute_round(state, |mid, recs, em| {
            for (idx, rec) in recs.iter().enumerate() {
                em.send(dest[mid][idx] as usize, *rec);
            }
        })?;
        self.charge_rounds(rounds - 1); // the literal round above charged 1
        // Delivery leaves each inbox ordered by (sender, emission index) =
        // (original machine, local index); a stable local sort by key then
        // reproduces the machine's segment of the global order exactly.
        let mut out = out;
        for recs in out.machines.iter_mut() {
            recs.sort_by(|x, y| key(x).cmp(&key(y)));
        }
        Ok(out)
    }

    /// Annotate each query with the matching table record's `a` word (into
    /// the query's `b` field), or [`MISS`]. Sort-merge join; table keys must
    /// be unique. Charges `max(1, ⌈log_s N⌉)` with N = |queries| + |table|
    /// in words; output queries are placed in key-sorted order.
    pub fn parallel_search(
        &mut self,
        queries: DistributedRecords,
        table: &DistributedRecords,
    ) -> Result<DistributedRecords> {
        let n_words = queries.words() + table.words();
        let rounds = self.cfg.charge(n_words);
        let mut tbl: Vec<(u64, u64)> = table.iter().map(|r| (r.k, r.a)).collect();
        tbl.sort_unstable();
        for w in tbl.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateKey { key: w[0].0 });
            }
        }
        if tbl.iter().any(|&(_, v)| v == MISS) {
            return Err(Error::Precondition("table value collides with the miss marker".into()));
        }
        let n = queries.len();
        if n == 0 {
            self.charge_rounds(rounds);
            return Ok(DistributedRecords::empty(&self.cfg));
        }
        // Annotate in process, then one literal redistribution round into
        // key-sorted placement (same shape as parallel_sort).
        let mut tagged: Vec<(u128, u32, u32)> = Vec::with_capacity(n);
        let mut annotated: Vec<Vec<Rec>> = Vec::with_capacity(queries.machines.len());
        for (mid, recs) in queries.machines.iter().enumerate() {
            let mut row = Vec::with_capacity(recs.len());
            for (idx, r) in recs.iter().enumerate() {
                let found = match tbl.binary_search_by_key(&r.k, |&(k, _)| k) {
                    Ok(i) => tbl[i].1,
                    Err(_) => MISS,
                };
                row.push(Rec { k: r.k, a: r.a, b: found });
                tagged.push((r.k as u128, mid as u32, idx as u32));
            }
            annotated.push(row);
        }
        tagged.sort_unstable_by_key(|&(k, m, i)| (k, m, i));
        let per = n.div_ceil(self.cfg.m);
        if per * WORDS_PER_REC > self.cfg.s {
            return Err(Error::MemoryExceeded {
                machine: 0,
                words: per * WORDS_PER_REC,
                s: self.cfg.s,
                context: "search redistribution".into(),
            });
        }
        let mut dest: Vec<Vec<u32>> = annotated.iter().map(|r| vec![0u32; r.len()]).collect();
        for (pos, &(_, mid, idx)) in tagged.iter().enumerate() {
            dest[mid as usize][idx as usize] = (pos / per) as u32;
        }
        let state = DistributedRecords { machines: annotated };
        let out = self.execute_round(state, |mid, recs, em| {
            for (idx, rec) in recs.iter().enumerate() {
                em.send(dest[mid][idx] as usize, *rec);
            }
        })?;
        self.charge_rounds(rounds - 1);
        let mut out = out;
        for recs in out.machines.iter_mut() {
            recs.sort_by_key(|r| r.k);
        }
        Ok(out)
    }

    /// Account for a sort-shaped shuffle of `n_words` without materializing
    /// the message lists: charges the standard `max(1, ⌈log_s N⌉)` rounds
    /// and books per-machine loads equal to the even chunk `⌈N/M⌉`, which is
    /// exactly what the literal redistribution produces for contiguous
    /// even distributions. The memory cap is still enforced.
    pub fn charge_shuffle(&mut self, n_words: usize) -> Result<()> {
        let rounds = self.cfg.charge(n_words);
        let chunk = n_words.div_ceil(self.cfg.m);
        self.note_held(chunk, "shuffle chunk")?;
        self.charge_rounds(rounds);
        self.stats.max_sent = self.stats.max_sent.max(chunk);
        self.stats.max_recv = self.stats.max_recv.max(chunk);
        self.stats.total += n_words as u64;
        Ok(())
    }

    /// Account for one local materialization round over `n_words` spread in
    /// even chunks (e.g. emitting derived records in place).
    pub fn charge_local_round(&mut self, n_words: usize) -> Result<()> {
        let chunk = n_words.div_ceil(self.cfg.m);
        self.note_held(chunk, "local round chunk")?;
        self.charge_rounds(1);
        self.stats.max_sent = self.stats.max_sent.max(chunk);
        self.stats.max_recv = self.stats.max_recv.max(chunk);
        self.stats.total += n_words as u64;
        Ok(())
    }

    /// Materialize a dense table (1 word per row); charges one round and
    /// checks the per-machine chunk against the cap.
    pub fn dense_from(&mut self, rows: Vec<u64>) -> Result<DenseTable> {
        let chunk = rows.len().div_ceil(self.cfg.m).max(1);
        self.note_held(chunk, "dense table chunk")?;
        self.charge_rounds(1);
        self.stats.total += rows.len() as u64;
        self.stats.max_sent = self.stats.max_sent.max(chunk);
        self.stats.max_recv = self.stats.max_recv.max(chunk);
        Ok(DenseTable { rows })
    }

    /// `out[p] = table[idx[p]]`. Duplicate indices are aggregated through a
    /// sort-based exchange (abstracted), so the enforced loads are the
    /// per-machine chunks of the operands and the result; charged like a
    /// search over |idx| + |table| words.
    pub fn dense_gather(&mut self, table: &DenseTable, idx: &DenseTable) -> Result<DenseTable> {
        let rounds = self.cfg.charge(table.len() + idx.len());
        let chunk_t = table.len().div_ceil(self.cfg.m).max(1);
        let chunk_i = idx.len().div_ceil(self.cfg.m).max(1);
        self.note_held(chunk_t, "dense gather: table chunk")?;
        self.note_held(chunk_i, "dense gather: index chunk")?;
        let mut rows = Vec::with_capacity(idx.len());
        for &i in &idx.rows {
            let i = i as usize;
            if i >= table.len() {
                return Err(Error::Precondition(format!(
                    "dense gather index {i} out of range {}",
                    table.len()
                )));
            }
            rows.push(table.rows[i]);
        }
        self.charge_rounds(rounds);
        self.stats.total += (idx.len() * 2) as u64; // request + response words
        self.stats.max_sent = self.stats.max_sent.max(chunk_i * 2);
        self.stats.max_recv = self.stats.max_recv.max(chunk_i * 2);
        Ok(DenseTable { rows })
    }

    /// Row-local transform; one round, no exchange beyond self-retention.
    pub fn dense_map<F>(&mut self, table: &DenseTable, f: F) -> Result<DenseTable>
    where
        F: Fn(usize, u64) -> u64,
    {
        let chunk = table.len().div_ceil(self.cfg.m).max(1);
        self.note_held(chunk, "dense map chunk")?;
        self.charge_rounds(1);
        Ok(DenseTable { rows: table.rows.iter().enumerate().map(|(i, &v)| f(i, v)).collect() })
    }
}
