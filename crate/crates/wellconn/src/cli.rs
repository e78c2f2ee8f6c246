//! Command-line interface: generate graph files, compute exact spectral
//! references, run the connectivity drivers, and sweep round counts into
//! CSV.
//!
//! Exit codes: 0 on success, 1 on malformed input or any execution error,
//! 2 on usage errors (argument parsing), 3 when a run completes but the
//! partition fails verification.

use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::graph::{
    complete, cycle, disjoint_union, edge_list_string, gen_gnd, read_edge_list, Graph,
};
use crate::pipeline::{
    connectivity_known_gap_with, connectivity_oblivious_with, connectivity_oracle,
    connectivity_sublinear_with, Preset, RunConfig, RunReport, Verdict,
};
use crate::spectral::{spectral_report, DEFAULT_TOL};

pub const EXIT_OK: i32 = 0;
/// Malformed input, I/O trouble, or an execution error.
pub const EXIT_INPUT: i32 = 1;
/// Usage errors (argument parsing); clap's own convention.
pub const EXIT_USAGE: i32 = 2;
/// The run finished but the partition failed verification.
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser)]
#[command(
    name = "wellconn",
    about = "Connected components with spectral-gap-aware parallel round budgets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph file as a disjoint union of standard parts.
    Gen {
        /// Part spec, repeatable: `gnd:<n>:<d>` (random near-d-regular),
        /// `cycle:<n>`, or `complete:<n>`.
        #[arg(long = "part", required = true)]
        parts: Vec<String>,
        /// Seed for the random parts.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact spectral reference: λ₂, mixing times, diameter, components.
    Spectral {
        /// Input graph file (`n m` header, then `u v [batch]` lines).
        #[arg(long = "in")]
        input: PathBuf,
        /// Mixing thresholds γ to report T_γ for.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25])]
        gammas: Vec<f64>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a connectivity driver and emit its JSON report.
    Run {
        /// Input graph file (`n m` header, then `u v [batch]` lines).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Main)]
        algo: Algo,
        /// Spectral-gap lower bound for `--algo main`; 0 or omitted routes
        /// to the oblivious driver.
        #[arg(long)]
        lambda: Option<f64>,
        /// Memory exponent for driver-level engines (machines hold ≈ N^δ).
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Per-machine memory override in words.
        #[arg(long)]
        memory: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
        preset: PresetArg,
        /// Report file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the spanning forest as an edge list.
        #[arg(long = "forest-out")]
        forest_out: Option<PathBuf>,
    },
    /// Sweep input sizes and emit one CSV row of round accounting per size.
    Bench {
        #[arg(long, value_enum, default_value_t = Algo::Main)]
        algo: Algo,
        /// Size range, e.g. `2^10..2^16` (doubling steps, inclusive).
        #[arg(long = "n")]
        n_range: String,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
        preset: PresetArg,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Known-gap pipeline (needs `--lambda`).
    Main,
    /// Gap-oblivious schedule.
    Oblivious,
    /// Sketch route under a sublinear memory budget.
    Sublinear,
    /// Exact reference driver.
    Oracle,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Main => "main",
            Algo::Oblivious => "oblivious",
            Algo::Sublinear => "sublinear",
            Algo::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Preset {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

/// Process entry point; returns the exit code for `main` to pass on.
pub fn cli_main() -> i32 {
    if let Ok(workers) = std::env::var("WELLCONN_WORKERS") {
        match workers.parse::<usize>() {
            Ok(k) if k > 0 => {
                // Worker count only affects wall-clock time; every parallel
                // section is a deterministic map, so results are invariant.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("WELLCONN_WORKERS={workers} is not a positive integer; ignored");
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with success; real usage
            // errors go to stderr with the usage exit code.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Gen { parts, seed, out } => cmd_gen(&parts, seed, out.as_deref()),
        Cmd::Spectral { input, gammas, out } => cmd_spectral(&input, &gammas, out.as_deref()),
        Cmd::Run { input, algo, lambda, delta, memory, seed, preset, out, forest_out } => {
            cmd_run(RunArgs {
                input,
                algo,
                lambda,
                delta,
                memory,
                seed,
                preset: preset.into(),
                out,
                forest_out,
            })
        }
        Cmd::Bench { algo, n_range, lambda, delta, seed, preset, out } => {
            cmd_bench(algo, &n_range, lambda, delta, seed, preset.into(), out.as_deref())
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn parse_part(spec: &str, seed: u64, index: u64) -> Result<Graph> {
    let fields: Vec<&str> = spec.split(':').collect();
    let usage = || {
        Error::Precondition(format!(
            "part `{spec}` not understood; expected gnd:<n>:<d>, cycle:<n>, or complete:<n>"
        ))
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| usage());
    match fields.as_slice() {
        ["gnd", n, d] => {
            Ok(gen_gnd(num(n)?, num(d)?, crate::rng::sub_seed(seed, "gen-part", index)))
        }
        ["cycle", n] => Ok(cycle(num(n)?)),
        ["complete", n] => Ok(complete(num(n)?)),
        _ => Err(usage()),
    }
}

fn cmd_gen(parts: &[String], seed: u64, out: Option<&Path>) -> Result<i32> {
    let graphs = parts
        .iter()
        .enumerate()
        .map(|(i, spec)| parse_part(spec, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let g = disjoint_union(&graphs)?;
    emit(&edge_list_string(&g), out)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// spectral
// ---------------------------------------------------------------------------

fn cmd_spectral(input: &Path, gammas: &[f64], out: Option<&Path>) -> Result<i32> {
    let (g, remap) = read_edge_list(input)?;
    if remap.is_some() {
        eprintln!("note: vertex ids were not dense and have been remapped in sorted order");
    }
    let report = spectral_report(&g, gammas, DEFAULT_TOL)?;
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Other(format!("report serialization: {e}")))?;
    json.push('\n');
    emit(&json, out)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArgs {
    input: PathBuf,
    algo: Algo,
    lambda: Option<f64>,
    delta: f64,
    memory: Option<usize>,
    seed: u64,
    preset: Preset,
    out: Option<PathBuf>,
    forest_out: Option<PathBuf>,
}

fn run_report(g: &Graph, args: &RunArgs) -> Result<RunReport> {
    let cfg = RunConfig { delta: args.delta, memory: args.memory, preset: args.preset };
    match args.algo {
        Algo::Main => match args.lambda {
            Some(l) if l > 0.0 => connectivity_known_gap_with(g, l, &cfg, args.seed),
            // A zero or missing gap means "unknown": fall through to the
            // oblivious schedule.
            _ => connectivity_oblivious_with(g, &cfg, args.seed),
        },
        Algo::Oblivious => connectivity_oblivious_with(g, &cfg, args.seed),
        Algo::Sublinear => connectivity_sublinear_with(g, &cfg, args.seed),
        Algo::Oracle => connectivity_oracle(g),
    }
}

fn forest_string(rep: &RunReport) -> String {
    let mut text = String::with_capacity(12 * rep.forest_edges.len() + 16);
    text.push_str("# forest\n");
    for &(a, b) in &rep.forest_edges {
        text.push_str(&format!("{a} {b}\n"));
    }
    text
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let (g, remap) = read_edge_list(&args.input)?;
    if remap.is_some() {
        eprintln!("note: vertex ids were not dense and have been remapped in sorted order");
    }
    let rep = run_report(&g, &args)?;
    let mut json = rep.to_json();
    json.push('\n');
    emit(&json, args.out.as_deref())?;
    if let Some(path) = &args.forest_out {
        std::fs::write(path, forest_string(&rep))?;
    }
    Ok(match rep.verdict {
        Verdict::Verified => EXIT_OK,
        Verdict::Failed => EXIT_VERIFY,
    })
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

/// Parse `2^10..2^16` (or plain integers) into doubling steps, inclusive.
fn parse_size_range(spec: &str) -> Result<Vec<usize>> {
    fn one(s: &str) -> Result<usize> {
        let s = s.trim();
        if let Some(exp) = s.strip_prefix("2^") {
            let e: u32 = exp
                .parse()
                .map_err(|_| Error::Precondition(format!("bad exponent in `{s}`")))?;
            if e >= usize::BITS {
                return Err(Error::Precondition(format!("2^{e} overflows usize")));
            }
            Ok(1usize << e)
        } else {
            s.parse::<usize>()
                .map_err(|_| Error::Precondition(format!("bad size `{s}`")))
        }
    }
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => (one(a)?, one(b)?),
        None => {
            let v = one(spec)?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(Error::Precondition(format!("empty size range `{spec}`")));
    }
    let mut sizes = Vec::new();
    let mut v = lo;
    while v <= hi {
        sizes.push(v);
        match v.checked_mul(2) {
            Some(next) => v = next,
            None => break,
        }
    }
    Ok(sizes)
}

/// `git describe --always --dirty` of the working tree, for provenance.
fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Benchmark input at size `n`: a random union-free graph with logarithmic
/// degree, comfortably inside the fixed bench gap.
fn bench_graph(n: usize, seed: u64) -> Graph {
    let d = 8 * (n.max(2) as f64).log2().ceil() as usize;
    gen_gnd(n, d, seed)
}

fn cmd_bench(
    algo: Algo,
    n_range: &str,
    lambda: f64,
    delta: f64,
    seed: u64,
    preset: Preset,
    out: Option<&Path>,
) -> Result<i32> {
    let sizes = parse_size_range(n_range)?;
    let describe = git_describe();
    let mut csv = String::from(
        "n,m,seed,preset,algo,lambda,delta,rounds,max_held,max_sent,max_recv,total_words,git_describe\n",
    );
    for (i, &n) in sizes.iter().enumerate() {
        let g = bench_graph(n, crate::rng::sub_seed(seed, "bench-input", i as u64));
        let args = RunArgs {
            input: PathBuf::new(),
            algo,
            lambda: Some(lambda),
            delta,
            memory: None,
            seed,
            preset,
            out: None,
            forest_out: None,
        };
        let rep = run_report(&g, &args)?;
        if rep.verdict == Verdict::Failed {
            return Err(Error::Verification(format!(
                "bench point n={n} failed verification: {}",
                rep.failure.unwrap_or_default()
            )));
        }
        let preset_name = match preset {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            rep.n,
            rep.m,
            seed,
            preset_name,
            algo.name(),
            lambda,
            delta,
            rep.stats.rounds,
            rep.stats.max_held,
            rep.stats.max_sent,
            rep.stats.max_recv,
            rep.stats.total,
            describe
        ));
    }
    emit(&csv, out)?;
    Ok(EXIT_OK)
}
