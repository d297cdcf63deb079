//! Command-line driver. Exit codes: 0 ok, 1 usage or I/O, 2 parse error,
//! 3 invariant, oracle or accounting violation.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rustc_hash::FxHashSet;

use crate::dynamic::{Engine, EngineConfig, EngineError};
use crate::greedy::{parallel_greedy_match, sequential_greedy_match};
use crate::parprims::{draw_priorities, Purpose, SeededRng, StreamKey};
use crate::setcover::{DynamicSetCover, SetCoverError};
use crate::stream::{parse_priorities, parse_set_cover, parse_stream, serialize_stream, ElementOp, ParseError};
use crate::types::{EdgeId, Hyperedge, UpdateBatch};
use crate::workload::{generate, Pattern, WorkloadParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hypermatch", version, about = "Batch-dynamic hypergraph maximal matching")]
struct Cli {
    /// Worker threads (default: rayon's choice).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Apply batches only.
    Fast,
    /// Check invariants and an independent maximality test after every batch.
    Verify,
    /// Emit the per-batch accounting CSV.
    Bench,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an update stream.
    Gen {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        edges: u64,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 100)]
        batch_size: usize,
        #[arg(long, default_value = "churn")]
        pattern: String,
        /// Replacement updates for the churn pattern (default: --edges).
        #[arg(long)]
        churn_updates: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replay an update stream through the dynamic engine.
    Run {
        stream: PathBuf,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Fast)]
        mode: Mode,
        /// Write the bench CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Greedy-match the edges inserted before the stream's first delete.
    Staticmatch {
        stream: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the sequential greedy and require identical output.
        #[arg(long)]
        oracle: bool,
        /// Explicit `<edge_id> <priority>` file instead of random priorities.
        #[arg(long)]
        priorities: Option<PathBuf>,
    },
    /// Maintain a set cover over an element stream.
    Setcover {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Parse(String),
    Violation(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse_failure(path: &Path, e: ParseError) -> Failure {
    Failure::Parse(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, out)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => dispatch(cli.command, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Parse(m) => (EXIT_PARSE, m),
                Failure::Violation(m) => (EXIT_VIOLATION, m),
            };
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match cmd {
        Command::Gen {
            n,
            edges,
            rank,
            batch_size,
            pattern,
            churn_updates,
            seed,
            output,
        } => {
            let pattern: Pattern = pattern.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
            let mut params = WorkloadParams::new(n, edges, rank, batch_size, pattern, seed);
            if let Some(c) = churn_updates {
                params.churn_updates = c;
            }
            let stream = generate(&params).map_err(|e| Failure::Usage(e.to_string()))?;
            let text = serialize_stream(&stream);
            match output {
                Some(p) => fs::write(&p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Run {
            stream,
            rank,
            seed,
            mode,
            csv,
        } => {
            let batches = parse_stream(&read(&stream)?).map_err(|e| parse_failure(&stream, e))?;
            run_stream(&batches, rank, seed, mode, csv.as_deref(), out)
        }
        Command::Staticmatch {
            stream,
            seed,
            oracle,
            priorities,
        } => {
            let batches = parse_stream(&read(&stream)?).map_err(|e| parse_failure(&stream, e))?;
            let pri = match &priorities {
                Some(p) => Some(parse_priorities(&read(p)?).map_err(|e| parse_failure(p, e))?),
                None => None,
            };
            static_match(&batches, seed, oracle, pri, out)
        }
        Command::Setcover { input, rank, seed } => {
            let batches = parse_set_cover(&read(&input)?).map_err(|e| parse_failure(&input, e))?;
            set_cover(&batches, rank, seed, out)
        }
    }
}

/// Checks maximality and validity of the engine's matching from the raw edge
/// list, without trusting any structure bookkeeping.
pub fn check_maximal_matching(engine: &Engine) -> Result<(), String> {
    let s = engine.structure();
    let mut covered = FxHashSet::default();
    for m in engine.matched_edges() {
        let rec = s.record(m).ok_or_else(|| format!("matched {m} is not stored"))?;
        for &v in rec.edge.vertices() {
            if !covered.insert(v) {
                return Err(format!("vertex {v} is covered twice (at {m})"));
            }
        }
    }
    for e in s.edge_ids() {
        let rec = s.record(e).expect("listed");
        if !rec.edge.vertices().iter().any(|v| covered.contains(v)) {
            return Err(format!("edge {e} touches no matched edge"));
        }
    }
    Ok(())
}

fn run_stream(
    batches: &[UpdateBatch],
    rank: usize,
    seed: u64,
    mode: Mode,
    csv: Option<&Path>,
    out: &mut (dyn Write + Send),
) -> Result<(), Failure> {
    let mut engine = Engine::new(EngineConfig::new(rank, seed)).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut violations = Vec::new();
    for (i, batch) in batches.iter().enumerate() {
        match engine.apply(batch.clone()) {
            Ok(_) => {}
            Err(EngineError::Batch(e)) => return Err(Failure::Parse(format!("batch {}: {e}", i + 1))),
            Err(e @ EngineError::RoundInequality { .. }) => violations.push(e.to_string()),
            Err(e) => return Err(Failure::Violation(format!("batch {}: {e}", i + 1))),
        }
        if mode == Mode::Verify {
            engine
                .check_invariants()
                .map_err(|v| Failure::Violation(format!("after batch {}: {v}", i + 1)))?;
            check_maximal_matching(&engine)
                .map_err(|v| Failure::Violation(format!("after batch {}: {v}", i + 1)))?;
        }
    }
    let ledger = engine.ledger().expect("accounting is on");
    if mode == Mode::Bench {
        match csv {
            Some(p) => ledger.write_csv(fs::File::create(p)?)?,
            None => ledger.write_csv(&mut *out)?,
        }
    }
    if mode != Mode::Bench || csv.is_some() {
        writeln!(out, "{}", ledger.report())?;
        writeln!(out, "matched edges      {}", engine.matched_edges().len())?;
    }
    if let Some(first) = violations.first() {
        return Err(Failure::Violation(format!("{} batch(es) with violations; {first}", violations.len())));
    }
    Ok(())
}

fn static_match(
    batches: &[UpdateBatch],
    seed: u64,
    oracle: bool,
    pri: Option<crate::parprims::PriorityAssignment>,
    out: &mut (dyn Write + Send),
) -> Result<(), Failure> {
    let mut edges: Vec<Hyperedge> = Vec::new();
    let mut seen = FxHashSet::default();
    for b in batches {
        match b {
            UpdateBatch::Insert(es) => {
                for e in es {
                    if !seen.insert(e.id()) {
                        return Err(Failure::Parse(format!("edge {} inserted twice", e.id())));
                    }
                    edges.push(e.clone());
                }
            }
            UpdateBatch::Delete(_) => break,
        }
    }
    let ids: Vec<EdgeId> = edges.iter().map(Hyperedge::id).collect();
    let pri = match pri {
        Some(p) => {
            if let Some(e) = ids.iter().find(|e| p.get(**e).is_none()) {
                return Err(Failure::Parse(format!("priority file has no entry for {e}")));
            }
            p
        }
        None => draw_priorities(&ids, &SeededRng::new(seed), StreamKey::new(0, 0, Purpose::StaticMatch)),
    };
    let result = parallel_greedy_match(&edges, &pri);
    writeln!(out, "# matched sample_size")?;
    for entry in result.entries() {
        writeln!(out, "{} {}", entry.matched.0, entry.sample.len())?;
    }
    writeln!(out, "# edges {} matched {} rounds {}", edges.len(), result.len(), result.rounds)?;
    result.verify(&edges).map_err(Failure::Violation)?;
    if oracle {
        let reference = sequential_greedy_match(&edges, &pri);
        if let Some(diff) = result.first_difference(&reference) {
            return Err(Failure::Violation(format!("parallel and sequential results differ: {diff}")));
        }
        writeln!(out, "# oracle: identical")?;
    }
    Ok(())
}

fn set_cover(batches: &[Vec<ElementOp>], rank: usize, seed: u64, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let mut sc = DynamicSetCover::new(rank, seed).map_err(|e| Failure::Usage(e.to_string()))?;
    for (i, batch) in batches.iter().enumerate() {
        let inserts: Vec<(u64, Vec<String>)> = batch
            .iter()
            .filter_map(|op| match op {
                ElementOp::Insert { element, sets } => Some((*element, sets.clone())),
                ElementOp::Delete { .. } => None,
            })
            .collect();
        let deletes: Vec<u64> = batch
            .iter()
            .filter_map(|op| match op {
                ElementOp::Delete { element } => Some(*element),
                ElementOp::Insert { .. } => None,
            })
            .collect();
        let res = if inserts.is_empty() {
            sc.delete_elements(&deletes)
        } else {
            sc.insert_elements(&inserts)
        };
        res.map_err(|e| {
            let msg = format!("batch {}: {e}", i + 1);
            match e {
                SetCoverError::Engine(EngineError::Batch(_)) | SetCoverError::Engine(EngineError::ZeroRank) => {
                    Failure::Parse(msg)
                }
                SetCoverError::Engine(_) => Failure::Violation(msg),
                _ => Failure::Parse(msg),
            }
        })?;
        if !sc.is_valid_cover() {
            return Err(Failure::Violation(format!("cover invalid after batch {}", i + 1)));
        }
        writeln!(out, "batch {} cover {}", i + 1, sc.cover().len())?;
    }
    writeln!(out, "cover {}", sc.cover().join(" "))?;
    Ok(())
}
