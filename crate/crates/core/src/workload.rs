//! Synthetic update streams. Generation only consumes its own random stream,
//! so the stream is fixed before the engine draws anything.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::parprims::{Purpose, SeededRng, StreamKey};
use crate::types::{EdgeId, Hyperedge, UpdateBatch, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Insert every edge, then delete them all in random order.
    InsertAllDeleteAll,
    /// Alternate an insert batch with a delete batch half its size; drain at
    /// the end.
    Interleaved,
    /// Fill to `edges` live edges, then replace `batch_size` random edges per
    /// step for `churn_updates` updates; drain at the end.
    Churn,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::InsertAllDeleteAll => "insert-all-delete-all",
            Pattern::Interleaved => "interleaved",
            Pattern::Churn => "churn",
        })
    }
}

impl FromStr for Pattern {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "insert-all-delete-all" => Ok(Pattern::InsertAllDeleteAll),
            "interleaved" => Ok(Pattern::Interleaved),
            "churn" => Ok(Pattern::Churn),
            other => Err(WorkloadError::UnknownPattern(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("unknown pattern {0:?} (expected insert-all-delete-all, interleaved or churn)")]
    UnknownPattern(String),
    #[error("{0}")]
    Invalid(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkloadParams {
    /// Vertex universe `0..n`.
    pub n: u64,
    /// Edges inserted (insert-all-delete-all, interleaved) or live edge
    /// count to hold (churn).
    pub edges: u64,
    /// Vertices per edge.
    pub rank: usize,
    pub batch_size: usize,
    pub pattern: Pattern,
    /// Replacement updates in the churn phase; ignored by other patterns.
    pub churn_updates: u64,
    pub seed: u64,
}

impl WorkloadParams {
    pub fn new(n: u64, edges: u64, rank: usize, batch_size: usize, pattern: Pattern, seed: u64) -> Self {
        WorkloadParams {
            n,
            edges,
            rank,
            batch_size,
            pattern,
            churn_updates: edges,
            seed,
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        if self.rank == 0 {
            return Err(WorkloadError::Invalid("rank must be positive"));
        }
        if self.batch_size == 0 {
            return Err(WorkloadError::Invalid("batch size must be positive"));
        }
        if self.edges > 0 && self.n < self.rank as u64 {
            return Err(WorkloadError::Invalid("need at least `rank` vertices"));
        }
        Ok(())
    }
}

struct Gen {
    rng: ChaCha8Rng,
    n: u64,
    rank: usize,
    next_id: u64,
    live: Vec<EdgeId>,
    out: Vec<UpdateBatch>,
}

impl Gen {
    fn edge(&mut self) -> Hyperedge {
        let mut vs: Vec<u64> = Vec::with_capacity(self.rank);
        while vs.len() < self.rank {
            let v = self.rng.random_range(0..self.n);
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        let id = EdgeId(self.next_id);
        self.next_id += 1;
        self.live.push(id);
        Hyperedge::new(id, vs.into_iter().map(VertexId)).expect("rank >= 1")
    }

    fn insert(&mut self, k: u64) {
        if k > 0 {
            let batch = (0..k).map(|_| self.edge()).collect();
            self.out.push(UpdateBatch::Insert(batch));
        }
    }

    fn delete(&mut self, k: usize) {
        let k = k.min(self.live.len());
        if k > 0 {
            let batch = (0..k)
                .map(|_| {
                    let i = self.rng.random_range(0..self.live.len());
                    self.live.swap_remove(i)
                })
                .collect();
            self.out.push(UpdateBatch::Delete(batch));
        }
    }

    fn drain(&mut self, batch_size: usize) {
        while !self.live.is_empty() {
            self.delete(batch_size);
        }
    }
}

/// Deterministic stream for `(params, seed)`. Every pattern ends with an
/// empty graph.
pub fn generate(params: &WorkloadParams) -> Result<Vec<UpdateBatch>, WorkloadError> {
    params.validate()?;
    let mut g = Gen {
        rng: SeededRng::new(params.seed).stream(StreamKey::new(0, 0, Purpose::Workload)),
        n: params.n,
        rank: params.rank,
        next_id: 0,
        live: Vec::new(),
        out: Vec::new(),
    };
    let b = params.batch_size as u64;
    let fill = |g: &mut Gen| {
        let mut left = params.edges;
        while left > 0 {
            let k = left.min(b);
            g.insert(k);
            left -= k;
        }
    };
    match params.pattern {
        Pattern::InsertAllDeleteAll => {
            fill(&mut g);
            g.drain(params.batch_size);
        }
        Pattern::Interleaved => {
            let mut left = params.edges;
            while left > 0 {
                let k = left.min(b);
                g.insert(k);
                left -= k;
                g.delete((k / 2) as usize);
            }
            g.drain(params.batch_size);
        }
        Pattern::Churn => {
            fill(&mut g);
            if params.edges > 0 {
                let mut left = params.churn_updates;
                while left > 0 {
                    let k = left.min(2 * b).div_ceil(2);
                    g.delete(k as usize);
                    g.insert(k);
                    left = left.saturating_sub(2 * k);
                }
            }
            g.drain(params.batch_size);
        }
    }
    Ok(g.out)
}

/// Uniformly random edges of exactly `rank` distinct vertices over `0..n`,
/// ids `0..m`. Used for static instances.
pub fn random_edges(n: u64, m: u64, rank: usize, seed: u64) -> Vec<Hyperedge> {
    let mut g = Gen {
        rng: SeededRng::new(seed).stream(StreamKey::new(0, 1, Purpose::Workload)),
        n,
        rank: rank.min(n as usize),
        next_id: 0,
        live: Vec::new(),
        out: Vec::new(),
    };
    (0..m).map(|_| g.edge()).collect()
}
