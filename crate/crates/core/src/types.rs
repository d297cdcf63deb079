//! Identifier types, hyperedges, update batches and graph statistics.

use std::fmt;

use rustc_hash::FxHashSet;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u64);

/// Caller-supplied edge label. Unique for the lifetime of a run; the engine
/// never synthesizes or reuses one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A hyperedge: a non-empty vertex set with a label. Vertices are kept sorted
/// ascending and deduplicated so equality and iteration are deterministic.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hyperedge {
    id: EdgeId,
    vertices: Box<[VertexId]>,
}

impl Hyperedge {
    pub fn new<I>(id: EdgeId, vertices: I) -> Result<Self, BatchError>
    where
        I: IntoIterator<Item = VertexId>,
    {
        let mut vertices: Vec<VertexId> = vertices.into_iter().collect();
        vertices.sort_unstable();
        vertices.dedup();
        if vertices.is_empty() {
            return Err(BatchError::EmptyEdge(id));
        }
        Ok(Hyperedge {
            id,
            vertices: vertices.into_boxed_slice(),
        })
    }

    /// Convenience constructor from raw integers; panics on an empty vertex list.
    pub fn from_raw(id: u64, vertices: &[u64]) -> Self {
        Self::new(EdgeId(id), vertices.iter().copied().map(VertexId))
            .expect("hyperedge needs at least one vertex")
    }

    #[inline]
    pub fn id(&self) -> EdgeId {
        self.id
    }

    #[inline]
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Number of distinct vertices, |V(e)|.
    #[inline]
    pub fn rank(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_incident(&self, other: &Hyperedge) -> bool {
        // both sides sorted: merge scan
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.vertices, &other.vertices);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatchKind {
    Insert,
    Delete,
}

impl fmt::Display for BatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatchKind::Insert => "insert",
            BatchKind::Delete => "delete",
        })
    }
}

/// One user operation: a homogeneous set of insertions or deletions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpdateBatch {
    Insert(Vec<Hyperedge>),
    Delete(Vec<EdgeId>),
}

impl UpdateBatch {
    pub fn kind(&self) -> BatchKind {
        match self {
            UpdateBatch::Insert(_) => BatchKind::Insert,
            UpdateBatch::Delete(_) => BatchKind::Delete,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            UpdateBatch::Insert(edges) => edges.len(),
            UpdateBatch::Delete(ids) => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<EdgeId> {
        match self {
            UpdateBatch::Insert(edges) => edges.iter().map(Hyperedge::id).collect(),
            UpdateBatch::Delete(ids) => ids.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BatchError {
    #[error("edge {0} appears more than once in the batch")]
    DuplicateInBatch(EdgeId),
    #[error("edge {0} is already present")]
    AlreadyPresent(EdgeId),
    #[error("edge {0} is not present")]
    NotPresent(EdgeId),
    #[error("edge {edge} has {size} vertices, rank bound is {rank}")]
    RankExceeded { edge: EdgeId, size: usize, rank: usize },
    #[error("edge {0} has no vertices")]
    EmptyEdge(EdgeId),
}

/// Checks a batch against current membership before it reaches the engine.
///
/// `rank` bounds insertions; `present` answers whether an id is currently stored.
pub fn validate_batch<F>(batch: &UpdateBatch, rank: usize, present: F) -> Result<(), BatchError>
where
    F: Fn(EdgeId) -> bool,
{
    let mut seen = FxHashSet::default();
    match batch {
        UpdateBatch::Insert(edges) => {
            for e in edges {
                if !seen.insert(e.id()) {
                    return Err(BatchError::DuplicateInBatch(e.id()));
                }
                if e.rank() > rank {
                    return Err(BatchError::RankExceeded {
                        edge: e.id(),
                        size: e.rank(),
                        rank,
                    });
                }
                if present(e.id()) {
                    return Err(BatchError::AlreadyPresent(e.id()));
                }
            }
        }
        UpdateBatch::Delete(ids) => {
            for &id in ids {
                if !seen.insert(id) {
                    return Err(BatchError::DuplicateInBatch(id));
                }
                if !present(id) {
                    return Err(BatchError::NotPresent(id));
                }
            }
        }
    }
    Ok(())
}

/// Global sizes of the live hypergraph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    /// Distinct vertices seen over the run (reporting only).
    pub n: u64,
    /// Current edge count.
    pub m: u64,
    /// Largest edge count observed.
    pub m_max: u64,
    /// Total cardinality, the sum of |e| over live edges.
    pub m_prime: u64,
    /// Rank bound.
    pub r: usize,
}
