//! Parallel building blocks: grouping, summing, deduplication, `find_next`,
//! counter-keyed random priorities and a batch-updatable dictionary.
//!
//! Every collective here is a pure function of its inputs. Outputs are
//! returned in a canonical (key-sorted) order so that results do not depend
//! on how rayon schedules the work.

use std::hash::Hash;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::types::EdgeId;

/// Inputs smaller than this are handled on the calling thread.
pub(crate) const SEQ_CUTOFF: usize = 4096;

fn sort_by_key_stable<K: Ord + Send, V: Send>(pairs: &mut [(K, V)]) {
    if pairs.len() < SEQ_CUTOFF {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
    } else {
        pairs.par_sort_by(|a, b| a.0.cmp(&b.0));
    }
}

/// Groups values by key. Each distinct key appears once, keys ascending;
/// values keep their input order within a group.
pub fn group_by<K, V>(mut pairs: Vec<(K, V)>) -> Vec<(K, Vec<V>)>
where
    K: Ord + Send,
    V: Send,
{
    sort_by_key_stable(&mut pairs);
    let mut out: Vec<(K, Vec<V>)> = Vec::new();
    for (k, v) in pairs {
        match out.last_mut() {
            Some((last, vs)) if *last == k => vs.push(v),
            _ => out.push((k, vec![v])),
        }
    }
    out
}

/// Sums values per key. Overflow of the 64-bit accumulator is fatal.
pub fn sum_by<K>(mut pairs: Vec<(K, i64)>) -> Vec<(K, i64)>
where
    K: Ord + Send,
{
    sort_by_key_stable(&mut pairs);
    let mut out: Vec<(K, i64)> = Vec::new();
    for (k, v) in pairs {
        match out.last_mut() {
            Some((last, acc)) if *last == k => {
                *acc = acc.checked_add(v).expect("sum_by: 64-bit overflow");
            }
            _ => out.push((k, v)),
        }
    }
    out
}

/// Returns each distinct element once, ascending.
pub fn remove_duplicates<T>(mut items: Vec<T>) -> Vec<T>
where
    T: Ord + Send,
{
    if items.len() < SEQ_CUTOFF {
        items.sort_unstable();
    } else {
        items.par_sort_unstable();
    }
    items.dedup();
    items
}

/// Smallest `j > i` with `pred(&arr[j])`, or `arr.len()` if there is none.
///
/// Probes windows of doubling size after `i`, so the cost is proportional to
/// `j - i` rather than to the array length. Large windows are searched in
/// parallel.
pub fn find_next<T, P>(i: usize, arr: &[T], pred: P) -> usize
where
    T: Sync,
    P: Fn(&T) -> bool + Sync,
{
    let n = arr.len();
    let mut lo = i + 1;
    let mut width = 1usize;
    while lo < n {
        let hi = n.min(lo + width);
        let window = &arr[lo..hi];
        let hit = if window.len() < SEQ_CUTOFF {
            window.iter().position(&pred)
        } else {
            window.par_iter().position_first(&pred)
        };
        if let Some(off) = hit {
            return lo + off;
        }
        lo = hi;
        width *= 2;
    }
    n
}

/// What a random stream is used for. Part of the stream key so that
/// different consumers in the same round never share values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u64)]
pub enum Purpose {
    InsertMatch = 1,
    SettleMatch = 2,
    StaticMatch = 3,
    Workload = 4,
    Test = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub batch: u64,
    pub round: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(batch: u64, round: u64, purpose: Purpose) -> Self {
        StreamKey {
            batch,
            round,
            purpose,
        }
    }
}

/// Counter-keyed generator: the value at `(seed, key, index)` is fixed,
/// independent of evaluation order or thread count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Positioned ChaCha stream for `key`.
    pub fn stream(&self, key: StreamKey) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&key.batch.to_le_bytes());
        bytes[16..24].copy_from_slice(&key.round.to_le_bytes());
        bytes[24..32].copy_from_slice(&(key.purpose as u64).to_le_bytes());
        ChaCha8Rng::from_seed(bytes)
    }

    /// The `index`-th 64-bit word of the stream for `key`.
    pub fn value_at(&self, key: StreamKey, index: u64) -> u64 {
        let mut rng = self.stream(key);
        at(&mut rng, index)
    }
}

#[inline]
fn at(rng: &mut ChaCha8Rng, index: u64) -> u64 {
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Priorities over a set of edges. The induced order compares the 64-bit
/// priority first and the edge id second; smaller keys are processed first
/// ("higher priority").
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriorityAssignment {
    priority: FxHashMap<EdgeId, u64>,
}

impl PriorityAssignment {
    pub fn from_pairs<I: IntoIterator<Item = (EdgeId, u64)>>(pairs: I) -> Self {
        PriorityAssignment {
            priority: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, e: EdgeId) -> Option<u64> {
        self.priority.get(&e).copied()
    }

    /// Sort key of `e`; panics if `e` has no priority.
    #[inline]
    pub fn key(&self, e: EdgeId) -> (u64, EdgeId) {
        let p = *self
            .priority
            .get(&e)
            .unwrap_or_else(|| panic!("no priority for {e}"));
        (p, e)
    }

    pub fn covers<'a, I: IntoIterator<Item = &'a EdgeId>>(&self, edges: I) -> bool {
        edges.into_iter().all(|e| self.priority.contains_key(e))
    }

    pub fn len(&self) -> usize {
        self.priority.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priority.is_empty()
    }

    /// Pairs sorted by edge id.
    pub fn to_sorted_pairs(&self) -> Vec<(EdgeId, u64)> {
        let mut v: Vec<_> = self.priority.iter().map(|(&e, &p)| (e, p)).collect();
        v.sort_unstable();
        v
    }
}

/// Draws one independent 64-bit priority per edge from the stream `key`.
/// The value for an edge depends only on `(seed, key, edge id)`.
pub fn draw_priorities(edges: &[EdgeId], rng: &SeededRng, key: StreamKey) -> PriorityAssignment {
    let base = rng.stream(key);
    let pairs: Vec<(EdgeId, u64)> = if edges.len() < SEQ_CUTOFF {
        let mut r = base;
        edges.iter().map(|&e| (e, at(&mut r, e.0))).collect()
    } else {
        edges
            .par_iter()
            .map_with(base, |r, &e| (e, at(r, e.0)))
            .collect()
    };
    PriorityAssignment::from_pairs(pairs)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DictOp<K, V> {
    Insert(K, V),
    Delete(K),
    Lookup(K),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DictOutcome<V> {
    Inserted,
    /// Insert of a key that was already present; the stored value is kept.
    AlreadyPresent,
    Deleted(V),
    /// Delete of an absent key.
    Absent,
    Found(V),
    NotFound,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DictError {
    #[error("key is updated more than once in one batch (op {0})")]
    ConflictingUpdate(usize),
}

/// Dictionary updated in batches. Insertions and deletions of a batch are
/// applied first; lookups in the same batch observe the result. A key may be
/// the target of at most one insert or delete per batch, which makes the
/// outcome independent of the order the operations are applied in.
#[derive(Clone, Debug)]
pub struct BatchDict<K, V> {
    map: FxHashMap<K, V>,
}

impl<K, V> Default for BatchDict<K, V> {
    fn default() -> Self {
        BatchDict {
            map: FxHashMap::default(),
        }
    }
}

impl<K, V> BatchDict<K, V>
where
    K: Eq + Hash + Clone + Send + Sync,
    V: Clone + Send + Sync,
{
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, k: &K) -> Option<&V> {
        self.map.get(k)
    }

    pub fn apply(&mut self, ops: Vec<DictOp<K, V>>) -> Result<Vec<DictOutcome<V>>, DictError> {
        let mut touched: FxHashMap<&K, ()> = FxHashMap::default();
        for (i, op) in ops.iter().enumerate() {
            if let DictOp::Insert(k, _) | DictOp::Delete(k) = op {
                if touched.insert(k, ()).is_some() {
                    return Err(DictError::ConflictingUpdate(i));
                }
            }
        }
        drop(touched);

        let mut out: Vec<Option<DictOutcome<V>>> = vec![None; ops.len()];
        let mut lookups = Vec::new();
        for (i, op) in ops.into_iter().enumerate() {
            match op {
                DictOp::Insert(k, v) => {
                    out[i] = Some(match self.map.entry(k) {
                        std::collections::hash_map::Entry::Occupied(_) => DictOutcome::AlreadyPresent,
                        std::collections::hash_map::Entry::Vacant(slot) => {
                            slot.insert(v);
                            DictOutcome::Inserted
                        }
                    });
                }
                DictOp::Delete(k) => {
                    out[i] = Some(match self.map.remove(&k) {
                        Some(v) => DictOutcome::Deleted(v),
                        None => DictOutcome::Absent,
                    });
                }
                DictOp::Lookup(k) => lookups.push((i, k)),
            }
        }
        let map = &self.map;
        let found: Vec<(usize, DictOutcome<V>)> = lookups
            .into_par_iter()
            .map(|(i, k)| {
                let r = match map.get(&k) {
                    Some(v) => DictOutcome::Found(v.clone()),
                    None => DictOutcome::NotFound,
                };
                (i, r)
            })
            .collect();
        for (i, r) in found {
            out[i] = Some(r);
        }
        Ok(out.into_iter().map(|o| o.expect("every op answered")).collect())
    }

    /// Entries sorted by key.
    pub fn to_sorted_vec(&self) -> Vec<(K, V)>
    where
        K: Ord,
    {
        let mut v: Vec<_> = self.map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        v
    }
}
