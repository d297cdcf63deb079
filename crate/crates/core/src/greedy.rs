//! Random greedy maximal matching on hypergraphs.
//!
//! [`sequential_greedy_match`] is the reference: walk edges in priority order,
//! match every free edge and absorb its still-free neighbours into its sample
//! space. [`parallel_greedy_match`] computes the identical result in rounds.
//! Each round matches every *root* (an edge that is the top remaining edge at
//! all of its vertices), finishes the roots' remaining neighbours, and
//! advances the per-vertex `top` pointers. Sample spaces are assigned once
//! all rounds are over.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering::Relaxed};

use rayon::prelude::*;

use crate::parprims::{find_next, group_by, remove_duplicates, sum_by, PriorityAssignment, SEQ_CUTOFF};
use crate::types::{EdgeId, Hyperedge, VertexId};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MatchEntry {
    pub matched: EdgeId,
    /// Sample space, including `matched` itself.
    pub sample: Vec<EdgeId>,
}

/// Matched edges with their sample spaces. Entries are kept sorted by matched
/// id and each sample sorted ascending, so two results compare with `==`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchResult {
    entries: Vec<MatchEntry>,
    /// Greedy rounds (0 for the sequential reference).
    pub rounds: usize,
    /// Incidence visits performed, a work proxy.
    pub visits: u64,
}

impl MatchResult {
    fn from_entries(mut entries: Vec<MatchEntry>, rounds: usize, visits: u64) -> Self {
        for e in &mut entries {
            e.sample.sort_unstable();
        }
        entries.sort_unstable_by_key(|e| e.matched);
        MatchResult {
            entries,
            rounds,
            visits,
        }
    }

    pub fn entries(&self) -> &[MatchEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<MatchEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matched(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.entries.iter().map(|e| e.matched)
    }

    /// Same matched edges and sample spaces, ignoring round and work counts.
    pub fn same_matching(&self, other: &MatchResult) -> bool {
        self.entries == other.entries
    }

    /// First entry where the two results differ, if any.
    pub fn first_difference(&self, other: &MatchResult) -> Option<String> {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a != b {
                return Some(format!(
                    "matched {} sample {:?} vs matched {} sample {:?}",
                    a.matched, a.sample, b.matched, b.sample
                ));
            }
        }
        match self.entries.len().cmp(&other.entries.len()) {
            std::cmp::Ordering::Equal => None,
            _ => Some(format!(
                "{} entries vs {} entries",
                self.entries.len(),
                other.entries.len()
            )),
        }
    }

    /// Checks that this is a maximal matching of `edges` whose samples
    /// partition the input and are incident on their matched edge.
    pub fn verify<H: Borrow<Hyperedge>>(&self, edges: &[H]) -> Result<(), String> {
        let by_id: BTreeMap<EdgeId, &Hyperedge> = edges.iter().map(|e| (e.borrow().id(), e.borrow())).collect();
        let mut owner: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
        let mut covered: BTreeMap<VertexId, EdgeId> = BTreeMap::new();
        for entry in &self.entries {
            let m = by_id
                .get(&entry.matched)
                .ok_or_else(|| format!("matched edge {} is not an input edge", entry.matched))?;
            if !entry.sample.contains(&entry.matched) {
                return Err(format!("{} is missing from its own sample", entry.matched));
            }
            for &v in m.vertices() {
                if let Some(other) = covered.insert(v, entry.matched) {
                    return Err(format!("{} and {} share vertex {}", other, entry.matched, v));
                }
            }
            for &s in &entry.sample {
                let e = by_id
                    .get(&s)
                    .ok_or_else(|| format!("sample edge {s} is not an input edge"))?;
                if !e.is_incident(m) {
                    return Err(format!("sample edge {s} is not incident on {}", entry.matched));
                }
                if let Some(prev) = owner.insert(s, entry.matched) {
                    return Err(format!("{s} is in the samples of {prev} and {}", entry.matched));
                }
            }
        }
        if let Some(missing) = by_id.keys().find(|id| !owner.contains_key(id)) {
            return Err(format!("{missing} is in no sample"));
        }
        for e in by_id.values() {
            if !e.vertices().iter().any(|v| covered.contains_key(v)) {
                return Err(format!("{} touches no matched edge", e.id()));
            }
        }
        Ok(())
    }
}

/// Reference implementation: one pass over the edges in priority order.
pub fn sequential_greedy_match<H: Borrow<Hyperedge>>(edges: &[H], pri: &PriorityAssignment) -> MatchResult {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| pri.key(edges[i].borrow().id()));

    let mut incident: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        for &v in e.borrow().vertices() {
            incident.entry(v).or_default().push(i);
        }
    }

    let mut free = vec![true; edges.len()];
    let mut entries = Vec::new();
    let mut visits = 0u64;
    for i in order {
        if !free[i] {
            continue;
        }
        free[i] = false;
        let e = edges[i].borrow();
        let mut sample = vec![e.id()];
        for v in e.vertices() {
            for &j in &incident[v] {
                visits += 1;
                if free[j] {
                    free[j] = false;
                    sample.push(edges[j].borrow().id());
                }
            }
        }
        entries.push(MatchEntry {
            matched: e.id(),
            sample,
        });
    }
    MatchResult::from_entries(entries, 0, visits)
}

/// Per-call scratch state of the parallel matcher. Edges are renumbered by
/// priority rank (0 is processed first) and vertices densely.
///
/// The remaining-neighbour set N(v) is `edges(v)[top(v)..]` filtered by
/// `done`. It is only enumerated for vertices of a root, and such a vertex
/// is exhausted in the same round, so every incidence is scanned at most once.
pub struct Workspace {
    edge_ids: Vec<EdgeId>,
    edge_off: Vec<u32>,
    edge_verts: Vec<u32>,
    vert_off: Vec<u32>,
    vert_edges: Vec<u32>,
    top: Vec<AtomicU32>,
    counter: Vec<AtomicU32>,
    done: Vec<AtomicBool>,
}

impl Workspace {
    pub fn new<H: Borrow<Hyperedge> + Sync>(edges: &[H], pri: &PriorityAssignment) -> Self {
        let m = edges.len();
        let par = m >= SEQ_CUTOFF;
        let mut order: Vec<((u64, EdgeId), u32)> = if par {
            edges
                .par_iter()
                .enumerate()
                .map(|(i, e)| (pri.key(e.borrow().id()), i as u32))
                .collect()
        } else {
            edges
                .iter()
                .enumerate()
                .map(|(i, e)| (pri.key(e.borrow().id()), i as u32))
                .collect()
        };
        if par {
            order.par_sort_unstable();
        } else {
            order.sort_unstable();
        }
        let edge_ids: Vec<EdgeId> = order.iter().map(|&((_, id), _)| id).collect();

        // (vertex, rank) incidences; sorting groups by vertex and orders
        // each group by priority
        let mut inc: Vec<(VertexId, u32)> = Vec::new();
        let mut edge_off = Vec::with_capacity(m + 1);
        edge_off.push(0u32);
        for (rank, &(_, i)) in order.iter().enumerate() {
            let e = edges[i as usize].borrow();
            for &v in e.vertices() {
                inc.push((v, rank as u32));
            }
            edge_off.push(inc.len() as u32);
        }
        if par {
            inc.par_sort_unstable();
        } else {
            inc.sort_unstable();
        }

        let mut vert_off = Vec::new();
        let mut vert_edges = Vec::with_capacity(inc.len());
        let mut slot_vertex = vec![0u32; inc.len()];
        let mut fill = edge_off.clone();
        let mut prev: Option<VertexId> = None;
        for &(v, rank) in &inc {
            if prev != Some(v) {
                vert_off.push(vert_edges.len() as u32);
                prev = Some(v);
            }
            let vidx = (vert_off.len() - 1) as u32;
            vert_edges.push(rank);
            let slot = &mut fill[rank as usize];
            slot_vertex[*slot as usize] = vidx;
            *slot += 1;
        }
        vert_off.push(vert_edges.len() as u32);
        let n = vert_off.len() - 1;

        Workspace {
            edge_ids,
            edge_off,
            edge_verts: slot_vertex,
            vert_off,
            vert_edges,
            top: (0..n).map(|_| AtomicU32::new(0)).collect(),
            counter: (0..m).map(|_| AtomicU32::new(0)).collect(),
            done: (0..m).map(|_| AtomicBool::new(false)).collect(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.top.len()
    }

    /// Edge id at priority rank `e`.
    pub fn edge_id(&self, e: u32) -> EdgeId {
        self.edge_ids[e as usize]
    }

    #[inline]
    pub fn edge_vertices(&self, e: u32) -> &[u32] {
        let e = e as usize;
        &self.edge_verts[self.edge_off[e] as usize..self.edge_off[e + 1] as usize]
    }

    #[inline]
    pub fn edge_rank(&self, e: u32) -> u32 {
        self.edge_off[e as usize + 1] - self.edge_off[e as usize]
    }

    /// `edges(v)`: incident edges of `v`, highest priority first.
    #[inline]
    pub fn vertex_edges(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.vert_edges[self.vert_off[v] as usize..self.vert_off[v + 1] as usize]
    }

    #[inline]
    pub fn top(&self, v: u32) -> usize {
        self.top[v as usize].load(Relaxed) as usize
    }

    #[inline]
    pub fn is_done(&self, e: u32) -> bool {
        self.done[e as usize].load(Relaxed)
    }

    pub fn mark_done(&self, e: u32) {
        self.done[e as usize].store(true, Relaxed);
    }

    pub fn counter(&self, e: u32) -> u32 {
        self.counter[e as usize].load(Relaxed)
    }

    /// Adds `by` to the counter of `e`; true iff it now equals |V(e)|.
    pub fn bump_counter(&self, e: u32, by: u32) -> bool {
        let now = self.counter[e as usize].fetch_add(by, Relaxed) + by;
        now == self.edge_rank(e)
    }

    /// Remaining incident edges of `v`.
    pub fn remaining(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vertex_edges(v)[self.top(v)..]
            .iter()
            .copied()
            .filter(move |&e| !self.is_done(e))
    }

    /// Moves `top(v)` past finished edges. Returns the new top edge, or
    /// `None` if the old top was not finished or the list is exhausted.
    /// Also returns how far the pointer slid.
    pub fn advance_top(&self, v: u32) -> (Option<u32>, usize) {
        let list = self.vertex_edges(v);
        let t = self.top(v);
        if t == list.len() || !self.is_done(list[t]) {
            return (None, 0);
        }
        let next = find_next(t, list, |&e| !self.is_done(e));
        self.top[v as usize].store(next as u32, Relaxed);
        (list.get(next).copied(), next - t)
    }

    /// Corrects `top(v)` and increments the counter of the new top edge;
    /// returns that edge iff it just became a root.
    pub fn update_top(&self, v: u32) -> Option<u32> {
        let (next, _) = self.advance_top(v);
        next.filter(|&e| self.bump_counter(e, 1))
    }

    /// Seeds the counters with each vertex's first edge and returns the
    /// initial roots.
    fn initial_roots(&self) -> Vec<u32> {
        let firsts: Vec<(u32, i64)> = (0..self.num_vertices() as u32)
            .filter_map(|v| self.vertex_edges(v).first().map(|&e| (e, 1)))
            .collect();
        sum_by(firsts)
            .into_iter()
            .filter(|&(e, c)| self.bump_counter(e, c as u32))
            .map(|(e, _)| e)
            .collect()
    }
}

/// Greedy maximal matching computed in rounds of roots. Produces exactly
/// the result of [`sequential_greedy_match`] for the same priorities.
pub fn parallel_greedy_match<H: Borrow<Hyperedge> + Sync>(edges: &[H], pri: &PriorityAssignment) -> MatchResult {
    if edges.is_empty() {
        return MatchResult::default();
    }
    let ws = Workspace::new(edges, pri);
    let mut visits = ws.vert_edges.len() as u64;
    let mut roots = ws.initial_roots();
    let mut matched: Vec<u32> = Vec::new();
    let mut rounds = 0usize;

    while !roots.is_empty() {
        rounds += 1;
        let par = roots.len() * 4 >= SEQ_CUTOFF;

        // (e, w) for every root w and remaining edge e at a vertex of w
        let neighbours = |&w: &u32| {
            let ws = &ws;
            ws.edge_vertices(w)
                .iter()
                .flat_map(move |&v| ws.remaining(v).map(move |e| (e, w)))
                .collect::<Vec<_>>()
        };
        let pairs: Vec<(u32, u32)> = if par {
            roots.par_iter().flat_map_iter(neighbours).collect()
        } else {
            roots.iter().flat_map(neighbours).collect()
        };
        visits += pairs.len() as u64;

        matched.extend_from_slice(&roots);
        let finished = remove_duplicates(pairs.into_iter().map(|(e, _)| e).collect());
        for &e in &finished {
            ws.mark_done(e);
        }

        let touched = remove_duplicates(
            finished
                .iter()
                .flat_map(|&e| ws.edge_vertices(e).iter().copied())
                .collect(),
        );
        let advanced: Vec<(Option<u32>, usize)> = if par {
            touched.par_iter().map(|&v| ws.advance_top(v)).collect()
        } else {
            touched.iter().map(|&v| ws.advance_top(v)).collect()
        };
        visits += advanced.iter().map(|&(_, d)| d as u64).sum::<u64>();
        let bumps: Vec<(u32, i64)> = advanced.into_iter().filter_map(|(e, _)| e.map(|e| (e, 1))).collect();
        roots = sum_by(bumps)
            .into_iter()
            .filter(|&(e, c)| ws.bump_counter(e, c as u32))
            .map(|(e, _)| e)
            .collect();
    }

    let (entries, assign_visits) = assign_samples(&ws, &matched);
    visits += assign_visits;
    MatchResult::from_entries(entries, rounds, visits)
}

/// Every unmatched edge joins the sample of its highest-priority incident
/// matched edge, which is the edge that absorbs it in the sequential pass.
/// Deciding this inside a round (best root of that round) is not enough: a
/// higher-priority edge can become a root only in a later round.
fn assign_samples(ws: &Workspace, matched: &[u32]) -> (Vec<MatchEntry>, u64) {
    const NONE: u32 = u32::MAX;
    let mut owner_at = vec![NONE; ws.num_vertices()];
    for &w in matched {
        for &v in ws.edge_vertices(w) {
            owner_at[v as usize] = w;
        }
    }
    let owner_of = |e: u32| {
        ws.edge_vertices(e)
            .iter()
            .map(|&v| owner_at[v as usize])
            .min()
            .filter(|&o| o != NONE)
            .expect("maximal matching covers every edge")
    };
    let m = ws.num_edges() as u32;
    let pairs: Vec<(u32, u32)> = if (m as usize) < SEQ_CUTOFF {
        (0..m).map(|e| (owner_of(e), e)).collect()
    } else {
        (0..m).into_par_iter().map(|e| (owner_of(e), e)).collect()
    };
    let entries = group_by(pairs)
        .into_iter()
        .map(|(w, sample)| MatchEntry {
            matched: ws.edge_id(w),
            sample: sample.into_iter().map(|e| ws.edge_id(e)).collect(),
        })
        .collect();
    (entries, ws.edge_verts.len() as u64)
}

/// Empirical round budget, 10·(⌈lg m⌉ + 1).
pub fn round_budget(m: usize) -> usize {
    let lg = if m <= 1 { 0 } else { (usize::BITS - (m - 1).leading_zeros()) as usize };
    10 * (lg + 1)
}
