//! The leveled matching structure.
//!
//! Every stored edge is matched, sampled or cross, and is owned by an
//! incident matched edge. A match sits on level ⌊lg s⌋ where `s` was its
//! sample size when it was created; a cross edge is owned by an incident
//! match of maximum level. Per-vertex bags `P(v, l)` index the cross edges at
//! `v` whose owner sits on level `l`, so ownership can be raised cheaply when
//! a higher-level match appears.
//!
//! Between batches these invariants hold; inside a batch edges may be
//! `Unsettled` while they wait to be placed again.

use std::cmp::Reverse;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::accounting::WorkCounters;
use crate::parprims::{remove_duplicates, SEQ_CUTOFF};
use crate::types::{EdgeId, Hyperedge, VertexId};

pub type Level = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Matched,
    Sampled,
    Cross,
    Unsettled,
}

#[derive(Clone, Debug)]
pub struct EdgeRecord {
    pub edge: Hyperedge,
    pub kind: EdgeKind,
    /// `p(e)`; `None` only while unsettled.
    pub owner: Option<EdgeId>,
}

#[derive(Clone, Debug)]
pub struct MatchRecord {
    pub vertices: Box<[VertexId]>,
    /// `S(m)`.
    pub sample: FxHashSet<EdgeId>,
    /// `C(m)`.
    pub cross: FxHashSet<EdgeId>,
    pub level: Level,
    /// |S(m)| when the match was created.
    pub created_sample: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("edge {0} is not in the structure")]
    UnknownEdge(EdgeId),
    #[error("edge {0} is already in the structure")]
    AlreadyPresent(EdgeId),
    #[error("{0} is not a matched edge")]
    NotMatched(EdgeId),
    #[error("addMatch({0}) with an empty sample")]
    EmptySample(EdgeId),
    #[error("match {0} must be part of its own sample")]
    MatchNotInSample(EdgeId),
    #[error("match {0} still owns sampled edges")]
    SampleNotEmpty(EdgeId),
    #[error("edge {0} has no incident matched edge")]
    NoIncidentMatch(EdgeId),
    #[error("edge {0} is not a cross edge")]
    NotCross(EdgeId),
    #[error("edge {edge} is {found:?}, expected {expected:?}")]
    WrongKind {
        edge: EdgeId,
        found: EdgeKind,
        expected: EdgeKind,
    },
    #[error("vertex {vertex} of {edge} is already matched by {other}")]
    VertexTaken {
        edge: EdgeId,
        vertex: VertexId,
        other: EdgeId,
    },
}

/// A broken structure invariant, named by the property it violates.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{invariant}: {detail}")]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

fn violation(invariant: &'static str, detail: String) -> Result<(), Violation> {
    Err(Violation { invariant, detail })
}

/// ⌊lg s⌋ for `s >= 1`.
pub fn level_for(sample_size: u64) -> Level {
    debug_assert!(sample_size > 0);
    63 - sample_size.leading_zeros()
}

#[derive(Clone, Debug)]
pub struct LeveledStructure {
    rank: usize,
    edges: FxHashMap<EdgeId, EdgeRecord>,
    matches: FxHashMap<EdgeId, MatchRecord>,
    /// `p(v)`; absent means the vertex is free.
    vertex_owner: FxHashMap<VertexId, EdgeId>,
    /// `P(v, l)`. Presence of a key is the "initialized" mark; bags are
    /// dropped as soon as they empty.
    bags: FxHashMap<(VertexId, Level), FxHashSet<EdgeId>>,
    pub(crate) work: WorkCounters,
}

impl LeveledStructure {
    pub fn new(rank: usize) -> Self {
        LeveledStructure {
            rank,
            edges: FxHashMap::default(),
            matches: FxHashMap::default(),
            vertex_owner: FxHashMap::default(),
            bags: FxHashMap::default(),
            work: WorkCounters::default(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn work(&self) -> WorkCounters {
        self.work
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_matches(&self) -> usize {
        self.matches.len()
    }

    pub fn num_bags(&self) -> usize {
        self.bags.len()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains_key(&e)
    }

    pub fn record(&self, e: EdgeId) -> Option<&EdgeRecord> {
        self.edges.get(&e)
    }

    pub fn match_record(&self, m: EdgeId) -> Option<&MatchRecord> {
        self.matches.get(&m)
    }

    pub fn kind(&self, e: EdgeId) -> Option<EdgeKind> {
        self.edges.get(&e).map(|r| r.kind)
    }

    pub fn owner(&self, e: EdgeId) -> Option<EdgeId> {
        self.edges.get(&e).and_then(|r| r.owner)
    }

    pub fn level(&self, m: EdgeId) -> Option<Level> {
        self.matches.get(&m).map(|r| r.level)
    }

    /// `p(v)`: the matched edge covering `v`.
    pub fn is_matched(&self, v: VertexId) -> Option<EdgeId> {
        self.vertex_owner.get(&v).copied()
    }

    /// All matched edges, ascending.
    pub fn matched_edges(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = self.matches.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// All stored edge ids, ascending.
    pub fn edge_ids(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = self.edges.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn bag(&self, v: VertexId, l: Level) -> Option<&FxHashSet<EdgeId>> {
        self.bags.get(&(v, l))
    }

    fn expect_kind(&self, e: EdgeId, expected: EdgeKind) -> Result<&EdgeRecord, StructureError> {
        let rec = self.edges.get(&e).ok_or(StructureError::UnknownEdge(e))?;
        if rec.kind != expected {
            return Err(StructureError::WrongKind {
                edge: e,
                found: rec.kind,
                expected,
            });
        }
        Ok(rec)
    }

    /// Stores a new edge as unsettled.
    pub fn insert_unsettled(&mut self, edge: Hyperedge) -> Result<(), StructureError> {
        let id = edge.id();
        if self.edges.contains_key(&id) {
            return Err(StructureError::AlreadyPresent(id));
        }
        self.edges.insert(
            id,
            EdgeRecord {
                edge,
                kind: EdgeKind::Unsettled,
                owner: None,
            },
        );
        self.work.record_inserts += 1;
        Ok(())
    }

    /// Drops the record of an unsettled edge (used when the user deletes it).
    pub fn remove_unsettled(&mut self, e: EdgeId) -> Result<Hyperedge, StructureError> {
        self.expect_kind(e, EdgeKind::Unsettled)?;
        self.work.record_deletes += 1;
        Ok(self.edges.remove(&e).expect("checked above").edge)
    }

    pub fn heavy_threshold(&self, level: Level) -> u128 {
        let r = self.rank as u128;
        (4 * r * r).checked_shl(level).unwrap_or(u128::MAX)
    }

    /// |C(m)| ≥ 4·r²·2^l(m).
    pub fn is_heavy(&self, m: EdgeId) -> Result<bool, StructureError> {
        let rec = self.matches.get(&m).ok_or(StructureError::NotMatched(m))?;
        Ok(rec.cross.len() as u128 >= self.heavy_threshold(rec.level))
    }

    /// Makes `m` a match owning `sample` (which must contain `m`). All
    /// involved edges must be unsettled. Vertices of `m` that are still owned
    /// by another match are taken over only if `allow_steal` is set.
    pub fn add_match(&mut self, m: EdgeId, sample: &[EdgeId], allow_steal: bool) -> Result<Level, StructureError> {
        if sample.is_empty() {
            return Err(StructureError::EmptySample(m));
        }
        if !sample.contains(&m) {
            return Err(StructureError::MatchNotInSample(m));
        }
        for &e in sample {
            self.expect_kind(e, EdgeKind::Unsettled)?;
        }
        let vertices: Box<[VertexId]> = self.edges[&m].edge.vertices().into();
        if !allow_steal {
            for &v in vertices.iter() {
                if let Some(&other) = self.vertex_owner.get(&v) {
                    return Err(StructureError::VertexTaken { edge: m, vertex: v, other });
                }
            }
        }
        for &e in sample {
            let rec = self.edges.get_mut(&e).expect("checked above");
            rec.kind = EdgeKind::Sampled;
            rec.owner = Some(m);
        }
        self.edges.get_mut(&m).expect("checked above").kind = EdgeKind::Matched;
        for &v in vertices.iter() {
            self.vertex_owner.insert(v, m);
        }
        let level = level_for(sample.len() as u64);
        self.matches.insert(
            m,
            MatchRecord {
                vertices,
                sample: sample.iter().copied().collect(),
                cross: FxHashSet::default(),
                level,
                created_sample: sample.len() as u64,
            },
        );
        self.work.record_inserts += 1 + sample.len() as u64;
        Ok(level)
    }

    /// Turns every sampled edge of `m` (including `m` itself, if still there)
    /// back into an unsettled edge, emptying S(m).
    pub fn release_sample(&mut self, m: EdgeId) -> Result<Vec<EdgeId>, StructureError> {
        let rec = self.matches.get_mut(&m).ok_or(StructureError::NotMatched(m))?;
        let mut released: Vec<EdgeId> = rec.sample.drain().collect();
        released.sort_unstable();
        for &e in &released {
            let r = self.edges.get_mut(&e).expect("sampled edge has a record");
            r.kind = EdgeKind::Unsettled;
            r.owner = None;
        }
        self.work.sample_conversions += released.len() as u64;
        Ok(released)
    }

    /// User delete of an unmatched sampled edge: drops it from S(p(e)) and
    /// from the structure.
    pub fn delete_sampled(&mut self, e: EdgeId) -> Result<Hyperedge, StructureError> {
        let owner = self.expect_kind(e, EdgeKind::Sampled)?.owner.expect("sampled edge has an owner");
        self.matches
            .get_mut(&owner)
            .expect("owner is a match")
            .sample
            .remove(&e);
        self.work.record_deletes += 1;
        Ok(self.edges.remove(&e).expect("checked above").edge)
    }

    /// User delete of a matched edge: drops it from its own sample and from
    /// the edge table. The match record stays until [`Self::remove_match`].
    pub fn delete_matched_edge(&mut self, m: EdgeId) -> Result<Hyperedge, StructureError> {
        self.expect_kind(m, EdgeKind::Matched)?;
        self.matches.get_mut(&m).expect("matched edge has a record").sample.remove(&m);
        self.work.record_deletes += 1;
        Ok(self.edges.remove(&m).expect("checked above").edge)
    }

    /// Removes match `m`, frees its vertices and unsettles its cross edges,
    /// which are returned ascending. S(m) must already be empty.
    pub fn remove_match(&mut self, m: EdgeId) -> Result<Vec<EdgeId>, StructureError> {
        let rec = self.matches.get(&m).ok_or(StructureError::NotMatched(m))?;
        if !rec.sample.is_empty() {
            return Err(StructureError::SampleNotEmpty(m));
        }
        let mut owned: Vec<EdgeId> = rec.cross.iter().copied().collect();
        owned.sort_unstable();
        for &e in &owned {
            self.remove_cross_edge(e)?;
        }
        let rec = self.matches.remove(&m).expect("checked above");
        for v in rec.vertices.iter() {
            // a vertex may already belong to a match that stole it
            if self.vertex_owner.get(v) == Some(&m) {
                self.vertex_owner.remove(v);
            }
        }
        self.work.record_deletes += 1;
        Ok(owned)
    }

    /// Owner a cross edge `e` would get: the incident match of maximum level,
    /// smallest id among ties. Free vertices do not compete.
    pub fn best_owner(&self, e: &Hyperedge) -> Option<EdgeId> {
        e.vertices()
            .iter()
            .filter_map(|v| self.vertex_owner.get(v))
            .max_by_key(|&&m| (self.matches[&m].level, Reverse(m)))
            .copied()
    }

    fn attach_cross(&mut self, e: EdgeId, owner: EdgeId) {
        let level = {
            let rec = self.matches.get_mut(&owner).expect("owner is a match");
            rec.cross.insert(e);
            rec.level
        };
        let rec = self.edges.get_mut(&e).expect("edge has a record");
        rec.kind = EdgeKind::Cross;
        rec.owner = Some(owner);
        for &v in rec.edge.vertices() {
            self.bags.entry((v, level)).or_default().insert(e);
        }
        self.work.record_inserts += 1;
        self.work.bag_touches += rec.edge.rank() as u64;
    }

    /// Places an unsettled edge as a cross edge of its best owner.
    pub fn add_cross_edge(&mut self, e: EdgeId) -> Result<(), StructureError> {
        let rec = self.expect_kind(e, EdgeKind::Unsettled)?;
        let owner = self.best_owner(&rec.edge).ok_or(StructureError::NoIncidentMatch(e))?;
        self.attach_cross(e, owner);
        Ok(())
    }

    /// [`Self::add_cross_edge`] for many edges; owners are computed in
    /// parallel against the current matching, then applied.
    pub fn add_cross_edges(&mut self, es: &[EdgeId]) -> Result<(), StructureError> {
        let this = &*self;
        let owner_of = |&e: &EdgeId| -> Result<(EdgeId, EdgeId), StructureError> {
            let rec = this.expect_kind(e, EdgeKind::Unsettled)?;
            let owner = this.best_owner(&rec.edge).ok_or(StructureError::NoIncidentMatch(e))?;
            Ok((e, owner))
        };
        let placed: Result<Vec<_>, _> = if es.len() < SEQ_CUTOFF {
            es.iter().map(owner_of).collect()
        } else {
            es.par_iter().map(owner_of).collect()
        };
        for (e, owner) in placed? {
            self.attach_cross(e, owner);
        }
        Ok(())
    }

    /// Detaches a cross edge from its owner and bags; it becomes unsettled.
    pub fn remove_cross_edge(&mut self, e: EdgeId) -> Result<(), StructureError> {
        let rec = self.edges.get_mut(&e).ok_or(StructureError::UnknownEdge(e))?;
        if rec.kind != EdgeKind::Cross {
            return Err(StructureError::NotCross(e));
        }
        let owner = rec.owner.take().expect("cross edge has an owner");
        rec.kind = EdgeKind::Unsettled;
        let mrec = self.matches.get_mut(&owner).expect("owner is a match");
        mrec.cross.remove(&e);
        let level = mrec.level;
        for &v in rec.edge.vertices() {
            if let Some(bag) = self.bags.get_mut(&(v, level)) {
                bag.remove(&e);
                if bag.is_empty() {
                    self.bags.remove(&(v, level));
                }
            }
        }
        self.work.record_deletes += 1;
        self.work.bag_touches += rec.edge.rank() as u64;
        Ok(())
    }

    /// Re-owns the cross edges at vertices of `new_matches` whose owner sits
    /// below the new match's level.
    pub fn adjust_cross_edges(&mut self, new_matches: &[EdgeId]) -> Result<(), StructureError> {
        let mut lifted = Vec::new();
        for &m in new_matches {
            let rec = self.matches.get(&m).ok_or(StructureError::NotMatched(m))?;
            for &v in rec.vertices.iter() {
                let top = self.vertex_owner.get(&v).map_or(0, |o| self.matches[o].level);
                for l in 0..top {
                    self.work.bag_touches += 1;
                    if let Some(bag) = self.bags.get(&(v, l)) {
                        lifted.extend(bag.iter().copied());
                    }
                }
            }
        }
        let lifted = remove_duplicates(lifted);
        for &e in &lifted {
            self.remove_cross_edge(e)?;
        }
        self.add_cross_edges(&lifted)
    }

    /// Verifies every structure invariant; returns the first violation found
    /// (in ascending edge-id order).
    pub fn check_invariants(&self) -> Result<(), Violation> {
        let mut covered = 0usize;
        for m in self.matched_edges() {
            let mrec = &self.matches[&m];
            match self.edges.get(&m) {
                Some(r) if r.kind == EdgeKind::Matched => {}
                _ => return violation("I1 edge kinds", format!("match {m} has no matched edge record")),
            }
            if mrec.level != level_for(mrec.created_sample) || mrec.sample.len() as u64 > mrec.created_sample {
                return violation(
                    "I3 level",
                    format!(
                        "{m}: level {} for creation sample {} (now {})",
                        mrec.level,
                        mrec.created_sample,
                        mrec.sample.len()
                    ),
                );
            }
            for s in mrec.sample.iter().chain(&mrec.cross) {
                if self.owner(*s) != Some(m) {
                    return violation("I2 ownership", format!("{s} listed under {m} but owned by {:?}", self.owner(*s)));
                }
            }
            for s in &mrec.sample {
                if !matches!(self.kind(*s), Some(EdgeKind::Sampled | EdgeKind::Matched)) {
                    return violation("sample membership", format!("{s} in S({m}) but not sampled"));
                }
            }
            for c in &mrec.cross {
                if self.kind(*c) != Some(EdgeKind::Cross) {
                    return violation("cross membership", format!("{c} in C({m}) but not a cross edge"));
                }
            }
            for v in mrec.vertices.iter() {
                match self.vertex_owner.get(v) {
                    Some(&o) if o == m => covered += 1,
                    other => {
                        return violation(
                            "matching validity",
                            format!("{v} of match {m} maps to {other:?}"),
                        );
                    }
                }
            }
        }
        let mut bag_entries = 0usize;
        for e in self.edge_ids() {
            let rec = &self.edges[&e];
            let owner = match (rec.kind, rec.owner) {
                (EdgeKind::Unsettled, _) => return violation("I1 edge kinds", format!("{e} is unsettled")),
                (_, None) => return violation("I2 ownership", format!("{e} has no owner")),
                (_, Some(o)) => o,
            };
            let Some(mrec) = self.matches.get(&owner) else {
                return violation("I2 ownership", format!("{e} -> owner {owner}, which is not matched"));
            };
            let owner_edge = &self.edges.get(&owner).map(|r| &r.edge);
            match owner_edge {
                Some(oe) if oe.is_incident(&rec.edge) => {}
                _ => {
                    return violation("I2 ownership", format!("{e} -> owner {owner}, which is not incident"));
                }
            }
            match rec.kind {
                EdgeKind::Matched => {
                    if owner != e {
                        return violation("I2 ownership", format!("matched {e} is owned by {owner}"));
                    }
                    if !mrec.sample.contains(&e) {
                        return violation("sample membership", format!("matched {e} is not in S({e})"));
                    }
                }
                EdgeKind::Sampled => {
                    if !mrec.sample.contains(&e) {
                        return violation("sample membership", format!("{e} -> owner {owner}, not in S({owner})"));
                    }
                }
                EdgeKind::Cross => {
                    if !mrec.cross.contains(&e) {
                        return violation("cross membership", format!("{e} -> owner {owner}, not in C({owner})"));
                    }
                    let max_level = rec
                        .edge
                        .vertices()
                        .iter()
                        .filter_map(|v| self.vertex_owner.get(v))
                        .map(|m| self.matches[m].level)
                        .max();
                    if max_level != Some(mrec.level) {
                        return violation(
                            "I4 max level",
                            format!(
                                "cross {e} -> owner {owner} at level {}, max incident level {:?}",
                                mrec.level, max_level
                            ),
                        );
                    }
                    for &v in rec.edge.vertices() {
                        if !self.bags.get(&(v, mrec.level)).is_some_and(|b| b.contains(&e)) {
                            return violation(
                                "bag exactness",
                                format!("cross {e} missing from P({v}, {})", mrec.level),
                            );
                        }
                    }
                    bag_entries += rec.edge.rank();
                }
                EdgeKind::Unsettled => unreachable!(),
            }
        }

        if covered != self.vertex_owner.len() {
            return violation(
                "matching validity",
                format!(
                    "{} vertex owners recorded, {} vertices covered by matches",
                    self.vertex_owner.len(),
                    covered
                ),
            );
        }
        let stored: usize = self.bags.values().map(|b| b.len()).sum();
        if stored != bag_entries {
            return violation(
                "bag exactness",
                format!("bags hold {stored} entries, cross edges need {bag_entries}"),
            );
        }
        if let Some(((v, l), _)) = self.bags.iter().find(|(_, b)| b.is_empty()) {
            return violation("bag exactness", format!("empty bag P({v}, {l}) kept alive"));
        }
        Ok(())
    }
}
