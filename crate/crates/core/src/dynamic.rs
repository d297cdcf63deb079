//! Batch-dynamic maximal matching: insert and delete batches of hyperedges
//! on top of the leveled structure.
//!
//! Deleting a matched edge dissolves its match. A light match hands its
//! owned edges straight back to [`Engine::insert_edges`]'s greedy path; a
//! heavy one releases them into a random settle, which greedily rematches
//! them with fresh priorities and may in turn steal existing matches or
//! create matches too heavy for their level. Settling repeats while the
//! pending set is large relative to what has been settled so far.

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::accounting::{AccountingError, DeathCause, DeleteStatus, Ledger, RoundStats, WorkCounters};
use crate::greedy::parallel_greedy_match;
use crate::leveled::{EdgeKind, LeveledStructure, StructureError, Violation};
use crate::parprims::{draw_priorities, remove_duplicates, Purpose, SeededRng, StreamKey};
use crate::types::{validate_batch, BatchError, BatchKind, EdgeId, GraphStats, Hyperedge, UpdateBatch, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub rank: usize,
    pub seed: u64,
    /// Keep epochs, payments and per-round statistics. Work counters are
    /// always kept.
    pub accounting: bool,
}

impl EngineConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        EngineConfig {
            rank,
            seed,
            accounting: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("structure operation failed: {0}")]
    Structure(#[from] StructureError),
    #[error("accounting: {0}")]
    Accounting(#[from] AccountingError),
    /// The batch was applied in full, but a settle round broke the
    /// added-vs-deleted sample inequality.
    #[error("batch {batch} applied, but {count} settle round(s) broke the sample inequality; first: {first}")]
    RoundInequality {
        batch: u64,
        count: usize,
        first: AccountingError,
    },
    #[error("rank must be at least 1")]
    ZeroRank,
}

/// What one batch did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchReport {
    pub batch: u64,
    pub kind: Option<BatchKind>,
    pub size: usize,
    /// Iterations of the settle loop (0 for inserts).
    pub settle_iterations: u32,
    pub greedy_calls: u32,
    pub greedy_rounds: u64,
    /// Largest round count of any single greedy call.
    pub max_greedy_rounds: u64,
    pub payment: u64,
    pub rounds: Vec<RoundStats>,
    pub work: WorkCounters,
}

#[derive(Clone, Debug)]
pub struct Engine {
    config: EngineConfig,
    structure: LeveledStructure,
    rng: SeededRng,
    ledger: Option<Ledger>,
    /// Index of the batch being (or last) applied; batch 0 is never used.
    batch: u64,
    greedy_calls: u64,
    report: BatchReport,
    violations: Vec<AccountingError>,
    total_round_violations: u64,
    vertices_seen: FxHashSet<VertexId>,
    stats: GraphStats,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        if config.rank == 0 {
            return Err(EngineError::ZeroRank);
        }
        Ok(Engine {
            config,
            structure: LeveledStructure::new(config.rank),
            rng: SeededRng::new(config.seed),
            ledger: config.accounting.then(Ledger::new),
            batch: 0,
            greedy_calls: 0,
            report: BatchReport::default(),
            violations: Vec::new(),
            total_round_violations: 0,
            vertices_seen: FxHashSet::default(),
            stats: GraphStats {
                r: config.rank,
                ..GraphStats::default()
            },
        })
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    pub fn structure(&self) -> &LeveledStructure {
        &self.structure
    }

    pub fn ledger(&self) -> Option<&Ledger> {
        self.ledger.as_ref()
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    pub fn work(&self) -> WorkCounters {
        self.structure.work()
    }

    /// Number of batches applied so far.
    pub fn batches(&self) -> u64 {
        self.batch
    }

    /// Settle rounds that broke the sample inequality, over the whole run.
    pub fn round_violations(&self) -> u64 {
        self.total_round_violations
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.structure.contains(e)
    }

    pub fn is_matched(&self, v: VertexId) -> Option<EdgeId> {
        self.structure.is_matched(v)
    }

    pub fn matched_edges(&self) -> Vec<EdgeId> {
        self.structure.matched_edges()
    }

    pub fn check_invariants(&self) -> Result<(), Violation> {
        self.structure.check_invariants()
    }

    pub fn apply(&mut self, batch: UpdateBatch) -> Result<BatchReport, EngineError> {
        match batch {
            UpdateBatch::Insert(edges) => self.insert_edges(edges),
            UpdateBatch::Delete(ids) => self.delete_edges(&ids),
        }
    }

    pub fn insert_edges(&mut self, edges: Vec<Hyperedge>) -> Result<BatchReport, EngineError> {
        let batch = UpdateBatch::Insert(edges);
        validate_batch(&batch, self.config.rank, |e| self.structure.contains(e))?;
        let UpdateBatch::Insert(edges) = batch else { unreachable!() };
        self.begin(BatchKind::Insert, edges.len());

        let mut ids = Vec::with_capacity(edges.len());
        for e in edges {
            ids.push(e.id());
            self.stats.m_prime += e.rank() as u64;
            self.vertices_seen.extend(e.vertices().iter().copied());
            self.structure.insert_unsettled(e)?;
        }
        self.stats.m += ids.len() as u64;
        self.stats.m_max = self.stats.m_max.max(self.stats.m);
        self.stats.n = self.vertices_seen.len() as u64;
        ids.sort_unstable();
        self.settle_by_insertion(&ids)?;
        self.finish()
    }

    pub fn delete_edges(&mut self, ids: &[EdgeId]) -> Result<BatchReport, EngineError> {
        validate_batch(&UpdateBatch::Delete(ids.to_vec()), self.config.rank, |e| {
            self.structure.contains(e)
        })?;
        self.begin(BatchKind::Delete, ids.len());

        // Classify and price every delete against the pre-batch state.
        let mut sampled = Vec::new();
        let mut cross = Vec::new();
        let mut matched = Vec::new();
        for &e in ids {
            let rec = self.structure.record(e).expect("validated");
            match rec.kind {
                EdgeKind::Sampled => sampled.push((e, rec.owner.expect("sampled edge has an owner"))),
                EdgeKind::Cross => cross.push(e),
                EdgeKind::Matched => matched.push(e),
                EdgeKind::Unsettled => unreachable!("no unsettled edge survives a batch"),
            }
        }
        let matched_set: FxHashSet<EdgeId> = matched.iter().copied().collect();
        let mut co_deleted = FxHashMap::<EdgeId, u64>::default();
        for &(_, owner) in &sampled {
            if matched_set.contains(&owner) {
                *co_deleted.entry(owner).or_default() += 1;
            }
        }
        for &e in ids {
            let status = match self.structure.kind(e).expect("validated") {
                EdgeKind::Sampled => DeleteStatus::Sampled {
                    owner: self.structure.owner(e).expect("sampled edge has an owner"),
                },
                EdgeKind::Cross => DeleteStatus::Cross,
                _ => DeleteStatus::Matched {
                    remaining: self.structure.match_record(e).expect("matched").sample.len() as u64,
                    co_deleted: co_deleted.get(&e).copied().unwrap_or(0),
                },
            };
            if let Some(ledger) = &mut self.ledger {
                self.report.payment += ledger.record_user_delete(e, status).amount;
            }
        }

        for &(e, _) in &sampled {
            let gone = self.structure.delete_sampled(e)?;
            self.forget(gone);
        }
        for &e in &cross {
            self.structure.remove_cross_edge(e)?;
            let gone = self.structure.remove_unsettled(e)?;
            self.forget(gone);
        }
        matched.sort_unstable();
        for &m in &matched {
            let gone = self.structure.delete_matched_edge(m)?;
            self.forget(gone);
            if let Some(ledger) = &mut self.ledger {
                ledger.close_epoch(m, DeathCause::Natural)?;
            }
        }
        self.stats.m -= ids.len() as u64;

        let mut pending = self.delete_matched_edges(&matched)?;
        let mut sampled_edges = 0u64;
        let mut prev_bloated = 0u64;
        let mut round = 0u32;
        while 2 * pending.len() as u64 > sampled_edges {
            sampled_edges += pending.len() as u64;
            round += 1;
            let (next, bloated) = self.random_settle(&pending, round, prev_bloated)?;
            pending = next;
            prev_bloated = bloated;
        }
        self.report.settle_iterations = round;
        self.settle_by_insertion(&pending)?;
        self.finish()
    }

    fn forget(&mut self, e: Hyperedge) {
        self.stats.m_prime -= e.rank() as u64;
    }

    fn begin(&mut self, kind: BatchKind, size: usize) {
        self.batch += 1;
        self.greedy_calls = 0;
        self.violations.clear();
        self.report = BatchReport {
            batch: self.batch,
            kind: Some(kind),
            size,
            work: self.structure.work(),
            ..BatchReport::default()
        };
        if let Some(ledger) = &mut self.ledger {
            ledger.begin_batch(self.batch, kind, size);
        }
    }

    fn finish(&mut self) -> Result<BatchReport, EngineError> {
        let mut report = std::mem::take(&mut self.report);
        report.work = self.structure.work().since(&report.work);
        if let Some(ledger) = &mut self.ledger {
            ledger.end_batch(report.work, report.greedy_rounds);
        }
        if let Some(first) = self.violations.first() {
            return Err(EngineError::RoundInequality {
                batch: self.batch,
                count: self.violations.len(),
                first: first.clone(),
            });
        }
        Ok(report)
    }

    fn next_key(&mut self, purpose: Purpose) -> StreamKey {
        self.greedy_calls += 1;
        StreamKey::new(self.batch, self.greedy_calls, purpose)
    }

    fn greedy(&mut self, ids: &[EdgeId], purpose: Purpose) -> crate::greedy::MatchResult {
        let key = self.next_key(purpose);
        let pri = draw_priorities(ids, &self.rng, key);
        let edges: Vec<&Hyperedge> = ids
            .iter()
            .map(|e| &self.structure.record(*e).expect("edge is stored").edge)
            .collect();
        let result = parallel_greedy_match(&edges, &pri);
        self.structure.work.greedy_visits += result.visits;
        self.report.greedy_calls += 1;
        self.report.greedy_rounds += result.rounds as u64;
        self.report.max_greedy_rounds = self.report.max_greedy_rounds.max(result.rounds as u64);
        result
    }

    /// Places unsettled edges: greedy on those with no matched vertex, each
    /// match starting a level-0 epoch with a singleton sample; everything
    /// else becomes a cross edge.
    fn settle_by_insertion(&mut self, ids: &[EdgeId]) -> Result<(), EngineError> {
        if ids.is_empty() {
            return Ok(());
        }
        let free: Vec<EdgeId> = ids
            .iter()
            .copied()
            .filter(|e| {
                let rec = self.structure.record(*e).expect("edge is stored");
                rec.edge.vertices().iter().all(|v| self.structure.is_matched(*v).is_none())
            })
            .collect();
        let result = self.greedy(&free, Purpose::InsertMatch);
        let mut new: FxHashSet<EdgeId> = FxHashSet::default();
        for m in result.matched() {
            self.structure.add_match(m, &[m], false)?;
            if let Some(ledger) = &mut self.ledger {
                ledger.open_epoch(m, 0, 1)?;
            }
            new.insert(m);
        }
        let rest: Vec<EdgeId> = ids.iter().copied().filter(|e| !new.contains(e)).collect();
        self.structure.add_cross_edges(&rest)?;
        Ok(())
    }

    /// Dissolves the given matches. Surviving sampled edges become cross
    /// edges first; light matches are then removed and their edges placed
    /// by insertion, and heavy matches are removed last with their owned
    /// edges returned (ascending) for random settling.
    fn delete_matched_edges(&mut self, matches: &[EdgeId]) -> Result<Vec<EdgeId>, EngineError> {
        if matches.is_empty() {
            return Ok(Vec::new());
        }
        let mut released = Vec::new();
        for &m in matches {
            released.extend(self.structure.release_sample(m)?);
        }
        released.sort_unstable();
        self.structure.add_cross_edges(&released)?;

        let mut heavy = Vec::new();
        let mut light = Vec::new();
        for &m in matches {
            if self.structure.is_heavy(m)? {
                heavy.push(m);
            } else {
                light.push(m);
            }
        }
        let mut reinsert = Vec::new();
        for &m in &light {
            reinsert.extend(self.structure.remove_match(m)?);
        }
        reinsert.sort_unstable();
        self.settle_by_insertion(&reinsert)?;

        let mut pending = Vec::new();
        for &m in &heavy {
            pending.extend(self.structure.remove_match(m)?);
        }
        pending.sort_unstable();
        Ok(pending)
    }

    /// One settle round over unsettled `pending` edges. Returns the edges
    /// released for the next round and the total creation sample size of
    /// this round's bloated matches.
    fn random_settle(
        &mut self,
        pending: &[EdgeId],
        round: u32,
        prev_bloated: u64,
    ) -> Result<(Vec<EdgeId>, u64), EngineError> {
        if pending.is_empty() {
            return Ok((Vec::new(), 0));
        }
        let result = self.greedy(pending, Purpose::SettleMatch);

        // read p(v) before any new match overwrites it
        let stolen = remove_duplicates(
            result
                .matched()
                .flat_map(|m| {
                    let rec = self.structure.record(m).expect("edge is stored");
                    rec.edge
                        .vertices()
                        .iter()
                        .filter_map(|v| self.structure.is_matched(*v))
                        .collect::<Vec<_>>()
                })
                .collect(),
        );

        let mut new = Vec::with_capacity(result.len());
        let mut added = 0u64;
        for entry in result.entries() {
            let level = self.structure.add_match(entry.matched, &entry.sample, true)?;
            added += entry.sample.len() as u64;
            if let Some(ledger) = &mut self.ledger {
                ledger.open_epoch(entry.matched, level, entry.sample.len() as u64)?;
            }
            new.push(entry.matched);
        }
        self.structure.adjust_cross_edges(&new)?;

        let mut bloated = Vec::new();
        for &m in &new {
            if self.structure.is_heavy(m)? {
                bloated.push(m);
            }
        }
        let created = |s: &LeveledStructure, m: EdgeId| s.match_record(m).expect("live match").created_sample;
        let stolen_size: u64 = stolen.iter().map(|&m| created(&self.structure, m)).sum();
        let bloated_size: u64 = bloated.iter().map(|&m| created(&self.structure, m)).sum();

        let stats = RoundStats {
            batch: self.batch,
            round,
            added,
            deleted: stolen_size + prev_bloated,
            matches_created: new.len() as u64,
            stolen: stolen.len() as u64,
            bloated: bloated.len() as u64,
        };
        self.report.rounds.push(stats);
        let outcome = match &mut self.ledger {
            Some(ledger) => {
                for &m in &stolen {
                    ledger.close_epoch(m, DeathCause::Stolen)?;
                }
                for &m in &bloated {
                    ledger.close_epoch(m, DeathCause::Bloated)?;
                }
                ledger.record_round(stats)
            }
            None if stats.inequality_holds() => Ok(()),
            None => Err(AccountingError::RoundInequality {
                batch: stats.batch,
                round,
                added: stats.added,
                deleted: stats.deleted,
            }),
        };
        if let Err(e) = outcome {
            self.total_round_violations += 1;
            self.violations.push(e);
        }

        let mut dying = stolen;
        dying.extend(bloated);
        dying.sort_unstable();
        Ok((self.delete_matched_edges(&dying)?, bloated_size))
    }
}
