//! Runtime ledger for epochs, delete payments, settle rounds and work.
//!
//! An *epoch* is the lifetime of one match. It ends naturally when the user
//! deletes the matched edge, or is induced (stolen or bloated) when a random
//! settle removes it. Every user delete pays Φ: 1 for an unmatched sampled
//! edge, the match's remaining price for a matched edge, 0 for a cross edge.

use std::fmt;
use std::io::{self, Write};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::greedy::MatchResult;
use crate::types::{BatchKind, EdgeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeathCause {
    Natural,
    Stolen,
    Bloated,
}

impl fmt::Display for DeathCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeathCause::Natural => "natural",
            DeathCause::Stolen => "stolen",
            DeathCause::Bloated => "bloated",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochRecord {
    pub matched: EdgeId,
    pub level: u32,
    pub sample_size: u64,
    pub remaining_sample: u64,
    /// `None` while alive.
    pub death: Option<DeathCause>,
    pub created_batch: u64,
    pub died_batch: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Payment {
    pub batch: u64,
    pub edge: EdgeId,
    pub amount: u64,
    pub early: bool,
}

/// Status of a user-deleted edge, captured before the structure changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeleteStatus {
    Cross,
    Sampled { owner: EdgeId },
    /// `remaining` is |S(m)| before the batch; `co_deleted` counts sampled
    /// edges of `m` deleted in the same batch.
    Matched { remaining: u64, co_deleted: u64 },
}

/// One `randomSettle` round. `added` is the total sample size of the new
/// matches; `deleted` is the creation sample size of this round's stolen
/// matches plus the previous round's bloated ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub batch: u64,
    pub round: u32,
    pub added: u64,
    pub deleted: u64,
    pub matches_created: u64,
    pub stolen: u64,
    pub bloated: u64,
}

impl RoundStats {
    pub fn inequality_holds(&self) -> bool {
        self.added >= 2 * self.deleted
    }
}

/// Structure-operation counts, used as a scheduler-independent work measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub record_inserts: u64,
    pub record_deletes: u64,
    pub bag_touches: u64,
    pub sample_conversions: u64,
    pub greedy_visits: u64,
}

impl WorkCounters {
    pub fn total(&self) -> u64 {
        self.record_inserts + self.record_deletes + self.bag_touches + self.sample_conversions + self.greedy_visits
    }

    pub fn since(&self, earlier: &WorkCounters) -> WorkCounters {
        WorkCounters {
            record_inserts: self.record_inserts - earlier.record_inserts,
            record_deletes: self.record_deletes - earlier.record_deletes,
            bag_touches: self.bag_touches - earlier.bag_touches,
            sample_conversions: self.sample_conversions - earlier.sample_conversions,
            greedy_visits: self.greedy_visits - earlier.greedy_visits,
        }
    }
}

/// Per-batch row of the bench CSV.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchRow {
    pub batch: u64,
    pub kind: Option<BatchKind>,
    pub size: u64,
    pub phi_sum: u64,
    pub epochs_opened: u64,
    pub closed_natural: u64,
    pub closed_stolen: u64,
    pub closed_bloated: u64,
    pub settle_rounds: u64,
    pub greedy_rounds: u64,
    pub s_a: u64,
    pub s_d: u64,
    pub work: u64,
}

pub const CSV_HEADER: &str = "batch,kind,size,phi_sum,epochs_opened,closed_natural,closed_stolen,closed_bloated,settle_rounds,greedy_rounds,s_a,s_d,work";

impl BatchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.batch,
            self.kind.map(|k| k.to_string()).unwrap_or_default(),
            self.size,
            self.phi_sum,
            self.epochs_opened,
            self.closed_natural,
            self.closed_stolen,
            self.closed_bloated,
            self.settle_rounds,
            self.greedy_rounds,
            self.s_a,
            self.s_d,
            self.work
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AccountingError {
    #[error("epoch of {0} is not alive (double close?)")]
    DoubleClose(EdgeId),
    #[error("epoch of {0} is already open")]
    AlreadyOpen(EdgeId),
    #[error("settle round {round} of batch {batch}: added sample {added} < 2 x deleted sample {deleted}")]
    RoundInequality { batch: u64, round: u32, added: u64, deleted: u64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub batches: u64,
    pub user_deletes: u64,
    pub total_payment: u64,
    pub early_payment: u64,
    pub mean_payment: f64,
    /// Σ |S_e| over natural epochs.
    pub natural_sample_total: u64,
    pub ledger_inequality_holds: bool,
    pub epochs_opened: u64,
    pub closed_natural: u64,
    pub closed_stolen: u64,
    pub closed_bloated: u64,
    pub settle_rounds: u64,
    pub round_violations: u64,
    pub updates: u64,
    pub work: WorkCounters,
    pub work_per_update: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "batches            {}", self.batches)?;
        writeln!(f, "updates            {}", self.updates)?;
        writeln!(f, "user deletes       {}", self.user_deletes)?;
        writeln!(f, "payment total      {} (mean {:.4})", self.total_payment, self.mean_payment)?;
        writeln!(
            f,
            "natural samples    {} (<= payment: {})",
            self.natural_sample_total, self.ledger_inequality_holds
        )?;
        writeln!(
            f,
            "epochs             opened {} natural {} stolen {} bloated {}",
            self.epochs_opened, self.closed_natural, self.closed_stolen, self.closed_bloated
        )?;
        writeln!(
            f,
            "settle rounds      {} (inequality violations {})",
            self.settle_rounds, self.round_violations
        )?;
        write!(f, "work               {} ({:.3} per update)", self.work.total(), self.work_per_update)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Ledger {
    batch: u64,
    alive: FxHashMap<EdgeId, EpochRecord>,
    closed: Vec<EpochRecord>,
    payments: Vec<Payment>,
    rounds: Vec<RoundStats>,
    violations: Vec<AccountingError>,
    rows: Vec<BatchRow>,
    current: BatchRow,
    updates: u64,
    work: WorkCounters,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin_batch(&mut self, batch: u64, kind: BatchKind, size: usize) {
        self.batch = batch;
        self.current = BatchRow {
            batch,
            kind: Some(kind),
            size: size as u64,
            ..BatchRow::default()
        };
    }

    pub fn end_batch(&mut self, work: WorkCounters, greedy_rounds: u64) {
        self.current.work = work.total();
        self.current.greedy_rounds = greedy_rounds;
        self.updates += self.current.size;
        self.work = WorkCounters {
            record_inserts: self.work.record_inserts + work.record_inserts,
            record_deletes: self.work.record_deletes + work.record_deletes,
            bag_touches: self.work.bag_touches + work.bag_touches,
            sample_conversions: self.work.sample_conversions + work.sample_conversions,
            greedy_visits: self.work.greedy_visits + work.greedy_visits,
        };
        self.rows.push(std::mem::take(&mut self.current));
    }

    pub fn open_epoch(&mut self, matched: EdgeId, level: u32, sample_size: u64) -> Result<(), AccountingError> {
        if self.alive.contains_key(&matched) {
            return Err(AccountingError::AlreadyOpen(matched));
        }
        self.alive.insert(
            matched,
            EpochRecord {
                matched,
                level,
                sample_size,
                remaining_sample: sample_size,
                death: None,
                created_batch: self.batch,
                died_batch: None,
            },
        );
        self.current.epochs_opened += 1;
        Ok(())
    }

    pub fn close_epoch(&mut self, matched: EdgeId, cause: DeathCause) -> Result<EpochRecord, AccountingError> {
        let mut rec = self
            .alive
            .remove(&matched)
            .ok_or(AccountingError::DoubleClose(matched))?;
        rec.death = Some(cause);
        rec.died_batch = Some(self.batch);
        match cause {
            DeathCause::Natural => self.current.closed_natural += 1,
            DeathCause::Stolen => self.current.closed_stolen += 1,
            DeathCause::Bloated => self.current.closed_bloated += 1,
        }
        self.closed.push(rec.clone());
        Ok(rec)
    }

    /// Creation sample size of a live epoch.
    pub fn sample_size(&self, matched: EdgeId) -> Option<u64> {
        self.alive.get(&matched).map(|r| r.sample_size)
    }

    pub fn record_user_delete(&mut self, edge: EdgeId, status: DeleteStatus) -> Payment {
        let (amount, early) = match status {
            DeleteStatus::Cross => (0, false),
            DeleteStatus::Sampled { owner } => {
                if let Some(rec) = self.alive.get_mut(&owner) {
                    rec.remaining_sample = rec.remaining_sample.saturating_sub(1);
                }
                (1, true)
            }
            DeleteStatus::Matched { remaining, co_deleted } => {
                let price = remaining - co_deleted;
                if let Some(rec) = self.alive.get_mut(&edge) {
                    rec.remaining_sample = price;
                }
                (price, true)
            }
        };
        let p = Payment {
            batch: self.batch,
            edge,
            amount,
            early,
        };
        self.current.phi_sum += amount;
        self.payments.push(p);
        p
    }

    /// Records a settle round; a round that breaks `added >= 2 * deleted`
    /// is kept as a violation and returned as an error.
    pub fn record_round(&mut self, stats: RoundStats) -> Result<(), AccountingError> {
        self.current.settle_rounds += 1;
        self.current.s_a += stats.added;
        self.current.s_d += stats.deleted;
        self.rounds.push(stats);
        if stats.inequality_holds() {
            Ok(())
        } else {
            let err = AccountingError::RoundInequality {
                batch: stats.batch,
                round: stats.round,
                added: stats.added,
                deleted: stats.deleted,
            };
            self.violations.push(err.clone());
            Err(err)
        }
    }

    pub fn payments(&self) -> &[Payment] {
        &self.payments
    }

    pub fn rounds(&self) -> &[RoundStats] {
        &self.rounds
    }

    pub fn rows(&self) -> &[BatchRow] {
        &self.rows
    }

    pub fn closed_epochs(&self) -> &[EpochRecord] {
        &self.closed
    }

    pub fn alive_epochs(&self) -> usize {
        self.alive.len()
    }

    pub fn violations(&self) -> &[AccountingError] {
        &self.violations
    }

    pub fn report(&self) -> Summary {
        let user_deletes = self.payments.len() as u64;
        let total_payment: u64 = self.payments.iter().map(|p| p.amount).sum();
        let early_payment: u64 = self.payments.iter().filter(|p| p.early).map(|p| p.amount).sum();
        let natural_sample_total: u64 = self
            .closed
            .iter()
            .filter(|r| r.death == Some(DeathCause::Natural))
            .map(|r| r.sample_size)
            .sum();
        let count = |c: DeathCause| self.closed.iter().filter(|r| r.death == Some(c)).count() as u64;
        Summary {
            batches: self.rows.len() as u64,
            user_deletes,
            total_payment,
            early_payment,
            mean_payment: if user_deletes == 0 {
                0.0
            } else {
                total_payment as f64 / user_deletes as f64
            },
            natural_sample_total,
            ledger_inequality_holds: natural_sample_total <= total_payment,
            epochs_opened: self.rows.iter().map(|r| r.epochs_opened).sum(),
            closed_natural: count(DeathCause::Natural),
            closed_stolen: count(DeathCause::Stolen),
            closed_bloated: count(DeathCause::Bloated),
            settle_rounds: self.rounds.len() as u64,
            round_violations: self.violations.len() as u64,
            updates: self.updates,
            work: self.work,
            work_per_update: if self.updates == 0 {
                0.0
            } else {
                self.work.total() as f64 / self.updates as f64
            },
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(out, "{}", row.to_csv())?;
        }
        Ok(())
    }
}

/// Prices for a single static matching followed by user deletes, with no
/// rematching in between. Each match starts with price |S_e|; an early
/// unmatched delete pays 1 and lowers its match's price, a matched delete
/// pays what is left, and a late delete pays nothing.
#[derive(Clone, Debug)]
pub struct StaticPriceLedger {
    owner: FxHashMap<EdgeId, EdgeId>,
    price: FxHashMap<EdgeId, u64>,
    deleted: FxHashMap<EdgeId, ()>,
    early_total: u64,
    payments: Vec<Payment>,
}

impl StaticPriceLedger {
    pub fn new(result: &MatchResult) -> Self {
        let mut owner = FxHashMap::default();
        let mut price = FxHashMap::default();
        for entry in result.entries() {
            price.insert(entry.matched, entry.sample.len() as u64);
            for &s in &entry.sample {
                owner.insert(s, entry.matched);
            }
        }
        StaticPriceLedger {
            owner,
            price,
            deleted: FxHashMap::default(),
            early_total: 0,
            payments: Vec::new(),
        }
    }

    /// Deletes `e`; panics on an edge that is unknown or already deleted.
    pub fn delete(&mut self, e: EdgeId) -> Payment {
        assert!(self.deleted.insert(e, ()).is_none(), "{e} deleted twice");
        let m = *self.owner.get(&e).unwrap_or_else(|| panic!("{e} is not in any sample"));
        let (amount, early) = if self.deleted.contains_key(&m) && m != e {
            (0, false)
        } else if m == e {
            (self.price[&m], true)
        } else {
            let p = self.price.get_mut(&m).expect("price of live match");
            *p -= 1;
            (1, true)
        };
        if early {
            self.early_total += amount;
        }
        let p = Payment {
            batch: self.payments.len() as u64,
            edge: e,
            amount,
            early,
        };
        self.payments.push(p);
        p
    }

    pub fn early_total(&self) -> u64 {
        self.early_total
    }

    pub fn payments(&self) -> &[Payment] {
        &self.payments
    }
}
