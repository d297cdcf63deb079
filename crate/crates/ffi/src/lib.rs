//! C ABI for the batch-dynamic matching engine.
//!
//! Engines are opaque handles created by [`hm_engine_new`] and released by
//! [`hm_engine_free`]. Every call returns an [`HmStatus`]; on failure a
//! message is available from [`hm_last_error`] on the same thread. A panic
//! inside the engine poisons the handle, after which only `hm_engine_free`
//! is meaningful.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hypermatch::dynamic::{Engine, EngineConfig, EngineError};
use hypermatch::types::{EdgeId, Hyperedge, VertexId};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The batch failed validation; nothing was applied.
    BatchRejected = 3,
    /// The batch was applied but a settle round broke the sample inequality.
    RoundInequality = 4,
    InvariantViolation = 5,
    BufferTooSmall = 6,
    Poisoned = 7,
    Panic = 8,
}

/// Opaque engine handle.
pub struct HmEngine {
    engine: Engine,
    poisoned: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HmStats {
    /// Distinct vertices seen.
    pub n: u64,
    /// Live edges.
    pub m: u64,
    pub m_max: u64,
    /// Sum of edge sizes over live edges.
    pub m_prime: u64,
    pub rank: u64,
    pub matched: u64,
    pub batches: u64,
    pub round_violations: u64,
    /// Structure operations performed so far.
    pub work: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: HmStatus, msg: impl Into<String>) -> HmStatus {
    set_error(msg);
    status
}

fn engine_status(e: EngineError) -> HmStatus {
    let status = match e {
        EngineError::Batch(_) => HmStatus::BatchRejected,
        EngineError::RoundInequality { .. } => HmStatus::RoundInequality,
        EngineError::ZeroRank => HmStatus::InvalidArgument,
        EngineError::Structure(_) | EngineError::Accounting(_) => HmStatus::InvariantViolation,
    };
    fail(status, e.to_string())
}

/// Runs `f` on a live handle, turning panics into `Panic` and poisoning it.
fn with_engine<F>(handle: *mut HmEngine, f: F) -> HmStatus
where
    F: FnOnce(&mut Engine) -> HmStatus,
{
    if handle.is_null() {
        return fail(HmStatus::NullPointer, "engine handle is null");
    }
    // SAFETY: non-null handles come from hm_engine_new and are used by one
    // thread at a time, per the API contract.
    let h = unsafe { &mut *handle };
    if h.poisoned {
        return fail(HmStatus::Poisoned, "engine was poisoned by an earlier panic");
    }
    clear_error();
    match catch_unwind(AssertUnwindSafe(|| f(&mut h.engine))) {
        Ok(status) => status,
        Err(payload) => {
            h.poisoned = true;
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(HmStatus::Panic, format!("engine panicked: {msg}"))
        }
    }
}

/// # Safety
/// `ptr` must be null (only when `len == 0`) or valid for `len` reads.
unsafe fn input<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(ptr, len))
    }
}

/// Creates an engine with rank bound `rank` and random seed `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn hm_engine_new(rank: usize, seed: u64, out: *mut *mut HmEngine) -> HmStatus {
    if out.is_null() {
        return fail(HmStatus::NullPointer, "output pointer is null");
    }
    *out = ptr::null_mut();
    match Engine::new(EngineConfig::new(rank, seed)) {
        Ok(engine) => {
            clear_error();
            *out = Box::into_raw(Box::new(HmEngine {
                engine,
                poisoned: false,
            }));
            HmStatus::Ok
        }
        Err(e) => engine_status(e),
    }
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or a handle from `hm_engine_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hm_engine_free(engine: *mut HmEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Inserts `count` edges in one batch. Edge `i` has id `ids[i]` and vertices
/// `vertices[offsets[i] .. offsets[i + 1]]`; `offsets` holds `count + 1`
/// non-decreasing entries starting at 0.
///
/// # Safety
/// Pointers must be valid for the lengths described above.
#[no_mangle]
pub unsafe extern "C" fn hm_insert(
    engine: *mut HmEngine,
    ids: *const u64,
    count: usize,
    offsets: *const usize,
    vertices: *const u64,
) -> HmStatus {
    let (Some(ids), Some(offsets)) = (input(ids, count), input(offsets, count + 1)) else {
        return fail(HmStatus::NullPointer, "ids or offsets is null");
    };
    if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
        return fail(HmStatus::InvalidArgument, "offsets must start at 0 and not decrease");
    }
    let Some(vertices) = input(vertices, offsets[count]) else {
        return fail(HmStatus::NullPointer, "vertices is null");
    };
    let mut edges = Vec::with_capacity(count);
    for (i, &id) in ids.iter().enumerate() {
        let vs = vertices[offsets[i]..offsets[i + 1]].iter().copied().map(VertexId);
        match Hyperedge::new(EdgeId(id), vs) {
            Ok(e) => edges.push(e),
            Err(e) => return fail(HmStatus::BatchRejected, e.to_string()),
        }
    }
    with_engine(engine, |g| match g.insert_edges(edges) {
        Ok(_) => HmStatus::Ok,
        Err(e) => engine_status(e),
    })
}

/// Deletes `count` edges in one batch.
///
/// # Safety
/// `ids` must be valid for `count` reads.
#[no_mangle]
pub unsafe extern "C" fn hm_delete(engine: *mut HmEngine, ids: *const u64, count: usize) -> HmStatus {
    let Some(ids) = input(ids, count) else {
        return fail(HmStatus::NullPointer, "ids is null");
    };
    let ids: Vec<EdgeId> = ids.iter().copied().map(EdgeId).collect();
    with_engine(engine, |g| match g.delete_edges(&ids) {
        Ok(_) => HmStatus::Ok,
        Err(e) => engine_status(e),
    })
}

/// Writes the matched edge covering `vertex` to `edge` and sets `matched`;
/// `edge` is left untouched when the vertex is free.
///
/// # Safety
/// `edge` and `matched` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn hm_matched_at(
    engine: *mut HmEngine,
    vertex: u64,
    edge: *mut u64,
    matched: *mut bool,
) -> HmStatus {
    if edge.is_null() || matched.is_null() {
        return fail(HmStatus::NullPointer, "output pointer is null");
    }
    with_engine(engine, |g| {
        match g.is_matched(VertexId(vertex)) {
            Some(e) => {
                *edge = e.0;
                *matched = true;
            }
            None => *matched = false,
        }
        HmStatus::Ok
    })
}

/// Number of matched edges, or 0 for a null or poisoned handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hm_matched_count(engine: *mut HmEngine) -> usize {
    let mut n = 0;
    with_engine(engine, |g| {
        n = g.structure().num_matches();
        HmStatus::Ok
    });
    n
}

/// Copies the matched edge ids, ascending, into `buf`. `written` receives
/// the number of ids; if `cap` is too small it receives the required size
/// and nothing is copied.
///
/// # Safety
/// `buf` must be valid for `cap` writes; `written` for one write.
#[no_mangle]
pub unsafe extern "C" fn hm_matched_edges(
    engine: *mut HmEngine,
    buf: *mut u64,
    cap: usize,
    written: *mut usize,
) -> HmStatus {
    if written.is_null() || (buf.is_null() && cap > 0) {
        return fail(HmStatus::NullPointer, "output pointer is null");
    }
    with_engine(engine, |g| {
        let m = g.matched_edges();
        *written = m.len();
        if m.len() > cap {
            return fail(HmStatus::BufferTooSmall, format!("need room for {} edges", m.len()));
        }
        for (i, e) in m.iter().enumerate() {
            *buf.add(i) = e.0;
        }
        HmStatus::Ok
    })
}

/// Verifies every structure invariant.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hm_check(engine: *mut HmEngine) -> HmStatus {
    with_engine(engine, |g| match g.check_invariants() {
        Ok(()) => HmStatus::Ok,
        Err(v) => fail(HmStatus::InvariantViolation, v.to_string()),
    })
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hm_stats(engine: *mut HmEngine, out: *mut HmStats) -> HmStatus {
    if out.is_null() {
        return fail(HmStatus::NullPointer, "output pointer is null");
    }
    with_engine(engine, |g| {
        let s = g.stats();
        *out = HmStats {
            n: s.n,
            m: s.m,
            m_max: s.m_max,
            m_prime: s.m_prime,
            rank: s.r as u64,
            matched: g.structure().num_matches() as u64,
            batches: g.batches(),
            round_violations: g.round_violations(),
            work: g.work().total(),
        };
        HmStatus::Ok
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
