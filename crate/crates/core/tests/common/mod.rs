//! Reference implementations shared by the integration tests. They are
//! written from the definitions directly and do not call into the library's
//! algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hypermatch::types::{EdgeId, Hyperedge, VertexId};

/// Plain greedy over edges sorted by `(priority, id)`: a free edge is
/// matched and takes every still-free edge touching it.
pub fn reference_greedy(edges: &[Hyperedge], priority: impl Fn(EdgeId) -> u64) -> BTreeMap<EdgeId, BTreeSet<EdgeId>> {
    let mut order: Vec<&Hyperedge> = edges.iter().collect();
    order.sort_by_key(|e| (priority(e.id()), e.id()));
    let mut taken: BTreeSet<EdgeId> = BTreeSet::new();
    let mut out = BTreeMap::new();
    for (i, e) in order.iter().enumerate() {
        if taken.contains(&e.id()) {
            continue;
        }
        let mut sample = BTreeSet::new();
        for f in &order[i..] {
            if !taken.contains(&f.id()) && shares_vertex(e, f) {
                sample.insert(f.id());
            }
        }
        taken.extend(sample.iter().copied());
        out.insert(e.id(), sample);
    }
    out
}

pub fn shares_vertex(a: &Hyperedge, b: &Hyperedge) -> bool {
    a.vertices().iter().any(|v| b.vertices().contains(v))
}

/// Checks that `samples` partitions `edges`, each sample contains its
/// matched edge and touches it, and the matched edges are disjoint.
pub fn check_partition(edges: &[Hyperedge], samples: &[(EdgeId, Vec<EdgeId>)]) -> Result<(), String> {
    let by_id: BTreeMap<EdgeId, &Hyperedge> = edges.iter().map(|e| (e.id(), e)).collect();
    let mut seen = BTreeSet::new();
    let mut used: BTreeSet<VertexId> = BTreeSet::new();
    for (m, sample) in samples {
        let me = by_id.get(m).ok_or(format!("matched {m} is not an input edge"))?;
        for v in me.vertices() {
            if !used.insert(*v) {
                return Err(format!("matched edges share {v}"));
            }
        }
        if !sample.contains(m) {
            return Err(format!("{m} is not in its own sample"));
        }
        for s in sample {
            let se = by_id.get(s).ok_or(format!("sampled {s} is not an input edge"))?;
            if !shares_vertex(me, se) {
                return Err(format!("{s} in sample of {m} but not incident"));
            }
            if !seen.insert(*s) {
                return Err(format!("{s} appears in two samples"));
            }
        }
    }
    if seen.len() != edges.len() {
        return Err(format!("samples cover {} of {} edges", seen.len(), edges.len()));
    }
    Ok(())
}

/// Smallest number of sets covering all elements, by exhaustive search.
/// `elements[i]` is a bitmask over at most 20 sets.
pub fn min_cover(num_sets: usize, elements: &[u32]) -> usize {
    assert!(num_sets <= 20);
    let mut best = num_sets;
    for mask in 0u32..(1 << num_sets) {
        let size = mask.count_ones() as usize;
        if size < best && elements.iter().all(|&e| e & mask != 0) {
            best = size;
        }
    }
    if elements.is_empty() {
        0
    } else {
        best
    }
}

/// Mean and standard error of `xs`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
