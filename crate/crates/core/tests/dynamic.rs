mod common;

use hypermatch::cli::check_maximal_matching;
use hypermatch::dynamic::{Engine, EngineConfig};
use hypermatch::leveled::EdgeKind;
use hypermatch::types::{EdgeId, Hyperedge, UpdateBatch};
use hypermatch::workload::{generate, Pattern, WorkloadParams};

fn replay(stream: &[UpdateBatch], config: EngineConfig, check_every_batch: bool) -> Engine {
    let mut g = Engine::new(config).unwrap();
    for (i, b) in stream.iter().enumerate() {
        g.apply(b.clone()).unwrap_or_else(|e| panic!("batch {i}: {e}"));
        if check_every_batch {
            g.check_invariants().unwrap_or_else(|v| panic!("batch {i}: {v}"));
            check_maximal_matching(&g).unwrap_or_else(|v| panic!("batch {i}: {v}"));
        }
    }
    g
}

#[test]
fn every_pattern_keeps_invariants() {
    for pattern in [Pattern::InsertAllDeleteAll, Pattern::Interleaved, Pattern::Churn] {
        for rank in 2..=4 {
            for seed in 0..3 {
                let p = WorkloadParams::new(150, 600, rank, 25, pattern, seed);
                let g = replay(&generate(&p).unwrap(), EngineConfig::new(rank, seed), true);
                assert_eq!(g.round_violations(), 0);
                assert_eq!(g.stats().m, 0);
                assert!(g.matched_edges().is_empty());
                let summary = g.ledger().unwrap().report();
                assert!(summary.ledger_inequality_holds);
                assert_eq!(summary.epochs_opened, summary.closed_natural + summary.closed_stolen + summary.closed_bloated);
            }
        }
    }
}

#[test]
fn single_edge_batches() {
    let p = WorkloadParams::new(40, 200, 2, 1, Pattern::Churn, 4);
    let g = replay(&generate(&p).unwrap(), EngineConfig::new(2, 1), true);
    assert_eq!(g.round_violations(), 0);
}

#[test]
fn dense_small_graph_forces_settling() {
    // few vertices, many parallel edges: matches become heavy quickly
    let p = WorkloadParams::new(12, 3000, 2, 200, Pattern::InsertAllDeleteAll, 8);
    let g = replay(&generate(&p).unwrap(), EngineConfig::new(2, 8), true);
    let summary = g.ledger().unwrap().report();
    assert!(summary.settle_rounds > 0, "{summary}");
    assert_eq!(summary.round_violations, 0);
}

#[test]
fn mixed_light_and_heavy_deletion() {
    let mut g = Engine::new(EngineConfig::new(2, 3)).unwrap();
    // heavy: match on {0,1} with 20 owned edges; light: match on {100,101} with 2
    g.insert_edges(vec![Hyperedge::from_raw(1, &[0, 1]), Hyperedge::from_raw(2, &[100, 101])])
        .unwrap();
    let mut extra: Vec<Hyperedge> = (0..20).map(|i| Hyperedge::from_raw(10 + i, &[i % 2, 1000 + i])).collect();
    extra.push(Hyperedge::from_raw(50, &[100, 2000]));
    extra.push(Hyperedge::from_raw(51, &[101, 2001]));
    g.insert_edges(extra).unwrap();
    assert!(g.structure().is_heavy(EdgeId(1)).unwrap());
    assert!(!g.structure().is_heavy(EdgeId(2)).unwrap());
    let report = g.delete_edges(&[EdgeId(1), EdgeId(2)]).unwrap();
    assert_eq!(report.settle_iterations, 1);
    assert_eq!(report.rounds[0].added, 20);
    g.check_invariants().unwrap();
    check_maximal_matching(&g).unwrap();
    // the light match's edges went back through plain insertion: level 0
    for e in [50, 51] {
        assert_eq!(g.structure().kind(EdgeId(e)), Some(EdgeKind::Matched));
        assert_eq!(g.structure().level(EdgeId(e)), Some(0));
    }
}

#[test]
fn accounting_switch_does_not_change_behaviour() {
    let p = WorkloadParams::new(80, 1500, 3, 40, Pattern::Churn, 2);
    let stream = generate(&p).unwrap();
    let half = &stream[..stream.len() / 2];
    let on = replay(half, EngineConfig::new(3, 6), false);
    let off = replay(half, EngineConfig { accounting: false, ..EngineConfig::new(3, 6) }, false);
    assert_eq!(on.matched_edges(), off.matched_edges());
    assert_eq!(on.work(), off.work());
    assert!(off.ledger().is_none());
    for e in on.structure().edge_ids() {
        assert_eq!(on.structure().owner(e), off.structure().owner(e));
    }
}

#[test]
fn same_seed_same_structure_any_thread_count() {
    let p = WorkloadParams::new(3000, 12_000, 2, 6000, Pattern::Interleaved, 1);
    let stream = generate(&p).unwrap();
    let half = &stream[..stream.len() / 2];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let g = replay(half, EngineConfig::new(2, 17), false);
            let owners: Vec<_> = g.structure().edge_ids().into_iter().map(|e| (e, g.structure().owner(e))).collect();
            (g.matched_edges(), owners, g.work())
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
}

#[test]
fn different_seeds_differ() {
    let p = WorkloadParams::new(200, 1000, 2, 1000, Pattern::InsertAllDeleteAll, 0);
    let stream = generate(&p).unwrap();
    let a = replay(&stream[..1], EngineConfig::new(2, 1), false);
    let b = replay(&stream[..1], EngineConfig::new(2, 2), false);
    assert_ne!(a.matched_edges(), b.matched_edges());
}

#[test]
fn stats_track_sizes() {
    let mut g = Engine::new(EngineConfig::new(3, 0)).unwrap();
    g.insert_edges(vec![Hyperedge::from_raw(1, &[1, 2, 3]), Hyperedge::from_raw(2, &[3, 4])])
        .unwrap();
    g.delete_edges(&[EdgeId(1)]).unwrap();
    let s = g.stats();
    assert_eq!((s.n, s.m, s.m_max, s.m_prime, s.r), (4, 1, 2, 2, 3));
}
