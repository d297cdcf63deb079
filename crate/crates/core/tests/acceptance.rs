//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypermatch::accounting::StaticPriceLedger;
use hypermatch::cli::check_maximal_matching;
use hypermatch::dynamic::{Engine, EngineConfig, EngineError};
use hypermatch::greedy::{parallel_greedy_match, round_budget, sequential_greedy_match, MatchResult};
use hypermatch::parprims::{draw_priorities, Purpose, SeededRng, StreamKey};
use hypermatch::setcover::DynamicSetCover;
use hypermatch::types::{EdgeId, Hyperedge, UpdateBatch, VertexId};
use hypermatch::workload::{generate, random_edges, Pattern, WorkloadParams};

use common::{check_partition, mean_se, min_cover, reference_greedy};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Round violations and ledger checks gathered from every dynamic run.
#[derive(Default)]
struct StressLog {
    runs: u64,
    rounds: u64,
    violations: u64,
    ledger_runs: u64,
    ledger_failures: Vec<String>,
}

impl StressLog {
    fn absorb(&mut self, label: &str, g: &Engine) {
        let s = g.ledger().expect("accounting on").report();
        self.runs += 1;
        self.rounds += s.settle_rounds;
        self.violations += g.round_violations();
        if g.stats().m == 0 {
            self.ledger_runs += 1;
            if !s.ledger_inequality_holds {
                self.ledger_failures.push(format!(
                    "{label}: natural samples {} > payments {}",
                    s.natural_sample_total, s.total_payment
                ));
            }
        }
    }
}

fn apply(g: &mut Engine, b: UpdateBatch) {
    match g.apply(b) {
        // recorded in the engine's counters and checked by AC4
        Ok(_) | Err(EngineError::RoundInequality { .. }) => {}
        Err(e) => panic!("engine error: {e}"),
    }
}

fn static_pri(edges: &[Hyperedge], seed: u64) -> hypermatch::parprims::PriorityAssignment {
    let ids: Vec<EdgeId> = edges.iter().map(Hyperedge::id).collect();
    draw_priorities(&ids, &SeededRng::new(seed), StreamKey::new(0, 0, Purpose::StaticMatch))
}

fn entries(r: &MatchResult) -> Vec<(EdgeId, Vec<EdgeId>)> {
    r.entries().iter().map(|e| (e.matched, e.sample.clone())).collect()
}

/// Random instance with edges of 1..=r distinct vertices.
fn small_instance(rng: &mut ChaCha8Rng) -> (Vec<Hyperedge>, usize) {
    let r = rng.random_range(2..=5usize);
    let n = rng.random_range(r as u64..=50);
    let m = rng.random_range(0..=200u64);
    let edges = (0..m)
        .map(|id| {
            let k = rng.random_range(1..=r);
            let mut vs: Vec<u64> = (0..n).collect();
            vs.shuffle(rng);
            Hyperedge::new(EdgeId(id), vs[..k].iter().copied().map(VertexId)).unwrap()
        })
        .collect();
    (edges, r)
}

fn ac1_ac2() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    let mut partition_failures = Vec::new();
    let mut runs = 0;
    for i in 0..1000u64 {
        let (edges, _) = small_instance(&mut rng);
        let pri = static_pri(&edges, i);
        let par = parallel_greedy_match(&edges, &pri);
        let seq = sequential_greedy_match(&edges, &pri);
        let reference: Vec<(EdgeId, Vec<EdgeId>)> = reference_greedy(&edges, |e| pri.get(e).unwrap())
            .into_iter()
            .map(|(m, s)| (m, s.into_iter().collect()))
            .collect();
        if entries(&par) != entries(&seq) || entries(&seq) != reference {
            mismatches.push(i);
        }
        for r in [&par, &seq] {
            runs += 1;
            if let Err(e) = check_partition(&edges, &entries(r)) {
                partition_failures.push(format!("instance {i}: {e}"));
            }
        }
    }
    // larger static runs exercise the parallel code paths
    for (i, m) in [(0u64, 20_000u64), (1, 50_000)] {
        let edges = random_edges(m / 2, m, 3, 100 + i);
        let pri = static_pri(&edges, i);
        let par = parallel_greedy_match(&edges, &pri);
        runs += 1;
        if let Err(e) = check_partition(&edges, &entries(&par)) {
            partition_failures.push(format!("m={m}: {e}"));
        }
        if !par.same_matching(&sequential_greedy_match(&edges, &pri)) {
            mismatches.push(1000 + i);
        }
    }
    (
        outcome(
            mismatches.is_empty(),
            format!("1000 instances + 2 large; mismatching: {mismatches:?}"),
        ),
        outcome(
            partition_failures.is_empty(),
            format!("{runs} static results checked; failures: {partition_failures:?}"),
        ),
    )
}

fn ac3(log: &mut StressLog) -> Outcome {
    let mut failures = Vec::new();
    let mut batches = 0;
    for rank in [2usize, 3] {
        for seed in 0..2 {
            let mut p = WorkloadParams::new(400, 1000, rank, 20, Pattern::Churn, seed);
            p.churn_updates = 10_000;
            let stream = generate(&p).unwrap();
            let mut g = Engine::new(EngineConfig::new(rank, seed + 10)).unwrap();
            for (i, b) in stream.into_iter().enumerate() {
                apply(&mut g, b);
                batches += 1;
                if let Err(v) = g.check_invariants() {
                    failures.push(format!("r={rank} seed={seed} batch {i}: {v}"));
                    break;
                }
                if let Err(v) = check_maximal_matching(&g) {
                    failures.push(format!("r={rank} seed={seed} batch {i}: {v}"));
                    break;
                }
            }
            log.absorb(&format!("churn r={rank} seed={seed}"), &g);
        }
    }
    // few vertices and many parallel edges: heavy matches and frequent settling
    let dense = [
        (Pattern::InsertAllDeleteAll, 2usize, 12u64, 200usize),
        (Pattern::InsertAllDeleteAll, 3, 20, 200),
        (Pattern::Churn, 2, 10, 5),
        (Pattern::Churn, 3, 16, 5),
    ];
    for (seed, (pattern, rank, n, batch)) in dense.into_iter().enumerate() {
        let seed = seed as u64;
        let p = WorkloadParams::new(n, 4000, rank, batch, pattern, 40 + seed);
        let mut g = Engine::new(EngineConfig::new(rank, seed)).unwrap();
        for (i, b) in generate(&p).unwrap().into_iter().enumerate() {
            apply(&mut g, b);
            batches += 1;
            if let Err(v) = g.check_invariants().map_err(|v| v.to_string()).and_then(|_| check_maximal_matching(&g)) {
                failures.push(format!("dense {pattern} r={rank} n={n} batch {i}: {v}"));
                break;
            }
        }
        log.absorb(&format!("dense {pattern} r={rank} n={n}"), &g);
    }
    outcome(
        failures.is_empty(),
        format!("{batches} batches checked (r=2,3 churn with 10^4 updates, dense settle runs); failures: {failures:?}"),
    )
}

fn ac5() -> Outcome {
    let m = 2000u64;
    let edges = random_edges(700, m, 2, 55);
    let pri = static_pri(&edges, 55);
    let result = parallel_greedy_match(&edges, &pri);
    let mut totals = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shuffled: Vec<EdgeId> = edges.iter().map(Hyperedge::id).collect();
    shuffled.shuffle(&mut rng);
    let ascending: Vec<EdgeId> = edges.iter().map(Hyperedge::id).collect();
    let descending: Vec<EdgeId> = ascending.iter().rev().copied().collect();
    // every matched edge before any of its sample, then the rest
    let matched: std::collections::BTreeSet<EdgeId> = result.matched().collect();
    let mut matched_first: Vec<EdgeId> = matched.iter().copied().collect();
    matched_first.extend(ascending.iter().filter(|e| !matched.contains(e)));
    for order in [shuffled, ascending, descending, matched_first] {
        let mut ledger = StaticPriceLedger::new(&result);
        for e in order {
            ledger.delete(e);
        }
        totals.push(ledger.early_total());
    }
    outcome(
        totals.iter().all(|&t| t == m),
        format!("m={m}, early payment per deletion order {totals:?}"),
    )
}

fn empty_to_empty_run(seed: u64, log: &mut StressLog) -> f64 {
    let mut p = WorkloadParams::new(1000, 2000, 2, 50, Pattern::Churn, 1000 + seed);
    p.churn_updates = 2000;
    let mut g = Engine::new(EngineConfig::new(2, seed)).unwrap();
    for b in generate(&p).unwrap() {
        apply(&mut g, b);
    }
    log.absorb(&format!("payment seed={seed}"), &g);
    g.ledger().unwrap().report().mean_payment
}

fn ac6(log: &mut StressLog) -> Outcome {
    let means: Vec<f64> = (0..100).map(|s| empty_to_empty_run(s, log)).collect();
    let (mean, se) = mean_se(&means);
    outcome(
        mean <= 2.0 + 3.0 * se,
        format!("100 seeds, m=2000, r=2: mean payment {mean:.4} (SE {se:.4}), bound {:.4}", 2.0 + 3.0 * se),
    )
}

fn ac7(log: &StressLog) -> Outcome {
    outcome(
        log.ledger_failures.is_empty() && log.ledger_runs > 0,
        format!(
            "{} empty-to-empty runs; failures: {:?}",
            log.ledger_runs, log.ledger_failures
        ),
    )
}

fn work_per_update(m: u64, seed: u64, log: &mut StressLog) -> f64 {
    let mut p = WorkloadParams::new(m, m, 2, 100, Pattern::Churn, 500 + seed);
    p.churn_updates = m;
    let mut g = Engine::new(EngineConfig::new(2, seed)).unwrap();
    let mut updates = 0u64;
    for b in generate(&p).unwrap() {
        updates += b.len() as u64;
        apply(&mut g, b);
    }
    log.absorb(&format!("work m={m} seed={seed}"), &g);
    g.work().total() as f64 / updates as f64
}

fn ac8(log: &mut StressLog) -> Outcome {
    let avg = |m: u64, log: &mut StressLog| (0..5).map(|s| work_per_update(m, s, log)).sum::<f64>() / 5.0;
    let small = avg(10_000, log);
    let large = avg(100_000, log);
    outcome(
        large <= 2.0 * small,
        format!(
            "work/update m=1e4: {small:.3}, m=1e5: {large:.3} (ratio {:.3}, limit 2)",
            large / small
        ),
    )
}

fn ac9() -> Outcome {
    let mut worst = Vec::new();
    let mut means = BTreeMap::new();
    let mut pass = true;
    for m in [1_000u64, 10_000, 100_000] {
        let budget = round_budget(m as usize);
        let mut rounds = Vec::new();
        for (i, rank) in [(0u64, 2usize), (1, 2), (2, 3), (3, 3), (4, 4)] {
            let edges = random_edges(m / 2, m, rank, 900 + i);
            let r = parallel_greedy_match(&edges, &static_pri(&edges, i)).rounds;
            pass &= r <= budget;
            rounds.push(r);
        }
        worst.push((m, *rounds.iter().max().unwrap(), budget));
        means.insert(m, rounds.iter().sum::<usize>() as f64 / rounds.len() as f64);
    }
    let growth = means[&100_000] / means[&1_000];
    outcome(
        pass,
        format!(
            "(m, max rounds, budget) {worst:?}; mean rounds {:?}; mean growth x{growth:.2} for 100x edges",
            means.values().map(|v| format!("{v:.1}")).collect::<Vec<_>>()
        ),
    )
}

fn ac10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut worst_ratio: f64 = 0.0;
    for inst in 0..500u64 {
        let num_sets = rng.random_range(2..=12usize);
        let rank = rng.random_range(2..=4usize).min(num_sets);
        let mut sc = DynamicSetCover::new(rank, inst).unwrap();
        let mut live: BTreeMap<u64, u32> = BTreeMap::new();
        let mut next = 0u64;
        for _ in 0..rng.random_range(1..=6) {
            if live.is_empty() || live.len() < 24 && rng.random_bool(0.65) {
                let k = rng.random_range(1..=(24 - live.len()).min(8));
                let batch: Vec<(u64, Vec<String>)> = (0..k)
                    .map(|_| {
                        next += 1;
                        let f = rng.random_range(1..=rank);
                        let mut sets: Vec<usize> = (0..num_sets).collect();
                        sets.shuffle(&mut rng);
                        (next, sets[..f].iter().map(|s| s.to_string()).collect())
                    })
                    .collect();
                for (x, sets) in &batch {
                    live.insert(*x, sets.iter().map(|s| 1u32 << s.parse::<u32>().unwrap()).sum());
                }
                sc.insert_elements(&batch).unwrap();
            } else {
                let mut ids: Vec<u64> = live.keys().copied().collect();
                ids.shuffle(&mut rng);
                ids.truncate(rng.random_range(1..=ids.len()));
                for x in &ids {
                    live.remove(x);
                }
                sc.delete_elements(&ids).unwrap();
            }
            checks += 1;
            let cover: u32 = sc.cover().iter().map(|s| 1u32 << s.parse::<u32>().unwrap()).sum();
            let size = cover.count_ones() as usize;
            let masks: Vec<u32> = live.values().copied().collect();
            let valid = masks.iter().all(|&e| e & cover != 0);
            let opt = min_cover(num_sets, &masks);
            if opt > 0 {
                worst_ratio = worst_ratio.max(size as f64 / opt as f64 / rank as f64);
            }
            if !valid || size > rank * opt {
                failures.push(format!("instance {inst}: valid={valid} size={size} opt={opt} r={rank}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "500 instances, {checks} batch checks; worst size/(r*OPT) {worst_ratio:.3}; failures: {:?}",
            &failures[..failures.len().min(5)]
        ),
    )
}

fn bench_csv(stream: &[UpdateBatch], seed: u64, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut g = Engine::new(EngineConfig::new(2, seed)).unwrap();
        for b in stream {
            apply(&mut g, b.clone());
        }
        let mut out = Vec::new();
        g.ledger().unwrap().write_csv(&mut out).unwrap();
        out
    })
}

fn ac11() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    // large batches so the parallel code paths run
    let streams = [
        WorkloadParams::new(6000, 30_000, 2, 10_000, Pattern::Interleaved, 11),
        WorkloadParams::new(500, 5000, 2, 50, Pattern::Churn, 12),
    ];
    for p in streams {
        let stream = generate(&p).unwrap();
        let a = bench_csv(&stream, 3, 1);
        let b = bench_csv(&stream, 3, 1);
        let c = bench_csv(&stream, 3, 4);
        let same = a == b && a == c;
        pass &= same;
        detail.push(format!("{} ({} bytes): {}", p.pattern, a.len(), if same { "identical" } else { "DIFFER" }));
    }
    outcome(pass, format!("1 vs 1 vs 4 threads: {}", detail.join(", ")))
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, f64) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed().as_secs_f64())
}

fn main() {
    let mut log = StressLog::default();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();

    let t = Instant::now();
    let (ac1, ac2) = ac1_ac2();
    let secs = t.elapsed().as_secs_f64();
    results.push((1, "oracle equivalence", ac1, secs));
    results.push((2, "sample partition", ac2, 0.0));
    let (o, s) = timed(|| ac3(&mut log));
    results.push((3, "invariant suite", o, s));
    let (o, s) = timed(ac5);
    results.push((5, "static payment closure", o, s));
    let (o, s) = timed(|| ac6(&mut log));
    results.push((6, "payment expectation", o, s));
    let (o, s) = timed(|| ac8(&mut log));
    results.push((8, "amortized work flatness", o, s));
    let (o, s) = timed(ac9);
    results.push((9, "greedy round counts", o, s));
    let (o, s) = timed(ac10);
    results.push((10, "set cover approximation", o, s));
    let (o, s) = timed(ac11);
    results.push((11, "determinism", o, s));
    // AC4 and AC7 read the log filled by every dynamic run above
    let ac4 = outcome(
        log.violations == 0 && log.rounds > 0,
        format!(
            "{} violations over {} settle rounds in {} dynamic runs",
            log.violations, log.rounds, log.runs
        ),
    );
    results.push((4, "round inequality", ac4, 0.0));
    results.push((7, "ledger inequality", ac7(&log), 0.0));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o, secs) in &results {
        if !o.pass {
            failed += 1;
        }
        println!(
            "AC{n} {} {name}: {} [{secs:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
