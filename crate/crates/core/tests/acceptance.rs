//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Run with `--nocapture` to see the lines as they complete.
//!
//! Every test takes a global lock so the timing-sensitive criteria are not
//! perturbed by sibling tests on other cores.

use std::collections::HashMap;
use std::hint::black_box;
use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use dysect::bench::{key_stream, run_experiment, Experiment, WorkloadSpec};
use dysect::test_hooks::{mine_keys_for_bucket, stuff_bucket_full};
use dysect::{
    build_table, Counters, DysectTable, FlatScheme, FlatTable, Inserted, Table, TableKind,
    TableParams,
};

static LOCK: Mutex<()> = Mutex::new(());

fn criterion(id: u32, name: &str, body: impl FnOnce()) {
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "pass" } else { "FAIL" };
    println!("criterion {id:2} ({name}): {verdict}");
    if let Err(e) = result {
        resume_unwind(e);
    }
}

fn xorshift(state: &mut u64) -> u64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    *state
}

fn params(delta_min: f64, capacity: usize) -> TableParams {
    TableParams {
        capacity,
        delta_min,
        ..TableParams::default()
    }
}

/// Seeded mixed workload checked op-by-op against the standard hash map.
/// Returns the number of table operations issued.
fn oracle_run(table: &mut dyn Table, ops: usize, key_space: u64, seed: u64) -> usize {
    let mut model: HashMap<u64, u64> = HashMap::new();
    let mut state = seed | 1;
    for i in 0..ops {
        let k = xorshift(&mut state) % key_space;
        match xorshift(&mut state) % 10 {
            0..=4 => {
                let v = xorshift(&mut state);
                match table.insert(k, v).expect("insert failed") {
                    Inserted::New => assert!(model.insert(k, v).is_none(), "op {i}: not new"),
                    Inserted::Existing(old) => {
                        assert_eq!(model.get(&k), Some(&old), "op {i}: stale value")
                    }
                }
            }
            5..=7 => assert_eq!(table.find(k), model.get(&k).copied(), "op {i}: find"),
            _ => assert_eq!(table.erase(k), model.remove(&k).is_some(), "op {i}: erase"),
        }
    }
    assert_eq!(table.len(), model.len());
    for (&k, &v) in &model {
        assert_eq!(table.find(k), Some(v));
    }
    table.audit().expect("audit");
    ops + model.len()
}

#[test]
fn c01_oracle_equivalence() {
    criterion(1, "oracle equivalence, 7 variants x 1e5 ops", || {
        for kind in TableKind::ALL {
            let start = Instant::now();
            let mut table = build_table(kind, &params(0.9, 4096));
            oracle_run(table.as_mut(), 100_000, 60_000, 0x5EED ^ kind.name().len() as u64);
            let elapsed = start.elapsed().as_secs_f64();
            assert!(elapsed < 10.0, "{}: {elapsed:.1}s exceeds 10s", kind.name());
        }
    });
}

#[test]
fn c02_dynamic_space_bound() {
    criterion(2, "space bound over 1e6 inserts", || {
        let n = 1_000_000;
        for delta_min in [0.85, 0.90, 0.95] {
            let keys = key_stream(42, n);

            let mut t = DysectTable::new(&params(delta_min, 5_000));
            let s_max = |t: &DysectTable| 2.0 * t.max_subtable_cells() as f64;
            for (i, &k) in keys.iter().enumerate() {
                t.insert(k, k).unwrap();
                if let Some(bound) = t.space_bound() {
                    assert!(
                        t.cells() as f64 <= bound + 1e-6,
                        "dysect δ={delta_min}: m={} > {}/δ + 2s_max={:.0} at i={i}",
                        t.cells(),
                        t.len(),
                        bound
                    );
                    assert!((bound - (t.len() as f64 / delta_min + s_max(&t))).abs() < 1.0);
                }
            }

            for (scheme, slack) in [
                (FlatScheme::Linear, 1.0),
                (FlatScheme::RobinHood, 1.0),
                (FlatScheme::Cuckoo, 8.0),
            ] {
                let mut t = FlatTable::new(scheme, &params(delta_min, 5_000));
                for &k in &keys {
                    t.insert(k, k).unwrap();
                }
                assert!(!t.growth_log().is_empty());
                for ev in t.growth_log() {
                    assert!(
                        ev.m_after as f64 <= ev.n as f64 / delta_min + slack,
                        "{scheme:?} δ={delta_min}: m_after={} n={}",
                        ev.m_after,
                        ev.n
                    );
                }
            }
        }
    });
}

#[test]
fn c03_migration_locality() {
    criterion(3, "subtable grow touches exactly its elements", || {
        let mut t = DysectTable::new(&TableParams {
            capacity: 1 << 14,
            num_subtables: 16,
            delta_min: 0.9,
            ..TableParams::default()
        });
        let keys = key_stream(7, 50_000);
        for &k in &keys {
            t.insert(k, k).unwrap();
        }
        let n = t.len() as u64;
        let per_subtable = n / 16;
        for _ in 0..3 {
            let idx = t.hook_grow_cursor();
            let buckets = 1usize << t.hook_subtable_exponent(idx);
            let stored: u64 = (0..buckets)
                .map(|b| t.hook_bucket_keys((idx as u32, b as u32)).len() as u64)
                .sum();
            let before = t.counters().snapshot();
            t.grow_subtable(idx);
            let after = t.counters().snapshot();
            assert_eq!(after.migrated_elements - before.migrated_elements, stored);
            assert_eq!(after.searches, before.searches, "displacement search during grow");
            assert_eq!(after.displaced, before.displaced);
            assert!(stored > per_subtable / 2 && stored < per_subtable * 2);
        }
        for &k in &keys {
            assert_eq!(t.find(k), Some(k));
        }
        t.audit().unwrap();
    });
}

#[test]
fn c04_constant_time_find() {
    criterion(4, "find probes ≤ H·B, flat latency across loads", || {
        // Probe bound across a full growing run with interleaved finds.
        let mut t = DysectTable::new(&params(0.9, 5_000));
        let keys = key_stream(11, 1_000_000);
        for (i, &k) in keys.iter().enumerate() {
            t.insert(k, k).unwrap();
            if i % 4 == 0 {
                black_box(t.find(keys[i / 2]));
                black_box(t.find(k ^ 0x55AA_55AA));
            }
        }
        let max_probes = Counters::get(&t.counters().max_find_probes);
        assert!(max_probes <= 24, "find probed {max_probes} cells (> H·B = 24)");

        // Latency flatness at δ = 0.7 vs 0.95: two static tables, measured
        // in alternating rounds (min of each) so machine drift hits both.
        let static_params = TableParams {
            capacity: 1 << 20,
            growth_allowed: false,
            max_probes: 16_384,
            ..TableParams::default()
        };
        let mut t70 = DysectTable::new(&static_params);
        let mut t95 = DysectTable::new(&static_params);
        let m = t70.cells();
        let keys = key_stream(13, (m as f64 * 0.95) as usize);
        let split = (m as f64 * 0.70) as usize;
        for &k in &keys[..split] {
            t70.insert(k, k).unwrap();
        }
        for &k in &keys {
            t95.insert(k, k).unwrap();
        }
        let time_finds = |t: &DysectTable, present: &[u64], round: usize| -> f64 {
            let start = Instant::now();
            for &k in present.iter().skip(round).step_by(5).take(100_000) {
                black_box(t.find(black_box(k)));
            }
            start.elapsed().as_nanos() as f64 / 100_000.0
        };
        let (mut lat70, mut lat95) = (f64::INFINITY, f64::INFINITY);
        for round in 0..5 {
            lat70 = lat70.min(time_finds(&t70, &keys[..split], round));
            lat95 = lat95.min(time_finds(&t95, &keys, round));
        }
        let spread = (lat95 - lat70).abs() / lat70.min(lat95);
        assert!(
            spread < 0.30,
            "find latency varies {:.0}%: {lat70:.1} ns @0.70 vs {lat95:.1} ns @0.95",
            spread * 100.0
        );
    });
}

/// Insert all keys into a fresh table, timing each chunk separately.
/// Returns elapsed nanoseconds per chunk.
fn insert_pass(kind: TableKind, delta_min: f64, keys: &[u64], chunks: usize) -> Vec<f64> {
    let mut t = build_table(kind, &params(delta_min, 5_000));
    let mut out = Vec::with_capacity(chunks);
    for chunk in keys.chunks(keys.len().div_ceil(chunks)) {
        let start = Instant::now();
        for &k in chunk {
            t.insert(k, k).unwrap();
        }
        out.push(start.elapsed().as_nanos() as f64);
    }
    assert_eq!(t.len(), keys.len());
    out
}

/// Keep the elementwise minimum of per-chunk timings.
fn min_merge(best: &mut Vec<f64>, pass: Vec<f64>) {
    if best.is_empty() {
        *best = pass;
    } else {
        for (b, p) in best.iter_mut().zip(pass) {
            *b = b.min(p);
        }
    }
}

/// Mean insert ns/op per configuration. Passes are repeated over several
/// rounds with the configurations interleaved, and each chunk of the run
/// keeps its fastest observation, so bursts of machine load from outside
/// the process (this runs on a shared box) are stripped without distorting
/// the workload shape.
fn insert_latencies(configs: &[(TableKind, f64)], keys: &[u64], rounds: usize) -> Vec<f64> {
    let mut best: Vec<Vec<f64>> = vec![Vec::new(); configs.len()];
    for _ in 0..rounds {
        for (i, &(kind, delta_min)) in configs.iter().enumerate() {
            min_merge(&mut best[i], insert_pass(kind, delta_min, keys, 16));
        }
    }
    best.iter()
        .map(|b| b.iter().sum::<f64>() / keys.len() as f64)
        .collect()
}

#[test]
fn c05_normalized_insert_flatness() {
    criterion(5, "normalized insert latency flat in δ_min", || {
        let keys = key_stream(17, 1_000_000);
        let kinds = [
            TableKind::Dysect,
            TableKind::LinearSub,
            TableKind::RobinHoodSub,
            TableKind::CuckooSub,
        ];
        let configs: Vec<(TableKind, f64)> = kinds
            .iter()
            .flat_map(|&k| [(k, 0.85), (k, 0.95)])
            .collect();
        let lats = insert_latencies(&configs, &keys, 3);
        let ratio = |i: usize| (lats[2 * i + 1] * 0.05) / (lats[2 * i] * 0.15);
        let dysect = ratio(0);
        assert!(dysect <= 3.0, "dysect normalized ratio {dysect:.2} > 3");
        for (i, kind) in kinds.iter().enumerate().skip(1) {
            let r = ratio(i);
            assert!(
                r > dysect,
                "{}: full-migration ratio {r:.2} does not exceed dysect's {dysect:.2}",
                kind.name()
            );
        }
    });
}

#[test]
fn c06_speedup_floor() {
    criterion(6, "dysect ≥ 1.2x fastest competitor at δ_min=0.95", || {
        let keys = key_stream(23, 2_000_000);
        let configs: Vec<(TableKind, f64)> =
            TableKind::ALL.iter().map(|&k| (k, 0.95)).collect();
        let lats = insert_latencies(&configs, &keys, 2);
        let dysect = lats[0];
        let (best, best_kind) = lats
            .iter()
            .zip(TableKind::ALL)
            .skip(1)
            .map(|(&l, k)| (l, k))
            .fold((f64::INFINITY, TableKind::Dysect), |a, b| if b.0 < a.0 { b } else { a });
        assert!(
            dysect * 1.2 <= best,
            "dysect {dysect:.0} ns/op vs best competitor {} at {best:.0} ns/op",
            best_kind.name()
        );
    });
}

#[test]
fn c07_max_load_cycles() {
    criterion(7, "max-load cyclic in m, H=2 spread > H=3", || {
        let mut spec = WorkloadSpec::default();
        spec.experiment = Experiment::MaxLoad;
        spec.n_target = 200_000;
        spec.initial_capacity = 4_096;
        spec.repetitions = 1;
        let records = run_experiment(&spec).unwrap();

        // (m, load-at-growth) series per config, warmup quarter dropped
        // since early growths happen at tiny m.
        let series = |label: &str| -> Vec<(u64, f64)> {
            let v: Vec<(u64, f64)> = records
                .iter()
                .filter(|r| r.label == label)
                .map(|r| (r.m, r.delta))
                .collect();
            v[v.len() / 4..].to_vec()
        };
        let spread = |v: &[(u64, f64)]| {
            v.iter().map(|&(_, d)| d).fold(f64::MIN, f64::max)
                - v.iter().map(|&(_, d)| d).fold(f64::MAX, f64::min)
        };
        // Cyclic in m: loads peak where m sits at a power-of-two boundary
        // (all subtables equally sized) and sag mid-way through a doubling
        // round, where subtable sizes are most uneven.
        let phase_gap = |v: &[(u64, f64)]| {
            let (mut at_boundary, mut nb) = (0.0, 0u32);
            let (mut mid_round, mut nm) = (0.0, 0u32);
            for &(m, d) in v {
                let phase = (m as f64).log2().fract();
                if phase < 0.15 || phase > 0.85 {
                    at_boundary += d;
                    nb += 1;
                } else if (0.35..0.65).contains(&phase) {
                    mid_round += d;
                    nm += 1;
                }
            }
            assert!(nb > 10 && nm > 10, "not enough growth events per phase");
            at_boundary / nb as f64 - mid_round / nm as f64
        };

        let b8h3 = series("B8H3");
        assert!(b8h3.len() >= 8, "too few growth events: {}", b8h3.len());
        let peak = b8h3.iter().map(|&(_, d)| d).fold(f64::MIN, f64::max);
        assert!(peak >= 0.94, "B8H3 peak load {peak:.3} < 0.94");
        let gap = phase_gap(&b8h3);
        assert!(gap > 0.0, "B8H3 loads not cyclic in m (phase gap {gap:.5})");

        for b in [8, 4] {
            let s2 = spread(&series(&format!("B{b}H2")));
            let s3 = spread(&series(&format!("B{b}H3")));
            assert!(s2 > s3, "B={b}: H=2 spread {s2:.4} ≤ H=3 spread {s3:.4}");
        }
    });
}

#[test]
fn c08_robinhood_sortedness_and_migration() {
    criterion(8, "robin hood sorted at every boundary, zero buffer", || {
        let mut t = FlatTable::new(FlatScheme::RobinHood, &params(0.9, 512));
        let mut model: HashMap<u64, u64> = HashMap::new();
        let mut state = 31u64;
        for i in 0..100_000usize {
            let k = xorshift(&mut state) % 30_000;
            match xorshift(&mut state) % 10 {
                0..=4 => {
                    t.insert(k, k).unwrap();
                    model.insert(k, k);
                }
                5..=6 => {
                    assert_eq!(t.erase(k), model.remove(&k).is_some());
                }
                _ => assert_eq!(t.find(k), model.get(&k).copied()),
            }
            t.audit().unwrap_or_else(|e| panic!("op {i}: {e}"));
        }
        assert!(!t.growth_log().is_empty(), "table never migrated");
        assert_eq!(
            Counters::get(&t.counters().reinserted),
            0,
            "in-place migration used a reinsertion buffer"
        );
    });
}

#[test]
fn c09_shrink_bound() {
    criterion(9, "worst-case shrink reinserts exactly B per full pair", || {
        let mut t = DysectTable::new(&TableParams {
            capacity: 1 << 12,
            num_subtables: 4,
            growth_allowed: false,
            shrink_enabled: true,
            ..TableParams::default()
        });
        let b = t.bucket_size();
        let exp = t.hook_subtable_exponent(0);
        assert!(exp >= 2);
        let half = 1u32 << (exp - 1);

        let mut cursor = 1u64;
        let mut model: HashMap<u64, u64> = HashMap::new();
        let pairs = 8u32;
        for j in 0..pairs {
            for bucket in [j, j + half] {
                for k in stuff_bucket_full(&mut t, (0, bucket), &mut cursor) {
                    model.insert(k, k);
                }
            }
        }
        // Sparse filler elsewhere in the subtable so overflow stays below
        // half of everything migrated.
        for bucket in pairs..half {
            for k in mine_keys_for_bucket(&t, (0, bucket), 1, &mut cursor) {
                t.hook_stuff((0, bucket), k, k);
                model.insert(k, k);
            }
        }

        let before = t.counters().snapshot();
        t.shrink_subtable(0).expect("shrink failed");
        let after = t.counters().snapshot();

        let reinserted = after.reinserted - before.reinserted;
        let migrated = after.migrated_elements - before.migrated_elements;
        assert_eq!(
            reinserted,
            (pairs as u64) * b as u64,
            "expected exactly B per merged full pair"
        );
        assert!(
            reinserted * 2 <= migrated,
            "reinserted {reinserted} of {migrated} migrated"
        );

        assert_eq!(t.len(), model.len());
        for (&k, &v) in &model {
            assert_eq!(t.find(k), Some(v), "key {k} lost in shrink");
        }
        t.audit().unwrap();
    });
}

#[test]
fn c10_hash_discipline() {
    criterion(10, "≤ 1 hash eval per key per operation", || {
        for kind in TableKind::ALL {
            let mut table = build_table(kind, &params(0.9, 1024));
            let mut state = 0xD15C_1950u64;
            let ops = 30_000usize;
            for _ in 0..ops {
                let k = xorshift(&mut state) % 20_000;
                match xorshift(&mut state) % 3 {
                    0 => {
                        table.insert(k, k).unwrap();
                    }
                    1 => {
                        black_box(table.find(k));
                    }
                    _ => {
                        table.erase(k);
                    }
                }
            }
            let snap = table.counters().snapshot();
            assert_eq!(
                snap.hash_evals - snap.rehashes,
                ops as u64,
                "{}: {} evals, {} rehashes over {ops} ops",
                kind.name(),
                snap.hash_evals,
                snap.rehashes
            );
        }
    });
}

#[test]
fn c11_wordcount_conservation() {
    criterion(11, "wordcount conserves counts, flat throughput", || {
        // ~100 MB corpus with a Zipf-like word distribution (each word
        // repeated ~15 times on average, matching natural text).
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        {
            let f = std::fs::File::create(&path).unwrap();
            let mut w = std::io::BufWriter::with_capacity(1 << 20, f);
            let mut state = 99u64;
            let mut bytes = 0usize;
            while bytes < 100 << 20 {
                let u = (xorshift(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
                let rank = ((1.0 / u.max(1e-12)).powi(4) as u64).min(20_000_000);
                let tok = format!("w{rank} ");
                w.write_all(tok.as_bytes()).unwrap();
                bytes += tok.len();
            }
        }
        let tokens = dysect::bench::read_corpus_keys(&path).unwrap();

        // Interleave the δ_min passes over several rounds and keep the
        // fastest; shared-machine load bursts would otherwise swamp the
        // comparison.
        let deltas = [0.85, 0.91, 0.97];
        let mut best: Vec<Vec<f64>> = vec![Vec::new(); deltas.len()];
        for round in 0..5 {
            for (i, &delta_min) in deltas.iter().enumerate() {
                let mut table = build_table(TableKind::Dysect, &params(delta_min, 5_000));
                let mut counts: Vec<u64> = Vec::new();
                let mut pass = Vec::new();
                for chunk in tokens.chunks(tokens.len().div_ceil(16)) {
                    let start = Instant::now();
                    for &k in chunk {
                        match table.insert(k, counts.len() as u64).unwrap() {
                            Inserted::New => counts.push(1),
                            Inserted::Existing(idx) => counts[idx as usize] += 1,
                        }
                    }
                    pass.push(start.elapsed().as_nanos() as f64);
                }
                min_merge(&mut best[i], pass);
                let total: u64 = counts.iter().sum();
                assert_eq!(total, tokens.len() as u64, "count conservation broken");
                assert_eq!(table.len(), counts.len());
                if round == 0 && i == 0 {
                    let mut exact: HashMap<u64, u64> = HashMap::new();
                    for &k in &tokens {
                        *exact.entry(k).or_insert(0) += 1;
                    }
                    for (&k, &c) in &exact {
                        let idx = table.find(k).unwrap();
                        assert_eq!(counts[idx as usize], c);
                    }
                    table.audit().unwrap();
                }
            }
        }
        let lats: Vec<f64> = best
            .iter()
            .map(|b| b.iter().sum::<f64>() / tokens.len() as f64)
            .collect();
        let max = lats.iter().cloned().fold(f64::MIN, f64::max);
        let min = lats.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / min < 0.25,
            "throughput spread {:.0}% over δ_min ∈ [0.85, 0.97] ({lats:?})",
            (max - min) / min * 100.0
        );
    });
}
