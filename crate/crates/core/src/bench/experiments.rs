use std::collections::HashSet;
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::bench::keys::{absent_keys, key_stream, read_corpus_keys};
use crate::bench::record::BenchRecord;
use crate::bench::workload::{Experiment, WorkloadSpec};
use crate::dysect::DysectTable;
use crate::flat::{FlatScheme, FlatTable};
use crate::table::{
    build_table, DisplacementStrategy, GrowMode, Inserted, Table, TableError, TableParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedMode {
    Find,
    Erase,
}

pub fn run_experiment(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    spec.validate()?;
    match spec.experiment {
        Experiment::StaticFill => run_static_fill(spec),
        Experiment::DynamicGrowth => run_dynamic_growth(spec),
        Experiment::Wordcount => run_wordcount(spec),
        Experiment::MixedFind => run_mixed(spec, MixedMode::Find),
        Experiment::MixedErase => run_mixed(spec, MixedMode::Erase),
        Experiment::MaxLoad => run_max_load(spec),
        Experiment::ParamSweep => run_param_sweep(spec),
    }
}

/// Run one closure per repetition, optionally on parallel threads (one
/// table per worker), and concatenate records in repetition order.
fn run_reps<F>(spec: &WorkloadSpec, f: F) -> Result<Vec<BenchRecord>, String>
where
    F: Fn(u32) -> Result<Vec<BenchRecord>, String> + Sync,
{
    if !spec.parallel || spec.repetitions == 1 {
        let mut out = Vec::new();
        for rep in 0..spec.repetitions {
            out.extend(f(rep)?);
        }
        return Ok(out);
    }
    let f = &f;
    let results: Vec<Result<Vec<BenchRecord>, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..spec.repetitions)
            .map(|rep| s.spawn(move || f(rep)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("worker panicked".into())))
            .collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn params_for(spec: &WorkloadSpec, capacity: usize, delta_min: f64, grow: bool) -> TableParams {
    TableParams {
        capacity,
        delta_min,
        growth_allowed: grow,
        ..spec.params
    }
}

#[inline]
fn per_op_ns(start: Instant, ops: usize) -> f64 {
    start.elapsed().as_nanos() as f64 / ops.max(1) as f64
}

/// Time `find` over a slice of keys; returns mean ns/op and probes used.
fn time_finds(table: &dyn Table, keys: &[u64]) -> (f64, u64) {
    let probes_before = crate::counters::Counters::get(&table.counters().probes);
    let start = Instant::now();
    let mut hits = 0u64;
    for &k in keys {
        hits += table.find(k).is_some() as u64;
    }
    std::hint::black_box(hits);
    let ns = per_op_ns(start, keys.len());
    let probes = crate::counters::Counters::get(&table.counters().probes) - probes_before;
    (ns, probes)
}

fn audit_contents(table: &dyn Table, expected: &[u64]) -> Result<(), String> {
    table.audit()?;
    if table.len() != expected.len() {
        return Err(format!(
            "audit: table holds {} elements, generator produced {}",
            table.len(),
            expected.len()
        ));
    }
    for &k in expected {
        if table.find(k).is_none() {
            return Err(format!("audit: key {k:#x} lost"));
        }
    }
    Ok(())
}

/// §-style static experiment: non-growing table, insert until failure,
/// measuring insert / successful find / unsuccessful find at load
/// checkpoints every 0.05 of δ. Subtable variants are excluded upstream.
pub fn run_static_fill(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    run_reps(spec, |rep| {
        let seed = spec.seed.wrapping_add(rep as u64);
        let params = TableParams {
            seed,
            ..params_for(spec, spec.initial_capacity, spec.delta_mins[0], false)
        };
        let mut table = build_table(spec.table, &params);
        let m = table.cells();
        let keys = key_stream(seed, m + spec.sample_window);
        let present: HashSet<u64> = keys.iter().copied().collect();
        let misses = absent_keys(seed, spec.sample_window, &present);

        let mut records = Vec::new();
        let mut inserted = 0usize;
        let step = (m / 20).max(1);
        let table_name = spec.table.name();
        'fill: loop {
            let chunk_start = inserted;
            let chunk_end = (inserted + step).min(keys.len());
            let start = Instant::now();
            for &k in &keys[chunk_start..chunk_end] {
                match table.insert(k, k) {
                    Ok(_) => inserted += 1,
                    Err(TableError::InsertFailed { load }) => {
                        let mut r = BenchRecord::new(
                            "static-fill",
                            table_name,
                            "fail",
                            load,
                            0.0,
                            rep,
                            seed,
                        );
                        r = r.with_counters(
                            table.len() as u64,
                            table.cells() as u64,
                            &table.counters().snapshot(),
                        );
                        records.push(r);
                        break 'fill;
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            let insert_ns = per_op_ns(start, inserted - chunk_start);
            let delta = table.load_factor();
            let snap = table.counters().snapshot();
            records.push(
                BenchRecord::new("static-fill", table_name, "insert", delta, insert_ns, rep, seed)
                    .with_counters(table.len() as u64, table.cells() as u64, &snap),
            );

            // Successful finds over a random sample of stored keys.
            let mut rng = SmallRng::seed_from_u64(seed ^ inserted as u64);
            let sample: Vec<u64> = (0..spec.sample_window)
                .map(|_| keys[rng.gen_range(0..inserted)])
                .collect();
            let (hit_ns, hit_probes) = time_finds(table.as_ref(), &sample);
            let mut r = BenchRecord::new(
                "static-fill",
                table_name,
                "find-hit",
                delta,
                hit_ns,
                rep,
                seed,
            )
            .with_counters(table.len() as u64, table.cells() as u64, &snap);
            r.probes = hit_probes;
            records.push(r);

            let (miss_ns, miss_probes) = time_finds(table.as_ref(), &misses);
            let mut r = BenchRecord::new(
                "static-fill",
                table_name,
                "find-miss",
                delta,
                miss_ns,
                rep,
                seed,
            )
            .with_counters(table.len() as u64, table.cells() as u64, &snap);
            r.probes = miss_probes;
            records.push(r);

            if inserted >= keys.len() {
                break;
            }
        }
        audit_contents(table.as_ref(), &keys[..inserted])?;
        Ok(records)
    })
}

/// Growth experiment: insert `n_target` elements into an initially small
/// table at each δ_min; report mean insert latency, normalized by
/// (1 − δ_min), and audit the space bound every twentieth of the stream.
pub fn run_dynamic_growth(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    let mut records = Vec::new();
    for &delta_min in &spec.delta_mins {
        records.extend(run_reps(spec, |rep| {
            let seed = spec.seed.wrapping_add(rep as u64);
            let params = TableParams {
                seed,
                ..params_for(spec, spec.initial_capacity, delta_min, true)
            };
            let mut table = build_table(spec.table, &params);
            let keys = key_stream(seed, spec.n_target);
            let table_name = spec.table.name();
            let check_every = (spec.n_target / 20).max(1);

            let start = Instant::now();
            for (i, &k) in keys.iter().enumerate() {
                table.insert(k, k).map_err(|e| e.to_string())?;
                if (i + 1) % check_every == 0 {
                    if let Some(bound) = table.space_bound() {
                        if (table.cells() as f64) > bound {
                            return Err(format!(
                                "space bound violated at n={}: m={} > {bound:.1}",
                                table.len(),
                                table.cells()
                            ));
                        }
                    }
                }
            }
            let insert_ns = per_op_ns(start, keys.len());
            let snap = table.counters().snapshot();
            let mut out = vec![BenchRecord::new(
                "dynamic-growth",
                table_name,
                "insert",
                delta_min,
                insert_ns,
                rep,
                seed,
            )
            .with_counters(table.len() as u64, table.cells() as u64, &snap)];

            // Find latency on the grown table; recorded, never asserted.
            let mut rng = SmallRng::seed_from_u64(seed ^ 0x51AB);
            let sample: Vec<u64> = (0..spec.sample_window)
                .map(|_| keys[rng.gen_range(0..keys.len())])
                .collect();
            let (find_ns, _) = time_finds(table.as_ref(), &sample);
            out.push(
                BenchRecord::new(
                    "dynamic-growth",
                    table_name,
                    "find",
                    table.load_factor(),
                    find_ns,
                    rep,
                    seed,
                )
                .with_counters(table.len() as u64, table.cells() as u64, &snap),
            );

            audit_contents(table.as_ref(), &keys)?;
            Ok(out)
        })?);
    }
    Ok(records)
}

/// Word count: stream pre-hashed tokens, insert-or-increment, report
/// throughput per δ_min. The table stores an index into a side array of
/// counts, so each token costs exactly one table operation.
pub fn run_wordcount(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    let path = spec.corpus.as_ref().ok_or("wordcount needs a corpus")?;
    let tokens = read_corpus_keys(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if tokens.is_empty() {
        return Err("corpus contains no tokens".into());
    }
    let mut records = Vec::new();
    for &delta_min in &spec.delta_mins {
        records.extend(run_reps(spec, |rep| {
            let seed = spec.seed.wrapping_add(rep as u64);
            let params = TableParams {
                seed,
                ..params_for(spec, spec.initial_capacity, delta_min, true)
            };
            let mut table = build_table(spec.table, &params);
            let mut counts: Vec<u64> = Vec::new();
            let start = Instant::now();
            for &k in &tokens {
                match table.insert(k, counts.len() as u64).map_err(|e| e.to_string())? {
                    Inserted::New => counts.push(1),
                    Inserted::Existing(idx) => counts[idx as usize] += 1,
                }
            }
            let ns = per_op_ns(start, tokens.len());
            let total: u64 = counts.iter().sum();
            if total != tokens.len() as u64 {
                return Err(format!(
                    "count conservation broken: Σcounts={total}, tokens={}",
                    tokens.len()
                ));
            }
            if table.len() != counts.len() {
                return Err("unique-token count mismatch".into());
            }
            if rep == 0 {
                // Offline exact recount.
                let mut exact = std::collections::HashMap::new();
                for &k in &tokens {
                    *exact.entry(k).or_insert(0u64) += 1;
                }
                for (&k, &c) in &exact {
                    let idx = table.find(k).ok_or("token key missing")?;
                    if counts[idx as usize] != c {
                        return Err(format!("count for key {k:#x}: {} != {c}", counts[idx as usize]));
                    }
                }
            }
            table.audit()?;
            let snap = table.counters().snapshot();
            Ok(vec![BenchRecord::new(
                "wordcount",
                spec.table.name(),
                format!("tokens={}", tokens.len()),
                delta_min,
                ns,
                rep,
                seed,
            )
            .with_counters(table.len() as u64, table.cells() as u64, &snap)])
        })?);
    }
    Ok(records)
}

/// Mixed workloads on a pre-filled 95% table: insert/find mixes, or
/// insert+erase pairs (keeping n steady) against finds.
pub fn run_mixed(spec: &WorkloadSpec, mode: MixedMode) -> Result<Vec<BenchRecord>, String> {
    let experiment = match mode {
        MixedMode::Find => "mixed-find",
        MixedMode::Erase => "mixed-erase",
    };
    let ratios = [0.0, 0.25, 0.5, 0.75, 1.0];
    let prefill = spec.n_target;
    let ops = spec.n_target / 2;
    let mut records = Vec::new();
    for ratio in ratios {
        records.extend(run_reps(spec, |rep| {
            let seed = spec.seed.wrapping_add(rep as u64);
            let delta_min = 0.95;
            let params = TableParams {
                seed,
                ..params_for(spec, spec.initial_capacity, delta_min, true)
            };
            let mut table = build_table(spec.table, &params);
            let all_keys = key_stream(seed, prefill + ops);
            let (stored_keys, fresh_keys) = all_keys.split_at(prefill);
            let mut stored: Vec<u64> = stored_keys.to_vec();
            for &k in &stored {
                table.insert(k, k).map_err(|e| e.to_string())?;
            }

            let mut rng = SmallRng::seed_from_u64(seed ^ 0x3141);
            let delta = table.load_factor();
            let mut fresh = fresh_keys.iter();
            let mut op_count = 0usize;
            let start = Instant::now();
            for _ in 0..ops {
                if rng.gen::<f64>() < ratio {
                    let &k = fresh.next().ok_or("ran out of fresh keys")?;
                    table.insert(k, k).map_err(|e| e.to_string())?;
                    op_count += 1;
                    match mode {
                        MixedMode::Find => stored.push(k),
                        MixedMode::Erase => {
                            // Paired erase keeps n steady.
                            let idx = rng.gen_range(0..stored.len());
                            let victim = stored.swap_remove(idx);
                            stored.push(k);
                            if !table.erase(victim) {
                                return Err("erase of stored key failed".into());
                            }
                            op_count += 1;
                        }
                    }
                } else {
                    let k = stored[rng.gen_range(0..stored.len())];
                    std::hint::black_box(table.find(k));
                    op_count += 1;
                }
            }
            let ns = per_op_ns(start, op_count);
            audit_contents(table.as_ref(), &stored)?;
            let snap = table.counters().snapshot();
            Ok(vec![BenchRecord::new(
                experiment,
                spec.table.name(),
                format!("ratio={ratio}"),
                delta,
                ns,
                rep,
                seed,
            )
            .with_counters(table.len() as u64, table.cells() as u64, &snap)])
        })?);
    }
    Ok(records)
}

const MAX_LOAD_CONFIGS: [(usize, u32); 4] = [(8, 3), (8, 2), (4, 3), (4, 2)];

/// Maximum-load protocol: DySECT grows only when an insertion exhausts its
/// (enlarged) probe budget; the load at each forced growth is recorded.
/// A non-growing flat cuckoo table filled to failure gives the baseline.
pub fn run_max_load(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    let mut records = Vec::new();
    for (bucket_size, hash_choices) in MAX_LOAD_CONFIGS {
        records.extend(run_reps(spec, |rep| {
            let seed = spec.seed.wrapping_add(rep as u64);
            let params = TableParams {
                seed,
                bucket_size,
                hash_choices,
                max_probes: 16_384,
                grow_mode: GrowMode::OnFailure,
                ..params_for(spec, spec.initial_capacity, spec.delta_mins[0], true)
            };
            let mut table = DysectTable::new(&params);
            let keys = key_stream(seed, spec.n_target);
            for &k in &keys {
                table.insert(k, k).map_err(|e| e.to_string())?;
            }
            let label = format!("B{bucket_size}H{hash_choices}");
            let snap = table.counters().snapshot();
            let mut out: Vec<BenchRecord> = table
                .growth_log()
                .iter()
                .map(|ev| {
                    let mut r = BenchRecord::new(
                        "max-load",
                        "dysect",
                        label.clone(),
                        ev.n as f64 / ev.m_before as f64,
                        0.0,
                        rep,
                        seed,
                    );
                    r.n = ev.n;
                    r.m = ev.m_before;
                    r
                })
                .collect();
            if let Some(last) = out.last_mut() {
                last.peak_cells = snap.peak_cells;
            }
            audit_contents(&table, &keys)?;
            Ok(out)
        })?);
    }

    // Static bucket-cuckoo baseline with the same probe budget.
    records.extend(run_reps(spec, |rep| {
        let seed = spec.seed.wrapping_add(rep as u64);
        let params = TableParams {
            seed,
            max_probes: 16_384,
            ..params_for(spec, spec.n_target, spec.delta_mins[0], false)
        };
        let mut table = FlatTable::new(FlatScheme::Cuckoo, &params);
        for &k in &key_stream(seed, 2 * spec.n_target) {
            match table.insert(k, k) {
                Ok(_) => {}
                Err(TableError::InsertFailed { load }) => {
                    return Ok(vec![BenchRecord::new(
                        "max-load",
                        "cuckoo",
                        "static-baseline",
                        load,
                        0.0,
                        rep,
                        seed,
                    )]);
                }
                Err(e) => return Err(e.to_string()),
            }
        }
        Err("static baseline never failed".into())
    })?);
    Ok(records)
}

/// B/H grid × displacement strategies under the dynamic-growth protocol
/// with the standard 1024-probe budget; failures end a configuration's
/// measurements and are recorded as such.
pub fn run_param_sweep(spec: &WorkloadSpec) -> Result<Vec<BenchRecord>, String> {
    let strategies = [
        (DisplacementStrategy::Bfs, "bfs"),
        (DisplacementStrategy::RandomWalkOptimistic, "rw-optimistic"),
        (DisplacementStrategy::RandomWalkPessimistic, "rw-pessimistic"),
    ];
    let mut records = Vec::new();
    for (bucket_size, hash_choices) in MAX_LOAD_CONFIGS {
        for (strategy, strat_name) in strategies {
            for &delta_min in &spec.delta_mins {
                records.extend(run_reps(spec, |rep| {
                    let seed = spec.seed.wrapping_add(rep as u64);
                    let params = TableParams {
                        seed,
                        bucket_size,
                        hash_choices,
                        strategy,
                        ..params_for(spec, spec.initial_capacity, delta_min, true)
                    };
                    let mut table = build_table(spec.table, &params);
                    let keys = key_stream(seed, spec.n_target);
                    let label = format!("B{bucket_size}H{hash_choices}-{strat_name}");
                    let check_every = (spec.n_target / 10).max(1);
                    let mut inserted = 0usize;
                    let mut fail_load = None;
                    let start = Instant::now();
                    for &k in &keys {
                        match table.insert(k, k) {
                            Ok(_) => inserted += 1,
                            Err(TableError::InsertFailed { load }) => {
                                fail_load = Some(load);
                                break;
                            }
                            Err(e) => return Err(e.to_string()),
                        }
                        if inserted % check_every == 0 {
                            table.audit()?;
                        }
                    }
                    let insert_ns = per_op_ns(start, inserted);
                    table.audit()?;
                    let snap = table.counters().snapshot();
                    let mut out = Vec::new();
                    match fail_load {
                        Some(load) => out.push(
                            BenchRecord::new(
                                "param-sweep",
                                spec.table.name(),
                                format!("{label}-fail"),
                                load,
                                insert_ns,
                                rep,
                                seed,
                            )
                            .with_counters(table.len() as u64, table.cells() as u64, &snap),
                        ),
                        None => {
                            out.push(
                                BenchRecord::new(
                                    "param-sweep",
                                    spec.table.name(),
                                    label.clone(),
                                    delta_min,
                                    insert_ns,
                                    rep,
                                    seed,
                                )
                                .with_counters(table.len() as u64, table.cells() as u64, &snap),
                            );
                            let mut rng = SmallRng::seed_from_u64(seed ^ 0x9d2c);
                            let sample: Vec<u64> = (0..spec.sample_window)
                                .map(|_| keys[rng.gen_range(0..inserted)])
                                .collect();
                            let (find_ns, _) = time_finds(table.as_ref(), &sample);
                            out.push(
                                BenchRecord::new(
                                    "param-sweep",
                                    spec.table.name(),
                                    format!("{label}-find"),
                                    table.load_factor(),
                                    find_ns,
                                    rep,
                                    seed,
                                )
                                .with_counters(table.len() as u64, table.cells() as u64, &snap),
                            );
                        }
                    }
                    Ok(out)
                })?);
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::TableKind;
    use std::io::Write;

    fn small_spec(experiment: Experiment, table: TableKind) -> WorkloadSpec {
        WorkloadSpec {
            experiment,
            table,
            n_target: 20_000,
            initial_capacity: 1_000,
            delta_mins: vec![0.9],
            repetitions: 1,
            sample_window: 200,
            seed: 99,
            ..WorkloadSpec::default()
        }
    }

    #[test]
    fn dynamic_growth_produces_records() {
        for kind in [TableKind::Dysect, TableKind::Linear, TableKind::LinearSub] {
            let spec = small_spec(Experiment::DynamicGrowth, kind);
            let records = run_dynamic_growth(&spec).unwrap();
            assert_eq!(records.len(), 2);
            assert_eq!(records[0].label, "insert");
            assert_eq!(records[0].n, 20_000);
            assert!(records[0].latency_ns > 0.0);
            let expect = records[0].latency_ns * (1.0 - 0.9);
            assert!((records[0].normalized_ns - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn static_fill_runs_to_failure_or_full() {
        let mut spec = small_spec(Experiment::StaticFill, TableKind::Cuckoo);
        spec.initial_capacity = 1 << 12;
        let records = run_static_fill(&spec).unwrap();
        assert!(records.iter().any(|r| r.label == "insert"));
        assert!(records.iter().any(|r| r.label == "find-hit"));
        assert!(records.iter().any(|r| r.label == "find-miss"));
        assert!(records.iter().any(|r| r.label == "fail"));
    }

    #[test]
    fn wordcount_small_corpus() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "a b a").unwrap();
        let mut spec = small_spec(Experiment::Wordcount, TableKind::Dysect);
        spec.corpus = Some(f.path().to_path_buf());
        let records = run_wordcount(&spec).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].n, 2);
        assert_eq!(records[0].label, "tokens=3");
    }

    #[test]
    fn mixed_erase_keeps_n_steady() {
        let mut spec = small_spec(Experiment::MixedErase, TableKind::Dysect);
        spec.n_target = 10_000;
        let records = run_mixed(&spec, MixedMode::Erase).unwrap();
        for r in &records {
            assert_eq!(r.n, 10_000, "ratio {} changed n", r.label);
        }
    }

    #[test]
    fn max_load_records_growth_trace() {
        let mut spec = small_spec(Experiment::MaxLoad, TableKind::Dysect);
        spec.n_target = 50_000;
        spec.params.num_subtables = 16;
        let records = run_max_load(&spec).unwrap();
        assert!(records.iter().any(|r| r.label == "B8H3"));
        assert!(records.iter().any(|r| r.label == "static-baseline"));
        for r in records.iter().filter(|r| r.table == "dysect") {
            assert!(r.delta > 0.5 && r.delta <= 1.0, "odd load {}", r.delta);
        }
    }

    #[test]
    fn parallel_reps_match_sequential() {
        let mut spec = small_spec(Experiment::DynamicGrowth, TableKind::Dysect);
        spec.repetitions = 2;
        let seq = run_dynamic_growth(&spec).unwrap();
        spec.parallel = true;
        let par = run_dynamic_growth(&spec).unwrap();
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.n, b.n);
            assert_eq!(a.m, b.m);
            assert_eq!(a.label, b.label);
        }
    }
}
