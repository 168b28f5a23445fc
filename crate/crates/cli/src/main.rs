//! Benchmark front door: one subcommand per experiment plus a smoke-test
//! exerciser. Results go to a CSV file or stdout.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad flags (clap default).

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dysect::bench::{
    gnuplot_script, run_experiment, write_csv, BenchRecord, Experiment, WorkloadSpec,
};
use dysect::{build_table, Inserted, TableKind};

#[derive(Parser)]
#[command(name = "dysect", about = "Space-efficient dynamic hash table benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill a non-growing table until an insertion fails, measuring
    /// insert/find latency at load checkpoints.
    Static(RunArgs),
    /// Insert into an initially small growing table at each δ_min.
    Dynamic(RunArgs),
    /// Insert-or-count whitespace-delimited tokens from a corpus file.
    Wordcount(RunArgs),
    /// Insert/find mix on a pre-filled 95% table across a ratio grid.
    MixedFind(RunArgs),
    /// Paired insert+erase against finds on a pre-filled 95% table.
    MixedErase(RunArgs),
    /// Grow-on-failure protocol; records the load at every forced growth.
    MaxLoad(RunArgs),
    /// Dynamic-growth protocol across the B/H grid and displacement
    /// strategies.
    ParamSweep(RunArgs),
    /// Quick correctness exerciser against a reference map.
    Smoke(SmokeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Load a key=value workload config first; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Table kind: dysect, linear, robinhood, cuckoo, linear-sub,
    /// robinhood-sub, cuckoo-sub.
    #[arg(long)]
    table: Option<String>,

    /// Elements to insert (or operation budget for the mixed runs).
    #[arg(long)]
    n: Option<usize>,

    /// Initial capacity hint.
    #[arg(long)]
    capacity: Option<usize>,

    /// Comma-separated δ_min list.
    #[arg(long, value_name = "LIST")]
    delta_min: Option<String>,

    #[arg(long)]
    reps: Option<u32>,

    /// Operations per timing window.
    #[arg(long)]
    window: Option<usize>,

    #[arg(long, env = "DYSECT_SEED")]
    seed: Option<u64>,

    /// Corpus file for wordcount.
    #[arg(long)]
    corpus: Option<PathBuf>,

    /// Run repetitions on parallel threads.
    #[arg(long)]
    parallel: bool,

    #[arg(long)]
    bucket_size: Option<usize>,

    #[arg(long)]
    hash_choices: Option<u32>,

    #[arg(long)]
    subtables: Option<usize>,

    #[arg(long)]
    max_probes: Option<u64>,

    /// Displacement strategy: bfs, rw-optimistic, rw-pessimistic.
    #[arg(long)]
    strategy: Option<String>,

    /// Storage backend: heap, reserved.
    #[arg(long)]
    backend: Option<String>,

    /// CSV output path; "-" or absent writes to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct SmokeArgs {
    #[arg(long, default_value = "dysect")]
    table: String,

    #[arg(long, default_value_t = 100_000)]
    ops: usize,

    #[arg(long, env = "DYSECT_SEED", default_value_t = 0xDEAD_BEEF)]
    seed: u64,
}

impl RunArgs {
    fn into_spec(self, experiment: Experiment) -> Result<WorkloadSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                WorkloadSpec::from_config(&text).map_err(anyhow::Error::msg)?
            }
            None => WorkloadSpec::default(),
        };
        spec.experiment = experiment;
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                spec.set(key, &v).map_err(anyhow::Error::msg)?;
            }
            Ok(())
        };
        set("table", self.table)?;
        set("n", self.n.map(|v| v.to_string()))?;
        set("capacity", self.capacity.map(|v| v.to_string()))?;
        set("delta_min", self.delta_min)?;
        set("reps", self.reps.map(|v| v.to_string()))?;
        set("window", self.window.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("corpus", self.corpus.map(|p| p.display().to_string()))?;
        set("bucket_size", self.bucket_size.map(|v| v.to_string()))?;
        set("hash_choices", self.hash_choices.map(|v| v.to_string()))?;
        set("subtables", self.subtables.map(|v| v.to_string()))?;
        set("max_probes", self.max_probes.map(|v| v.to_string()))?;
        set("strategy", self.strategy)?;
        set("backend", self.backend)?;
        if self.parallel {
            spec.parallel = true;
        }
        spec.validate().map_err(anyhow::Error::msg)?;
        Ok(spec)
    }
}

fn emit(records: &[BenchRecord], out: Option<&PathBuf>, gnuplot: bool, exp: &str) -> Result<()> {
    match out {
        Some(path) if path.as_os_str() != "-" => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write_csv(&mut w, records)?;
            w.flush()?;
            if gnuplot {
                let script = path.with_extension("gp");
                std::fs::write(&script, gnuplot_script(&path.display().to_string(), exp))?;
            }
        }
        _ => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_csv(&mut w, records)?;
        }
    }
    Ok(())
}

fn run(args: RunArgs, experiment: Experiment) -> Result<()> {
    let out = args.out.clone();
    let gnuplot = args.gnuplot;
    let spec = args.into_spec(experiment)?;
    let records = run_experiment(&spec).map_err(anyhow::Error::msg)?;
    emit(&records, out.as_ref(), gnuplot, experiment.name())
}

/// Random mixed workload cross-checked against the standard hash map.
fn smoke(args: SmokeArgs) -> Result<()> {
    let kind = TableKind::parse(&args.table)
        .with_context(|| format!("unknown table kind {:?}", args.table))?;
    let params = dysect::TableParams {
        capacity: 1 << 10,
        seed: args.seed,
        ..Default::default()
    };
    let mut table = build_table(kind, &params);
    let mut model: HashMap<u64, u64> = HashMap::new();
    let mut state = args.seed | 1;
    let mut next = move || {
        // xorshift64 is plenty for a smoke workload.
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for i in 0..args.ops {
        let k = next() % 50_000;
        match next() % 4 {
            0 | 1 => {
                let v = next();
                match table.insert(k, v).map_err(|e| anyhow::Error::msg(e.to_string()))? {
                    Inserted::New => {
                        if model.insert(k, v).is_some() {
                            bail!("op {i}: table claimed key {k} was new");
                        }
                    }
                    Inserted::Existing(old) => {
                        if model.get(&k) != Some(&old) {
                            bail!("op {i}: stale value for key {k}");
                        }
                    }
                }
            }
            2 => {
                if table.find(k) != model.get(&k).copied() {
                    bail!("op {i}: find({k}) diverged");
                }
            }
            _ => {
                if table.erase(k) != model.remove(&k).is_some() {
                    bail!("op {i}: erase({k}) diverged");
                }
            }
        }
    }
    if table.len() != model.len() {
        bail!("size diverged: {} vs {}", table.len(), model.len());
    }
    table.audit().map_err(anyhow::Error::msg)?;
    println!(
        "ok: {} ops on {}, {} elements, audit clean",
        args.ops,
        kind.name(),
        table.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Static(a) => run(a, Experiment::StaticFill),
        Command::Dynamic(a) => run(a, Experiment::DynamicGrowth),
        Command::Wordcount(a) => run(a, Experiment::Wordcount),
        Command::MixedFind(a) => run(a, Experiment::MixedFind),
        Command::MixedErase(a) => run(a, Experiment::MixedErase),
        Command::MaxLoad(a) => run(a, Experiment::MaxLoad),
        Command::ParamSweep(a) => run(a, Experiment::ParamSweep),
        Command::Smoke(a) => smoke(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
