use std::path::PathBuf;

use crate::storage::StorageBackend;
use crate::table::{DisplacementStrategy, TableKind, TableParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StaticFill,
    DynamicGrowth,
    Wordcount,
    MixedFind,
    MixedErase,
    MaxLoad,
    ParamSweep,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::StaticFill => "static-fill",
            Experiment::DynamicGrowth => "dynamic-growth",
            Experiment::Wordcount => "wordcount",
            Experiment::MixedFind => "mixed-find",
            Experiment::MixedErase => "mixed-erase",
            Experiment::MaxLoad => "max-load",
            Experiment::ParamSweep => "param-sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        let all = [
            Experiment::StaticFill,
            Experiment::DynamicGrowth,
            Experiment::Wordcount,
            Experiment::MixedFind,
            Experiment::MixedErase,
            Experiment::MaxLoad,
            Experiment::ParamSweep,
        ];
        all.into_iter().find(|e| e.name() == s)
    }
}

/// Declarative benchmark input. Desk-scale defaults are one tenth of the
/// original experiment sizes and can be overridden per field.
#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub experiment: Experiment,
    pub table: TableKind,
    pub params: TableParams,
    /// Elements inserted (dynamic experiments) or operations run (mixed).
    pub n_target: usize,
    /// Initial capacity hint for growing tables.
    pub initial_capacity: usize,
    pub delta_mins: Vec<f64>,
    /// Insert fraction for the mixed experiments; in [0,1].
    pub mix_ratio: f64,
    pub repetitions: u32,
    /// Operations per timing window.
    pub sample_window: usize,
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    /// Run repetitions on separate threads, one table per worker.
    pub parallel: bool,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            experiment: Experiment::DynamicGrowth,
            table: TableKind::Dysect,
            params: TableParams::default(),
            n_target: 2_000_000,
            initial_capacity: 5_000,
            delta_mins: vec![0.85, 0.90, 0.95],
            mix_ratio: 0.5,
            repetitions: 5,
            sample_window: 1_000,
            seed: TableParams::default().seed,
            corpus: None,
            parallel: false,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_target == 0 || self.sample_window == 0 || self.repetitions == 0 {
            return Err("counts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(format!("mix ratio {} outside [0,1]", self.mix_ratio));
        }
        if self.delta_mins.is_empty() {
            return Err("need at least one delta_min".into());
        }
        for &d in &self.delta_mins {
            if !(0.0 < d && d < 1.0) {
                return Err(format!("delta_min {d} outside (0,1)"));
            }
        }
        if self.experiment == Experiment::Wordcount && self.corpus.is_none() {
            return Err("wordcount needs a corpus path".into());
        }
        if self.experiment == Experiment::StaticFill && self.table.is_subtable_variant() {
            return Err("static fill omits the subtable variants".into());
        }
        Ok(())
    }

    /// Parse a plain `key = value` config (one pair per line, `#` comments).
    /// Unknown keys are rejected so typos do not silently fall back to
    /// defaults.
    pub fn from_config(text: &str) -> Result<WorkloadSpec, String> {
        let mut spec = WorkloadSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            spec.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| format!("bad value {v:?}: {e}"))
        }
        match key {
            "experiment" => {
                self.experiment =
                    Experiment::parse(value).ok_or_else(|| format!("unknown experiment {value:?}"))?;
            }
            "table" => {
                self.table =
                    TableKind::parse(value).ok_or_else(|| format!("unknown table {value:?}"))?;
            }
            "n" => self.n_target = num(value)?,
            "capacity" => self.initial_capacity = num(value)?,
            "delta_min" => {
                self.delta_mins = value
                    .split(',')
                    .map(|v| num(v.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "ratio" => self.mix_ratio = num(value)?,
            "reps" => self.repetitions = num(value)?,
            "window" => self.sample_window = num(value)?,
            "seed" => {
                self.seed = num(value)?;
                self.params.seed = self.seed;
            }
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "parallel" => self.parallel = num(value)?,
            "bucket_size" => self.params.bucket_size = num(value)?,
            "hash_choices" => self.params.hash_choices = num(value)?,
            "subtables" => self.params.num_subtables = num(value)?,
            "max_probes" => self.params.max_probes = num(value)?,
            "strategy" => {
                self.params.strategy = match value {
                    "bfs" => DisplacementStrategy::Bfs,
                    "rw-optimistic" => DisplacementStrategy::RandomWalkOptimistic,
                    "rw-pessimistic" => DisplacementStrategy::RandomWalkPessimistic,
                    other => return Err(format!("unknown strategy {other:?}")),
                };
            }
            "backend" => {
                self.params.backend = match value {
                    "heap" => StorageBackend::Heap,
                    "reserved" => StorageBackend::Reserved,
                    other => return Err(format!("unknown backend {other:?}")),
                };
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip() {
        let spec = WorkloadSpec::from_config(
            "# dynamic run\nexperiment = dynamic-growth\ntable = dysect\nn = 1000\n\
             delta_min = 0.85, 0.95\nseed = 7\nreps = 2",
        )
        .unwrap();
        assert_eq!(spec.experiment, Experiment::DynamicGrowth);
        assert_eq!(spec.n_target, 1000);
        assert_eq!(spec.delta_mins, vec![0.85, 0.95]);
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.params.seed, 7);
        assert_eq!(spec.repetitions, 2);
    }

    #[test]
    fn config_rejects_unknown_key() {
        assert!(WorkloadSpec::from_config("tabel = dysect").is_err());
    }

    #[test]
    fn config_rejects_bad_ratio() {
        assert!(WorkloadSpec::from_config("ratio = 1.5").is_err());
    }

    #[test]
    fn static_fill_rejects_subtable_variants() {
        let err = WorkloadSpec::from_config("experiment = static-fill\ntable = linear-sub");
        assert!(err.is_err());
    }
}
