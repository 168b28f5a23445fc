//! Benchmark harness: workload descriptions, key-stream and corpus input,
//! timing instrumentation, the individual experiments, and CSV output.

mod experiments;
mod keys;
mod record;
mod stats;
mod workload;

pub use experiments::{
    run_dynamic_growth, run_experiment, run_max_load, run_mixed, run_param_sweep,
    run_static_fill, run_wordcount, MixedMode,
};
pub use keys::{key_stream, read_corpus_keys, token_key};
pub use record::{gnuplot_script, write_csv, BenchRecord, CSV_HEADER};
pub use stats::{mean, ols_r2};
pub use workload::{Experiment, WorkloadSpec};
