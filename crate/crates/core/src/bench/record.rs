use std::io::{self, Write};

use crate::counters::CounterSnapshot;

pub const CSV_HEADER: &str = "experiment,table,label,delta,n,m,latency_ns,normalized_ns,\
probes,displaced,migrations,peak_cells,repetition,seed";

/// One output row. `delta` is the load factor (or δ_min, depending on the
/// experiment); `normalized_ns` is always `latency_ns · (1 − delta)`.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub experiment: &'static str,
    pub table: &'static str,
    /// Free-form qualifier: op kind, B/H configuration, ratio, ...
    pub label: String,
    pub delta: f64,
    pub n: u64,
    pub m: u64,
    pub latency_ns: f64,
    pub normalized_ns: f64,
    pub probes: u64,
    pub displaced: u64,
    pub migrations: u64,
    pub peak_cells: u64,
    pub repetition: u32,
    pub seed: u64,
}

impl BenchRecord {
    pub fn new(
        experiment: &'static str,
        table: &'static str,
        label: impl Into<String>,
        delta: f64,
        latency_ns: f64,
        repetition: u32,
        seed: u64,
    ) -> BenchRecord {
        BenchRecord {
            experiment,
            table,
            label: label.into(),
            delta,
            n: 0,
            m: 0,
            latency_ns,
            normalized_ns: latency_ns * (1.0 - delta),
            probes: 0,
            displaced: 0,
            migrations: 0,
            peak_cells: 0,
            repetition,
            seed,
        }
    }

    pub fn with_counters(mut self, n: u64, m: u64, c: &CounterSnapshot) -> BenchRecord {
        self.n = n;
        self.m = m;
        self.probes = c.probes;
        self.displaced = c.displaced;
        self.migrations = c.migrations;
        self.peak_cells = c.peak_cells;
        self
    }

    fn write_row(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{:.6},{},{},{:.2},{:.2},{},{},{},{},{},{}",
            self.experiment,
            self.table,
            self.label,
            self.delta,
            self.n,
            self.m,
            self.latency_ns,
            self.normalized_ns,
            self.probes,
            self.displaced,
            self.migrations,
            self.peak_cells,
            self.repetition,
            self.seed,
        )
    }
}

pub fn write_csv(w: &mut dyn Write, records: &[BenchRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        r.write_row(w)?;
    }
    Ok(())
}

/// Emit a small gnuplot script plotting `normalized_ns` (or `delta` for the
/// max-load traces) against n for each table in the CSV.
pub fn gnuplot_script(csv_path: &str, experiment: &str) -> String {
    let ycol = if experiment == "max-load" { "4" } else { "8" };
    let ylabel = if experiment == "max-load" {
        "load at growth"
    } else {
        "normalized latency [ns]"
    };
    format!(
        "set datafile separator ','\n\
         set key autotitle columnheader outside\n\
         set xlabel 'n'\n\
         set ylabel '{ylabel}'\n\
         set title '{experiment}'\n\
         plot for [t in system(\"awk -F, 'NR>1 {{print $2}}' {csv_path} | sort -u\")] \\\n\
         \x20   '{csv_path}' using 5:(strcol(2) eq t ? column({ycol}) : NaN) \\\n\
         \x20   with linespoints title t\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_identity() {
        let r = BenchRecord::new("dynamic-growth", "dysect", "insert", 0.95, 1000.0, 0, 1);
        assert!((r.normalized_ns - 1000.0 * 0.05).abs() < 1e-9);
    }

    #[test]
    fn csv_shape() {
        let r = BenchRecord::new("dynamic-growth", "dysect", "insert", 0.9, 250.0, 2, 42);
        let mut out = Vec::new();
        write_csv(&mut out, &[r]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("dynamic-growth,dysect,insert,0.9"));
    }
}
