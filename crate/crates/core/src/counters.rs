use std::sync::atomic::{AtomicU64, Ordering};

/// Exact operation counters, maintained by every table.
///
/// Relaxed atomics so read-only operations (`find`) can count through a
/// shared reference. A table instance is still single-writer.
#[derive(Debug, Default)]
pub struct Counters {
    /// Total 64-bit hash evaluations.
    pub hash_evals: AtomicU64,
    /// Hash evaluations spent re-hashing already-stored elements (during
    /// displacement searches, probe-order maintenance, and migrations).
    /// `hash_evals - rehashes` therefore equals one per operation operand.
    pub rehashes: AtomicU64,
    /// Cells (flat schemes) or buckets (cuckoo schemes) examined.
    pub probes: AtomicU64,
    /// Elements moved by committed displacement paths / shifts.
    pub displaced: AtomicU64,
    /// Displacement searches started.
    pub searches: AtomicU64,
    /// Growth migrations performed.
    pub migrations: AtomicU64,
    /// Elements touched (moved or re-bucketed) by migrations.
    pub migrated_elements: AtomicU64,
    /// Elements that went through a migration reinsertion buffer.
    pub reinserted: AtomicU64,
    /// Displacement searches performed inside migrations.
    pub migration_searches: AtomicU64,
    /// Largest total cell count ever held (for full-migration variants this
    /// includes the transient second copy).
    pub peak_cells: AtomicU64,
    /// Largest number of cells probed by a single find.
    pub max_find_probes: AtomicU64,
}

impl Counters {
    #[inline]
    pub fn bump(field: &AtomicU64) {
        field.fetch_add(1, Ordering::Relaxed);
    }

    #[inline]
    pub fn add(field: &AtomicU64, n: u64) {
        field.fetch_add(n, Ordering::Relaxed);
    }

    #[inline]
    pub fn get(field: &AtomicU64) -> u64 {
        field.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn raise_max(field: &AtomicU64, candidate: u64) {
        field.fetch_max(candidate, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            hash_evals: Self::get(&self.hash_evals),
            rehashes: Self::get(&self.rehashes),
            probes: Self::get(&self.probes),
            displaced: Self::get(&self.displaced),
            searches: Self::get(&self.searches),
            migrations: Self::get(&self.migrations),
            migrated_elements: Self::get(&self.migrated_elements),
            reinserted: Self::get(&self.reinserted),
            migration_searches: Self::get(&self.migration_searches),
            peak_cells: Self::get(&self.peak_cells),
            max_find_probes: Self::get(&self.max_find_probes),
        }
    }
}

/// Plain-value copy of [`Counters`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub hash_evals: u64,
    pub rehashes: u64,
    pub probes: u64,
    pub displaced: u64,
    pub searches: u64,
    pub migrations: u64,
    pub migrated_elements: u64,
    pub reinserted: u64,
    pub migration_searches: u64,
    pub peak_cells: u64,
    pub max_find_probes: u64,
}
