//! The uniform dictionary interface the benchmark harness drives, plus the
//! construction parameters shared by all seven table variants.

use crate::counters::Counters;
use crate::dysect::DysectTable;
use crate::flat::{FlatScheme, FlatTable};
use crate::storage::StorageBackend;
use crate::subtables::SubtableVariant;

/// Upper limit on hash choices; keeps per-operation scratch on the stack.
pub const MAX_H: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TableError {
    /// The reserved key (all ones) cannot be stored.
    #[error("key {0:#x} is the reserved empty sentinel")]
    InvalidKey(u64),
    /// Displacement search exhausted its budget and growth is not allowed.
    #[error("insertion failed: displacement budget exhausted at load {load:.4}")]
    InsertFailed { load: f64 },
    /// A shrink migration could not reinsert its overflow; the shrink was
    /// rolled back by re-growing the subtable.
    #[error("shrink failed: overflow reinsertion exhausted its budget")]
    ShrinkFailed,
    /// Storage could not be grown.
    #[error("storage resource exhausted")]
    Resource,
}

/// Outcome of an insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inserted {
    /// The key was new and has been stored.
    New,
    /// The key was already present; its stored value is returned and the
    /// table is unchanged.
    Existing(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplacementStrategy {
    #[default]
    Bfs,
    RandomWalkOptimistic,
    RandomWalkPessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowMode {
    /// Grow as soon as the space constraint allows it (checked on insert).
    #[default]
    Eager,
    /// Grow only after an insertion fails its displacement search.
    OnFailure,
}

/// One growth migration, as recorded in the growth log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowEvent {
    /// Elements stored when the growth fired.
    pub n: u64,
    pub m_before: u64,
    pub m_after: u64,
}

/// Construction parameters. The defaults are the configuration used by all
/// benchmarks unless a sweep overrides them: T=256, B=8, H=3, BFS with a
/// 1024-probe budget.
#[derive(Debug, Clone, Copy)]
pub struct TableParams {
    /// Initial capacity hint in cells; rounded up per scheme.
    pub capacity: usize,
    /// Minimum load factor once the table has grown past its initial size.
    pub delta_min: f64,
    /// Subtable count for DySECT and the subtable variants (power of two).
    pub num_subtables: usize,
    /// Bucket size B for the cuckoo schemes.
    pub bucket_size: usize,
    /// Hash choices H for the cuckoo schemes.
    pub hash_choices: u32,
    pub seed: u64,
    /// Displacement search budget (buckets examined / walk steps).
    pub max_probes: u64,
    pub strategy: DisplacementStrategy,
    pub grow_mode: GrowMode,
    /// false = static table: insertion failure is reported, never grown away.
    pub growth_allowed: bool,
    pub shrink_enabled: bool,
    pub backend: StorageBackend,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams {
            capacity: 1 << 16,
            delta_min: 0.9,
            num_subtables: 256,
            bucket_size: 8,
            hash_choices: 3,
            seed: 0xDEADBEEF,
            max_probes: 1024,
            strategy: DisplacementStrategy::Bfs,
            grow_mode: GrowMode::Eager,
            growth_allowed: true,
            shrink_enabled: false,
            backend: StorageBackend::Heap,
        }
    }
}

/// The seven table variants under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    Dysect,
    Linear,
    RobinHood,
    Cuckoo,
    LinearSub,
    RobinHoodSub,
    CuckooSub,
}

impl TableKind {
    pub const ALL: [TableKind; 7] = [
        TableKind::Dysect,
        TableKind::Linear,
        TableKind::RobinHood,
        TableKind::Cuckoo,
        TableKind::LinearSub,
        TableKind::RobinHoodSub,
        TableKind::CuckooSub,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableKind::Dysect => "dysect",
            TableKind::Linear => "linear",
            TableKind::RobinHood => "robinhood",
            TableKind::Cuckoo => "cuckoo",
            TableKind::LinearSub => "linear-sub",
            TableKind::RobinHoodSub => "robinhood-sub",
            TableKind::CuckooSub => "cuckoo-sub",
        }
    }

    pub fn parse(name: &str) -> Option<TableKind> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Subtable variants migrate whole subtables by allocate-and-copy, so
    /// they are not strictly space efficient.
    pub fn is_subtable_variant(&self) -> bool {
        matches!(
            self,
            TableKind::LinearSub | TableKind::RobinHoodSub | TableKind::CuckooSub
        )
    }
}

/// Shared dictionary interface over all table variants.
pub trait Table {
    fn insert(&mut self, key: u64, value: u64) -> Result<Inserted, TableError>;
    fn find(&self, key: u64) -> Option<u64>;
    fn erase(&mut self, key: u64) -> bool;

    /// Stored element count n.
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Total cell count m.
    fn cells(&self) -> usize;
    /// n/m.
    fn load_factor(&self) -> f64 {
        if self.cells() == 0 {
            0.0
        } else {
            self.len() as f64 / self.cells() as f64
        }
    }

    fn counters(&self) -> &Counters;
    fn growth_log(&self) -> &[GrowEvent];
    fn kind(&self) -> TableKind;

    /// Full structural audit (placement/order invariants, exact counts).
    /// Returns a description of the first violation found.
    fn audit(&self) -> Result<(), String>;

    /// Upper bound on `cells()` the table currently guarantees, if any.
    /// `None` before the first growth (the initial capacity hint is not
    /// load-coupled) and for variants without a strict bound.
    fn space_bound(&self) -> Option<f64> {
        None
    }
}

/// Build any of the seven variants from one parameter set.
pub fn build_table(kind: TableKind, params: &TableParams) -> Box<dyn Table> {
    match kind {
        TableKind::Dysect => Box::new(DysectTable::new(params)),
        TableKind::Linear => Box::new(FlatTable::new(FlatScheme::Linear, params)),
        TableKind::RobinHood => Box::new(FlatTable::new(FlatScheme::RobinHood, params)),
        TableKind::Cuckoo => Box::new(FlatTable::new(FlatScheme::Cuckoo, params)),
        TableKind::LinearSub => Box::new(SubtableVariant::new(FlatScheme::Linear, params)),
        TableKind::RobinHoodSub => Box::new(SubtableVariant::new(FlatScheme::RobinHood, params)),
        TableKind::CuckooSub => Box::new(SubtableVariant::new(FlatScheme::Cuckoo, params)),
    }
}
