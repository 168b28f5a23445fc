//! Space-efficient dynamic hash tables.
//!
//! The centerpiece is [`DysectTable`], a bucket cuckoo table split into `T`
//! subtables that double independently, so the table can grow while never
//! holding more than `1/δ_min · n` cells (plus two subtables of slack). The
//! crate also ships strictly size-constrained competitor tables — linear
//! probing, Robin Hood, and flat bucket cuckoo, each with an in-place
//! reverse-order growth migration — plus "subtables with full migration"
//! variants of all three, and a benchmark harness that drives all seven
//! through the same [`Table`] trait.

pub mod bench;
mod counters;
mod displace;
mod dysect;
mod entry;
mod flat;
pub mod hashing;
mod storage;
mod subtables;
mod table;

pub use counters::Counters;
pub use displace::SearchExhausted;
pub use dysect::DysectTable;
pub use entry::{Entry, EMPTY_KEY};
pub use flat::{FlatScheme, FlatTable};
pub use storage::StorageBackend;
pub use subtables::SubtableVariant;
pub use table::{
    build_table, DisplacementStrategy, GrowEvent, GrowMode, Inserted, Table, TableError,
    TableKind, TableParams,
};

#[doc(hidden)]
pub mod test_hooks;
