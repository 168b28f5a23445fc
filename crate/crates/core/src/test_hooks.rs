//! Test support: key mining and raw bucket construction for worst-case
//! shrink scenarios. Not part of the public API.

pub use crate::dysect::BucketRef;

use crate::dysect::DysectTable;
use crate::entry::EMPTY_KEY;

/// Find `count` keys whose first hash choice lands in `target`, scanning
/// sequential candidates from `*cursor` (which advances so repeated calls
/// yield disjoint keys).
pub fn mine_keys_for_bucket(
    table: &DysectTable,
    target: BucketRef,
    count: usize,
    cursor: &mut u64,
) -> Vec<u64> {
    let mut keys = Vec::with_capacity(count);
    while keys.len() < count {
        let k = *cursor;
        *cursor += 1;
        if k == EMPTY_KEY {
            continue;
        }
        if table.locate(table.hook_pair(k), 0) == target {
            keys.push(k);
        }
    }
    keys
}

/// Fill bucket `target` to capacity with mined first-choice keys.
pub fn stuff_bucket_full(table: &mut DysectTable, target: BucketRef, cursor: &mut u64) -> Vec<u64> {
    let free = table.bucket_size() - table.hook_bucket_keys(target).len();
    let keys = mine_keys_for_bucket(table, target, free, cursor);
    for &k in &keys {
        table.hook_stuff(target, k, k);
    }
    keys
}
