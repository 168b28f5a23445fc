//! DySECT: a bucket cuckoo table split into `T = 2^t` independently doubling
//! subtables.
//!
//! Every element has `H` bucket choices spread across the subtables (top `t`
//! bits of the derived hash select the subtable, a low-bit mask selects the
//! bucket). Growing doubles one subtable at a time, in order, so subtable
//! sizes never differ by more than a factor of two and each growth step
//! raises total capacity by only `(T+j+1)/(T+j)`. A subtable doubling splits
//! each bucket over one extra hash bit, touching only that subtable's
//! elements and never displacing anything.

use rand::rngs::SmallRng;
use rand::SeedableRng;

use crate::counters::Counters;
use crate::displace::{
    apply_path, bfs_path, random_walk_insert, BucketSpace, SearchExhausted, WalkVariant,
};
use crate::entry::{Entry, EMPTY_KEY};
use crate::hashing::{HashFamily, HashPair};
use crate::storage::Region;
use crate::table::{
    DisplacementStrategy, GrowEvent, GrowMode, Inserted, Table, TableError, TableKind,
    TableParams, MAX_H,
};

/// (subtable index, bucket index within the subtable).
pub type BucketRef = (u32, u32);

#[derive(Debug)]
struct Subtable {
    region: Region,
    /// Bucket count is 2^exponent.
    exponent: u32,
}

impl Subtable {
    fn buckets(&self) -> u32 {
        1u32 << self.exponent
    }

    fn cells(&self) -> usize {
        self.region.len()
    }
}

#[derive(Debug)]
pub struct DysectTable {
    family: HashFamily,
    /// T = 2^t_bits subtables.
    t_bits: u32,
    bucket_size: usize,
    delta_min: f64,
    max_probes: u64,
    strategy: DisplacementStrategy,
    grow_mode: GrowMode,
    growth_allowed: bool,
    shrink_enabled: bool,
    subtables: Vec<Subtable>,
    n: usize,
    m: usize,
    /// Next subtable to double. Subtables below the cursor are the ones
    /// already doubled in the current round.
    grow_cursor: usize,
    grown_past_initial: bool,
    growth_log: Vec<GrowEvent>,
    counters: Counters,
    rng: SmallRng,
}

impl DysectTable {
    pub fn new(params: &TableParams) -> DysectTable {
        let t = params.num_subtables;
        assert!(t.is_power_of_two(), "subtable count must be a power of two");
        assert!(params.bucket_size >= 1);
        assert!(
            (2..=MAX_H as u32).contains(&params.hash_choices),
            "H must be in 2..={MAX_H}"
        );
        assert!(
            params.delta_min > 0.0 && params.delta_min < 1.0,
            "delta_min must be in (0,1)"
        );
        let t_bits = t.trailing_zeros();
        // Smallest power-of-two bucket count per subtable covering the hint.
        let want_buckets_total =
            (params.capacity + params.bucket_size - 1) / params.bucket_size;
        let per_sub = (want_buckets_total + t - 1) / t;
        let exponent = per_sub.next_power_of_two().max(1).trailing_zeros();
        let reserve_hint = (1usize << 28) / t.max(1);
        let subtables: Vec<Subtable> = (0..t)
            .map(|_| Subtable {
                region: Region::new(
                    params.backend,
                    (1usize << exponent) * params.bucket_size,
                    reserve_hint,
                ),
                exponent,
            })
            .collect();
        let m = subtables.iter().map(Subtable::cells).sum();
        let table = DysectTable {
            family: HashFamily::new(params.seed, params.hash_choices),
            t_bits,
            bucket_size: params.bucket_size,
            delta_min: params.delta_min,
            max_probes: params.max_probes,
            strategy: params.strategy,
            grow_mode: params.grow_mode,
            growth_allowed: params.growth_allowed,
            shrink_enabled: params.shrink_enabled,
            subtables,
            n: 0,
            m,
            grow_cursor: 0,
            grown_past_initial: false,
            growth_log: Vec::new(),
            counters: Counters::default(),
            rng: SmallRng::seed_from_u64(params.seed ^ 0x5D71_C3B1),
        };
        Counters::raise_max(&table.counters.peak_cells, m as u64);
        table
    }

    #[inline]
    pub fn num_subtables(&self) -> usize {
        self.subtables.len()
    }

    #[inline]
    pub fn bucket_size(&self) -> usize {
        self.bucket_size
    }

    #[inline]
    pub fn hash_choices(&self) -> u32 {
        self.family.h
    }

    /// Number of subtables already doubled in the current round.
    pub fn doubled_in_round(&self) -> usize {
        self.grow_cursor
    }

    /// Largest subtable size in cells.
    pub fn max_subtable_cells(&self) -> usize {
        self.subtables.iter().map(Subtable::cells).max().unwrap()
    }

    pub fn has_grown(&self) -> bool {
        self.grown_past_initial
    }

    #[doc(hidden)]
    pub fn hook_pair(&self, key: u64) -> HashPair {
        self.family.pair(key)
    }

    #[doc(hidden)]
    pub fn hook_subtable_exponent(&self, idx: usize) -> u32 {
        self.subtables[idx].exponent
    }

    #[doc(hidden)]
    pub fn hook_grow_cursor(&self) -> usize {
        self.grow_cursor
    }

    #[doc(hidden)]
    pub fn hook_bucket_keys(&self, r: BucketRef) -> Vec<u64> {
        let occ = self.occupancy(r);
        self.bucket(r)[..occ].iter().map(|e| e.key).collect()
    }

    /// Raw placement bypassing growth and displacement; panics on a full
    /// bucket. Test support only.
    #[doc(hidden)]
    pub fn hook_stuff(&mut self, r: BucketRef, key: u64, value: u64) {
        assert!(self.occupancy(r) < self.bucket_size, "bucket {r:?} full");
        self.place(r, Entry::new(key, value));
        self.n += 1;
    }

    /// Map a derived hash to its (subtable, bucket) coordinate. Reads only
    /// the target subtable's exponent, so an unrelated grow never moves it.
    #[inline]
    pub fn locate(&self, pair: HashPair, i: u32) -> BucketRef {
        let h = self.family.derive(pair, i);
        let sub = if self.t_bits == 0 {
            0
        } else {
            h >> (32 - self.t_bits)
        };
        let mask = (1u32 << self.subtables[sub as usize].exponent) - 1;
        (sub, h & mask)
    }

    #[inline]
    fn bucket(&self, r: BucketRef) -> &[Entry] {
        let b = self.bucket_size;
        let start = r.1 as usize * b;
        &self.subtables[r.0 as usize].region.cells()[start..start + b]
    }

    #[inline]
    fn bucket_mut(&mut self, r: BucketRef) -> &mut [Entry] {
        let b = self.bucket_size;
        let start = r.1 as usize * b;
        &mut self.subtables[r.0 as usize].region.cells_mut()[start..start + b]
    }

    /// Occupied cells in a bucket (occupancy is a compacted prefix).
    #[inline]
    fn occupancy(&self, r: BucketRef) -> usize {
        self.bucket(r).iter().take_while(|e| !e.is_empty()).count()
    }

    fn choice_refs(&self, pair: HashPair) -> ([BucketRef; MAX_H], usize) {
        let h = self.family.h as usize;
        let mut refs = [(0u32, 0u32); MAX_H];
        for (i, slot) in refs.iter_mut().enumerate().take(h) {
            *slot = self.locate(pair, i as u32);
        }
        (refs, h)
    }

    /// Hint the first cells of all choice buckets into cache before the
    /// serial scans; buckets live on distinct cache lines, so this overlaps
    /// the misses that otherwise dominate probing at high load.
    #[inline]
    fn prefetch_choices(&self, refs: &[BucketRef]) {
        #[cfg(target_arch = "x86_64")]
        for &r in refs {
            unsafe {
                use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
                let p = self.bucket(r).as_ptr() as *const i8;
                _mm_prefetch(p, _MM_HINT_T0);
                _mm_prefetch(p.add(64), _MM_HINT_T0);
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = refs;
    }

    fn place(&mut self, r: BucketRef, e: Entry) {
        let occ = self.occupancy(r);
        debug_assert!(occ < self.bucket_size);
        self.bucket_mut(r)[occ] = e;
    }

    /// Smallest n at which the next grow is permitted by the space bound:
    /// δ_min⁻¹·n > m + 2s, with s the size of the subtable the grow cursor
    /// points at.
    pub fn grow_threshold(&self) -> usize {
        let s = self.subtables[self.grow_cursor].cells();
        (self.delta_min * (self.m + 2 * s) as f64).floor() as usize + 1
    }

    /// Eager growth: fires as many times as the threshold permits.
    pub fn maybe_grow(&mut self) -> bool {
        let mut grew = false;
        while self.n >= self.grow_threshold() {
            self.grow_subtable(self.grow_cursor);
            grew = true;
        }
        grew
    }

    /// Double subtable `idx` by splitting each bucket over one extra hash
    /// bit. Touches only this subtable's elements; no displacements.
    pub fn grow_subtable(&mut self, idx: usize) {
        let b = self.bucket_size;
        let old_exp = self.subtables[idx].exponent;
        let old_buckets = 1usize << old_exp;
        let m_before = self.m as u64;
        self.subtables[idx].region.grow_to(2 * old_buckets * b);

        let mut touched = 0u64;
        for bucket in 0..old_buckets {
            // Partition bucket `bucket` in place: entries whose extra hash
            // bit is set move to bucket + old_buckets, the rest compact down.
            let mut keep = 0usize;
            for cell in 0..b {
                let e = self.subtables[idx].region.cells()[bucket * b + cell];
                if e.is_empty() {
                    break;
                }
                touched += 1;
                Counters::bump(&self.counters.hash_evals);
                Counters::bump(&self.counters.rehashes);
                let pair = self.family.pair(e.key);
                let h = self.stored_hash(pair, idx as u32, bucket as u32, old_exp);
                let cells = self.subtables[idx].region.cells_mut();
                cells[bucket * b + cell] = Entry::EMPTY;
                if (h >> old_exp) & 1 == 1 {
                    let dest = (bucket + old_buckets) * b;
                    let occ = cells[dest..dest + b]
                        .iter()
                        .take_while(|e| !e.is_empty())
                        .count();
                    cells[dest + occ] = e;
                } else {
                    cells[bucket * b + keep] = e;
                    keep += 1;
                }
            }
        }

        self.subtables[idx].exponent = old_exp + 1;
        self.m += old_buckets * b;
        self.grow_cursor = (self.grow_cursor + 1) % self.subtables.len();
        self.grown_past_initial = true;
        Counters::bump(&self.counters.migrations);
        Counters::add(&self.counters.migrated_elements, touched);
        Counters::raise_max(&self.counters.peak_cells, self.m as u64);
        self.growth_log.push(GrowEvent {
            n: self.n as u64,
            m_before,
            m_after: self.m as u64,
        });
    }

    /// The derived hash under which an element stored in `(sub, bucket)` at
    /// bucket-count exponent `exp` was placed (first matching choice).
    fn stored_hash(&self, pair: HashPair, sub: u32, bucket: u32, exp: u32) -> u32 {
        let mask = (1u32 << exp) - 1;
        for i in 0..self.family.h {
            let h = self.family.derive(pair, i);
            let s = if self.t_bits == 0 {
                0
            } else {
                h >> (32 - self.t_bits)
            };
            if s == sub && h & mask == bucket {
                return h;
            }
        }
        unreachable!("stored element has no matching bucket choice");
    }

    /// Shrink trigger: δ_min⁻¹·n < m − s′, with s′ the size of the
    /// last-doubled subtable. Shrinks in reverse grow order.
    pub fn maybe_shrink(&mut self) -> Result<bool, TableError> {
        if !self.shrink_enabled {
            return Ok(false);
        }
        let target = self.shrink_target();
        let Some(target) = target else {
            return Ok(false);
        };
        let s_large = self.subtables[target].cells();
        if (self.n as f64) < self.delta_min * (self.m - s_large) as f64 {
            self.shrink_subtable(target)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Shrink until the capacity fits `target_n` elements at the trigger
    /// inequality, as if the table currently held `target_n` elements.
    pub fn shrink_to_size(&mut self, target_n: usize) -> Result<(), TableError> {
        assert!(target_n >= self.n);
        loop {
            let Some(target) = self.shrink_target() else {
                return Ok(());
            };
            let s_large = self.subtables[target].cells();
            if (target_n as f64) < self.delta_min * (self.m - s_large) as f64 {
                self.shrink_subtable(target)?;
            } else {
                return Ok(());
            }
        }
    }

    fn shrink_target(&self) -> Option<usize> {
        let idx = if self.grow_cursor == 0 {
            self.subtables.len() - 1
        } else {
            self.grow_cursor - 1
        };
        if self.subtables[idx].exponent >= 1 {
            Some(idx)
        } else {
            None
        }
    }

    /// Halve subtable `idx`: buckets b and b+half merge into b; overflowing
    /// elements are buffered and reinserted after the migration. On
    /// reinsertion failure the shrink is rolled back by re-growing.
    pub fn shrink_subtable(&mut self, idx: usize) -> Result<(), TableError> {
        let b = self.bucket_size;
        let old_exp = self.subtables[idx].exponent;
        assert!(old_exp >= 1, "cannot shrink a single-bucket subtable");
        let half = 1usize << (old_exp - 1);
        let m_before = self.m as u64;

        let mut overflow: Vec<Entry> = Vec::new();
        let mut touched = 0u64;
        {
            let cells = self.subtables[idx].region.cells_mut();
            for bucket in 0..half {
                let lo = bucket * b;
                let hi = (bucket + half) * b;
                let mut occ = cells[lo..lo + b].iter().take_while(|e| !e.is_empty()).count();
                touched += occ as u64;
                for cell in 0..b {
                    let e = cells[hi + cell];
                    if e.is_empty() {
                        break;
                    }
                    touched += 1;
                    if occ < b {
                        cells[lo + occ] = e;
                        occ += 1;
                    } else {
                        overflow.push(e);
                    }
                }
            }
        }
        self.subtables[idx].region.shrink_to(half * b);
        self.subtables[idx].exponent = old_exp - 1;
        self.m -= half * b;
        self.grow_cursor = idx;
        Counters::bump(&self.counters.migrations);
        Counters::add(&self.counters.migrated_elements, touched);
        Counters::add(&self.counters.reinserted, overflow.len() as u64);
        self.growth_log.push(GrowEvent {
            n: self.n as u64,
            m_before,
            m_after: self.m as u64,
        });

        // Reinsert the overflow; every element still has H valid buckets.
        for (pos, e) in overflow.iter().enumerate() {
            Counters::bump(&self.counters.hash_evals);
            Counters::bump(&self.counters.rehashes);
            let pair = self.family.pair(e.key);
            if self.insert_at(pair, *e, false).is_err() {
                // Roll back: regrow the subtable and put the rest back.
                self.grow_subtable(idx);
                for e in &overflow[pos..] {
                    Counters::bump(&self.counters.hash_evals);
                    Counters::bump(&self.counters.rehashes);
                    let pair = self.family.pair(e.key);
                    self.insert_at(pair, *e, false)
                        .expect("rollback reinsertion cannot fail");
                }
                return Err(TableError::ShrinkFailed);
            }
        }
        Ok(())
    }

    /// Place an already-hashed entry, displacing if necessary. Does not
    /// check for duplicates and does not touch `n`.
    fn insert_at(
        &mut self,
        pair: HashPair,
        e: Entry,
        allow_grow: bool,
    ) -> Result<(), TableError> {
        loop {
            let (refs, h) = self.choice_refs(pair);
            // Most free space wins; lowest choice index breaks ties.
            let mut best = 0usize;
            let mut best_free = 0usize;
            for (i, &r) in refs[..h].iter().enumerate() {
                let free = self.bucket_size - self.occupancy(r);
                if free > best_free {
                    best_free = free;
                    best = i;
                }
            }
            if best_free > 0 {
                self.place(refs[best], e);
                return Ok(());
            }

            Counters::bump(&self.counters.searches);
            let displaced = match self.strategy {
                DisplacementStrategy::Bfs => match bfs_path(self, &refs[..h], self.max_probes) {
                    Ok(path) => {
                        let moves = apply_path(self, &path);
                        let target = path.last().expect("nonempty path").from;
                        self.place(target, e);
                        Ok(moves)
                    }
                    Err(SearchExhausted) => Err(SearchExhausted),
                },
                DisplacementStrategy::RandomWalkOptimistic
                | DisplacementStrategy::RandomWalkPessimistic => {
                    let variant = if self.strategy == DisplacementStrategy::RandomWalkOptimistic {
                        WalkVariant::Optimistic
                    } else {
                        WalkVariant::Pessimistic
                    };
                    let mut rng = self.rng.clone();
                    let r = random_walk_insert(self, e, &refs[..h], self.max_probes, variant, &mut rng);
                    self.rng = rng;
                    r
                }
            };
            match displaced {
                Ok(moves) => {
                    Counters::add(&self.counters.displaced, moves);
                    return Ok(());
                }
                Err(SearchExhausted) => {
                    if allow_grow && self.growth_allowed {
                        self.grow_subtable(self.grow_cursor);
                        continue;
                    }
                    return Err(TableError::InsertFailed {
                        load: self.load_factor(),
                    });
                }
            }
        }
    }
}

impl BucketSpace for DysectTable {
    type Ref = BucketRef;

    #[inline]
    fn num_choices(&self) -> u32 {
        self.family.h
    }

    fn choices(&self, key: u64, out: &mut Vec<BucketRef>) {
        Counters::bump(&self.counters.hash_evals);
        Counters::bump(&self.counters.rehashes);
        let pair = self.family.pair(key);
        out.clear();
        for i in 0..self.family.h {
            out.push(self.locate(pair, i));
        }
    }

    #[inline]
    fn entries(&self, r: BucketRef) -> &[Entry] {
        let occ = self.occupancy(r);
        &self.bucket(r)[..occ]
    }

    #[inline]
    fn free_slots(&self, r: BucketRef) -> usize {
        self.bucket_size - self.occupancy(r)
    }

    fn take(&mut self, r: BucketRef, key: u64) -> Entry {
        let occ = self.occupancy(r);
        let bucket = self.bucket_mut(r);
        let pos = bucket[..occ]
            .iter()
            .position(|e| e.key == key)
            .expect("take: key not in bucket");
        let e = bucket[pos];
        bucket[pos] = bucket[occ - 1];
        bucket[occ - 1] = Entry::EMPTY;
        e
    }

    fn put(&mut self, r: BucketRef, e: Entry) {
        self.place(r, e);
    }

    fn swap_cell(&mut self, r: BucketRef, cell: usize, e: Entry) -> Entry {
        let bucket = self.bucket_mut(r);
        let old = bucket[cell];
        bucket[cell] = e;
        old
    }

    #[inline]
    fn prefetch(&self, r: BucketRef) {
        self.prefetch_choices(std::slice::from_ref(&r));
    }
}

impl Table for DysectTable {
    fn insert(&mut self, key: u64, value: u64) -> Result<Inserted, TableError> {
        if key == EMPTY_KEY {
            return Err(TableError::InvalidKey(key));
        }
        if self.growth_allowed && self.grow_mode == GrowMode::Eager {
            self.maybe_grow();
        }
        Counters::bump(&self.counters.hash_evals);
        let pair = self.family.pair(key);
        let (refs, h) = self.choice_refs(pair);
        self.prefetch_choices(&refs[..h]);
        let mut probed = 0u64;
        for &r in &refs[..h] {
            let bucket = self.bucket(r);
            for e in bucket {
                if e.is_empty() {
                    break;
                }
                probed += 1;
                if e.key == key {
                    Counters::add(&self.counters.probes, probed);
                    return Ok(Inserted::Existing(e.value));
                }
            }
        }
        Counters::add(&self.counters.probes, probed);
        let allow_grow = self.growth_allowed
            && (self.grow_mode == GrowMode::OnFailure || self.grow_mode == GrowMode::Eager);
        self.insert_at(pair, Entry::new(key, value), allow_grow)?;
        self.n += 1;
        Ok(Inserted::New)
    }

    fn find(&self, key: u64) -> Option<u64> {
        Counters::bump(&self.counters.hash_evals);
        let pair = self.family.pair(key);
        let (refs, h) = self.choice_refs(pair);
        self.prefetch_choices(&refs[..h]);
        let mut probed = 0u64;
        for &r in &refs[..h] {
            for e in self.bucket(r) {
                if e.is_empty() {
                    break;
                }
                probed += 1;
                if e.key == key {
                    Counters::add(&self.counters.probes, probed);
                    Counters::raise_max(&self.counters.max_find_probes, probed);
                    return Some(e.value);
                }
            }
        }
        Counters::add(&self.counters.probes, probed.max(1));
        Counters::raise_max(&self.counters.max_find_probes, probed);
        None
    }

    fn erase(&mut self, key: u64) -> bool {
        Counters::bump(&self.counters.hash_evals);
        let pair = self.family.pair(key);
        for i in 0..self.family.h {
            let r = self.locate(pair, i);
            let occ = self.occupancy(r);
            let bucket = self.bucket_mut(r);
            if let Some(pos) = bucket[..occ].iter().position(|e| e.key == key) {
                bucket[pos] = bucket[occ - 1];
                bucket[occ - 1] = Entry::EMPTY;
                self.n -= 1;
                // Shrink failure rolls the table back; the erase itself stands.
                let _ = self.maybe_shrink();
                return true;
            }
        }
        false
    }

    fn len(&self) -> usize {
        self.n
    }

    fn cells(&self) -> usize {
        self.m
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn growth_log(&self) -> &[GrowEvent] {
        &self.growth_log
    }

    fn kind(&self) -> TableKind {
        TableKind::Dysect
    }

    fn space_bound(&self) -> Option<f64> {
        if !self.grown_past_initial {
            return None;
        }
        let s_max = self.subtables.iter().map(Subtable::cells).max().unwrap_or(0);
        Some(self.n as f64 / self.delta_min + 2.0 * s_max as f64)
    }

    fn audit(&self) -> Result<(), String> {
        let mut count = 0usize;
        let mut min_cells = usize::MAX;
        let mut max_cells = 0usize;
        let mut total = 0usize;
        for (si, sub) in self.subtables.iter().enumerate() {
            min_cells = min_cells.min(sub.cells());
            max_cells = max_cells.max(sub.cells());
            total += sub.cells();
            let b = self.bucket_size;
            for bucket in 0..sub.buckets() as usize {
                let cells = &sub.region.cells()[bucket * b..(bucket + 1) * b];
                let occ = cells.iter().take_while(|e| !e.is_empty()).count();
                if cells[occ..].iter().any(|e| !e.is_empty()) {
                    return Err(format!(
                        "subtable {si} bucket {bucket}: occupancy not prefix-compacted"
                    ));
                }
                for e in &cells[..occ] {
                    count += 1;
                    let pair = self.family.pair(e.key);
                    let placed = (0..self.family.h)
                        .any(|i| self.locate(pair, i) == (si as u32, bucket as u32));
                    if !placed {
                        return Err(format!(
                            "key {:#x} stored in subtable {si} bucket {bucket}, not one of its choices",
                            e.key
                        ));
                    }
                }
            }
        }
        if count != self.n {
            return Err(format!("stored {count} elements but n = {}", self.n));
        }
        if total != self.m {
            return Err(format!("cells sum to {total} but m = {}", self.m));
        }
        if max_cells > 2 * min_cells {
            return Err(format!(
                "size homogeneity violated: max {max_cells} > 2 × min {min_cells}"
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashMap;

    fn params() -> TableParams {
        TableParams {
            capacity: 1 << 12,
            num_subtables: 4,
            ..TableParams::default()
        }
    }

    #[test]
    fn locate_hand_arithmetic() {
        // t=2 (T=4), derived hash 0xC0000005, subtable 3 holding 16 buckets
        // maps to (3, 5); a zero hash maps to (0, 0).
        let mut p = params();
        p.capacity = 4 * 16 * 8; // 16 buckets of 8 cells per subtable
        let t = DysectTable::new(&p);
        assert_eq!(t.subtables[3].buckets(), 16);
        // derive(pair, 0) == pair.lo, so a pair with lo = target works.
        let pair = HashPair {
            lo: 0xC0000005,
            hi: 0,
        };
        assert_eq!(t.locate(pair, 0), (3, 5));
        let zero = HashPair { lo: 0, hi: 0 };
        assert_eq!(t.locate(zero, 0), (0, 0));
    }

    #[test]
    fn locate_unaffected_by_other_subtable_growth() {
        let mut t = DysectTable::new(&params());
        let pair = t.family.pair(42);
        let before: Vec<_> = (0..3).map(|i| t.locate(pair, i)).collect();
        // Grow a subtable none of the choices land in.
        let used: Vec<u32> = before.iter().map(|r| r.0).collect();
        let other = (0..4u32).find(|s| !used.contains(s)).map(|s| s as usize);
        if let Some(other) = other {
            t.grow_subtable(other);
            let after: Vec<_> = (0..3).map(|i| t.locate(pair, i)).collect();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn insert_find_erase_roundtrip() {
        let mut t = DysectTable::new(&params());
        assert_eq!(t.find(1), None);
        assert_eq!(t.insert(1, 10).unwrap(), Inserted::New);
        assert_eq!(t.find(1), Some(10));
        assert_eq!(t.insert(1, 99).unwrap(), Inserted::Existing(10));
        assert_eq!(t.len(), 1);
        assert!(t.erase(1));
        assert!(!t.erase(1));
        assert_eq!(t.find(1), None);
        assert_eq!(t.len(), 0);
    }

    #[test]
    fn sentinel_key_rejected() {
        let mut t = DysectTable::new(&params());
        assert_eq!(
            t.insert(EMPTY_KEY, 0).unwrap_err(),
            TableError::InvalidKey(EMPTY_KEY)
        );
    }

    #[test]
    fn grow_threshold_arithmetic() {
        // T=4, subtables of 512 cells (m=2048), δ_min=0.9: growing becomes
        // permissible at n = ⌊0.9·(2048+1024)⌋+1 = 2765. (At T=4 that load
        // is physically unreachable — eager growth needs 2s ≪ m.)
        let p = TableParams {
            capacity: 2048,
            num_subtables: 4,
            delta_min: 0.9,
            ..TableParams::default()
        };
        let t = DysectTable::new(&p);
        assert_eq!(t.cells(), 2048);
        assert_eq!(t.subtables[0].cells(), 512);
        assert_eq!(t.grow_threshold(), 2765);
    }

    #[test]
    fn grow_trigger_fires_at_threshold() {
        // T=64 keeps the threshold below the achievable load: subtables of
        // 32 cells (m=2048), trigger at n = ⌊0.9·(2048+64)⌋+1 = 1901.
        let p = TableParams {
            capacity: 2048,
            num_subtables: 64,
            delta_min: 0.9,
            ..TableParams::default()
        };
        let mut t = DysectTable::new(&p);
        assert_eq!(t.cells(), 2048);
        assert_eq!(t.grow_threshold(), 1901);
        let mut key = 0u64;
        while t.growth_log().is_empty() {
            t.insert(key, key).unwrap();
            key += 1;
        }
        let ev = t.growth_log()[0];
        assert_eq!(ev.n, 1901);
        assert_eq!(ev.m_before, 2048);
        assert_eq!(ev.m_after, 2048 + 32);
        t.audit().unwrap();
    }

    #[test]
    fn grow_factor_first_event() {
        // T=256, j=0: first grow multiplies capacity by 257/256.
        let p = TableParams {
            capacity: 256 * 8,
            num_subtables: 256,
            ..TableParams::default()
        };
        let mut t = DysectTable::new(&p);
        let m0 = t.cells();
        t.grow_subtable(0);
        assert_eq!(t.cells() * 256, m0 * 257);
    }

    #[test]
    fn maybe_grow_noop_below_trigger() {
        let mut t = DysectTable::new(&params());
        t.insert(5, 5).unwrap();
        let m = t.cells();
        assert!(!t.maybe_grow());
        assert_eq!(t.cells(), m);
    }

    #[test]
    fn grow_splits_buckets_by_one_bit() {
        // An element in old bucket b of a subtable with 2^x buckets lands in
        // bucket b or b + 2^x depending on hash bit x.
        let mut t = DysectTable::new(&params());
        let mut rng = SmallRng::seed_from_u64(3);
        for _ in 0..500 {
            t.insert(rng.gen::<u64>() >> 1, 1).unwrap();
        }
        let exp = t.subtables[0].exponent;
        // Record where everything in subtable 0 is, keyed by bucket.
        let b = t.bucket_size;
        let mut old_pos: HashMap<u64, u32> = HashMap::new();
        for bucket in 0..t.subtables[0].buckets() {
            for e in t.bucket((0, bucket)) {
                if e.is_empty() {
                    break;
                }
                old_pos.insert(e.key, bucket);
            }
        }
        let before = Counters::get(&t.counters.searches);
        t.grow_subtable(0);
        assert_eq!(
            Counters::get(&t.counters.searches),
            before,
            "growth must not run displacement searches"
        );
        let _ = b;
        for bucket in 0..t.subtables[0].buckets() {
            for e in t.bucket((0, bucket)) {
                if e.is_empty() {
                    break;
                }
                let old = old_pos.remove(&e.key).expect("element appeared from nowhere");
                assert!(
                    bucket == old || bucket == old + (1 << exp),
                    "bucket {bucket} not one of {} or {}",
                    old,
                    old + (1 << exp)
                );
            }
        }
        assert!(old_pos.is_empty(), "elements lost in migration");
        t.audit().unwrap();
    }

    #[test]
    fn grow_empty_subtable() {
        let mut t = DysectTable::new(&params());
        let before = t.subtables[0].cells();
        t.grow_subtable(0);
        assert_eq!(t.subtables[0].cells(), 2 * before);
        assert_eq!(t.len(), 0);
        t.audit().unwrap();
    }

    #[test]
    fn migration_touches_only_own_subtable() {
        let mut t = DysectTable::new(&params());
        let mut rng = SmallRng::seed_from_u64(4);
        for _ in 0..2000 {
            t.insert(rng.gen::<u64>() >> 1, 1).unwrap();
        }
        let expected: u64 = (0..t.subtables[0].buckets())
            .map(|bkt| t.occupancy((0, bkt)) as u64)
            .sum();
        let before = Counters::get(&t.counters.migrated_elements);
        t.grow_subtable(0);
        assert_eq!(Counters::get(&t.counters.migrated_elements) - before, expected);
        t.audit().unwrap();
    }

    #[test]
    fn find_probe_bound() {
        let mut t = DysectTable::new(&params());
        let mut rng = SmallRng::seed_from_u64(5);
        let mut keys = Vec::new();
        for _ in 0..3000 {
            let k = rng.gen::<u64>() >> 1;
            t.insert(k, 1).unwrap();
            keys.push(k);
        }
        for k in keys {
            assert_eq!(t.find(k), Some(1));
        }
        for _ in 0..3000 {
            let _ = t.find(rng.gen());
        }
        let bound = (t.family.h as u64) * t.bucket_size as u64;
        assert!(Counters::get(&t.counters.max_find_probes) <= bound);
    }

    #[test]
    fn static_mode_reports_insert_failed_and_stays_valid() {
        // Saturated toy table of 2 subtables: displacement must exhaust and
        // report failure without corrupting the table.
        let p = TableParams {
            capacity: 2 * 2 * 8,
            num_subtables: 2,
            growth_allowed: false,
            max_probes: 64,
            ..TableParams::default()
        };
        let mut t = DysectTable::new(&p);
        let mut rng = SmallRng::seed_from_u64(6);
        let mut failed = false;
        for _ in 0..10_000 {
            match t.insert(rng.gen::<u64>() >> 1, 1) {
                Ok(_) => {}
                Err(TableError::InsertFailed { .. }) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(failed, "table of 32 cells never refused an insert");
        t.audit().unwrap();
    }

    #[test]
    fn random_walk_variants_keep_placement_invariant() {
        for strategy in [
            DisplacementStrategy::RandomWalkOptimistic,
            DisplacementStrategy::RandomWalkPessimistic,
        ] {
            let p = TableParams {
                capacity: 1 << 10,
                num_subtables: 4,
                strategy,
                max_probes: 256,
                ..TableParams::default()
            };
            let mut t = DysectTable::new(&p);
            let mut rng = SmallRng::seed_from_u64(7);
            for _ in 0..5000 {
                let _ = t.insert(rng.gen::<u64>() >> 1, 1);
            }
            t.audit().unwrap();
        }
    }

    #[test]
    fn shrink_merges_and_reinserts() {
        let p = TableParams {
            capacity: 1 << 12,
            num_subtables: 4,
            shrink_enabled: true,
            delta_min: 0.85,
            ..TableParams::default()
        };
        let mut t = DysectTable::new(&p);
        let mut rng = SmallRng::seed_from_u64(8);
        let mut keys = Vec::new();
        for _ in 0..8000 {
            let k = rng.gen::<u64>() >> 1;
            if let Ok(Inserted::New) = t.insert(k, k) {
                keys.push(k);
            }
        }
        assert!(t.has_grown());
        for k in keys.drain(..) {
            assert!(t.erase(k));
        }
        assert_eq!(t.len(), 0);
        assert!(
            Counters::get(&t.counters.migrations) > 0,
            "erasing everything should have shrunk"
        );
        t.audit().unwrap();
    }

    #[test]
    fn grow_shrink_hysteresis() {
        // At any fixed n, a grow and a shrink trigger cannot both hold: the
        // inequalities are separated by a gap of at least one subtable.
        for delta_min in [0.5, 0.85, 0.95] {
            for m in [2048usize, 4096] {
                for s in [256usize, 512] {
                    let s_large = 2 * s;
                    let grow_at = delta_min * (m + 2 * s) as f64;
                    let shrink_at = delta_min * (m - s_large) as f64;
                    assert!(
                        grow_at - shrink_at >= delta_min * (s as f64),
                        "triggers too close at δ={delta_min} m={m} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_equivalence_small() {
        let mut t = DysectTable::new(&params());
        let mut model: HashMap<u64, u64> = HashMap::new();
        let mut rng = SmallRng::seed_from_u64(9);
        for _ in 0..20_000 {
            let k = (rng.gen::<u64>() % 4000) << 1;
            match rng.gen_range(0..3) {
                0 => {
                    let v = rng.gen();
                    let expect = model.get(&k).copied();
                    match t.insert(k, v).unwrap() {
                        Inserted::New => assert_eq!(expect, None),
                        Inserted::Existing(old) => assert_eq!(Some(old), expect),
                    }
                    model.entry(k).or_insert(v);
                }
                1 => assert_eq!(t.find(k), model.get(&k).copied()),
                _ => assert_eq!(t.erase(k), model.remove(&k).is_some()),
            }
        }
        assert_eq!(t.len(), model.len());
        t.audit().unwrap();
    }
}
