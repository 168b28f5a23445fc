//! Strictly size-constrained flat tables: linear probing, Robin Hood, and
//! bucket cuckoo over a single cell array.
//!
//! All three address by scale factor — `home(h) = ⌊h·m / 2³²⌋` — which is
//! monotone in the hash, so the table is close to sorted by hash value and
//! can grow by an in-place migration that walks both the old and the new
//! layout in reverse linear order. Growth triggers once the load exceeds
//! `(δ_min+1)/2` and resizes to `⌈n/δ_min⌉`, keeping the table within one
//! cell of `δ_min⁻¹·n` right after every migration.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::rngs::SmallRng;
use rand::SeedableRng;

use crate::counters::Counters;
use crate::displace::{
    apply_path, bfs_path, random_walk_insert, BucketSpace, SearchExhausted, WalkVariant,
};
use crate::entry::{Entry, EMPTY_KEY};
use crate::hashing::{HashFamily, HashPair};
use crate::storage::{Region, StorageBackend};
use crate::table::{
    DisplacementStrategy, GrowEvent, GrowMode, Inserted, Table, TableError, TableKind,
    TableParams, MAX_H,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatScheme {
    Linear,
    RobinHood,
    Cuckoo,
}

/// Scale-factor addressing: monotone in `h`, maximum hash maps to `range-1`.
#[inline]
pub fn scale(h: u32, range: usize) -> usize {
    ((h as u64 * range as u64) >> 32) as usize
}

#[derive(Debug)]
pub struct FlatTable {
    scheme: FlatScheme,
    family: HashFamily,
    /// Left-rotation applied to the low hash half before addressing; used by
    /// the subtable variants so inner addressing is independent of routing.
    rotate: u32,
    delta_min: f64,
    /// 1 for linear/Robin Hood; B for cuckoo.
    bucket_size: usize,
    max_probes: u64,
    strategy: DisplacementStrategy,
    grow_mode: GrowMode,
    growth_allowed: bool,
    /// Grow by allocate-and-copy full migration instead of in place.
    full_migration: bool,
    backend: StorageBackend,
    region: Region,
    n: usize,
    counters: Arc<Counters>,
    growth_log: Vec<GrowEvent>,
    rng: SmallRng,
}

impl FlatTable {
    pub fn new(scheme: FlatScheme, params: &TableParams) -> FlatTable {
        Self::with_counters(scheme, params, Arc::new(Counters::default()), 0, false)
    }

    pub(crate) fn with_counters(
        scheme: FlatScheme,
        params: &TableParams,
        counters: Arc<Counters>,
        rotate: u32,
        full_migration: bool,
    ) -> FlatTable {
        assert!(params.delta_min > 0.0 && params.delta_min < 1.0);
        let bucket_size = if scheme == FlatScheme::Cuckoo {
            params.bucket_size
        } else {
            1
        };
        if scheme == FlatScheme::Cuckoo {
            assert!((2..=MAX_H as u32).contains(&params.hash_choices));
        }
        let buckets = (params.capacity + bucket_size - 1) / bucket_size;
        let buckets = buckets.max(2);
        let m = buckets * bucket_size;
        let region = Region::new(params.backend, m, 1 << 28);
        let table = FlatTable {
            scheme,
            family: HashFamily::new(params.seed, params.hash_choices.max(2)),
            rotate,
            delta_min: params.delta_min,
            bucket_size,
            max_probes: params.max_probes,
            strategy: params.strategy,
            grow_mode: params.grow_mode,
            growth_allowed: params.growth_allowed,
            full_migration,
            backend: params.backend,
            region,
            n: 0,
            counters,
            growth_log: Vec::new(),
            rng: SmallRng::seed_from_u64(params.seed ^ 0x1B2A_97F4),
        };
        Counters::raise_max(&table.counters.peak_cells, m as u64);
        table
    }

    #[inline]
    pub fn scheme(&self) -> FlatScheme {
        self.scheme
    }

    #[inline]
    fn m(&self) -> usize {
        self.region.len()
    }

    #[inline]
    fn num_buckets(&self) -> usize {
        self.m() / self.bucket_size
    }

    /// Hash a key for this table, applying the routing rotation.
    #[inline]
    pub(crate) fn pair_of(&self, key: u64) -> HashPair {
        let p = self.family.pair(key);
        HashPair {
            lo: p.lo.rotate_left(self.rotate),
            hi: p.hi,
        }
    }

    #[inline]
    fn rehash(&self, key: u64) -> HashPair {
        Counters::bump(&self.counters.hash_evals);
        Counters::bump(&self.counters.rehashes);
        self.pair_of(key)
    }

    /// Growth trigger: load above (δ_min+1)/2.
    pub(crate) fn needs_growth(&self) -> bool {
        2 * self.n > ((self.delta_min + 1.0) * self.m() as f64) as usize
    }

    /// Target capacity after growth: ⌈n/δ_min⌉, rounded up per scheme.
    pub(crate) fn growth_target(&self) -> usize {
        let want = (self.n as f64 / self.delta_min).ceil() as usize;
        let want = want.max(self.m() + 1);
        let buckets = (want + self.bucket_size - 1) / self.bucket_size;
        buckets * self.bucket_size
    }

    pub(crate) fn grow_to(&mut self, m_new: usize) {
        let m_before = self.m() as u64;
        Counters::bump(&self.counters.migrations);
        if self.full_migration {
            self.migrate_full(m_new);
        } else {
            // The heap fallback reallocates; both copies coexist briefly.
            if self.backend == StorageBackend::Heap {
                Counters::raise_max(
                    &self.counters.peak_cells,
                    m_before + m_new as u64,
                );
            }
            self.migrate_in_place(m_new);
        }
        Counters::raise_max(&self.counters.peak_cells, self.m() as u64);
        self.growth_log.push(GrowEvent {
            n: self.n as u64,
            m_before,
            m_after: self.m() as u64,
        });
    }

    /// Allocate-and-copy growth used by the subtable variants: both the old
    /// and the new table exist during the migration.
    fn migrate_full(&mut self, m_new: usize) {
        Counters::raise_max(
            &self.counters.peak_cells,
            (self.m() + m_new) as u64,
        );
        let old = std::mem::replace(&mut self.region, Region::new(self.backend, m_new, 1 << 28));
        self.n = 0;
        for e in old.cells() {
            if e.is_empty() {
                continue;
            }
            Counters::bump(&self.counters.migrated_elements);
            let pair = self.rehash(e.key);
            self.insert_entry(pair, *e)
                .expect("full migration reinsertion failed");
            self.n += 1;
        }
    }

    /// In-place growth: the region is enlarged first, then elements are
    /// rehomed walking the old cells from back to front.
    pub(crate) fn migrate_in_place(&mut self, m_new: usize) {
        let m_old = self.m();
        assert!(m_new > m_old);
        self.region.grow_to(m_new);
        match self.scheme {
            FlatScheme::Linear => self.migrate_linear(m_old, m_new),
            FlatScheme::RobinHood => self.migrate_robinhood(m_old, m_new),
            FlatScheme::Cuckoo => self.migrate_cuckoo(m_old, m_new),
        }
    }

    fn migrate_linear(&mut self, m_old: usize, m_new: usize) {
        let mut buffer: Vec<Entry> = Vec::new();
        for i in (0..m_old).rev() {
            let e = self.region.cells()[i];
            if e.is_empty() {
                continue;
            }
            Counters::bump(&self.counters.migrated_elements);
            self.region.cells_mut()[i] = Entry::EMPTY;
            let h = self.rehash(e.key).lo;
            let home = scale(h, m_new);
            if home <= i {
                buffer.push(e);
                continue;
            }
            // Probe forward in the already-migrated zone; wrapping back into
            // the unmigrated zone buffers instead.
            let mut p = home;
            loop {
                if p == m_new {
                    buffer.push(e);
                    break;
                }
                if self.region.cells()[p].is_empty() {
                    self.region.cells_mut()[p] = e;
                    break;
                }
                p += 1;
            }
        }
        Counters::add(&self.counters.reinserted, buffer.len() as u64);
        for e in buffer {
            let pair = self.rehash(e.key);
            self.insert_entry(pair, e)
                .expect("linear migration buffer reinsertion failed");
        }
    }

    /// Merge-style Robin Hood migration. The table is truly sorted by hash
    /// value, so elements stream in ascending order into their canonical
    /// positions; cells overtaken by the write cursor are held in a small
    /// lookahead queue. No element is ever reinserted.
    fn migrate_robinhood(&mut self, m_old: usize, m_new: usize) {
        // A run wrapping the old array end mixes spill from the largest
        // hashes with elements homed near cell 0. Pull the prefix out and
        // split it: wrapped spill (home past its position) streams last,
        // front-homed elements stream first.
        let mut wrapped: Vec<Entry> = Vec::new();
        let mut queue: VecDeque<Entry> = VecDeque::new();
        if !self.region.cells()[m_old - 1].is_empty() {
            let mut i = 0;
            while i < m_old && !self.region.cells()[i].is_empty() {
                let e = self.region.cells()[i];
                self.region.cells_mut()[i] = Entry::EMPTY;
                let home_old = scale(self.rehash(e.key).lo, m_old);
                if home_old > i {
                    wrapped.push(e);
                } else {
                    queue.push_back(e);
                }
                i += 1;
            }
        }

        // Canonical position overflow past the array end wraps to the front;
        // collect those (globally largest hashes) and splice them in last.
        let mut overflow: Vec<Entry> = Vec::new();
        let mut read = 0usize;
        let mut prev: Option<usize> = None;
        loop {
            let e = match queue.pop_front() {
                Some(e) => e,
                None => {
                    // Advance to the next occupied unread old cell.
                    let mut found = None;
                    while read < m_old {
                        let c = self.region.cells()[read];
                        self.region.cells_mut()[read] = Entry::EMPTY;
                        read += 1;
                        if !c.is_empty() {
                            found = Some(c);
                            break;
                        }
                    }
                    match found {
                        Some(c) => c,
                        None => break,
                    }
                }
            };
            Counters::bump(&self.counters.migrated_elements);
            let h = self.rehash(e.key).lo;
            let pos = scale(h, m_new).max(prev.map_or(0, |p| p + 1));
            if pos >= m_new {
                overflow.push(e);
                continue;
            }
            // Ingest every old cell up to the write position first.
            while read <= pos && read < m_old {
                let c = self.region.cells()[read];
                self.region.cells_mut()[read] = Entry::EMPTY;
                read += 1;
                if !c.is_empty() {
                    queue.push_back(c);
                }
            }
            debug_assert!(self.region.cells()[pos].is_empty());
            self.region.cells_mut()[pos] = e;
            prev = Some(pos);
        }

        // Wrapped old-table spill continues past the largest main-sweep
        // position.
        for e in wrapped {
            Counters::bump(&self.counters.migrated_elements);
            let h = self.rehash(e.key).lo;
            let pos = scale(h, m_new).max(prev.map_or(0, |p| p + 1));
            if pos < m_new {
                debug_assert!(self.region.cells()[pos].is_empty());
                self.region.cells_mut()[pos] = e;
                prev = Some(pos);
            } else {
                overflow.push(e);
            }
        }

        // Overflow wraps around: it belongs at the very front, ahead of the
        // elements homed there, exactly as cyclic probing would place it.
        // Shift-inserting keeps the run ordered without any re-probing.
        for (i, e) in overflow.into_iter().enumerate() {
            self.rh_shift_insert(i, e)
                .expect("wrapped run exceeds table capacity");
        }
    }

    fn migrate_cuckoo(&mut self, m_old: usize, m_new: usize) {
        let b = self.bucket_size;
        let nb_old = m_old / b;
        let nb_new = m_new / b;
        let h = self.family.h;
        let mut buffer: Vec<Entry> = Vec::new();
        let mut stash: Vec<Entry> = Vec::with_capacity(b);
        for bkt in (0..nb_old).rev() {
            stash.clear();
            for cell in 0..b {
                let e = self.region.cells()[bkt * b + cell];
                if e.is_empty() {
                    break;
                }
                stash.push(e);
                self.region.cells_mut()[bkt * b + cell] = Entry::EMPTY;
            }
            'elems: for &e in &stash {
                Counters::bump(&self.counters.migrated_elements);
                let pair = self.rehash(e.key);
                // Prefer the hash choice the element was stored under.
                let stored = (0..h)
                    .find(|&i| scale(self.family.derive(pair, i), nb_old) == bkt)
                    .expect("stored element has no matching bucket choice");
                let order =
                    std::iter::once(stored).chain((0..h).filter(move |&i| i != stored));
                for i in order {
                    let dest = scale(self.family.derive(pair, i), nb_new);
                    // Only buckets at or past the read cursor are migrated.
                    if dest >= bkt && self.bucket_free(dest) > 0 {
                        self.bucket_put(dest, e);
                        continue 'elems;
                    }
                }
                buffer.push(e);
            }
        }
        Counters::add(&self.counters.reinserted, buffer.len() as u64);
        for e in buffer {
            let pair = self.rehash(e.key);
            self.insert_entry(pair, e)
                .expect("cuckoo migration buffer reinsertion failed");
        }
    }

    #[inline]
    fn bucket_slice(&self, bkt: usize) -> &[Entry] {
        let b = self.bucket_size;
        &self.region.cells()[bkt * b..(bkt + 1) * b]
    }

    #[inline]
    fn bucket_occ(&self, bkt: usize) -> usize {
        self.bucket_slice(bkt)
            .iter()
            .take_while(|e| !e.is_empty())
            .count()
    }

    #[inline]
    fn bucket_free(&self, bkt: usize) -> usize {
        self.bucket_size - self.bucket_occ(bkt)
    }

    fn bucket_put(&mut self, bkt: usize, e: Entry) {
        let occ = self.bucket_occ(bkt);
        debug_assert!(occ < self.bucket_size);
        self.region.cells_mut()[bkt * self.bucket_size + occ] = e;
    }

    /// Place an entry without duplicate checking or growth; `n` untouched.
    fn insert_entry(&mut self, pair: HashPair, e: Entry) -> Result<(), TableError> {
        match self.scheme {
            FlatScheme::Linear => self.lp_place(pair, e),
            FlatScheme::RobinHood => self.rh_place(pair, e),
            FlatScheme::Cuckoo => self.bc_place(pair, e),
        }
    }

    // ----- linear probing -----

    fn lp_place(&mut self, pair: HashPair, e: Entry) -> Result<(), TableError> {
        let m = self.m();
        let mut p = scale(pair.lo, m);
        for _ in 0..m {
            if self.region.cells()[p].is_empty() {
                self.region.cells_mut()[p] = e;
                return Ok(());
            }
            p = (p + 1) % m;
        }
        Err(TableError::InsertFailed {
            load: self.load_factor(),
        })
    }

    fn lp_find(&self, pair: HashPair, key: u64) -> (Option<u64>, u64) {
        let m = self.m();
        let mut p = scale(pair.lo, m);
        let mut probed = 0u64;
        for _ in 0..m {
            let e = self.region.cells()[p];
            probed += 1;
            if e.is_empty() {
                return (None, probed);
            }
            if e.key == key {
                return (Some(e.value), probed);
            }
            p = (p + 1) % m;
        }
        (None, probed)
    }

    fn lp_erase(&mut self, pair: HashPair, key: u64) -> bool {
        let m = self.m();
        let mut p = scale(pair.lo, m);
        let mut found = false;
        for _ in 0..m {
            let e = self.region.cells()[p];
            if e.is_empty() {
                return false;
            }
            if e.key == key {
                found = true;
                break;
            }
            p = (p + 1) % m;
        }
        if !found {
            return false;
        }
        // Backward-shift deletion: move run elements into the hole whenever
        // their home lies outside the cyclic interval (hole, candidate].
        let mut hole = p;
        let mut j = p;
        let mut moves = 0u64;
        // Bounded to m−1 steps: a completely full table has no empty cell to
        // stop at, and after a full cycle every survivor has been considered.
        for _ in 1..m {
            j = (j + 1) % m;
            let e = self.region.cells()[j];
            if e.is_empty() {
                break;
            }
            let home = scale(self.rehash(e.key).lo, m);
            let movable = if j > hole {
                home <= hole || home > j
            } else {
                home <= hole && home > j
            };
            if movable {
                self.region.cells_mut()[hole] = e;
                hole = j;
                moves += 1;
            }
        }
        self.region.cells_mut()[hole] = Entry::EMPTY;
        Counters::add(&self.counters.displaced, moves);
        true
    }

    // ----- Robin Hood (truly sorted by hash value) -----

    /// Cyclic probe distance of a cell's occupant from its home.
    #[inline]
    fn rh_dib(&self, p: usize, home: usize) -> usize {
        let m = self.m();
        (p + m - home) % m
    }

    fn rh_place(&mut self, pair: HashPair, e: Entry) -> Result<(), TableError> {
        let m = self.m();
        let h = pair.lo;
        let mut p = scale(h, m);
        for d in 0..m {
            let c = self.region.cells()[p];
            if c.is_empty() {
                self.region.cells_mut()[p] = e;
                return Ok(());
            }
            let hc = self.rehash(c.key).lo;
            let dc = self.rh_dib(p, scale(hc, m));
            // Displace a richer run; ties (same home) stay hash-sorted, so
            // each run remains truly ordered by hash value.
            if dc < d || (dc == d && hc > h) {
                return self.rh_shift_insert(p, e);
            }
            p = (p + 1) % m;
        }
        Err(TableError::InsertFailed {
            load: self.load_factor(),
        })
    }

    /// Shift the occupied run starting at `p` one cell right and write `e`
    /// at `p`. Fails only when the table has no empty cell.
    fn rh_shift_insert(&mut self, p: usize, e: Entry) -> Result<(), TableError> {
        let m = self.m();
        let mut q = p;
        let mut steps = 0usize;
        while !self.region.cells()[q].is_empty() {
            q = (q + 1) % m;
            steps += 1;
            if steps > m {
                return Err(TableError::InsertFailed {
                    load: self.load_factor(),
                });
            }
        }
        // Move [p, q) right by one, from the back.
        let mut moves = 0u64;
        while q != p {
            let prev = if q == 0 { m - 1 } else { q - 1 };
            let c = self.region.cells()[prev];
            self.region.cells_mut()[q] = c;
            q = prev;
            moves += 1;
        }
        self.region.cells_mut()[p] = e;
        Counters::add(&self.counters.displaced, moves);
        Ok(())
    }

    fn rh_find(&self, pair: HashPair, key: u64) -> (Option<u64>, u64) {
        let m = self.m();
        let h = pair.lo;
        let mut p = scale(h, m);
        let mut probed = 0u64;
        for d in 0..m {
            let e = self.region.cells()[p];
            probed += 1;
            if e.is_empty() {
                return (None, probed);
            }
            if e.key == key {
                return (Some(e.value), probed);
            }
            // Run ordering lets unsuccessful finds stop as soon as the key
            // would have been placed before the probed cell.
            let hc = self.rehash(e.key).lo;
            let dc = self.rh_dib(p, scale(hc, m));
            if dc < d || (dc == d && hc > h) {
                return (None, probed);
            }
            p = (p + 1) % m;
        }
        (None, probed)
    }

    fn rh_erase(&mut self, pair: HashPair, key: u64) -> bool {
        let m = self.m();
        let h = pair.lo;
        let mut p = scale(h, m);
        let mut found = false;
        for d in 0..m {
            let e = self.region.cells()[p];
            if e.is_empty() {
                return false;
            }
            if e.key == key {
                found = true;
                break;
            }
            let hc = self.rehash(e.key).lo;
            let dc = self.rh_dib(p, scale(hc, m));
            if dc < d || (dc == d && hc > h) {
                return false;
            }
            p = (p + 1) % m;
        }
        if !found {
            return false;
        }
        // Back-shift the rest of the run while elements sit past their home;
        // preserves sortedness.
        let mut moves = 0u64;
        for _ in 1..m {
            let next = (p + 1) % m;
            let e = self.region.cells()[next];
            if e.is_empty() {
                break;
            }
            let home = scale(self.rehash(e.key).lo, m);
            if home == next {
                break;
            }
            self.region.cells_mut()[p] = e;
            p = next;
            moves += 1;
        }
        self.region.cells_mut()[p] = Entry::EMPTY;
        Counters::add(&self.counters.displaced, moves);
        true
    }

    // ----- bucket cuckoo -----

    fn bc_choices(&self, pair: HashPair) -> ([usize; MAX_H], usize) {
        let nb = self.num_buckets();
        let h = self.family.h as usize;
        let mut refs = [0usize; MAX_H];
        for (i, slot) in refs.iter_mut().enumerate().take(h) {
            *slot = scale(self.family.derive(pair, i as u32), nb);
        }
        (refs, h)
    }

    fn bc_place(&mut self, pair: HashPair, e: Entry) -> Result<(), TableError> {
        loop {
            let (refs, h) = self.bc_choices(pair);
            let mut best = 0usize;
            let mut best_free = 0usize;
            for (i, &r) in refs[..h].iter().enumerate() {
                let free = self.bucket_free(r);
                if free > best_free {
                    best_free = free;
                    best = i;
                }
            }
            if best_free > 0 {
                self.bucket_put(refs[best], e);
                return Ok(());
            }
            Counters::bump(&self.counters.searches);
            let result = match self.strategy {
                DisplacementStrategy::Bfs => match bfs_path(self, &refs[..h], self.max_probes) {
                    Ok(path) => {
                        let moves = apply_path(self, &path);
                        let target = path.last().expect("nonempty path").from;
                        self.bucket_put(target, e);
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
                    let r =
                        random_walk_insert(self, e, &refs[..h], self.max_probes, variant, &mut rng);
                    self.rng = rng;
                    r
                }
            };
            match result {
                Ok(moves) => {
                    Counters::add(&self.counters.displaced, moves);
                    return Ok(());
                }
                Err(SearchExhausted) => {
                    if self.growth_allowed && !self.full_migration {
                        self.grow_to(self.growth_target());
                        continue;
                    }
                    return Err(TableError::InsertFailed {
                        load: self.load_factor(),
                    });
                }
            }
        }
    }

    fn bc_find(&self, pair: HashPair, key: u64) -> (Option<u64>, u64) {
        let (refs, h) = self.bc_choices(pair);
        let mut probed = 0u64;
        for &r in &refs[..h] {
            for e in self.bucket_slice(r) {
                if e.is_empty() {
                    break;
                }
                probed += 1;
                if e.key == key {
                    return (Some(e.value), probed);
                }
            }
        }
        (None, probed.max(1))
    }

    fn bc_erase(&mut self, pair: HashPair, key: u64) -> bool {
        let (refs, h) = self.bc_choices(pair);
        let b = self.bucket_size;
        for &r in &refs[..h] {
            let occ = self.bucket_occ(r);
            let cells = &mut self.region.cells_mut()[r * b..(r + 1) * b];
            if let Some(pos) = cells[..occ].iter().position(|e| e.key == key) {
                cells[pos] = cells[occ - 1];
                cells[occ - 1] = Entry::EMPTY;
                return true;
            }
        }
        false
    }

    // ----- pair-level entry points (shared with the subtable variants) -----

    pub(crate) fn insert_with_pair(
        &mut self,
        pair: HashPair,
        key: u64,
        value: u64,
    ) -> Result<Inserted, TableError> {
        let (existing, probed) = match self.scheme {
            FlatScheme::Linear => self.lp_find(pair, key),
            FlatScheme::RobinHood => self.rh_find(pair, key),
            FlatScheme::Cuckoo => self.bc_find(pair, key),
        };
        Counters::add(&self.counters.probes, probed);
        if let Some(v) = existing {
            return Ok(Inserted::Existing(v));
        }
        self.insert_entry(pair, Entry::new(key, value))?;
        self.n += 1;
        Ok(Inserted::New)
    }

    pub(crate) fn find_with_pair(&self, pair: HashPair, key: u64) -> Option<u64> {
        let (found, probed) = match self.scheme {
            FlatScheme::Linear => self.lp_find(pair, key),
            FlatScheme::RobinHood => self.rh_find(pair, key),
            FlatScheme::Cuckoo => self.bc_find(pair, key),
        };
        Counters::add(&self.counters.probes, probed);
        Counters::raise_max(&self.counters.max_find_probes, probed);
        found
    }

    pub(crate) fn erase_with_pair(&mut self, pair: HashPair, key: u64) -> bool {
        let erased = match self.scheme {
            FlatScheme::Linear => self.lp_erase(pair, key),
            FlatScheme::RobinHood => self.rh_erase(pair, key),
            FlatScheme::Cuckoo => self.bc_erase(pair, key),
        };
        if erased {
            self.n -= 1;
        }
        erased
    }

    pub(crate) fn stored_len(&self) -> usize {
        self.n
    }

    pub(crate) fn stored_cells(&self) -> usize {
        self.m()
    }

    pub(crate) fn audit_flat(&self) -> Result<(), String> {
        let m = self.m();
        let mut count = 0usize;
        match self.scheme {
            FlatScheme::Linear | FlatScheme::RobinHood => {
                // (unwrapped home offset, hash) of the previous run element.
                let mut prev: Option<(isize, u32)> = None;
                let mut run_start = 0isize;
                // Start scanning after an empty cell so runs are whole.
                let start = self.region.cells().iter().position(|e| e.is_empty());
                let start = match start {
                    // A completely full table has no run boundaries left to
                    // anchor the order checks on.
                    Some(s) => s,
                    None if self.n == m => return Ok(()),
                    None => return Err("no empty cell but n < m".into()),
                };
                for off in 0..m as isize {
                    let p = (start + off as usize) % m;
                    let e = self.region.cells()[p];
                    if e.is_empty() {
                        prev = None;
                        run_start = off + 1;
                        continue;
                    }
                    count += 1;
                    let h = self.pair_of(e.key).lo;
                    let home = scale(h, m);
                    let dib = (p + m - home) % m;
                    // Reachability: the home may not lie past the run start.
                    let uhome = off - dib as isize;
                    if uhome < run_start {
                        return Err(format!(
                            "key {:#x} at {p}: home {home} outside its run",
                            e.key
                        ));
                    }
                    if self.scheme == FlatScheme::RobinHood {
                        // Runs are ordered by home, ties sorted by hash —
                        // i.e. truly sorted by hash value along the run.
                        if let Some((puh, ph)) = prev {
                            if uhome < puh || (uhome == puh && h < ph) {
                                return Err(format!(
                                    "run order violated at cell {p}: {h:#x} after {ph:#x}"
                                ));
                            }
                        }
                        prev = Some((uhome, h));
                    }
                }
            }
            FlatScheme::Cuckoo => {
                for bkt in 0..self.num_buckets() {
                    let cells = self.bucket_slice(bkt);
                    let occ = cells.iter().take_while(|e| !e.is_empty()).count();
                    if cells[occ..].iter().any(|e| !e.is_empty()) {
                        return Err(format!("bucket {bkt} not prefix-compacted"));
                    }
                    for e in &cells[..occ] {
                        count += 1;
                        let pair = self.pair_of(e.key);
                        let (refs, h) = self.bc_choices(pair);
                        if !refs[..h].contains(&bkt) {
                            return Err(format!(
                                "key {:#x} in bucket {bkt}, not one of its choices",
                                e.key
                            ));
                        }
                    }
                }
            }
        }
        if count != self.n {
            return Err(format!("stored {count} elements but n = {}", self.n));
        }
        Ok(())
    }
}

impl BucketSpace for FlatTable {
    type Ref = usize;

    #[inline]
    fn num_choices(&self) -> u32 {
        self.family.h
    }

    fn choices(&self, key: u64, out: &mut Vec<usize>) {
        let pair = self.rehash(key);
        let nb = self.num_buckets();
        out.clear();
        for i in 0..self.family.h {
            out.push(scale(self.family.derive(pair, i), nb));
        }
    }

    #[inline]
    fn entries(&self, r: usize) -> &[Entry] {
        let occ = self.bucket_occ(r);
        &self.bucket_slice(r)[..occ]
    }

    #[inline]
    fn free_slots(&self, r: usize) -> usize {
        self.bucket_free(r)
    }

    fn take(&mut self, r: usize, key: u64) -> Entry {
        let occ = self.bucket_occ(r);
        let b = self.bucket_size;
        let cells = &mut self.region.cells_mut()[r * b..(r + 1) * b];
        let pos = cells[..occ]
            .iter()
            .position(|e| e.key == key)
            .expect("take: key not in bucket");
        let e = cells[pos];
        cells[pos] = cells[occ - 1];
        cells[occ - 1] = Entry::EMPTY;
        e
    }

    fn put(&mut self, r: usize, e: Entry) {
        self.bucket_put(r, e);
    }

    fn swap_cell(&mut self, r: usize, cell: usize, e: Entry) -> Entry {
        let b = self.bucket_size;
        let slot = &mut self.region.cells_mut()[r * b + cell];
        let old = *slot;
        *slot = e;
        old
    }

    #[inline]
    fn prefetch(&self, r: usize) {
        #[cfg(target_arch = "x86_64")]
        unsafe {
            use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
            let p = self.bucket_slice(r).as_ptr() as *const i8;
            _mm_prefetch(p, _MM_HINT_T0);
            _mm_prefetch(p.add(64), _MM_HINT_T0);
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = r;
    }
}

impl Table for FlatTable {
    fn insert(&mut self, key: u64, value: u64) -> Result<Inserted, TableError> {
        if key == EMPTY_KEY {
            return Err(TableError::InvalidKey(key));
        }
        if self.growth_allowed && self.grow_mode == GrowMode::Eager && self.needs_growth() {
            self.grow_to(self.growth_target());
        }
        Counters::bump(&self.counters.hash_evals);
        let pair = self.pair_of(key);
        loop {
            match self.insert_with_pair(pair, key, value) {
                Err(TableError::InsertFailed { .. }) if self.growth_allowed => {
                    self.grow_to(self.growth_target());
                }
                other => return other,
            }
        }
    }

    fn find(&self, key: u64) -> Option<u64> {
        Counters::bump(&self.counters.hash_evals);
        let pair = self.pair_of(key);
        self.find_with_pair(pair, key)
    }

    fn erase(&mut self, key: u64) -> bool {
        Counters::bump(&self.counters.hash_evals);
        let pair = self.pair_of(key);
        self.erase_with_pair(pair, key)
    }

    fn len(&self) -> usize {
        self.n
    }

    fn cells(&self) -> usize {
        self.m()
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn growth_log(&self) -> &[GrowEvent] {
        &self.growth_log
    }

    fn kind(&self) -> TableKind {
        match self.scheme {
            FlatScheme::Linear => TableKind::Linear,
            FlatScheme::RobinHood => TableKind::RobinHood,
            FlatScheme::Cuckoo => TableKind::Cuckoo,
        }
    }

    fn audit(&self) -> Result<(), String> {
        self.audit_flat()
    }

    fn space_bound(&self) -> Option<f64> {
        if self.growth_log.is_empty() || self.full_migration {
            return None;
        }
        Some(self.n as f64 / self.delta_min + self.bucket_size as f64)
    }
}
