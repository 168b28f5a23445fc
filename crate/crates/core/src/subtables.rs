//! Subtable + full migration competitors: a key is routed to one of T flat
//! tables by the top bits of its hash, and a subtable that exceeds its load
//! threshold is rebuilt from scratch into a fresh allocation. Cheap to
//! implement, but every rebuild transiently needs the old and the new
//! subtable at once, and every stored element is rehashed and reinserted.

use std::sync::Arc;

use crate::counters::Counters;
use crate::entry::EMPTY_KEY;
use crate::flat::{FlatScheme, FlatTable};
use crate::hashing::{HashFamily, HashPair};
use crate::table::{GrowEvent, GrowMode, Inserted, Table, TableError, TableKind, TableParams};

#[derive(Debug)]
pub struct SubtableVariant {
    scheme: FlatScheme,
    family: HashFamily,
    t_bits: u32,
    grow_mode: GrowMode,
    growth_allowed: bool,
    inner: Vec<FlatTable>,
    counters: Arc<Counters>,
    growth_log: Vec<GrowEvent>,
}

impl SubtableVariant {
    pub fn new(scheme: FlatScheme, params: &TableParams) -> SubtableVariant {
        let t = params.num_subtables;
        assert!(t.is_power_of_two(), "subtable count must be a power of two");
        let t_bits = t.trailing_zeros();
        let counters = Arc::new(Counters::default());
        let inner_params = TableParams {
            capacity: (params.capacity / t).max(2),
            growth_allowed: false,
            ..*params
        };
        let inner = (0..t)
            .map(|_| {
                FlatTable::with_counters(
                    scheme,
                    &inner_params,
                    Arc::clone(&counters),
                    t_bits,
                    true,
                )
            })
            .collect::<Vec<_>>();
        let total: usize = inner.iter().map(|s| s.stored_cells()).sum();
        Counters::raise_max(&counters.peak_cells, total as u64);
        SubtableVariant {
            scheme,
            family: HashFamily::new(params.seed, params.hash_choices.max(2)),
            t_bits,
            grow_mode: params.grow_mode,
            growth_allowed: params.growth_allowed,
            inner,
            counters,
            growth_log: Vec::new(),
        }
    }

    #[inline]
    fn route(&self, pair: HashPair) -> (usize, HashPair) {
        let idx = if self.t_bits == 0 {
            0
        } else {
            (pair.lo >> (32 - self.t_bits)) as usize
        };
        let rotated = HashPair {
            lo: pair.lo.rotate_left(self.t_bits),
            hi: pair.hi,
        };
        (idx, rotated)
    }

    fn grow_subtable(&mut self, idx: usize) {
        let others: usize = self
            .inner
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, s)| s.stored_cells())
            .sum();
        let m_before = (others + self.inner[idx].stored_cells()) as u64;
        let target = self.inner[idx].growth_target();
        self.inner[idx].grow_to(target);
        // Transient peak: every other subtable plus both copies of this one.
        Counters::raise_max(&self.counters.peak_cells, m_before + target as u64);
        self.growth_log.push(GrowEvent {
            n: self.len() as u64,
            m_before,
            m_after: (others + self.inner[idx].stored_cells()) as u64,
        });
    }
}

impl Table for SubtableVariant {
    fn insert(&mut self, key: u64, value: u64) -> Result<Inserted, TableError> {
        if key == EMPTY_KEY {
            return Err(TableError::InvalidKey(key));
        }
        Counters::bump(&self.counters.hash_evals);
        let (idx, pair) = self.route(self.family.pair(key));
        if self.growth_allowed
            && self.grow_mode == GrowMode::Eager
            && self.inner[idx].needs_growth()
        {
            self.grow_subtable(idx);
        }
        loop {
            match self.inner[idx].insert_with_pair(pair, key, value) {
                Err(TableError::InsertFailed { .. }) if self.growth_allowed => {
                    self.grow_subtable(idx);
                }
                other => return other,
            }
        }
    }

    fn find(&self, key: u64) -> Option<u64> {
        Counters::bump(&self.counters.hash_evals);
        let (idx, pair) = self.route(self.family.pair(key));
        self.inner[idx].find_with_pair(pair, key)
    }

    fn erase(&mut self, key: u64) -> bool {
        Counters::bump(&self.counters.hash_evals);
        let (idx, pair) = self.route(self.family.pair(key));
        self.inner[idx].erase_with_pair(pair, key)
    }

    fn len(&self) -> usize {
        self.inner.iter().map(|s| s.stored_len()).sum()
    }

    fn cells(&self) -> usize {
        self.inner.iter().map(|s| s.stored_cells()).sum()
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn growth_log(&self) -> &[GrowEvent] {
        &self.growth_log
    }

    fn kind(&self) -> TableKind {
        match self.scheme {
            FlatScheme::Linear => TableKind::LinearSub,
            FlatScheme::RobinHood => TableKind::RobinHoodSub,
            FlatScheme::Cuckoo => TableKind::CuckooSub,
        }
    }

    fn audit(&self) -> Result<(), String> {
        for (i, sub) in self.inner.iter().enumerate() {
            sub.audit_flat().map_err(|e| format!("subtable {i}: {e}"))?;
        }
        Ok(())
    }
}
