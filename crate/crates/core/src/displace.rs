//! Displacement search over the implicit cuckoo graph, shared between the
//! DySECT table and the flat bucket cuckoo table.
//!
//! Buckets are nodes; every stored element is an edge from its bucket to its
//! alternate buckets. Insertion into `H` full buckets means finding a path to
//! a bucket with free capacity and moving elements back along it.

use crate::entry::Entry;

/// The displacement search ran out of its probe budget (or of reachable
/// buckets) without finding free capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchExhausted;

/// A bucket-graph view of a cuckoo table, enough for displacement searches.
///
/// `choices` re-hashes a stored key and must be counted by the implementor
/// (one hash evaluation per call).
pub trait BucketSpace {
    type Ref: Copy + PartialEq + std::fmt::Debug;

    /// Number of bucket choices per element.
    fn num_choices(&self) -> u32;
    /// The element's H buckets, in choice order, written into `out`.
    fn choices(&self, key: u64, out: &mut Vec<Self::Ref>);
    /// Occupied entries of a bucket as a slice (compacted prefix).
    fn entries(&self, b: Self::Ref) -> &[Entry];
    /// Free cells remaining in a bucket.
    fn free_slots(&self, b: Self::Ref) -> usize;
    /// Remove the entry with `key` from bucket `b` (must be present).
    fn take(&mut self, b: Self::Ref, key: u64) -> Entry;
    /// Append an entry to bucket `b` (must have a free cell).
    fn put(&mut self, b: Self::Ref, e: Entry);
    /// Overwrite the occupied cell `cell` of bucket `b`, returning the old
    /// entry. Used by the optimistic random walk.
    fn swap_cell(&mut self, b: Self::Ref, cell: usize, e: Entry) -> Entry;
    /// Hint that bucket `b` is about to be read; lets searches overlap the
    /// cache misses of a whole frontier layer.
    fn prefetch(&self, _b: Self::Ref) {}
}

/// One hop of a displacement path: move the entry holding `key` from bucket
/// `from` into bucket `to`. Paths are returned in commit order (the hop that
/// targets the free bucket first).
#[derive(Debug, Clone, Copy)]
pub struct Hop<R> {
    pub from: R,
    pub to: R,
    pub key: u64,
}

struct Node<R> {
    bucket: R,
    parent: usize,
    /// Key of the parent-bucket element whose alternate this node is.
    via_key: u64,
}

const NO_PARENT: usize = usize::MAX;

/// Breadth-first search for a shortest-in-layers displacement path.
///
/// Examines at most `max_probes` buckets; never mutates the table. On
/// success the returned hops, applied in order via [`apply_path`], free one
/// cell in one of the `starts` buckets.
pub fn bfs_path<S: BucketSpace>(
    space: &S,
    starts: &[S::Ref],
    max_probes: u64,
) -> Result<Vec<Hop<S::Ref>>, SearchExhausted> {
    let mut nodes: Vec<Node<S::Ref>> = starts
        .iter()
        .map(|&b| Node {
            bucket: b,
            parent: NO_PARENT,
            via_key: 0,
        })
        .collect();
    let mut probes = starts.len() as u64;
    let mut choice_buf = Vec::with_capacity(space.num_choices() as usize);
    let mut frontier: Vec<(u64, S::Ref)> = Vec::new();
    let mut head = 0;
    while head < nodes.len() {
        let bucket = nodes[head].bucket;
        // Gather and prefetch the whole child layer of this bucket before
        // probing it, so the (random) bucket reads overlap.
        frontier.clear();
        for cell in 0..space.entries(bucket).len() {
            let e = space.entries(bucket)[cell];
            space.choices(e.key, &mut choice_buf);
            for &target in &choice_buf {
                if target == bucket {
                    continue;
                }
                space.prefetch(target);
                frontier.push((e.key, target));
            }
        }
        for &(key, target) in &frontier {
            probes += 1;
            if probes > max_probes {
                return Err(SearchExhausted);
            }
            if space.free_slots(target) > 0 {
                // Found: path is root → … → nodes[head] → target.
                let mut hops = vec![Hop {
                    from: bucket,
                    to: target,
                    key,
                }];
                let mut at = head;
                while nodes[at].parent != NO_PARENT {
                    hops.push(Hop {
                        from: nodes[nodes[at].parent].bucket,
                        to: nodes[at].bucket,
                        key: nodes[at].via_key,
                    });
                    at = nodes[at].parent;
                }
                return Ok(hops);
            }
            nodes.push(Node {
                bucket: target,
                parent: head,
                via_key: key,
            });
        }
        head += 1;
    }
    Err(SearchExhausted)
}

/// Apply a path returned by [`bfs_path`]. Returns the number of moves.
pub fn apply_path<S: BucketSpace>(space: &mut S, hops: &[Hop<S::Ref>]) -> u64 {
    for hop in hops {
        debug_assert!(space.free_slots(hop.to) > 0);
        let e = space.take(hop.from, hop.key);
        space.put(hop.to, e);
    }
    hops.len() as u64
}

/// Random-walk variants. `Optimistic` commits each eviction immediately and
/// unrolls the walk on failure; `Pessimistic` walks without mutating and
/// commits only when a free cell is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkVariant {
    Optimistic,
    Pessimistic,
}

/// Random-walk displacement that also places `new_entry` on success.
///
/// All `starts` buckets must be full. On failure the table is restored to
/// its pre-call state for both variants.
pub fn random_walk_insert<S: BucketSpace, R: rand::Rng>(
    space: &mut S,
    new_entry: Entry,
    starts: &[S::Ref],
    max_steps: u64,
    variant: WalkVariant,
    rng: &mut R,
) -> Result<u64, SearchExhausted> {
    match variant {
        WalkVariant::Optimistic => walk_optimistic(space, new_entry, starts, max_steps, rng),
        WalkVariant::Pessimistic => walk_pessimistic(space, new_entry, starts, max_steps, rng),
    }
}

fn walk_optimistic<S: BucketSpace, R: rand::Rng>(
    space: &mut S,
    new_entry: Entry,
    starts: &[S::Ref],
    max_steps: u64,
    rng: &mut R,
) -> Result<u64, SearchExhausted> {
    // Journal of (bucket, cell, displaced, written) for unrolling.
    let mut journal: Vec<(S::Ref, usize, Entry, Entry)> = Vec::new();
    let mut choice_buf = Vec::with_capacity(space.num_choices() as usize);

    let start = starts[rng.gen_range(0..starts.len())];
    let cell = rng.gen_range(0..space.entries(start).len());
    let mut current = space.swap_cell(start, cell, new_entry);
    journal.push((start, cell, current, new_entry));
    let mut came_from = start;

    for step in 1..=max_steps {
        space.choices(current.key, &mut choice_buf);
        if let Some(&free) = choice_buf.iter().find(|&&b| space.free_slots(b) > 0) {
            space.put(free, current);
            return Ok(step);
        }
        // Avoid bouncing straight back where we just evicted from.
        let options: Vec<S::Ref> = choice_buf
            .iter()
            .copied()
            .filter(|&b| b != came_from)
            .collect();
        let target = if options.is_empty() {
            came_from
        } else {
            options[rng.gen_range(0..options.len())]
        };
        let cell = rng.gen_range(0..space.entries(target).len());
        let evicted = space.swap_cell(target, cell, current);
        journal.push((target, cell, evicted, current));
        came_from = target;
        current = evicted;
    }

    // Budget exhausted: unroll the walk in reverse so the table is unchanged.
    for (bucket, cell, displaced, written) in journal.into_iter().rev() {
        let undone = space.swap_cell(bucket, cell, displaced);
        debug_assert_eq!(undone.key, written.key);
    }
    Err(SearchExhausted)
}

fn walk_pessimistic<S: BucketSpace, R: rand::Rng>(
    space: &mut S,
    new_entry: Entry,
    starts: &[S::Ref],
    max_steps: u64,
    rng: &mut R,
) -> Result<u64, SearchExhausted> {
    // Virtual chain: new_entry evicts chain[0].entry, which evicts
    // chain[1].entry, … ; last chain entry moves to `free`.
    let mut chain: Vec<(S::Ref, Entry)> = Vec::new();
    let mut choice_buf = Vec::with_capacity(space.num_choices() as usize);

    let start = starts[rng.gen_range(0..starts.len())];
    let mut at = start;
    let mut current = new_entry;

    for step in 1..=max_steps {
        space.choices(current.key, &mut choice_buf);
        let from = at;
        if let Some(&free) = choice_buf
            .iter()
            .find(|&&b| b != from && space.free_slots(b) > 0)
        {
            // Commit in reverse: pull the chain forward one bucket each.
            let mut dest = free;
            let mut moves = 0u64;
            for &(bucket, entry) in chain.iter().rev() {
                let e = space.take(bucket, entry.key);
                debug_assert_eq!(e.key, entry.key);
                space.put(dest, e);
                dest = bucket;
                moves += 1;
            }
            debug_assert!(space.free_slots(dest) > 0 || chain.is_empty());
            space.put(if chain.is_empty() { free } else { dest }, new_entry);
            return Ok(step + moves);
        }
        // Walk on without mutating: pick a victim not already in the chain.
        let options: Vec<S::Ref> = choice_buf.iter().copied().filter(|&b| b != from).collect();
        let target = if options.is_empty() {
            from
        } else {
            options[rng.gen_range(0..options.len())]
        };
        let entries = space.entries(target);
        let mut victim = entries[rng.gen_range(0..entries.len())];
        if chain.iter().any(|(_, e)| e.key == victim.key) {
            // Re-pick once; if still a repeat, give this step up.
            victim = entries[rng.gen_range(0..entries.len())];
            if chain.iter().any(|(_, e)| e.key == victim.key) {
                continue;
            }
        }
        chain.push((target, victim));
        at = target;
        current = victim;
        let _ = step;
    }
    Err(SearchExhausted)
}
