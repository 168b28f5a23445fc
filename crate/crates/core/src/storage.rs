//! Cell storage behind the tables: a growable region of `Entry` cells.
//!
//! Two backends share one interface. `Heap` is the portable default: a plain
//! allocation that is reallocated (contents preserved at their indices) on
//! growth. `Reserved` (feature `reserved`) maps one large virtual reservation
//! up front and grows by committing pages in place, so growth never needs a
//! second copy of the data. Where the reservation cannot be created the
//! region silently degrades to the heap backend.

use crate::entry::Entry;

/// Which backing strategy a region (and hence a table) uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageBackend {
    /// Own allocation per region, reallocate-and-copy on growth.
    #[default]
    Heap,
    /// One large virtual reservation, committed in place on growth.
    /// Requires the `reserved` feature; degrades to `Heap` otherwise.
    Reserved,
}

#[derive(Debug)]
pub struct Region {
    inner: Inner,
}

#[derive(Debug)]
enum Inner {
    Heap(Vec<Entry>),
    #[cfg(feature = "reserved")]
    Reserved(reserved::Reservation),
}

impl Region {
    /// A region of `len` empty cells. `reserve_hint` bounds how large the
    /// region may ever grow (only meaningful for the reserved backend).
    pub fn new(backend: StorageBackend, len: usize, reserve_hint: usize) -> Region {
        match backend {
            StorageBackend::Heap => Region::heap(len),
            StorageBackend::Reserved => Region::reserved(len, reserve_hint),
        }
    }

    fn heap(len: usize) -> Region {
        Region {
            inner: Inner::Heap(vec![Entry::EMPTY; len]),
        }
    }

    #[cfg(feature = "reserved")]
    fn reserved(len: usize, reserve_hint: usize) -> Region {
        match reserved::Reservation::new(len, reserve_hint.max(len)) {
            Some(r) => Region {
                inner: Inner::Reserved(r),
            },
            None => Region::heap(len),
        }
    }

    #[cfg(not(feature = "reserved"))]
    fn reserved(len: usize, _reserve_hint: usize) -> Region {
        Region::heap(len)
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn backend(&self) -> StorageBackend {
        match self.inner {
            Inner::Heap(_) => StorageBackend::Heap,
            #[cfg(feature = "reserved")]
            Inner::Reserved(_) => StorageBackend::Reserved,
        }
    }

    pub fn len(&self) -> usize {
        match &self.inner {
            Inner::Heap(v) => v.len(),
            #[cfg(feature = "reserved")]
            Inner::Reserved(r) => r.len(),
        }
    }

    /// Grow to `new_len` cells. Existing cells keep their indices and
    /// contents; new cells are empty.
    pub fn grow_to(&mut self, new_len: usize) {
        assert!(new_len >= self.len());
        match &mut self.inner {
            Inner::Heap(v) => v.resize(new_len, Entry::EMPTY),
            #[cfg(feature = "reserved")]
            Inner::Reserved(r) => {
                if !r.grow_to(new_len) {
                    // Reservation exhausted; fall back to the heap.
                    let mut v = vec![Entry::EMPTY; new_len];
                    v[..r.len()].copy_from_slice(r.cells());
                    self.inner = Inner::Heap(v);
                }
            }
        }
    }

    /// Shrink to `new_len` cells, discarding the tail.
    pub fn shrink_to(&mut self, new_len: usize) {
        assert!(new_len <= self.len());
        match &mut self.inner {
            Inner::Heap(v) => v.truncate(new_len),
            #[cfg(feature = "reserved")]
            Inner::Reserved(r) => r.shrink_to(new_len),
        }
    }

    #[inline]
    pub fn cells(&self) -> &[Entry] {
        match &self.inner {
            Inner::Heap(v) => v,
            #[cfg(feature = "reserved")]
            Inner::Reserved(r) => r.cells(),
        }
    }

    #[inline]
    pub fn cells_mut(&mut self) -> &mut [Entry] {
        match &mut self.inner {
            Inner::Heap(v) => v,
            #[cfg(feature = "reserved")]
            Inner::Reserved(r) => r.cells_mut(),
        }
    }
}

#[cfg(feature = "reserved")]
mod reserved {
    use super::Entry;

    /// A PROT_NONE reservation of `cap` cells with the first `len` committed.
    #[derive(Debug)]
    pub struct Reservation {
        base: *mut Entry,
        len: usize,
        cap: usize,
    }

    // Single-owner raw region; &Reservation only hands out &[Entry].
    unsafe impl Send for Reservation {}
    unsafe impl Sync for Reservation {}

    const CELL: usize = std::mem::size_of::<Entry>();

    fn page_round(bytes: usize) -> usize {
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) } as usize;
        (bytes + page - 1) / page * page
    }

    impl Reservation {
        pub fn new(len: usize, cap: usize) -> Option<Reservation> {
            let bytes = page_round(cap.max(1) * CELL);
            let base = unsafe {
                libc::mmap(
                    std::ptr::null_mut(),
                    bytes,
                    libc::PROT_NONE,
                    libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
                    -1,
                    0,
                )
            };
            if base == libc::MAP_FAILED {
                return None;
            }
            let mut r = Reservation {
                base: base as *mut Entry,
                len: 0,
                cap: bytes / CELL,
            };
            if !r.grow_to(len) {
                return None;
            }
            Some(r)
        }

        pub fn len(&self) -> usize {
            self.len
        }

        /// Commit pages up to `new_len` cells and fill them with empties.
        /// Returns false if the reservation is too small.
        pub fn grow_to(&mut self, new_len: usize) -> bool {
            if new_len > self.cap {
                return false;
            }
            let old_bytes = page_round(self.len * CELL);
            let new_bytes = page_round(new_len * CELL);
            if new_bytes > old_bytes {
                let ok = unsafe {
                    libc::mprotect(
                        (self.base as *mut u8).add(old_bytes) as *mut libc::c_void,
                        new_bytes - old_bytes,
                        libc::PROT_READ | libc::PROT_WRITE,
                    )
                };
                if ok != 0 {
                    return false;
                }
            }
            let old_len = self.len;
            self.len = new_len;
            for cell in &mut self.cells_mut()[old_len..] {
                *cell = Entry::EMPTY;
            }
            true
        }

        pub fn shrink_to(&mut self, new_len: usize) {
            let keep_bytes = page_round(new_len * CELL);
            let old_bytes = page_round(self.len * CELL);
            if old_bytes > keep_bytes {
                unsafe {
                    libc::madvise(
                        (self.base as *mut u8).add(keep_bytes) as *mut libc::c_void,
                        old_bytes - keep_bytes,
                        libc::MADV_DONTNEED,
                    );
                }
            }
            self.len = new_len;
        }

        #[inline]
        pub fn cells(&self) -> &[Entry] {
            unsafe { std::slice::from_raw_parts(self.base, self.len) }
        }

        #[inline]
        pub fn cells_mut(&mut self) -> &mut [Entry] {
            unsafe { std::slice::from_raw_parts_mut(self.base, self.len) }
        }
    }

    impl Drop for Reservation {
        fn drop(&mut self) {
            unsafe {
                libc::munmap(self.base as *mut libc::c_void, page_round(self.cap * CELL));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(backend: StorageBackend) {
        let mut r = Region::new(backend, 4, 1 << 16);
        if backend == StorageBackend::Heap || !cfg!(feature = "reserved") {
            // Reserved requests degrade to the heap without the feature.
            assert_eq!(r.backend(), StorageBackend::Heap);
        } else {
            assert_eq!(r.backend(), StorageBackend::Reserved);
        }
        assert_eq!(r.len(), 4);
        assert!(r.cells().iter().all(|e| e.is_empty()));
        r.cells_mut()[1] = Entry::new(7, 9);
        r.grow_to(1000);
        assert_eq!(r.len(), 1000);
        assert_eq!(r.cells()[1], Entry::new(7, 9));
        assert!(r.cells()[2..].iter().all(|e| e.is_empty()));
        r.shrink_to(2);
        assert_eq!(r.len(), 2);
        assert_eq!(r.cells()[1], Entry::new(7, 9));
        // Regrown cells come back empty.
        r.grow_to(8);
        assert!(r.cells()[2..].iter().all(|e| e.is_empty()));
    }

    #[test]
    fn heap_region() {
        exercise(StorageBackend::Heap);
    }

    #[test]
    fn reserved_region_or_fallback() {
        exercise(StorageBackend::Reserved);
    }
}
