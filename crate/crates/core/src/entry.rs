/// Reserved key encoding the empty cell. `insert` rejects it.
pub const EMPTY_KEY: u64 = u64::MAX;

/// A 128-bit closed-hashing element: 64-bit key, 64-bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(C)]
pub struct Entry {
    pub key: u64,
    pub value: u64,
}

impl Entry {
    pub const EMPTY: Entry = Entry {
        key: EMPTY_KEY,
        value: 0,
    };

    #[inline]
    pub fn new(key: u64, value: u64) -> Self {
        Entry { key, value }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.key == EMPTY_KEY
    }
}
