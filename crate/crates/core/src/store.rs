//! Deduplicating store of canonical keys.
//!
//! Keys have a fixed length per store and are appended to one contiguous
//! arena in insertion order; an open-addressing table of arena indices
//! provides lookup. Insertion order doubles as the breadth-first queue.

use crate::key::{decode_trusted, KeyLayout};
use crate::state::VirtualMorsification;

const EMPTY: u32 = u32::MAX;

/// 64-bit multiplicative hash over 8-byte words.
pub fn hash_key(bytes: &[u8]) -> u64 {
    const K: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h: u64 = bytes.len() as u64;
    let mut chunks = bytes.chunks_exact(8);
    for c in &mut chunks {
        let w = u64::from_le_bytes(c.try_into().unwrap());
        h = (h.rotate_left(5) ^ w).wrapping_mul(K);
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let mut buf = [0u8; 8];
        buf[..rest.len()].copy_from_slice(rest);
        h = (h.rotate_left(5) ^ u64::from_le_bytes(buf)).wrapping_mul(K);
    }
    h ^ (h >> 29)
}

#[derive(Clone)]
pub struct StateStore {
    layout: KeyLayout,
    key_len: usize,
    arena: Vec<u8>,
    table: Vec<u32>,
    len: usize,
}

impl StateStore {
    pub fn new(layout: KeyLayout) -> Self {
        StateStore {
            layout,
            key_len: layout.len(),
            arena: Vec::new(),
            table: vec![EMPTY; 1024],
            len: 0,
        }
    }

    /// Rebuilds a store from a concatenation of keys in insertion order.
    pub fn from_arena(layout: KeyLayout, arena: Vec<u8>) -> Self {
        let key_len = layout.len();
        assert_eq!(
            arena.len() % key_len,
            0,
            "arena length is not a multiple of the key length"
        );
        let len = arena.len() / key_len;
        let mut store = StateStore {
            layout,
            key_len,
            arena,
            table: vec![EMPTY; (len * 2).next_power_of_two().max(1024)],
            len,
        };
        for i in 0..len {
            let h = hash_key(store.key(i as u32));
            store.place(h, i as u32);
        }
        store
    }

    pub fn layout(&self) -> KeyLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn key(&self, index: u32) -> &[u8] {
        let start = index as usize * self.key_len;
        &self.arena[start..start + self.key_len]
    }

    pub fn state(&self, index: u32) -> VirtualMorsification {
        decode_trusted(self.key(index), self.layout)
    }

    pub fn arena(&self) -> &[u8] {
        &self.arena
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.arena.capacity() + self.table.len() * 4
    }

    pub fn find(&self, key: &[u8]) -> Option<u32> {
        debug_assert_eq!(key.len(), self.key_len);
        let mask = self.table.len() - 1;
        let mut pos = hash_key(key) as usize & mask;
        loop {
            let idx = self.table[pos];
            if idx == EMPTY {
                return None;
            }
            if self.key(idx) == key {
                return Some(idx);
            }
            pos = (pos + 1) & mask;
        }
    }

    /// Inserts `key` if absent; returns its index and whether it was new.
    pub fn insert(&mut self, key: &[u8]) -> (u32, bool) {
        assert_eq!(key.len(), self.key_len, "key length does not match the store layout");
        if (self.len + 1) * 10 > self.table.len() * 7 {
            self.grow();
        }
        let mask = self.table.len() - 1;
        let mut pos = hash_key(key) as usize & mask;
        loop {
            let idx = self.table[pos];
            if idx == EMPTY {
                let new = self.len as u32;
                self.table[pos] = new;
                self.arena.extend_from_slice(key);
                self.len += 1;
                return (new, true);
            }
            if self.key(idx) == key {
                return (idx, false);
            }
            pos = (pos + 1) & mask;
        }
    }

    /// Drops every key at index `len` or later.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.arena.truncate(len * self.key_len);
        *self = StateStore::from_arena(self.layout, std::mem::take(&mut self.arena));
    }

    fn place(&mut self, h: u64, index: u32) {
        let mask = self.table.len() - 1;
        let mut pos = h as usize & mask;
        while self.table[pos] != EMPTY {
            pos = (pos + 1) & mask;
        }
        self.table[pos] = index;
    }

    fn grow(&mut self) {
        let cap = self.table.len() * 2;
        self.table = vec![EMPTY; cap];
        for i in 0..self.len {
            let h = hash_key(self.key(i as u32));
            self.place(h, i as u32);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.arena.chunks_exact(self.key_len)
    }

    /// Keys in lexicographic order, concatenated.
    pub fn sorted_arena(&self) -> Vec<u8> {
        let mut keys: Vec<&[u8]> = self.iter().collect();
        keys.sort_unstable();
        keys.concat()
    }
}
