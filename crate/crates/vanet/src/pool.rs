//! Key stores: RSKP/RSD buffers and vehicle pools.

use std::collections::VecDeque;

use crate::time::SimTime;

/// How key bits reached a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handover {
    /// NFC gate link index.
    Nfc { link: usize },
    /// Relay through an RSD on the V2CA path.
    V2ca { rsd: usize },
}

/// A run of key bits with one provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBlock {
    pub bits: u64,
    /// KLJN link that minted the bits.
    pub origin_link: usize,
    pub handover: Option<Handover>,
    pub acquired_at: SimTime,
    pub expires_at: Option<SimTime>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyStore {
    blocks: VecDeque<KeyBlock>,
    total: u64,
    capacity: u64,
}

impl KeyStore {
    pub fn with_capacity(capacity: u64) -> Self {
        KeyStore {
            blocks: VecDeque::new(),
            total: 0,
            capacity,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn free(&self) -> u64 {
        self.capacity.saturating_sub(self.total)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &KeyBlock> {
        self.blocks.iter()
    }

    pub fn push(&mut self, block: KeyBlock) {
        if block.bits == 0 {
            return;
        }
        self.total += block.bits;
        self.blocks.push_back(block);
    }

    /// Removes up to `bits` bits, oldest first, splitting the last block.
    pub fn take(&mut self, bits: u64) -> Vec<KeyBlock> {
        let mut want = bits.min(self.total);
        let mut out = Vec::new();
        while want > 0 {
            let front = self.blocks.front_mut().expect("total tracks block sum");
            if front.bits <= want {
                want -= front.bits;
                self.total -= front.bits;
                out.push(self.blocks.pop_front().expect("nonempty"));
            } else {
                front.bits -= want;
                self.total -= want;
                out.push(KeyBlock {
                    bits: want,
                    ..front.clone()
                });
                want = 0;
            }
        }
        out
    }

    /// Drops every block whose expiry is at or before `now`; returns the bits removed.
    pub fn expire(&mut self, now: SimTime) -> u64 {
        let before = self.total;
        self.blocks.retain(|b| b.expires_at.is_none_or(|t| t > now));
        self.total = self.blocks.iter().map(|b| b.bits).sum();
        before - self.total
    }
}
