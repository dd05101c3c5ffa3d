//! Deterministic random streams keyed by `(seed, purpose, rb, slot)`.
//!
//! Each stream is a ChaCha8 keystream whose 256-bit key is the concatenation
//! of the four identifiers, so the draws a task sees depend only on its own
//! id and never on which other streams were consumed first or on which
//! thread ran it.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Arrivals,
    SpreadingCode,
    Retrial,
    Access,
    Phy,
    Codebook,
    CurveAssign,
    CurveNoise,
    DriftState,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Arrivals => 1,
            Purpose::SpreadingCode => 2,
            Purpose::Retrial => 3,
            Purpose::Access => 4,
            Purpose::Phy => 5,
            Purpose::Codebook => 6,
            Purpose::CurveAssign => 7,
            Purpose::CurveNoise => 8,
            Purpose::DriftState => 9,
            Purpose::Custom(x) => (1 << 32) | x as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub purpose: Purpose,
    pub rb: u64,
    pub slot: u64,
}

/// A single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn id(&self) -> StreamId {
        self.id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.inner.try_fill_bytes(dest)
    }
}

pub fn derive_stream(seed: u64, purpose: Purpose, rb: u64, slot: u64) -> RngStream {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
    key[16..24].copy_from_slice(&rb.to_le_bytes());
    key[24..32].copy_from_slice(&slot.to_le_bytes());
    RngStream {
        id: StreamId { purpose, rb, slot },
        inner: ChaCha8Rng::from_seed(key),
    }
}
