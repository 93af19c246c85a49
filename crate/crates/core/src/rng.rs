//! Seed derivation for independent random streams.
//!
//! Every random draw in the simulator descends from one 64-bit experiment
//! seed. Child seeds are obtained by hashing `(parent, stream)` with the
//! SplitMix64 finalizer, so any sub-computation (a round, a generator, a
//! calibration bank) can be reproduced in isolation and run on any thread.
//!
//! Stream layout used throughout the crate:
//!
//! | parent          | stream                  | purpose                         |
//! |-----------------|-------------------------|---------------------------------|
//! | round seed      | [`STREAM_ALICE_NOISE`]  | Alice's generator samples       |
//! | round seed      | [`STREAM_BOB_NOISE`]    | Bob's generator samples         |
//! | session seed    | [`STREAM_BIT_CHOICES`]  | both parties' random bits       |
//! | session seed    | `ROUND_BASE + i`        | seed of round `i`               |
//! | experiment seed | [`STREAM_EVE_CALIBRATION`] | Eve's reference round bank   |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_ALICE_NOISE: u64 = 0xA11CE;
pub const STREAM_BOB_NOISE: u64 = 0xB0B;
pub const STREAM_BIT_CHOICES: u64 = 0xB175;
pub const STREAM_EVE_CALIBRATION: u64 = 0xE7E;
pub const STREAM_BER: u64 = 0xBE7;
/// Offset for per-round and per-trial streams; index `i` uses `ROUND_BASE + i`.
pub const ROUND_BASE: u64 = 1 << 32;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `stream` from `parent`.
#[inline]
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(stream.rotate_left(17)))
}

/// Seed of the `index`-th round (or trial) below `parent`.
#[inline]
pub fn round_seed(parent: u64, index: u64) -> u64 {
    derive_seed(parent, ROUND_BASE.wrapping_add(index))
}

/// ChaCha8 generator for a stream; 64-bit seed expanded by `seed_from_u64`.
pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
