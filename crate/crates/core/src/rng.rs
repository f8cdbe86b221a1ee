//! Deterministic random streams.
//!
//! Every stream is a SplitMix64 generator whose 64-bit state is derived from
//! the experiment's master seed by a fixed chain of [`derive_seed`] calls:
//!
//! ```text
//! run_seed        = derive_seed(master_seed, run_index)
//! items stream    = derive_seed(run_seed, ITEMS)
//! ranking stream  = derive_seed(run_seed, RANKING)
//! agent n stream  = derive_seed(derive_seed(run_seed, AGENTS), n)
//! ```
//!
//! `derive_seed` is built from the SplitMix64 output finalizer, so the chain
//! is stable across platforms and releases. Because each agent owns a stream
//! keyed by its index, any agent (and any run) can be regenerated in
//! isolation, and the number of draws one agent makes never shifts another
//! agent's randomness.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// Generator type behind every stream.
pub type Stream = SplitMix64;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream tags below a run seed.
pub const ITEMS: u64 = 0x4954_454d; // "ITEM"
pub const RANKING: u64 = 0x5241_4e4b; // "RANK"
pub const AGENTS: u64 = 0x4147_4e54; // "AGNT"

/// SplitMix64 finalizer (Stafford variant 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed of `parent` for `tag`.
#[inline]
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[inline]
pub fn run_seed(master_seed: u64, run_index: usize) -> u64 {
    derive_seed(master_seed, run_index as u64)
}

/// Stream whose state is exactly `seed`.
#[inline]
pub fn stream(seed: u64) -> Stream {
    SplitMix64::from_seed(seed.to_le_bytes())
}

#[inline]
pub fn items_stream(run_seed: u64) -> Stream {
    stream(derive_seed(run_seed, ITEMS))
}

#[inline]
pub fn ranking_stream(run_seed: u64) -> Stream {
    stream(derive_seed(run_seed, RANKING))
}

/// Key from which per-agent streams are derived.
#[inline]
pub fn agents_key(run_seed: u64) -> u64 {
    derive_seed(run_seed, AGENTS)
}

#[inline]
pub fn agent_stream(agents_key: u64, n: usize) -> Stream {
    stream(derive_seed(agents_key, n as u64))
}
