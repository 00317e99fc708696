//! Deterministic seed derivation for sub-fits.
//!
//! Sub-model seeds are derived from the caller's seed plus a role tag and a
//! content salt (usually a domain hash), so that reordering sources cannot
//! change any result. The hash is a pinned FNV-1a so derivations stay stable
//! across Rust releases and platforms.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a over byte chunks.
#[derive(Clone, Copy)]
pub(crate) struct StableHasher(u64);

impl StableHasher {
    pub(crate) fn new() -> Self {
        Self(FNV_OFFSET)
    }

    pub(crate) fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

/// Derives a sub-seed from a base seed, a role tag, and a salt.
pub(crate) fn derive_seed(base: u64, tag: &str, salt: u64) -> u64 {
    let mut h = StableHasher::new();
    h.write_u64(base);
    h.write_bytes(tag.as_bytes());
    h.write_u64(salt);
    h.finish()
}
