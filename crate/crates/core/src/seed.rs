//! Labeled derivation of independent random streams from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::xof::shake256;

/// 32 bytes bound to `(label, seed)`.
pub fn derive_bytes(seed: u64, label: &str) -> [u8; 32] {
    let out = shake256(&[b"sigcorrect/", label.as_bytes(), b"/", &seed.to_le_bytes()], 32);
    out.try_into().expect("32 bytes")
}

pub fn derive_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_bytes(seed, label))
}

/// A 64-bit child seed, for handing to components that take `u64`.
pub fn derive_u64(seed: u64, label: &str) -> u64 {
    let b = derive_bytes(seed, label);
    u64::from_le_bytes(b[..8].try_into().expect("8 bytes"))
}
