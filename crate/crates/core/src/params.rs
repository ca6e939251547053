//! Scheme constants for the three Dilithium security levels.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Prime modulus `2^23 - 2^13 + 1`.
pub const Q: i32 = 8_380_417;
/// Ring degree.
pub const N: usize = 256;
/// Bits dropped from `t` by `Power2Round`.
pub const D: u32 = 13;
/// Length of `rho`, `K` and the challenge seed `c_tilde`.
pub const SEED_BYTES: usize = 32;

/// Round-3 revision of the byte-level conventions.
///
/// The two revisions share the algebra and differ only in hash output
/// lengths: v3.0 uses 48-byte `tr`/`mu`/`rho'`, v3.1 shortens `tr` to 32
/// bytes and widens `mu`/`rho'` to 64 bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Revision {
    #[default]
    #[serde(rename = "3.0")]
    V30,
    #[serde(rename = "3.1")]
    V31,
}

impl Revision {
    pub fn tr_bytes(self) -> usize {
        match self {
            Revision::V30 => 48,
            Revision::V31 => 32,
        }
    }

    /// Output length of the collision-resistant hash used for `mu` and `rho'`.
    pub fn crh_bytes(self) -> usize {
        match self {
            Revision::V30 => 48,
            Revision::V31 => 64,
        }
    }

    /// Length of the seed that expands into `s1` and `s2`.
    pub fn secret_seed_bytes(self) -> usize {
        match self {
            Revision::V30 => 32,
            Revision::V31 => 64,
        }
    }
}

impl std::str::FromStr for Revision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "3.0" | "v3.0" => Ok(Revision::V30),
            "3.1" | "v3.1" => Ok(Revision::V31),
            other => Err(Error::InvalidParameter(format!("unknown revision {other:?}"))),
        }
    }
}

impl std::fmt::Display for Revision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Revision::V30 => "3.0",
            Revision::V31 => "3.1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterSet {
    pub level: u8,
    pub revision: Revision,
    pub q: i32,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub eta: i32,
    pub gamma1: i32,
    pub gamma2: i32,
    pub tau: usize,
    pub beta: i32,
    pub omega: usize,
    pub d: u32,
}

impl ParameterSet {
    pub const fn dilithium2(revision: Revision) -> Self {
        Self {
            level: 2,
            revision,
            q: Q,
            n: N,
            k: 4,
            l: 4,
            eta: 2,
            gamma1: 1 << 17,
            gamma2: (Q - 1) / 88,
            tau: 39,
            beta: 78,
            omega: 80,
            d: D,
        }
    }

    pub const fn dilithium3(revision: Revision) -> Self {
        Self {
            level: 3,
            revision,
            q: Q,
            n: N,
            k: 6,
            l: 5,
            eta: 4,
            gamma1: 1 << 19,
            gamma2: (Q - 1) / 32,
            tau: 49,
            beta: 196,
            omega: 55,
            d: D,
        }
    }

    pub const fn dilithium5(revision: Revision) -> Self {
        Self {
            level: 5,
            revision,
            q: Q,
            n: N,
            k: 8,
            l: 7,
            eta: 2,
            gamma1: 1 << 19,
            gamma2: (Q - 1) / 32,
            tau: 60,
            beta: 120,
            omega: 75,
            d: D,
        }
    }

    pub fn for_level(level: u8, revision: Revision) -> Result<Self, Error> {
        match level {
            2 => Ok(Self::dilithium2(revision)),
            3 => Ok(Self::dilithium3(revision)),
            5 => Ok(Self::dilithium5(revision)),
            other => Err(Error::InvalidParameter(format!(
                "security level must be 2, 3 or 5, got {other}"
            ))),
        }
    }

    /// All supported levels for a revision.
    pub fn all(revision: Revision) -> [Self; 3] {
        [
            Self::dilithium2(revision),
            Self::dilithium3(revision),
            Self::dilithium5(revision),
        ]
    }

    pub fn alpha(&self) -> i32 {
        2 * self.gamma2
    }

    /// Number of distinct high parts produced by `decompose`.
    pub fn w1_modulus(&self) -> i32 {
        (self.q - 1) / self.alpha()
    }

    pub fn eta_bits(&self) -> u32 {
        bits_for(2 * self.eta as u32)
    }

    pub fn z_bits(&self) -> u32 {
        bits_for(2 * self.gamma1 as u32 - 1)
    }

    pub fn w1_bits(&self) -> u32 {
        bits_for(self.w1_modulus() as u32 - 1)
    }

    pub fn t1_bits(&self) -> u32 {
        23 - self.d
    }

    pub fn poly_eta_bytes(&self) -> usize {
        self.n * self.eta_bits() as usize / 8
    }

    pub fn poly_z_bytes(&self) -> usize {
        self.n * self.z_bits() as usize / 8
    }

    pub fn poly_w1_bytes(&self) -> usize {
        self.n * self.w1_bits() as usize / 8
    }

    pub fn poly_t1_bytes(&self) -> usize {
        self.n * self.t1_bits() as usize / 8
    }

    pub fn poly_t0_bytes(&self) -> usize {
        self.n * self.d as usize / 8
    }

    pub fn public_key_bytes(&self) -> usize {
        SEED_BYTES + self.k * self.poly_t1_bytes()
    }

    pub fn secret_key_bytes(&self) -> usize {
        2 * SEED_BYTES
            + self.revision.tr_bytes()
            + (self.l + self.k) * self.poly_eta_bytes()
            + self.k * self.poly_t0_bytes()
    }

    /// Secret key with `s1` stored as raw little-endian 32-bit words, the
    /// layout a faulted key needs since its coefficients may leave `[-eta, eta]`.
    pub fn secret_key_word_bytes(&self) -> usize {
        2 * SEED_BYTES
            + self.revision.tr_bytes()
            + self.l * self.n * 4
            + self.k * self.poly_eta_bytes()
            + self.k * self.poly_t0_bytes()
    }

    pub fn signature_bytes(&self) -> usize {
        SEED_BYTES + self.l * self.poly_z_bytes() + self.omega + self.k
    }

    /// Identify the level whose public key has this length.
    pub fn from_public_key_len(len: usize, revision: Revision) -> Option<Self> {
        Self::all(revision)
            .into_iter()
            .find(|p| p.public_key_bytes() == len)
    }

    /// Identify the level from either secret key layout.
    pub fn from_secret_key_len(len: usize, revision: Revision) -> Option<(Self, bool)> {
        Self::all(revision).into_iter().find_map(|p| {
            if p.secret_key_bytes() == len {
                Some((p, false))
            } else if p.secret_key_word_bytes() == len {
                Some((p, true))
            } else {
                None
            }
        })
    }

    pub fn from_signature_len(len: usize, revision: Revision) -> Option<Self> {
        Self::all(revision)
            .into_iter()
            .find(|p| p.signature_bytes() == len)
    }
}

fn bits_for(max: u32) -> u32 {
    32 - max.leading_zeros()
}
