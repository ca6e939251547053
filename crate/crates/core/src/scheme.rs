//! Key generation, signing and verification.

use rand::RngCore;

use crate::packing::{pack_public_key, pack_signature, pack_w1, unpack_signature};
use crate::params::{ParameterSet, Revision, N};
use crate::poly::{reduce, to_unsigned, NttPoly, Poly, PolyVec};
use crate::rounding::{decompose, make_hint_from_parts, power2round, use_hint};
use crate::xof::{challenge_hash, crh, expand_a, expand_mask, expand_s, sample_in_ball, shake256};

/// Default cap on rejection-loop iterations before signing gives up.
pub const DEFAULT_KAPPA_CAP: u32 = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub params: ParameterSet,
    pub rho: [u8; 32],
    pub t1: PolyVec,
}

/// Secret key as held in signer memory.
///
/// `s1` is kept as the 32-bit two's-complement words the signer reads, so a
/// single flipped bit is well defined and may push a coefficient far outside
/// `[-eta, eta]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    pub params: ParameterSet,
    pub rho: [u8; 32],
    pub key: [u8; 32],
    pub tr: Vec<u8>,
    pub s1_words: Vec<[i32; N]>,
    pub s2: Vec<[i32; N]>,
    pub t0: PolyVec,
}

impl SecretKey {
    pub fn s1_polys(&self) -> PolyVec {
        self.s1_words.iter().map(|w| Poly::from_coeffs(w)).collect()
    }

    pub fn s2_polys(&self) -> PolyVec {
        self.s2.iter().map(|w| Poly::from_coeffs(w)).collect()
    }

    /// True when every `s1` word is a valid coefficient in `[-eta, eta]`.
    pub fn s1_in_range(&self) -> bool {
        let eta = self.params.eta;
        self.s1_words.iter().flatten().all(|c| c.abs() <= eta)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub params: ParameterSet,
    pub z: PolyVec,
    pub h: Vec<[bool; N]>,
    pub c_tilde: [u8; 32],
}

impl Signature {
    pub fn hint_weight(&self) -> usize {
        self.h.iter().map(|r| r.iter().filter(|&&b| b).count()).sum()
    }
}

/// Result of one signing call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignOutcome {
    Signed { signature: Signature, kappa_used: u32 },
    /// The rejection loop hit the iteration cap without releasing anything.
    LoopExhausted { kappa_used: u32 },
}

impl SignOutcome {
    pub fn signature(self) -> Option<Signature> {
        match self {
            SignOutcome::Signed { signature, .. } => Some(signature),
            SignOutcome::LoopExhausted { .. } => None,
        }
    }

    pub fn kappa_used(&self) -> u32 {
        match self {
            SignOutcome::Signed { kappa_used, .. } | SignOutcome::LoopExhausted { kappa_used } => {
                *kappa_used
            }
        }
    }
}

/// Source of the masking seed `rho'`.
pub enum SignMode<'a> {
    /// `rho' = CRH(K || mu)`.
    Deterministic,
    /// `rho'` drawn from the supplied generator.
    Randomized(&'a mut dyn RngCore),
}

fn matrix_ntt(a: &[PolyVec]) -> Vec<Vec<NttPoly>> {
    a.iter().map(|row| row.iter().map(NttPoly::from_values).collect()).collect()
}

/// Coefficient-domain form of the expanded matrix.
pub fn matrix_coefficients(params: &ParameterSet, rho: &[u8; 32]) -> Vec<PolyVec> {
    expand_a(params, rho)
        .iter()
        .map(|row| row.iter().map(|a| NttPoly::from_values(a).inverse()).collect())
        .collect()
}

fn mat_vec(a_hat: &[Vec<NttPoly>], v_hat: &[NttPoly]) -> PolyVec {
    a_hat
        .iter()
        .map(|row| {
            let mut acc = NttPoly::zero();
            for (a, v) in row.iter().zip(v_hat) {
                acc.add_assign(&a.pointwise(v));
            }
            acc.inverse()
        })
        .collect()
}

/// Expand `zeta` into `(rho, rho', K)` per the revision's split.
fn expand_seed(seed: &[u8; 32], revision: Revision) -> ([u8; 32], Vec<u8>, [u8; 32]) {
    let s_len = revision.secret_seed_bytes();
    let buf = shake256(&[seed], 64 + s_len);
    let rho: [u8; 32] = buf[..32].try_into().expect("rho");
    let rho_prime = buf[32..32 + s_len].to_vec();
    let key: [u8; 32] = buf[32 + s_len..].try_into().expect("key");
    (rho, rho_prime, key)
}

/// Deterministic key generation from a 256-bit seed.
pub fn keygen(seed: &[u8; 32], params: &ParameterSet) -> (PublicKey, SecretKey) {
    let p = params;
    let (rho, rho_prime, key) = expand_seed(seed, p.revision);
    let a_hat = matrix_ntt(&expand_a(p, &rho));
    let s1: Vec<[i32; N]> = (0..p.l).map(|i| expand_s(p, &rho_prime, i as u16)).collect();
    let s2: Vec<[i32; N]> = (0..p.k)
        .map(|i| expand_s(p, &rho_prime, (p.l + i) as u16))
        .collect();
    let s1_hat: Vec<NttPoly> = s1.iter().map(|w| Poly::from_coeffs(w).ntt()).collect();
    let t = mat_vec(&a_hat, &s1_hat);
    let mut t1 = Vec::with_capacity(p.k);
    let mut t0 = Vec::with_capacity(p.k);
    for (ti, s2i) in t.iter().zip(&s2) {
        let ti = ti.add(&Poly::from_coeffs(s2i));
        let mut hi = [0i64; N];
        let mut lo = [0i64; N];
        for (j, &c) in ti.coeffs().iter().enumerate() {
            let (r1, r0) = power2round(to_unsigned(c) as i32, p.d);
            hi[j] = r1 as i64;
            lo[j] = r0 as i64;
        }
        t1.push(Poly::from_coeffs(&hi));
        t0.push(Poly::from_coeffs(&lo));
    }
    let pk = PublicKey { params: *p, rho, t1 };
    let tr = shake256(&[&pack_public_key(&pk)], p.revision.tr_bytes());
    let sk = SecretKey {
        params: *p,
        rho,
        key,
        tr,
        s1_words: s1,
        s2,
        t0,
    };
    (pk, sk)
}

/// Sign `msg`, computing `z` from the stored (possibly faulted) `s1` words.
pub fn sign(sk: &SecretKey, msg: &[u8], mode: SignMode<'_>, kappa_cap: u32) -> SignOutcome {
    Signer::new(sk).sign(msg, mode, kappa_cap)
}

/// Signing context with the expanded matrix and NTT forms of the secrets.
pub struct Signer {
    params: ParameterSet,
    key: [u8; 32],
    tr: Vec<u8>,
    a_hat: Vec<Vec<NttPoly>>,
    s1_hat: Vec<NttPoly>,
    s2_hat: Vec<NttPoly>,
    t0_hat: Vec<NttPoly>,
}

impl Signer {
    pub fn new(sk: &SecretKey) -> Self {
        let p = sk.params;
        Self {
            params: p,
            key: sk.key,
            tr: sk.tr.clone(),
            a_hat: matrix_ntt(&expand_a(&p, &sk.rho)),
            s1_hat: sk.s1_polys().iter().map(Poly::ntt).collect(),
            s2_hat: sk.s2_polys().iter().map(Poly::ntt).collect(),
            t0_hat: sk.t0.iter().map(Poly::ntt).collect(),
        }
    }

    pub fn sign(&self, msg: &[u8], mode: SignMode<'_>, kappa_cap: u32) -> SignOutcome {
        let p = &self.params;
        let mu = crh(p, &[&self.tr, msg]);
        let rho_prime = match mode {
            SignMode::Deterministic => crh(p, &[&self.key, &mu]),
            SignMode::Randomized(rng) => {
                let mut buf = vec![0u8; p.revision.crh_bytes()];
                rng.fill_bytes(&mut buf);
                buf
            }
        };
        let alpha = p.alpha();
        for attempt in 0..kappa_cap {
            let y = expand_mask(p, &rho_prime, attempt as u16);
            let y_hat: Vec<NttPoly> = y.iter().map(Poly::ntt).collect();
            let w = mat_vec(&self.a_hat, &y_hat);

            let mut w1 = Vec::with_capacity(p.k);
            let mut w0 = Vec::with_capacity(p.k);
            for poly in &w {
                let mut hi = [0i64; N];
                let mut lo = [0i64; N];
                for (j, &c) in poly.coeffs().iter().enumerate() {
                    let (h, l) = decompose(to_unsigned(c) as i32, alpha);
                    hi[j] = h as i64;
                    lo[j] = l as i64;
                }
                w1.push(Poly::from_coeffs(&hi));
                w0.push(Poly::from_coeffs(&lo));
            }
            let c_tilde = challenge_hash(&mu, &pack_w1(p, &w1));
            let c = sample_in_ball(p, &c_tilde);
            let c_hat = c.ntt();

            let z: PolyVec = y
                .iter()
                .zip(&self.s1_hat)
                .map(|(yi, s)| yi.add(&c_hat.pointwise(s).inverse()))
                .collect();
            if !z.iter().all(|zi| zi.norm_below(p.gamma1 - p.beta)) {
                continue;
            }

            let r0: PolyVec = w0
                .iter()
                .zip(&self.s2_hat)
                .map(|(w0i, s)| w0i.sub(&c_hat.pointwise(s).inverse()))
                .collect();
            if !r0.iter().all(|r| r.norm_below(p.gamma2 - p.beta)) {
                continue;
            }

            let ct0: PolyVec = self.t0_hat.iter().map(|t| c_hat.pointwise(t).inverse()).collect();
            if !ct0.iter().all(|t| t.norm_below(p.gamma2)) {
                continue;
            }

            let mut h = vec![[false; N]; p.k];
            let mut weight = 0;
            for (i, hi) in h.iter_mut().enumerate() {
                for (j, hij) in hi.iter_mut().enumerate() {
                    let low = reduce(r0[i].coeff(j) as i64 + ct0[i].coeff(j) as i64);
                    if make_hint_from_parts(low, w1[i].coeff(j), p.gamma2) {
                        *hij = true;
                        weight += 1;
                    }
                }
            }
            if weight > p.omega {
                continue;
            }

            return SignOutcome::Signed {
                signature: Signature {
                    params: *p,
                    z,
                    h,
                    c_tilde,
                },
                kappa_used: attempt + 1,
            };
        }
        SignOutcome::LoopExhausted {
            kappa_used: kappa_cap,
        }
    }
}

/// Verification context bound to one `(pk, msg)` pair.
///
/// Holds `A` in NTT form, `t1 * 2^d` in NTT form and `mu`, so repeated
/// checks of candidate signatures for the same message skip the expansion.
pub struct Verifier {
    pub(crate) params: ParameterSet,
    pub(crate) a_hat: Vec<Vec<NttPoly>>,
    pub(crate) t1_scaled_hat: Vec<NttPoly>,
    pub(crate) mu: Vec<u8>,
}

impl Verifier {
    pub fn new(pk: &PublicKey, msg: &[u8]) -> Self {
        let p = pk.params;
        let tr = shake256(&[&pack_public_key(pk)], p.revision.tr_bytes());
        let mu = crh(&p, &[&tr, msg]);
        let a_hat = matrix_ntt(&expand_a(&p, &pk.rho));
        let t1_scaled_hat = pk.t1.iter().map(|t| t.scale(1 << p.d).ntt()).collect();
        Self {
            params: p,
            a_hat,
            t1_scaled_hat,
            mu,
        }
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    /// `A*z - c*t1*2^d`.
    pub(crate) fn w_approx(&self, z: &[Poly], c: &Poly) -> PolyVec {
        let z_hat: Vec<NttPoly> = z.iter().map(Poly::ntt).collect();
        let c_hat = c.ntt();
        mat_vec(&self.a_hat, &z_hat)
            .iter()
            .zip(&self.t1_scaled_hat)
            .map(|(az, t)| az.sub(&c_hat.pointwise(t).inverse()))
            .collect()
    }

    /// Challenge recomputed from `A*z - c*t1*2^d` and the hint.
    pub(crate) fn recompute_challenge(&self, w_approx: &[Poly], h: &[[bool; N]]) -> [u8; 32] {
        let p = &self.params;
        let alpha = p.alpha();
        let w1: PolyVec = w_approx
            .iter()
            .zip(h)
            .map(|(w, hr)| {
                let mut out = [0i64; N];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = use_hint(hr[j], to_unsigned(w.coeff(j)) as i32, alpha) as i64;
                }
                Poly::from_coeffs(&out)
            })
            .collect();
        challenge_hash(&self.mu, &pack_w1(p, &w1))
    }

    pub fn verify_signature(&self, sig: &Signature) -> bool {
        let p = &self.params;
        if sig.params.level != p.level || sig.z.len() != p.l || sig.h.len() != p.k {
            return false;
        }
        if !sig.z.iter().all(|zi| zi.norm_below(p.gamma1 - p.beta)) {
            return false;
        }
        if sig.hint_weight() > p.omega {
            return false;
        }
        let c = sample_in_ball(p, &sig.c_tilde);
        let w = self.w_approx(&sig.z, &c);
        self.recompute_challenge(&w, &sig.h) == sig.c_tilde
    }

    /// Unpack and verify; malformed encodings are rejected, never panic.
    pub fn verify_bytes(&self, sig: &[u8]) -> bool {
        match unpack_signature(&self.params, sig) {
            Ok(s) => self.verify_signature(&s),
            Err(_) => false,
        }
    }
}

pub fn verify(pk: &PublicKey, msg: &[u8], sig: &[u8]) -> bool {
    Verifier::new(pk, msg).verify_bytes(sig)
}

pub fn verify_signature(pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    Verifier::new(pk, msg).verify_signature(sig)
}

/// Convenience: pack a freshly released signature.
pub fn signature_bytes(sig: &Signature) -> Vec<u8> {
    pack_signature(sig).expect("released signatures are always packable")
}
