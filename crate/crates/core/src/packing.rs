//! Round-3 byte encodings of keys and signatures.
//!
//! Every polynomial field is a little-endian bitstream of fixed-width
//! values, so a single pair of bit packers covers all of them.

use crate::error::{Error, Result};
use crate::params::{ParameterSet, N, SEED_BYTES};
use crate::poly::{to_unsigned, Poly};
use crate::scheme::{PublicKey, SecretKey, Signature};

pub fn pack_bits(values: &[u32], bits: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * bits as usize / 8 + 1);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for &v in values {
        debug_assert!(bits == 32 || v < (1 << bits));
        acc |= (v as u64) << filled;
        filled += bits;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], bits: u32, count: usize) -> Vec<u32> {
    let mask = if bits == 32 { u32::MAX as u64 } else { (1u64 << bits) - 1 };
    let mut out = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut iter = bytes.iter();
    while out.len() < count {
        while filled < bits {
            let b = *iter.next().expect("bitstream shorter than requested");
            acc |= (b as u64) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u32);
        acc >>= bits;
        filled -= bits;
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], expected: usize, what: &'static str) -> Result<Self> {
        if bytes.len() != expected {
            return Err(Error::parse(
                what,
                format!("expected {expected} bytes, got {}", bytes.len()),
            ));
        }
        Ok(Self { bytes, what })
    }

    fn take(&mut self, len: usize) -> &'a [u8] {
        let (head, tail) = self.bytes.split_at(len);
        self.bytes = tail;
        head
    }

    fn seed(&mut self) -> [u8; 32] {
        self.take(SEED_BYTES).try_into().expect("seed length")
    }
}

fn pack_eta(p: &ParameterSet, coeffs: &[i32; N], out: &mut Vec<u8>) -> Result<()> {
    let mut vals = Vec::with_capacity(N);
    for &c in coeffs {
        if c.abs() > p.eta {
            return Err(Error::InvalidParameter(format!(
                "secret coefficient {c} outside [-{0}, {0}]",
                p.eta
            )));
        }
        vals.push((p.eta - c) as u32);
    }
    out.extend(pack_bits(&vals, p.eta_bits()));
    Ok(())
}

fn unpack_eta(p: &ParameterSet, bytes: &[u8], what: &'static str) -> Result<[i32; N]> {
    let raw = unpack_bits(bytes, p.eta_bits(), N);
    let mut out = [0i32; N];
    for (o, t) in out.iter_mut().zip(raw) {
        if t > 2 * p.eta as u32 {
            return Err(Error::parse(what, format!("encoded secret value {t} out of range")));
        }
        *o = p.eta - t as i32;
    }
    Ok(out)
}

fn pack_t0(p: &ParameterSet, poly: &Poly, out: &mut Vec<u8>) {
    let half = 1i32 << (p.d - 1);
    let vals: Vec<u32> = poly.coeffs().iter().map(|&c| (half - c) as u32).collect();
    out.extend(pack_bits(&vals, p.d));
}

fn unpack_t0(p: &ParameterSet, bytes: &[u8]) -> Poly {
    let half = 1i64 << (p.d - 1);
    let raw: Vec<i64> = unpack_bits(bytes, p.d, N)
        .into_iter()
        .map(|t| half - t as i64)
        .collect();
    Poly::from_coeffs(&raw)
}

pub fn pack_public_key(pk: &PublicKey) -> Vec<u8> {
    let p = &pk.params;
    let mut out = Vec::with_capacity(p.public_key_bytes());
    out.extend_from_slice(&pk.rho);
    for poly in &pk.t1 {
        let vals: Vec<u32> = poly.coeffs().iter().map(|&c| c as u32).collect();
        out.extend(pack_bits(&vals, p.t1_bits()));
    }
    out
}

pub fn unpack_public_key(params: &ParameterSet, bytes: &[u8]) -> Result<PublicKey> {
    let mut r = Reader::new(bytes, params.public_key_bytes(), "public key")?;
    let rho = r.seed();
    let t1 = (0..params.k)
        .map(|_| {
            let raw = unpack_bits(r.take(params.poly_t1_bytes()), params.t1_bits(), N);
            Poly::from_coeffs(&raw.iter().map(|&v| v as i64).collect::<Vec<_>>())
        })
        .collect();
    Ok(PublicKey {
        params: *params,
        rho,
        t1,
    })
}

fn pack_secret_key_with(sk: &SecretKey, words: bool) -> Result<Vec<u8>> {
    let p = &sk.params;
    let mut out = Vec::with_capacity(if words {
        p.secret_key_word_bytes()
    } else {
        p.secret_key_bytes()
    });
    out.extend_from_slice(&sk.rho);
    out.extend_from_slice(&sk.key);
    out.extend_from_slice(&sk.tr);
    for w in &sk.s1_words {
        if words {
            for &c in w {
                out.extend_from_slice(&c.to_le_bytes());
            }
        } else {
            pack_eta(p, w, &mut out)?;
        }
    }
    for s in &sk.s2 {
        pack_eta(p, s, &mut out)?;
    }
    for t in &sk.t0 {
        pack_t0(p, t, &mut out);
    }
    Ok(out)
}

/// Round-3 secret key encoding. Fails when `s1` holds faulted words that
/// the 3- or 4-bit field cannot represent.
pub fn pack_secret_key(sk: &SecretKey) -> Result<Vec<u8>> {
    pack_secret_key_with(sk, false)
}

/// Secret key with `s1` as raw 32-bit little-endian words.
pub fn pack_secret_key_words(sk: &SecretKey) -> Vec<u8> {
    pack_secret_key_with(sk, true).expect("word layout only fails on faulted s2")
}

fn unpack_secret_key_with(params: &ParameterSet, bytes: &[u8], words: bool) -> Result<SecretKey> {
    let expected = if words {
        params.secret_key_word_bytes()
    } else {
        params.secret_key_bytes()
    };
    let mut r = Reader::new(bytes, expected, "secret key")?;
    let rho = r.seed();
    let key = r.seed();
    let tr = r.take(params.revision.tr_bytes()).to_vec();
    let mut s1_words = Vec::with_capacity(params.l);
    for _ in 0..params.l {
        if words {
            let raw = r.take(4 * N);
            let mut w = [0i32; N];
            for (dst, chunk) in w.iter_mut().zip(raw.chunks_exact(4)) {
                *dst = i32::from_le_bytes(chunk.try_into().expect("word"));
            }
            s1_words.push(w);
        } else {
            s1_words.push(unpack_eta(params, r.take(params.poly_eta_bytes()), r.what)?);
        }
    }
    let mut s2 = Vec::with_capacity(params.k);
    for _ in 0..params.k {
        s2.push(unpack_eta(params, r.take(params.poly_eta_bytes()), r.what)?);
    }
    let t0 = (0..params.k)
        .map(|_| unpack_t0(params, r.take(params.poly_t0_bytes())))
        .collect();
    Ok(SecretKey {
        params: *params,
        rho,
        key,
        tr,
        s1_words,
        s2,
        t0,
    })
}

pub fn unpack_secret_key(params: &ParameterSet, bytes: &[u8]) -> Result<SecretKey> {
    unpack_secret_key_with(params, bytes, false)
}

pub fn unpack_secret_key_words(params: &ParameterSet, bytes: &[u8]) -> Result<SecretKey> {
    unpack_secret_key_with(params, bytes, true)
}

/// Accept either secret key layout, telling them apart by length.
pub fn unpack_secret_key_any(params: &ParameterSet, bytes: &[u8]) -> Result<SecretKey> {
    if bytes.len() == params.secret_key_word_bytes() {
        unpack_secret_key_words(params, bytes)
    } else {
        unpack_secret_key(params, bytes)
    }
}

/// Pack `(c_tilde, z, h)`. Fails if a `z` coefficient leaves `(-gamma1, gamma1]`
/// or the hint is heavier than `omega`.
pub fn pack_signature(sig: &Signature) -> Result<Vec<u8>> {
    let p = &sig.params;
    let mut out = Vec::with_capacity(p.signature_bytes());
    out.extend_from_slice(&sig.c_tilde);
    for poly in &sig.z {
        let mut vals = Vec::with_capacity(N);
        for &c in poly.coeffs() {
            if c <= -p.gamma1 || c > p.gamma1 {
                return Err(Error::InvalidParameter(format!(
                    "z coefficient {c} outside the packable range"
                )));
            }
            vals.push((p.gamma1 - c) as u32);
        }
        out.extend(pack_bits(&vals, p.z_bits()));
    }
    let weight: usize = sig.h.iter().map(|row| row.iter().filter(|&&b| b).count()).sum();
    if weight > p.omega {
        return Err(Error::InvalidParameter(format!(
            "hint weight {weight} exceeds omega = {}",
            p.omega
        )));
    }
    let mut hint = vec![0u8; p.omega + p.k];
    let mut idx = 0;
    for (i, row) in sig.h.iter().enumerate() {
        for (j, &bit) in row.iter().enumerate() {
            if bit {
                hint[idx] = j as u8;
                idx += 1;
            }
        }
        hint[p.omega + i] = idx as u8;
    }
    out.extend(hint);
    Ok(out)
}

pub fn unpack_signature(params: &ParameterSet, bytes: &[u8]) -> Result<Signature> {
    let p = params;
    let mut r = Reader::new(bytes, p.signature_bytes(), "signature")?;
    let c_tilde = r.seed();
    let z = (0..p.l)
        .map(|_| {
            let raw = unpack_bits(r.take(p.poly_z_bytes()), p.z_bits(), N);
            Poly::from_coeffs(&raw.iter().map(|&t| p.gamma1 as i64 - t as i64).collect::<Vec<_>>())
        })
        .collect();
    let enc = r.take(p.omega + p.k);
    let mut h = vec![[false; N]; p.k];
    let mut k = 0usize;
    for (i, row) in h.iter_mut().enumerate() {
        let end = enc[p.omega + i] as usize;
        if end < k || end > p.omega {
            return Err(Error::parse("signature", "hint offsets not monotone"));
        }
        for j in k..end {
            if j > k && enc[j] <= enc[j - 1] {
                return Err(Error::parse("signature", "hint indices not strictly increasing"));
            }
            row[enc[j] as usize] = true;
        }
        k = end;
    }
    if enc[k..p.omega].iter().any(|&b| b != 0) {
        return Err(Error::parse("signature", "non-zero padding after hint indices"));
    }
    Ok(Signature {
        params: *p,
        z,
        h,
        c_tilde,
    })
}

/// Encode `w1` for hashing.
pub fn pack_w1(params: &ParameterSet, w1: &[Poly]) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.k * params.poly_w1_bytes());
    for poly in w1 {
        let vals: Vec<u32> = poly.coeffs().iter().map(|&c| to_unsigned(c)).collect();
        out.extend(pack_bits(&vals, params.w1_bits()));
    }
    out
}
