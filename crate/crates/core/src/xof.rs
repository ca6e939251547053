//! SHAKE-based expansion functions with the Round-3 domain separation.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Shake128, Shake256};

use crate::packing::unpack_bits;
use crate::params::{ParameterSet, Q};
use crate::poly::{Poly, PolyVec};

/// SHAKE-256 of the concatenated inputs, `out_len` bytes.
pub fn shake256(inputs: &[&[u8]], out_len: usize) -> Vec<u8> {
    let mut h = Shake256::default();
    for i in inputs {
        h.update(i);
    }
    let mut out = vec![0u8; out_len];
    h.finalize_xof().read(&mut out);
    out
}

/// Collision-resistant hash with the revision's output length.
pub fn crh(params: &ParameterSet, inputs: &[&[u8]]) -> Vec<u8> {
    shake256(inputs, params.revision.crh_bytes())
}

/// Challenge seed `c_tilde = H(mu || w1)`.
pub fn challenge_hash(mu: &[u8], w1_packed: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    out.copy_from_slice(&shake256(&[mu, w1_packed], 32));
    out
}

/// Matrix `A` (row-major, `k x l`) with entries uniform in `[0, q)`.
///
/// The sampled values are the NTT-domain representation of `A`; see
/// [`crate::scheme::matrix_coefficients`] for the coefficient form.
pub fn expand_a(params: &ParameterSet, rho: &[u8; 32]) -> Vec<PolyVec> {
    (0..params.k)
        .map(|i| {
            (0..params.l)
                .map(|j| uniform_poly(rho, ((i as u16) << 8) | j as u16))
                .collect()
        })
        .collect()
}

fn uniform_poly(rho: &[u8; 32], nonce: u16) -> Poly {
    let mut h = Shake128::default();
    h.update(rho);
    h.update(&nonce.to_le_bytes());
    let mut reader = h.finalize_xof();
    let mut coeffs = [0i32; 256];
    let mut filled = 0;
    let mut buf = [0u8; 168];
    while filled < coeffs.len() {
        reader.read(&mut buf);
        for chunk in buf.chunks_exact(3) {
            let t = (chunk[0] as u32 | (chunk[1] as u32) << 8 | (chunk[2] as u32) << 16) & 0x7f_ffff;
            if t < Q as u32 {
                coeffs[filled] = t as i32;
                filled += 1;
                if filled == coeffs.len() {
                    break;
                }
            }
        }
    }
    Poly::from_coeffs(&coeffs)
}

/// Secret polynomial with coefficients uniform in `[-eta, eta]`.
pub fn expand_s(params: &ParameterSet, seed: &[u8], nonce: u16) -> [i32; 256] {
    let mut h = Shake256::default();
    h.update(seed);
    h.update(&nonce.to_le_bytes());
    let mut reader = h.finalize_xof();
    let mut out = [0i32; 256];
    let mut filled = 0;
    let mut buf = [0u8; 136];
    let eta = params.eta as u32;
    while filled < out.len() {
        reader.read(&mut buf);
        for &byte in &buf {
            for nibble in [byte as u32 & 0x0f, byte as u32 >> 4] {
                if filled == out.len() {
                    break;
                }
                let accepted = match eta {
                    2 if nibble < 15 => Some(2 - (nibble % 5) as i32),
                    4 if nibble < 9 => Some(4 - nibble as i32),
                    _ => None,
                };
                if let Some(v) = accepted {
                    out[filled] = v;
                    filled += 1;
                }
            }
        }
    }
    out
}

/// Masking vector `y` for rejection-loop iteration `kappa`; coefficients
/// in `(-gamma1, gamma1]`.
pub fn expand_mask(params: &ParameterSet, rho_prime: &[u8], kappa: u16) -> PolyVec {
    let bits = params.z_bits();
    (0..params.l)
        .map(|i| {
            let nonce = (params.l as u16).wrapping_mul(kappa).wrapping_add(i as u16);
            let bytes = shake256(&[rho_prime, &nonce.to_le_bytes()], params.poly_z_bytes());
            let raw = unpack_bits(&bytes, bits, params.n);
            let coeffs: Vec<i64> = raw.iter().map(|&t| params.gamma1 as i64 - t as i64).collect();
            Poly::from_coeffs(&coeffs)
        })
        .collect()
}

/// `SampleInBall`: exactly `tau` coefficients in `{-1, +1}`.
pub fn sample_in_ball(params: &ParameterSet, c_tilde: &[u8; 32]) -> Poly {
    let mut h = Shake256::default();
    h.update(c_tilde);
    let mut reader = h.finalize_xof();
    let mut head = [0u8; 8];
    reader.read(&mut head);
    let mut signs = u64::from_le_bytes(head);
    let mut c = [0i32; 256];
    for i in params.n - params.tau..params.n {
        let b = loop {
            let mut byte = [0u8; 1];
            reader.read(&mut byte);
            if byte[0] as usize <= i {
                break byte[0] as usize;
            }
        };
        c[i] = c[b];
        c[b] = 1 - 2 * (signs & 1) as i32;
        signs >>= 1;
    }
    Poly::from_coeffs(&c)
}
