//! `Power2Round`, `Decompose` and the hint functions.
//!
//! All inputs are residues in `[0, q)`; low parts come back centered.

use crate::params::Q;

/// Split `r` into `(r1, r0)` with `r = r1 * 2^d + r0` and
/// `r0 ∈ (-2^(d-1), 2^(d-1)]`.
pub fn power2round(r: i32, d: u32) -> (i32, i32) {
    debug_assert!((0..Q).contains(&r));
    let r1 = (r + (1 << (d - 1)) - 1) >> d;
    let r0 = r - (r1 << d);
    (r1, r0)
}

/// Split `r` into `(high, low)` with `r = high * alpha + low (mod q)` and
/// `low ∈ (-alpha/2, alpha/2]`, except that `r - low = q - 1` is folded to
/// `high = 0, low = low - 1`.
pub fn decompose(r: i32, alpha: i32) -> (i32, i32) {
    debug_assert!((0..Q).contains(&r));
    let mut low = r.rem_euclid(alpha);
    if low > alpha / 2 {
        low -= alpha;
    }
    if r - low == Q - 1 {
        (0, low - 1)
    } else {
        ((r - low) / alpha, low)
    }
}

pub fn high_bits(r: i32, alpha: i32) -> i32 {
    decompose(r, alpha).0
}

pub fn low_bits(r: i32, alpha: i32) -> i32 {
    decompose(r, alpha).1
}

/// Generic hint: set when adding `z` to `r` changes the high part.
pub fn make_hint(z: i32, r: i32, alpha: i32) -> bool {
    let rz = (r as i64 + z as i64).rem_euclid(Q as i64) as i32;
    high_bits(r, alpha) != high_bits(rz, alpha)
}

/// Hint as computed by the signer from the low part `low` of
/// `w - c*s2 + c*t0` and the high part `high` of `w`.
pub fn make_hint_from_parts(low: i32, high: i32, gamma2: i32) -> bool {
    low > gamma2 || low < -gamma2 || (low == -gamma2 && high != 0)
}

/// Recover the high part of `r + z` from `r` and the hint bit.
pub fn use_hint(hint: bool, r: i32, alpha: i32) -> i32 {
    let m = (Q - 1) / alpha;
    let (high, low) = decompose(r, alpha);
    if !hint {
        high
    } else if low > 0 {
        (high + 1).rem_euclid(m)
    } else {
        (high - 1).rem_euclid(m)
    }
}
