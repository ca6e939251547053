//! Arithmetic in `R_q = Z_q[X]/(X^256 + 1)`.
//!
//! Coefficients are held as centered representatives in `(-q/2, q/2]`.
//! Multiplication goes through a number-theoretic transform; the schoolbook
//! negacyclic convolution is kept alongside as the reference it is checked
//! against.

use std::sync::OnceLock;

use crate::params::{N, Q};

const QU: u64 = Q as u64;
/// Primitive 512-th root of unity modulo q.
const ROOT_OF_UNITY: u64 = 1753;

/// Reduce any integer to the centered representative in `(-q/2, q/2]`.
#[inline]
pub fn reduce(x: i64) -> i32 {
    let mut r = x.rem_euclid(Q as i64);
    if r > (Q as i64 - 1) / 2 {
        r -= Q as i64;
    }
    r as i32
}

/// Representative in `[0, q)` of a centered coefficient.
#[inline]
pub fn to_unsigned(x: i32) -> u32 {
    if x < 0 {
        (x + Q) as u32
    } else {
        x as u32
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: [i32; N],
}

impl std::fmt::Debug for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let nonzero = self.coeffs.iter().filter(|&&c| c != 0).count();
        write!(f, "Poly {{ nonzero: {nonzero}, head: {:?} }}", &self.coeffs[..8])
    }
}

impl Default for Poly {
    fn default() -> Self {
        Self::zero()
    }
}

impl Poly {
    pub const fn zero() -> Self {
        Self { coeffs: [0; N] }
    }

    /// The constant polynomial `1`.
    pub fn one() -> Self {
        Self::monomial(0, 1)
    }

    /// `scale * x^degree`, with `degree < n`.
    pub fn monomial(degree: usize, scale: i64) -> Self {
        assert!(degree < N, "monomial degree {degree} out of range");
        let mut p = Self::zero();
        p.coeffs[degree] = reduce(scale);
        p
    }

    /// Build from arbitrary integers, reducing each modulo q.
    pub fn from_coeffs<T: Copy + Into<i64>>(coeffs: &[T]) -> Self {
        assert_eq!(coeffs.len(), N, "polynomial must have exactly {N} coefficients");
        let mut p = Self::zero();
        for (dst, &src) in p.coeffs.iter_mut().zip(coeffs) {
            *dst = reduce(src.into());
        }
        p
    }

    /// Build from values already in the centered range.
    pub(crate) fn from_centered(coeffs: [i32; N]) -> Self {
        debug_assert!(coeffs.iter().all(|&c| reduce(c as i64) == c));
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[i32; N] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> i32 {
        self.coeffs[i]
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        self.map(|a| -a)
    }

    pub fn scale(&self, factor: i64) -> Self {
        let f = reduce(factor) as i64;
        self.map(|a| a * f)
    }

    fn map(&self, f: impl Fn(i64) -> i64) -> Self {
        let mut out = Self::zero();
        for (o, &a) in out.coeffs.iter_mut().zip(&self.coeffs) {
            *o = reduce(f(a as i64));
        }
        out
    }

    fn zip_with(&self, other: &Self, f: impl Fn(i64, i64) -> i64) -> Self {
        let mut out = Self::zero();
        for ((o, &a), &b) in out.coeffs.iter_mut().zip(&self.coeffs).zip(&other.coeffs) {
            *o = reduce(f(a as i64, b as i64));
        }
        out
    }

    /// Infinity norm of the centered representatives.
    pub fn norm_inf(&self) -> i32 {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// True if every coefficient has absolute value strictly below `bound`.
    pub fn norm_below(&self, bound: i32) -> bool {
        self.coeffs.iter().all(|c| c.abs() < bound)
    }

    pub fn weight(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }

    /// O(n^2) negacyclic convolution.
    pub fn mul_schoolbook(&self, other: &Self) -> Self {
        let mut acc = [0i64; N];
        let q = Q as i64;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let a = a as i64;
            for (j, &b) in other.coeffs.iter().enumerate() {
                let prod = a * b as i64 % q;
                let k = i + j;
                if k < N {
                    acc[k] += prod;
                } else {
                    acc[k - N] -= prod;
                }
            }
        }
        let mut out = Self::zero();
        for (o, a) in out.coeffs.iter_mut().zip(acc) {
            *o = reduce(a);
        }
        out
    }

    /// Ring product via the NTT.
    pub fn mul(&self, other: &Self) -> Self {
        self.ntt().pointwise(&other.ntt()).inverse()
    }

    /// `scale * self * x^shift` in `R_q`. Coefficients that wrap past
    /// `x^(n-1)` pick up a sign flip since `x^n = -1`.
    pub fn monomial_shift(&self, shift: usize, scale: i64) -> Self {
        assert!(shift < N, "shift {shift} out of range");
        let f = reduce(scale) as i64;
        let mut out = Self::zero();
        for (i, &a) in self.coeffs.iter().enumerate() {
            let k = i + shift;
            let v = a as i64 * f;
            if k < N {
                out.coeffs[k] = reduce(v);
            } else {
                out.coeffs[k - N] = reduce(-v);
            }
        }
        out
    }

    pub fn ntt(&self) -> NttPoly {
        let mut a = [0u64; N];
        for (dst, &c) in a.iter_mut().zip(&self.coeffs) {
            *dst = to_unsigned(c) as u64;
        }
        let zetas = zetas();
        let mut k = 0;
        let mut len = N / 2;
        while len > 0 {
            let mut start = 0;
            while start < N {
                k += 1;
                let zeta = zetas[k];
                for j in start..start + len {
                    let t = zeta * a[j + len] % QU;
                    a[j + len] = (a[j] + QU - t) % QU;
                    a[j] = (a[j] + t) % QU;
                }
                start += 2 * len;
            }
            len >>= 1;
        }
        NttPoly(a)
    }
}

/// A polynomial in the NTT domain, coefficients in `[0, q)`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct NttPoly([u64; N]);

impl NttPoly {
    pub fn zero() -> Self {
        NttPoly([0; N])
    }

    /// Reinterpret the residues of `p` as NTT-domain values.
    pub fn from_values(p: &Poly) -> Self {
        let mut a = [0u64; N];
        for (dst, &c) in a.iter_mut().zip(p.coeffs()) {
            *dst = to_unsigned(c) as u64;
        }
        NttPoly(a)
    }

    pub fn pointwise(&self, other: &Self) -> Self {
        let mut out = [0u64; N];
        for ((o, a), b) in out.iter_mut().zip(&self.0).zip(&other.0) {
            *o = a * b % QU;
        }
        NttPoly(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = (*a + b) % QU;
        }
    }

    pub fn inverse(&self) -> Poly {
        let mut a = self.0;
        let zetas = zetas();
        let mut k = N;
        let mut len = 1;
        while len < N {
            let mut start = 0;
            while start < N {
                k -= 1;
                let zeta = QU - zetas[k];
                for j in start..start + len {
                    let t = a[j];
                    a[j] = (t + a[j + len]) % QU;
                    let diff = (t + QU - a[j + len]) % QU;
                    a[j + len] = zeta * diff % QU;
                }
                start += 2 * len;
            }
            len <<= 1;
        }
        // n^{-1} mod q
        let n_inv = pow_mod(N as u64, QU - 2);
        let mut out = [0i32; N];
        for (o, v) in out.iter_mut().zip(a) {
            *o = reduce((v * n_inv % QU) as i64);
        }
        Poly::from_centered(out)
    }
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= QU;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % QU;
        }
        base = base * base % QU;
        exp >>= 1;
    }
    acc
}

/// Powers of the root of unity in bit-reversed order.
fn zetas() -> &'static [u64; N] {
    static ZETAS: OnceLock<[u64; N]> = OnceLock::new();
    ZETAS.get_or_init(|| {
        let mut z = [0u64; N];
        for (i, slot) in z.iter_mut().enumerate() {
            let rev = (i as u8).reverse_bits() as u64;
            *slot = pow_mod(ROOT_OF_UNITY, rev);
        }
        z
    })
}

/// Vector of polynomials.
pub type PolyVec = Vec<Poly>;

pub fn vec_add(a: &[Poly], b: &[Poly]) -> PolyVec {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub fn vec_sub(a: &[Poly], b: &[Poly]) -> PolyVec {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub fn vec_norm_below(v: &[Poly], bound: i32) -> bool {
    v.iter().all(|p| p.norm_below(bound))
}
