//! Negacyclic number-theoretic transform over `Z_q[x]/(x^N + 1)`.
//!
//! Forward is an in-place Cooley-Tukey pass over `ψ`-powers stored in
//! bit-reversed order, so no separate pre-twist is needed; inverse is the
//! matching Gentleman-Sande pass followed by scaling with `N^{-1}`. Slot `i`
//! of a transformed row holds `p(ψ^(2·brv(i) + 1))`, where `brv` reverses the
//! `log2 N` low bits.

use crate::arith::{primitive_2n_root, Modulus};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NttTable {
    modulus: Modulus,
    n: usize,
    psi: u64,
    /// `ψ^brv(k)`
    forward_twiddles: Vec<u64>,
    /// `ψ^-brv(k)`
    inverse_twiddles: Vec<u64>,
    n_inverse: u64,
}

#[inline]
pub fn bit_reverse(x: usize, log_n: u32) -> usize {
    if log_n == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - log_n)
    }
}

impl NttTable {
    pub fn new(modulus: Modulus, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("ring degree {n} must be a power of two >= 2")));
        }
        let psi = primitive_2n_root(&modulus, n)?;
        let psi_inv = modulus.inv(psi)?;
        let log_n = n.trailing_zeros();
        let mut forward_twiddles = vec![0; n];
        let mut inverse_twiddles = vec![0; n];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for k in 0..n {
            let r = bit_reverse(k, log_n);
            forward_twiddles[r] = pw;
            inverse_twiddles[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let n_inverse = modulus.inv(n as u64 % modulus.value())?;
        Ok(Self { modulus, n, psi, forward_twiddles, inverse_twiddles, n_inverse })
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The primitive `2N`-th root the table was built from.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn n_inverse(&self) -> u64 {
        self.n_inverse
    }

    /// The evaluation point held by output slot `i`.
    pub fn evaluation_point(&self, i: usize) -> u64 {
        let e = 2 * bit_reverse(i, self.n.trailing_zeros()) as u64 + 1;
        self.modulus.pow(self.psi, e)
    }

    pub fn forward(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = &self.modulus;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let s = self.forward_twiddles[m + i];
                let start = 2 * i * t;
                for j in start..start + t {
                    let u = a[j];
                    let v = q.mul(a[j + t], s);
                    a[j] = q.add(u, v);
                    a[j + t] = q.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = &self.modulus;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut start = 0;
            for i in 0..h {
                let s = self.inverse_twiddles[h + i];
                for j in start..start + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = q.add(u, v);
                    a[j + t] = q.mul(q.sub(u, v), s);
                }
                start += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = q.mul(*x, self.n_inverse);
        }
    }
}

/// Pointwise product of two transformed rows.
pub fn pointwise_mul(a: &[u64], b: &[u64], q: &Modulus) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| q.mul(x, y)).collect()
}

/// Schoolbook product reduced modulo `x^N + 1`. Quadratic; used as the
/// coefficient-domain reference.
pub fn negacyclic_schoolbook(a: &[u64], b: &[u64], q: &Modulus) -> Vec<u64> {
    let n = a.len();
    assert_eq!(b.len(), n);
    let mut out = vec![0u64; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let p = q.mul(x, y);
            let k = i + j;
            if k < n {
                out[k] = q.add(out[k], p);
            } else {
                out[k - n] = q.sub(out[k - n], p);
            }
        }
    }
    out
}
