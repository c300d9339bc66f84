//! Word-size modular arithmetic.
//!
//! Residues live in `u64` words. Products are formed in `u128` and reduced with
//! the classic Barrett estimate `floor(floor(x / 2^(k-1)) * mu / 2^(k+1))`,
//! where `k` is the bit length of the modulus and `mu = floor(4^k / q)`. The
//! estimate is off by at most two multiples of `q`, so at most two conditional
//! subtractions follow. Moduli up to 62 bits are supported.

use crate::error::{Error, Result};

/// Largest supported modulus bit length.
pub const MAX_MODULUS_BITS: u32 = 62;

/// An odd word-size modulus together with its Barrett constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    barrett: u128,
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value < 3 || value % 2 == 0 {
            return Err(Error::InvalidModulus(value, "modulus must be odd and at least 3"));
        }
        let bits = 64 - value.leading_zeros();
        if bits > MAX_MODULUS_BITS {
            return Err(Error::InvalidModulus(value, "modulus wider than 62 bits"));
        }
        let barrett = (1u128 << (2 * bits)) / value as u128;
        Ok(Self { value, bits, barrett })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn barrett_constant(&self) -> u128 {
        self.barrett
    }

    /// Reduces any `x < q^2` (in particular any product of two residues).
    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let q = self.value as u128;
        debug_assert!(x < q * q);
        let estimate = ((x >> (self.bits - 1)) * self.barrett) >> (self.bits + 1);
        let mut r = x - estimate * q;
        if r >= q {
            r -= q;
        }
        if r >= q {
            r -= q;
        }
        r as u64
    }

    /// Reduces an arbitrary word.
    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.value
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.value as i64) as u64
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        mod_add(a, b, self)
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        mod_sub(a, b, self)
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mod_mul(a, b, self)
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base %= self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by Fermat's little theorem; only valid for prime moduli.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.value;
        if a == 0 {
            return Err(Error::NotInvertible(a, self.value));
        }
        Ok(self.pow(a, self.value - 2))
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// `(a + b) mod q` for `a, b` in `[0, q)`.
#[inline]
pub fn mod_add(a: u64, b: u64, m: &Modulus) -> u64 {
    let s = a + b;
    if s >= m.value {
        s - m.value
    } else {
        s
    }
}

/// `(a - b) mod q` for `a, b` in `[0, q)`.
#[inline]
pub fn mod_sub(a: u64, b: u64, m: &Modulus) -> u64 {
    if a >= b {
        a - b
    } else {
        a + m.value - b
    }
}

/// `(a * b) mod q` for `a, b` in `[0, q)`, via Barrett reduction.
#[inline]
pub fn mod_mul(a: u64, b: u64, m: &Modulus) -> u64 {
    m.reduce_wide(a as u128 * b as u128)
}

fn mul_mod_u64(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, n);
        }
        base = mul_mod_u64(base, base, n);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` smallest primes `q ≡ 1 (mod 2n)` with `q > 2^(bits-1)`, all of
/// exactly `bits` bits, in increasing order.
pub fn ntt_primes(bits: u32, n: usize, count: usize) -> Result<Vec<u64>> {
    if !(3..=MAX_MODULUS_BITS).contains(&bits) {
        return Err(Error::InvalidParams(format!("word width {bits} outside 3..=62")));
    }
    if !n.is_power_of_two() {
        return Err(Error::InvalidParams(format!("ring degree {n} is not a power of two")));
    }
    let step = 2 * n as u64;
    let lower = 1u64 << (bits - 1);
    let upper = 1u64 << bits;
    // first candidate above 2^(bits-1) that is 1 mod 2n
    let mut candidate = lower - lower % step + 1;
    if candidate <= lower {
        candidate += step;
    }
    let mut primes = Vec::with_capacity(count);
    while primes.len() < count {
        if candidate >= upper {
            return Err(Error::InvalidParams(format!(
                "only {} primes of {bits} bits are 1 mod {step}",
                primes.len()
            )));
        }
        if is_prime(candidate) {
            primes.push(candidate);
        }
        candidate += step;
    }
    Ok(primes)
}

/// A primitive `2n`-th root of unity modulo the prime `q`, i.e. `psi` with
/// `psi^n = -1`. Deterministic: uses the smallest base that works.
pub fn primitive_2n_root(q: &Modulus, n: usize) -> Result<u64> {
    let two_n = 2 * n as u64;
    let qv = q.value();
    if !n.is_power_of_two() || (qv - 1) % two_n != 0 {
        return Err(Error::InvalidModulus(qv, "modulus is not 1 mod 2N"));
    }
    let cofactor = (qv - 1) / two_n;
    for base in 2..qv {
        let psi = q.pow(base, cofactor);
        // order divides 2n; it is exactly 2n iff psi^n = -1
        if q.pow(psi, n as u64) == qv - 1 {
            return Ok(psi);
        }
    }
    Err(Error::InvalidModulus(qv, "no primitive 2N-th root"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn small_examples() {
        let m17 = Modulus::new(17).unwrap();
        assert_eq!(mod_add(0, 5, &m17), 5);
        assert_eq!(mod_add(16, 1, &m17), 0);
        let m7 = Modulus::new(7).unwrap();
        assert_eq!(mod_mul(3, 4, &m7), 5);
        for x in 0..7 {
            assert_eq!(mod_mul(1, x, &m7), x);
        }
    }

    #[test]
    fn exhaustive_small_moduli() {
        for q in (3..=97u64).filter(|&q| q % 2 == 1) {
            let m = Modulus::new(q).unwrap();
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(mod_add(a, b, &m), (a + b) % q);
                    assert_eq!(mod_sub(a, b, &m), (a + q - b) % q);
                    assert_eq!(mod_mul(a, b, &m), a * b % q);
                }
            }
        }
    }

    #[test]
    fn randomized_30_bit() {
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let primes = ntt_primes(30, 4096, 3).unwrap();
        for &q in &primes {
            let m = Modulus::new(q).unwrap();
            for _ in 0..100_000 / primes.len() {
                let a = rng.gen_range(0..q);
                let b = rng.gen_range(0..q);
                let wide = a as u128 * b as u128;
                assert_eq!(mod_mul(a, b, &m) as u128, wide % q as u128);
                assert_eq!(mod_add(a, b, &m) as u128, (a as u128 + b as u128) % q as u128);
            }
        }
    }

    #[test]
    fn barrett_at_62_bits() {
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let q = (1u64 << 62) - 57;
        assert!(is_prime(q));
        let m = Modulus::new(q).unwrap();
        for _ in 0..10_000 {
            let a = rng.gen_range(0..q);
            let b = rng.gen_range(0..q);
            assert_eq!(mod_mul(a, b, &m) as u128, (a as u128 * b as u128) % q as u128);
        }
        assert_eq!(mod_mul(q - 1, q - 1, &m), 1);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(Modulus::new(16).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new(u64::MAX).is_err());
    }

    #[test]
    fn prime_selection_is_smallest_upward() {
        let primes = ntt_primes(16, 8, 4).unwrap();
        let mut expected = Vec::new();
        let mut c = (1u64 << 15) + 1;
        while expected.len() < 4 {
            if (2..c).take_while(|d| d * d <= c).all(|d| c % d != 0) {
                expected.push(c);
            }
            c += 16;
        }
        assert_eq!(primes, expected);
        for q in ntt_primes(30, 4096, 6).unwrap() {
            assert_eq!(q % 8192, 1);
            assert_eq!(64 - q.leading_zeros(), 30);
        }
    }

    #[test]
    fn root_has_exact_order() {
        for (bits, n) in [(16, 8), (30, 4096), (20, 64)] {
            for q in ntt_primes(bits, n, 2).unwrap() {
                let m = Modulus::new(q).unwrap();
                let psi = primitive_2n_root(&m, n).unwrap();
                assert_eq!(m.pow(psi, 2 * n as u64), 1);
                assert_eq!(m.pow(psi, n as u64), q - 1);
            }
        }
    }

    #[test]
    fn inverse_and_center() {
        let m = Modulus::new(97).unwrap();
        for a in 1..97 {
            assert_eq!(m.mul(a, m.inv(a).unwrap()), 1);
        }
        assert!(m.inv(0).is_err());
        assert_eq!(m.center(96), -1);
        assert_eq!(m.center(48), 48);
        assert_eq!(m.center(49), -48);
    }
}
