//! Coefficient encoding: the message polynomial is `round(Δ·z)` coefficient by
//! coefficient, so ciphertext multiplication realizes negacyclic convolution
//! of message vectors.

use num_bigint::BigInt;
use num_traits::{Float, ToPrimitive};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub coeffs: Vec<BigInt>,
    pub scale: f64,
}

impl Message {
    pub fn from_integers(coeffs: &[i64], scale: f64) -> Self {
        Self { coeffs: coeffs.iter().map(|&c| BigInt::from(c)).collect(), scale }
    }

    pub fn zero(n: usize, scale: f64) -> Self {
        Self { coeffs: vec![BigInt::from(0); n], scale }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// `m_i = round(Δ·z_i)`; requires `|z_i|·Δ < 2^(w-2)`.
pub fn encode<F: Float>(z: &[F], scale: f64, word_bits: u32) -> Result<Message> {
    let limit = 2f64.powi(word_bits as i32 - 2);
    let coeffs = z
        .iter()
        .enumerate()
        .map(|(index, &zi)| {
            let scaled = zi.to_f64().unwrap_or(f64::NAN) * scale;
            if !scaled.is_finite() || scaled.abs() >= limit {
                return Err(Error::EncodingOverflow { index, value: scaled.abs(), limit });
            }
            Ok(BigInt::from(scaled.round() as i64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Message { coeffs, scale })
}

/// `z_i = m_i / Δ`.
pub fn decode<F: Float>(m: &Message) -> Vec<F> {
    m.coeffs
        .iter()
        .map(|c| {
            let v = c.to_f64().unwrap_or(f64::NAN) / m.scale;
            F::from(v).unwrap_or_else(F::nan)
        })
        .collect()
}

/// Exact negacyclic convolution: the message-side counterpart of ciphertext
/// multiplication.
pub fn negacyclic_product(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len();
    assert_eq!(b.len(), n, "operands must have equal length");
    let mut out = vec![BigInt::from(0); n];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let p = x * y;
            if i + j < n {
                out[i + j] += p;
            } else {
                out[i + j - n] -= p;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let m = encode(&[0.0f64; 8], 4096.0, 16).unwrap();
        assert!(m.coeffs.iter().all(|c| *c == BigInt::from(0)));
        let m = encode(&[1.5f64], 2f64.powi(30), 62).unwrap();
        assert_eq!(m.coeffs[0], BigInt::from(1_610_612_736i64));
    }

    #[test]
    fn round_trip_within_half_step() {
        let z: Vec<f64> = (0..64).map(|i| (i as f64 * 0.377).sin() * 0.9).collect();
        let scale = 2f64.powi(12);
        let back: Vec<f64> = decode(&encode(&z, scale, 16).unwrap());
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() <= 0.5 / scale + 1e-15);
        }
        let back32: Vec<f32> = decode(&encode(&z, scale, 16).unwrap());
        assert!((back32[3] as f64 - back[3]).abs() < 1e-6);
    }

    #[test]
    fn negacyclic_wraps_with_sign() {
        let big = |v: &[i64]| v.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        // (1 + x)(x^3) = x^3 + x^4 = x^3 - 1 in Z[x]/(x^4 + 1)
        assert_eq!(negacyclic_product(&big(&[1, 1, 0, 0]), &big(&[0, 0, 0, 1])), big(&[-1, 0, 0, 1]));
    }

    #[test]
    fn headroom_is_enforced() {
        let err = encode(&[0.0, 4.0f64], 4096.0, 16).unwrap_err();
        assert!(matches!(err, Error::EncodingOverflow { index: 1, .. }));
        assert!(encode(&[f64::NAN], 1.0, 16).is_err());
    }
}
