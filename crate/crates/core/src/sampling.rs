//! Secret, ephemeral and error distributions.

use rand::seq::index::sample;
use rand::Rng;

/// Exactly `weight` nonzero coefficients, each `±1` with equal probability.
pub fn hamming_ternary<R: Rng + ?Sized>(n: usize, weight: usize, rng: &mut R) -> Vec<i64> {
    let mut out = vec![0i64; n];
    for idx in sample(rng, n, weight) {
        out[idx] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    out
}

/// Ternary with `P(0) = 1/2`, `P(±1) = 1/4`.
pub fn ternary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n)
        .map(|_| match rng.gen_range(0u8..4) {
            0 => 1,
            1 => -1,
            _ => 0,
        })
        .collect()
}

/// Centered binomial: the difference of two sums of `eta` fair bits.
/// Supported on `[-eta, eta]` with variance `eta / 2`.
pub fn centered_binomial<R: Rng + ?Sized>(n: usize, eta: u32, rng: &mut R) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let mut acc = 0i64;
            let mut left = eta;
            while left > 0 {
                let take = left.min(32);
                let mask = if take == 32 { u32::MAX } else { (1u32 << take) - 1 };
                let a = rng.gen::<u32>() & mask;
                let b = rng.gen::<u32>() & mask;
                acc += a.count_ones() as i64 - b.count_ones() as i64;
                left -= take;
            }
            acc
        })
        .collect()
}
