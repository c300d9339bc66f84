//! Ciphertexts, public-key encryption and decryption.

use num_bigint::BigInt;
use rand::Rng;

use crate::encoding::Message;
use crate::error::{Error, Result};
use crate::keys::{PublicKey, SecretKey};
use crate::params::Context;
use crate::poly::{Domain, RnsPoly};
use crate::rns::reconstruct_all_centered;
use crate::sampling::{centered_binomial, ternary};

/// `(c0, c1)` over the first `level` Q-limbs, with the current scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    c0: RnsPoly,
    c1: RnsPoly,
    scale: f64,
}

impl Ciphertext {
    pub fn new(c0: RnsPoly, c1: RnsPoly, scale: f64) -> Result<Self> {
        if c0.domain() != c1.domain() {
            return Err(Error::DomainMismatch { expected: c0.domain(), found: c1.domain() });
        }
        if c0.level() != c1.level() {
            return Err(Error::LevelMismatch(c0.level(), c1.level()));
        }
        if c0.special() != 0 || c1.special() != 0 {
            return Err(Error::LayoutMismatch("ciphertexts live over Q only".into()));
        }
        Ok(Self { c0, c1, scale })
    }

    /// `(m, 0)`: decrypts to `m` exactly under any key.
    pub fn trivial(m: &Message, level: usize, ctx: &Context) -> Result<Self> {
        let c0 = message_poly(m, level, ctx)?;
        let c1 = ctx.ring().zero(level, 0, Domain::Coefficient);
        Self::new(c0, c1, m.scale)
    }

    pub fn c0(&self) -> &RnsPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RnsPoly {
        &self.c1
    }

    pub fn level(&self) -> usize {
        self.c0.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn domain(&self) -> Domain {
        self.c0.domain()
    }

    pub fn into_parts(self) -> (RnsPoly, RnsPoly, f64) {
        (self.c0, self.c1, self.scale)
    }

    /// Modulus reduction without division: keeps the first `level` limbs.
    pub fn drop_to_level(&self, level: usize) -> Result<Self> {
        Self::new(self.c0.drop_to_level(level)?, self.c1.drop_to_level(level)?, self.scale)
    }

    pub fn to_coefficient(&self, ctx: &Context) -> Result<Self> {
        match self.domain() {
            Domain::Coefficient => Ok(self.clone()),
            Domain::Ntt => {
                let ring = ctx.ring();
                Self::new(ring.ntt_inverse(&self.c0)?, ring.ntt_inverse(&self.c1)?, self.scale)
            }
        }
    }
}

/// Homomorphic addition.
pub fn add(a: &Ciphertext, b: &Ciphertext, ctx: &Context) -> Result<Ciphertext> {
    if a.level() != b.level() {
        return Err(Error::LevelMismatch(a.level(), b.level()));
    }
    let ring = ctx.ring();
    Ciphertext::new(ring.add(&a.c0, &b.c0)?, ring.add(&a.c1, &b.c1)?, a.scale)
}

/// The message polynomial over the first `level` limbs, coefficient domain.
pub fn message_poly(m: &Message, level: usize, ctx: &Context) -> Result<RnsPoly> {
    if m.len() != ctx.n() {
        return Err(Error::LayoutMismatch(format!("message of length {} for N={}", m.len(), ctx.n())));
    }
    if level == 0 || level > ctx.max_level() {
        return Err(Error::InsufficientLevel { needed: level.max(1), have: ctx.max_level() });
    }
    RnsPoly::from_rows(ctx.q_basis(level).reduce_all(&m.coeffs), level, 0, Domain::Coefficient)
}

/// `ct = v·pk + (m + e0, e1)`, at the top level and in the coefficient domain.
pub fn encrypt<R: Rng + ?Sized>(m: &Message, pk: &PublicKey, ctx: &Context, rng: &mut R) -> Result<Ciphertext> {
    let ring = ctx.ring();
    let params = ctx.params();
    let (n, l) = (params.n, params.l());
    let eta = params.binomial_eta();
    let v = ring.ntt_forward(&ring.from_signed(&ternary(n, rng), l, 0)?)?;
    let e0 = ring.from_signed(&centered_binomial(n, eta, rng), l, 0)?;
    let e1 = ring.from_signed(&centered_binomial(n, eta, rng), l, 0)?;
    let vb = ring.ntt_inverse(&ring.mul(&v, &pk.b)?)?;
    let va = ring.ntt_inverse(&ring.mul(&v, &pk.a)?)?;
    let c0 = ring.add(&ring.add(&vb, &message_poly(m, l, ctx)?)?, &e0)?;
    let c1 = ring.add(&va, &e1)?;
    Ciphertext::new(c0, c1, m.scale)
}

/// `Σ_i d_i · s^i` over the limbs of `parts`, reconstructed and centered.
pub fn decrypt_parts(parts: &[&RnsPoly], sk: &SecretKey, ctx: &Context) -> Result<Vec<BigInt>> {
    let first = parts.first().ok_or_else(|| Error::LayoutMismatch("nothing to decrypt".into()))?;
    let level = first.level();
    let ring = ctx.ring();
    let s = sk.power_ntt(1, level, 0, ctx);
    let to_ntt = |p: &RnsPoly| match p.domain() {
        Domain::Ntt => Ok(p.clone()),
        Domain::Coefficient => ring.ntt_forward(p),
    };
    // Horner: ((d_k s + d_{k-1}) s + …) + d_0
    let mut acc = to_ntt(parts[parts.len() - 1])?;
    for p in parts[..parts.len() - 1].iter().rev() {
        acc = ring.add(&ring.mul(&acc, &s)?, &to_ntt(p)?)?;
    }
    let coeffs = ring.ntt_inverse(&acc)?;
    Ok(reconstruct_all_centered(coeffs.rows(), ctx.q_basis(level)))
}

/// Centered CRT reconstruction of `c0 + c1·s mod Q_level`.
pub fn decrypt(ct: &Ciphertext, sk: &SecretKey, ctx: &Context) -> Result<Message> {
    let coeffs = decrypt_parts(&[&ct.c0, &ct.c1], sk, ctx)?;
    Ok(Message { coeffs, scale: ct.scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::{inf_norm, keygen};
    use crate::params::Preset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_message(ctx: &Context, rng: &mut ChaCha20Rng) -> Message {
        let bound = 1i64 << 12;
        let c: Vec<i64> = (0..ctx.n()).map(|_| rng.gen_range(-bound..=bound)).collect();
        Message::from_integers(&c, ctx.params().scale)
    }

    /// `eta·(1 + ‖v‖_1 + ‖s‖_1)` with `‖v‖_1 <= N`: the support bound of the
    /// fresh decryption error.
    fn clean_bound(ctx: &Context) -> f64 {
        let p = ctx.params();
        p.binomial_eta() as f64 * (1 + p.n + p.hamming_weight) as f64
    }

    #[test]
    fn trivial_decrypts_exactly() {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let keys = keygen(&ctx, 1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let m = random_message(&ctx, &mut rng);
        let ct = Ciphertext::trivial(&m, 3, &ctx).unwrap();
        assert_eq!(decrypt(&ct, &keys.secret, &ctx).unwrap(), m);
    }

    #[test]
    fn round_trip_and_addition_within_bound() {
        for preset in [Preset::Toy8, Preset::Paper30] {
            let ctx = Context::new(preset.params()).unwrap();
            let keys = keygen(&ctx, 11).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(12);
            let bound = clean_bound(&ctx);
            let trials = if preset == Preset::Toy8 { 100 } else { 10 };
            for _ in 0..trials {
                let m1 = random_message(&ctx, &mut rng);
                let m2 = random_message(&ctx, &mut rng);
                let ct1 = encrypt(&m1, &keys.public, &ctx, &mut rng).unwrap();
                let ct2 = encrypt(&m2, &keys.public, &ctx, &mut rng).unwrap();
                let d1 = decrypt(&ct1, &keys.secret, &ctx).unwrap();
                let err: Vec<BigInt> = d1.coeffs.iter().zip(&m1.coeffs).map(|(a, b)| a - b).collect();
                assert!(inf_norm(&err) <= bound);
                let sum = decrypt(&add(&ct1, &ct2, &ctx).unwrap(), &keys.secret, &ctx).unwrap();
                let err: Vec<BigInt> = sum
                    .coeffs
                    .iter()
                    .zip(m1.coeffs.iter().zip(&m2.coeffs))
                    .map(|(s, (a, b))| s - a - b)
                    .collect();
                assert!(inf_norm(&err) <= 2.0 * bound);
            }
        }
    }

    #[test]
    fn encryption_is_deterministic_under_seed() {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let keys = keygen(&ctx, 5).unwrap();
        let m = Message::from_integers(&[1, 2, 3, 4, 5, 6, 7, 8], ctx.params().scale);
        let a = encrypt(&m, &keys.public, &ctx, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = encrypt(&m, &keys.public, &ctx, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_encryptions_add_to_near_zero() {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let keys = keygen(&ctx, 5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let zero = Message::zero(8, ctx.params().scale);
        let a = encrypt(&zero, &keys.public, &ctx, &mut rng).unwrap();
        let b = encrypt(&zero, &keys.public, &ctx, &mut rng).unwrap();
        let d = decrypt(&add(&a, &b, &ctx).unwrap(), &keys.secret, &ctx).unwrap();
        assert!(inf_norm(&d.coeffs) <= 2.0 * clean_bound(&ctx));
    }

    #[test]
    fn level_mismatch_on_add() {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let m = Message::zero(8, 1.0);
        let a = Ciphertext::trivial(&m, 3, &ctx).unwrap();
        let b = a.drop_to_level(2).unwrap();
        assert!(matches!(add(&a, &b, &ctx), Err(Error::LevelMismatch(3, 2))));
    }
}
