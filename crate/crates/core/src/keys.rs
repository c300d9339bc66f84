//! Key generation: secret key, public key, the evaluation key for `s²` and
//! the extra evaluation key for `s³`, both sharing one `evk1` component.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::params::Context;
use crate::poly::{Domain, RnsPoly};
use crate::rns::reconstruct_all_centered;
use crate::sampling::{centered_binomial, hamming_ternary};

#[derive(Clone, Debug, PartialEq)]
pub struct SecretKey {
    coeffs: Vec<i64>,
    /// `s` over every Q- and P-limb, NTT domain.
    ntt: RnsPoly,
}

impl SecretKey {
    pub fn from_coeffs(coeffs: Vec<i64>, ctx: &Context) -> Result<Self> {
        if coeffs.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(Error::InvalidParams("secret coefficients must be ternary".into()));
        }
        let ring = ctx.ring();
        let ntt = ring.ntt_forward(&ring.from_signed(&coeffs, ctx.max_level(), ctx.k())?)?;
        Ok(Self { coeffs, ntt })
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn hamming_weight(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }

    /// `‖s‖_1`.
    pub fn l1_norm(&self) -> usize {
        self.hamming_weight()
    }

    /// `s^power` restricted to the `(level, special)` layout, NTT domain.
    pub fn power_ntt(&self, power: u32, level: usize, special: usize, ctx: &Context) -> RnsPoly {
        let base = restrict(&self.ntt, level, special, ctx.max_level());
        let ring = ctx.ring();
        let mut acc = base.clone();
        for _ in 1..power {
            acc = ring.mul(&acc, &base).expect("same layout");
        }
        acc
    }
}

/// Selects rows `..level` of the Q part and, if `special > 0`, all P rows of a
/// full-layout polynomial.
pub(crate) fn restrict(full: &RnsPoly, level: usize, special: usize, max_level: usize) -> RnsPoly {
    let rows = full.rows();
    let mut out: Vec<Vec<u64>> = rows[..level].to_vec();
    if special > 0 {
        out.extend_from_slice(&rows[max_level..max_level + special]);
    }
    RnsPoly::from_rows(out, level, special, full.domain()).expect("restriction keeps layout consistent")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    pub b: RnsPoly,
    pub a: RnsPoly,
}

/// `(evk0, evk1)` with `evk0 + s·evk1 ≡ e + P·s^power (mod PQ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalKey {
    power: u8,
    pub evk0: RnsPoly,
    pub evk1: RnsPoly,
}

impl EvalKey {
    pub fn new(power: u8, evk0: RnsPoly, evk1: RnsPoly) -> Result<Self> {
        if power != 2 && power != 3 {
            return Err(Error::WrongKeyPower { expected: 2, found: power });
        }
        if evk0.domain() != Domain::Ntt || evk1.domain() != Domain::Ntt {
            return Err(Error::DomainMismatch { expected: Domain::Ntt, found: Domain::Coefficient });
        }
        Ok(Self { power, evk0, evk1 })
    }

    pub fn power(&self) -> u8 {
        self.power
    }

    /// Whether two keys carry bit-identical `evk1` rows.
    pub fn shares_evk1(&self, other: &EvalKey) -> bool {
        self.evk1 == other.evk1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    /// Relinearizes `s²`.
    pub evk: EvalKey,
    /// Relinearizes `s³`; shares `evk1` with [`KeySet::evk`].
    pub evk_cubed: EvalKey,
}

/// Deterministic key generation from a seed.
///
/// Sampling order: `s`, `a`, `e`, `evk1`, `e'`, `e''`. The two evaluation-key
/// errors are independent draws, so `evk − evk'` is `P(s² − s³) + (e' − e'')`.
pub fn keygen(ctx: &Context, seed: u64) -> Result<KeySet> {
    let params = ctx.params();
    let ring = ctx.ring();
    let (n, l, k) = (params.n, params.l(), params.k());
    let eta = params.binomial_eta();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let secret = SecretKey::from_coeffs(hamming_ternary(n, params.hamming_weight, &mut rng), ctx)?;

    let s_q = secret.power_ntt(1, l, 0, ctx);
    let a = ring.sample_uniform(l, 0, Domain::Ntt, &mut rng);
    let e = ring.ntt_forward(&ring.from_signed(&centered_binomial(n, eta, &mut rng), l, 0)?)?;
    let b = ring.add(&ring.neg(&ring.mul(&a, &s_q)?), &e)?;
    let public = PublicKey { b, a };

    let evk1 = ring.sample_uniform(l, k, Domain::Ntt, &mut rng);
    let e2 = centered_binomial(n, eta, &mut rng);
    let e3 = centered_binomial(n, eta, &mut rng);
    let evk = EvalKey::new(2, switching_key_body(ctx, &secret, &evk1, &e2, 2)?, evk1.clone())?;
    let evk_cubed = EvalKey::new(3, switching_key_body(ctx, &secret, &evk1, &e3, 3)?, evk1)?;
    Ok(KeySet { secret, public, evk, evk_cubed })
}

/// `-s·evk1 + e + P·s^power` over the full `Q ∪ P` layout.
fn switching_key_body(ctx: &Context, sk: &SecretKey, evk1: &RnsPoly, err: &[i64], power: u32) -> Result<RnsPoly> {
    let ring = ctx.ring();
    let (l, k) = (ctx.max_level(), ctx.k());
    let s = sk.power_ntt(1, l, k, ctx);
    let target = sk.power_ntt(power, l, k, ctx);
    // P ≡ 0 on the P-limbs
    let mut p_target = target.into_rows();
    for (j, row) in p_target.iter_mut().enumerate() {
        if j < l {
            let q = ring.q_modulus(j);
            let p_mod = ctx.p_mod_q(j);
            row.iter_mut().for_each(|x| *x = q.mul(*x, p_mod));
        } else {
            row.iter_mut().for_each(|x| *x = 0);
        }
    }
    let p_target = RnsPoly::from_rows(p_target, l, k, Domain::Ntt)?;
    let e = ring.ntt_forward(&ring.from_signed(err, l, k)?)?;
    let body = ring.add(&ring.neg(&ring.mul(&s, evk1)?), &e)?;
    ring.add(&body, &p_target)
}

/// Centered infinity norm of a vector of big integers, as `f64`.
pub fn inf_norm(values: &[BigInt]) -> f64 {
    values
        .iter()
        .map(|v| v.abs())
        .max()
        .unwrap_or_else(BigInt::zero)
        .to_f64()
        .unwrap_or(f64::INFINITY)
}

/// Exact key-equation residual norms, computed by CRT reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyResiduals {
    /// `‖b + a·s‖_∞`
    pub public: f64,
    /// `‖evk0 + s·evk1 − P·s²‖_∞`
    pub evk: f64,
    /// `‖evk'0 + s·evk'1 − P·s³‖_∞`
    pub evk_cubed: f64,
}

pub fn key_residuals(keys: &KeySet, ctx: &Context) -> Result<KeyResiduals> {
    let ring = ctx.ring();
    let (l, k) = (ctx.max_level(), ctx.k());
    let s_q = keys.secret.power_ntt(1, l, 0, ctx);
    let pk = ring.ntt_inverse(&ring.add(&keys.public.b, &ring.mul(&keys.public.a, &s_q)?)?)?;
    let public = inf_norm(&reconstruct_all_centered(pk.rows(), ctx.q_basis(l)));
    let evk_residual = |key: &EvalKey| -> Result<f64> {
        let s = keys.secret.power_ntt(1, l, k, ctx);
        let sum = ring.ntt_inverse(&ring.add(&key.evk0, &ring.mul(&s, &key.evk1)?)?)?;
        let values = reconstruct_all_centered(sum.rows(), ctx.extended_basis(l));
        let p = BigInt::from(ctx.p_basis().product().clone());
        let s_pow = secret_power_coeffs(keys.secret.coeffs(), key.power() as u32);
        let residual: Vec<BigInt> = values
            .iter()
            .zip(&s_pow)
            .map(|(v, sp)| v - &p * BigInt::from(*sp))
            .collect();
        Ok(inf_norm(&residual))
    };
    Ok(KeyResiduals { public, evk: evk_residual(&keys.evk)?, evk_cubed: evk_residual(&keys.evk_cubed)? })
}

/// Integer coefficients of `s^power` in `Z[x]/(x^N + 1)`, by schoolbook.
pub fn secret_power_coeffs(s: &[i64], power: u32) -> Vec<i64> {
    let mut acc = s.to_vec();
    for _ in 1..power {
        acc = negacyclic_i64(&acc, s);
    }
    acc
}

fn negacyclic_i64(a: &[i64], b: &[i64]) -> Vec<i64> {
    let n = a.len();
    let mut out = vec![0i64; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j < n {
                out[i + j] += x * y;
            } else {
                out[i + j - n] -= x * y;
            }
        }
    }
    out
}
