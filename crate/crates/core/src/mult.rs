//! Ciphertext multiplication.
//!
//! Two-input: NTT inputs, tensor into `(d0, d1, d2)`, relinearize `d2` with
//! `evk` through ModUp / ModDown, rescale once.
//!
//! Three-input: tensor into `(d0, d1, d2, d3)` with eight polynomial products
//! (two nested Karatsuba steps), relinearize `d2` with `evk` and `d3` with
//! `evk'`, rescale twice. Because `evk` and `evk'` share `evk1`, the `c1`
//! branch multiplies `(u2 + u3)` by `evk1` once; the `c0` branch adds both
//! products before a single INTT and ModDown. That leaves three evaluation-key
//! products and two ModDown calls.
//!
//! Every entry point has a `_counted` form that accumulates [`OpCounters`] for
//! that call only.

use serde::Serialize;

use crate::cipher::Ciphertext;
use crate::error::{Error, Result};
use crate::keys::{restrict, EvalKey};
use crate::params::Context;
use crate::poly::{Domain, RnsPoly};
use crate::rns::{mod_down, mod_up, rescale};

/// Operation counts for one multiplication call. Polynomial-level: a product
/// or transform of a whole multi-limb polynomial counts once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCounters {
    /// Products between ciphertext-derived polynomials during tensoring.
    pub tensor_products: usize,
    /// Products with an evaluation-key component.
    pub evk_products: usize,
    pub ntt_calls: usize,
    pub intt_calls: usize,
    pub mod_up_calls: usize,
    pub mod_down_calls: usize,
    pub rescale_calls: usize,
}

impl OpCounters {
    pub fn pointwise_products(&self) -> usize {
        self.tensor_products + self.evk_products
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

/// How `d1 = a0·b1 + a1·b0` is formed in two-input tensoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Tensor2Mode {
    /// Four products.
    #[default]
    Direct,
    /// Three products: `d1 = (a0 + a1)(b0 + b1) − d0 − d2`.
    Karatsuba,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    pub d0: RnsPoly,
    pub d1: RnsPoly,
    pub d2: RnsPoly,
    pub scale: f64,
}

impl Tensor2 {
    pub fn level(&self) -> usize {
        self.d0.level()
    }
}

/// Intermediates of the three-input tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3Scratch {
    pub f0: RnsPoly,
    pub f1: RnsPoly,
    pub f2: RnsPoly,
    pub g1: RnsPoly,
    pub g2: RnsPoly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub d0: RnsPoly,
    pub d1: RnsPoly,
    pub d2: RnsPoly,
    pub d3: RnsPoly,
    pub scratch: Tensor3Scratch,
    pub scale: f64,
}

impl Tensor3 {
    pub fn level(&self) -> usize {
        self.d0.level()
    }
}

fn to_ntt(p: &RnsPoly, ctx: &Context, counters: &mut OpCounters) -> Result<RnsPoly> {
    match p.domain() {
        Domain::Ntt => Ok(p.clone()),
        Domain::Coefficient => {
            counters.ntt_calls += 1;
            ctx.ring().ntt_forward(p)
        }
    }
}

fn ntt_pair(ct: &Ciphertext, ctx: &Context, counters: &mut OpCounters) -> Result<(RnsPoly, RnsPoly)> {
    Ok((to_ntt(ct.c0(), ctx, counters)?, to_ntt(ct.c1(), ctx, counters)?))
}

fn tensor_mul(a: &RnsPoly, b: &RnsPoly, ctx: &Context, counters: &mut OpCounters) -> Result<RnsPoly> {
    counters.tensor_products += 1;
    ctx.ring().mul(a, b)
}

fn check_levels(levels: &[usize]) -> Result<usize> {
    let first = levels[0];
    if let Some(&other) = levels.iter().find(|&&l| l != first) {
        return Err(Error::LevelMismatch(first, other));
    }
    Ok(first)
}

pub fn tensor2(a: &Ciphertext, b: &Ciphertext, ctx: &Context) -> Result<Tensor2> {
    tensor2_counted(a, b, Tensor2Mode::Direct, ctx, &mut OpCounters::default())
}

pub fn tensor2_counted(
    a: &Ciphertext,
    b: &Ciphertext,
    mode: Tensor2Mode,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Tensor2> {
    check_levels(&[a.level(), b.level()])?;
    let ring = ctx.ring();
    let (a0, a1) = ntt_pair(a, ctx, counters)?;
    let (b0, b1) = ntt_pair(b, ctx, counters)?;
    let d0 = tensor_mul(&a0, &b0, ctx, counters)?;
    let d2 = tensor_mul(&a1, &b1, ctx, counters)?;
    let d1 = match mode {
        Tensor2Mode::Direct => ring.add(&tensor_mul(&a0, &b1, ctx, counters)?, &tensor_mul(&a1, &b0, ctx, counters)?)?,
        Tensor2Mode::Karatsuba => {
            let cross = tensor_mul(&ring.add(&a0, &a1)?, &ring.add(&b0, &b1)?, ctx, counters)?;
            ring.sub(&ring.sub(&cross, &d0)?, &d2)?
        }
    };
    Ok(Tensor2 { d0, d1, d2, scale: a.scale() * b.scale() })
}

pub fn tensor3(ct1: &Ciphertext, ct2: &Ciphertext, ct3: &Ciphertext, ctx: &Context) -> Result<Tensor3> {
    tensor3_counted(ct1, ct2, ct3, ctx, &mut OpCounters::default())
}

/// Eight products:
/// `f0 = c¹₀c²₀`, `f2 = c¹₁c²₁`, `f1 = (c¹₀ + c¹₁)(c²₀ + c²₁) − f0 − f2`, then
/// `d0 = f0c³₀`, `d3 = f2c³₁`, `g1 = f1c³₁`, `g2 = f2c³₀`,
/// `d1 = (f0 + f1)(c³₀ + c³₁) − g1 − d0`, `d2 = g1 + g2`.
pub fn tensor3_counted(
    ct1: &Ciphertext,
    ct2: &Ciphertext,
    ct3: &Ciphertext,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Tensor3> {
    check_levels(&[ct1.level(), ct2.level(), ct3.level()])?;
    let ring = ctx.ring();
    let (a0, a1) = ntt_pair(ct1, ctx, counters)?;
    let (b0, b1) = ntt_pair(ct2, ctx, counters)?;
    let (c0, c1) = ntt_pair(ct3, ctx, counters)?;

    let f0 = tensor_mul(&a0, &b0, ctx, counters)?;
    let f2 = tensor_mul(&a1, &b1, ctx, counters)?;
    let cross = tensor_mul(&ring.add(&a0, &a1)?, &ring.add(&b0, &b1)?, ctx, counters)?;
    let f1 = ring.sub(&ring.sub(&cross, &f0)?, &f2)?;

    let d0 = tensor_mul(&f0, &c0, ctx, counters)?;
    let d3 = tensor_mul(&f2, &c1, ctx, counters)?;
    let g1 = tensor_mul(&f1, &c1, ctx, counters)?;
    let g2 = tensor_mul(&f2, &c0, ctx, counters)?;
    let cross = tensor_mul(&ring.add(&f0, &f1)?, &ring.add(&c0, &c1)?, ctx, counters)?;
    let d1 = ring.sub(&ring.sub(&cross, &g1)?, &d0)?;
    let d2 = ring.add(&g1, &g2)?;

    Ok(Tensor3 {
        d0,
        d1,
        d2,
        d3,
        scratch: Tensor3Scratch { f0, f1, f2, g1, g2 },
        scale: ct1.scale() * ct2.scale() * ct3.scale(),
    })
}

/// INTT, ModUp, and NTT of the appended P-rows only (the Q-rows are the input
/// rows, already transformed).
fn raise(d: &RnsPoly, ctx: &Context, counters: &mut OpCounters) -> Result<RnsPoly> {
    let level = d.level();
    let ring = ctx.ring();
    counters.intt_calls += 1;
    let coeff = ring.ntt_inverse(d)?;
    counters.mod_up_calls += 1;
    let mut rows = mod_up(coeff.rows(), ctx.mod_up_converter(level));
    rows[..level].clone_from_slice(d.rows());
    let mut up = ring.wrap(rows, level, ctx.k(), Domain::Coefficient);
    counters.ntt_calls += 1;
    ring.ntt_tail(&mut up, level);
    Ok(up)
}

/// INTT and ModDown back to the Q-limbs; coefficient domain out.
fn lower(x: &RnsPoly, ctx: &Context, counters: &mut OpCounters) -> Result<RnsPoly> {
    let level = x.level();
    counters.intt_calls += 1;
    let coeff = ctx.ring().ntt_inverse(x)?;
    counters.mod_down_calls += 1;
    let rows = mod_down(coeff.rows(), ctx.mod_down_constants(level));
    Ok(ctx.ring().wrap(rows, level, 0, Domain::Coefficient))
}

fn evk_mul(u: &RnsPoly, key_part: &RnsPoly, ctx: &Context, counters: &mut OpCounters) -> Result<RnsPoly> {
    counters.evk_products += 1;
    let key = restrict(key_part, u.level(), ctx.k(), ctx.max_level());
    ctx.ring().mul(u, &key)
}

fn finish(
    d0: &RnsPoly,
    d1: &RnsPoly,
    delta0: &RnsPoly,
    delta1: &RnsPoly,
    scale: f64,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Ciphertext> {
    let ring = ctx.ring();
    counters.intt_calls += 2;
    let c0 = ring.add(&ring.ntt_inverse(d0)?, delta0)?;
    let c1 = ring.add(&ring.ntt_inverse(d1)?, delta1)?;
    Ciphertext::new(c0, c1, scale)
}

fn check_power(key: &EvalKey, power: u8) -> Result<()> {
    if key.power() != power {
        return Err(Error::WrongKeyPower { expected: power, found: key.power() });
    }
    Ok(())
}

pub fn relinearize2(t: &Tensor2, evk: &EvalKey, ctx: &Context) -> Result<Ciphertext> {
    relinearize2_counted(t, evk, ctx, &mut OpCounters::default())
}

/// `(d0, d1) + ModDown(ModUp(d2)·evk)`, not rescaled.
pub fn relinearize2_counted(t: &Tensor2, evk: &EvalKey, ctx: &Context, counters: &mut OpCounters) -> Result<Ciphertext> {
    check_power(evk, 2)?;
    let u = raise(&t.d2, ctx, counters)?;
    let delta0 = lower(&evk_mul(&u, &evk.evk0, ctx, counters)?, ctx, counters)?;
    let delta1 = lower(&evk_mul(&u, &evk.evk1, ctx, counters)?, ctx, counters)?;
    finish(&t.d0, &t.d1, &delta0, &delta1, t.scale, ctx, counters)
}

pub fn relinearize3(t: &Tensor3, evk: &EvalKey, evk_cubed: &EvalKey, ctx: &Context) -> Result<Ciphertext> {
    relinearize3_counted(t, evk, evk_cubed, ctx, &mut OpCounters::default())
}

pub fn relinearize3_counted(
    t: &Tensor3,
    evk: &EvalKey,
    evk_cubed: &EvalKey,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Ciphertext> {
    relinearize3_traced(t, evk, evk_cubed, ctx, counters).map(|(ct, _)| ct)
}

fn check_relin3_keys(evk: &EvalKey, evk_cubed: &EvalKey) -> Result<()> {
    check_power(evk, 2)?;
    check_power(evk_cubed, 3)?;
    if !evk.shares_evk1(evk_cubed) {
        return Err(Error::EvkNotShared);
    }
    Ok(())
}

/// Merged relinearization; also returns the `evk1` branch product
/// `(u2 + u3)·evk1` before its INTT.
pub fn relinearize3_traced(
    t: &Tensor3,
    evk: &EvalKey,
    evk_cubed: &EvalKey,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<(Ciphertext, RnsPoly)> {
    check_relin3_keys(evk, evk_cubed)?;
    let ring = ctx.ring();
    let u2 = raise(&t.d2, ctx, counters)?;
    let u3 = raise(&t.d3, ctx, counters)?;
    let a = evk_mul(&u2, &evk.evk0, ctx, counters)?;
    let b = evk_mul(&u3, &evk_cubed.evk0, ctx, counters)?;
    let shared = evk_mul(&ring.add(&u2, &u3)?, &evk.evk1, ctx, counters)?;
    let delta0 = lower(&ring.add(&a, &b)?, ctx, counters)?;
    let delta1 = lower(&shared, ctx, counters)?;
    let ct = finish(&t.d0, &t.d1, &delta0, &delta1, t.scale, ctx, counters)?;
    Ok((ct, shared))
}

/// Unmerged reference: four key products, four ModDowns, sums formed after
/// ModDown. Also returns `u2·evk1 + u3·evk1` before any INTT.
pub fn relinearize3_reference(
    t: &Tensor3,
    evk: &EvalKey,
    evk_cubed: &EvalKey,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<(Ciphertext, RnsPoly)> {
    check_relin3_keys(evk, evk_cubed)?;
    let ring = ctx.ring();
    let u2 = raise(&t.d2, ctx, counters)?;
    let u3 = raise(&t.d3, ctx, counters)?;
    let a0 = evk_mul(&u2, &evk.evk0, ctx, counters)?;
    let a1 = evk_mul(&u2, &evk.evk1, ctx, counters)?;
    let b0 = evk_mul(&u3, &evk_cubed.evk0, ctx, counters)?;
    let b1 = evk_mul(&u3, &evk_cubed.evk1, ctx, counters)?;
    let branch = ring.add(&a1, &b1)?;
    let delta0 = ring.add(&lower(&a0, ctx, counters)?, &lower(&b0, ctx, counters)?)?;
    let delta1 = ring.add(&lower(&a1, ctx, counters)?, &lower(&b1, ctx, counters)?)?;
    let ct = finish(&t.d0, &t.d1, &delta0, &delta1, t.scale, ctx, counters)?;
    Ok((ct, branch))
}

/// Divides by the last active modulus and drops it.
pub fn rescale_ciphertext(ct: &Ciphertext, ctx: &Context) -> Result<Ciphertext> {
    rescale_counted(ct, ctx, &mut OpCounters::default())
}

pub fn rescale_counted(ct: &Ciphertext, ctx: &Context, counters: &mut OpCounters) -> Result<Ciphertext> {
    let level = ct.level();
    if level < 2 {
        return Err(Error::NothingToDrop);
    }
    let ct = ct.to_coefficient(ctx)?;
    let basis = ctx.q_basis(level);
    counters.rescale_calls += 1;
    let c0 = rescale(ct.c0().rows(), basis)?;
    let c1 = rescale(ct.c1().rows(), basis)?;
    let ring = ctx.ring();
    let dropped = ctx.q_modulus_value(level - 1) as f64;
    Ciphertext::new(
        ring.wrap(c0, level - 1, 0, Domain::Coefficient),
        ring.wrap(c1, level - 1, 0, Domain::Coefficient),
        ct.scale() / dropped,
    )
}

fn require_level(level: usize, needed: usize) -> Result<()> {
    if level < needed {
        return Err(Error::InsufficientLevel { needed, have: level });
    }
    Ok(())
}

pub fn multiply2(a: &Ciphertext, b: &Ciphertext, evk: &EvalKey, ctx: &Context) -> Result<Ciphertext> {
    multiply2_counted(a, b, evk, Tensor2Mode::Direct, ctx, &mut OpCounters::default())
}

/// `rescale(relinearize2(tensor2(a, b)))`: level drops by one, scale becomes
/// `Δ_a·Δ_b / q_dropped`.
pub fn multiply2_counted(
    a: &Ciphertext,
    b: &Ciphertext,
    evk: &EvalKey,
    mode: Tensor2Mode,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Ciphertext> {
    let level = check_levels(&[a.level(), b.level()])?;
    require_level(level, 2)?;
    let t = tensor2_counted(a, b, mode, ctx, counters)?;
    let relin = relinearize2_counted(&t, evk, ctx, counters)?;
    rescale_counted(&relin, ctx, counters)
}

pub fn multiply3(
    ct1: &Ciphertext,
    ct2: &Ciphertext,
    ct3: &Ciphertext,
    evk: &EvalKey,
    evk_cubed: &EvalKey,
    ctx: &Context,
) -> Result<Ciphertext> {
    multiply3_counted(ct1, ct2, ct3, evk, evk_cubed, ctx, &mut OpCounters::default())
}

/// `rescale(rescale(relinearize3(tensor3(…))))`: level drops by two, scale
/// becomes `Δ³ / (q_{ℓ-1} q_{ℓ-2})`.
pub fn multiply3_counted(
    ct1: &Ciphertext,
    ct2: &Ciphertext,
    ct3: &Ciphertext,
    evk: &EvalKey,
    evk_cubed: &EvalKey,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Ciphertext> {
    let level = check_levels(&[ct1.level(), ct2.level(), ct3.level()])?;
    require_level(level, 3)?;
    check_relin3_keys(evk, evk_cubed)?;
    let t = tensor3_counted(ct1, ct2, ct3, ctx, counters)?;
    let relin = relinearize3_counted(&t, evk, evk_cubed, ctx, counters)?;
    let once = rescale_counted(&relin, ctx, counters)?;
    rescale_counted(&once, ctx, counters)
}

/// `multiply2(multiply2(ct1, ct2), ct3)` with `ct3` limb-dropped (no division)
/// to the level of the first product.
pub fn multiply2_chained_counted(
    ct1: &Ciphertext,
    ct2: &Ciphertext,
    ct3: &Ciphertext,
    evk: &EvalKey,
    ctx: &Context,
    counters: &mut OpCounters,
) -> Result<Ciphertext> {
    let first = multiply2_counted(ct1, ct2, evk, Tensor2Mode::Direct, ctx, counters)?;
    let third = ct3.drop_to_level(first.level())?;
    multiply2_counted(&first, &third, evk, Tensor2Mode::Direct, ctx, counters)
}

pub fn multiply2_chained(
    ct1: &Ciphertext,
    ct2: &Ciphertext,
    ct3: &Ciphertext,
    evk: &EvalKey,
    ctx: &Context,
) -> Result<Ciphertext> {
    multiply2_chained_counted(ct1, ct2, ct3, evk, ctx, &mut OpCounters::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{decrypt, encrypt};
    use crate::encoding::Message;
    use crate::keys::{inf_norm, keygen, KeySet};
    use crate::encoding::negacyclic_product;
    use crate::params::Preset;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (Context, KeySet) {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let keys = keygen(&ctx, 3).unwrap();
        (ctx, keys)
    }

    fn small_message(rng: &mut ChaCha20Rng, scale: f64) -> (Vec<i64>, Message) {
        let c: Vec<i64> = (0..8).map(|_| rng.gen_range(-64..=64)).collect();
        let m = Message::from_integers(&c, scale);
        (c, m)
    }

    fn negacyclic(a: &[i64], b: &[i64]) -> Vec<i64> {
        let n = a.len();
        let mut out = vec![0i64; n];
        for i in 0..n {
            for j in 0..n {
                let p = a[i] * b[j];
                if i + j < n {
                    out[i + j] += p;
                } else {
                    out[i + j - n] -= p;
                }
            }
        }
        out
    }

    #[test]
    fn karatsuba_matches_direct() {
        let (ctx, keys) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (_, m1) = small_message(&mut rng, 1.0);
            let (_, m2) = small_message(&mut rng, 1.0);
            let a = encrypt(&m1, &keys.public, &ctx, &mut rng).unwrap();
            let b = encrypt(&m2, &keys.public, &ctx, &mut rng).unwrap();
            let mut direct = OpCounters::default();
            let mut kara = OpCounters::default();
            let x = tensor2_counted(&a, &b, Tensor2Mode::Direct, &ctx, &mut direct).unwrap();
            let y = tensor2_counted(&a, &b, Tensor2Mode::Karatsuba, &ctx, &mut kara).unwrap();
            assert_eq!(x, y);
            assert_eq!((direct.tensor_products, kara.tensor_products), (4, 3));
        }
    }

    #[test]
    fn trivial_product_is_exact_convolution_over_tensor() {
        let (ctx, keys) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (a, m1) = small_message(&mut rng, 1.0);
        let (b, m2) = small_message(&mut rng, 1.0);
        let (c, m3) = small_message(&mut rng, 1.0);
        let t1 = Ciphertext::trivial(&m1, 3, &ctx).unwrap();
        let t2 = Ciphertext::trivial(&m2, 3, &ctx).unwrap();
        let t3 = Ciphertext::trivial(&m3, 3, &ctx).unwrap();
        let t = tensor3(&t1, &t2, &t3, &ctx).unwrap();
        let expect = negacyclic(&negacyclic(&a, &b), &c);
        let got = crate::cipher::decrypt_parts(&[&t.d0, &t.d1, &t.d2, &t.d3], &keys.secret, &ctx).unwrap();
        let expect: Vec<BigInt> = expect.into_iter().map(BigInt::from).collect();
        assert_eq!(got, expect);
        assert!(t.d2.is_zero() && t.d3.is_zero());
    }

    #[test]
    fn tensor3_decrypts_to_triple_product() {
        let (ctx, keys) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let cts: Vec<Ciphertext> = (0..3)
            .map(|_| encrypt(&small_message(&mut rng, 1.0).1, &keys.public, &ctx, &mut rng).unwrap())
            .collect();
        let t = tensor3(&cts[0], &cts[1], &cts[2], &ctx).unwrap();
        let dec: Vec<Vec<BigInt>> = cts.iter().map(|c| decrypt(c, &keys.secret, &ctx).unwrap().coeffs).collect();
        let got = crate::cipher::decrypt_parts(&[&t.d0, &t.d1, &t.d2, &t.d3], &keys.secret, &ctx).unwrap();
        let q = ctx.q_basis(3).product().clone();
        let q = BigInt::from(q);
        let prod = negacyclic_product(&negacyclic_product(&dec[0], &dec[1]), &dec[2]);
        for (g, p) in got.iter().zip(&prod) {
            let diff: BigInt = (g - p) % &q;
            assert_eq!(diff, BigInt::from(0));
        }
    }

    #[test]
    fn merged_uses_three_key_products_and_two_mod_downs() {
        let (ctx, keys) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let cts: Vec<Ciphertext> = (0..3)
            .map(|_| encrypt(&small_message(&mut rng, 1.0).1, &keys.public, &ctx, &mut rng).unwrap())
            .collect();
        let t = tensor3(&cts[0], &cts[1], &cts[2], &ctx).unwrap();
        let mut merged = OpCounters::default();
        let mut reference = OpCounters::default();
        let (a, shared) = relinearize3_traced(&t, &keys.evk, &keys.evk_cubed, &ctx, &mut merged).unwrap();
        let (b, branch) = relinearize3_reference(&t, &keys.evk, &keys.evk_cubed, &ctx, &mut reference).unwrap();
        assert_eq!((merged.evk_products, merged.mod_down_calls, merged.mod_up_calls), (3, 2, 2));
        assert_eq!((reference.evk_products, reference.mod_down_calls), (4, 4));
        assert_eq!(shared, branch);
        let da = decrypt(&a, &keys.secret, &ctx).unwrap();
        let db = decrypt(&b, &keys.secret, &ctx).unwrap();
        let diff: Vec<BigInt> = da.coeffs.iter().zip(&db.coeffs).map(|(x, y)| x - y).collect();
        let slack = 2 * ctx.k() * (1 + keys.secret.l1_norm());
        assert!(inf_norm(&diff) <= slack as f64);
    }

    #[test]
    fn level_and_scale_bookkeeping() {
        let (ctx, keys) = setup();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let scale = ctx.params().scale;
        let cts: Vec<Ciphertext> = (0..3)
            .map(|_| encrypt(&small_message(&mut rng, scale).1, &keys.public, &ctx, &mut rng).unwrap())
            .collect();
        let two = multiply2(&cts[0], &cts[1], &keys.evk, &ctx).unwrap();
        assert_eq!(two.level(), 2);
        assert_eq!(two.scale(), scale * scale / ctx.q_modulus_value(2) as f64);
        let three = multiply3(&cts[0], &cts[1], &cts[2], &keys.evk, &keys.evk_cubed, &ctx).unwrap();
        assert_eq!(three.level(), 1);
        let dropped = ctx.q_modulus_value(2) as f64 * ctx.q_modulus_value(1) as f64;
        assert!((three.scale() - scale.powi(3) / dropped).abs() <= three.scale() * 1e-12);
        let chained = multiply2_chained(&cts[0], &cts[1], &cts[2], &keys.evk, &ctx).unwrap();
        assert_eq!(chained.level(), 1);
    }

    #[test]
    fn precondition_errors() {
        let (ctx, keys) = setup();
        let m = Message::zero(8, 1.0);
        let top = Ciphertext::trivial(&m, 3, &ctx).unwrap();
        let low = top.drop_to_level(2).unwrap();
        assert!(matches!(multiply2(&top, &low, &keys.evk, &ctx), Err(Error::LevelMismatch(3, 2))));
        assert!(matches!(
            multiply3(&low, &low, &low, &keys.evk, &keys.evk_cubed, &ctx),
            Err(Error::InsufficientLevel { needed: 3, have: 2 })
        ));
        let one = top.drop_to_level(1).unwrap();
        assert!(matches!(multiply2(&one, &one, &keys.evk, &ctx), Err(Error::InsufficientLevel { .. })));
        assert!(matches!(
            multiply3(&top, &top, &top, &keys.evk_cubed, &keys.evk, &ctx),
            Err(Error::WrongKeyPower { expected: 2, found: 3 })
        ));
        let other = keygen(&ctx, 99).unwrap();
        assert!(matches!(
            multiply3(&top, &top, &top, &keys.evk, &other.evk_cubed, &ctx),
            Err(Error::EvkNotShared)
        ));
    }
}
