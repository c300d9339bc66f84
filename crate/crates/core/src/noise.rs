//! Noise measurement for the three-input product against the chained
//! two-input product.
//!
//! Each trial samples three real message vectors, encrypts them once, and
//! feeds the same ciphertexts to both paths. Errors are reported in integer
//! units at the final scale.

use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cipher::{decrypt, decrypt_parts, encrypt, Ciphertext};
use crate::encoding::{encode, negacyclic_product, Message};
use crate::error::{Error, Result};
use crate::keys::{inf_norm, keygen, KeySet};
use crate::mult::{relinearize2, relinearize3, rescale_ciphertext, tensor2, tensor3};
use crate::params::{Context, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    ThreeInput,
    ChainedTwoInput,
}

impl Path {
    pub fn name(self) -> &'static str {
        match self {
            Path::ThreeInput => "three_input",
            Path::ChainedTwoInput => "chained_two_input",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRecord {
    pub trial: usize,
    pub trial_seed: u64,
    pub path: Path,
    /// `‖decrypted − m1⊛m2⊛m3 / (q_{L-1} q_{L-2})‖_∞`.
    pub max_abs_error: f64,
    /// Same, but against the product of the input decryptions: the part of
    /// the error introduced by multiplication itself.
    pub mult_error: f64,
    /// Largest fresh decryption error among the three inputs.
    pub fresh_noise: f64,
    /// Largest integer message coefficient among the three inputs.
    pub message_norm: f64,
    /// Tensor decryption minus the product of input decryptions.
    pub tensor_residual: f64,
    /// Relinearized decryption minus the tensor decryption (largest stage).
    pub relin_residual: f64,
    /// Rescaled decryption minus the exact quotient (largest stage).
    pub rescale_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub trials: usize,
    pub seed: u64,
    /// `‖z‖_∞` bound of the real message vectors.
    pub message_bound: f64,
}

/// Deterministic per-trial seed: stream `trial` of a ChaCha generator keyed by
/// the master seed.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(trial as u64 + 1);
    rng.gen()
}

fn centered_mod(x: &BigInt, modulus: &BigInt) -> BigInt {
    let r = x.mod_floor(modulus);
    if &r + &r > *modulus {
        r - modulus
    } else {
        r
    }
}

fn diff_norm_mod(a: &[BigInt], b: &[BigInt], modulus: &BigInt) -> f64 {
    let d: Vec<BigInt> = a.iter().zip(b).map(|(x, y)| centered_mod(&(x - y), modulus)).collect();
    inf_norm(&d)
}

/// `‖after − before / q‖_∞` where `after` lives modulo `modulus / q`.
fn rescale_residual(after: &[BigInt], before: &[BigInt], q: u64, modulus: &BigInt) -> f64 {
    let q = BigInt::from(q);
    let d: Vec<BigInt> = after.iter().zip(before).map(|(a, b)| centered_mod(&(a * &q - b), modulus)).collect();
    inf_norm(&d) / q.to_f64().unwrap_or(f64::INFINITY)
}

/// `‖value − exact / divisor‖_∞` computed exactly, then converted.
fn scaled_error(value: &[BigInt], exact: &[BigInt], divisor: &BigInt) -> f64 {
    let d: Vec<BigInt> = value.iter().zip(exact).map(|(v, e)| v * divisor - e).collect();
    inf_norm(&d) / divisor.to_f64().unwrap_or(f64::INFINITY)
}

fn to_i128(v: &[BigInt]) -> Option<Vec<i128>> {
    v.iter().map(ToPrimitive::to_i128).collect()
}

/// Negacyclic product in `i128` when the operand sizes rule out overflow,
/// big integers otherwise.
pub fn exact_negacyclic(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let bits = |v: &[BigInt]| v.iter().map(|x| x.bits()).max().unwrap_or(0);
    let n_bits = (a.len().max(1) as f64).log2().ceil() as u64;
    if bits(a) + bits(b) + n_bits < 126 {
        if let (Some(x), Some(y)) = (to_i128(a), to_i128(b)) {
            return negacyclic_i128(&x, &y).into_iter().map(BigInt::from).collect();
        }
    }
    negacyclic_product(a, b)
}

fn negacyclic_i128(a: &[i128], b: &[i128]) -> Vec<i128> {
    let n = a.len();
    let mut out = vec![0i128; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        let (wrapped, direct) = out.split_at_mut(i);
        for (o, &y) in direct.iter_mut().zip(b) {
            *o += x * y;
        }
        for (o, &y) in wrapped.iter_mut().zip(&b[n - i..]) {
            *o -= x * y;
        }
    }
    out
}

/// The three encrypted inputs of one trial with their plaintexts.
pub struct TrialInputs {
    pub messages: [Message; 3],
    pub ciphertexts: [Ciphertext; 3],
}

pub fn sample_inputs(ctx: &Context, keys: &KeySet, message_bound: f64, seed: u64) -> Result<TrialInputs> {
    let params = ctx.params();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sample = || -> Result<(Message, Ciphertext)> {
        let z: Vec<f64> = (0..params.n).map(|_| rng.gen_range(-message_bound..=message_bound)).collect();
        let m = encode(&z, params.scale, params.word_bits)?;
        let ct = encrypt(&m, &keys.public, ctx, &mut rng)?;
        Ok((m, ct))
    };
    let (m1, c1) = sample()?;
    let (m2, c2) = sample()?;
    let (m3, c3) = sample()?;
    Ok(TrialInputs { messages: [m1, m2, m3], ciphertexts: [c1, c2, c3] })
}

struct Shared {
    exact: Vec<BigInt>,
    decrypted_product: Vec<BigInt>,
    decrypted: [Vec<BigInt>; 3],
    fresh: f64,
    message_norm: f64,
    divisor: BigInt,
}

fn shared_terms(inputs: &TrialInputs, keys: &KeySet, ctx: &Context) -> Result<Shared> {
    let level = inputs.ciphertexts[0].level();
    if level < 3 {
        return Err(Error::InsufficientLevel { needed: 3, have: level });
    }
    let mut decrypted: Vec<Vec<BigInt>> = Vec::with_capacity(3);
    let mut fresh = 0f64;
    for (ct, m) in inputs.ciphertexts.iter().zip(&inputs.messages) {
        let d = decrypt(ct, &keys.secret, ctx)?.coeffs;
        let e: Vec<BigInt> = d.iter().zip(&m.coeffs).map(|(x, y)| x - y).collect();
        fresh = fresh.max(inf_norm(&e));
        decrypted.push(d);
    }
    let message_norm = inputs.messages.iter().map(|m| inf_norm(&m.coeffs)).fold(0.0, f64::max);
    let [m1, m2, m3] = &inputs.messages;
    let exact = exact_negacyclic(&exact_negacyclic(&m1.coeffs, &m2.coeffs), &m3.coeffs);
    let decrypted_product = exact_negacyclic(&exact_negacyclic(&decrypted[0], &decrypted[1]), &decrypted[2]);
    let divisor = BigInt::from(ctx.q_modulus_value(level - 1)) * BigInt::from(ctx.q_modulus_value(level - 2));
    let decrypted: [Vec<BigInt>; 3] = decrypted.try_into().expect("three inputs");
    Ok(Shared { exact, decrypted_product, decrypted, fresh, message_norm, divisor })
}

fn modulus(ctx: &Context, level: usize) -> BigInt {
    BigInt::from(ctx.q_basis(level).product().clone())
}

struct Stages {
    output: Vec<BigInt>,
    tensor: f64,
    relin: f64,
    rescale: f64,
}

fn run_three_input(inputs: &TrialInputs, keys: &KeySet, ctx: &Context, shared: &Shared) -> Result<Stages> {
    let sk = &keys.secret;
    let [c1, c2, c3] = &inputs.ciphertexts;
    let level = c1.level();
    let q_top = modulus(ctx, level);
    let t = tensor3(c1, c2, c3, ctx)?;
    let tensor_dec = decrypt_parts(&[&t.d0, &t.d1, &t.d2, &t.d3], sk, ctx)?;
    let tensor = diff_norm_mod(&tensor_dec, &shared.decrypted_product, &q_top);
    let relin = relinearize3(&t, &keys.evk, &keys.evk_cubed, ctx)?;
    let relin_dec = decrypt(&relin, sk, ctx)?.coeffs;
    let relin_res = diff_norm_mod(&relin_dec, &tensor_dec, &q_top);
    let once = rescale_ciphertext(&relin, ctx)?;
    let once_dec = decrypt(&once, sk, ctx)?.coeffs;
    let r1 = rescale_residual(&once_dec, &relin_dec, ctx.q_modulus_value(level - 1), &q_top);
    let twice = rescale_ciphertext(&once, ctx)?;
    let output = decrypt(&twice, sk, ctx)?.coeffs;
    let r2 = rescale_residual(&output, &once_dec, ctx.q_modulus_value(level - 2), &modulus(ctx, level - 1));
    Ok(Stages { output, tensor, relin: relin_res, rescale: r1.max(r2) })
}

fn run_chained(inputs: &TrialInputs, keys: &KeySet, ctx: &Context, shared: &Shared) -> Result<Stages> {
    let sk = &keys.secret;
    let [c1, c2, c3] = &inputs.ciphertexts;
    let level = c1.level();
    let mut worst = (0f64, 0f64, 0f64);
    let mut stage = |a: &Ciphertext, b: &Ciphertext, da: &[BigInt], db: &[BigInt]| -> Result<(Ciphertext, Vec<BigInt>)> {
        let lvl = a.level();
        let q = modulus(ctx, lvl);
        let t = tensor2(a, b, ctx)?;
        let tensor_dec = decrypt_parts(&[&t.d0, &t.d1, &t.d2], sk, ctx)?;
        worst.0 = worst.0.max(diff_norm_mod(&tensor_dec, &exact_negacyclic(da, db), &q));
        let relin = relinearize2(&t, &keys.evk, ctx)?;
        let relin_dec = decrypt(&relin, sk, ctx)?.coeffs;
        worst.1 = worst.1.max(diff_norm_mod(&relin_dec, &tensor_dec, &q));
        let out = rescale_ciphertext(&relin, ctx)?;
        let out_dec = decrypt(&out, sk, ctx)?.coeffs;
        worst.2 = worst.2.max(rescale_residual(&out_dec, &relin_dec, ctx.q_modulus_value(lvl - 1), &q));
        Ok((out, out_dec))
    };
    let (first, first_dec) = stage(c1, c2, &shared.decrypted[0], &shared.decrypted[1])?;
    debug_assert_eq!(first.level(), level - 1);
    let third = c3.drop_to_level(first.level())?;
    let (_, output) = stage(&first, &third, &first_dec, &shared.decrypted[2])?;
    Ok(Stages { output, tensor: worst.0, relin: worst.1, rescale: worst.2 })
}

fn record(trial: usize, seed: u64, path: Path, stages: &Stages, shared: &Shared) -> NoiseRecord {
    NoiseRecord {
        trial,
        trial_seed: seed,
        path,
        max_abs_error: scaled_error(&stages.output, &shared.exact, &shared.divisor),
        mult_error: scaled_error(&stages.output, &shared.decrypted_product, &shared.divisor),
        fresh_noise: shared.fresh,
        message_norm: shared.message_norm,
        tensor_residual: stages.tensor,
        relin_residual: stages.relin,
        rescale_residual: stages.rescale,
    }
}

/// Both paths on the same inputs: `(three_input, chained_two_input)`.
pub fn evaluate_trial(
    inputs: &TrialInputs,
    keys: &KeySet,
    ctx: &Context,
    trial: usize,
    seed: u64,
) -> Result<(NoiseRecord, NoiseRecord)> {
    let shared = shared_terms(inputs, keys, ctx)?;
    let three = run_three_input(inputs, keys, ctx, &shared)?;
    let chained = run_chained(inputs, keys, ctx, &shared)?;
    Ok((
        record(trial, seed, Path::ThreeInput, &three, &shared),
        record(trial, seed, Path::ChainedTwoInput, &chained, &shared),
    ))
}

fn prepare(params: &Params, cfg: &NoiseConfig) -> Result<(Context, KeySet)> {
    params.require_depth(2)?;
    if !(cfg.message_bound.is_finite() && cfg.message_bound > 0.0) {
        return Err(Error::InvalidParams(format!("message bound {} must be positive", cfg.message_bound)));
    }
    let ctx = Context::new(params.clone())?;
    let keys = keygen(&ctx, cfg.seed)?;
    Ok((ctx, keys))
}

fn run_all(params: &Params, cfg: &NoiseConfig) -> Result<Vec<(NoiseRecord, NoiseRecord)>> {
    let (ctx, keys) = prepare(params, cfg)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(cfg.seed, t);
            let inputs = sample_inputs(&ctx, &keys, cfg.message_bound, seed)?;
            evaluate_trial(&inputs, &keys, &ctx, t, seed)
        })
        .collect()
}

/// Records for one path. Trials are identical to those of [`compare_paths`]
/// under the same configuration.
pub fn measure_noise(path: Path, params: &Params, cfg: &NoiseConfig) -> Result<Vec<NoiseRecord>> {
    Ok(run_all(params, cfg)?
        .into_iter()
        .map(|(three, chained)| if path == Path::ThreeInput { three } else { chained })
        .collect())
}

/// Upper bound on the three-input error at the final scale, from the
/// trial's measured components. Each negacyclic product of two ring elements
/// can grow the ∞-norm by a factor of `N`, so the cubic terms carry `N²`.
/// The relinearization term is the measured pre-rescale residual of both
/// key switches together; rounding enters once per rescale.
pub fn three_input_bound(record: &NoiseRecord, n: usize, q_upper: u64, q_lower: u64) -> f64 {
    let n2 = (n as f64).powi(2);
    let (b, v) = (record.fresh_noise, record.message_norm);
    let divisor = q_upper as f64 * q_lower as f64;
    let tensor = 3.0 * n2 * v * v * b + 3.0 * n2 * v * b * b + n2 * b.powi(3);
    (tensor + record.relin_residual) / divisor + record.rescale_residual * (1.0 + 1.0 / q_lower as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut sum, mut max, mut count) = (0f64, 0f64, 0usize);
        for v in values {
            sum += v;
            max = max.max(v);
            count += 1;
        }
        Self { mean: if count == 0 { 0.0 } else { sum / count as f64 }, max }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub three_input: Vec<NoiseRecord>,
    pub chained: Vec<NoiseRecord>,
    /// Per-trial three-input bound.
    pub bounds: Vec<f64>,
    pub three_stats: Stats,
    pub chained_stats: Stats,
    pub three_mult_stats: Stats,
    pub chained_mult_stats: Stats,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

impl Comparison {
    pub fn trials(&self) -> usize {
        self.three_input.len()
    }

    /// Trials whose three-input error exceeds the bound.
    pub fn bound_violations(&self) -> usize {
        self.three_input.iter().zip(&self.bounds).filter(|(r, b)| r.max_abs_error > **b).count()
    }

    /// Ordering of the error against the exact message product.
    pub fn ordering(&self, z: f64) -> Ordering {
        Ordering::paired(&self.three_input, &self.chained, |r| r.max_abs_error, z)
    }

    /// Ordering of the multiplication-induced error.
    pub fn mult_ordering(&self, z: f64) -> Ordering {
        Ordering::paired(&self.three_input, &self.chained, |r| r.mult_error, z)
    }

    pub fn records(&self) -> impl Iterator<Item = &NoiseRecord> {
        self.three_input.iter().zip(&self.chained).flat_map(|(a, b)| [a, b])
    }

    /// One JSON object per line.
    pub fn write_records<W: Write>(&self, mut out: W) -> Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("trials {}\n", self.trials()));
        s.push_str(&format!("{:<22}{:>16}{:>16}{:>16}{:>16}\n", "path", "mean_error", "max_error", "mean_mult", "max_mult"));
        for (name, e, m) in [
            (Path::ThreeInput.name(), self.three_stats, self.three_mult_stats),
            (Path::ChainedTwoInput.name(), self.chained_stats, self.chained_mult_stats),
        ] {
            s.push_str(&format!("{:<22}{:>16.4}{:>16.4}{:>16.4}{:>16.4}\n", name, e.mean, e.max, m.mean, m.max));
        }
        let (total, mult) = (self.ordering(0.0), self.mult_ordering(0.0));
        s.push_str(&format!(
            "{:<22}{:>16.6}{:>16.6}{:>16.6}{:>16.6}\n",
            "ratio", total.mean_ratio, total.max_ratio, mult.mean_ratio, mult.max_ratio
        ));
        s.push_str(&format!("bound_violations {}\n", self.bound_violations()));
        s
    }
}

/// Aggregate comparison of paired trials. Both paths see the same inputs, so
/// the per-trial differences carry the comparison; the tolerance is `z`
/// standard errors of the mean difference for the mean, and `z` standard
/// deviations of a single difference for the max. `z = 0` is the strict
/// ordering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ordering {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub mean_tolerance: f64,
    pub max_tolerance: f64,
    pub holds: bool,
}

impl Ordering {
    fn paired(three: &[NoiseRecord], chained: &[NoiseRecord], f: fn(&NoiseRecord) -> f64, z: f64) -> Self {
        let a = Stats::of(three.iter().map(f));
        let b = Stats::of(chained.iter().map(f));
        let diffs: Vec<f64> = three.iter().zip(chained).map(|(x, y)| f(x) - f(y)).collect();
        let n = diffs.len() as f64;
        let sd = if diffs.len() > 1 {
            let mean = diffs.iter().sum::<f64>() / n;
            (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mean_tolerance = z * sd / n.sqrt().max(1.0);
        let max_tolerance = z * sd;
        Self {
            mean_ratio: ratio(a.mean, b.mean),
            max_ratio: ratio(a.max, b.max),
            mean_tolerance,
            max_tolerance,
            holds: a.mean <= b.mean + mean_tolerance && a.max <= b.max + max_tolerance,
        }
    }
}

pub fn compare_paths(params: &Params, cfg: &NoiseConfig) -> Result<Comparison> {
    let pairs = run_all(params, cfg)?;
    let l = params.l();
    let (q_upper, q_lower) = (params.q_moduli[l - 1], params.q_moduli[l - 2]);
    let (three_input, chained): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let bounds = three_input.iter().map(|r| three_input_bound(r, params.n, q_upper, q_lower)).collect();
    Ok(Comparison {
        three_stats: Stats::of(three_input.iter().map(|r| r.max_abs_error)),
        chained_stats: Stats::of(chained.iter().map(|r| r.max_abs_error)),
        three_mult_stats: Stats::of(three_input.iter().map(|r| r.mult_error)),
        chained_mult_stats: Stats::of(chained.iter().map(|r| r.mult_error)),
        three_input,
        chained,
        bounds,
    })
}

/// Largest observed fresh error `B`, two-input relinearization residual
/// `B_relin`, and rescale residual `B_round`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Components {
    pub fresh: f64,
    pub relin: f64,
    pub round: f64,
    pub relin_min: f64,
}

pub fn estimate_components(params: &Params, trials: usize, seed: u64, message_bound: f64) -> Result<Components> {
    let cfg = NoiseConfig { trials, seed, message_bound };
    let (ctx, keys) = prepare(params, &cfg)?;
    let sk = &keys.secret;
    let per_trial: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, f64)> {
            let inputs = sample_inputs(&ctx, &keys, message_bound, trial_seed(seed, t))?;
            let [c1, c2, _] = &inputs.ciphertexts;
            let level = c1.level();
            let q = modulus(&ctx, level);
            let mut fresh = 0f64;
            for (ct, m) in inputs.ciphertexts.iter().zip(&inputs.messages) {
                let d = decrypt(ct, sk, &ctx)?.coeffs;
                fresh = fresh.max(diff_norm_mod(&d, &m.coeffs, &q));
            }
            let tensor = tensor2(c1, c2, &ctx)?;
            let tensor_dec = decrypt_parts(&[&tensor.d0, &tensor.d1, &tensor.d2], sk, &ctx)?;
            let relin = relinearize2(&tensor, &keys.evk, &ctx)?;
            let relin_dec = decrypt(&relin, sk, &ctx)?.coeffs;
            let relin_res = diff_norm_mod(&relin_dec, &tensor_dec, &q);
            let rescaled = rescale_ciphertext(&relin, &ctx)?;
            let rescaled_dec = decrypt(&rescaled, sk, &ctx)?.coeffs;
            let round = rescale_residual(&rescaled_dec, &relin_dec, ctx.q_modulus_value(level - 1), &q);
            Ok((fresh, relin_res, round))
        })
        .collect::<Result<_>>()?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64| per_trial.iter().map(f).fold(0.0, f64::max);
    Ok(Components {
        fresh: fold(|t| t.0),
        relin: fold(|t| t.1),
        round: fold(|t| t.2),
        relin_min: per_trial.iter().map(|t| t.1).fold(f64::INFINITY, f64::min),
    })
}

/// Decoded real output relative to the exact real product of the inputs:
/// `‖decoded − z1⊛z2⊛z3‖_∞ / ‖z1⊛z2⊛z3‖_∞`, with the real product taken from
/// the exact integer product divided by `Δ³`.
pub fn relative_decode_error(output: &Message, inputs: &[Message; 3]) -> f64 {
    let exact = exact_negacyclic(&exact_negacyclic(&inputs[0].coeffs, &inputs[1].coeffs), &inputs[2].coeffs);
    let cube = inputs.iter().map(|m| m.scale).product::<f64>();
    let mut num = 0f64;
    let mut den = 0f64;
    for (o, e) in output.coeffs.iter().zip(&exact) {
        let truth = e.to_f64().unwrap_or(f64::NAN) / cube;
        let got = o.to_f64().unwrap_or(f64::NAN) / output.scale;
        num = num.max((got - truth).abs());
        den = den.max(truth.abs());
    }
    ratio(num, den)
}
