//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use ckks3_core::arith::{ntt_primes, Modulus};
use ckks3_core::cipher::{decrypt, Ciphertext};
use ckks3_core::hw::{self, Design, DesignPoint};
use ckks3_core::keys::{inf_norm, keygen};
use ckks3_core::mult::{multiply3, relinearize3_reference, relinearize3_traced, tensor3_counted, OpCounters};
use ckks3_core::noise::{compare_paths, relative_decode_error, sample_inputs, trial_seed, NoiseConfig};
use ckks3_core::ntt::NttTable;
use ckks3_core::params::{Context, Preset};
use ckks3_core::poly::{Domain, RnsPoly};
use ckks3_core::rns::{crt_reconstruct, fast_basis_convert, mod_down, rescale, BasisConverter, ModDown, RnsBasis};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_ct(ctx: &Context, rng: &mut ChaCha20Rng) -> Ciphertext {
    let l = ctx.max_level();
    let c0 = ctx.ring().sample_uniform(l, 0, Domain::Coefficient, rng);
    let c1 = ctx.ring().sample_uniform(l, 0, Domain::Coefficient, rng);
    Ciphertext::new(c0, c1, 1.0).unwrap()
}

fn naive_negacyclic(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let q = q as u128;
    let mut out = vec![0u128; n];
    for i in 0..n {
        for j in 0..n {
            let p = a[i] as u128 * b[j] as u128 % q;
            if i + j < n {
                out[i + j] = (out[i + j] + p) % q;
            } else {
                out[i + j - n] = (out[i + j - n] + q - p) % q;
            }
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

/// The triple product expanded term by term: eight triple products, sixteen
/// polynomial multiplications.
fn direct_expansion(cts: &[Ciphertext; 3], ctx: &Context) -> [RnsPoly; 4] {
    let ring = ctx.ring();
    let ntt = |p: &RnsPoly| ring.ntt_forward(p).unwrap();
    let [(a0, a1), (b0, b1), (c0, c1)] = cts.each_ref().map(|ct| (ntt(ct.c0()), ntt(ct.c1())));
    let m3 = |x: &RnsPoly, y: &RnsPoly, z: &RnsPoly| ring.mul(&ring.mul(x, y).unwrap(), z).unwrap();
    let add = |x: RnsPoly, y: RnsPoly| ring.add(&x, &y).unwrap();
    let d0 = m3(&a0, &b0, &c0);
    let d1 = add(add(m3(&a0, &b0, &c1), m3(&a0, &b1, &c0)), m3(&a1, &b0, &c0));
    let d2 = add(add(m3(&a0, &b1, &c1), m3(&a1, &b0, &c1)), m3(&a1, &b1, &c0));
    let d3 = m3(&a1, &b1, &c1);
    [d0, d1, d2, d3]
}

/// Coefficient-domain schoolbook evaluation of the same expansion, per row.
fn schoolbook_expansion(cts: &[Ciphertext; 3], ctx: &Context) -> [Vec<Vec<u64>>; 4] {
    let moduli = ctx.ring().q_moduli(ctx.max_level());
    let rows = |p: &RnsPoly, j: usize| p.row(j).to_vec();
    let mut out: [Vec<Vec<u64>>; 4] = Default::default();
    for (j, q) in moduli.iter().enumerate() {
        let v = q.value();
        let parts: Vec<[Vec<u64>; 2]> = cts.iter().map(|ct| [rows(ct.c0(), j), rows(ct.c1(), j)]).collect();
        let mut acc = vec![vec![0u64; ctx.n()]; 4];
        for i in 0..2 {
            for k in 0..2 {
                for m in 0..2 {
                    let t = naive_negacyclic(&naive_negacyclic(&parts[0][i], &parts[1][k], v), &parts[2][m], v);
                    let power = i + k + m;
                    for (a, x) in acc[power].iter_mut().zip(t) {
                        *a = q.add(*a, x);
                    }
                }
            }
        }
        for (slot, row) in out.iter_mut().zip(acc) {
            slot.push(row);
        }
    }
    out
}

fn karatsuba_equivalence() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (preset, trials, limit_s) in [(Preset::Toy8, 1000usize, 60.0), (Preset::Paper30, 100, 600.0)] {
        let ctx = Context::new(preset.params()).unwrap();
        let start = Instant::now();
        let results: Vec<(bool, bool, usize)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha20Rng::seed_from_u64(trial_seed(SEED, t));
                let cts = [random_ct(&ctx, &mut rng), random_ct(&ctx, &mut rng), random_ct(&ctx, &mut rng)];
                let mut counters = OpCounters::default();
                let t3 = tensor3_counted(&cts[0], &cts[1], &cts[2], &ctx, &mut counters).unwrap();
                let got = [&t3.d0, &t3.d1, &t3.d2, &t3.d3];
                let direct = direct_expansion(&cts, &ctx);
                let exact = got.iter().zip(&direct).all(|(g, d)| *g == d);
                let schoolbook = preset != Preset::Toy8
                    || schoolbook_expansion(&cts, &ctx)
                        .iter()
                        .zip(got)
                        .all(|(rows, g)| ctx.ring().ntt_inverse(g).unwrap().rows() == rows);
                (exact, schoolbook, counters.tensor_products)
            })
            .collect();
        let elapsed = start.elapsed().as_secs_f64();
        let mismatches = results.iter().filter(|r| !r.0).count();
        let schoolbook_mismatches = results.iter().filter(|r| !r.1).count();
        let products_ok = results.iter().all(|r| r.2 == 8);
        let ok = mismatches == 0 && schoolbook_mismatches == 0 && products_ok && elapsed < limit_s;
        pass &= ok;
        details.push(format!(
            "{} trials={trials} mismatches={mismatches} schoolbook_mismatches={schoolbook_mismatches} products=8:{products_ok} time={elapsed:.1}s",
            preset.name()
        ));
    }
    outcome(pass, details.join("; "))
}

fn end_to_end(bound_violations: usize) -> Outcome {
    let preset = Preset::Paper30;
    let ctx = Context::new(preset.params()).unwrap();
    let keys = keygen(&ctx, SEED).unwrap();
    let trials = 100;
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inputs = sample_inputs(&ctx, &keys, preset.message_bound(), trial_seed(SEED, t)).unwrap();
            let [a, b, c] = &inputs.ciphertexts;
            let out = multiply3(a, b, c, &keys.evk, &keys.evk_cubed, &ctx).unwrap();
            relative_decode_error(&decrypt(&out, &keys.secret, &ctx).unwrap(), &inputs.messages)
        })
        .collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let limit = 2f64.powi(-10);
    outcome(
        worst <= limit && bound_violations == 0,
        format!(
            "paper30 trials={trials} max_relative_error={worst:.3e} (log2 {:.2}, limit 2^-10) bound_violations={bound_violations}",
            worst.log2()
        ),
    )
}

fn merged_relinearization() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (preset, trials) in [(Preset::Toy8, 200usize), (Preset::Paper30, 10)] {
        let ctx = Context::new(preset.params()).unwrap();
        let keys = keygen(&ctx, SEED).unwrap();
        let k = ctx.k();
        let basis = ctx.q_basis(ctx.max_level()).clone();
        let modulus = BigInt::from(basis.product().clone());
        let centered_gap = |x: &RnsPoly, y: &RnsPoly| -> f64 {
            let rows: Vec<Vec<u64>> = x
                .rows()
                .iter()
                .zip(y.rows())
                .zip(basis.moduli())
                .map(|((a, b), q)| a.iter().zip(b).map(|(&u, &v)| q.sub(u, v)).collect())
                .collect();
            let values: Vec<BigInt> = (0..ctx.n())
                .map(|i| {
                    let col: Vec<u64> = rows.iter().map(|r| r[i]).collect();
                    let v = BigInt::from(crt_reconstruct(&col, &basis));
                    if &v + &v > modulus {
                        v - &modulus
                    } else {
                        v
                    }
                })
                .collect();
            inf_norm(&values)
        };
        let mut worst_component = 0f64;
        let mut worst_decrypt = 0f64;
        let mut branch_identical = true;
        let mut counts_ok = true;
        for t in 0..trials {
            let mut rng = ChaCha20Rng::seed_from_u64(trial_seed(SEED, t));
            let cts = [random_ct(&ctx, &mut rng), random_ct(&ctx, &mut rng), random_ct(&ctx, &mut rng)];
            let t3 = tensor3_counted(&cts[0], &cts[1], &cts[2], &ctx, &mut OpCounters::default()).unwrap();
            let (mut merged_c, mut reference_c) = (OpCounters::default(), OpCounters::default());
            let (merged, shared) = relinearize3_traced(&t3, &keys.evk, &keys.evk_cubed, &ctx, &mut merged_c).unwrap();
            let (reference, branch) =
                relinearize3_reference(&t3, &keys.evk, &keys.evk_cubed, &ctx, &mut reference_c).unwrap();
            branch_identical &= shared == branch;
            counts_ok &= (merged_c.evk_products, merged_c.mod_down_calls) == (3, 2)
                && (reference_c.evk_products, reference_c.mod_down_calls) == (4, 4);
            worst_component = worst_component
                .max(centered_gap(merged.c0(), reference.c0()))
                .max(centered_gap(merged.c1(), reference.c1()));
            let da = decrypt(&merged, &keys.secret, &ctx).unwrap().coeffs;
            let db = decrypt(&reference, &keys.secret, &ctx).unwrap().coeffs;
            let diff: Vec<BigInt> = da.iter().zip(&db).map(|(x, y)| x - y).collect();
            worst_decrypt = worst_decrypt.max(inf_norm(&diff));
        }
        let slack = (2 * k) as f64;
        let decrypt_slack = slack * (1 + keys.secret.l1_norm()) as f64;
        let ok = counts_ok && branch_identical && worst_component <= slack && worst_decrypt <= decrypt_slack;
        pass &= ok;
        details.push(format!(
            "{} trials={trials} counts(3,2)/(4,4):{counts_ok} evk1_branch_identical:{branch_identical} component_gap={worst_component} (slack 2K={slack}) decrypt_gap={worst_decrypt} (2K(1+|s|_1)={decrypt_slack})",
            preset.name()
        ));
    }
    outcome(pass, details.join("; "))
}

fn latency() -> Outcome {
    let dp = DesignPoint::default();
    let two = hw::latency_cycles(Design::TwoInputX2, &dp);
    let three = hw::latency_cycles(Design::ThreeInput, &dp);
    let ratio = hw::latency_ratio(&dp);
    outcome(
        two == 16910 && three == 8464 && (ratio - 0.5006).abs() <= 1e-4,
        format!("two_input_x2={two} three_input={three} ratio={ratio:.6} (target 0.5006 +- 1e-4)"),
    )
}

fn area() -> Outcome {
    let r = hw::report(&DesignPoint::default());
    outcome(
        (0.66..=0.76).contains(&r.area_ratio),
        format!(
            "ratio={:.6} exact={} two={} three={} bit_delay_ratio={:.6}; {}",
            r.area_ratio, r.area_ratio_exact, r.two_area, r.three_area, r.area_ratio_bit_delays, r.comparator
        ),
    )
}

fn random_below(rng: &mut ChaCha20Rng, bound: &BigUint) -> BigUint {
    let words = bound.bits() as usize / 32 + 2;
    let digits: Vec<u32> = (0..words).map(|_| rng.gen()).collect();
    BigUint::from_slice(&digits) % bound
}

fn residues(values: &[BigUint], moduli: &[Modulus]) -> Vec<Vec<u64>> {
    moduli
        .iter()
        .map(|q| values.iter().map(|x| (x % q.value()).to_u64().unwrap()).collect())
        .collect()
}

fn centered_distance(a: &BigUint, b: &BigUint, modulus: &BigUint) -> BigUint {
    let d = if a >= b { (a - b) % modulus } else { (modulus - (b - a) % modulus) % modulus };
    let other = modulus - &d;
    d.min(other)
}

fn round_div(x: &BigUint, d: &BigUint) -> BigUint {
    (x + (d >> 1)) / d
}

fn rns_bounds() -> Outcome {
    const SAMPLES: usize = 10_000;
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut details = Vec::new();
    let mut pass = true;
    for preset in [Preset::Toy8, Preset::Paper30] {
        let params = preset.params();
        let q_mod: Vec<Modulus> = params.q_moduli.iter().map(|&v| Modulus::new(v).unwrap()).collect();
        let p_mod: Vec<Modulus> = params.p_moduli.iter().map(|&v| Modulus::new(v).unwrap()).collect();
        let q_basis = RnsBasis::new(q_mod.clone()).unwrap();
        let p_basis = RnsBasis::new(p_mod.clone()).unwrap();
        let (q, p) = (q_basis.product().clone(), p_basis.product().clone());
        let (l, k) = (q_mod.len(), p_mod.len());

        let qp = &q * &p;
        let xs: Vec<BigUint> = (0..SAMPLES).map(|_| random_below(&mut rng, &qp)).collect();
        let mut rows = residues(&xs, &q_mod);
        rows.extend(residues(&xs, &p_mod));
        let down = mod_down(&rows, &ModDown::new(&p_basis, &q_mod).unwrap());
        let worst_down = (0..SAMPLES)
            .map(|i| {
                let col: Vec<u64> = down.iter().map(|r| r[i]).collect();
                let want = round_div(&xs[i], &p) % &q;
                centered_distance(&crt_reconstruct(&col, &q_basis), &want, &q)
            })
            .max()
            .unwrap();

        let xs: Vec<BigUint> = (0..SAMPLES).map(|_| random_below(&mut rng, &q)).collect();
        let rows = residues(&xs, &q_mod);
        let lower = RnsBasis::new(q_mod[..l - 1].to_vec()).unwrap();
        let last = BigUint::from(q_mod[l - 1].value());
        let scaled = rescale(&rows, &q_basis).unwrap();
        let worst_rescale = (0..SAMPLES)
            .map(|i| {
                let col: Vec<u64> = scaled.iter().map(|r| r[i]).collect();
                let want = round_div(&xs[i], &last) % lower.product();
                centered_distance(&crt_reconstruct(&col, &lower), &want, lower.product())
            })
            .max()
            .unwrap();

        let conv = BasisConverter::new(&q_basis, &p_mod);
        let lifted = fast_basis_convert(&rows, &conv);
        let q_hats: Vec<BigUint> = q_mod.iter().map(|m| &q / m.value()).collect();
        let q_hat_invs: Vec<BigUint> = q_mod
            .iter()
            .zip(&q_hats)
            .map(|(m, hat)| {
                let v = BigUint::from(m.value());
                (hat % &v).modpow(&(&v - 2u32), &v)
            })
            .collect();
        let mut alpha_range = (usize::MAX, 0usize);
        let mut conv_ok = true;
        for (i, x) in xs.iter().enumerate() {
            let sum: BigUint = q_mod
                .iter()
                .zip(&q_hats)
                .zip(&q_hat_invs)
                .map(|((m, hat), inv)| (x % m.value() * inv % m.value()) * hat)
                .sum();
            let (alpha, rem) = (sum.clone() - x).div_rem(&q);
            conv_ok &= rem.is_zero();
            let alpha = alpha.to_usize().unwrap();
            alpha_range = (alpha_range.0.min(alpha), alpha_range.1.max(alpha));
            for (row, m) in lifted.iter().zip(&p_mod) {
                conv_ok &= BigUint::from(row[i]) == &sum % m.value();
            }
        }
        let ok = worst_down <= BigUint::from(k)
            && worst_rescale <= BigUint::one()
            && conv_ok
            && alpha_range.1 < l;
        pass &= ok;
        details.push(format!(
            "{} samples={SAMPLES} mod_down_err={worst_down} (<= K={k}) rescale_err={worst_rescale} (<= 1) alpha in [{}, {}] (< L={l}) conversion_exact:{conv_ok}",
            preset.name(),
            alpha_range.0,
            alpha_range.1
        ));
    }
    outcome(pass, details.join("; "))
}

fn ntt_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut details = Vec::new();
    let mut pass = true;
    for n in [8usize, 16, 64] {
        let mut mismatches = 0;
        let primes = [ntt_primes(16, n, 1).unwrap()[0], ntt_primes(30, n, 1).unwrap()[0]];
        for trial in 0..1000 {
            let q = Modulus::new(primes[trial % 2]).unwrap();
            let table = NttTable::new(q, n).unwrap();
            let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q.value())).collect();
            let b: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q.value())).collect();
            let (mut fa, mut fb) = (a.clone(), b.clone());
            table.forward(&mut fa);
            table.forward(&mut fb);
            let mut c: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| q.mul(x, y)).collect();
            table.inverse(&mut c);
            if c != naive_negacyclic(&a, &b, q.value()) {
                mismatches += 1;
            }
        }
        pass &= mismatches == 0;
        details.push(format!("N={n} trials=1000 mismatches={mismatches}"));
    }
    outcome(pass, details.join("; "))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("1 karatsuba_equivalence", karatsuba_equivalence());

    let preset = Preset::Paper30;
    let cfg = NoiseConfig { trials: 100, seed: SEED, message_bound: preset.message_bound() };
    let start = Instant::now();
    let cmp = compare_paths(&preset.params(), &cfg).expect("noise comparison");
    let elapsed = start.elapsed().as_secs_f64();

    report("2 end_to_end_correctness", end_to_end(cmp.bound_violations()));

    let (total, mult) = (cmp.ordering(0.0), cmp.mult_ordering(0.0));
    let margin = cmp.ordering(3.0);
    report(
        "3 noise_ordering",
        outcome(
            total.holds && mult.holds && cmp.bound_violations() == 0,
            format!(
                "paper30 trials={} seed={SEED} total mean {:.4}/{:.4} max {:.4}/{:.4} (ratios {:.6}, {:.6}) mult mean {:.4}/{:.4} max {:.4}/{:.4} (ratios {:.6}, {:.6}) bound_violations={} holds_at_3_se:{} time={elapsed:.1}s",
                cmp.trials(),
                cmp.three_stats.mean,
                cmp.chained_stats.mean,
                cmp.three_stats.max,
                cmp.chained_stats.max,
                total.mean_ratio,
                total.max_ratio,
                cmp.three_mult_stats.mean,
                cmp.chained_mult_stats.mean,
                cmp.three_mult_stats.max,
                cmp.chained_mult_stats.max,
                mult.mean_ratio,
                mult.max_ratio,
                cmp.bound_violations(),
                margin.holds
            ),
        ),
    );

    report("4 merged_relinearization", merged_relinearization());
    report("5 latency", latency());
    report("6 area", area());
    report("7 rns_primitive_bounds", rns_bounds());
    report("8 ntt_oracle", ntt_oracle());

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
