//! Scheme parameters, named presets and the precomputed evaluation context.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::arith::{ntt_primes, Modulus};
use crate::error::{Error, Result};
use crate::poly::RingContext;
use crate::rns::{BasisConverter, ModDown, RnsBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Ring degree `N`.
    pub n: usize,
    /// Residue word width `w` in bits.
    pub word_bits: u32,
    /// `q_0, …, q_{L-1}`.
    pub q_moduli: Vec<u64>,
    /// `p_0, …, p_{K-1}`.
    pub p_moduli: Vec<u64>,
    /// Encoding scale `Δ`.
    pub scale: f64,
    /// Number of nonzero secret coefficients.
    pub hamming_weight: usize,
    /// Standard deviation of the error distribution.
    pub noise_sigma: f64,
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `N = 8`, 16-bit primes, `L = 3`, `K = 1`.
    Toy8,
    /// `N = 2^12`, 30-bit primes, `L = K = 3`.
    Paper30,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Toy8 => "toy8",
            Preset::Paper30 => "paper30",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "toy8" => Ok(Preset::Toy8),
            "paper30" => Ok(Preset::Paper30),
            other => Err(Error::InvalidParams(format!("unknown preset {other:?} (expected toy8 or paper30)"))),
        }
    }

    pub fn params(self) -> Params {
        let built = match self {
            Preset::Toy8 => Params::generate(8, 16, 3, 1, 2f64.powi(16), 2, 3.2),
            Preset::Paper30 => Params::generate(1 << 12, 30, 3, 3, 2f64.powi(30), 64, 3.2),
        };
        built.expect("presets are valid")
    }

    /// Default message magnitude `‖z‖_∞` for experiments. For paper30 a
    /// product of three dense messages must stay inside the top-level
    /// modulus. For toy8 the single 16-bit special prime leaves a large
    /// key-switching error after the first two-input product, and the bound
    /// keeps its propagation through the second product below `q_0 / 2`.
    pub fn message_bound(self) -> f64 {
        match self {
            Preset::Toy8 => 2f64.powi(-8),
            Preset::Paper30 => 2f64.powi(-6),
        }
    }
}

impl Params {
    /// Selects `L + K` primes deterministically: the smallest `w`-bit primes
    /// `≡ 1 (mod 2N)` above `2^(w-1)`, the first `L` for Q and the next `K`
    /// for P.
    pub fn generate(
        n: usize,
        word_bits: u32,
        l: usize,
        k: usize,
        scale: f64,
        hamming_weight: usize,
        noise_sigma: f64,
    ) -> Result<Self> {
        let primes = ntt_primes(word_bits, n, l + k)?;
        let params = Self {
            n,
            word_bits,
            q_moduli: primes[..l].to_vec(),
            p_moduli: primes[l..].to_vec(),
            scale,
            hamming_weight,
            noise_sigma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn l(&self) -> usize {
        self.q_moduli.len()
    }

    pub fn k(&self) -> usize {
        self.p_moduli.len()
    }

    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 2 || !self.n.is_power_of_two() {
            return fail(format!("N = {} is not a power of two", self.n));
        }
        if self.q_moduli.is_empty() || self.p_moduli.is_empty() {
            return fail("need at least one Q and one P modulus".into());
        }
        let two_n = 2 * self.n as u64;
        for &q in self.q_moduli.iter().chain(&self.p_moduli) {
            if !crate::arith::is_prime(q) {
                return fail(format!("modulus {q} is not prime"));
            }
            if q % two_n != 1 {
                return fail(format!("modulus {q} is not 1 mod 2N"));
            }
            if 64 - q.leading_zeros() > self.word_bits {
                return fail(format!("modulus {q} wider than {} bits", self.word_bits));
            }
        }
        let mut all: Vec<u64> = self.q_moduli.iter().chain(&self.p_moduli).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return fail("moduli must be distinct".into());
        }
        if self.hamming_weight == 0 || self.hamming_weight > self.n {
            return fail(format!("hamming weight {} outside 1..={}", self.hamming_weight, self.n));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise sigma {} must be positive", self.noise_sigma));
        }
        if !(self.scale >= 1.0 && self.scale.is_finite()) {
            return fail(format!("scale {} must be at least 1", self.scale));
        }
        Ok(())
    }

    /// A circuit with `rescalings` rescale steps needs `rescalings + 1` limbs.
    pub fn require_depth(&self, rescalings: usize) -> Result<()> {
        if self.l() < rescalings + 1 {
            return Err(Error::InvalidParams(format!(
                "L = {} cannot absorb {rescalings} rescalings (need L >= {})",
                self.l(),
                rescalings + 1
            )));
        }
        Ok(())
    }

    /// Parameter of the centered binomial error distribution: `η = round(2σ²)`,
    /// giving variance `η/2 ≈ σ²`.
    pub fn binomial_eta(&self) -> u32 {
        (2.0 * self.noise_sigma * self.noise_sigma).round().max(1.0) as u32
    }
}

/// Everything precomputed from [`Params`]: NTT tables, RNS bases per level,
/// ModUp / ModDown converters.
#[derive(Clone, Debug)]
pub struct Context {
    params: Params,
    ring: RingContext,
    q_bases: Vec<RnsBasis>,
    p_basis: RnsBasis,
    extended_bases: Vec<RnsBasis>,
    mod_up: Vec<BasisConverter>,
    mod_down: Vec<ModDown>,
    p_mod_q: Vec<u64>,
}

impl Context {
    pub fn new(params: Params) -> Result<Self> {
        params.validate()?;
        let ring = RingContext::new(params.n, &params.q_moduli, &params.p_moduli)?;
        let q_all: Vec<Modulus> = ring.q_moduli(params.l());
        let p_all: Vec<Modulus> = ring.p_moduli();
        let p_basis = RnsBasis::new(p_all.clone())?;
        let q_bases = (1..=params.l())
            .map(|l| RnsBasis::new(q_all[..l].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let extended_bases = (1..=params.l())
            .map(|l| RnsBasis::new(q_all[..l].iter().chain(&p_all).copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        let mod_up = q_bases.iter().map(|b| BasisConverter::new(b, &p_all)).collect();
        let mod_down = (1..=params.l())
            .map(|l| ModDown::new(&p_basis, &q_all[..l]))
            .collect::<Result<Vec<_>>>()?;
        let p_mod_q = q_all
            .iter()
            .map(|q| (p_basis.product() % q.value()).to_u64().unwrap())
            .collect();
        Ok(Self { params, ring, q_bases, p_basis, extended_bases, mod_up, mod_down, p_mod_q })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn ring(&self) -> &RingContext {
        &self.ring
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn max_level(&self) -> usize {
        self.params.l()
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Basis of the first `level` Q-moduli.
    pub fn q_basis(&self, level: usize) -> &RnsBasis {
        &self.q_bases[level - 1]
    }

    pub fn p_basis(&self) -> &RnsBasis {
        &self.p_basis
    }

    /// Basis `q_0..q_{level-1}, p_0..p_{K-1}`.
    pub fn extended_basis(&self, level: usize) -> &RnsBasis {
        &self.extended_bases[level - 1]
    }

    pub fn mod_up_converter(&self, level: usize) -> &BasisConverter {
        &self.mod_up[level - 1]
    }

    pub fn mod_down_constants(&self, level: usize) -> &ModDown {
        &self.mod_down[level - 1]
    }

    /// `P mod q_j`.
    pub fn p_mod_q(&self, j: usize) -> u64 {
        self.p_mod_q[j]
    }

    pub fn q_modulus_value(&self, j: usize) -> u64 {
        self.params.q_moduli[j]
    }
}
