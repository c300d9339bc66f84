//! RNS polynomials over `Z[x]/(x^N + 1)` and the ring context that owns the
//! per-limb NTT tables.
//!
//! A polynomial carries `level` rows for the first `level` Q-moduli, optionally
//! followed by one row per P-modulus (`special` rows), and a domain tag.

use rand::Rng;

use crate::arith::Modulus;
use crate::error::{Error, Result};
use crate::ntt::{negacyclic_schoolbook, pointwise_mul, NttTable};
use crate::rns::ResidueVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Ntt,
}

impl Domain {
    pub fn tag(self) -> &'static str {
        match self {
            Domain::Coefficient => "coeff",
            Domain::Ntt => "ntt",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "coeff" => Ok(Domain::Coefficient),
            "ntt" => Ok(Domain::Ntt),
            other => Err(Error::Format(format!("unknown domain tag {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnsPoly {
    domain: Domain,
    level: usize,
    special: usize,
    rows: ResidueVector,
}

impl RnsPoly {
    pub fn from_rows(rows: ResidueVector, level: usize, special: usize, domain: Domain) -> Result<Self> {
        if rows.len() != level + special {
            return Err(Error::LayoutMismatch(format!(
                "{} rows for level {level} with {special} special limbs",
                rows.len()
            )));
        }
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::LayoutMismatch("ragged residue rows".into()));
        }
        Ok(Self { domain, level, special, rows })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Number of Q-limbs.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of P-limbs (0 or K).
    pub fn special(&self) -> usize {
        self.special
    }

    pub fn n(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &ResidueVector {
        &self.rows
    }

    pub fn into_rows(self) -> ResidueVector {
        self.rows
    }

    pub fn row(&self, j: usize) -> &[u64] {
        &self.rows[j]
    }

    pub fn q_rows(&self) -> &[Vec<u64>] {
        &self.rows[..self.level]
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&x| x == 0))
    }

    /// Drops Q-limbs above `level` without dividing (modulus reduction).
    pub fn drop_to_level(&self, level: usize) -> Result<Self> {
        if self.special != 0 {
            return Err(Error::LayoutMismatch("cannot drop limbs of an extended polynomial".into()));
        }
        if level == 0 || level > self.level {
            return Err(Error::InsufficientLevel { needed: level, have: self.level });
        }
        Ok(Self { domain: self.domain, level, special: 0, rows: self.rows[..level].to_vec() })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch { expected: self.domain, found: other.domain });
        }
        if self.level != other.level || self.special != other.special || self.n() != other.n() {
            return Err(Error::LayoutMismatch(format!(
                "({}, {}, N={}) vs ({}, {}, N={})",
                self.level,
                self.special,
                self.n(),
                other.level,
                other.special,
                other.n()
            )));
        }
        Ok(())
    }
}

/// Ring degree plus NTT tables for every Q- and P-modulus.
#[derive(Clone, Debug)]
pub struct RingContext {
    n: usize,
    q_tables: Vec<NttTable>,
    p_tables: Vec<NttTable>,
}

impl RingContext {
    pub fn new(n: usize, q_moduli: &[u64], p_moduli: &[u64]) -> Result<Self> {
        let build = |values: &[u64]| -> Result<Vec<NttTable>> {
            values.iter().map(|&v| NttTable::new(Modulus::new(v)?, n)).collect()
        };
        Ok(Self { n, q_tables: build(q_moduli)?, p_tables: build(p_moduli)? })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_level(&self) -> usize {
        self.q_tables.len()
    }

    pub fn special_len(&self) -> usize {
        self.p_tables.len()
    }

    pub fn q_modulus(&self, j: usize) -> &Modulus {
        self.q_tables[j].modulus()
    }

    pub fn p_modulus(&self, i: usize) -> &Modulus {
        self.p_tables[i].modulus()
    }

    pub fn q_moduli(&self, level: usize) -> Vec<Modulus> {
        self.q_tables[..level].iter().map(|t| *t.modulus()).collect()
    }

    pub fn p_moduli(&self) -> Vec<Modulus> {
        self.p_tables.iter().map(|t| *t.modulus()).collect()
    }

    /// Tables for the limbs of a `(level, special)` layout.
    pub fn tables(&self, level: usize, special: usize) -> impl Iterator<Item = &NttTable> {
        assert!(special == 0 || special == self.p_tables.len(), "special limbs are all-or-nothing");
        self.q_tables[..level].iter().chain(self.p_tables[..special].iter())
    }

    pub fn moduli(&self, level: usize, special: usize) -> Vec<Modulus> {
        self.tables(level, special).map(|t| *t.modulus()).collect()
    }

    fn check_layout(&self, level: usize, special: usize) -> Result<()> {
        if level == 0 || level > self.max_level() || !(special == 0 || special == self.special_len()) {
            return Err(Error::LayoutMismatch(format!("level {level} / special {special} not in context")));
        }
        Ok(())
    }

    pub fn zero(&self, level: usize, special: usize, domain: Domain) -> RnsPoly {
        RnsPoly { domain, level, special, rows: vec![vec![0; self.n]; level + special] }
    }

    /// Embeds signed integer coefficients into every limb.
    pub fn from_signed(&self, coeffs: &[i64], level: usize, special: usize) -> Result<RnsPoly> {
        self.check_layout(level, special)?;
        if coeffs.len() != self.n {
            return Err(Error::LayoutMismatch(format!("{} coefficients for N={}", coeffs.len(), self.n)));
        }
        let rows = self
            .tables(level, special)
            .map(|t| coeffs.iter().map(|&c| t.modulus().reduce_i64(c)).collect())
            .collect();
        Ok(RnsPoly { domain: Domain::Coefficient, level, special, rows })
    }

    /// Uniform residues in every limb (a uniform element of `R_{QP}` by CRT).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, level: usize, special: usize, domain: Domain, rng: &mut R) -> RnsPoly {
        let rows = self
            .tables(level, special)
            .map(|t| (0..self.n).map(|_| rng.gen_range(0..t.modulus().value())).collect())
            .collect();
        RnsPoly { domain, level, special, rows }
    }

    /// Checks that every residue is below its row modulus.
    pub fn validate(&self, p: &RnsPoly) -> Result<()> {
        self.check_layout(p.level, p.special)?;
        for (row, t) in p.rows.iter().zip(self.tables(p.level, p.special)) {
            if row.len() != self.n {
                return Err(Error::LayoutMismatch(format!("row of length {} for N={}", row.len(), self.n)));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= t.modulus().value()) {
                return Err(Error::Format(format!("residue {bad} not below modulus {}", t.modulus().value())));
            }
        }
        Ok(())
    }

    fn zip_rows(&self, a: &RnsPoly, b: &RnsPoly, f: impl Fn(&Modulus, u64, u64) -> u64) -> Result<RnsPoly> {
        a.check_compatible(b)?;
        let rows = a
            .rows
            .iter()
            .zip(&b.rows)
            .zip(self.tables(a.level, a.special))
            .map(|((x, y), t)| x.iter().zip(y).map(|(&u, &v)| f(t.modulus(), u, v)).collect())
            .collect();
        Ok(RnsPoly { domain: a.domain, level: a.level, special: a.special, rows })
    }

    pub fn add(&self, a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly> {
        self.zip_rows(a, b, |q, u, v| q.add(u, v))
    }

    pub fn sub(&self, a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly> {
        self.zip_rows(a, b, |q, u, v| q.sub(u, v))
    }

    pub fn neg(&self, a: &RnsPoly) -> RnsPoly {
        let rows = a
            .rows
            .iter()
            .zip(self.tables(a.level, a.special))
            .map(|(x, t)| x.iter().map(|&u| t.modulus().neg(u)).collect())
            .collect();
        RnsPoly { rows, ..a.clone() }
    }

    /// Negacyclic product: pointwise in the NTT domain, schoolbook in the
    /// coefficient domain.
    pub fn mul(&self, a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly> {
        a.check_compatible(b)?;
        let rows = a
            .rows
            .iter()
            .zip(&b.rows)
            .zip(self.tables(a.level, a.special))
            .map(|((x, y), t)| match a.domain {
                Domain::Ntt => pointwise_mul(x, y, t.modulus()),
                Domain::Coefficient => negacyclic_schoolbook(x, y, t.modulus()),
            })
            .collect();
        Ok(RnsPoly { domain: a.domain, level: a.level, special: a.special, rows })
    }

    pub fn ntt_forward(&self, p: &RnsPoly) -> Result<RnsPoly> {
        if p.domain != Domain::Coefficient {
            return Err(Error::DomainMismatch { expected: Domain::Coefficient, found: p.domain });
        }
        let mut out = p.clone();
        for (row, t) in out.rows.iter_mut().zip(self.tables(p.level, p.special)) {
            t.forward(row);
        }
        out.domain = Domain::Ntt;
        Ok(out)
    }

    pub fn ntt_inverse(&self, p: &RnsPoly) -> Result<RnsPoly> {
        if p.domain != Domain::Ntt {
            return Err(Error::DomainMismatch { expected: Domain::Ntt, found: p.domain });
        }
        let mut out = p.clone();
        for (row, t) in out.rows.iter_mut().zip(self.tables(p.level, p.special)) {
            t.inverse(row);
        }
        out.domain = Domain::Coefficient;
        Ok(out)
    }

    /// Transforms only rows `from..` of a coefficient-domain polynomial,
    /// treating rows `..from` as already transformed.
    pub(crate) fn ntt_tail(&self, p: &mut RnsPoly, from: usize) {
        let tables: Vec<&NttTable> = self.tables(p.level, p.special).collect();
        for (row, t) in p.rows.iter_mut().zip(tables).skip(from) {
            t.forward(row);
        }
        p.domain = Domain::Ntt;
    }

    /// Builds a polynomial directly from rows that are already laid out for
    /// `(level, special)` in this context.
    pub(crate) fn wrap(&self, rows: ResidueVector, level: usize, special: usize, domain: Domain) -> RnsPoly {
        debug_assert_eq!(rows.len(), level + special);
        RnsPoly { domain, level, special, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ntt_primes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ctx(n: usize) -> RingContext {
        let primes = ntt_primes(20, n, 3).unwrap();
        RingContext::new(n, &primes[..2], &primes[2..]).unwrap()
    }

    #[test]
    fn add_sub_identities_and_linearity() {
        let c = ctx(16);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = c.sample_uniform(2, 1, Domain::Coefficient, &mut rng);
        let b = c.sample_uniform(2, 1, Domain::Coefficient, &mut rng);
        let zero = c.zero(2, 1, Domain::Coefficient);
        assert_eq!(c.add(&a, &zero).unwrap(), a);
        assert!(c.sub(&a, &a).unwrap().is_zero());
        let lhs = c.ntt_forward(&c.add(&a, &b).unwrap()).unwrap();
        let rhs = c.add(&c.ntt_forward(&a).unwrap(), &c.ntt_forward(&b).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn mismatches_are_errors() {
        let c = ctx(8);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = c.sample_uniform(2, 0, Domain::Coefficient, &mut rng);
        let a_ntt = c.ntt_forward(&a).unwrap();
        assert!(matches!(c.add(&a, &a_ntt), Err(Error::DomainMismatch { .. })));
        assert!(matches!(c.mul(&a, &a_ntt), Err(Error::DomainMismatch { .. })));
        assert!(matches!(c.ntt_forward(&a_ntt), Err(Error::DomainMismatch { .. })));
        assert!(matches!(c.ntt_inverse(&a), Err(Error::DomainMismatch { .. })));
        let short = a.drop_to_level(1).unwrap();
        assert!(matches!(c.sub(&a, &short), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn monomial_wraparound_and_identity() {
        let c = ctx(8);
        let mut xn1 = vec![0i64; 8];
        xn1[7] = 1;
        let mut x = vec![0i64; 8];
        x[1] = 1;
        let mut one = vec![0i64; 8];
        one[0] = 1;
        let a = c.from_signed(&xn1, 2, 0).unwrap();
        let b = c.from_signed(&x, 2, 0).unwrap();
        let prod = c.mul(&a, &b).unwrap();
        assert_eq!(prod, c.from_signed(&[-1, 0, 0, 0, 0, 0, 0, 0], 2, 0).unwrap());
        let fast = c
            .ntt_inverse(&c.mul(&c.ntt_forward(&a).unwrap(), &c.ntt_forward(&b).unwrap()).unwrap())
            .unwrap();
        assert_eq!(fast, prod);
        let unit = c.from_signed(&one, 2, 0).unwrap();
        assert_eq!(c.mul(&unit, &b).unwrap(), b);
    }
}
