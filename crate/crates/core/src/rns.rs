//! Residue number system: bases, exact CRT reconstruction, fast basis
//! conversion and the coefficient-level ModUp / ModDown / rescale primitives.
//!
//! A residue vector is stored row-major: one row of `N` residues per modulus.

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use crate::arith::Modulus;
use crate::error::{Error, Result};

/// Per-modulus rows of residues, `rows[j][i] = x_i mod q_j`.
pub type ResidueVector = Vec<Vec<u64>>;

/// An ordered list of pairwise-coprime moduli with CRT constants.
#[derive(Clone, Debug)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
    product: BigUint,
    /// `Q / q_j`
    q_hat: Vec<BigUint>,
    /// `(Q / q_j)^{-1} mod q_j`
    q_hat_inv: Vec<u64>,
}

impl RnsBasis {
    pub fn new(moduli: Vec<Modulus>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidParams("empty RNS basis".into()));
        }
        for (i, a) in moduli.iter().enumerate() {
            for b in &moduli[..i] {
                if num_integer::gcd(a.value(), b.value()) != 1 {
                    return Err(Error::InvalidParams(format!(
                        "moduli {} and {} are not coprime",
                        a.value(),
                        b.value()
                    )));
                }
            }
        }
        let product: BigUint = moduli.iter().map(|m| BigUint::from(m.value())).product();
        let q_hat: Vec<BigUint> = moduli.iter().map(|m| &product / m.value()).collect();
        let q_hat_inv = moduli
            .iter()
            .zip(&q_hat)
            .map(|(m, hat)| {
                let hat_mod = (hat % m.value()).to_u64().unwrap();
                mod_inverse(hat_mod, m.value())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { moduli, product, q_hat, q_hat_inv })
    }

    pub fn from_values(values: &[u64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Modulus::new(v)).collect::<Result<Vec<_>>>()?)
    }

    #[inline]
    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    pub fn q_hat(&self, j: usize) -> &BigUint {
        &self.q_hat[j]
    }

    pub fn q_hat_inv(&self, j: usize) -> u64 {
        self.q_hat_inv[j]
    }

    /// The basis made of the first `count` moduli.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return Err(Error::InvalidParams(format!("prefix {count} of a {}-limb basis", self.len())));
        }
        Self::new(self.moduli[..count].to_vec())
    }

    /// Residues of an integer (taken mod `Q`).
    pub fn reduce(&self, x: &BigInt) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|m| {
                let r = x % BigInt::from(m.value());
                let r = if r < BigInt::zero() { r + BigInt::from(m.value()) } else { r };
                r.to_u64().unwrap()
            })
            .collect()
    }

    /// Rows for a vector of integers.
    pub fn reduce_all(&self, xs: &[BigInt]) -> ResidueVector {
        let mut rows = vec![vec![0u64; xs.len()]; self.len()];
        for (i, x) in xs.iter().enumerate() {
            for (j, r) in self.reduce(x).into_iter().enumerate() {
                rows[j][i] = r;
            }
        }
        rows
    }
}

fn mod_inverse(a: u64, q: u64) -> Result<u64> {
    let ext = num_integer::Integer::extended_gcd(&(a as i128), &(q as i128));
    if ext.gcd != 1 {
        return Err(Error::NotInvertible(a, q));
    }
    Ok(ext.x.rem_euclid(q as i128) as u64)
}

/// The unique `r` in `[0, Q)` with `r ≡ residues[j] (mod q_j)`.
pub fn crt_reconstruct(residues: &[u64], basis: &RnsBasis) -> BigUint {
    assert_eq!(residues.len(), basis.len(), "one residue per modulus");
    let mut acc = BigUint::zero();
    for (j, (&r, m)) in residues.iter().zip(basis.moduli()).enumerate() {
        let y = m.mul(r, basis.q_hat_inv[j]);
        acc += &basis.q_hat[j] * y;
    }
    acc % &basis.product
}

/// Centered reconstruction: `r - Q` when `r >= Q/2`, else `r`.
pub fn crt_reconstruct_centered(residues: &[u64], basis: &RnsBasis) -> BigInt {
    center(crt_reconstruct(residues, basis), basis.product())
}

pub fn center(r: BigUint, modulus: &BigUint) -> BigInt {
    let twice = &r << 1u32;
    if &twice >= modulus {
        BigInt::from(r) - BigInt::from(modulus.clone())
    } else {
        BigInt::from(r)
    }
}

/// Centered reconstruction of every coefficient of a residue vector.
pub fn reconstruct_all_centered(rows: &[Vec<u64>], basis: &RnsBasis) -> Vec<BigInt> {
    let n = rows.first().map_or(0, Vec::len);
    let mut column = vec![0u64; rows.len()];
    (0..n)
        .map(|i| {
            for (c, row) in column.iter_mut().zip(rows) {
                *c = row[i];
            }
            crt_reconstruct_centered(&column, basis)
        })
        .collect()
}

/// Precomputed constants for converting residues from a source basis into a
/// list of target moduli.
#[derive(Clone, Debug)]
pub struct BasisConverter {
    source: RnsBasis,
    targets: Vec<Modulus>,
    /// `q_hat_mod_target[i][j] = (Q / q_j) mod p_i`
    q_hat_mod_target: Vec<Vec<u64>>,
}

impl BasisConverter {
    pub fn new(source: &RnsBasis, targets: &[Modulus]) -> Self {
        let q_hat_mod_target = targets
            .iter()
            .map(|p| {
                (0..source.len())
                    .map(|j| (source.q_hat(j) % p.value()).to_u64().unwrap())
                    .collect()
            })
            .collect();
        Self { source: source.clone(), targets: targets.to_vec(), q_hat_mod_target }
    }

    pub fn source(&self) -> &RnsBasis {
        &self.source
    }

    pub fn targets(&self) -> &[Modulus] {
        &self.targets
    }
}

/// Fast (correction-free) basis conversion:
/// `out_i = Σ_j [x_j · q̂_j^{-1}]_{q_j} · q̂_j  mod p_i`.
///
/// The result is congruent to `x + αQ` modulo each target, for one integer
/// `0 <= α < L` per coefficient.
pub fn fast_basis_convert(rows: &[Vec<u64>], conv: &BasisConverter) -> ResidueVector {
    let basis = &conv.source;
    assert_eq!(rows.len(), basis.len(), "residue rows must match the source basis");
    let n = rows.first().map_or(0, Vec::len);
    let scaled: Vec<Vec<u64>> = rows
        .iter()
        .zip(basis.moduli())
        .enumerate()
        .map(|(j, (row, m))| row.iter().map(|&x| m.mul(x, basis.q_hat_inv[j])).collect())
        .collect();
    conv.targets
        .iter()
        .zip(&conv.q_hat_mod_target)
        .map(|(p, hats)| {
            (0..n)
                .map(|i| {
                    scaled.iter().zip(hats).fold(0u64, |acc, (row, &hat)| {
                        p.add(acc, p.mul(p.reduce(row[i]), hat))
                    })
                })
                .collect()
        })
        .collect()
}

/// Extends a residue vector over `Q` with rows over `P`; the original rows are
/// kept verbatim.
pub fn mod_up(rows: &[Vec<u64>], conv: &BasisConverter) -> ResidueVector {
    let mut out: ResidueVector = rows.to_vec();
    out.extend(fast_basis_convert(rows, conv));
    out
}

/// Constants for dividing a `(Q ∪ P)` residue vector by `P`.
#[derive(Clone, Debug)]
pub struct ModDown {
    p_to_q: BasisConverter,
    p_inv_mod_q: Vec<u64>,
}

impl ModDown {
    pub fn new(p_basis: &RnsBasis, q_moduli: &[Modulus]) -> Result<Self> {
        let p_to_q = BasisConverter::new(p_basis, q_moduli);
        let p_inv_mod_q = q_moduli
            .iter()
            .map(|q| {
                let p_mod = (p_basis.product() % q.value()).to_u64().unwrap();
                mod_inverse(p_mod, q.value())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p_to_q, p_inv_mod_q })
    }

    pub fn q_len(&self) -> usize {
        self.p_inv_mod_q.len()
    }

    pub fn p_len(&self) -> usize {
        self.p_to_q.source.len()
    }

    pub fn p_inv_mod_q(&self) -> &[u64] {
        &self.p_inv_mod_q
    }
}

/// `out_j = P^{-1} · (x_j − conv(x mod P)_j) mod q_j`.
///
/// Input rows are the `L` Q-rows followed by the `K` P-rows. The output equals
/// `floor(x / P) − α` for the fast-conversion slack `0 <= α < K`, hence lies
/// within `K` of `round(x / P)`.
pub fn mod_down(rows: &[Vec<u64>], md: &ModDown) -> ResidueVector {
    let l = md.q_len();
    assert_eq!(rows.len(), l + md.p_len(), "mod_down expects Q rows followed by P rows");
    let lifted = fast_basis_convert(&rows[l..], &md.p_to_q);
    rows[..l]
        .iter()
        .zip(&lifted)
        .zip(md.p_to_q.targets.iter().zip(&md.p_inv_mod_q))
        .map(|((row, lift), (q, &p_inv))| {
            row.iter().zip(lift).map(|(&x, &b)| q.mul(q.sub(x, b), p_inv)).collect()
        })
        .collect()
}

/// Divides by the last modulus with rounding to nearest and drops its row:
/// `out_j = q_last^{-1} · ((x_j + h) − ((x_last + h) mod q_last)) mod q_j`,
/// with `h = floor(q_last / 2)`.
pub fn rescale(rows: &[Vec<u64>], basis: &RnsBasis) -> Result<ResidueVector> {
    if rows.len() != basis.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} rows for a {}-limb basis",
            rows.len(),
            basis.len()
        )));
    }
    if rows.len() < 2 {
        return Err(Error::NothingToDrop);
    }
    let last_idx = rows.len() - 1;
    let last = basis.moduli()[last_idx];
    let half = last.value() / 2;
    let shifted_last: Vec<u64> = rows[last_idx].iter().map(|&x| last.add(x, half)).collect();
    basis.moduli()[..last_idx]
        .iter()
        .zip(&rows[..last_idx])
        .map(|(q, row)| {
            let inv = q.inv(q.reduce(last.value()))?;
            let half_q = q.reduce(half);
            Ok(row
                .iter()
                .zip(&shifted_last)
                .map(|(&x, &t)| q.mul(q.sub(q.add(x, half_q), q.reduce(t)), inv))
                .collect())
        })
        .collect()
}
