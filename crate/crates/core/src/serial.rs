//! File containers for keys and ciphertexts.
//!
//! Every file starts with the parameter header: `N`, `w`, the Q and P moduli,
//! scale, Hamming weight and error width. Loading checks the header against
//! the active parameters before touching any polynomial.
//!
//! Text layout, one item per line:
//!
//! ```text
//! ckks3-text 1
//! kind ciphertext
//! n 8
//! word_bits 16
//! q_moduli 65537 …
//! p_moduli …
//! scale 65536
//! hamming_weight 2
//! noise_sigma 3.2
//! meta scale 65536
//! poly c0 coeff 3 0
//! r 17 4 …
//! end
//! ```
//!
//! Binary layout, little-endian: magic `CKK3`, `u32` version, `u8` kind, the
//! same header fields (strings as `u16` length + UTF-8), then the polynomials
//! with their rows as `u64` words.

use std::fmt::Write as _;

use crate::cipher::Ciphertext;
use crate::error::{Error, Result};
use crate::keys::{EvalKey, PublicKey, SecretKey};
use crate::params::{Context, Params};
use crate::poly::{Domain, RnsPoly};

pub const FORMAT_VERSION: u32 = 1;
const TEXT_MAGIC: &str = "ckks3-text";
const BINARY_MAGIC: &[u8; 4] = b"CKK3";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    SecretKey,
    PublicKey,
    EvalKey,
    Ciphertext,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::SecretKey => "secret_key",
            Kind::PublicKey => "public_key",
            Kind::EvalKey => "eval_key",
            Kind::Ciphertext => "ciphertext",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Kind::SecretKey => 0,
            Kind::PublicKey => 1,
            Kind::EvalKey => 2,
            Kind::Ciphertext => 3,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        [Kind::SecretKey, Kind::PublicKey, Kind::EvalKey, Kind::Ciphertext]
            .into_iter()
            .find(|k| k.tag() == t)
            .ok_or_else(|| Error::Format(format!("unknown kind tag {t}")))
    }

    fn from_name(s: &str) -> Result<Self> {
        [Kind::SecretKey, Kind::PublicKey, Kind::EvalKey, Kind::Ciphertext]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "binary" => Ok(Format::Binary),
            _ => Err(Error::Format(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub kind: Kind,
    pub params: Params,
    pub meta: Vec<(String, String)>,
    pub polys: Vec<(String, RnsPoly)>,
}

impl Document {
    fn new(kind: Kind, params: &Params) -> Self {
        Self { kind, params: params.clone(), meta: Vec::new(), polys: Vec::new() }
    }

    fn meta_value(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("missing `{key}` entry")))
    }

    fn poly(&self, name: &str) -> Result<&RnsPoly> {
        self.polys
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Format(format!("missing polynomial `{name}`")))
    }

    fn expect(&self, kind: Kind, ctx: &Context) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {}, found a {}", kind.name(), self.kind.name())));
        }
        if &self.params != ctx.params() {
            return Err(Error::Format("file parameters differ from the active parameters".into()));
        }
        for (_, p) in &self.polys {
            ctx.ring().validate(p)?;
        }
        Ok(())
    }

    pub fn from_ciphertext(ct: &Ciphertext, params: &Params) -> Self {
        let mut doc = Self::new(Kind::Ciphertext, params);
        doc.meta.push(("scale".into(), ct.scale().to_string()));
        doc.polys.push(("c0".into(), ct.c0().clone()));
        doc.polys.push(("c1".into(), ct.c1().clone()));
        doc
    }

    pub fn to_ciphertext(&self, ctx: &Context) -> Result<Ciphertext> {
        self.expect(Kind::Ciphertext, ctx)?;
        let scale: f64 = self.meta_value("scale")?.parse().map_err(|_| Error::Format("bad scale".into()))?;
        Ciphertext::new(self.poly("c0")?.clone(), self.poly("c1")?.clone(), scale)
    }

    /// The secret is stored as its coefficient-domain residues over Q and P.
    pub fn from_secret_key(sk: &SecretKey, ctx: &Context) -> Result<Self> {
        let mut doc = Self::new(Kind::SecretKey, ctx.params());
        let s = ctx.ring().from_signed(sk.coeffs(), ctx.max_level(), ctx.k())?;
        doc.polys.push(("s".into(), s));
        Ok(doc)
    }

    pub fn to_secret_key(&self, ctx: &Context) -> Result<SecretKey> {
        self.expect(Kind::SecretKey, ctx)?;
        let s = self.poly("s")?;
        if s.domain() != Domain::Coefficient || s.level() != ctx.max_level() || s.special() != ctx.k() {
            return Err(Error::Format("secret key layout".into()));
        }
        let q0 = ctx.q_modulus_value(0);
        let coeffs: Vec<i64> = s.row(0).iter().map(|&r| if r > q0 / 2 { r as i64 - q0 as i64 } else { r as i64 }).collect();
        let sk = SecretKey::from_coeffs(coeffs, ctx)?;
        if &ctx.ring().from_signed(sk.coeffs(), ctx.max_level(), ctx.k())? != s {
            return Err(Error::Format("secret key residues disagree across limbs".into()));
        }
        Ok(sk)
    }

    pub fn from_public_key(pk: &PublicKey, params: &Params) -> Self {
        let mut doc = Self::new(Kind::PublicKey, params);
        doc.polys.push(("b".into(), pk.b.clone()));
        doc.polys.push(("a".into(), pk.a.clone()));
        doc
    }

    pub fn to_public_key(&self, ctx: &Context) -> Result<PublicKey> {
        self.expect(Kind::PublicKey, ctx)?;
        let (b, a) = (self.poly("b")?.clone(), self.poly("a")?.clone());
        for p in [&b, &a] {
            if p.domain() != Domain::Ntt || p.level() != ctx.max_level() || p.special() != 0 {
                return Err(Error::Format("public key layout".into()));
            }
        }
        Ok(PublicKey { b, a })
    }

    pub fn from_eval_key(evk: &EvalKey, params: &Params) -> Self {
        let mut doc = Self::new(Kind::EvalKey, params);
        doc.meta.push(("power".into(), evk.power().to_string()));
        doc.polys.push(("evk0".into(), evk.evk0.clone()));
        doc.polys.push(("evk1".into(), evk.evk1.clone()));
        doc
    }

    pub fn to_eval_key(&self, ctx: &Context) -> Result<EvalKey> {
        self.expect(Kind::EvalKey, ctx)?;
        let power: u8 = self.meta_value("power")?.parse().map_err(|_| Error::Format("bad key power".into()))?;
        let (e0, e1) = (self.poly("evk0")?.clone(), self.poly("evk1")?.clone());
        for p in [&e0, &e1] {
            if p.level() != ctx.max_level() || p.special() != ctx.k() {
                return Err(Error::Format("evaluation key layout".into()));
            }
        }
        EvalKey::new(power, e0, e1)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn write_text(doc: &Document) -> String {
    let p = &doc.params;
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "kind {}", doc.kind.name());
    let _ = writeln!(s, "n {}", p.n);
    let _ = writeln!(s, "word_bits {}", p.word_bits);
    let _ = writeln!(s, "q_moduli {}", join(&p.q_moduli));
    let _ = writeln!(s, "p_moduli {}", join(&p.p_moduli));
    let _ = writeln!(s, "scale {}", p.scale);
    let _ = writeln!(s, "hamming_weight {}", p.hamming_weight);
    let _ = writeln!(s, "noise_sigma {}", p.noise_sigma);
    for (k, v) in &doc.meta {
        let _ = writeln!(s, "meta {k} {v}");
    }
    for (name, poly) in &doc.polys {
        let _ = writeln!(s, "poly {name} {} {} {}", poly.domain().tag(), poly.level(), poly.special());
        for row in poly.rows() {
            let _ = writeln!(s, "r {}", join(row));
        }
    }
    s.push_str("end\n");
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.ok_or_else(|| bad(format!("missing {what}")))?.parse().map_err(|_| bad(format!("malformed {what}")))
}

fn check_version(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::FormatVersion { expected: FORMAT_VERSION, found });
    }
    Ok(())
}

pub fn read_text(input: &str) -> Result<Document> {
    let mut lines = input.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut field = |key: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(format!("expected `{key}`, found `{line}`")));
        }
        Ok(parts.map(String::from).collect())
    };
    let magic = field(TEXT_MAGIC)?;
    check_version(parse(magic.first().map(String::as_str), "format version")?)?;
    let one = |v: Vec<String>, what: &str| -> Result<String> {
        if v.len() != 1 {
            return Err(bad(format!("`{what}` takes one value")));
        }
        Ok(v.into_iter().next().unwrap_or_default())
    };
    let kind = Kind::from_name(&one(field("kind")?, "kind")?)?;
    let n = parse(Some(&one(field("n")?, "n")?), "n")?;
    let word_bits = parse(Some(&one(field("word_bits")?, "word_bits")?), "word_bits")?;
    let moduli = |v: Vec<String>| -> Result<Vec<u64>> { v.iter().map(|x| parse(Some(x), "modulus")).collect() };
    let q_moduli = moduli(field("q_moduli")?)?;
    let p_moduli = moduli(field("p_moduli")?)?;
    let scale = parse(Some(&one(field("scale")?, "scale")?), "scale")?;
    let hamming_weight = parse(Some(&one(field("hamming_weight")?, "hamming_weight")?), "hamming_weight")?;
    let noise_sigma = parse(Some(&one(field("noise_sigma")?, "noise_sigma")?), "noise_sigma")?;
    let params = Params { n, word_bits, q_moduli, p_moduli, scale, hamming_weight, noise_sigma };
    params.validate()?;
    let mut doc = Document::new(kind, &params);
    let mut rest = lines.peekable();
    loop {
        let line = rest.next().ok_or_else(|| bad("missing `end`"))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("end") => break,
            Some("meta") => {
                let key = parts.next().ok_or_else(|| bad("meta without key"))?;
                let value = parts.next().ok_or_else(|| bad("meta without value"))?;
                doc.meta.push((key.into(), value.into()));
            }
            Some("poly") => {
                let name: String = parse(parts.next(), "poly name")?;
                let domain = Domain::from_tag(parts.next().ok_or_else(|| bad("poly without domain"))?)?;
                let level: usize = parse(parts.next(), "poly level")?;
                let special: usize = parse(parts.next(), "poly special")?;
                let mut rows = Vec::with_capacity(level + special);
                for _ in 0..level + special {
                    let row = rest.next().ok_or_else(|| bad("missing residue row"))?;
                    let mut vals = row.split_whitespace();
                    if vals.next() != Some("r") {
                        return Err(bad("expected residue row"));
                    }
                    rows.push(vals.map(|v| parse(Some(v), "residue")).collect::<Result<Vec<u64>>>()?);
                }
                doc.polys.push((name, RnsPoly::from_rows(rows, level, special, domain)?));
            }
            _ => return Err(bad(format!("unexpected line `{line}`"))),
        }
    }
    if rest.next().is_some() {
        return Err(bad("trailing content after `end`"));
    }
    Ok(doc)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn write_binary(doc: &Document) -> Vec<u8> {
    let p = &doc.params;
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(doc.kind.tag());
    out.extend_from_slice(&(p.n as u64).to_le_bytes());
    out.extend_from_slice(&p.word_bits.to_le_bytes());
    for moduli in [&p.q_moduli, &p.p_moduli] {
        out.extend_from_slice(&(moduli.len() as u32).to_le_bytes());
        for m in moduli {
            out.extend_from_slice(&m.to_le_bytes());
        }
    }
    out.extend_from_slice(&p.scale.to_bits().to_le_bytes());
    out.extend_from_slice(&(p.hamming_weight as u64).to_le_bytes());
    out.extend_from_slice(&p.noise_sigma.to_bits().to_le_bytes());
    out.extend_from_slice(&(doc.meta.len() as u32).to_le_bytes());
    for (k, v) in &doc.meta {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    out.extend_from_slice(&(doc.polys.len() as u32).to_le_bytes());
    for (name, poly) in &doc.polys {
        put_str(&mut out, name);
        out.push(match poly.domain() {
            Domain::Coefficient => 0,
            Domain::Ntt => 1,
        });
        out.extend_from_slice(&(poly.level() as u32).to_le_bytes());
        out.extend_from_slice(&(poly.special() as u32).to_le_bytes());
        for row in poly.rows() {
            for x in row {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(bad("truncated binary file"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| bad("invalid UTF-8"))
    }

    fn count(&mut self, limit: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > limit {
            return Err(bad(format!("count {n} exceeds {limit}")));
        }
        Ok(n)
    }
}

pub fn read_binary(bytes: &[u8]) -> Result<Document> {
    let mut r = Reader { bytes };
    if r.take(4)? != BINARY_MAGIC {
        return Err(bad("not a ckks3 binary file"));
    }
    check_version(r.u32()?)?;
    let kind = Kind::from_tag(r.u8()?)?;
    let n = usize::try_from(r.u64()?).map_err(|_| bad("ring degree"))?;
    let word_bits = r.u32()?;
    let mut moduli = || -> Result<Vec<u64>> {
        let len = r.count(64)?;
        (0..len).map(|_| r.u64()).collect()
    };
    let q_moduli = moduli()?;
    let p_moduli = moduli()?;
    let scale = f64::from_bits(r.u64()?);
    let hamming_weight = r.u64()? as usize;
    let noise_sigma = f64::from_bits(r.u64()?);
    let params = Params { n, word_bits, q_moduli, p_moduli, scale, hamming_weight, noise_sigma };
    params.validate()?;
    let mut doc = Document::new(kind, &params);
    for _ in 0..r.count(16)? {
        let k = r.string()?;
        let v = r.string()?;
        doc.meta.push((k, v));
    }
    let max_rows = params.l() + params.k();
    for _ in 0..r.count(16)? {
        let name = r.string()?;
        let domain = match r.u8()? {
            0 => Domain::Coefficient,
            1 => Domain::Ntt,
            t => return Err(bad(format!("unknown domain tag {t}"))),
        };
        let level = r.count(max_rows)?;
        let special = r.count(max_rows)?;
        if level + special > max_rows {
            return Err(bad("too many residue rows"));
        }
        let rows = (0..level + special)
            .map(|_| (0..n).map(|_| r.u64()).collect::<Result<Vec<u64>>>())
            .collect::<Result<Vec<_>>>()?;
        doc.polys.push((name, RnsPoly::from_rows(rows, level, special, domain)?));
    }
    if !r.bytes.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(doc)
}

pub fn encode_document(doc: &Document, format: Format) -> Vec<u8> {
    match format {
        Format::Text => write_text(doc).into_bytes(),
        Format::Binary => write_binary(doc),
    }
}

/// Reads either layout, telling them apart by the leading magic.
pub fn decode_document(bytes: &[u8]) -> Result<Document> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes)
    } else {
        read_text(std::str::from_utf8(bytes).map_err(|_| bad("neither text nor binary container"))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::encrypt;
    use crate::encoding::Message;
    use crate::keys::keygen;
    use crate::params::Preset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (Context, crate::keys::KeySet, Ciphertext) {
        let ctx = Context::new(Preset::Toy8.params()).unwrap();
        let keys = keygen(&ctx, 1).unwrap();
        let m = Message::from_integers(&[1, -2, 3, 0, 5, 6, -7, 8], ctx.params().scale);
        let ct = encrypt(&m, &keys.public, &ctx, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        (ctx, keys, ct)
    }

    #[test]
    fn round_trips_in_both_layouts() {
        let (ctx, keys, ct) = setup();
        let scaled = Ciphertext::new(ct.c0().clone(), ct.c1().clone(), 1.0 / 3.0).unwrap();
        for format in [Format::Text, Format::Binary] {
            let rt = |doc: &Document| decode_document(&encode_document(doc, format)).unwrap();
            let doc = Document::from_ciphertext(&scaled, ctx.params());
            assert_eq!(rt(&doc).to_ciphertext(&ctx).unwrap(), scaled);
            let doc = Document::from_secret_key(&keys.secret, &ctx).unwrap();
            assert_eq!(rt(&doc).to_secret_key(&ctx).unwrap(), keys.secret);
            let doc = Document::from_public_key(&keys.public, ctx.params());
            assert_eq!(rt(&doc).to_public_key(&ctx).unwrap(), keys.public);
            let doc = Document::from_eval_key(&keys.evk_cubed, ctx.params());
            assert_eq!(rt(&doc).to_eval_key(&ctx).unwrap(), keys.evk_cubed);
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let (ctx, _, ct) = setup();
        let text = write_text(&Document::from_ciphertext(&ct, ctx.params())).replacen("ckks3-text 1", "ckks3-text 2", 1);
        assert!(matches!(read_text(&text), Err(Error::FormatVersion { expected: 1, found: 2 })));
        let mut bin = write_binary(&Document::from_ciphertext(&ct, ctx.params()));
        bin[4] = 9;
        assert!(matches!(read_binary(&bin), Err(Error::FormatVersion { found: 9, .. })));
    }

    #[test]
    fn parameter_and_kind_mismatches_are_rejected() {
        let (ctx, keys, ct) = setup();
        let doc = Document::from_ciphertext(&ct, ctx.params());
        let other = Context::new(Params::generate(8, 17, 3, 1, 65536.0, 2, 3.2).unwrap()).unwrap();
        assert!(doc.to_ciphertext(&other).is_err());
        assert!(doc.to_public_key(&ctx).is_err());
        let pk = Document::from_public_key(&keys.public, ctx.params());
        assert!(pk.to_ciphertext(&ctx).is_err());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let (ctx, _, ct) = setup();
        let bin = write_binary(&Document::from_ciphertext(&ct, ctx.params()));
        assert!(read_binary(&bin[..bin.len() - 1]).is_err());
        let mut extra = bin.clone();
        extra.push(0);
        assert!(read_binary(&extra).is_err());
        let text = write_text(&Document::from_ciphertext(&ct, ctx.params()));
        assert!(read_text(&text.replace("end\n", "")).is_err());
        let q0 = ctx.q_modulus_value(0);
        let first_row = text.lines().find(|l| l.starts_with("r ")).unwrap();
        let broken = text.replacen(first_row, &format!("r {}{}", q0, " 0".repeat(7)), 1);
        assert!(read_text(&broken).unwrap().to_ciphertext(&ctx).is_err());
    }

    #[test]
    fn encoding_is_deterministic() {
        let (ctx, keys, _) = setup();
        let doc = Document::from_eval_key(&keys.evk, ctx.params());
        assert_eq!(encode_document(&doc, Format::Binary), encode_document(&doc, Format::Binary));
        assert_eq!(write_text(&doc), write_text(&doc.clone()));
    }
}
