//! Gate-count and latency model of the 2-parallel hardware multipliers.
//!
//! Building-block costs and design totals are the closed forms of the
//! architecture tables. Area is aggregated in XOR-gate equivalents over any
//! scalar with exact small-integer arithmetic (`f64`, `BigRational`).

use std::fmt::Write as _;
use std::str::FromStr;

use num_traits::{FromPrimitive, Num};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mult::{OpCounters, Tensor2Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DesignPoint {
    pub n: u64,
    pub l: u64,
    pub k: u64,
    pub w: u64,
}

impl DesignPoint {
    pub fn new(n: u64, l: u64, k: u64, w: u64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("N={n} must be a power of two, at least 2")));
        }
        if l == 0 || k == 0 {
            return Err(Error::InvalidParams("L and K must be at least 1".into()));
        }
        if w < 2 {
            return Err(Error::InvalidParams(format!("word width {w} too small")));
        }
        Ok(Self { n, l, k, w })
    }

    pub fn log_n(&self) -> u64 {
        self.n.trailing_zeros() as u64
    }
}

impl Default for DesignPoint {
    fn default() -> Self {
        Self { n: 1 << 12, l: 3, k: 3, w: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Block {
    Ntt,
    Intt,
    ModUp,
    ModDown,
    Rescaling,
    PolyMult2,
    PolyMult3,
}

impl Block {
    pub const ALL: [Block; 7] =
        [Block::Ntt, Block::Intt, Block::ModUp, Block::ModDown, Block::Rescaling, Block::PolyMult2, Block::PolyMult3];

    pub fn name(self) -> &'static str {
        match self {
            Block::Ntt => "ntt",
            Block::Intt => "intt",
            Block::ModUp => "mod_up",
            Block::ModDown => "mod_down",
            Block::Rescaling => "rescaling",
            Block::PolyMult2 => "poly_mult2",
            Block::PolyMult3 => "poly_mult3",
        }
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Block::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown block `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BlockCost {
    pub mod_mults: u64,
    pub mod_adders: u64,
    pub memory_words: u64,
    pub pipeline_stages: u64,
}

/// Cost of one 2-parallel block instance.
pub fn block_cost(block: Block, dp: &DesignPoint) -> BlockCost {
    let (n, l, k, log_n) = (dp.n, dp.l, dp.k, dp.log_n());
    let transform_stages = n / 2 - 1 + 5 * log_n;
    let (mod_mults, mod_adders, memory_words, pipeline_stages) = match block {
        Block::Ntt => (log_n, 2 * log_n, n / 2 * log_n, transform_stages),
        Block::Intt => (log_n, 4 * log_n, n / 2 * log_n, transform_stages),
        Block::ModUp => (2 * l + 2 * l * k, 2 * (l - 1), l + l * k, 7),
        Block::ModDown => (2 * l + 2 * k + 2 * l * k, 2 * k, k + l * k, 10),
        Block::Rescaling => (2 * (l - 1), 2 * (l - 1), l * (l - 1) / 2, 4),
        Block::PolyMult2 => (6 * l, 8 * l, 0, 4),
        Block::PolyMult3 => (16 * l, 18 * l, 0, 8),
    };
    BlockCost { mod_mults, mod_adders, memory_words, pipeline_stages }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Design {
    /// Two two-input multipliers, one after the other.
    TwoInputX2,
    /// The three-input multiplier.
    ThreeInput,
}

impl Design {
    pub fn name(self) -> &'static str {
        match self {
            Design::TwoInputX2 => "two_input_x2",
            Design::ThreeInput => "three_input",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub mod_mults: u64,
    pub mod_adders: u64,
    pub memory_words: u64,
    pub delay_elements: u64,
}

fn nonneg(x: i64) -> u64 {
    u64::try_from(x).expect("design totals are non-negative for valid design points")
}

/// Design totals as closed forms in `N`, `L`, `K`.
pub fn total_cost(design: Design, dp: &DesignPoint) -> Totals {
    let (n, l, k, log_n) = (dp.n as i64, dp.l as i64, dp.k as i64, dp.log_n() as i64);
    let memory = (l + k) * n * log_n + l + k + 2 * l * k + l * (l - 1) / 2;
    let stages = n / 2 - 1 + 5 * log_n;
    let (mults, adders, delays) = match design {
        Design::TwoInputX2 => (
            (18 * l + 6 * k) * log_n - 8 + 40 * l + 16 * k + 12 * l * k,
            (56 * l + 20 * k) * log_n - 8 + 32 * l + 12 * l * k - 2 * k,
            (60 * l + 12 * k) * stages + 440 * l + 40 * k,
        ),
        Design::ThreeInput => (
            (12 * l + 4 * k) * log_n - 12 + 35 * l + 7 * k + 8 * l * k,
            (36 * l + 12 * k) * log_n + 34 * l + 8 * l * k - 12,
            (40 * l + 8 * k) * stages + 386 * l + 34 * k,
        ),
    };
    Totals {
        mod_mults: nonneg(mults),
        mod_adders: nonneg(adders),
        memory_words: nonneg(memory),
        delay_elements: nonneg(delays),
    }
}

pub fn latency_cycles(design: Design, dp: &DesignPoint) -> u64 {
    let (n, log_n) = (dp.n, dp.log_n());
    match design {
        Design::TwoInputX2 => 4 * n + 40 * log_n + 46,
        Design::ThreeInput => 2 * n + 20 * log_n + 32,
    }
}

pub fn latency_ratio(dp: &DesignPoint) -> f64 {
    latency_cycles(Design::ThreeInput, dp) as f64 / latency_cycles(Design::TwoInputX2, dp) as f64
}

/// Area of a delay element: one bit, or a register as wide as a residue word.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum DelayWidth {
    Bit,
    #[default]
    Word,
}

/// XOR-equivalent unit costs. A comparator is taken as `w` full adders.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCostModel<T> {
    pub fa_xor: T,
    pub mux_xor: T,
    pub mem_bit_xor: T,
    pub delay_elem_xor: T,
    pub delay_width: DelayWidth,
}

impl<T: Num + FromPrimitive + Clone> GateCostModel<T> {
    pub fn new(delay_width: DelayWidth) -> Self {
        let int = |x: u64| T::from_u64(x).expect("small integers are representable");
        Self {
            fa_xor: int(9) / int(2),
            mux_xor: int(1),
            mem_bit_xor: int(1),
            delay_elem_xor: int(3),
            delay_width,
        }
    }

    fn int(x: u64) -> T {
        T::from_u64(x).expect("small integers are representable")
    }

    pub fn multiplier_fa(&self, w: u64) -> T {
        Self::int(w * (w - 1))
    }

    pub fn adder_fa(&self, w: u64) -> T {
        Self::int(w)
    }

    pub fn comparator_fa(&self, w: u64) -> T {
        Self::int(w)
    }

    /// Three multipliers, two adders, one comparator, one multiplexer.
    pub fn mod_mult_xor(&self, w: u64) -> T {
        let fa = Self::int(3) * self.multiplier_fa(w) + Self::int(2) * self.adder_fa(w) + self.comparator_fa(w);
        fa * self.fa_xor.clone() + self.mux_xor.clone()
    }

    /// Two adders, one comparator, one multiplexer.
    pub fn mod_adder_xor(&self, w: u64) -> T {
        let fa = Self::int(2) * self.adder_fa(w) + self.comparator_fa(w);
        fa * self.fa_xor.clone() + self.mux_xor.clone()
    }

    pub fn delay_xor(&self, w: u64) -> T {
        match self.delay_width {
            DelayWidth::Bit => self.delay_elem_xor.clone(),
            DelayWidth::Word => self.delay_elem_xor.clone() * Self::int(w),
        }
    }

    /// Area of a set of counts; shared memory appears once in `memory_words`.
    pub fn area(&self, totals: &Totals, w: u64) -> T {
        Self::int(totals.mod_mults) * self.mod_mult_xor(w)
            + Self::int(totals.mod_adders) * self.mod_adder_xor(w)
            + Self::int(totals.memory_words) * Self::int(w) * self.mem_bit_xor.clone()
            + Self::int(totals.delay_elements) * self.delay_xor(w)
    }
}

impl<T: Num + FromPrimitive + Clone> Default for GateCostModel<T> {
    fn default() -> Self {
        Self::new(DelayWidth::default())
    }
}

pub fn area_xor_equivalent<T: Num + FromPrimitive + Clone>(design: Design, dp: &DesignPoint, g: &GateCostModel<T>) -> T {
    g.area(&total_cost(design, dp), dp.w)
}

/// `area(three_input) / area(two_input_x2)`.
pub fn area_ratio<T: Num + FromPrimitive + Clone>(dp: &DesignPoint, g: &GateCostModel<T>) -> T {
    area_xor_equivalent(Design::ThreeInput, dp, g) / area_xor_equivalent(Design::TwoInputX2, dp, g)
}

/// Block instances of one design, counted per limb where a block processes
/// one residue row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Instances {
    pub ntt: u64,
    pub intt: u64,
    pub mod_up: u64,
    pub mod_down: u64,
    /// Rescaling of one polynomial at each level, top level first.
    pub rescale_levels: [u64; 2],
    pub poly_mult2: u64,
    pub poly_mult3: u64,
    /// Products with one `(L + K)`-limb key polynomial.
    pub key_products: u64,
    /// Polynomials added after ModDown.
    pub output_adds: u64,
}

/// One two-input multiplier: four input NTTs, INTT of `d2`, NTT of the `K`
/// new limbs, two key products, their INTTs and ModDowns, INTT of `d0` and
/// `d1`, two output additions, one rescale of two polynomials. The
/// three-input multiplier has six input NTTs, two raises, three key products
/// with two INTT/ModDown pairs, and two successive rescales.
pub fn instances(design: Design, dp: &DesignPoint) -> Instances {
    let (l, k) = (dp.l, dp.k);
    match design {
        Design::TwoInputX2 => Instances {
            ntt: 2 * (4 * l + k),
            intt: 2 * (l + 2 * (l + k) + 2 * l),
            mod_up: 2,
            mod_down: 4,
            rescale_levels: [4, 0],
            poly_mult2: 2,
            poly_mult3: 0,
            key_products: 4,
            output_adds: 4,
        },
        Design::ThreeInput => Instances {
            ntt: 6 * l + 2 * k,
            intt: 2 * l + 2 * (l + k) + 2 * l,
            mod_up: 2,
            mod_down: 2,
            rescale_levels: [2, 2],
            poly_mult2: 0,
            poly_mult3: 1,
            key_products: 3,
            output_adds: 2,
        },
    }
}

/// Totals re-derived by summing building blocks over [`instances`]. Delay
/// elements depend on pipeline balancing not captured by the block list and
/// are left at zero.
pub fn bottom_up(design: Design, dp: &DesignPoint) -> Totals {
    let inst = instances(design, dp);
    let cost = |b| block_cost(b, dp);
    let lower = DesignPoint { l: dp.l.saturating_sub(1).max(1), ..*dp };
    let rescale_lower = block_cost(Block::Rescaling, &lower);
    let mut mults = 0u64;
    let mut adders = 0u64;
    for (count, c) in [
        (inst.ntt, cost(Block::Ntt)),
        (inst.intt, cost(Block::Intt)),
        (inst.mod_up, cost(Block::ModUp)),
        (inst.mod_down, cost(Block::ModDown)),
        (inst.rescale_levels[0], cost(Block::Rescaling)),
        (inst.rescale_levels[1], rescale_lower),
        (inst.poly_mult2, cost(Block::PolyMult2)),
        (inst.poly_mult3, cost(Block::PolyMult3)),
    ] {
        mults += count * c.mod_mults;
        adders += count * c.mod_adders;
    }
    // A 2-parallel pointwise product over L + K limbs; the output addition
    // over L limbs.
    mults += inst.key_products * 2 * (dp.l + dp.k);
    adders += inst.output_adds * 2 * dp.l;
    // Twiddle memories are shared between NTT and INTT of one modulus; the
    // conversion and rescaling constants are stored once.
    let memory = (dp.l + dp.k) * (cost(Block::Ntt).memory_words + cost(Block::Intt).memory_words)
        + cost(Block::ModUp).memory_words
        + cost(Block::ModDown).memory_words
        + cost(Block::Rescaling).memory_words;
    Totals { mod_mults: mults, mod_adders: adders, memory_words: memory, delay_elements: 0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub quantity: &'static str,
    pub table: u64,
    pub derived: u64,
}

impl Discrepancy {
    pub fn difference(&self) -> i64 {
        self.derived as i64 - self.table as i64
    }
}

/// Mismatches between [`total_cost`] and [`bottom_up`], delay elements
/// excluded.
pub fn discrepancies(design: Design, dp: &DesignPoint) -> Vec<Discrepancy> {
    let t = total_cost(design, dp);
    let b = bottom_up(design, dp);
    [
        ("mod_mults", t.mod_mults, b.mod_mults),
        ("mod_adders", t.mod_adders, b.mod_adders),
        ("memory_words", t.memory_words, b.memory_words),
    ]
    .into_iter()
    .filter(|(_, a, b)| a != b)
    .map(|(quantity, table, derived)| Discrepancy { quantity, table, derived })
    .collect()
}

/// Which software call a counter set came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplier {
    Two(Tensor2Mode),
    Three,
    ChainedTwo,
}

/// Polynomial-level operation counts the dataflow predicts for one call.
pub fn expected_counters(m: Multiplier) -> OpCounters {
    let two = |tensor| OpCounters {
        tensor_products: tensor,
        evk_products: 2,
        ntt_calls: 5,
        intt_calls: 5,
        mod_up_calls: 1,
        mod_down_calls: 2,
        rescale_calls: 1,
    };
    match m {
        Multiplier::Two(Tensor2Mode::Direct) => two(4),
        Multiplier::Two(Tensor2Mode::Karatsuba) => two(3),
        Multiplier::ChainedTwo => {
            let one = two(4);
            OpCounters {
                tensor_products: 2 * one.tensor_products,
                evk_products: 2 * one.evk_products,
                ntt_calls: 2 * one.ntt_calls,
                intt_calls: 2 * one.intt_calls,
                mod_up_calls: 2 * one.mod_up_calls,
                mod_down_calls: 2 * one.mod_down_calls,
                rescale_calls: 2 * one.rescale_calls,
            }
        }
        Multiplier::Three => OpCounters {
            tensor_products: 8,
            evk_products: 3,
            ntt_calls: 8,
            intt_calls: 6,
            mod_up_calls: 2,
            mod_down_calls: 2,
            rescale_calls: 2,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    /// `(counter, software, model)`.
    pub rows: Vec<(&'static str, usize, usize)>,
    pub matches: bool,
}

fn counter_rows(c: &OpCounters) -> [(&'static str, usize); 7] {
    [
        ("tensor_products", c.tensor_products),
        ("evk_products", c.evk_products),
        ("ntt_calls", c.ntt_calls),
        ("intt_calls", c.intt_calls),
        ("mod_up_calls", c.mod_up_calls),
        ("mod_down_calls", c.mod_down_calls),
        ("rescale_calls", c.rescale_calls),
    ]
}

/// Compares observed counters with the dataflow's predictions.
pub fn crosscheck_counts(observed: &OpCounters, m: Multiplier) -> CrossCheck {
    let expected = expected_counters(m);
    let rows: Vec<_> = counter_rows(observed)
        .into_iter()
        .zip(counter_rows(&expected))
        .map(|((name, a), (_, b))| (name, a, b))
        .collect();
    CrossCheck { matches: *observed == expected, rows }
}

impl CrossCheck {
    pub fn table(&self) -> String {
        let mut s = format!("{:<18}{:>10}{:>10}\n", "counter", "software", "model");
        for (name, a, b) in &self.rows {
            let _ = writeln!(s, "{name:<18}{a:>10}{b:>10}");
        }
        s
    }
}

/// Everything the report prints, evaluated at one design point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub dp: DesignPoint,
    pub two: Totals,
    pub three: Totals,
    pub two_latency: u64,
    pub three_latency: u64,
    pub latency_ratio: f64,
    pub two_area: f64,
    pub three_area: f64,
    pub area_ratio: f64,
    /// Exact ratio as `numerator/denominator`.
    pub area_ratio_exact: String,
    /// Ratio with one-bit delay elements.
    pub area_ratio_bit_delays: f64,
    pub comparator: String,
    pub discrepancies: Vec<(Design, Discrepancy)>,
}

pub fn report(dp: &DesignPoint) -> Report {
    use num_rational::BigRational;
    let g = GateCostModel::<f64>::default();
    let exact: BigRational = area_ratio(dp, &GateCostModel::<BigRational>::default());
    let discrepancies = [Design::TwoInputX2, Design::ThreeInput]
        .into_iter()
        .flat_map(|d| discrepancies(d, dp).into_iter().map(move |x| (d, x)))
        .collect();
    Report {
        dp: *dp,
        two: total_cost(Design::TwoInputX2, dp),
        three: total_cost(Design::ThreeInput, dp),
        two_latency: latency_cycles(Design::TwoInputX2, dp),
        three_latency: latency_cycles(Design::ThreeInput, dp),
        latency_ratio: latency_ratio(dp),
        two_area: area_xor_equivalent(Design::TwoInputX2, dp, &g),
        three_area: area_xor_equivalent(Design::ThreeInput, dp, &g),
        area_ratio: area_ratio(dp, &g),
        area_ratio_exact: exact.to_string(),
        area_ratio_bit_delays: area_ratio(dp, &GateCostModel::<f64>::new(DelayWidth::Bit)),
        comparator: format!("comparator = w full adders = {} FA", dp.w),
        discrepancies,
    }
}

impl Report {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let dp = &self.dp;
        let _ = writeln!(s, "N={} L={} K={} w={}", dp.n, dp.l, dp.k, dp.w);
        let _ = writeln!(s, "{:<18}{:>16}{:>16}", "", Design::TwoInputX2.name(), Design::ThreeInput.name());
        for (name, a, b) in [
            ("mod_mults", self.two.mod_mults, self.three.mod_mults),
            ("mod_adders", self.two.mod_adders, self.three.mod_adders),
            ("memory_words", self.two.memory_words, self.three.memory_words),
            ("delay_elements", self.two.delay_elements, self.three.delay_elements),
            ("latency_cycles", self.two_latency, self.three_latency),
        ] {
            let _ = writeln!(s, "{name:<18}{a:>16}{b:>16}");
        }
        let _ = writeln!(s, "{:<18}{:>16.0}{:>16.0}", "area_xor", self.two_area, self.three_area);
        let _ = writeln!(s, "latency_ratio {:.6}", self.latency_ratio);
        let _ = writeln!(s, "area_ratio {:.6} ({})", self.area_ratio, self.area_ratio_exact);
        let _ = writeln!(s, "area_ratio_bit_delays {:.6}", self.area_ratio_bit_delays);
        let _ = writeln!(s, "{}; delay element = w-bit register", self.comparator);
        for (d, x) in &self.discrepancies {
            let _ = writeln!(
                s,
                "bottom_up {} {}: table {} derived {} ({:+})",
                d.name(),
                x.quantity,
                x.table,
                x.derived,
                x.difference()
            );
        }
        s
    }

    /// `key=value` lines.
    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let dp = &self.dp;
        for (k, v) in [("n", dp.n), ("l", dp.l), ("k", dp.k), ("w", dp.w)] {
            let _ = writeln!(s, "{k}={v}");
        }
        for (prefix, t, lat) in [
            (Design::TwoInputX2.name(), &self.two, self.two_latency),
            (Design::ThreeInput.name(), &self.three, self.three_latency),
        ] {
            let _ = writeln!(s, "{prefix}.mod_mults={}", t.mod_mults);
            let _ = writeln!(s, "{prefix}.mod_adders={}", t.mod_adders);
            let _ = writeln!(s, "{prefix}.memory_words={}", t.memory_words);
            let _ = writeln!(s, "{prefix}.delay_elements={}", t.delay_elements);
            let _ = writeln!(s, "{prefix}.latency_cycles={lat}");
        }
        let _ = writeln!(s, "{}.area_xor={}", Design::TwoInputX2.name(), self.two_area);
        let _ = writeln!(s, "{}.area_xor={}", Design::ThreeInput.name(), self.three_area);
        let _ = writeln!(s, "latency_ratio={}", self.latency_ratio);
        let _ = writeln!(s, "area_ratio={}", self.area_ratio);
        let _ = writeln!(s, "area_ratio_exact={}", self.area_ratio_exact);
        let _ = writeln!(s, "area_ratio_bit_delays={}", self.area_ratio_bit_delays);
        let _ = writeln!(s, "comparator_fa_per_bit=1");
        let _ = writeln!(s, "delay_width=word");
        for (d, x) in &self.discrepancies {
            let _ = writeln!(s, "bottom_up.{}.{}.table={}", d.name(), x.quantity, x.table);
            let _ = writeln!(s, "bottom_up.{}.{}.derived={}", d.name(), x.quantity, x.derived);
        }
        s
    }
}

/// Latency ratios for `N = 2^lo ..= 2^hi` at fixed `L`, `K`, `w`.
pub fn latency_sweep(base: &DesignPoint, lo: u32, hi: u32) -> Vec<(u64, f64)> {
    (lo..=hi)
        .map(|e| {
            let dp = DesignPoint { n: 1 << e, ..*base };
            (dp.n, latency_ratio(&dp))
        })
        .collect()
}
