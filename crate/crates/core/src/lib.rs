//! Leveled RNS-CKKS with standard two-input and three-input ciphertext
//! multiplication, an empirical noise harness, and a gate-count / latency
//! model of the corresponding hardware multipliers.

pub mod arith;
pub mod cipher;
pub mod encoding;
pub mod hw;
pub mod error;
pub mod keys;
pub mod mult;
pub mod noise;
pub mod ntt;
pub mod params;
pub mod poly;
pub mod rns;
pub mod sampling;
pub mod serial;

pub use error::{Error, Result};

/// XOR-equivalent area model over `f64`.
pub type GateModel = hw::GateCostModel<f64>;
/// XOR-equivalent area model in exact rational arithmetic.
pub type ExactGateModel = hw::GateCostModel<num_rational::BigRational>;
