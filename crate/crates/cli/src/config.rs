//! Run configuration: preset, optional parameter overrides, and run options.
//! Sources in increasing precedence: preset defaults, TOML config file,
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use ckks3_core::params::{Params, Preset};
use ckks3_core::serial::Format;
use serde::Deserialize;

/// `[params]` table of the config file; every field is optional.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub n: Option<usize>,
    pub word_bits: Option<u32>,
    pub levels: Option<usize>,
    pub special: Option<usize>,
    pub log_scale: Option<i32>,
    pub hamming_weight: Option<usize>,
    pub sigma: Option<f64>,
    pub message_bound: Option<f64>,
}

impl ParamOverrides {
    fn merge(&mut self, other: &ParamOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(n, word_bits, levels, special, log_scale, hamming_weight, sigma, message_bound);
    }

    fn touches_moduli(&self) -> bool {
        self.n.is_some() || self.word_bits.is_some() || self.levels.is_some() || self.special.is_some()
    }
}

/// Contents of a config file.
///
/// ```toml
/// preset = "paper30"
/// seed = 7
/// trials = 100
/// out = "results"
/// format = "binary"
///
/// [params]
/// levels = 4
/// ```
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    #[serde(default)]
    pub params: ParamOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Resolved configuration for one command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub preset: Preset,
    pub params: Params,
    pub message_bound: f64,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub format: Format,
}

/// Flag values; `None` means "not given on the command line".
#[derive(Clone, Debug, Default)]
pub struct FlagConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub params: ParamOverrides,
}

impl RunConfig {
    pub fn resolve(file: Option<FileConfig>, flags: FlagConfig) -> Result<Self> {
        let file = file.unwrap_or_default();
        let preset_name = flags.preset.or(file.preset).unwrap_or_else(|| "toy8".into());
        let preset = Preset::from_name(&preset_name)?;
        let mut overrides = file.params.clone();
        overrides.merge(&flags.params);

        let base = preset.params();
        let scale = overrides.log_scale.map_or(base.scale, |e| 2f64.powi(e));
        let hamming_weight = overrides.hamming_weight.unwrap_or(base.hamming_weight);
        let sigma = overrides.sigma.unwrap_or(base.noise_sigma);
        let params = if overrides.touches_moduli() {
            Params::generate(
                overrides.n.unwrap_or(base.n),
                overrides.word_bits.unwrap_or(base.word_bits),
                overrides.levels.unwrap_or(base.l()),
                overrides.special.unwrap_or(base.k()),
                scale,
                hamming_weight,
                sigma,
            )?
        } else {
            let p = Params { scale, hamming_weight, noise_sigma: sigma, ..base };
            p.validate()?;
            p
        };
        let format: Format = flags.format.or(file.format).unwrap_or_else(|| "text".into()).parse()?;
        let message_bound = overrides.message_bound.unwrap_or_else(|| preset.message_bound());
        if !(message_bound.is_finite() && message_bound > 0.0) {
            anyhow::bail!("message bound must be positive, got {message_bound}");
        }
        Ok(Self {
            preset,
            params,
            message_bound,
            seed: flags.seed.or(file.seed).unwrap_or(1),
            trials: flags.trials.or(file.trials).unwrap_or(100),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            format,
        })
    }
}
