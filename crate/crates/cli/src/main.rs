mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ckks3_core::cipher::{decrypt, encrypt, Ciphertext};
use ckks3_core::encoding::{decode, encode};
use ckks3_core::hw::{self, DesignPoint};
use ckks3_core::keys::{key_residuals, keygen, EvalKey, PublicKey, SecretKey};
use ckks3_core::mult::{multiply2, multiply3};
use ckks3_core::noise::{compare_paths, NoiseConfig};
use ckks3_core::params::Context;
use ckks3_core::serial::{decode_document, encode_document, Document};

use config::{FileConfig, FlagConfig, ParamOverrides, RunConfig};

/// Exit status when a reproduction check fails.
const ASSERTION_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ckks3", version, about = "RNS-CKKS with three-input ciphertext multiplication")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named parameter set: toy8 or paper30.
    #[arg(long, global = true)]
    params_preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// File layout for written keys and ciphertexts: text or binary.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Ring degree override.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Residue word width override.
    #[arg(long, global = true)]
    word_bits: Option<u32>,
    /// Number of Q limbs override.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Number of P limbs override.
    #[arg(long, global = true)]
    special: Option<usize>,
    /// log2 of the encoding scale.
    #[arg(long, global = true)]
    log_scale: Option<i32>,
    #[arg(long, global = true)]
    hamming_weight: Option<usize>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Bound on |z| for sampled messages.
    #[arg(long, global = true)]
    message_bound: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate sk, pk, evk (s²) and evk3 (s³) into the output directory.
    Keygen {
        /// Number of rescalings the keys must support.
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Encrypt a real vector under a public key.
    Encrypt {
        #[arg(long)]
        pk: PathBuf,
        /// Comma-separated reals, zero-padded to N.
        #[arg(long, conflicts_with = "random")]
        values: Option<String>,
        /// Sample a vector uniformly within the message bound.
        #[arg(long)]
        random: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decrypt and decode a ciphertext, one value per line.
    Decrypt {
        #[arg(long)]
        sk: PathBuf,
        #[arg(long)]
        ct: PathBuf,
        /// Print only the first COUNT values.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Two-input multiplication with one rescale.
    Mul2 {
        #[arg(long)]
        evk: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Drop limbs of the higher-level operand to match the other.
        #[arg(long)]
        align: bool,
    },
    /// Three-input multiplication with two rescales.
    Mul3 {
        #[arg(long)]
        evk: PathBuf,
        #[arg(long)]
        evk3: Option<PathBuf>,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        c: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare the three-input product with two chained two-input products.
    NoiseBench {
        /// Confidence margin for the total-error ordering, in standard errors.
        #[arg(long, default_value_t = 3.0)]
        margin: f64,
    },
    /// Hardware cost comparison at one design point.
    HwReport {
        #[arg(long = "hw-n", default_value_t = 1 << 12)]
        hw_n: u64,
        #[arg(long = "hw-l", default_value_t = 3)]
        hw_l: u64,
        #[arg(long = "hw-k", default_value_t = 3)]
        hw_k: u64,
        #[arg(long = "hw-w", default_value_t = 30)]
        hw_w: u64,
        /// Also print latency ratios for N = 2^10 ..= 2^14.
        #[arg(long)]
        sweep: bool,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let file = common.config.as_deref().map(FileConfig::load).transpose()?;
    let flags = FlagConfig {
        preset: common.params_preset.clone(),
        seed: common.seed,
        trials: common.trials,
        out: common.out.clone(),
        format: common.format.clone(),
        params: ParamOverrides {
            n: common.n,
            word_bits: common.word_bits,
            levels: common.levels,
            special: common.special,
            log_scale: common.log_scale,
            hamming_weight: common.hamming_weight,
            sigma: common.sigma,
            message_bound: common.message_bound,
        },
    };
    RunConfig::resolve(file, flags)
}

fn read_doc(path: &Path) -> Result<Document> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_document(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load<T>(path: &Path, ctx: &Context, f: impl Fn(&Document, &Context) -> ckks3_core::Result<T>) -> Result<T> {
    f(&read_doc(path)?, ctx).with_context(|| format!("loading {}", path.display()))
}

/// Writes every file under a temporary name first, then renames them, so an
/// error leaves no partial outputs behind.
fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let partial = |p: &Path| {
        let mut name = p.as_os_str().to_owned();
        name.push(".partial");
        PathBuf::from(name)
    };
    let result = (|| -> Result<()> {
        for (path, bytes) in files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(partial(path), bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        for (path, _) in files {
            fs::rename(partial(path), path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for (path, _) in files {
            let _ = fs::remove_file(partial(path));
        }
    }
    result
}

fn cmd_keygen(cfg: &RunConfig, depth: usize) -> Result<()> {
    cfg.params.require_depth(depth)?;
    let ctx = Context::new(cfg.params.clone())?;
    let keys = keygen(&ctx, cfg.seed)?;
    let res = key_residuals(&keys, &ctx)?;
    let enc = |doc: Document| encode_document(&doc, cfg.format);
    let files = vec![
        (cfg.out.join("sk.key"), enc(Document::from_secret_key(&keys.secret, &ctx)?)),
        (cfg.out.join("pk.key"), enc(Document::from_public_key(&keys.public, ctx.params()))),
        (cfg.out.join("evk.key"), enc(Document::from_eval_key(&keys.evk, ctx.params()))),
        (cfg.out.join("evk3.key"), enc(Document::from_eval_key(&keys.evk_cubed, ctx.params()))),
    ];
    write_all(&files)?;
    println!("preset {} N={} L={} K={}", cfg.preset.name(), cfg.params.n, cfg.params.l(), cfg.params.k());
    println!("residual public {}", res.public);
    println!("residual evk {}", res.evk);
    println!("residual evk3 {}", res.evk_cubed);
    println!("six_sigma {}", 6.0 * cfg.params.noise_sigma);
    for (path, _) in &files {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_values(text: &str, n: usize) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad value `{s}`")))
        .collect::<Result<_>>()?;
    if values.len() > n {
        bail!("{} values for N = {n}", values.len());
    }
    values.resize(n, 0.0);
    Ok(values)
}

fn cmd_encrypt(cfg: &RunConfig, pk: &Path, values: Option<&str>, random: bool, output: &Path) -> Result<()> {
    let ctx = Context::new(cfg.params.clone())?;
    let pk: PublicKey = load(pk, &ctx, Document::to_public_key)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let n = cfg.params.n;
    let z = match (values, random) {
        (Some(v), _) => parse_values(v, n)?,
        (None, true) => (0..n).map(|_| rng.gen_range(-cfg.message_bound..=cfg.message_bound)).collect(),
        (None, false) => bail!("give --values or --random"),
    };
    let m = encode(&z, cfg.params.scale, cfg.params.word_bits)?;
    let ct = encrypt(&m, &pk, &ctx, &mut rng)?;
    write_ciphertext(cfg, &ct, output)
}

fn write_ciphertext(cfg: &RunConfig, ct: &Ciphertext, output: &Path) -> Result<()> {
    write_all(&[(output.to_path_buf(), encode_document(&Document::from_ciphertext(ct, &cfg.params), cfg.format))])?;
    println!("level {} scale {}", ct.level(), ct.scale());
    println!("wrote {}", output.display());
    Ok(())
}

fn cmd_decrypt(cfg: &RunConfig, sk: &Path, ct: &Path, count: Option<usize>) -> Result<()> {
    let ctx = Context::new(cfg.params.clone())?;
    let sk: SecretKey = load(sk, &ctx, Document::to_secret_key)?;
    let ct: Ciphertext = load(ct, &ctx, Document::to_ciphertext)?;
    let z: Vec<f64> = decode(&decrypt(&ct, &sk, &ctx)?);
    for v in z.iter().take(count.unwrap_or(z.len())) {
        println!("{v}");
    }
    Ok(())
}

fn cmd_mul2(cfg: &RunConfig, evk: &Path, a: &Path, b: &Path, output: &Path, align: bool) -> Result<()> {
    let ctx = Context::new(cfg.params.clone())?;
    let evk: EvalKey = load(evk, &ctx, Document::to_eval_key)?;
    let mut a: Ciphertext = load(a, &ctx, Document::to_ciphertext)?;
    let mut b: Ciphertext = load(b, &ctx, Document::to_ciphertext)?;
    if align {
        let level = a.level().min(b.level());
        a = a.drop_to_level(level)?;
        b = b.drop_to_level(level)?;
    }
    let out = multiply2(&a, &b, &evk, &ctx)?;
    write_ciphertext(cfg, &out, output)
}

fn cmd_mul3(cfg: &RunConfig, evk: &Path, evk3: Option<&Path>, inputs: [&Path; 3], output: &Path) -> Result<()> {
    let Some(evk3) = evk3 else {
        bail!("mul3 needs the s³ evaluation key (--evk3)");
    };
    let ctx = Context::new(cfg.params.clone())?;
    let evk: EvalKey = load(evk, &ctx, Document::to_eval_key)?;
    let evk3: EvalKey = load(evk3, &ctx, Document::to_eval_key)?;
    let [a, b, c] = inputs.map(|p| load(p, &ctx, Document::to_ciphertext));
    let out = multiply3(&a?, &b?, &c?, &evk, &evk3, &ctx)?;
    write_ciphertext(cfg, &out, output)
}

fn cmd_noise_bench(cfg: &RunConfig, margin: f64) -> Result<bool> {
    if cfg.trials == 0 {
        bail!("trials must be at least 1");
    }
    let noise_cfg = NoiseConfig { trials: cfg.trials, seed: cfg.seed, message_bound: cfg.message_bound };
    let cmp = compare_paths(&cfg.params, &noise_cfg)?;
    let table = cmp.table();
    let mut records = Vec::new();
    cmp.write_records(&mut records)?;
    write_all(&[(cfg.out.join("noise_table.txt"), table.clone().into_bytes()), (cfg.out.join("noise_records.jsonl"), records)])?;
    print!("{table}");
    if cmp.trials() < 2 {
        println!("single trial: no aggregate check");
        return Ok(true);
    }
    let total = cmp.ordering(margin);
    let mult = cmp.mult_ordering(0.0);
    let ok = total.holds && mult.holds && cmp.bound_violations() == 0;
    println!(
        "ordering total mean_ratio {:.6} max_ratio {:.6} margin {margin} -> {}",
        total.mean_ratio,
        total.max_ratio,
        if total.holds { "holds" } else { "violated" }
    );
    println!(
        "ordering mult mean_ratio {:.6} max_ratio {:.6} -> {}",
        mult.mean_ratio,
        mult.max_ratio,
        if mult.holds { "holds" } else { "violated" }
    );
    Ok(ok)
}

fn cmd_hw_report(cfg: &RunConfig, dp: DesignPoint, sweep: bool) -> Result<bool> {
    let report = hw::report(&dp);
    let mut kv = report.key_values();
    print!("{}", report.table());
    if sweep {
        println!("latency sweep");
        for (n, r) in hw::latency_sweep(&dp, 10, 14) {
            println!("sweep N={n:<8} latency_ratio {r:.6}");
            kv.push_str(&format!("sweep.{n}.latency_ratio={r}\n"));
        }
    }
    write_all(&[(cfg.out.join("hw_report.txt"), kv.into_bytes())])?;
    if dp == DesignPoint::default() {
        let latency_ok = (report.latency_ratio - 0.5006).abs() <= 1e-4;
        let area_ok = (0.66..=0.76).contains(&report.area_ratio);
        return Ok(latency_ok && area_ok);
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Keygen { depth } => cmd_keygen(&cfg, depth).map(|_| true),
        Command::Encrypt { pk, values, random, output } => {
            cmd_encrypt(&cfg, &pk, values.as_deref(), random, &output).map(|_| true)
        }
        Command::Decrypt { sk, ct, count } => cmd_decrypt(&cfg, &sk, &ct, count).map(|_| true),
        Command::Mul2 { evk, a, b, output, align } => cmd_mul2(&cfg, &evk, &a, &b, &output, align).map(|_| true),
        Command::Mul3 { evk, evk3, a, b, c, output } => {
            cmd_mul3(&cfg, &evk, evk3.as_deref(), [&a, &b, &c], &output).map(|_| true)
        }
        Command::NoiseBench { margin } => cmd_noise_bench(&cfg, margin),
        Command::HwReport { hw_n, hw_l, hw_k, hw_w, sweep } => {
            cmd_hw_report(&cfg, DesignPoint::new(hw_n, hw_l, hw_k, hw_w)?, sweep)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("reproduction check failed");
            ExitCode::from(ASSERTION_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
