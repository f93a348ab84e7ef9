//! csguard: three-role pipeline driver (sense / reconstruct / request) and
//! the security-evaluation subcommands.
//!
//! Exit codes: 0 success (a tampered verdict still exits 0; the report
//! carries it), 2 any precondition or parse failure, 3 access rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array1;

use csguard_core::config::{KeyFile, PipelineConfig};
use csguard_core::container::{self, CoeffRecord};
use csguard_core::decoder::{self, AccessDecision, AccessReason};
use csguard_core::encoder::{gen_access_password, gen_mac, AuthBundle, Encoder, EncoderConfig};
use csguard_core::eval;
use csguard_core::keymat::{
    build_mac_matrix, build_sensing_matrix, UnitaryBasis, DEFAULT_MAC_SEED,
};
use csguard_core::solver::{solve, SsrTask};

const EXIT_ERROR: u8 = 2;
const EXIT_ACCESS_REJECTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "csguard",
    version,
    about = "Keyed compressed-sensing acquisition with outsourced reconstruction"
)]
struct Cli {
    /// Master seed override for the evaluation subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for generated artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline config file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sensor role: sample, compress, encrypt, and tag a signal.
    Sense {
        #[command(flatten)]
        config: ConfigArg,
        /// Input signal: whitespace-separated floats, or raw bytes with --raw.
        #[arg(long)]
        input: PathBuf,
        /// Keys file providing k1, k2, k3.
        #[arg(long)]
        keys: PathBuf,
        /// Treat the input as a WxH raw 8-bit grayscale image, encoded
        /// column by column (column length must equal N).
        #[arg(long, value_parser = parse_raw_dims)]
        raw: Option<(usize, usize)>,
        /// Measurement package output name.
        #[arg(long, default_value = "package.csmp")]
        package_out: String,
        /// Auth bundle output name.
        #[arg(long, default_value = "auth.csab")]
        auth_out: String,
    },
    /// Cloud role: reconstruct coefficients from a package stream.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArg,
        /// Measurement package file (one or more records).
        #[arg(long)]
        package: PathBuf,
        /// Keys file; only k3 is read.
        #[arg(long)]
        keys: PathBuf,
        /// Coefficients output name.
        #[arg(long, default_value = "coeffs.cscf")]
        coeff_out: String,
    },
    /// User role: submit a password, verify integrity, recover the signal.
    Request {
        #[command(flatten)]
        config: ConfigArg,
        /// Coefficients file produced by `reconstruct`.
        #[arg(long)]
        coeffs: PathBuf,
        /// Submitted access password, hex.
        #[arg(long)]
        ap: String,
        /// Auth bundle file from the sensor's side channel.
        #[arg(long)]
        auth: PathBuf,
        /// Keys file; only k1 and k2 are read.
        #[arg(long)]
        keys: PathBuf,
        /// Reassemble the recovery as a WxH raw 8-bit grayscale image.
        #[arg(long, value_parser = parse_raw_dims)]
        raw: Option<(usize, usize)>,
        /// Recovered signal output name (text floats, or bytes with --raw).
        #[arg(long, default_value = "recovered.txt")]
        signal_out: String,
        /// Report output name (JSON lines).
        #[arg(long, default_value = "report.jsonl")]
        report_out: String,
    },
    /// BER-versus-CR channel experiment.
    EvalBer {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        /// Comma-separated block lengths; CR = 1/L.
        #[arg(long, default_value = "2,4,8", value_parser = parse_l_list)]
        l_list: std::vec::Vec<usize>,
    },
    /// Access-password sensitivity experiment.
    EvalAp {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 1000)]
        trials: u32,
    },
    /// Brute-force key-space accounting.
    EvalKeyspace {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Plaintext/ciphertext energy-correlation experiment.
    EvalEnergy {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 200)]
        trials: u32,
    },
    /// Known-plaintext attack simulation.
    EvalAttack {
        #[command(flatten)]
        config: ConfigArg,
        /// Plaintext/ciphertext pairs to capture; must be >= N.
        #[arg(long)]
        pairs: Option<usize>,
    },
}

fn parse_raw_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| "expected WxH, e.g. 64x64".to_string())?;
    let w = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("image dimensions must be positive".into());
    }
    Ok((w, h))
}

fn parse_l_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad block length {part:?}"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let msg = serde_json::json!({ "error": format!("{err:#}") });
            eprintln!("{msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;

    match cli.command {
        Command::Sense {
            config,
            input,
            keys,
            raw,
            package_out,
            auth_out,
        } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_sense(&cfg, &input, &keys, raw, &cli.out, &package_out, &auth_out)
        }
        Command::Reconstruct {
            config,
            package,
            keys,
            coeff_out,
        } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_reconstruct(&cfg, &package, &keys, &cli.out, &coeff_out)
        }
        Command::Request {
            config,
            coeffs,
            ap,
            auth,
            keys,
            raw,
            signal_out,
            report_out,
        } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_request(
                &cfg,
                &coeffs,
                &ap,
                &auth,
                &keys,
                raw,
                &cli.out,
                &signal_out,
                &report_out,
            )
        }
        Command::EvalBer {
            config,
            trials,
            l_list,
        } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_eval_ber(&cfg, trials, &l_list, &cli.out)
        }
        Command::EvalAp { config, trials } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_eval_ap(&cfg, trials, &cli.out)
        }
        Command::EvalKeyspace { config } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_eval_keyspace(&cfg, &cli.out)
        }
        Command::EvalEnergy { config, trials } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_eval_energy(&cfg, trials, &cli.out)
        }
        Command::EvalAttack { config, pairs } => {
            let cfg = load_config(&config.config, cli.seed)?;
            cmd_eval_attack(&cfg, pairs, &cli.out)
        }
    }
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg =
        PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_keys(path: &Path) -> Result<KeyFile> {
    KeyFile::load(path).with_context(|| format!("loading keys {}", path.display()))
}

fn read_text_signal(path: &Path, dim: usize) -> Result<Vec<Array1<f64>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading signal {}", path.display()))?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| anyhow!("bad sample {tok:?} in {}", path.display()))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() || !values.len().is_multiple_of(dim) {
        bail!(
            "signal length {} is not a positive multiple of N = {dim}",
            values.len()
        );
    }
    Ok(values
        .chunks(dim)
        .map(|chunk| Array1::from_vec(chunk.to_vec()))
        .collect())
}

/// Raw grayscale image, vectorized column by column. Column length (the
/// image height) must equal N.
fn read_raw_signal(
    path: &Path,
    width: usize,
    height: usize,
    dim: usize,
) -> Result<Vec<Array1<f64>>> {
    if height != dim {
        bail!("raw image height {height} must equal N = {dim}");
    }
    let bytes = std::fs::read(path).with_context(|| format!("reading image {}", path.display()))?;
    if bytes.len() != width * height {
        bail!(
            "raw image size {} does not match {width}x{height}",
            bytes.len()
        );
    }
    Ok((0..width)
        .map(|c| Array1::from_shape_fn(height, |r| bytes[r * width + c] as f64))
        .collect())
}

fn cmd_sense(
    cfg: &PipelineConfig,
    input: &Path,
    keys_path: &Path,
    raw: Option<(usize, usize)>,
    out: &Path,
    package_out: &str,
    auth_out: &str,
) -> Result<ExitCode> {
    let keys = load_keys(keys_path)?.require_all()?;
    let signals = match raw {
        Some((w, h)) => read_raw_signal(input, w, h, cfg.dim)?,
        None => read_text_signal(input, cfg.dim)?,
    };

    let basis = UnitaryBasis::dct(cfg.dim)?;
    let encoder = Encoder::new(
        &keys,
        EncoderConfig {
            dim: cfg.dim,
            block_len: cfg.block_len,
            mac_rows: cfg.mac_bits,
            scale_levels: cfg.scale_levels,
        },
        basis,
    )?;
    let ap = gen_access_password(&keys.k3, cfg.dim, cfg.ap_bits, cfg.ap_policy())?;
    let ap_hex = ap.hex()?;

    let mut package_file = BufWriter::new(File::create(out.join(package_out))?);
    let mut auth_file = BufWriter::new(File::create(out.join(auth_out))?);
    let mut total_measurements = 0usize;

    for (index, x) in signals.iter().enumerate() {
        let (package, y_mac) = encoder.acquire_indexed(x, index as u64)?;
        let mac = gen_mac(&y_mac)?;
        total_measurements += package.y.len();
        let bundle = AuthBundle {
            ap: ap.clone(),
            mac,
            package_id: package.package_id,
        };
        container::write_package(&mut package_file, &package)?;
        container::write_auth_bundle(&mut auth_file, &bundle)?;
    }
    package_file.flush()?;
    auth_file.flush()?;

    println!(
        "{}",
        serde_json::json!({
            "packages": signals.len(),
            "measurements": total_measurements,
            "ap_hex": ap_hex,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_reconstruct(
    cfg: &PipelineConfig,
    package_path: &Path,
    keys_path: &Path,
    out: &Path,
    coeff_out: &str,
) -> Result<ExitCode> {
    let k3 = load_keys(keys_path)?.require_k3()?;
    let mut reader = BufReader::new(File::open(package_path)?);
    let packages = container::read_all_packages(&mut reader)?;

    let dim = packages[0].dim;
    let block_len = packages[0].block_len;
    if dim != cfg.dim || block_len != cfg.block_len {
        bail!(
            "package dims N={dim} L={block_len} disagree with config N={} L={}",
            cfg.dim,
            cfg.block_len
        );
    }
    let basis = UnitaryBasis::dct(dim)?;
    let sensing = build_sensing_matrix(&k3, &basis, block_len)?;
    let cloud_ap = gen_access_password(&k3, dim, cfg.ap_bits, cfg.ap_policy())?;

    let mut coeff_file = BufWriter::new(File::create(out.join(coeff_out))?);
    for package in &packages {
        if package.dim != dim || package.block_len != block_len {
            bail!("mixed dimensions within one package stream");
        }
        let task = SsrTask::new(sensing.matrix().clone(), package.y.clone())?;
        let result = solve(&task, &cfg.solver_config())?;
        println!(
            "{}",
            serde_json::json!({
                "package_id": package.package_id,
                "iterations": result.iterations,
                "residual_norm": result.residual_norm,
                "converged": result.converged,
            })
        );
        let record = CoeffRecord {
            package_id: package.package_id,
            dim,
            cloud_ap: cloud_ap.clone(),
            solver_mode: cfg.solver.tag(),
            converged: result.converged,
            iterations: result.iterations as u32,
            residual_norm: result.residual_norm,
            s_hat: result.s_hat,
        };
        container::write_coeff_record(&mut coeff_file, &record)?;
    }
    coeff_file.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_request(
    cfg: &PipelineConfig,
    coeffs_path: &Path,
    submitted_ap: &str,
    auth_path: &Path,
    keys_path: &Path,
    raw: Option<(usize, usize)>,
    out: &Path,
    signal_out: &str,
    report_out: &str,
) -> Result<ExitCode> {
    let key_file = load_keys(keys_path)?;
    let k1 = key_file.require_k1()?;
    let k2 = key_file.require_k2()?;

    let mut reader = BufReader::new(File::open(coeffs_path)?);
    let records = container::read_all_coeff_records(&mut reader)?;
    let mut reader = BufReader::new(File::open(auth_path)?);
    let bundles = container::read_all_auth_bundles(&mut reader)?;

    // Cloud gate: the submitted password against the cloud's regenerated
    // copy carried in the coefficient records.
    let submitted = container::bits_from_hex(submitted_ap.trim(), cfg.ap_bits);
    let decision = match submitted {
        Err(_) => AccessDecision {
            granted: false,
            reason: AccessReason::Malformed,
        },
        Ok(bits) => {
            let matches = records.iter().all(|r| r.cloud_ap.bits() == bits.as_slice());
            if matches {
                AccessDecision {
                    granted: true,
                    reason: AccessReason::Match,
                }
            } else {
                AccessDecision {
                    granted: false,
                    reason: AccessReason::Mismatch,
                }
            }
        }
    };
    println!("{}", decision.to_json_line());
    if !decision.granted {
        // No coefficients are released.
        return Ok(ExitCode::from(EXIT_ACCESS_REJECTED));
    }

    let dim = records[0].dim;
    if dim != cfg.dim {
        bail!(
            "coefficient dim {dim} disagrees with config N = {}",
            cfg.dim
        );
    }
    let basis = UnitaryBasis::dct(dim)?;
    let mac_matrix = build_mac_matrix(&basis, cfg.mac_bits, cfg.measurements(), DEFAULT_MAC_SEED)?;

    let mut report_file = BufWriter::new(File::create(out.join(report_out))?);
    writeln!(report_file, "{}", decision.to_json_line())?;

    let mut samples: Vec<f64> = Vec::with_capacity(records.len() * dim);
    let mut tampered = 0usize;
    for record in &records {
        let bundle = bundles
            .iter()
            .find(|b| b.package_id == record.package_id)
            .ok_or_else(|| anyhow!("no auth bundle for package {:#x}", record.package_id))?;
        let report = decoder::verify_integrity(&record.s_hat, &bundle.mac, &mac_matrix, cfg.tau)?;
        if report.verdict == decoder::Verdict::Tampered {
            tampered += 1;
        }
        let line = serde_json::json!({
            "package_id": record.package_id,
            "ber": report.ber,
            "verdict": report.verdict,
            "tau": report.tau,
        });
        writeln!(report_file, "{line}")?;
        println!("{line}");

        let x_prime = decoder::recover(&record.s_hat, &k1, &k2, basis.clone(), cfg.scale_levels)?;
        samples.extend(x_prime.iter());
    }
    report_file.flush()?;

    // Recovery output is written even under a tampered verdict; the report
    // carries the flag.
    match raw {
        Some((w, h)) => {
            if samples.len() != w * h {
                bail!("{} recovered samples do not fill {w}x{h}", samples.len());
            }
            let mut bytes = vec![0u8; w * h];
            for (c, column) in samples.chunks(h).enumerate() {
                for (r, v) in column.iter().enumerate() {
                    bytes[r * w + c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            std::fs::write(out.join(signal_out), bytes)?;
        }
        None => {
            let mut f = BufWriter::new(File::create(out.join(signal_out))?);
            for v in &samples {
                writeln!(f, "{v}")?;
            }
            f.flush()?;
        }
    }

    println!(
        "{}",
        serde_json::json!({ "records": records.len(), "tampered": tampered })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_ber(
    cfg: &PipelineConfig,
    trials: u32,
    l_list: &[usize],
    out: &Path,
) -> Result<ExitCode> {
    let records = eval::eval_ber_curve(cfg, &eval::Scenario::ALL, l_list, trials, cfg.seed)?;

    let mut f = BufWriter::new(File::create(out.join("ber_records.csv"))?);
    eval::write_ber_csv(&records, &mut f)?;
    f.flush()?;

    let summaries = eval::summarize_ber(&records);
    let mut f = BufWriter::new(File::create(out.join("ber_summary.csv"))?);
    eval::write_ber_summary_csv(&summaries, &mut f)?;
    f.flush()?;

    for s in &summaries {
        println!(
            "{}",
            serde_json::json!({
                "scenario": s.scenario.tag(),
                "cr": s.cr,
                "trials": s.trials,
                "mean_ber": s.mean_ber,
                "std_ber": s.std_ber,
            })
        );
    }
    // Timing is informational only; it goes to stderr so files and stdout
    // stay reproducible.
    let total_ms: f64 = records.iter().map(|r| r.runtime_ms).sum();
    eprintln!("eval-ber: {} trials in {total_ms:.1} ms", records.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_ap(cfg: &PipelineConfig, trials: u32, out: &Path) -> Result<ExitCode> {
    let rows = eval::eval_ap_sensitivity(cfg, trials, cfg.seed)?;
    let mut f = BufWriter::new(File::create(out.join("ap_sensitivity.csv"))?);
    eval::write_ap_csv(&rows, &mut f)?;
    f.flush()?;
    for r in &rows {
        println!(
            "{}",
            serde_json::json!({
                "manipulation": r.manipulation.tag(),
                "trials": r.trials,
                "mean_change_rate": r.mean_change_rate,
                "theoretical": r.theoretical,
            })
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_keyspace(cfg: &PipelineConfig, out: &Path) -> Result<ExitCode> {
    let report = eval::eval_keyspace(cfg.dim, cfg.scale_levels);
    let rendered = report.render();
    std::fs::write(out.join("keyspace.txt"), &rendered)?;
    print!("{rendered}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_energy(cfg: &PipelineConfig, trials: u32, out: &Path) -> Result<ExitCode> {
    let report = eval::eval_energy_leak(cfg, trials, cfg.seed)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out.join("energy_leak.json"), format!("{json}\n"))?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_attack(cfg: &PipelineConfig, pairs: Option<usize>, out: &Path) -> Result<ExitCode> {
    let pairs = pairs.unwrap_or(cfg.dim);
    let report = eval::eval_plaintext_attack(cfg, pairs, cfg.seed)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out.join("attack_report.json"), format!("{json}\n"))?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(ExitCode::SUCCESS)
}
