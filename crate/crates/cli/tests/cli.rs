//! End-to-end CLI behavior: role wiring, exit codes, tamper flagging, and
//! the image path.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csguard_core::container;
use csguard_core::encoder::{gen_access_password, ApPolicy};
use csguard_core::keys::Key;
use csguard_core::synth;

const BIN: &str = env!("CARGO_BIN_EXE_csguard");

const K1: &str = "000102030405060708090A0B0C0D0E0F";
const K2: &str = "101112131415161718191A1B1C1D1E1F";
const K3: &str = "202122232425262728292A2B2C2D2E2F";

struct Setup {
    dir: tempfile::TempDir,
}

impl Setup {
    fn new() -> Self {
        Setup {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, contents).expect("write fixture");
        p
    }

    fn default_config(&self) -> PathBuf {
        self.write(
            "config.txt",
            "N = 256\nL = 2\nm = 64\nn = 128\nf = 16\ntau = 0.125\nsolver = omp\nK = 8\nseed = 42\n",
        )
    }

    fn full_keys(&self) -> PathBuf {
        self.write("keys.txt", &format!("k1 = {K1}\nk2 = {K2}\nk3 = {K3}\n"))
    }

    /// A length-256 signal that is 8-sparse in the public cosine basis.
    fn sparse_signal(&self) -> PathBuf {
        let basis = csguard_core::UnitaryBasis::dct(256).unwrap();
        let mut stream = csguard_core::BitStream::public(11, b"cli-test");
        let coeffs = synth::sparse_spikes(&mut stream, 256, 8);
        let x = basis.synthesize(&coeffs);
        let text: String = x.iter().map(|v| format!("{v}\n")).collect();
        self.write("signal.txt", &text)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn csguard")
}

fn expect_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn correct_ap() -> String {
    let k3 = Key::from_hex(K3).unwrap();
    gen_access_password(&k3, 256, 128, ApPolicy::Production)
        .unwrap()
        .hex()
        .unwrap()
}

fn sense_reconstruct(setup: &Setup, out_dir: &Path) {
    let config = setup.default_config();
    let keys = setup.full_keys();
    let signal = setup.sparse_signal();
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);
}

#[test]
fn happy_path_recovers_signal() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    sense_reconstruct(&setup, &out_dir);

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "request",
        "--config",
        setup.path("config.txt").to_str().unwrap(),
        "--coeffs",
        out_dir.join("coeffs.cscf").to_str().unwrap(),
        "--ap",
        &correct_ap(),
        "--auth",
        out_dir.join("auth.csab").to_str().unwrap(),
        "--keys",
        setup.path("keys.txt").to_str().unwrap(),
    ]);
    expect_success(&out);

    let report = std::fs::read_to_string(out_dir.join("report.jsonl")).unwrap();
    assert!(report.contains("\"granted\":true"));
    assert!(report.contains("\"ber\":0.0"));
    assert!(report.contains("accepted"));

    let original: Vec<f64> = std::fs::read_to_string(setup.path("signal.txt"))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let recovered: Vec<f64> = std::fs::read_to_string(out_dir.join("recovered.txt"))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(original.len(), recovered.len());
    let num: f64 = original
        .iter()
        .zip(&recovered)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = original.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(num / den < 1e-5, "recovery error {}", num / den);
}

#[test]
fn wrong_password_is_rejected_without_output() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    sense_reconstruct(&setup, &out_dir);

    for bad_ap in ["00000000000000000000000000000000", "not-hex-at-all"] {
        let out = run(&[
            "--out",
            out_dir.to_str().unwrap(),
            "request",
            "--config",
            setup.path("config.txt").to_str().unwrap(),
            "--coeffs",
            out_dir.join("coeffs.cscf").to_str().unwrap(),
            "--ap",
            bad_ap,
            "--auth",
            out_dir.join("auth.csab").to_str().unwrap(),
            "--keys",
            setup.path("keys.txt").to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(3), "bad AP {bad_ap:?}");
        assert!(!out_dir.join("recovered.txt").exists());
        assert!(!out_dir.join("report.jsonl").exists());
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("\"granted\":false"));
    }
}

#[test]
fn polluted_measurements_are_flagged_tampered() {
    // Per-draw BER fluctuates around ~0.2, so this checks the Monte Carlo
    // property over a batch of independently polluted packages.
    let setup = Setup::new();
    let out_dir = setup.path("run");
    let config = setup.default_config();
    let keys = setup.full_keys();
    let batch = 16usize;
    let basis = csguard_core::UnitaryBasis::dct(256).unwrap();
    let mut stream = csguard_core::BitStream::public(23, b"cli-test");
    let mut text = String::new();
    for _ in 0..batch {
        let coeffs = synth::sparse_spikes(&mut stream, 256, 8);
        let x = basis.synthesize(&coeffs);
        for v in &x {
            text.push_str(&format!("{v}\n"));
        }
    }
    let signal = setup.write("signal_batch.txt", &text);
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    // Replace 20% of the measurements with uniform junk at signal scale.
    let mut reader = BufReader::new(File::open(out_dir.join("package.csmp")).unwrap());
    let mut packages = container::read_all_packages(&mut reader).unwrap();
    let mut stream = csguard_core::BitStream::public(99, b"cli-pollute");
    for package in &mut packages {
        let m = package.y.len();
        let scale = package.y.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for pos in synth::random_support(&mut stream, m, m / 5) {
            package.y[pos] = (stream.unit_f64() * 2.0 - 1.0) * scale;
        }
    }
    let mut writer = BufWriter::new(File::create(out_dir.join("package.csmp")).unwrap());
    for package in &packages {
        container::write_package(&mut writer, package).unwrap();
    }
    drop(writer);

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "request",
        "--config",
        config.to_str().unwrap(),
        "--coeffs",
        out_dir.join("coeffs.cscf").to_str().unwrap(),
        "--ap",
        &correct_ap(),
        "--auth",
        out_dir.join("auth.csab").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    // Tampered output is still written and exit stays 0; the report flags it.
    expect_success(&out);
    assert!(out_dir.join("recovered.txt").exists());
    let report = std::fs::read_to_string(out_dir.join("report.jsonl")).unwrap();
    let bers: Vec<f64> = report
        .lines()
        .filter(|l| l.contains("\"ber\""))
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["ber"]
                .as_f64()
                .unwrap()
        })
        .collect();
    assert_eq!(bers.len(), batch);
    let mean = bers.iter().sum::<f64>() / bers.len() as f64;
    assert!(mean > 0.15, "mean polluted BER {mean} over {bers:?}");
    let tampered = report.matches("tampered").count();
    assert!(
        tampered * 2 > batch,
        "only {tampered}/{batch} polluted records flagged"
    );
}

#[test]
fn zero_signal_gives_zero_package_and_coefficients() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    let config = setup.default_config();
    let keys = setup.full_keys();
    let signal = setup.write("zeros.txt", &"0.0\n".repeat(256));
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);
    let mut reader = BufReader::new(File::open(out_dir.join("package.csmp")).unwrap());
    let packages = container::read_all_packages(&mut reader).unwrap();
    assert_eq!(packages.len(), 1);
    assert!(packages[0].y.iter().all(|&v| v == 0.0));

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);
    let mut reader = BufReader::new(File::open(out_dir.join("coeffs.cscf")).unwrap());
    let records = container::read_all_coeff_records(&mut reader).unwrap();
    assert!(records[0].s_hat.iter().all(|&v| v == 0.0));
    assert_eq!(records[0].residual_norm, 0.0);
}

#[test]
fn reconstruct_tolerates_bounded_noise_with_explicit_epsilon() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    // The cloud stops once the residual reaches the configured noise floor.
    let config = setup.write(
        "noisy_config.txt",
        "N = 256\nL = 2\nm = 64\nn = 128\nf = 16\ntau = 0.125\nsolver = omp\nK = 8\nepsilon = 0.2\nseed = 42\n",
    );
    let keys = setup.full_keys();
    let signal = setup.sparse_signal();
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    // 30 dB additive noise on the stored measurements.
    let mut reader = BufReader::new(File::open(out_dir.join("package.csmp")).unwrap());
    let mut packages = container::read_all_packages(&mut reader).unwrap();
    let mut stream = csguard_core::BitStream::public(5, b"cli-noise");
    for package in &mut packages {
        let m = package.y.len() as f64;
        let norm = package.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sigma = norm / m.sqrt() * 10f64.powf(-1.5);
        for v in package.y.iter_mut() {
            *v += sigma * stream.standard_normal();
        }
    }
    let mut writer = BufWriter::new(File::create(out_dir.join("package.csmp")).unwrap());
    for package in &packages {
        container::write_package(&mut writer, package).unwrap();
    }
    drop(writer);

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let diag: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(diag["converged"], true);
    assert!(diag["residual_norm"].as_f64().unwrap() <= 0.2);

    // The recovery is close despite the channel noise.
    let ap = correct_ap();
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "request",
        "--config",
        config.to_str().unwrap(),
        "--coeffs",
        out_dir.join("coeffs.cscf").to_str().unwrap(),
        "--ap",
        &ap,
        "--auth",
        out_dir.join("auth.csab").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);
    let original: Vec<f64> = std::fs::read_to_string(setup.path("signal.txt"))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let recovered: Vec<f64> = std::fs::read_to_string(out_dir.join("recovered.txt"))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let num: f64 = original
        .iter()
        .zip(&recovered)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = original.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(num / den < 0.1, "noisy recovery error {}", num / den);
}

#[test]
fn raw_image_yields_half_as_many_measurements_as_pixels() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    // Column length 64, so N = 64; password shortened under test_mode.
    let config = setup.write(
        "img_config.txt",
        "N = 64\nL = 2\nm = 16\nn = 64\nf = 16\ntau = 0.125\nsolver = omp\nK = 8\nseed = 1\ntest_mode = true\n",
    );
    let keys = setup.full_keys();

    let (w, h) = (64usize, 64usize);
    let bytes: Vec<u8> = (0..w * h)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            (((r as f64 * 0.7).sin() * 60.0 + (c as f64 * 0.3).cos() * 50.0) + 128.0) as u8
        })
        .collect();
    let image = setup.path("image.raw");
    std::fs::write(&image, &bytes).unwrap();

    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        image.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
        "--raw",
        "64x64",
    ]);
    expect_success(&out);

    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(summary["packages"], 64);
    // CR = 0.5: total measurements are half the pixel count.
    assert_eq!(summary["measurements"], (w * h / 2) as u64);

    let mut reader = BufReader::new(File::open(out_dir.join("package.csmp")).unwrap());
    let packages = container::read_all_packages(&mut reader).unwrap();
    assert_eq!(packages.len(), 64);
    let total: usize = packages.iter().map(|p| p.y.len()).sum();
    assert_eq!(total, w * h / 2);

    // Round the image through the cloud and back out as bytes.
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    let k3 = Key::from_hex(K3).unwrap();
    let ap = gen_access_password(&k3, 64, 64, ApPolicy::Test)
        .unwrap()
        .hex()
        .unwrap();
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "request",
        "--config",
        config.to_str().unwrap(),
        "--coeffs",
        out_dir.join("coeffs.cscf").to_str().unwrap(),
        "--ap",
        &ap,
        "--auth",
        out_dir.join("auth.csab").to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
        "--raw",
        "64x64",
        "--signal-out",
        "recovered.raw",
    ]);
    expect_success(&out);
    let recovered = std::fs::read(out_dir.join("recovered.raw")).unwrap();
    assert_eq!(recovered.len(), w * h);
}

#[test]
fn role_isolation_in_key_files() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    sense_reconstruct(&setup, &out_dir);
    let config = setup.path("config.txt");

    // Cloud works with k3 alone.
    let cloud_keys = setup.write("cloud_keys.txt", &format!("k3 = {K3}\n"));
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        cloud_keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    // Cloud fails without k3 even when the SR keys are present.
    let sr_keys = setup.write("sr_keys.txt", &format!("k1 = {K1}\nk2 = {K2}\n"));
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "reconstruct",
        "--config",
        config.to_str().unwrap(),
        "--package",
        out_dir.join("package.csmp").to_str().unwrap(),
        "--keys",
        sr_keys.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing k3"));

    // User works with k1 and k2 alone.
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "request",
        "--config",
        config.to_str().unwrap(),
        "--coeffs",
        out_dir.join("coeffs.cscf").to_str().unwrap(),
        "--ap",
        &correct_ap(),
        "--auth",
        out_dir.join("auth.csab").to_str().unwrap(),
        "--keys",
        sr_keys.to_str().unwrap(),
    ]);
    expect_success(&out);

    // Sensor needs all three.
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        setup.path("signal.txt").to_str().unwrap(),
        "--keys",
        cloud_keys.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn precondition_violations_exit_with_machine_readable_errors() {
    let setup = Setup::new();
    let out_dir = setup.path("run");
    let keys = setup.full_keys();

    // Config violating m < N/L.
    let bad_config = setup.write("bad.txt", "N = 256\nL = 2\nm = 128\n");
    let signal = setup.sparse_signal();
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        bad_config.to_str().unwrap(),
        "--input",
        signal.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let parsed: serde_json::Value =
        serde_json::from_str(stderr.lines().next().unwrap()).expect("stderr is JSON");
    assert!(parsed["error"].is_string());

    // Signal of the wrong length.
    let config = setup.default_config();
    let short = setup.write("short.txt", "1.0 2.0 3.0\n");
    let out = run(&[
        "--out",
        out_dir.to_str().unwrap(),
        "sense",
        "--config",
        config.to_str().unwrap(),
        "--input",
        short.to_str().unwrap(),
        "--keys",
        keys.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
