use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use grassproj::config;
use grassproj::formats::{read_field_dump, write_field_dump};
use grassproj_core::experiments::ExperimentConfig;
use grassproj_core::highlow::{Complex64, GridField};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn grassproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grassproj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_SCAN: &str = r#"
name = "small"
n = 3
k = 2
construction = { kind = "bush", dim_a = 2.0 }
num_v = 6
delta_exponent = 5
experiment = { kind = "marstrand" }
seed = 5
"#;

fn check_manifest(path: &Path) {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = fs::read(o["path"].as_str().unwrap()).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(
            o["sha256"].as_str().unwrap(),
            config::hex(&Sha256::digest(&bytes))
        );
    }
}

#[test]
fn construct_bush_writes_cloud_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bush.json");
    let o = grassproj(&[
        "construct",
        "bush",
        "n=3",
        "--delta",
        "0.03125",
        "--seed",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cloud: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(cloud["points"].as_array().unwrap().len() >= 500);
    check_manifest(&dir.path().join("bush.json.manifest.json"));
}

#[test]
fn construct_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.json");
    let o = grassproj(&[
        "construct",
        "nosuch",
        "--delta",
        "0.1",
        "--seed",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bush"));
    let o = grassproj(&[
        "construct",
        "bush",
        "n=3",
        "bogus=1",
        "--delta",
        "0.1",
        "--seed",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
    let o = grassproj(&[
        "construct",
        "bush",
        "--delta",
        "1.5",
        "--seed",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&grassproj(&["frobnicate"])), 2);
}

#[test]
fn product_with_beta_zero_builds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("prod.json");
    let o = grassproj(&[
        "construct",
        "product",
        "beta=0",
        "--delta",
        "0.0625",
        "--seed",
        "1",
        "-o",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn dim_of(dir: &Path, dim: &str) -> f64 {
    let cloud = dir.join(format!("f{dim}.json"));
    let o = grassproj(&[
        "construct",
        "fractal",
        &format!("dim={dim}"),
        "--delta",
        "0.0009765625",
        "--seed",
        "0",
        "-o",
        p(&cloud),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = grassproj(&["dim", p(&cloud), "--scales", "2:3:9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(cloud.with_extension("ladder.csv").exists());
    let text = String::from_utf8(o.stdout).unwrap();
    text.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn dim_recovers_cantor_and_segment() {
    let dir = TempDir::new().unwrap();
    let cantor = dim_of(dir.path(), "0.6309");
    assert!((cantor - 0.6309).abs() <= 0.05, "cantor {cantor}");
    let segment = dim_of(dir.path(), "1");
    assert!((segment - 1.0).abs() <= 0.1, "segment {segment}");
}

#[test]
fn dim_on_malformed_cloud_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&grassproj(&["dim", p(&bad)])), 2);
    assert_eq!(
        code(&grassproj(&["dim", p(&dir.path().join("missing.json"))])),
        2
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&grassproj(&["scan", p(&missing)])), 2);
    let noseed = dir.path().join("noseed.toml");
    fs::write(&noseed, SMALL_SCAN.replace("seed = 5", "")).unwrap();
    let o = grassproj(&["scan", p(&noseed)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, format!("{SMALL_SCAN}colour = 3\n")).unwrap();
    assert_eq!(code(&grassproj(&["scan", p(&unknown)])), 2);
    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "name = ").unwrap();
    assert_eq!(code(&grassproj(&["incidence", p(&broken)])), 2);
    let invalid = dir.path().join("invalid.toml");
    fs::write(&invalid, SMALL_SCAN.replace("k = 2", "k = 3")).unwrap();
    assert_eq!(code(&grassproj(&["scan", p(&invalid)])), 2);
}

#[test]
fn grid_budget_exits_with_three_before_allocating() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("highlow_bush.toml");
    let o = grassproj(&[
        "highlow",
        p(&cfg),
        "-o",
        p(dir.path()),
        "--max-grid-bytes",
        "1000",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("result.json").exists());
}

#[test]
fn failed_criteria_exit_with_one() {
    // Small mu lets many lines through one plane, breaking the multiplicity cap.
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("incidence_kaufman.toml")).unwrap();
    let cfg = dir.path().join("k.toml");
    fs::write(&cfg, text.replace("mu = 0.5", "mu = 0.05")).unwrap();
    let o = grassproj(&["incidence", p(&cfg), "-o", p(&dir.path().join("out"))]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL max_multiplicity"));
    check_manifest(&dir.path().join("out/manifest.json"));
}

#[test]
fn scan_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL_SCAN).unwrap();
    let mut results = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(run);
        let o = grassproj(&["scan", p(&cfg), "-o", p(&out), "--threads", threads]);
        assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
        check_manifest(&out.join("manifest.json"));
        results.push((
            fs::read(out.join("result.json")).unwrap(),
            fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(results[0], results[1]);
}

#[test]
fn config_hash_ignores_key_order_and_formatting() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    fs::write(&a, SMALL_SCAN).unwrap();
    let mut lines: Vec<&str> = SMALL_SCAN.lines().filter(|l| !l.is_empty()).collect();
    lines.reverse();
    fs::write(&b, format!("# reordered\n{}\n", lines.join("\n\n"))).unwrap();
    let la = config::load::<ExperimentConfig>(&a).unwrap();
    let lb = config::load::<ExperimentConfig>(&b).unwrap();
    assert_eq!(la.hash, lb.hash);
    assert_eq!(la.seed, 5);
    fs::write(&b, SMALL_SCAN.replace("num_v = 6", "num_v = 7")).unwrap();
    assert_ne!(config::load::<ExperimentConfig>(&b).unwrap().hash, la.hash);
}

#[test]
fn field_dump_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut g = GridField::zeros(3, 4, vec![-1.0, -0.5, 0.0, 0.25], 1.5, u64::MAX).unwrap();
    for (i, v) in g.values_mut().iter_mut().enumerate() {
        *v = Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos());
    }
    g.forward().unwrap();
    write_field_dump(dir.path(), "f", &g).unwrap();
    let back = read_field_dump(dir.path(), "f").unwrap();
    assert_eq!(back, g);
    assert_eq!(
        fs::metadata(dir.path().join("f.bin")).unwrap().len(),
        16 * 256
    );
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        assert!(
            config::parse::<toml::Value>(&text).is_ok(),
            "{}",
            path.display()
        );
    }
}
