use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_priorcipher"));
    c.env_remove("PRIORCIPHER_OUT");
    c
}

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.parent().unwrap().join(format!("{cmd}-{}.toml", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&cfg, config).unwrap();
    bin()
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const BPSK: &str = "prior = [0.5, 0.5]\n[states]\nkind = \"psk\"\nm = 2\nmean_photon = 1.0\n";

const ORTHOGONAL_SESSION: &str = r#"
source = [0.5, 0.3, 0.2]
family = [[0.5, 0.3, 0.2]]
slots = 5000
seed = 3
[states]
kind = "orthonormal"
m = 3
[secret_key]
hex = "77"
[physical_key]
hex = "01"
"#;

#[test]
fn solve_bpsk_reports_helstrom_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = run("solve", BPSK, &out, &[]);
    assert!(r.status.success(), "{r:?}");
    let text = std::fs::read_to_string(out.join("solve.json")).unwrap();
    assert!(text.starts_with("{\n  \"schema\": \"priorcipher.solve/1\""));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let want = (1.0 - (1.0 - (-4.0f64).exp()).sqrt()) / 2.0;
    assert!((v["error_probability"].as_f64().unwrap() - want).abs() < 1e-8);
    assert_eq!(v["converged"], true);
}

#[test]
fn solve_orthogonal_is_error_free() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = run("solve", "prior = [0.2, 0.3, 0.5]\n[states]\nkind = \"orthonormal\"\nm = 3\n", &out, &[]);
    assert!(r.status.success());
    assert!(json(out.join("solve.json"))["error_probability"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for bad in ["this is not toml", "[states]\nkind = \"psk\"\nm = 2\n", "bogus = 1\n[states]\nkind = \"orthonormal\"\nm = 2\n"] {
        let r = run("solve", bad, &out, &[]);
        assert_eq!(r.status.code(), Some(2), "{bad}");
        assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
        assert!(!out.join("solve.json").exists());
    }
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ORTHOGONAL_SESSION.replace("seed = 3\n", "");
    assert_eq!(run("simulate", &cfg, &dir.path().join("o"), &[]).status.code(), Some(2));
}

#[test]
fn io_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let r = bin()
        .args(["solve", "--config", dir.path().join("absent.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(4));
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run("solve", BPSK, &blocker, &[]).status.code(), Some(4));
}

#[test]
fn non_convergence_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = format!("max_iter = 0\ntol = 1e-300\n{BPSK}");
    let r = run("solve", &cfg, &out, &[]);
    assert_eq!(r.status.code(), Some(3), "{r:?}");
    assert_eq!(json(out.join("solve.json"))["converged"], false);
}

#[test]
fn minimax_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bpsk");
    assert!(run("minimax", "[states]\nkind = \"psk\"\nm = 2\nmean_photon = 1.0\n", &out, &[]).status.success());
    let v = json(out.join("minimax.json"));
    for w in v["worst_prior"].as_array().unwrap() {
        assert!((w.as_f64().unwrap() - 0.5).abs() < 1e-3);
    }
    let out = dir.path().join("one");
    let r = run("minimax", "[states]\nkind = \"custom\"\namplitudes = [{ re = 0.3, im = 0.1 }]\n", &out, &[]);
    assert!(r.status.success(), "{r:?}");
    assert!(json(out.join("minimax.json"))["value"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn simulate_is_deterministic_and_exact_on_orthogonal_states() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("simulate", ORTHOGONAL_SESSION, &a, &[]).status.success());
    assert!(run("simulate", ORTHOGONAL_SESSION, &b, &["--threads", "2"]).status.success());
    for f in ["simulate.json", "transcript.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let v = json(a.join("simulate.json"));
    assert_eq!(v["bob"]["errors"], 0);
    assert_eq!(v["plaintext_error_rate"], 0.0);
    let tsv = std::fs::read_to_string(a.join("transcript.tsv")).unwrap();
    assert!(tsv.starts_with("# schema: priorcipher.transcript/1\n"));
    assert_eq!(tsv.lines().count(), 5000 + 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ORTHOGONAL_SESSION.replace("[0.5, 0.3, 0.2]]", "[0.5, 0.3, 0.2], [0.2, 0.5, 0.3]]");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("simulate", &cfg, &a, &[]).status.success());
    assert!(run("simulate", &cfg, &b, &["--seed", "4"]).status.success());
    assert_ne!(std::fs::read(a.join("transcript.tsv")).unwrap(), std::fs::read(b.join("transcript.tsv")).unwrap());
    assert_eq!(json(b.join("simulate.json"))["seed"], 4);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, BPSK).unwrap();
    let out = dir.path().join("env-out");
    let r = bin()
        .env("PRIORCIPHER_OUT", &out)
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(r.status.success());
    assert!(out.join("solve.json").exists());
}

#[test]
fn eta_sweep_single_point_and_bpsk_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    let cfg = "kind = \"psk\"\nm = 3\nmean_photons = [1.0]\nbudget = 1\nseed = 1\n";
    assert!(run("eta-sweep", cfg, &out, &[]).status.success());
    let tsv = std::fs::read_to_string(out.join("eta_surface.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);

    let out = dir.path().join("bpsk");
    let cfg = "kind = \"psk\"\nm = 2\nmean_photons = [1.0]\nbudget = 41\nmin_weight = 0.05\nseed = 2\n";
    assert!(run("eta-sweep", cfg, &out, &[]).status.success());
    let best = json(out.join("eta_sweep.json"))["best"]["ratio"].as_f64().unwrap();
    // ratio = P_e(½) / P_e(ξ) with the closed-form Helstrom error
    let pe = |xi: f64| (1.0 - (1.0 - 4.0 * xi * (1.0 - xi) * (-4.0f64).exp()).sqrt()) / 2.0;
    let oracle = (0..=1000)
        .map(|k| 0.05 + 0.9 * k as f64 / 1000.0)
        .map(|xi| pe(0.5) / pe(xi))
        .fold(0.0, f64::max);
    assert!((best - oracle).abs() < 1e-6 * oracle, "{best} vs {oracle}");
}

#[test]
fn attack_identical_states_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = r#"
key_bits = 6
[session]
source = [0.7, 0.3]
family = [[0.7, 0.3]]
slots = 300
seed = 5
[session.states]
kind = "custom"
amplitudes = [{ re = 0.4, im = 0.0 }, { re = 0.4, im = 0.0 }]
[session.secret_key]
hex = "2a"
bits = 6
[session.physical_key]
hex = "10"
"#;
    let r = run("attack", cfg, &out, &[]);
    assert!(r.status.success(), "{r:?}");
    let v = json(out.join("attack.json"));
    assert!((v["guessing_probability"].as_f64().unwrap() - 1.0 / 64.0).abs() < 1e-12);
    assert!((v["entropy_bits"].as_f64().unwrap() - 6.0).abs() < 1e-9);
    let tsv = std::fs::read_to_string(out.join("key_posterior.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 64 + 2);

    let wrong = cfg.replace("\nbits = 6", "\nbits = 7");
    assert_eq!(run("attack", &wrong, &dir.path().join("w"), &[]).status.code(), Some(2));
}
