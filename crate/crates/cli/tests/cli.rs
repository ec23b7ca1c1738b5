use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge")).args(args).env_remove("FORGE_PROFILE").output().unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn tmpdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("forge-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn hn_is_verified_and_leading_term_is_x() {
    let o = forge(&["coleman", "hn", "--n", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["kernel"]["ok"], true);
    assert_eq!(v["h"]["coeffs"][1], serde_json::json!([1]));
    assert_eq!(v["h"]["N"], 24);
}

#[test]
fn output_is_deterministic_and_manifest_digests_match() {
    let d1 = tmpdir("a");
    let d2 = tmpdir("b");
    for d in [&d1, &d2] {
        let o = forge(&["interp", "roundtrip", "--samples", "2", "--seed", "7", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(d1.join("result.json")).unwrap();
    let b = std::fs::read(d2.join("result.json")).unwrap();
    assert_eq!(a, b);
    let m: Value = serde_json::from_slice(&std::fs::read(d1.join("manifest.json")).unwrap()).unwrap();
    use sha2::Digest;
    let want = format!("{:x}", sha2::Sha256::digest(&a));
    assert_eq!(m["outputs"][0]["sha256"], want);
    assert_eq!(m["truncation"]["N"], 24);
    assert_eq!(m["verified"], true);
}

#[test]
fn kernel_membership_decides_exit_code() {
    assert_eq!(forge(&["coleman", "check-kernel", "--poly", "x"]).status.code(), Some(0));
    assert_eq!(forge(&["coleman", "check-kernel", "--poly", "1"]).status.code(), Some(2));
}

#[test]
fn series_input_from_file() {
    let d = tmpdir("series");
    std::fs::create_dir_all(&d).unwrap();
    let p = d.join("g.json");
    std::fs::write(&p, r#"{"coeffs": [[0], [0], [1]]}"#).unwrap();
    let o = forge(&["coleman", "trace", "--input", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["divisible_by_pi"], true);
}

#[test]
fn usage_and_input_errors_exit_4() {
    assert_eq!(forge(&["bogus"]).status.code(), Some(4));
    assert_eq!(forge(&["coleman", "hn"]).status.code(), Some(4));
    assert_eq!(forge(&["--profile", "nope", "coleman", "hn", "--n", "1"]).status.code(), Some(4));
    assert_eq!(forge(&["gm", "inject", "--g", "x^3"]).status.code(), Some(4));
    assert_eq!(forge(&["coleman", "trace", "--input", "/nonexistent.json"]).status.code(), Some(4));
    // The eigenspace needs pi^3 | q.
    assert_eq!(forge(&["eigen", "build"]).status.code(), Some(4));
}

#[test]
fn help_exits_0() {
    let o = forge(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["coleman", "interp", "eigen", "gm", "explicit", "tower", "suite"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn profile_from_env() {
    let o = Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(["coleman", "trace", "--poly", "1", "--N", "8"])
        .env("FORGE_PROFILE", "gm")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    // L(1) = q = 3 with the multiplicative seed.
    assert_eq!(json_out(&o)["trace"]["coeffs"][0], serde_json::json!([3]));
}

#[test]
fn explicit_commands_verify() {
    let g = "-3*x + 3*x^2 + x^3";
    let o = forge(&["explicit", "check-iso-product", "--g", g, "--N", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_out(&o)["product"]["ok"], true);
    assert_eq!(forge(&["explicit", "torsion-product", "--g", g, "--r", "x^2", "--N", "10"]).status.code(), Some(0));
    assert_eq!(forge(&["explicit", "idempotents", "--p", "5", "--M", "20"]).status.code(), Some(0));
    assert_eq!(forge(&["gm", "inject", "--g", g]).status.code(), Some(0));
}

#[test]
fn config_file_overrides_profile() {
    let d = tmpdir("cfg");
    std::fs::create_dir_all(&d).unwrap();
    let p = d.join("profile.json");
    let cfg = r#"{"name":"custom","config":{"p":3,"f_K":1,"m":[0,1],"pi_unit":-1,"M":30},"seed":"-3*x + x^3","N":12,"nf":30}"#;
    std::fs::write(&p, cfg).unwrap();
    let o = forge(&["--config", p.to_str().unwrap(), "coleman", "hn", "--n", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_out(&o)["h"]["N"], 12);
}
