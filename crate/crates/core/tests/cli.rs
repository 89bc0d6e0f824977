use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn gexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gexp")).args(args).env_remove("GEXP_SEED").output().expect("spawn gexp")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

#[test]
fn pbar_methods_agree_on_the_classical_case() {
    let out = gexp(&[
        "pbar", "--kind", "qv", "--drift", "zero", "--band", "1,1", "--payoff", "sigmoid", "--T", "1", "--x", "0",
        "--method", "both",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["version"], gexp::VERSION);
    let pde = v["result"]["pde"].as_f64().unwrap();
    let mc = v["result"]["mc"]["value"].as_f64().unwrap();
    assert!((pde - 0.5).abs() < 1e-6);
    assert!((mc - pde).abs() < 0.01);
    assert_eq!(v["result"]["cross_check"]["pass"], true);
}

#[test]
fn harnack_certificate_for_ou_passes() {
    let out = gexp(&["harnack", "--drift", "ou", "--band", "0.5,1", "--payoff", "lorentz", "--x", "0", "--y", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["result"]["items"][0]["pass"], true);
    assert_eq!(v["config"]["harnack"]["K"], 1.0);
}

#[test]
fn failed_check_still_writes_the_report() {
    let out = gexp(&[
        "harnack", "--drift", "tanh:1", "--band", "1,1", "--payoff", "sigmoid", "--T", "0.5", "--x", "-1", "--y",
        "0", "--p", "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["harnack", "--drift", "ou"][..],
        &["pbar", "--x", "0", "--band", "1"],
        &["pbar", "--x", "0", "--band", "1,0.5"],
        &["pbar", "--x", "0", "--payoff", "nope"],
        &["pbar", "--x", "0", "--steps", "100", "--method", "mc"],
        &["coupling", "--x", "0", "--y", "1", "--drift", "zero"],
        &["frobnicate"],
    ] {
        let out = gexp(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(gexp(&["--help"]).status.code(), Some(0));
    let v = gexp(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(gexp::VERSION));
}

#[test]
fn config_file_sits_below_command_line_flags() {
    let mut file = tempfile();
    writeln!(file.1, "# shared settings\nx = 1\nband = 1,1   # degenerate\nseed = 7\nsequential = true").unwrap();
    let path = file.0.to_str().unwrap();
    let v = json(&gexp(&["pbar", "--config", path, "--x", "0.5"]));
    let cfg = &v["config"]["pbar"];
    assert_eq!(cfg["x"], 0.5);
    assert_eq!(cfg["band"], "1,1");
    assert_eq!(cfg["seed"], 7);

    writeln!(file.1, "bogus line").unwrap();
    assert_eq!(gexp(&["pbar", "--config", path]).status.code(), Some(2));
    assert_eq!(gexp(&["pbar", "--config", "/nonexistent/gexp.cfg", "--x", "0"]).status.code(), Some(2));
    std::fs::remove_file(&file.0).unwrap();
}

#[test]
fn seed_comes_from_the_environment_unless_given() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gexp"));
        cmd.args(["pbar", "--x", "0", "--method", "mc", "--paths", "200", "--steps", "8"]).args(extra);
        match env {
            Some(s) => cmd.env("GEXP_SEED", s),
            None => cmd.env_remove("GEXP_SEED"),
        };
        json(&cmd.output().unwrap())
    };
    assert_eq!(run(None, &[])["config"]["pbar"]["seed"], 42);
    assert_eq!(run(Some("9"), &[])["config"]["pbar"]["seed"], 9);
    assert_eq!(run(Some("9"), &["--seed", "3"])["config"]["pbar"]["seed"], 3);
    assert_ne!(run(Some("9"), &[])["result"], run(None, &[])["result"]);
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["coupling", "--x", "0", "--y", "1", "--drift", "ou", "--paths", "300", "--steps", "64"];
    let one = gexp(&[&base[..], &["--threads", "1"]].concat());
    let three = gexp(&[&base[..], &["--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn csv_output_and_out_file() {
    let dir = std::env::temp_dir().join(format!("gexp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.csv");
    let out = gexp(&["gheat", "--kind", "gheat", "--nx", "101", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("x,u"));
    assert_eq!(lines.count(), 101);
    assert!(text.starts_with(&format!("# gexp {}", gexp::VERSION)));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn per_path_coupling_rows() {
    let out = gexp(&[
        "coupling", "--x", "0", "--y", "0.5", "--drift", "ou", "--paths", "20", "--steps", "32", "--pieces", "1",
        "--levels", "2", "--format", "csv", "--per-path",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("scenario,path,"));
    assert_eq!(rows.len(), 1 + 2 * 20);
}

fn tempfile() -> (std::path::PathBuf, std::fs::File) {
    let path = std::env::temp_dir().join(format!("gexp-cfg-{}.cfg", std::process::id()));
    let file = std::fs::File::create(&path).unwrap();
    (path, file)
}
