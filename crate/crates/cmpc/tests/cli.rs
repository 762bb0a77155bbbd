use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn cmpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmpc")).args(args).env_remove("CMPC_SEED").output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmpc-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_sweep_has_one_row_per_scheme_and_z() {
    let o = cmpc(&["analyze", "--s", "4", "--t", "15", "--z", "1..300", "--all-schemes"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# cmpc analyze v1"));
    assert_eq!(lines.next(), Some("scheme,s,t,z,N,branch,lambda_star"));
    assert_eq!(lines.count(), 1500);
}

#[test]
fn analyze_example_row() {
    let o = cmpc(&["analyze", "--s", "2", "--t", "2", "--z", "2", "--scheme", "age"]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("age,2,2,2,17,") && l.ends_with(",2")));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cmpc(&["analyze", "--s", "4", "--t", "15", "--z", "5..1"]).status.code(), Some(2));
    assert_eq!(cmpc(&["analyze", "--bogus"]).status.code(), Some(2));
    assert_eq!(cmpc(&["run", "--scheme", "polydot", "--s", "1", "--t", "1", "--z", "1", "--m", "2"]).status.code(), Some(2));
    assert_eq!(cmpc(&["run", "--scheme", "ssmm", "--s", "2", "--t", "2", "--z", "1", "--m", "4"]).status.code(), Some(2));
    assert_eq!(cmpc(&["run", "--s", "3", "--t", "2", "--z", "1", "--m", "4"]).status.code(), Some(2));
}

#[test]
fn missing_input_file_exits_one() {
    let o = cmpc(&["run", "--s", "2", "--t", "2", "--z", "1", "--m", "4", "--a", "/nonexistent/a.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_outputs_and_verifies() {
    let dir = scratch("run");
    let o = cmpc(&[
        "run", "--scheme", "age", "--s", "2", "--t", "2", "--z", "2", "--m", "4", "--seed", "3",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("N=17"));
    for f in ["y.csv", "transcript.csv", "costs.csv", "shares.txt"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let shares = fs::read_to_string(dir.join("shares.txt")).unwrap();
    assert!(shares.lines().any(|l| l.starts_with("0: ")));
}

#[test]
fn identity_inputs_give_identity() {
    let dir = scratch("ident");
    let o = cmpc(&[
        "run", "--scheme", "polydot", "--s", "2", "--t", "2", "--z", "1", "--m", "4", "--identity",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let y = fs::read_to_string(dir.join("y.csv")).unwrap();
    assert_eq!(y.lines().next(), Some("1,0,0,0"));
}

#[test]
fn stragglers_below_threshold_fail() {
    // t^2 + z = 6 responses are needed.
    let ok = cmpc(&["run", "--s", "2", "--t", "2", "--z", "2", "--m", "4", "--responding", "0,3,5,8,9,16"]);
    assert_eq!(ok.status.code(), Some(0));
    let short = cmpc(&["run", "--s", "2", "--t", "2", "--z", "2", "--m", "4", "--responding", "0,3,5,8,9"]);
    assert_ne!(short.status.code(), Some(0));
}

#[test]
fn config_file_and_seed_env() {
    let dir = scratch("cfg");
    let cfg = dir.join("run.conf");
    fs::write(&cfg, "# defaults\nscheme = entangled\ns = 2\nt = 2\nz = 1\nm = 4\nseed = 11\n").unwrap();
    let out = |sub: &str, extra: &[&str], env: Option<&str>| {
        let d = dir.join(sub);
        let mut c = Command::new(env!("CARGO_BIN_EXE_cmpc"));
        c.args(["--config", cfg.to_str().unwrap(), "run", "--out-dir", d.to_str().unwrap()]).args(extra);
        c.env_remove("CMPC_SEED");
        if let Some(v) = env {
            c.env("CMPC_SEED", v);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        fs::read_to_string(d.join("y.csv")).unwrap()
    };
    let from_file = out("a", &[], None);
    assert_eq!(from_file, out("b", &["--seed", "11"], None));
    assert_ne!(from_file, out("c", &["--seed", "12"], None));
    // The config file outranks the environment default.
    assert_eq!(from_file, out("d", &[], Some("99")));
}

#[test]
fn seed_env_sets_default() {
    let dir = scratch("env");
    let run = |sub: &str, env: &str| {
        let d = dir.join(sub);
        let st = Command::new(env!("CARGO_BIN_EXE_cmpc"))
            .args(["run", "--s", "2", "--t", "1", "--z", "1", "--m", "2", "--out-dir", d.to_str().unwrap()])
            .env("CMPC_SEED", env)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0));
        fs::read_to_string(d.join("y.csv")).unwrap()
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("c", "5"), run("d", "6"));
}

#[test]
fn costs_match() {
    let o = cmpc(&["costs", "--scheme", "age", "--scheme", "polydot", "--s", "2", "--t", "2", "--z", "2", "--m", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[6..9], f[9..12]);
    }
}

#[test]
fn verify_exit_codes() {
    // The printed AGE formula misses the oracle at (2,2,2,lambda=0).
    let o = cmpc(&["verify", "--max-s", "2", "--max-t", "2", "--max-z", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).lines().any(|l| l.starts_with("age,2,2,2,0,upsilon2,19,18")));
    let o = cmpc(&["verify", "--large-gap", "--max-s", "3", "--max-t", "3", "--max-z", "4"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn privacy_and_ablation() {
    assert_eq!(cmpc(&["privacy", "--s", "2", "--t", "2", "--z", "2"]).status.code(), Some(0));
    assert_eq!(cmpc(&["privacy", "--s", "2", "--t", "2", "--z", "2", "--ablate-masking"]).status.code(), Some(3));
}

#[test]
fn partition_sweep_at_fixed_product() {
    let o = cmpc(&["analyze", "--st", "36", "--z", "42"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let n = |scheme: &str, s: u64| -> u64 {
        let prefix = format!("{scheme},{s},{},42,", 36 / s);
        let line = text.lines().find(|l| l.starts_with(&prefix)).unwrap();
        line.split(',').nth(4).unwrap().parse().unwrap()
    };
    let winners: Vec<u64> = [1u64, 2, 3, 4, 6, 9, 12, 18, 36]
        .into_iter()
        .filter(|&s| ["entangled", "ssmm", "gcsa-na"].iter().all(|b| n("polydot", s) < n(b, s)))
        .collect();
    assert_eq!(winners, vec![2, 3, 4]);
}

#[test]
fn worked_example_run() {
    let o = cmpc(&["run", "--scheme", "age", "--s", "2", "--t", "2", "--z", "2", "--m", "12", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("N=17"));
}

#[test]
fn worked_example_costs() {
    let o = cmpc(&["costs", "--scheme", "age", "--s", "2", "--t", "2", "--z", "2", "--m", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(2).unwrap().to_string();
    assert_eq!(row, "age,2,2,2,12,17,3420,1408,9792,3420,1408,9792");
}
