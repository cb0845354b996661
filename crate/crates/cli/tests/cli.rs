use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cvot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvot"))
        .args(args)
        .env_remove("CVOT_SEED")
        .output()
        .expect("spawn cvot")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    lines.next().expect("header");
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dir(t: &TempDir, name: &str) -> String {
    t.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn empty_mu_grid_is_a_config_error() {
    let t = TempDir::new().unwrap();
    let out = cvot(&["rate", "-o", &dir(&t, "r"), "--set", "mu_grid="]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu_grid"));
}

#[test]
fn unknown_keys_and_bad_files_are_config_errors() {
    let t = TempDir::new().unwrap();
    assert_eq!(
        code(&cvot(&[
            "bounds",
            "-o",
            &dir(&t, "b"),
            "--set",
            "dleta_grid=0.1"
        ])),
        2
    );
    let bad = t.path().join("bad.conf");
    std::fs::write(&bad, "this line has no equals sign\n").unwrap();
    assert_eq!(
        code(&cvot(&[
            "bounds",
            "-o",
            &dir(&t, "b"),
            "-c",
            bad.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn rate_curve_shape() {
    let t = TempDir::new().unwrap();
    let out = cvot(&[
        "rate",
        "-o",
        &dir(&t, "r"),
        "--set",
        "nu_grid=0,0.001,0.01",
        "--set",
        "mu_grid=0:0.4:0.05",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv(&t.path().join("r/rate.csv"));
    assert_eq!(rows.len(), 3 * 9);
    let curve = |nu: f64| -> Vec<f64> {
        rows.iter()
            .filter(|r| f(&r[0]) == nu)
            .map(|r| f(&r[2]))
            .collect()
    };
    let (free, low, high) = (curve(0.0), curve(0.001), curve(0.01));
    assert!(low[0] > 0.0);
    // μ = 0.35 is the eighth grid point.
    assert_eq!(low[7], 0.0);
    for i in 0..free.len() {
        assert!(free[i] >= low[i] && low[i] >= high[i]);
    }
}

#[test]
fn single_delta_gives_single_row() {
    let t = TempDir::new().unwrap();
    assert_eq!(
        code(&cvot(&[
            "bounds",
            "-o",
            &dir(&t, "b"),
            "--set",
            "delta_grid=0.3"
        ])),
        0
    );
    let rows = csv(&t.path().join("b/bounds.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0][0]), 0.3);
}

#[test]
fn bounds_are_ordered_up_to_half() {
    let t = TempDir::new().unwrap();
    assert_eq!(
        code(&cvot(&[
            "bounds",
            "-o",
            &dir(&t, "b"),
            "--set",
            "delta_grid=0.05:0.5:0.05"
        ])),
        0
    );
    for r in csv(&t.path().join("b/bounds.csv")) {
        let (maj, iid, gauss) = (f(&r[1]), f(&r[2]), f(&r[3]));
        assert!(gauss >= iid && iid >= maj, "{r:?}");
    }
}

#[test]
fn regions() {
    let t = TempDir::new().unwrap();
    let out = cvot(&[
        "region",
        "-o",
        &dir(&t, "g"),
        "--set",
        "encodings=gaussian,arbitrary",
        "--set",
        "nu_grid=0.001,0.01,0.1,10",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let gauss = csv(&t.path().join("g/region_gaussian.csv"));
    let at = |rows: &[Vec<String>], nu: f64, eta: f64| {
        rows.iter()
            .find(|r| f(&r[0]) == nu && (f(&r[1]) - eta).abs() < 1e-9)
            .map(|r| r[2] == "true")
            .unwrap()
    };
    assert!(at(&gauss, 0.001, 0.75));
    // A memory of ten modes per signal with perfect efficiency breaks everything.
    assert!(gauss
        .iter()
        .filter(|r| f(&r[0]) == 10.0 && f(&r[1]) == 1.0)
        .all(|r| r[2] == "false"));

    // A less efficient code can only shrink the assumption-free region.
    let arb = csv(&t.path().join("g/region_arbitrary.csv"));
    let out = cvot(&[
        "region",
        "-o",
        &dir(&t, "g2"),
        "--set",
        "encodings=arbitrary",
        "--set",
        "nu_grid=0.001,0.01,0.1,10",
        "--set",
        "arbitrary.beta=0.944",
    ]);
    assert_eq!(code(&out), 0);
    let arb_low = csv(&t.path().join("g2/region_arbitrary.csv"));
    let count = |rows: &[Vec<String>]| rows.iter().filter(|r| r[2] == "true").count();
    assert!(count(&arb_low) <= count(&arb));
    for (a, b) in arb.iter().zip(&arb_low) {
        assert!(a[2] == "true" || b[2] == "false");
    }
}

#[test]
fn recon_bench_reports_table_columns() {
    let t = TempDir::new().unwrap();
    let out = cvot(&[
        "recon-bench",
        "-o",
        &dir(&t, "rb"),
        "--set",
        "rows=0",
        "--set",
        "frames=2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv(&t.path().join("rb/recon_bench.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0][3]), 0.94);
    assert_eq!(f(&rows[0][4]), 4.36);
    assert_eq!(rows[0][7], "0");
    assert_eq!(
        code(&cvot(&[
            "recon-bench",
            "-o",
            &dir(&t, "x"),
            "--set",
            "rows=0.5"
        ])),
        2
    );
}

#[test]
fn manifest_replay_reproduces_digests() {
    let t = TempDir::new().unwrap();
    let out = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "p"),
        "--transcript",
        "--dump-records",
        "--ot",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = t.path().join("p/manifest.json");
    let m = json(&manifest);
    assert_eq!(m["command"], "protocol");
    assert_eq!(m["seed"], 1);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    let out = cvot(&[
        "replay",
        manifest.to_str().unwrap(),
        "-o",
        &dir(&t, "again"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(
        json(&t.path().join("again/manifest.json"))["outputs"],
        m["outputs"]
    );

    assert_eq!(
        code(&cvot(&[
            "bounds",
            "-o",
            &dir(&t, "b"),
            "--set",
            "delta_grid=0.1,0.2"
        ])),
        0
    );
    let out = cvot(&["replay", &dir(&t, "b/manifest.json"), "-o", &dir(&t, "b2")]);
    assert_eq!(code(&out), 0);

    // A tampered digest is reported.
    let text = std::fs::read_to_string(t.path().join("b/manifest.json")).unwrap();
    let digest = m["outputs"][0]["sha256"].as_str().unwrap();
    let b = json(&t.path().join("b/manifest.json"));
    let real = b["outputs"][0]["sha256"].as_str().unwrap();
    std::fs::write(t.path().join("b/manifest.json"), text.replace(real, digest)).unwrap();
    assert_eq!(
        code(&cvot(&[
            "replay",
            &dir(&t, "b/manifest.json"),
            "-o",
            &dir(&t, "b3")
        ])),
        1
    );
}

#[test]
fn seed_comes_from_config_then_environment() {
    let t = TempDir::new().unwrap();
    let run = |env: Option<&str>, extra: &[&str], name: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cvot"));
        c.args(["bounds", "-o", &dir(&t, name), "--set", "delta_grid=0.1"])
            .args(extra);
        match env {
            Some(v) => c.env("CVOT_SEED", v),
            None => c.env_remove("CVOT_SEED"),
        };
        assert!(c.status().unwrap().success());
        json(&t.path().join(name).join("manifest.json"))["seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(run(None, &[], "a"), 1);
    assert_eq!(run(Some("77"), &[], "b"), 77);
    assert_eq!(run(Some("77"), &["--set", "seed=5"], "c"), 5);
}

#[test]
fn mismatched_codes_abort() {
    let t = TempDir::new().unwrap();
    let out = cvot(&["protocol", "-o", &dir(&t, "m"), "--set", "bob_code_seed=9"]);
    assert_eq!(code(&out), 3);
    let o = json(&t.path().join("m/outcome.json"));
    assert_eq!(o["status"], "aborted");
    assert!(o["alice"]["error"]
        .as_str()
        .unwrap()
        .contains("code mismatch"));
}

#[test]
fn zero_secure_length_is_infeasible() {
    let t = TempDir::new().unwrap();
    let out = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "i"),
        "--set",
        "nu=1",
        "--set",
        "eta=1",
    ]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("l = 0"));
}

#[test]
fn socket_run_matches_in_process_run() {
    let t = TempDir::new().unwrap();
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let alice = Command::new(env!("CARGO_BIN_EXE_cvot"))
        .args([
            "protocol",
            "-o",
            &dir(&t, "a"),
            "--transcript",
            "--listen",
            &addr,
        ])
        .env_remove("CVOT_SEED")
        .spawn()
        .unwrap();
    let bob = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "b"),
        "--transcript",
        "--connect",
        &addr,
    ]);
    let alice = alice.wait_with_output().unwrap();
    assert_eq!(code(&bob), 0, "{}", String::from_utf8_lossy(&bob.stderr));
    assert!(alice.status.success());

    let local = cvot(&["protocol", "-o", &dir(&t, "l"), "--transcript"]);
    assert_eq!(code(&local), 0);
    let l = json(&t.path().join("l/outcome.json"));
    assert_eq!(l["status"], "done");
    assert_eq!(l["correct"], true);
    let a = json(&t.path().join("a/outcome.json"));
    let b = json(&t.path().join("b/outcome.json"));
    assert_eq!(a["alice"], l["alice"]);
    assert_eq!(b["bob"], l["bob"]);
    let transcript = |d: &str| std::fs::read(t.path().join(d).join("transcript.bin")).unwrap();
    assert_eq!(transcript("a"), transcript("l"));
    // Socket manifests are marked and refuse in-process replay.
    assert_eq!(json(&t.path().join("a/manifest.json"))["mode"], "alice");
    assert_eq!(
        code(&cvot(&[
            "replay",
            &dir(&t, "a/manifest.json"),
            "-o",
            &dir(&t, "r")
        ])),
        2
    );
}

#[test]
fn injected_records_replace_sampling() {
    let t = TempDir::new().unwrap();
    let first = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "d"),
        "--dump-records",
        "dump.bin",
        "--transcript",
        "--set",
        "seed=3",
    ]);
    assert_eq!(code(&first), 0);
    let dump = t.path().join("d/dump.bin");
    // Different sampling seed, same records, same Alice seed via the dump.
    let again = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "e"),
        "--inject-records",
        dump.to_str().unwrap(),
        "--transcript",
        "--set",
        "seed=3",
        "--set",
        "n=10",
    ]);
    assert_eq!(
        code(&again),
        0,
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    let transcript = |d: &str| std::fs::read(t.path().join(d).join("transcript.bin")).unwrap();
    assert_eq!(transcript("d"), transcript("e"));
    let m = json(&t.path().join("e/manifest.json"));
    assert!(m["config"]["inject_records"]
        .as_str()
        .unwrap()
        .ends_with("dump.bin"));

    std::fs::write(t.path().join("short.bin"), [0u8; 5]).unwrap();
    let bad = cvot(&[
        "protocol",
        "-o",
        &dir(&t, "f"),
        "--inject-records",
        &dir(&t, "short.bin"),
    ]);
    assert_eq!(code(&bad), 2);
}
