use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use composer::docs::{from_json, to_json, DialDoc, PoolDoc, ReportDoc};
use tempfile::TempDir;

fn composer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_composer")).args(args).output().expect("spawn composer")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// synth → factorize → compile → dial, returning the scratch directory.
fn staged(seed: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [Vec<String>; 4] = [
        vec!["synth".into(), "--seed".into(), seed.into(), "--n-spatial".into(), "2".into(), "--n-elec".into(), "2".into(), "--out".into(), p(d, "ints.fcidump")],
        vec!["factorize".into(), "--ints".into(), p(d, "ints.fcidump"), "--out".into(), p(d, "pool.json"), "--t2-out".into(), p(d, "t2.json")],
        vec!["compile".into(), "--pool".into(), p(d, "pool.json"), "--eps-poly".into(), "1e-6".into(), "--out".into(), p(d, "skel.json")],
        vec!["dial".into(), "--skel".into(), p(d, "skel.json"), "--pool".into(), p(d, "pool.json"), "--mask".into(), "all".into(), "--out".into(), p(d, "dial.json")],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let out = composer(&args);
        assert_eq!(code(&out), 0, "{:?}: {}", step[0], String::from_utf8_lossy(&out.stderr));
    }
    dir
}

#[test]
fn synthetic_pool_matches_golden() {
    let dir = staged("1");
    let text = std::fs::read_to_string(dir.path().join("pool.json")).unwrap();
    let got: PoolDoc = from_json(&text).unwrap();
    let want: PoolDoc = from_json(&std::fs::read_to_string(golden("synth_seed1_pool.json")).unwrap()).unwrap();
    assert_eq!((got.n_so, got.ell_h, got.ell_sigma), (want.n_so, want.ell_h, want.ell_sigma));
    assert!((got.alpha_h - want.alpha_h).abs() < 1e-10);
    assert!((got.alpha_bar - want.alpha_bar).abs() < 1e-10);
    let (gh, gg) = got.pools().unwrap();
    let (wh, wg) = want.pools().unwrap();
    let diff = (gh.dense() - wh.dense()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(diff < 1e-10, "{diff}");
    let sg = gg.anti_hermitian_sigma(&gg.all_addresses());
    let sw = wg.anti_hermitian_sigma(&wg.all_addresses());
    assert!((sg - sw).iter().all(|z| z.norm() < 1e-10));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = staged("3");
    let b = staged("3");
    for f in ["ints.fcidump", "pool.json", "t2.json", "skel.json", "dial.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn compile_dial_verify_succeeds() {
    let dir = staged("2");
    let d = dir.path();
    let out = composer(&["verify", "--skel", &p(d, "skel.json"), "--dial", &p(d, "dial.json"), "--pool", &p(d, "pool.json"), "--out", &p(d, "report.json")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: ReportDoc = from_json(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!(rep.pass);
    assert!(rep.measured_error <= 1.1 * rep.budget + 1e-13);
    assert_eq!(rep.sector, 2);
}

#[test]
fn tampered_fingerprint_is_a_topology_violation() {
    let dir = staged("2");
    let d = dir.path();
    let mut doc: DialDoc = from_json(&std::fs::read_to_string(d.join("dial.json")).unwrap()).unwrap();
    doc.dial.skeleton_fingerprint = "0".repeat(64);
    std::fs::write(d.join("tampered.json"), to_json(&doc)).unwrap();
    let out = composer(&["verify", "--skel", &p(d, "skel.json"), "--dial", &p(d, "tampered.json"), "--pool", &p(d, "pool.json"), "--out", &p(d, "r.json")]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("topology violation"));
}

#[test]
fn zero_budget_fails_verification() {
    let dir = staged("2");
    let d = dir.path();
    let out = composer(&["verify", "--skel", &p(d, "skel.json"), "--dial", &p(d, "dial.json"), "--pool", &p(d, "pool.json"), "--eps-poly", "0", "--out", &p(d, "r.json")]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = composer(&["factorize", "--ints", &p(d, "absent.fcidump"), "--out", &p(d, "pool.json")]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cannot read"));

    assert_eq!(code(&composer(&["synth", "--out", &p(d, "ints.fcidump")])), 0);
    let bad_tau = composer(&["factorize", "--ints", &p(d, "ints.fcidump"), "--tau-chol", "0", "--out", &p(d, "pool.json")]);
    assert_eq!(code(&bad_tau), 2);
    assert!(!d.join("pool.json").exists());

    std::fs::write(d.join("broken.fcidump"), "&FCI NORB=2,NELEC=2\n&END\n0.5 3 1 0 0\n").unwrap();
    let parse = composer(&["factorize", "--ints", &p(d, "broken.fcidump"), "--out", &p(d, "pool.json")]);
    assert_eq!(code(&parse), 2);
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 3"));
}

#[test]
fn estimate_and_diagnose_write_their_artifacts() {
    let dir = staged("4");
    let d = dir.path();
    let est = composer(&["estimate", "--skel", &p(d, "skel.json"), "--pool", &p(d, "pool.json"), "--connectivity", "linear:2", "--out", &p(d, "est.json")]);
    assert_eq!(code(&est), 0, "{}", String::from_utf8_lossy(&est.stderr));
    assert!(String::from_utf8_lossy(&est.stdout).lines().last().unwrap().starts_with("total"));

    let diag = composer(&[
        "diagnose", "--pool", &p(d, "pool.json"), "--eta", "0.9", "--out", &p(d, "mask.json"),
        "--t2", &p(d, "t2.json"), "--t2-ref", &p(d, "t2.json"), "--curve", &p(d, "curve.csv"),
    ]);
    assert_eq!(code(&diag), 0, "{}", String::from_utf8_lossy(&diag.stderr));
    let csv = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    assert!(csv.starts_with("r,ov,w\n1,1,"));

    // the diagnosed mask dials onto the same skeleton
    let dial = composer(&["dial", "--skel", &p(d, "skel.json"), "--pool", &p(d, "pool.json"), "--mask", &p(d, "mask.json"), "--out", &p(d, "masked.json")]);
    assert_eq!(code(&dial), 0, "{}", String::from_utf8_lossy(&dial.stderr));
    let a: DialDoc = from_json(&std::fs::read_to_string(d.join("dial.json")).unwrap()).unwrap();
    let b: DialDoc = from_json(&std::fs::read_to_string(d.join("masked.json")).unwrap()).unwrap();
    assert_eq!(a.dial.skeleton_fingerprint, b.dial.skeleton_fingerprint);
}

#[test]
fn oversized_pool_does_not_fit_a_smaller_skeleton() {
    let small = staged("5");
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&composer(&["synth", "--seed", "5", "--n-spatial", "3", "--n-elec", "2", "--out", &p(d, "big.fcidump")])), 0);
    assert_eq!(code(&composer(&["factorize", "--ints", &p(d, "big.fcidump"), "--out", &p(d, "big.json")])), 0);
    let out = composer(&["dial", "--skel", &p(small.path(), "skel.json"), "--pool", &p(d, "big.json"), "--out", &p(d, "x.json")]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
