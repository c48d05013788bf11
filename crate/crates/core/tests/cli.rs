use std::path::Path;
use std::process::{Command, Output};

fn jamgame(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamgame"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamgame(&["gen", "--sensors", "6", "--seed", "7", "--out", "s.json"], dir.path());
    assert!(out.status.success());
    let out = jamgame(
        &["solve", "--scenario", "s.json", "--mode", "learned", "--out", "eq.json", "--lp-dump", "p.lp"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eq: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eq.json")).unwrap()).unwrap();
    for key in ["x", "y", "v", "z", "leader_payoff", "jammer_objective", "verification", "solver_stats"] {
        assert!(eq.get(key).is_some(), "{key}");
    }
    assert_eq!(eq["x"].as_array().unwrap().len(), 6);
    let lp = std::fs::read_to_string(dir.path().join("p.lp")).unwrap();
    assert!(lp.starts_with("Maximize"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(jamgame(&["solve", "--scenario", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(jamgame(&["sweep", "--lambda-grid", "1:0"], dir.path()).status.code(), Some(2));
    assert_eq!(jamgame(&["gen", "--layout", "five-gn"], dir.path()).status.code(), Some(2));
    jamgame(&["gen", "--sensors", "8", "--out", "s.json"], dir.path());
    let out = jamgame(&["solve", "--scenario", "s.json", "--node-limit", "0"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--trials", "2", "--lambda-grid", "0:1:3", "--sensors", "3,5", "--seed", "4",
        "--out", "sweep.csv",
    ];
    assert!(jamgame(&args, dir.path()).status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "experiment,trial,seed,lambda,M,N,leader_payoff,jamfree_payoff,n_victims,solver_nodes,wall_ms"
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2);

    let plot = |out: &str| jamgame(&["plot", "--csv", "sweep.csv", "--kind", "sweep", "--out", out], dir.path());
    assert!(plot("a.svg").status.success());
    assert!(plot("b.svg").status.success());
    let a = std::fs::read(dir.path().join("a.svg")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.svg")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().matches("<polyline").count(), 2);

    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = jamgame(&["plot", "--csv", "empty.csv", "--out", "c.svg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("c.svg").exists());
}

#[test]
fn fictitious_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = jamgame(&["fictitious", "--seed", "5", "--rounds", "20", "--out", "t.csv"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,leader_payoff,n_victims,converged,cycle_length"));
    assert_eq!(lines.count(), 20);

    let again = jamgame(&["fictitious", "--seed", "5", "--rounds", "20"], dir.path());
    assert_eq!(again.stdout, text.as_bytes());

    let bad = jamgame(&["fictitious", "--sensors", "3", "--init", "1,0"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    let ok = jamgame(&["fictitious", "--sensors", "3", "--init", "1,0,1", "--rounds", "3"], dir.path());
    assert!(ok.status.success());
}
