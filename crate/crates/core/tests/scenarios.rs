use std::fs;
use std::process::Command;

use mrbcra::scenario::*;
use mrbcra::sim::Mode;

fn small() -> Overrides {
    Overrides { slots: Some(400), trials: Some(4), k_max: Some(6), L: Some(16), M: Some(4), ..Default::default() }
}

#[test]
fn every_scenario_writes_its_three_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ScenarioName::ALL {
        if name == ScenarioName::LSweep {
            continue;
        }
        let out = run_scenario(&Scenario { name, overrides: small(), output_dir: dir.path().into() }).unwrap();
        let csv = fs::read_to_string(&out.csv).unwrap();
        assert!(csv.lines().count() > 1, "{name:?}");
        let meta = ResolvedScenario::from_meta(&fs::read_to_string(&out.meta).unwrap()).unwrap();
        assert_eq!(meta.scenario, name);
        assert_eq!(meta.version, VERSION);
        let summary = fs::read_to_string(&out.summary).unwrap();
        assert!(summary.lines().all(|l| l.contains(" = ")));
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for name in [ScenarioName::Evolution, ScenarioName::RateSweep, ScenarioName::MudCurve] {
        let run = |d: &std::path::Path| run_scenario(&Scenario { name, overrides: small(), output_dir: d.into() }).unwrap();
        let (x, y) = (run(a.path()), run(b.path()));
        assert_eq!(fs::read(&x.csv).unwrap(), fs::read(&y.csv).unwrap(), "{name:?}");
        assert_eq!(fs::read(&x.meta).unwrap(), fs::read(&y.meta).unwrap());
    }
}

#[test]
fn rerun_from_meta_reproduces_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = Overrides { mode: Some(Mode::Phy), slots: Some(20), L: Some(8), M: Some(2), lambda: Some(3.0), ..Default::default() };
    let first = run_scenario(&Scenario { name: ScenarioName::Evolution, overrides: o, output_dir: a.path().into() }).unwrap();
    let second = rerun_from_meta(&first.meta, b.path()).unwrap();
    assert_eq!(fs::read(first.csv).unwrap(), fs::read(second.csv).unwrap());
}

#[test]
fn analyze_table_starts_at_d_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&Scenario { name: ScenarioName::Analyze, overrides: Overrides::default(), output_dir: dir.path().into() }).unwrap();
    let csv = fs::read_to_string(out.csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "D,B_DN,lambda_max,lambda1_star,lambda_max_upper,N_star");
    assert!(lines.next().unwrap().starts_with("1,1,0.3678"));
    let summary = fs::read_to_string(out.summary).unwrap();
    assert!(summary.contains("lambda_max = 16.04"));
}

#[test]
fn plotdata_selects_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    fs::write(&csv, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
    let dat = dir.path().join("x.dat");
    emit_plotdata(&csv, &["c", "a"], &dat).unwrap();
    assert_eq!(fs::read_to_string(&dat).unwrap(), "# column 1: c\n# column 2: a\n3 1\n6 4\n");
    assert!(matches!(emit_plotdata(&csv, &["zz"], &dat), Err(mrbcra::Error::MissingColumn(c)) if c == "zz"));
}

#[test]
fn invalid_overrides_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = Overrides { D: Some(40), L: Some(32), ..Default::default() };
    let err = run_scenario(&Scenario { name: ScenarioName::Evolution, overrides: o, output_dir: dir.path().into() });
    assert!(matches!(err, Err(mrbcra::Error::InvalidConfig(_))));
}

#[test]
fn command_line_runs_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_mrbcra");
    let status = Command::new(bin)
        .args(["evolution", "--L", "16", "--M", "4", "--slots", "300", "--seed", "7", "--plot", "slot,total_backlog", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(String::from_utf8_lossy(&status.stdout).contains("throughput_per_rb = "));
    let dat = fs::read_to_string(dir.path().join("evolution.dat")).unwrap();
    assert!(dat.starts_with("# column 1: slot\n# column 2: total_backlog\n0 "));

    let again = dir.path().join("again");
    let status = Command::new(bin)
        .arg("--from-meta")
        .arg(dir.path().join("evolution.meta"))
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(fs::read(dir.path().join("evolution.csv")).unwrap(), fs::read(again.join("evolution.csv")).unwrap());

    let cfg = dir.path().join("sys.toml");
    fs::write(&cfg, "L = 16\nN = 160\nM = 2\nT = 100\nD = 12\nKbar = 32\nlambda = 4.0\nsnr_db = 20.0\nslots = 300\nseed = 3\n").unwrap();
    let status = Command::new(bin).args(["--scenario", "evolution", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(status.status.success());
    let meta = ResolvedScenario::from_meta(&fs::read_to_string(dir.path().join("evolution.meta")).unwrap()).unwrap();
    assert_eq!((meta.config.N, meta.config.seed), (160, 3));

    let bad = Command::new(bin).args(["evolution", "--N", "8", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("N < L"));
}
