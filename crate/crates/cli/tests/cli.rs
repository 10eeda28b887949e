use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TOY4: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/toy4.json");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crashplan"))
        .args(args)
        .env_remove("CRASHPLAN_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn data_rows(path: &str) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn gen_and_solve_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let inst = p(dir.path(), "i.json");
    ok(&["gen", "--seed", "1", "--activities", "6", "--modes", "2", "--out", &inst]);
    let inst2 = p(dir.path(), "i2.json");
    ok(&["gen", "--seed", "1", "--activities", "6", "--modes", "2", "--out", &inst2]);
    assert_eq!(fs::read(&inst).unwrap(), fs::read(&inst2).unwrap());

    for algo in ["moga", "nsga2"] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let f = p(dir.path(), &format!("{algo}{threads}.csv"));
            ok(&[
                "solve",
                "--algo",
                algo,
                "--instance",
                &inst,
                "--seed",
                "7",
                "--pop",
                "20",
                "--iterations",
                "25",
                "--threads",
                threads,
                "--out",
                &f,
            ]);
            assert!(Path::new(&format!("{f}.meta.json")).exists());
            outputs.push(fs::read(&f).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{algo}");
    }
}

#[test]
fn oracle_writes_toy4_front() {
    let dir = tempfile::tempdir().unwrap();
    let f = p(dir.path(), "o.csv");
    ok(&["oracle", "--instance", TOY4, "--out", &f]);
    let rows = data_rows(&f);
    let makespans: Vec<&str> = rows.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(makespans, ["5", "4", "3"]);
    assert_eq!(rows[0][3], "238.975480773");
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{f}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["run"]["algorithm"], "oracle");
    assert_eq!(meta["run"]["evaluations"], 15);
}

#[test]
fn discount_sweep_is_strictly_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let f = p(dir.path(), "s.csv");
    ok(&[
        "sweep",
        "--param",
        "discount",
        "--values",
        "0,0.05,0.1,0.2",
        "--instance",
        TOY4,
        "--chromosome",
        "1:2:3:4,1:1:1:1,0:4:5:0",
        "--out",
        &f,
    ]);
    let npv: Vec<f64> = data_rows(&f).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(npv[0], 300.0);
    assert!(npv.windows(2).all(|w| w[1] < w[0]), "{npv:?}");
}

#[test]
fn deadline_sweep_reports_infeasible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = p(dir.path(), "d.csv");
    ok(&["sweep", "--param", "deadline", "--values", "2,3,5", "--instance", TOY4, "--out", &f]);
    let rows = data_rows(&f);
    assert_eq!(rows[0], ["2", "0", "", "", ""]);
    assert_eq!(rows[1][2], "302.343159486");
    assert_eq!(rows[2][2], "238.975480773");
}

#[test]
fn metrics_compare_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let o = p(dir.path(), "o.csv");
    let m = p(dir.path(), "m.csv");
    ok(&["oracle", "--instance", TOY4, "--out", &o]);
    ok(&[
        "solve",
        "--algo",
        "moga",
        "--instance",
        TOY4,
        "--seed",
        "2",
        "--pop",
        "10",
        "--iterations",
        "10",
        "--out",
        &m,
    ]);
    let r = p(dir.path(), "r.json");
    let rows = p(dir.path(), "rows.csv");
    ok(&["metrics", "--a", &m, "--b", &o, "--reference", &o, "--out", &r, "--csv", &rows]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(report["reference"], "supplied");
    assert!(report["b"]["qm"].as_f64().unwrap() == 1.0);
    assert_eq!(fs::read_to_string(&rows).unwrap().lines().count(), 3);

    let s = p(dir.path(), "s.json");
    ok(&["metrics", "--summarize", &r, &r, "--out", &s]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&s).unwrap()).unwrap();
    assert_eq!(summary["instances"], 2);
}

#[test]
fn tune_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let levels = p(dir.path(), "levels.json");
    fs::write(
        &levels,
        r#"{
  "elitism_rate": [0.05, 0.1, 0.15, 0.2, 0.25],
  "hill_climb_rate": [0.2, 0.4, 0.5, 0.6, 0.8],
  "mutation_rate": [0.2, 0.4, 0.5, 0.6, 0.8],
  "crossover_rate": [0.2, 0.4, 0.5, 0.6, 0.8],
  "iterations": [2, 3, 4, 5, 6],
  "pop_size": [4, 5, 6, 7, 8]
}"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let d = p(dir.path(), &format!("t{k}"));
        ok(&[
            "tune",
            "--instance",
            TOY4,
            "--seed",
            "3",
            "--levels",
            &levels,
            "--threads",
            threads,
            "--out-dir",
            &d,
        ]);
        outs.push((
            fs::read(format!("{d}/tuning.json")).unwrap(),
            fs::read(format!("{d}/means.csv")).unwrap(),
        ));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(String::from_utf8_lossy(&outs[0].1).lines().count(), 31);
}

#[test]
fn danp_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let inf = p(dir.path(), "inf.csv");
    let sc = p(dir.path(), "scores.csv");
    fs::write(&inf, "safety,finish\n0,1\n0.5,0\n").unwrap();
    fs::write(&sc, "activity,mode,safety,finish\n2,1,90,80\n2,2,60,70\n3,1,75,75\n").unwrap();
    let out = p(dir.path(), "danp");
    let patched = p(dir.path(), "patched.json");
    ok(&[
        "danp",
        "--influence",
        &inf,
        "--scores",
        &sc,
        "--out-dir",
        &out,
        "--instance",
        TOY4,
        "--patched-out",
        &patched,
    ]);
    let w: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{out}/weights.json")).unwrap()).unwrap();
    let ws: Vec<f64> = w["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let inst: serde_json::Value = serde_json::from_str(&fs::read_to_string(&patched).unwrap()).unwrap();
    let q = inst["activities"][2]["modes"][0]["quality"].as_f64().unwrap();
    assert!((q - 75.0).abs() < 1e-9);
}

#[test]
fn eval_prints_inspection() {
    let out = ok(&["eval", "--instance", TOY4, "--chromosome", "1:2:3:4,1:1:1:1,0:4:5:0"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schedule"]["makespan"], 5);
    assert_eq!(v["payments"]["prepayment"], 200.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "x.csv");
    // missing arguments and malformed input are usage errors
    assert_eq!(run(&["solve", "--algo", "moga"]).status.code(), Some(2));
    assert_eq!(
        run(&["solve", "--algo", "moga", "--instance", "/no/such.json", "--seed", "1", "--out", &out])
            .status
            .code(),
        Some(2)
    );
    let bad = p(dir.path(), "bad.json");
    fs::write(&bad, "{ \"schema_version\": 1,").unwrap();
    let r = run(&["oracle", "--instance", &bad, "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&r.stderr).lines().count(), 1);
    assert_eq!(
        run(&["eval", "--instance", TOY4, "--chromosome", "2:1:3:4,1:1:1:1,0:4:5:0"]).status.code(),
        Some(2)
    );

    // a well-formed but unsolvable request is a domain error
    let r = run(&["oracle", "--instance", TOY4, "--max-points", "10", "--out", &out]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("15"));
    let r = run(&["solve", "--algo", "moga", "--instance", TOY4, "--seed", "1", "--pop", "1", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn sidecar_names_follow_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let f: PathBuf = dir.path().join("nested/front.csv");
    ok(&["oracle", "--instance", TOY4, "--out", f.to_str().unwrap()]);
    assert!(dir.path().join("nested/front.csv.meta.json").exists());
}
