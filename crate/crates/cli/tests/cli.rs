use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vicsek() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vicsek"));
    c.env_remove("VICSEK_OUTPUT_DIR");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const ROTATED: &str = r#"
seed = 3
[grid]
dim = 3
n_theta = 8
n_phi = 16
[initial]
kind = "rotated-vmf"
kappa = 2.5
direction = [0.0, 0.0, 1.0]
axis = [1.0, 1.0, 0.0]
angle = 0.7
[direct]
t_end = 0.5
snapshots = true
record_every = 100
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn only_subdir(dir: &Path) -> PathBuf {
    let entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries[0].clone()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rot.toml", ROTATED);
    let mut trees = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("out{k}"));
        let o = vicsek().arg("simulate").arg(&cfg).arg("--output-dir").arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("|J| ="));
        let run = only_subdir(&out);
        let name = run.file_name().unwrap().to_str().unwrap().to_string();
        assert!(name.starts_with("rot-") && name.len() == "rot-".len() + 12, "{name}");
        trees.push((name, read_tree(&run)));
    }
    assert_eq!(trees[0], trees[1]);
    let files: Vec<&str> = trees[0].1.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["config.toml", "grid.json", "summary.json", "direct/trajectory.csv", "direct/final_density.csv", "direct/snapshots.csv"] {
        assert!(files.contains(&f), "missing {f}: {files:?}");
    }
    // Energy column is nonincreasing.
    let traj = &trees[0].1.iter().find(|(n, _)| n == "direct/trajectory.csv").unwrap().1;
    let text = String::from_utf8(traj.clone()).unwrap();
    let e: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert!(e.len() > 2);
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn output_dir_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rot.toml", ROTATED);
    let env_dir = tmp.path().join("from-env");
    let o = vicsek().arg("simulate").arg(&cfg).env("VICSEK_OUTPUT_DIR", &env_dir).output().unwrap();
    assert!(o.status.success());
    assert!(only_subdir(&env_dir).join("direct/trajectory.csv").exists());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "seed = [\n");
    let o = vicsek().arg("simulate").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let uni = write(tmp.path(), "uni.toml", "[grid]\ndim = 3\nn_theta = 8\nn_phi = 16\n[initial]\nkind = \"uniform\"\n");
    let o = vicsek().arg("simulate").arg(&uni).arg("--output-dir").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonzero initial momentum"));
    let o = vicsek().arg("simulate").arg(tmp.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn w2_line(o: &Output, key: &str) -> f64 {
    let s = stdout(o);
    let line = s.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no {key} in {s}"));
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn transport_between_density_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "rot.toml", ROTATED);
    let out = tmp.path().join("out");
    assert!(vicsek().arg("simulate").arg(&cfg).arg("--output-dir").arg(&out).status().unwrap().success());
    let run = only_subdir(&out).join("direct");
    let a = run.join("snapshot_00000.csv");
    let b = run.join("final_density.csv");

    let same = vicsek().arg("transport").arg(&a).arg(&a).output().unwrap();
    assert!(same.status.success());
    assert!(w2_line(&same, "W2 =").abs() < 1e-12);

    let plan = tmp.path().join("plan.csv");
    let exact = vicsek().arg("transport").arg(&a).arg(&b).arg("--plan-out").arg(&plan).output().unwrap();
    assert!(exact.status.success());
    assert!(std::fs::read_to_string(&plan).unwrap().starts_with("i,j,mass\n"));
    let ent = vicsek().args(["transport", "--method", "entropic", "--gamma", "0.05"]).arg(&a).arg(&b).output().unwrap();
    assert!(ent.status.success(), "{}", String::from_utf8_lossy(&ent.stderr));
    let ce = w2_line(&exact, "plan cost");
    let cg = w2_line(&ent, "plan cost");
    assert!(cg >= ce - 1e-9, "{cg} < {ce}");
}

#[test]
fn verify_runs_selected_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r.json");
    let o = vicsek()
        .args(["verify", "--quick", "--no-timing", "--only", "relation_one", "--only", "ckp_inequality", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(names, ["ckp_inequality", "relation_one"]);
    let none = vicsek().args(["verify", "--only", "no_such_check", "--out"]).arg(&report).output().unwrap();
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn grid_info_and_help() {
    let tmp = tempfile::tempdir().unwrap();
    let nodes = tmp.path().join("nodes.csv");
    let o = vicsek().args(["grid-info", "--n-theta", "8", "--n-phi", "16", "--nodes-out"]).arg(&nodes).output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("nodes: 98"));
    assert_eq!(std::fs::read_to_string(&nodes).unwrap().lines().count(), 99);
    let c = vicsek().args(["grid-info", "--dim", "2", "--n", "12"]).output().unwrap();
    assert!(stdout(&c).contains("nodes: 12"));
    assert_eq!(vicsek().args(["grid-info", "--dim", "2", "--n-theta", "4"]).output().unwrap().status.code(), Some(2));
    let h = vicsek().arg("--help").output().unwrap();
    for sub in ["simulate", "jko", "transport", "verify", "grid-info"] {
        assert!(stdout(&h).contains(sub));
    }
}

#[test]
fn jko_subcommand_writes_the_step_log() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[grid]\ndim = 2\nn = 32\n[initial]\nkind = \"rotated-vmf\"\nkappa = 6.0\ndirection = [1.0, 0.0, 0.0]\naxis = [0.0, 0.0, 1.0]\nangle = 0.0\n[jko]\ntau = 0.05\nt_end = 0.1\n";
    let cfg = write(tmp.path(), "circ.toml", text);
    let out = tmp.path().join("out");
    let o = vicsek().arg("jko").arg(&cfg).arg("--output-dir").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = only_subdir(&out);
    assert!(!run.join("direct").exists());
    let steps = std::fs::read_to_string(run.join("jko/steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 3);
    assert!(steps.starts_with("n,t,energy,objective"));
}
