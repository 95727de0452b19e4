use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holomera"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("summary is JSON")
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error is JSON")
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn verify_ed_small_chain_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-ed", "--n", "8"]);
    let v = stdout_json(&o);
    assert!(v["result"]["max_diff"].as_f64().unwrap() < 1e-9);
    assert!(dir.path().join("verify-ed.json").exists());
}

#[test]
fn capacity_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-ed", "--n", "32"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "capacity");
    let o = run(dir.path(), &["gs-energy", "--d", "13"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["gs-energy", "--set", "bogus=1"][..],
        &["gs-energy", "--d", "2"],
        &["hologron-2", "--mode", "diagonal"],
        &["fit", "--model", "tail", "--d", "5"],
        &["no-such-command"],
    ] {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let e = stderr_json(&o);
        assert_eq!(e["exit_code"], 2);
        assert!(e["message"].as_str().is_some());
    }
}

#[test]
fn angular_separation_three_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["hologron-2", "--mode", "angular", "--ds", "3", "--d", "7"]);
    stdout_json(&o);
    let v = csv_column(&dir.path().join("hologron-2-angular-ds3.csv"), "v");
    assert!(!v.is_empty());
    assert!(v.iter().all(|x| *x == 0.0));
}

#[test]
fn single_particle_fit_at_depth_twelve() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&run(dir.path(), &["hologron-1", "--d", "12"]));
    let v = stdout_json(&run(dir.path(), &["fit", "--model", "1p"]));
    let inv_ell = v["result"]["params"][0].as_f64().unwrap();
    assert!((0.66..=0.72).contains(&inv_ell), "{inv_ell}");
}

#[test]
fn two_stage_tail_fit_reads_previous_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["hologron-1", "--d", "8"][..],
        &["fit", "--model", "1p", "--set", "fit_lo=3"],
        &["hologron-2", "--d", "8"],
        &["fit", "--model", "tail", "--set", "fit_dmin=1"],
        &["fit", "--model", "W"],
    ] {
        stdout_json(&run(dir.path(), args));
    }
    for name in ["fit-1p.json", "fit-tail.json", "fit-W.json"] {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        assert!(doc["meta"]["config"].as_str().is_some());
        assert!(doc["result"]["sigmas"].as_array().unwrap().iter().all(|s| s.as_f64().unwrap() >= 0.0));
    }
}

#[test]
fn runs_are_bit_reproducible_and_headed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["noise-sweep", "--d", "5", "--samples", "3", "--epsilon", "0.01", "--set", "fidelity_samples=50"];
    let va = stdout_json(&run(a.path(), &args));
    let vb = stdout_json(&run(b.path(), &args));
    assert_eq!(va["config"], vb["config"]);
    let ta = std::fs::read_to_string(a.path().join("noise-sweep.csv")).unwrap();
    let tb = std::fs::read_to_string(b.path().join("noise-sweep.csv")).unwrap();
    assert_eq!(ta, tb);
    let first = ta.lines().next().unwrap();
    assert_eq!(first, format!("# holomera v{} config={}", env!("CARGO_PKG_VERSION"), va["config"].as_str().unwrap()));
    let header = ta.lines().nth(2).unwrap();
    assert!(header.starts_with("epsilon,F_estimate,rho1,rho2,V_mean,V_stderr,n_samples,seed"));
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# example\ndepth = 5\ngauge = random:3\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&out, &["hologron-1", "--config", cfg.to_str().unwrap()]);
    stdout_json(&o);
    let rho = csv_column(&out.join("hologron-1.csv"), "rho");
    assert_eq!(rho, vec![2.0, 3.0, 4.0]);
    let o = run(&out, &["hologron-1", "--config", cfg.to_str().unwrap(), "--d", "6"]);
    stdout_json(&o);
    assert_eq!(csv_column(&out.join("hologron-1.csv"), "rho").len(), 4);
}

#[test]
fn artifacts_stay_in_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested");
    for args in [
        &["gs-energy", "--d", "4"][..],
        &["correlators", "--d", "5"],
        &["spectrum", "--k", "3"],
        &["collapse", "--d", "7"],
        &["ads-predict"],
    ] {
        let v = stdout_json(&run(&out, args));
        for f in v["files"].as_array().unwrap() {
            assert!(Path::new(f.as_str().unwrap()).starts_with(&out), "{f}");
        }
    }
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn gs_energy_reports_density_and_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(dir.path(), &["gs-energy", "--d", "3"]));
    let r = &v["result"];
    assert!((r["fixed_point_density"].as_f64().unwrap() + 1.24222).abs() < 5e-4);
    assert!((r["overlap_per_site"].as_f64().unwrap() - 0.998).abs() < 0.002);
}
