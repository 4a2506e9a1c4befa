//! End-to-end runs of the `klab` binary.

use std::path::Path;
use std::process::{Command, Output};

use klab::constants::{eta_and_c, ConstantsTable, ModelParams, RegionBounds};

fn klab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klab"))
        .args(args)
        .env_remove("KLAB_THREADS")
        .output()
        .expect("spawn klab")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn region_reports_the_roots() {
    let out = stdout(&klab(&["region", "--d", "3", "--alpha", "0.25"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let lo = v["s_hat_minus"].as_f64().unwrap();
    assert!((lo - 1.05218).abs() < 1e-5, "{lo}");
    assert!(v["provenance"].as_str().unwrap().starts_with("klab "));
}

#[test]
fn constants_json_round_trips() {
    let out = stdout(&klab(&["constants", "--d", "3", "--s", "1.25", "--alpha", "0.25"]));
    let table: ConstantsTable = serde_json::from_str(&out).unwrap();
    let bounds: RegionBounds = serde_json::from_str(&out).unwrap();
    assert_eq!(bounds.d, 3);
    let p = ModelParams::new(3, 1.25, 0.25).unwrap();
    assert_eq!(table.params, p);
    let (eta, _) = eta_and_c(&p).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v.to_string().contains(&format!("{eta}")));
}

#[test]
fn out_of_range_parameters_exit_with_status_2() {
    let o = klab(&["constants", "--d", "3", "--s", "1.25", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("violates 0 < α < 1"), "{}", stderr(&o));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "a.cfg", "d = 3\ns = 1.25\nalpha = 0.25\nbogus = 1\n");
    let o = klab(&["constants", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let missing = write(dir.path(), "b.cfg", "d = 2\nn_max = 4\ns = 0.75\nalpha = 0.5\nnu = 0\n");
    let o = klab(&["simulate", "--config", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt"), "{}", stderr(&o));

    let no_eq = write(dir.path(), "c.cfg", "d = 3\n\n# note\ns 1.25\n");
    let o = klab(&["constants", "--config", &no_eq]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn verify_bound_table() {
    let out = stdout(&klab(&[
        "verify-bound", "--d", "3", "--s", "1.25", "--alpha", "0.25", "--lambdas", "8,16,32", "--format", "csv",
    ]));
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# klab "));
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(cols[0], "lambda");
    for c in ["i_tra", "i_str", "i_mix", "h_form"] {
        assert!(cols.contains(&c), "{cols:?}");
    }
    let lambdas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(lambdas, vec![8.0, 16.0, 32.0]);
}

#[test]
fn reruns_are_byte_identical_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = out.to_str().unwrap();
    let args = ["constants", "--d", "4", "--s", "1.6", "--alpha", "0.3", "-o", o];
    stdout(&klab(&args));
    let first = std::fs::read(&out).unwrap();
    stdout(&klab(&args));
    assert_eq!(first, std::fs::read(&out).unwrap());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.cfg",
        "d = 2\nn_max = 3\ns = 0.75\nalpha = 0.5\nnu = 0.01\ndt = 1e-4\nt_final = 0.002\n\
         n_paths = 4\noutput_times = 0, 0.001, 0.002\ninit = broadband 1.5\n",
    );
    let a = stdout(&klab(&["simulate", "--config", &cfg]));
    let b = stdout(&klab(&["simulate", "--config", &cfg]));
    assert_eq!(a, b);
    assert!(a.starts_with("# klab "));
    assert!(a.contains("seed=0"));
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let c = stdout(&klab(&["simulate", "--config", &cfg, "--seed", "5"]));
    assert_ne!(a, c);

    let odd = write(dir.path(), "odd.cfg", &std::fs::read_to_string(&cfg).unwrap().replace("n_paths = 4", "n_paths = 3"));
    let o = klab(&["simulate", "--config", &odd]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));

    let fast = write(dir.path(), "fast.cfg", &std::fs::read_to_string(&cfg).unwrap().replace("dt = 1e-4", "dt = 0.1"));
    let o = klab(&["simulate", "--config", &fast]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6") && stderr(&o).contains("stability guard"), "{}", stderr(&o));
}

#[test]
fn mellin_check_agrees() {
    let out = stdout(&klab(&["mellin-check", "--family", "lorentzian", "--params", "1.5", "--z", "1.2,0.7"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["rel_discrepancy"].as_f64().unwrap() < 1e-7, "{out}");
}

#[test]
fn report_writes_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("rep");
    stdout(&klab(&[
        "report", "--d", "3", "--s", "1.25", "--alpha", "0.25", "--n-max-list", "2,3", "--out-dir",
        target.to_str().unwrap(),
    ]));
    for f in ["region.dat", "symbol.dat", "lattice.dat"] {
        let text = std::fs::read_to_string(target.join(f)).unwrap();
        assert!(text.starts_with("# klab "), "{f}");
    }
}

#[test]
fn thread_cap_is_validated() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_klab"))
            .args(["region", "--d", "3", "--alpha", "0.25"])
            .env("KLAB_THREADS", v)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert_eq!(run("zero").status.code(), Some(2));
}
