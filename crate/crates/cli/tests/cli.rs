use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mirrorfreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mirrorfreq"))
        .args(args)
        .env_remove("MIRRORFREQ_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn oracle_sweep_writes_files_and_reports_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = mirrorfreq(&["sweep", "--case", "oracle-rl", "--grid", "10,130", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("oracle check: max |Z| error"));

    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 7 + 2 * 2 * 8);
    assert!(header.contains(&"load_znn_ang_deg"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1.00000000000e1");
    assert_eq!(lines.count(), 1);

    let m = manifest(&out);
    assert_eq!(m["config_path"], "preset:oracle-rl");
    assert_eq!(m["files"], serde_json::json!(["sweep.json", "sweep.csv"]));
    assert_eq!(m["case"]["name"], "oracle-rl");
}

#[test]
fn sweep_json_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let dir = tmp.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_mirrorfreq"))
            .args(["sweep", "--case", "oracle-rl", "--grid", "4,30:40:5", "--injection", "series"])
            .args(["--out", dir.to_str().unwrap()])
            .env("MIRRORFREQ_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        (fs::read(dir.join("sweep.json")).unwrap(), fs::read(dir.join("sweep.csv")).unwrap())
    };
    assert_eq!(run("a", "1"), run("b", "3"));
}

#[test]
fn case_file_round_trips_through_dump_config() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("oracle.json");
    let o = mirrorfreq(&["dump-config", "--case", "oracle-rl", "--out", file.to_str().unwrap()]);
    assert!(o.status.success());
    let out = tmp.path().join("run");
    let o = mirrorfreq(&[
        "sweep",
        "--case",
        file.to_str().unwrap(),
        "--grid",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(manifest(&out)["config_path"], file.to_str().unwrap());
}

#[test]
fn invalid_case_file_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.json");
    let o = mirrorfreq(&["dump-config", "--case", "oracle-rl"]);
    let text = stdout(&o).replace("\"r\": 0.02", "\"r\": -0.02");
    fs::write(&file, text).unwrap();
    let o = mirrorfreq(&["sweep", "--case", file.to_str().unwrap(), "--grid", "20"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`model.r`"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let o = mirrorfreq(&["sweep", "--case", "oracle-rl", "--grid", "5:1:1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("a <= b"));
    let o = mirrorfreq(&["sweep", "--case", "nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_mirrorfreq"))
        .args(["dump-config"])
        .env("MIRRORFREQ_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MIRRORFREQ_THREADS"));
}

#[test]
fn validate_passes_and_catches_faults() {
    let o = mirrorfreq(&["validate", "--samples", "300"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("6/6 checks passed"));

    let o = mirrorfreq(&["validate", "--samples", "300", "--fault", "az"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] determinant equality"));

    let o = mirrorfreq(&["validate", "--samples", "300", "--fault", "oracle-bias"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] oracle extraction"));
}

#[test]
fn gnc_reads_a_saved_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep_dir = tmp.path().join("sweep");
    let o = mirrorfreq(&["sweep", "--case", "oracle-rl", "--grid", "2:20:2", "--out", sweep_dir.to_str().unwrap()]);
    assert!(o.status.success());
    let out = tmp.path().join("gnc");
    let o = mirrorfreq(&[
        "gnc",
        "--sweep",
        sweep_dir.join("sweep.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("gnc.json")).unwrap()).unwrap();
    let domains = report["domains"].as_array().unwrap();
    assert_eq!(domains.len(), 3);
    assert!(domains.iter().all(|d| d["verdict"]["status"] == "Stable"));
    let loci = fs::read_to_string(out.join("loci.csv")).unwrap();
    assert_eq!(loci.lines().count(), 1 + 3 * 10);
    assert!(!out.join("sweep.json").exists());
}

#[test]
fn coarse_grid_near_resonance_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mirrorfreq(&[
        "gnc",
        "--case",
        "A2",
        "--grid",
        "2,20,65,70,75,200,1000",
        "--domain",
        "dq",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid insufficient"), "{}", stderr(&o));
    assert!(stderr(&o).contains("refine the grid"));
}

#[test]
fn step_sim_reports_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ramp");
    let o = mirrorfreq(&["step-sim", "--case", "A1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("at 1.1 pu: Decaying"), "{s}");
    assert!(s.contains("diverged at"), "{s}");
    let csv = fs::read_to_string(out.join("step.csv")).unwrap();
    assert!(csv.starts_with("t_s,i_sd_pu,i_sq_pu,v_dc_pu\n"));

    let out = tmp.path().join("flat");
    let o = mirrorfreq(&["step-sim", "--case", "A1", "--schedule", "0:0", "--end", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Steady"));
    assert!(stdout(&o).contains("no divergence"));

    let o = mirrorfreq(&["step-sim", "--case", "oracle-rl"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_and_mfd_on_mfd_case() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let o = mirrorfreq(&["compare-original", "--case", "B", "--grid", "20,600", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = manifest(&out)["files"].clone();
    assert_eq!(
        files,
        serde_json::json!(["sweep_shunt.json", "sweep_shunt.csv", "sweep_series.json", "sweep_series.csv", "original.csv"])
    );
    let rows = fs::read_to_string(out.join("original.csv")).unwrap();
    // two injections x two frequencies x two sides
    assert_eq!(rows.lines().count(), 1 + 8);

    let out = tmp.path().join("mfd");
    let o = mirrorfreq(&[
        "mfd-check",
        "--sweep",
        tmp.path().join("cmp/sweep_shunt.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("Source: MFD at every point") && s.contains("Load: MFD at every point"), "{s}");
}
