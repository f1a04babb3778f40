use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_interface-lab"));
    c.env_remove("INTERFACE_LAB_THREADS");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn nonpositive_eps_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    for eps in ["eps=0", "eps=-0.1", "eps=0.1,-0.05"] {
        let o = run_in(tmp.path(), &["profile", "--set", eps, "--out", "run"]);
        assert_eq!(code(&o), 2, "{eps}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));
        assert!(!tmp.path().join("run").exists());
    }
}

#[test]
fn malformed_config_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.txt"), "eps = 0.1\nsurface.shape = torus\n").unwrap();
    let o = run_in(tmp.path(), &["surface", "--config", "bad.txt", "--out", "run"]);
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("run").exists());
    let o = run_in(tmp.path(), &["energy-check", "--run", "missing"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_cap_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .current_dir(tmp.path())
        .env("INTERFACE_LAB_THREADS", "zero")
        .args(["profile", "--out", "run"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn profile_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["profile", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let (header, rows) = csv(&run.join("profile.csv"));
    assert_eq!(header, ["zeta", "w", "w_z", "w_zz"]);
    assert_eq!(rows.len(), 4096);
    for cell in &rows[100] {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
    // the table agrees with tanh(ζ/√2) to the gate
    for r in &rows {
        let z: f64 = r[0].parse().unwrap();
        let w: f64 = r[1].parse().unwrap();
        assert!((w - (z / 2f64.sqrt()).tanh()).abs() <= 1e-8);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["config.txt", "profile.csv", "profile.json"]);
    for f in files {
        let bytes = fs::read(run.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn identical_configs_give_identical_hashes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "simulate",
        "--set",
        "surface.shape=plane",
        "--set",
        "surface.t=0.25",
        "--set",
        "surface.t1=0.25",
        "--set",
        "eps=0.1,0.05",
        "--out",
        "run",
    ];
    let oa = bin()
        .current_dir(a.path())
        .env("INTERFACE_LAB_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    let ob = bin()
        .current_dir(b.path())
        .env("INTERFACE_LAB_THREADS", "4")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&ob), 0);
    let ma = fs::read_to_string(a.path().join("run/manifest.json")).unwrap();
    let mb = fs::read_to_string(b.path().join("run/manifest.json")).unwrap();
    assert_eq!(ma, mb);
    assert!(ma.contains("eps-0.05/snap-0000.bin"));
}

#[test]
fn snapshot_header_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        &[
            "simulate",
            "--set",
            "surface.shape=plane",
            "--set",
            "surface.t=0.1",
            "--set",
            "surface.t1=0.1",
            "--set",
            "eps=0.1",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(tmp.path().join("run/eps-0.1/snap-0000.bin")).unwrap();
    assert_eq!(&bytes[..8], b"ILSNAP01");
    let word = |k: usize| <[u8; 8]>::try_from(&bytes[8 + 8 * k..16 + 8 * k]).unwrap();
    assert_eq!(u64::from_le_bytes(word(0)), 3);
    let cols = u64::from_le_bytes(word(1)) as usize;
    assert_eq!(f64::from_le_bytes(word(2)), 0.0);
    assert_eq!(f64::from_le_bytes(word(3)), 0.1);
    assert_eq!(bytes.len(), 40 + 3 * 8 * cols);
    // first node of the x row is the left end of [-2, 2]
    assert_eq!(f64::from_le_bytes(word(4)), -2.0);
    let (header, rows) = csv(&tmp.path().join("run/eps-0.1/track.csv"));
    assert_eq!(header, ["t", "crossings", "interface", "reference"]);
    assert!(rows.iter().all(|r| r[1] == "1"));
}

#[test]
fn residual_scan_slopes_pass_the_gate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        &[
            "residual-scan",
            "--set",
            "eps=0.16,0.08,0.04",
            "--set",
            "ansatz.k=2",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&tmp.path().join("run/slopes.csv"));
    assert_eq!(header, ["k", "slope", "intercept", "required", "pass"]);
    assert_eq!(rows.len(), 3);
    for (k, r) in rows.iter().enumerate() {
        let slope: f64 = r[1].parse().unwrap();
        assert!(slope >= k as f64 + 2.7, "k={k} slope {slope}");
        assert_eq!(r[4], "true");
    }
    let (_, scan) = csv(&tmp.path().join("run/scan.csv"));
    assert_eq!(scan.len(), 9);
}

#[test]
fn fermi_check_on_the_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["fermi-check", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/fermi.json")).unwrap()).unwrap();
    assert_eq!(v["passes"], true);
    assert!(v["max_cross_term"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn jacobi_requires_the_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        &[
            "jacobi",
            "--set",
            "surface.shape=plane",
            "--set",
            "surface.t1=0.5",
            "--out",
            "run",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn acceptance_subset_reports_each_criterion() {
    let o = bin()
        .args(["acceptance", "--quick", "--only", "1,2,4"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
    assert!(out.contains("3 of 3 criteria passed"));
    let o = bin().args(["acceptance", "--only", "11"]).output().unwrap();
    assert_eq!(code(&o), 2);
}
