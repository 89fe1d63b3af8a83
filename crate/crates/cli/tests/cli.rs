use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bloch-fermi"));
    c.env_remove("BLOCH_FERMI_THREADS");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn bands_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model=harper p=1 q=3\ntask=bands task=ids(-3.5,3.5,50)\n");
    let out = dir.path().join("out");
    let status = bin()
        .arg(&cfg)
        .args(["--grid", "8", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let bands = fs::read_to_string(out.join("bands.csv")).unwrap();
    assert!(bands.starts_with("k1,k2,E0,E1,E2\n"));
    assert_eq!(bands.lines().count(), 1 + 64);
    assert_eq!(fs::read_to_string(out.join("ids.csv")).unwrap().lines().count(), 1 + 51);
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model=lieb grid_N=8 task=verify\n");
    let status = bin().arg(&cfg).arg("--out").arg(dir.path().join("a")).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let cfg = write_config(
        dir.path(),
        "model=harper p=1 q=2 grid_N=8 broken_gauge=true task=verify\n",
    );
    let out = bin().arg(&cfg).arg("--out").arg(dir.path().join("b")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("periodicity_generators"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model=lieb\ngrid_N=0\ntask=bands\n");
    let out = bin().arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("grid_N"), "{err}");

    let cfg = write_config(dir.path(), "model=lieb task=bands\n");
    let out = bin().arg(&cfg).args(["--grid", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg(&cfg).args(["--format", "xml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg(dir.path().join("missing.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let cfg = write_config(dir.path(), "model=free_chain grid_N=4 task=bands\n");
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = bin().arg(&cfg).arg("--out").arg(blocker.join("x")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn thread_env_and_flag_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model=square_laplacian grid_N=16 task=bands task=fermi(3)\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let s1 = bin()
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .env("BLOCH_FERMI_THREADS", "1")
        .status()
        .unwrap();
    let s2 = bin()
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .args(["--threads", "4"])
        .status()
        .unwrap();
    assert!(s1.success() && s2.success());
    for name in ["bands.csv", "bands_spectrum.csv", "fermi.csv", "fermi_points.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let meta = fs::read_to_string(a.join("bands.meta.json")).unwrap();
    assert!(meta.contains("\"threads\": 1"));
}

#[test]
fn json_format_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model=free_chain grid_N=4 task=lift(0,0.25)\n");
    let out = dir.path().join("o");
    let status = bin()
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--format", "json"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("lift.json")).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
}
