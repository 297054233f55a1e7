use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn lagcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagcal"))
        .args(args)
        .env_remove("LAGCAL_OUT")
        .output()
        .unwrap()
}

fn run_in(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lagcal(&args)
}

/// Small copy of the bundled quartic config in `dir`.
fn small_config(dir: &Path, poly: &str, degree_note: &str) -> PathBuf {
    fs::write(dir.join("curve.poly"), poly).unwrap();
    let cfg = format!(
        "# {degree_note}\n[hypersurface]\npolynomial = \"curve.poly\"\n\n[sampling]\ncomplex = 4000\nreal = 200\nseed = 5\n\n[bergman]\nm_min = 1\nm_max = 2\n\n[homotopy]\nm = 1\nvertices = 128\nsteps = 4\ncount = 3\nmax_amplitude = 0.3\nguard_floor = 1e-3\n"
    );
    let path = dir.join("small.toml");
    fs::write(&path, cfg).unwrap();
    path
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

const QUARTIC: &str = "num_vars 3\ndegree 4\nterm 4 0 0 1 0\nterm 0 4 0 1 0\nterm 0 0 4 -1 0\n";

#[test]
fn homotopy_on_the_bundled_config_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in("homotopy", &data("quartic.toml"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("20/20 comparisons satisfied"));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("homotopy.json")).unwrap()).unwrap();
    assert_eq!(doc["details"]["passed"], 20);
    assert!(doc["claims"].as_array().unwrap().iter().all(|c| c["tolerance"].is_number() && c["samples"].as_u64().unwrap() > 0));
    assert!(out.path().join("homotopy_19.csv").is_file());
}

#[test]
fn cubic_basis_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "num_vars 3\ndegree 3\nterm 3 0 0 1 0\nterm 0 3 0 1 0\nterm 0 0 3 1 0\n", "cubic");
    let o = run_in("basis", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("canonical bundle not positive"));
}

#[test]
fn identical_seeds_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), QUARTIC, "quartic");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for cmd in ["sample", "basis", "bergman", "calibrate", "homotopy", "report"] {
        assert_eq!(run_in(cmd, &cfg, &a, &[]).status.code(), Some(0), "{cmd}");
        assert_eq!(run_in(cmd, &cfg, &b, &["--threads", "1"]).status.code(), Some(0), "{cmd}");
    }
    assert_eq!(files(&a), files(&b));
    assert_eq!(run_in("sample", &cfg, &c, &["--seed", "6"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("pool_complex.csv")).unwrap(), fs::read(c.join("pool_complex.csv")).unwrap());
}

#[test]
fn report_aggregates_claims() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), QUARTIC, "quartic");
    let out = dir.path().join("out");
    assert_eq!(run_in("report", &cfg, &out, &[]).status.code(), Some(3));
    assert_eq!(run_in("sample", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run_in("basis", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run_in("report", &cfg, &out, &[]).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.starts_with("command,name,value,tolerance,samples,pass"));
    assert!(csv.lines().any(|l| l.starts_with("basis,dimension deficit m=2,0e0,0e0,6,true")));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed"], 0);
    assert_eq!(summary["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn output_directory_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), QUARTIC, "quartic");
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_lagcal"))
        .args(["basis", "--config", cfg.to_str().unwrap()])
        .env("LAGCAL_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_out.join("basis.json").is_file());
    // without an override the config's directory is used
    assert_eq!(lagcal(&["basis", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert!(dir.path().join("lagcal-out").join("basis.json").is_file());
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), QUARTIC, "quartic");
    let text = fs::read_to_string(&cfg).unwrap();
    let out = dir.path().join("out");
    for (from, to) in [("complex = 4000", "complex = 50"), ("m_min = 1", "m_min = 0"), ("curve.poly", "missing.poly"), ("seed = 5", "seed = 5\nextra = 1")] {
        let bad = dir.path().join("bad.toml");
        fs::write(&bad, text.replace(from, to)).unwrap();
        assert_eq!(run_in("sample", &bad, &out, &[]).status.code(), Some(3), "{to}");
    }
    assert_eq!(lagcal(&["sample"]).status.code(), Some(3));
    assert_eq!(lagcal(&["nonsense"]).status.code(), Some(3));
}
