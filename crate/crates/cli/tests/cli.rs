use std::fs;
use std::path::Path;
use std::process::Command;

fn lentpart() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lentpart"))
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SURVEY: &str = r#"
[model]
family = "uniform"
rate = 20.0
lo = -0.9
hi = 0.9

[functional]
label = "pair_doleans"

[experiment]
kind = "survey"
nsamples = 400
seed = 7
"#;

const IDENTITY_ZERO: &str = r#"
[model]
family = "symmetric_power"
c = 1.0
a = 0.5
epsilon = 0.05

[experiment]
kind = "identity"
probe = "zero"
nsamples = 200
"#;

#[test]
fn identity_with_zero_probe_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.toml", IDENTITY_ZERO);
    let out = lentpart().args(["run"]).arg(&cfg).arg("--out-dir").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1/1 checks passed"));
}

#[test]
fn gamma_on_fixture_prints_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        "[model]\nfamily = \"uniform\"\nrate = 2.0\nlo = -0.9\nhi = 0.9\n[functional]\nlabel = \"pair_doleans\"\n[experiment]\nkind = \"gamma\"\nconfiguration = \"fixture:example1\"\n",
    );
    let out = lentpart().arg("run").arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout.contains("[[0.290000000000, 0.260000000000], [0.260000000000, 0.250000000000]]"), "{stdout}");
    assert!(stdout.contains("det = 0.004900000000"));
}

#[test]
fn malformed_config_exits_2_and_registry_miss_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model\nfamily = 1\n");
    let out = lentpart().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let miss = write(dir.path(), "miss.toml", &SURVEY.replace("pair_doleans", "unknown"));
    assert_eq!(lentpart().arg("run").arg(&miss).arg("--out-dir").arg(dir.path()).output().unwrap().status.code(), Some(3));
    assert_eq!(lentpart().args(["list", "colors"]).output().unwrap().status.code(), Some(3));
}

#[test]
fn list_registries() {
    let text = |r: &str| String::from_utf8(lentpart().args(["list", r]).output().unwrap().stdout).unwrap();
    let f = text("functionals");
    for label in ["doleans", "pair_doleans", "area", "time_integral", "gou", "sup", "nearest", "jump_sde"] {
        assert!(f.lines().any(|l| l.split_whitespace().next() == Some(label)), "{label}");
    }
    let g = text("gammas");
    for label in ["diag_x2", "identity", "polar", "curve"] {
        assert!(g.contains(label));
    }
    assert_eq!(text("experiments").lines().count(), 6);
}

#[test]
fn fixtures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = lentpart().arg("fixtures").arg("--out-dir").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let file = fs::File::open(dir.path().join("example1.txt")).unwrap();
    let cfg = lentpart::configuration::read_configuration(std::io::BufReader::new(file)).unwrap();
    assert_eq!(cfg.len(), 2);
    assert_eq!(cfg.atoms()[1].mark, vec![-0.2]);
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn artifacts_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SURVEY);
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        let status = lentpart().arg("run").arg(&cfg).args(["--jobs", jobs]).arg("--out-dir").arg(&out_dir).output().unwrap().status;
        assert!(status.code().is_some());
        runs.push(artifacts(&out_dir));
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}
