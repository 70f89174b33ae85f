use std::process::Command;

const NORM: &str = r#"command = "norm"
seed = 3

[params]
n = 2
s = 0.5
p = 4.0
q = 2.0
scaling_invariant = true

[domain]
side_length = 4.0
resolution = 32

[construction]
kind = "tent"
center = [0.0, 0.0]
radius = 1.0
amplitude = 1.0
"#;

fn besov_lab(manifest: &std::path::Path, out: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_besov-lab"))
        .arg("--manifest")
        .arg(manifest)
        .arg("--out-dir")
        .arg(out)
        .arg("--sequential")
        .output()
        .unwrap()
}

#[test]
fn norm_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("norm.toml");
    std::fs::write(&m, NORM).unwrap();
    let out = besov_lab(&m, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("norm.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("construction,"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "tent");
    for v in &row[6..9] {
        assert!(v.parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.toml");
    std::fs::write(&m, NORM.replace("s = 0.5", "s = 1.5")).unwrap();
    let out = besov_lab(&m, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params: s out of (0,1)"));

    std::fs::write(&m, NORM.replace("radius = 1.0", "radius = 1.5")).unwrap();
    let out = besov_lab(&m, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail-correction"));

    let out = besov_lab(&dir.path().join("missing.toml"), dir.path());
    assert_eq!(out.status.code(), Some(4));

    std::fs::write(&m, "command = [").unwrap();
    let out = besov_lab(&m, dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dichotomy_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("d.toml");
    let text = NORM
        .replace("command = \"norm\"", "command = \"dichotomy\"")
        .replace("resolution = 32", "resolution = 64")
        .split("[construction]")
        .next()
        .unwrap()
        .to_string()
        + "[map]\nkind = \"radial-stretch\"\nalpha = 2.0\n\n[dichotomy]\nlevels = 2\nqs = [2.0, 4.0]\n";
    std::fs::write(&m, text).unwrap();
    let out = besov_lab(&m, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("dichotomy.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "family,alpha,s,q,p,N_lv,norm_G,norm_GoPhi,ratio,seed"
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
}
