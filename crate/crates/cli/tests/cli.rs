use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn dilcurve(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dilcurve"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: Option<&str>) -> String {
    let out = dilcurve(args, stdin);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], stdin: Option<&str>) -> i32 {
    dilcurve(args, stdin).status.code().unwrap()
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

// A non-Toeplitz SPD matrix with all lags present.
const MATRIX: &str = "1,0.6,0.2,-0.1\n0.6,1,0.4,0.15\n0.2,0.4,1,0.3\n-0.1,0.15,0.3,1\n";

#[test]
fn pipe_round_trip() {
    let params = ok(&["parcors", "-"], Some(MATRIX));
    let curve = ok(&["dilate", "-", "-q"], Some(&params));
    let back = ok(&["reconstruct", "-", "-q"], Some(&curve));
    let want = parse_csv(MATRIX);
    let got = parse_csv(&back);
    for (a, b) in want.iter().flatten().zip(got.iter().flatten()) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn identity_gives_zero_parameters() {
    let params = ok(&["parcors", "-"], Some("1,0,0\n0,1,0\n0,0,1\n"));
    let v: serde_json::Value = serde_json::from_str(&params).unwrap();
    assert_eq!(v["n"], 3);
    for triple in v["gamma"].as_array().unwrap() {
        assert_eq!(triple[2].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn ar_parameters_through_csv() {
    let r = ok(&["synth", "ar", "--coefficient", "0.5", "--n", "5"], None);
    let params = ok(&["--format", "csv", "parcors", "-"], Some(&r));
    let mut lines = params.lines();
    assert_eq!(lines.next(), Some("i,j,gamma,n=5"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let expected = if f[1] - f[0] == 1.0 { 0.5 } else { 0.0 };
        assert!((f[2] - expected).abs() < 1e-12, "{line}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["parcors", "-"], Some("1,2\n2,1\n")), 2);
    assert_eq!(code(&["parcors", "-"], Some("1,0.5\n0.4,1\n")), 2);
    let params = ok(&["parcors", "-"], Some(MATRIX));
    let curve = ok(&["dilate", "-", "--dim", "2", "-q"], Some(&params));
    assert_eq!(
        code(&["reconstruct", "-", "--max-lag", "2"], Some(&curve)),
        4
    );
    assert_eq!(code(&["dilate", "-", "--dim", "7"], Some(&params)), 4);
    assert_eq!(code(&["parcors", "/no/such/file.csv"], None), 5);
    assert_eq!(code(&["parcors", "-"], Some("1,x\n")), 5);
}

#[test]
fn degenerate_curve_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // a single-point curve has no velocity
    let c = write(dir.path(), "c.json", "[[[1,0],[0,1]]]");
    assert_eq!(code(&["dist", &c, &c], None), 3);
}

#[test]
fn distances_between_copies() {
    let dir = tempfile::tempdir().unwrap();
    let params = ok(&["parcors", "-"], Some(MATRIX));
    let curve = ok(&["dilate", "-", "--dim", "2", "-q"], Some(&params));
    let a = write(dir.path(), "a.json", &curve);
    let b = write(dir.path(), "b.json", &curve);
    let single = ok(&["dist", &a], None);
    assert_eq!(single.lines().nth(1).unwrap().split(',').nth(1), Some("0"));
    let table = ok(&["dist", "--curve", &a, &b], None);
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert!(row[2].parse::<f64>().unwrap().abs() < 1e-12);
    let json = ok(&["--format", "json", "dist", &a, &b], None);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["distances"][0][1].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn mean_of_copies_is_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let params = ok(&["parcors", "-"], Some(MATRIX));
    let curve = ok(&["dilate", "-", "--dim", "2", "-q"], Some(&params));
    let a = write(dir.path(), "a.json", &curve);
    let mean = ok(&["mean", &a, &a, "-q"], None);
    let m = write(dir.path(), "m.json", &mean);
    let d = ok(&["dist", "--curve", &a, &m], None);
    let row: Vec<&str> = d.lines().nth(1).unwrap().split(',').collect();
    assert!(row[2].parse::<f64>().unwrap() < 1e-9, "{d}");
}

#[test]
fn sequence_directory_input() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    fs::create_dir(&seq).unwrap();
    // W = [[g, D], [D, -g]] with g = 0.6 reproduces an AR(1) row at lag 1
    for k in 0..3 {
        write(&seq, &format!("W_{k:04}.csv"), "0.6,0.8\n0.8,-0.6\n");
    }
    let out = ok(&["reconstruct", seq.to_str().unwrap(), "-q"], None);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "1,0.6,NaN,NaN");
}

#[test]
fn realizations_to_matrix() {
    let data = ok(
        &[
            "synth",
            "pc",
            "--coefficient",
            "0.5",
            "--period",
            "4",
            "--n",
            "6",
            "--count",
            "500",
            "--seed",
            "3",
        ],
        None,
    );
    assert_eq!(data.lines().count(), 500);
    let again = ok(
        &[
            "synth",
            "pc",
            "--coefficient",
            "0.5",
            "--period",
            "4",
            "--n",
            "6",
            "--count",
            "500",
            "--seed",
            "3",
        ],
        None,
    );
    assert_eq!(data, again);
    let r = parse_csv(&ok(&["estimate", "-", "-q"], Some(&data)));
    assert_eq!(r.len(), 6);
    assert!(r.iter().enumerate().all(|(i, row)| row[i] == 1.0));
}
