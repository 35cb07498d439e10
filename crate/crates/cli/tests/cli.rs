use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn iwasawa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwasawa"))
        .args(args)
        .env_remove("IWASAWA_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes a real row-major matrix in the shared JSON format.
fn write_matrix(dir: &TempDir, name: &str, rows: usize, cols: usize, entries: &[(f64, f64)]) -> PathBuf {
    let data: Vec<[f64; 2]> = entries.iter().map(|&(re, im)| [re, im]).collect();
    let json = serde_json::json!({ "rows": rows, "cols": cols, "data": data });
    let path = dir.path().join(name);
    std::fs::write(&path, json.to_string()).unwrap();
    path
}

fn real(values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().map(|&v| (v, 0.0)).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Largest entry magnitude of a matrix JSON value.
fn max_abs(m: &Value) -> f64 {
    m["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|z| z[0].as_f64().unwrap().hypot(z[1].as_f64().unwrap()))
        .fold(0.0, f64::max)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn factorize_identity() {
    let dir = TempDir::new().unwrap();
    let g = write_matrix(
        &dir,
        "g.json",
        3,
        3,
        &real(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
    );
    let x0 = write_matrix(
        &dir,
        "x0.json",
        3,
        3,
        &real(&[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]),
    );
    let out = dir.path().join("f.json");
    let run = iwasawa(&["factorize", "--input", s(&g), "--x0", s(&x0), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let f = read_json(&out);
    for key in ["k", "a", "n"] {
        assert_eq!(f[key]["rows"], 3);
    }
    assert!(f["residuals"]["reconstruction"].as_f64().unwrap() <= 1e-14);
    assert!(f["residuals"]["unitarity"].as_f64().unwrap() <= 1e-14);
    assert!(stdout(&run).contains("reconstruction"));
}

#[test]
fn factorize_with_family_checks_membership() {
    let dir = TempDir::new().unwrap();
    let c = 0.6f64;
    let sn = 0.8f64;
    // A real rotation times a real shear: every factor stays real.
    let g = write_matrix(&dir, "g.json", 2, 2, &real(&[c, c * 0.5 - sn, sn, sn * 0.5 + c]));
    let x0 = write_matrix(&dir, "x0.json", 2, 2, &real(&[2.0, 0.0, 0.0, 1.0]));
    let run = iwasawa(&["factorize", "--input", s(&g), "--x0", s(&x0), "--family", "ai"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let f: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(max_abs(&f["k"]) > 0.5);
    assert!(stderr(&run).contains("k.real_form"));

    let imag = write_matrix(&dir, "i.json", 2, 2, &[(1.0, 0.5), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
    let run = iwasawa(&["factorize", "--input", s(&imag), "--x0", s(&x0), "--family", "ai"]);
    assert_eq!(code(&run), 2);
}

#[test]
fn factorize_singular() {
    let dir = TempDir::new().unwrap();
    let g = write_matrix(&dir, "g.json", 2, 2, &real(&[1.0, 2.0, 2.0, 4.0]));
    let x0 = write_matrix(&dir, "x0.json", 2, 2, &real(&[2.0, 0.0, 0.0, 1.0]));
    let run = iwasawa(&["factorize", "--input", s(&g), "--x0", s(&x0)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("Singular"), "{}", stderr(&run));
}

#[test]
fn factorize_missing_x0() {
    let dir = TempDir::new().unwrap();
    let g = write_matrix(&dir, "g.json", 1, 1, &real(&[1.0]));
    let run = iwasawa(&["factorize", "--input", s(&g)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("Usage"));
    assert!(stderr(&run).contains("--x0"));
}

#[test]
fn factorize_reports_bad_file() {
    let dir = TempDir::new().unwrap();
    let x0 = write_matrix(&dir, "x0.json", 1, 1, &real(&[1.0]));
    let missing = dir.path().join("nope.json");
    let run = iwasawa(&["factorize", "--input", s(&missing), "--x0", s(&x0)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("--input"));
    assert!(stderr(&run).contains("nope.json"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"rows\": 2}").unwrap();
    let run = iwasawa(&["factorize", "--input", s(&broken), "--x0", s(&x0)]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("broken.json"));
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(code(&iwasawa(&["verify", "--family", "a", "--dim", "4", "--bogus"])), 1);
    assert_eq!(code(&iwasawa(&["transmogrify"])), 1);
    assert_eq!(code(&iwasawa(&["--help"])), 0);
}

#[test]
fn decompose_skew_hermitian() {
    let dir = TempDir::new().unwrap();
    let x = write_matrix(
        &dir,
        "x.json",
        2,
        2,
        &[(0.0, 0.5), (1.0, 2.0), (-1.0, 2.0), (0.0, -0.3)],
    );
    let x0 = write_matrix(&dir, "x0.json", 2, 2, &real(&[1.0, 0.5, 0.5, -1.0]));
    let out = dir.path().join("d.json");
    let run = iwasawa(&["decompose", "--input", s(&x), "--x0", s(&x0), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let d = read_json(&out);
    assert!(max_abs(&d["a_part"]) <= 1e-14);
    assert!(max_abs(&d["n_part"]) <= 1e-14);
    assert!(max_abs(&d["k_part"]) > 1.0);
    assert!(d["residuals"]["reconstruction"].as_f64().unwrap() <= 1e-14);
}

#[test]
fn decompose_strictly_upper() {
    let dir = TempDir::new().unwrap();
    let x = write_matrix(
        &dir,
        "x.json",
        3,
        3,
        &[
            (0.0, 0.0),
            (1.0, 1.0),
            (2.0, 0.0),
            (0.0, 0.0),
            (0.0, 0.0),
            (-3.0, 0.5),
            (0.0, 0.0),
            (0.0, 0.0),
            (0.0, 0.0),
        ],
    );
    let x0 = write_matrix(
        &dir,
        "x0.json",
        3,
        3,
        &real(&[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]),
    );
    let out = dir.path().join("d.json");
    let run = iwasawa(&["decompose", "--input", s(&x), "--x0", s(&x0), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let d = read_json(&out);
    assert!(max_abs(&d["k_part"]) <= 1e-14);
    assert!(max_abs(&d["a_part"]) <= 1e-14);
}

#[test]
fn decompose_rejects_non_square() {
    let dir = TempDir::new().unwrap();
    let x = write_matrix(&dir, "x.json", 2, 3, &real(&[1.0; 6]));
    let x0 = write_matrix(&dir, "x0.json", 2, 2, &real(&[2.0, 0.0, 0.0, 1.0]));
    let run = iwasawa(&["decompose", "--input", s(&x), "--x0", s(&x0)]);
    assert_eq!(code(&run), 1);
}

fn growth_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|line| line.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn hilbert_single_size() {
    let run = iwasawa(&["demo-hilbert", "--sizes", "16"]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let rows = growth_rows(&stdout(&run));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 16.0);
    assert!((rows[0][6] - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-6);
}

#[test]
fn hilbert_default_sizes_grow() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("growth.csv");
    let run = iwasawa(&["demo-hilbert", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let rows = growth_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 7);
    let at_32 = rows.iter().find(|r| r[0] == 32.0).unwrap()[3];
    assert!(rows.last().unwrap()[3] >= 1.4 * at_32);
    assert!(stdout(&run).contains("rho_inf"));
}

#[test]
fn hilbert_rejects_bad_sizes() {
    for sizes in ["0", "16,x", "", "1"] {
        let run = iwasawa(&["demo-hilbert", "--sizes", sizes]);
        assert_eq!(code(&run), 1, "sizes {sizes:?}");
    }
}

#[test]
fn verify_dimension_constraint() {
    let run = iwasawa(&["verify", "--family", "bii", "--dim", "6"]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("dimension must be divisible by 4"));
}

#[test]
fn verify_families_pass() {
    let run = iwasawa(&["verify", "--family", "a", "--dim", "8", "--trials", "50", "--seed", "1"]);
    assert_eq!(code(&run), 0, "{}{}", stdout(&run), stderr(&run));
    let run = iwasawa(&["verify", "--family", "ci", "--dim", "8", "--trials", "50"]);
    assert_eq!(code(&run), 0, "{}{}", stdout(&run), stderr(&run));
    assert!(stdout(&run).contains("k.symplectic"));
    assert!(stdout(&run).contains("k.real_form"));
}

#[test]
fn basis_b() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b.json");
    let run = iwasawa(&["basis", "--family", "b", "--dim", "4", "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let ctx = read_json(&out);
    // J is a permutation matrix.
    let data = ctx["J"]["data"].as_array().unwrap();
    assert!(data
        .iter()
        .all(|z| z[1].as_f64().unwrap() == 0.0 && [0.0, 1.0].contains(&z[0].as_f64().unwrap())));
    assert_eq!(data.iter().filter(|z| z[0].as_f64().unwrap() == 1.0).count(), 4);
    assert_eq!(ctx["basis"]["rows"], 4);
    assert!(stdout(&run)
        .lines()
        .any(|l| l.starts_with("J_squared_is_identity") && l.ends_with("ok")));
}

#[test]
fn basis_c() {
    let run = iwasawa(&["basis", "--family", "c", "--dim", "4"]);
    assert_eq!(code(&run), 0);
    let ctx: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(ctx["Jt"].is_object());
    assert!(stderr(&run)
        .lines()
        .any(|l| l.starts_with("Jt_squared_is_minus_identity") && l.ends_with("ok")));
}

#[test]
fn basis_cii() {
    let run = iwasawa(&["basis", "--family", "cii", "--dim", "8"]);
    assert_eq!(code(&run), 0);
    let ctx: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(ctx["Jt"].is_object());
    assert!(ctx["V"].is_object());
    assert!(stderr(&run)
        .lines()
        .any(|l| l.starts_with("Jt_preserves_signature_split") && l.ends_with("ok")));
}

#[test]
fn basis_bad_dimension() {
    let run = iwasawa(&["basis", "--family", "c", "--dim", "5"]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("dimension must be even"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let entries: Vec<(f64, f64)> = (0..16)
        .map(|i| {
            (
                (i as f64 * 0.37).sin() + if i % 5 == 0 { 2.0 } else { 0.0 },
                (i as f64 * 0.11).cos(),
            )
        })
        .collect();
    let g = write_matrix(&dir, "g.json", 4, 4, &entries);
    let x0 = write_matrix(
        &dir,
        "x0.json",
        4,
        4,
        &real(&[
            1.0, 0.2, 0.0, 0.0, 0.2, 2.0, 0.3, 0.0, 0.0, 0.3, 3.0, 0.1, 0.0, 0.0, 0.1, 4.0,
        ]),
    );
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let f = dir.path().join(format!("f{run_id}.json"));
        let d = dir.path().join(format!("d{run_id}.json"));
        let h = dir.path().join(format!("h{run_id}.csv"));
        assert_eq!(
            code(&iwasawa(&[
                "factorize",
                "--input",
                s(&g),
                "--x0",
                s(&x0),
                "--out",
                s(&f)
            ])),
            0
        );
        assert_eq!(
            code(&iwasawa(&[
                "decompose",
                "--input",
                s(&g),
                "--x0",
                s(&x0),
                "--out",
                s(&d)
            ])),
            0
        );
        assert_eq!(code(&iwasawa(&["demo-hilbert", "--sizes", "8,24", "--out", s(&h)])), 0);
        let v = iwasawa(&[
            "verify", "--family", "bi", "--dim", "8", "--trials", "10", "--seed", "3",
        ]);
        assert_eq!(code(&v), 0);
        outputs.push([
            std::fs::read(&f).unwrap(),
            std::fs::read(&d).unwrap(),
            std::fs::read(&h).unwrap(),
            v.stdout,
        ]);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn thread_count_is_honoured() {
    let single = Command::new(env!("CARGO_BIN_EXE_iwasawa"))
        .args(["verify", "--family", "c", "--dim", "4", "--trials", "8"])
        .env("IWASAWA_THREADS", "1")
        .output()
        .unwrap();
    let double = Command::new(env!("CARGO_BIN_EXE_iwasawa"))
        .args(["verify", "--family", "c", "--dim", "4", "--trials", "8"])
        .env("IWASAWA_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&single), 0);
    assert_eq!(single.stdout, double.stdout);

    let bad = Command::new(env!("CARGO_BIN_EXE_iwasawa"))
        .args(["verify", "--family", "c", "--dim", "4"])
        .env("IWASAWA_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("IWASAWA_THREADS"));
}
