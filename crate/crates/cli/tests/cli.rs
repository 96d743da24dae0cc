use f2w_core::gramian::read_dump;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn f2w(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_f2w"))
        .arg(mode)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("run f2w")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn rate_rows(csv: &str) -> Vec<(usize, usize)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn haar_rate_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "haar.cfg", "mode = rate\nj_min = 1\nj_max = 4\nepsilon = 1/2\n");
    let o = f2w("rate", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rate.csv")).unwrap();
    assert!(csv.starts_with("N,M_total,M1,M2,sigma_min,theta_inv,epsilon\n"));
    assert_eq!(rate_rows(&csv), vec![(4, 25), (16, 81), (64, 289), (256, 1089)]);
    let summary = std::fs::read_to_string(dir.path().join("rate_summary.txt")).unwrap();
    assert!(summary.contains("log-log slope"));
}

#[test]
fn daubechies_first_rung() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "db.cfg", "family = daubechies\np = 2\nepsilon = 1/7\nj_min = 1\nj_max = 1\n");
    let o = f2w("rate", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rate.csv")).unwrap();
    assert_eq!(rate_rows(&csv), vec![(100, 225)]);
}

#[test]
fn empty_scale_range_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "e.cfg", "j_min = 3\nj_max = 2\n");
    let o = f2w("rate", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("rate.csv")).unwrap();
    assert_eq!(csv, "N,M_total,M1,M2,sigma_min,theta_inv,epsilon\n");
}

#[test]
fn search_cap_is_a_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "cap.cfg", "j_min = 3\nj_max = 3\nmax_half_width = 4\n");
    let o = f2w("rate", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 1);
}

#[test]
fn reconstruct_writes_images_and_round_trips_samples() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let cfg = config(dir.path(), "r.cfg", "j_min = 2\nj_max = 2\ngrid = 64\nfunction = f2\n");
    let o = f2w("reconstruct", &cfg, &a, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let gs = std::fs::read(a.join("gs.pgm")).unwrap();
    let header = b"P5\n64 64\n65535\n";
    assert_eq!(&gs[..header.len()], header);
    assert_eq!(gs.len(), header.len() + 2 * 64 * 64);
    let sidecar = std::fs::read_to_string(a.join("images.txt")).unwrap();
    assert!(sidecar.starts_with("gs.pgm min ") && sidecar.contains("\nfourier.pgm min "));
    let report = std::fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.contains("quasi_optimal = true"));

    let b = dir.path().join("b");
    let cfg = config(dir.path(), "s.cfg", "j_min = 2\nj_max = 2\ngrid = 64\nsamples_file = a/samples.txt\n");
    let o = f2w("reconstruct", &cfg, &b, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(b.join("gs.pgm")).unwrap(), gs);
    assert_eq!(std::fs::read(b.join("fourier.pgm")).unwrap(), std::fs::read(a.join("fourier.pgm")).unwrap());
}

#[test]
fn sample_file_block_mismatch_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "r.cfg", "j_min = 1\nj_max = 1\ngrid = 8\n");
    assert_eq!(code(&f2w("reconstruct", &cfg, dir.path(), &[])), 0);
    let cfg = config(dir.path(), "s.cfg", "j_max = 1\ngrid = 8\nhalf_width = 3\nsamples_file = samples.txt\n");
    assert_eq!(code(&f2w("reconstruct", &cfg, &dir.path().join("x"), &[])), 2);
}

#[test]
fn compare_reports_gain_over_fourier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.cfg", "j_min = 1\nj_max = 3\n");
    let o = f2w("compare", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (gs, fourier): (f64, f64) = (r[7].parse().unwrap(), r[9].parse().unwrap());
        assert!(gs < fourier, "{r:?}");
        assert_eq!(r[10], "true");
    }
}

#[test]
fn compare_polynomial_inside_boundary_span() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.cfg",
        "family = daubechies\np = 3\nboundary = true\nj_min = 3\nj_max = 3\nfunction = f2\n",
    );
    let o = f2w("compare", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let gs: f64 = csv.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
    assert!(gs < 1e-9, "{csv}");
}

#[test]
fn verify_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "v.cfg", "");
    let o = f2w("verify", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("name,status,measured,threshold\n"));
    assert!(!table.contains(",fail,"));
    for name in ["grid_parseval", "sampling_inequality", "perfect_recovery", "sigma_monotone", "rate_sufficiency"] {
        assert!(table.contains(&format!("{name},pass,")), "{name}\n{table}");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("verify.csv")).unwrap(), table);
}

#[test]
fn verify_marks_coarse_density_as_expected_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "v.cfg", "epsilon = 1\nj_max = 2\n");
    let o = f2w("verify", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("assumption_config,xfail,"), "{table}");
    assert!(table.contains("assumption_example,pass,"), "{table}");
}

#[test]
fn verify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "v.cfg", "family = daubechies\np = 2\nepsilon = 1/7\nj_max = 2\n");
    let a = f2w("verify", &cfg, &dir.path().join("a"), &["--seed", "9"]);
    let b = f2w("verify", &cfg, &dir.path().join("b"), &["--seed", "9"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        std::fs::read(dir.path().join("a/verify.csv")).unwrap(),
        std::fs::read(dir.path().join("b/verify.csv")).unwrap()
    );
}

#[test]
fn gramian_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "g.cfg", "family = daubechies\np = 2\nboundary = true\nj_min = 2\nj_max = 2\nhalf_width = 5\n");
    let o = f2w("gramian-dump", &cfg, dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::File::open(dir.path().join("gramian.txt")).unwrap();
    let (u, eps, _) = read_dump(&mut BufReader::new(file)).unwrap();
    assert_eq!((u.nrows(), u.ncols()), (121, 16));
    assert_eq!(eps, 0.5);
    let table = std::fs::read_to_string(dir.path().join("boundary_coefficients.txt")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("left 0 ")));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.cfg", "colour = blue\n"),
        ("syntax.cfg", "epsilon 1/2\n"),
        ("support.cfg", "family = daubechies\np = 2\nepsilon = 1/2\n"),
        ("mode.cfg", "mode = verify\n"),
        ("boundary.cfg", "family = daubechies\np = 3\nboundary = true\nj_min = 1\n"),
    ];
    for (name, text) in cases {
        let cfg = config(dir.path(), name, text);
        let o = f2w("rate", &cfg, dir.path(), &[]);
        assert_eq!(code(&o), 2, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = f2w("rate", &dir.path().join("missing.cfg"), dir.path(), &[]);
    assert_eq!(code(&o), 2);
}
