use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn unimesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unimesh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_domain(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn circle(dir: &Path) -> PathBuf {
    write_domain(dir, "circle.json", r#"{"type": "circle", "center": [0.0, 0.0], "radius": 1.0}"#)
}

fn star(dir: &Path) -> PathBuf {
    write_domain(
        dir,
        "star.json",
        r#"{"type": "fourier_star", "center": [0.0, 0.0], "base_radius": 1.0, "cos": [0.0, 0.0, 0.15]}"#,
    )
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).expect("error is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mesh_circle_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = unimesh(&["mesh", "--domain", s(&domain), "--h", "0.1", "--out-dir", s(&out_dir), "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["mesh.json", "mesh.vtk", "mesh.svg", "report.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["validation"]["pass"], true);
    let counts: Vec<u64> = report["category_counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(counts.len(), 4);
    assert_eq!(counts.iter().sum::<u64>(), report["background"]["triangles"].as_u64().unwrap());
    assert_eq!(counts[..3].iter().sum::<u64>(), report["mesh"]["triangles"].as_u64().unwrap());
    assert!(report["map_check"]["max_edge_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn coarse_background_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out = unimesh(&["mesh", "--domain", s(&domain), "--h", "1.3", "--out-dir", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let kind = error_json(&out)["error"].as_str().unwrap().to_string();
    assert!(kind == "MeshTooCoarse" || kind == "InvertedTriangle", "{kind}");
}

#[test]
fn missing_input_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("no_such_domain.json");
    let out = unimesh(&["mesh", "--domain", s(&missing), "--h", "0.1", "--out-dir", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let e = error_json(&out);
    assert!(e["message"].as_str().unwrap().contains("no_such_domain.json"));

    let domain = circle(tmp.path());
    let bad_bg = write_domain(tmp.path(), "bg.json", "{\n  \"vertices\": [oops]\n}");
    let out = unimesh(&["mesh", "--domain", s(&domain), "--bg", s(&bad_bg), "--out-dir", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let e = error_json(&out);
    assert_eq!(e["error"], "ParseError");
    assert!(e["message"].as_str().unwrap().contains("bg.json"));
}

#[test]
fn background_mesh_from_file() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let bg = unimesh::bgmesh::generate_equilateral(unimesh::bgmesh::BoundingBox::new([-1.5, -1.5], [1.5, 1.5]), 0.1)
        .unwrap();
    let bg_path = tmp.path().join("bg.json");
    unimesh::bgmesh::write_json(&bg, &bg_path).unwrap();
    let out = unimesh(&["mesh", "--domain", s(&domain), "--bg", s(&bg_path), "--out-dir", s(&tmp.path().join("o"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn histogram(csv: &str) -> Vec<(String, String, usize)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn quality_histogram_bins() {
    let tmp = TempDir::new().unwrap();
    let domain = star(tmp.path());
    let out_dir = tmp.path().join("q");
    let out = unimesh(&["quality", "--domain", s(&domain), "--h", "0.05", "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("quality.csv")).unwrap();
    assert!(csv.starts_with("bin_lo,bin_hi,count\n"));
    let bins = histogram(&csv);
    let edges: Vec<(&str, &str)> = bins.iter().map(|(a, b, _)| (a.as_str(), b.as_str())).collect();
    assert_eq!(
        edges,
        [
            ("2.0", "2.4"),
            ("2.4", "2.8"),
            ("2.8", "3.2"),
            ("3.2", "3.6"),
            ("3.6", "4.0"),
            ("4.0", "4.4"),
            ("4.4", "4.8"),
            ("4.8", "5.2"),
            ("5.2", "5.6"),
            ("5.6", "6.0"),
            ("6.0", "6.4"),
            ("6.4", "6.8"),
            ("6.8", "inf"),
        ]
    );
    // Counts add up to the number of perturbed triangles.
    let spec = unimesh::DomainSpec::from_path(&domain).unwrap();
    let d = unimesh::BoundaryDescriptor::new(spec).unwrap();
    let bg = unimesh::fem::background_for(&d, 0.05).unwrap();
    let params = unimesh::mesher::RelaxationParams::scaled(0.3, 3.0, 0.05).unwrap();
    let c = unimesh::mesher::run_meshing(&bg, &d, &params).unwrap();
    let total: usize = bins.iter().map(|b| b.2).sum();
    assert_eq!(total, c.perturbed_triangles().len());
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("quality.json")).unwrap()).unwrap();
    assert!(report["min_angle_deg"].as_f64().unwrap() > 0.0);
}

#[test]
fn unperturbed_equilateral_mesh_fills_the_first_bin() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out_dir = tmp.path().join("q");
    let out = unimesh(&[
        "quality", "--domain", s(&domain), "--h", "0.2", "--scope", "background", "--out-dir", s(&out_dir),
    ]);
    assert!(out.status.success());
    let bins = histogram(&fs::read_to_string(out_dir.join("quality.csv")).unwrap());
    let total: usize = bins.iter().map(|b| b.2).sum();
    assert!(total > 0);
    assert_eq!(bins[0].2, total);
}

#[test]
fn single_level_convergence_has_empty_rates() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out_dir = tmp.path().join("c");
    let out = unimesh(&[
        "converge", "--domain", s(&domain), "--order", "2", "--levels", "1", "--out-dir", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "order,level,h,l2_error,observed_rate");
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "2");
    assert!(fields[3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(fields[4], "");
    let vtk = fs::read_to_string(out_dir.join("solution_k2.vtk")).unwrap();
    assert!(vtk.contains("SCALARS u double 1"));
    assert!(out_dir.join("convergence.svg").is_file());
}

#[test]
fn two_level_convergence_reports_a_rate() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out_dir = tmp.path().join("c");
    let out = unimesh(&[
        "converge", "--domain", s(&domain), "--order", "1,2", "--levels", "2", "--flavor", "isoparametric_I",
        "--out-dir", s(&out_dir),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let rate: f64 = csv.lines().nth(2).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((1.7..2.3).contains(&rate), "{rate}");
}

#[test]
fn unknown_flavor_is_an_argument_error() {
    let tmp = TempDir::new().unwrap();
    let domain = circle(tmp.path());
    let out = unimesh(&["converge", "--domain", s(&domain), "--flavor", "bogus", "--out-dir", s(&tmp.path().join("c"))]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "InvalidArguments");
}

#[test]
fn sweep_of_a_star() {
    let tmp = TempDir::new().unwrap();
    let domain = star(tmp.path());
    let out_dir = tmp.path().join("s");
    let out = unimesh(&["sweep", "--domain", s(&domain), "--h", "0.04", "--angles", "8", "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["successes"], 8);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let domain = star(tmp.path());
    let run = |name: &str, threads: &str| {
        let dir = tmp.path().join(name);
        let out = unimesh(&[
            "mesh", "--domain", s(&domain), "--h", "0.08", "--seed", "11", "--threads", threads, "--out-dir", s(&dir),
        ]);
        assert!(out.status.success());
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        (files, out.stdout)
    };
    let a = run("a", "1");
    let b = run("b", "1");
    assert_eq!(a, b);
    let c = run("c", "4");
    assert_eq!(a, c);
}
