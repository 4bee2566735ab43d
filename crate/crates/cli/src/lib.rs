//! Command-line front end: domain specs in; meshes, reports, histograms and
//! convergence tables out.
//!
//! Every subcommand writes into `--out-dir` and prints a JSON summary on
//! stdout. Failures print `{"error": kind, "message": ...}` on stderr and
//! exit with a nonzero code.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

use unimesh::bgmesh::{self, BoundingBox, MeshFileError, VtkCellData, VtkPointData};
use unimesh::fem::{self, FemError, StudyConfig, StudyReport};
use unimesh::geometry::{BoundaryDescriptor, DomainSpec, GeometryError};
use unimesh::maps::{self, ElementGeometry, ElementMap, Flavor, MapError, MapKind};
use unimesh::mesher::{self, ConformingMesh, MeshingError, Provenance, RelaxationParams};
use unimesh::TriangleMesh;

#[derive(Debug, Parser)]
#[command(name = "unimesh", version, about = "Mesh curved domains by perturbing a background triangulation")]
pub struct Cli {
    /// Worker threads for element loops; 1 gives the reference serial path.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for randomized validators (recorded in reports).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mesh a domain and write mesh JSON, VTK, SVG and a validation report.
    Mesh(MeshArgs),
    /// Histogram of the circumradius-to-inradius ratio.
    Quality(QualityArgs),
    /// Convergence study of the Laplace problem with solution e^y sin x.
    Converge(ConvergeArgs),
    /// Mesh rotated copies of a domain on one background mesh.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Domain spec (JSON).
    #[arg(long)]
    pub domain: PathBuf,
    /// Background mesh (JSON). Generated from `--h` when absent.
    #[arg(long)]
    pub bg: Option<PathBuf>,
    /// Side length of the generated equilateral background mesh.
    #[arg(long)]
    pub h: Option<f64>,
    /// Relaxation strength.
    #[arg(long, default_value_t = mesher::DEFAULT_ETA)]
    pub eta: f64,
    /// Relaxation band width in units of h.
    #[arg(long, default_value_t = mesher::DEFAULT_R_FACTOR)]
    pub r_factor: f64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// Triangles with at least one moved vertex.
    Perturbed,
    /// Every triangle of the conforming mesh.
    All,
    /// The background mesh itself, without meshing the domain.
    Background,
}

#[derive(Debug, Args)]
pub struct QualityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.4)]
    pub bin_width: f64,
    #[arg(long, value_enum, default_value_t = Scope::Perturbed)]
    pub scope: Scope,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Element orders, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 3, 4])]
    pub order: Vec<usize>,
    /// exact_conforming, exact_two_stage, isoparametric_I or isoparametric_J.
    #[arg(long, default_value = "exact_conforming")]
    pub flavor: String,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 64)]
    pub angles: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidArguments(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    MeshFile(#[from] MeshFileError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidArguments(_) => "InvalidArguments",
            CliError::Geometry(GeometryError::Io { .. }) => "IoError",
            CliError::Geometry(GeometryError::InvalidDomain(_)) => "ParseError",
            CliError::Geometry(_) => "GeometryError",
            CliError::MeshFile(MeshFileError::Parse { .. }) => "ParseError",
            CliError::MeshFile(_) => "IoError",
            CliError::Meshing(e) => e.kind(),
            CliError::Map(MapError::NonPositiveJacobian { .. }) => "NonPositiveJacobian",
            CliError::Map(_) => "MapError",
            CliError::Fem(e) => e.kind(),
            CliError::Io { .. } => "IoError",
            CliError::ValidationFailed(_) => "ValidationFailed",
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

/// Parses arguments, installs the thread pool and runs the subcommand.
/// Returns the JSON summary printed on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    if cli.threads == 0 {
        return Err(CliError::InvalidArguments("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::InvalidArguments(e.to_string()))?;
    let seed = cli.seed;
    pool.install(|| match &cli.command {
        Command::Mesh(a) => cmd_mesh(a, seed),
        Command::Quality(a) => cmd_quality(a, seed),
        Command::Converge(a) => cmd_converge(a, seed),
        Command::Sweep(a) => cmd_sweep(a, seed),
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

struct Setup {
    spec: DomainSpec,
    domain: BoundaryDescriptor,
    background: TriangleMesh,
    h: f64,
    params: RelaxationParams,
}

fn setup(c: &CommonArgs) -> Result<Setup, CliError> {
    if !(c.eta > 0.0 && c.eta < 1.0) {
        return Err(CliError::InvalidArguments(format!("--eta must lie in (0, 1), got {}", c.eta)));
    }
    if !(c.r_factor > 0.0 && c.r_factor.is_finite()) {
        return Err(CliError::InvalidArguments(format!("--r-factor must be positive, got {}", c.r_factor)));
    }
    let spec = DomainSpec::from_path(&c.domain)?;
    let domain = BoundaryDescriptor::new(spec.clone())?;
    let (background, h) = match (&c.bg, c.h) {
        (Some(path), _) => {
            let mesh = bgmesh::read_json(path)?;
            let h = c.h.unwrap_or_else(|| mesh.max_diameter());
            (mesh, h)
        }
        (None, Some(h)) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::InvalidArguments(format!("--h must be positive, got {h}")));
            }
            (fem::background_for(&domain, h)?, h)
        }
        (None, None) => return Err(CliError::InvalidArguments("either --bg or --h is required".into())),
    };
    let params = RelaxationParams::scaled(c.eta, c.r_factor, h)?;
    fs::create_dir_all(&c.out_dir).map_err(|source| CliError::Io {
        path: c.out_dir.display().to_string(),
        source,
    })?;
    Ok(Setup {
        spec,
        domain,
        background,
        h,
        params,
    })
}

fn provenance_code(p: Provenance) -> f64 {
    match p {
        Provenance::Unchanged => 0.0,
        Provenance::Snapped => 1.0,
        Provenance::Relaxed => 2.0,
    }
}

#[derive(Debug, Serialize)]
struct MapCheck {
    seed: u64,
    samples: usize,
    /// Largest distance between the exact map on positive edges and the
    /// closest-point projection.
    max_edge_deviation: f64,
    /// Smallest Jacobian determinant of the exact map over random points of
    /// positively cut triangles.
    min_jacobian_det: f64,
}

/// Randomized spot check of the exact element maps.
fn map_check(conforming: &ConformingMesh, domain: &BoundaryDescriptor, seed: u64) -> Result<MapCheck, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut: Vec<usize> = (0..conforming.mesh.n_triangles())
        .filter(|&e| ElementGeometry::new(conforming, e).map(|g| g.category == 2).unwrap_or(false))
        .collect();
    let samples = 256;
    let mut max_edge_deviation: f64 = 0.0;
    let mut min_jacobian_det = f64::INFINITY;
    if cut.is_empty() {
        return Ok(MapCheck {
            seed,
            samples: 0,
            max_edge_deviation,
            min_jacobian_det,
        });
    }
    for _ in 0..samples {
        let e = cut[rng.random_range(0..cut.len())];
        let g = ElementGeometry::new(conforming, e)?;
        let s: f64 = rng.random();
        let on_edge = maps::eval_exact_phi(&g, domain, &maps::Barycentric::new(1.0 - s, s, 0.0))?;
        let projected = domain.closest_point(&(g.source[0] + (g.source[1] - g.source[0]) * s))?;
        max_edge_deviation = max_edge_deviation.max((on_edge - projected).norm());
        let (mut x, mut y): (f64, f64) = (rng.random(), rng.random());
        if x + y > 1.0 {
            (x, y) = (1.0 - x, 1.0 - y);
        }
        let map = ElementMap::new(conforming, domain, e, MapKind::ExactConforming)?;
        min_jacobian_det = min_jacobian_det.min(map.jacobian(&Point2::new(x, y))?.det);
    }
    Ok(MapCheck {
        seed,
        samples,
        max_edge_deviation,
        min_jacobian_det,
    })
}

fn svg_bbox(domain: &BoundaryDescriptor, margin: f64) -> BoundingBox {
    let (lo, hi) = domain.bounding_box();
    BoundingBox::new([lo.x - margin, lo.y - margin], [hi.x + margin, hi.y + margin])
}

pub fn cmd_mesh(a: &MeshArgs, seed: u64) -> Result<String, CliError> {
    let s = setup(&a.common)?;
    let out = &a.common.out_dir;
    let conforming = mesher::run_meshing(&s.background, &s.domain, &s.params)?;
    let validation = mesher::validate_conforming(&conforming, &s.domain);
    let check = map_check(&conforming, &s.domain, seed)?;

    bgmesh::write_json(&conforming.mesh, out.join("mesh.json"))?;
    let categories: Vec<i64> = conforming
        .triangle_ids
        .iter()
        .map(|&t| conforming.classification.category[t] as i64)
        .collect();
    let provenance: Vec<f64> = conforming.provenance.iter().map(|&p| provenance_code(p)).collect();
    write(
        &out.join("mesh.vtk"),
        &bgmesh::vtk_string(
            conforming.mesh.vertices(),
            conforming.mesh.triangles(),
            &[VtkPointData {
                name: "provenance",
                values: &provenance,
            }],
            &[VtkCellData {
                name: "category",
                values: &categories,
            }],
        ),
    )?;
    let curves = maps::curved_boundary(&conforming, &s.domain, 16)?;
    write(
        &out.join("mesh.svg"),
        &bgmesh::svg_string(&conforming.mesh, svg_bbox(&s.domain, 2.0 * s.h), &curves),
    )?;

    let report = json!({
        "command": "mesh",
        "seed": seed,
        "domain": s.spec,
        "h": s.h,
        "eta": s.params.eta,
        "r": s.params.r,
        "relaxation_h": conforming.h,
        "background": { "vertices": s.background.n_vertices(), "triangles": s.background.n_triangles() },
        "category_counts": conforming.classification.category_counts(),
        "positive_edges": conforming.classification.positive_edges.len(),
        "mesh": { "vertices": conforming.mesh.n_vertices(), "triangles": conforming.mesh.n_triangles() },
        "snapped": conforming.count(Provenance::Snapped),
        "relaxed": conforming.count(Provenance::Relaxed),
        "validation": validation,
        "map_check": check,
    });
    write(&out.join("report.json"), &to_json(&report))?;
    if !validation.pass {
        return Err(CliError::ValidationFailed(format!("{validation:?}")));
    }
    Ok(to_json(&report))
}

pub fn cmd_quality(a: &QualityArgs, seed: u64) -> Result<String, CliError> {
    let s = setup(&a.common)?;
    let out = &a.common.out_dir;
    let (mesh, triangles) = match a.scope {
        Scope::Background => (s.background.clone(), (0..s.background.n_triangles()).collect()),
        scope => {
            let conforming = mesher::run_meshing(&s.background, &s.domain, &s.params)?;
            let triangles: Vec<usize> = if scope == Scope::Perturbed {
                conforming.perturbed_triangles()
            } else {
                (0..conforming.mesh.n_triangles()).collect()
            };
            (conforming.mesh, triangles)
        }
    };
    let hist = mesher::quality_histogram_of(&mesh, &triangles, a.bin_width)
        .map_err(|e| CliError::InvalidArguments(e.to_string()))?;
    let mut csv = Vec::new();
    mesher::write_histogram_csv(&hist, &mut csv).expect("writing to memory");
    write(&out.join("quality.csv"), &String::from_utf8(csv).expect("ascii"))?;
    let (lo, hi) = if triangles.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mesher::extreme_angles(&mesh, Some(&triangles))
    };
    let report = json!({
        "command": "quality",
        "seed": seed,
        "scope": format!("{:?}", a.scope).to_lowercase(),
        "triangles": hist.total,
        "min_ratio": finite_or_null(hist.min_ratio),
        "max_ratio": finite_or_null(hist.max_ratio),
        "min_angle_deg": finite_or_null(lo.to_degrees()),
        "max_angle_deg": finite_or_null(hi.to_degrees()),
        "bins": hist.bins.iter().map(|b| json!({
            "lo": b.lo,
            "hi": finite_or_null(b.hi),
            "count": b.count,
        })).collect::<Vec<_>>(),
    });
    write(&out.join("quality.json"), &to_json(&report))?;
    Ok(to_json(&report))
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_converge(a: &ConvergeArgs, seed: u64) -> Result<String, CliError> {
    let flavor = Flavor::parse(&a.flavor).ok_or_else(|| {
        CliError::InvalidArguments(format!(
            "unknown flavor {:?} (expected one of {})",
            a.flavor,
            Flavor::ALL.map(|f| f.name()).join(", ")
        ))
    })?;
    if a.order.is_empty() || a.order.iter().any(|k| !(1..=4).contains(k)) {
        return Err(CliError::InvalidArguments(format!("--order must be in 1..=4, got {:?}", a.order)));
    }
    if a.levels == 0 {
        return Err(CliError::InvalidArguments("--levels must be at least 1".into()));
    }
    let mut common = a.common.clone();
    common.h.get_or_insert(fem::MODEL_H0);
    if common.bg.is_some() {
        return Err(CliError::InvalidArguments(
            "converge generates its own backgrounds; use --h for the coarsest mesh size".into(),
        ));
    }
    let s = setup(&common)?;
    let out = &common.out_dir;
    let config = StudyConfig {
        orders: a.order.clone(),
        levels: a.levels,
        flavor,
        h0: s.h,
        eta: common.eta,
        r_factor: common.r_factor,
    };
    let finest = a.levels - 1;
    let mut vtk_error = None;
    let report = fem::convergence_study(&s.domain, &config, |k, level, _, solution| {
        if level == finest && vtk_error.is_none() {
            if let Err(e) = write(&out.join(format!("solution_k{k}.vtk")), &solution.vtk_string()) {
                vtk_error = Some(e);
            }
        }
    })?;
    if let Some(e) = vtk_error {
        return Err(e);
    }
    let mut csv = Vec::new();
    fem::write_study_csv(&report, &mut csv).expect("writing to memory");
    write(&out.join("convergence.csv"), &String::from_utf8(csv).expect("ascii"))?;
    write(&out.join("convergence.svg"), &convergence_svg(&report))?;
    let summary = json!({
        "command": "converge",
        "seed": seed,
        "flavor": flavor,
        "h0": s.h,
        "levels": a.levels,
        "laplacian_check": report.laplacian_check,
        "terminal_rates": a.order.iter().map(|&k| json!({"order": k, "rate": report.terminal_rate(k)})).collect::<Vec<_>>(),
        "rows": report.rows,
    });
    write(&out.join("convergence.json"), &to_json(&summary))?;
    Ok(to_json(&summary))
}

/// Log-log plot of error against h, one polyline per order.
fn convergence_svg(report: &StudyReport) -> String {
    let pts: Vec<(usize, f64, f64)> = report
        .rows
        .iter()
        .filter_map(|r| r.l2_error.filter(|e| *e > 0.0).map(|e| (r.order, r.h.log10(), e.log10())))
        .collect();
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let range = |f: fn(&(usize, f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(|p| p.1);
    let (y0, y1) = range(|p| p.2);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    s.push_str(&format!(
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * pad,
        h - 2.0 * pad
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">log10 h</text>\n",
        w / 2.0,
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">log10 L2 error</text>\n",
        h / 2.0,
        h / 2.0
    ));
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];
    let mut orders: Vec<usize> = pts.iter().map(|p| p.0).collect();
    orders.dedup();
    for (i, k) in orders.iter().enumerate() {
        let line: Vec<String> = pts
            .iter()
            .filter(|p| p.0 == *k)
            .map(|p| format!("{:.2},{:.2}", sx(p.1), sy(p.2)))
            .collect();
        let color = colors[i % colors.len()];
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            line.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">k={k}</text>\n",
            w - pad + 4.0,
            pad + 14.0 * (i as f64 + 1.0)
        ));
    }
    s.push_str("</svg>\n");
    s
}

pub fn cmd_sweep(a: &SweepArgs, seed: u64) -> Result<String, CliError> {
    if a.angles == 0 {
        return Err(CliError::InvalidArguments("--angles must be at least 1".into()));
    }
    let mut s = setup(&a.common)?;
    if a.common.bg.is_none() {
        // The generated background has to cover every rotated copy.
        s.background = sweep_background(&s.spec, a.angles, s.h)?;
    }
    let out = &a.common.out_dir;
    let report = mesher::sweep(&s.spec, &s.background, &s.params, a.angles);
    let summary = json!({
        "command": "sweep",
        "seed": seed,
        "domain": s.spec,
        "h": s.h,
        "background": { "vertices": s.background.n_vertices(), "triangles": s.background.n_triangles() },
        "n_samples": report.n_samples,
        "successes": report.successes,
        "failures": report.failures,
        "samples": report.samples,
    });
    write(&out.join("sweep.json"), &to_json(&summary))?;
    if report.failures > 0 {
        return Err(CliError::ValidationFailed(format!(
            "{} of {} rotations failed",
            report.failures, report.n_samples
        )));
    }
    Ok(to_json(&summary))
}

/// Equilateral mesh of side `h` over the union of the bounding boxes of all
/// rotated copies, padded by `2 h`.
fn sweep_background(spec: &DomainSpec, angles: usize, h: f64) -> Result<TriangleMesh, CliError> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..angles {
        let angle = std::f64::consts::TAU * i as f64 / angles as f64;
        let (a, b) = BoundaryDescriptor::new(spec.rotated(angle))?.bounding_box();
        lo = [lo[0].min(a.x), lo[1].min(a.y)];
        hi = [hi[0].max(b.x), hi[1].max(b.y)];
    }
    let m = 2.0 * h;
    bgmesh::generate_equilateral(BoundingBox::new([lo[0] - m, lo[1] - m], [hi[0] + m, hi[1] + m]), h)
        .map_err(|e| CliError::InvalidArguments(e.to_string()))
}

/// Installs the logger; verbosity comes from `UNIMESH_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("UNIMESH_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}
