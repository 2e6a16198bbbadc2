//! Command-line front end: group-file parsing, subcommand dispatch, and
//! deterministic report emission.
//!
//! Group files are JSON:
//!
//! ```json
//! {
//!   "dimension": 3,
//!   "generators": [[[...row...], ...], ...],
//!   "vertex": [0.0, 0.0, 0.0, 1.0],
//!   "ball_radius": 6,
//!   "base_vertices": [[...], ...],
//!   "zeta": [[...], ...]
//! }
//! ```
//!
//! `dimension` is the projective dimension n; matrices are (n+1)×(n+1) and
//! are rescaled to |det| = 1 automatically (rescalings are logged to
//! stderr). `vertex`, `base_vertices` (a polytope base in the link sphere
//! of the vertex) and `zeta` (a distinguished quasi-translation) are
//! optional and only required by the subcommands that use them.
//!
//! Exit codes: 0 = pass/computed, 1 = mathematical failure on well-formed
//! input (violations, inconclusive classification, failed audit), 2 = input
//! error. All sampling randomness sits behind `--seed` (default 0), and
//! reports are emitted in struct declaration order, so identical inputs and
//! seeds produce byte-identical JSON.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::config::Tol;
use crate::ends::{
    classify_end, distanced_hull, dual_tube, lens_cone_from_orbit, quasi_lens_construct,
    EndData, EndVerdict, LensAudit, QuasiLensAudit, TubeDomain,
};
use crate::error::{GeomError, Result};
use crate::fixtures;
use crate::flow::{contraction_audit, AuditConfig, ContractionAudit, UnitTangent};
use crate::holonomy::{check_umec, check_weak_umec, word_ball, EndKind, GroupSample};
use crate::sphere::{Hyperplane, ProjMap, ProjPoint};

// ---------------------------------------------------------------------------
// Group files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct GroupFileRaw {
    dimension: usize,
    generators: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    vertex: Option<Vec<f64>>,
    #[serde(default)]
    ball_radius: Option<usize>,
    #[serde(default)]
    base_vertices: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    zeta: Option<Vec<Vec<f64>>>,
}

/// A validated group file.
#[derive(Debug, Clone)]
pub struct ParsedGroup {
    pub dimension: usize,
    pub generators: Vec<ProjMap>,
    pub vertex: Option<ProjPoint>,
    pub ball_radius: Option<usize>,
    pub base: Option<ConvexBody>,
    pub zeta: Option<ProjMap>,
    /// (generator index, |det| before normalization) for every generator
    /// that needed rescaling.
    pub rescaled: Vec<(usize, f64)>,
}

fn parse_matrix(rows: &[Vec<f64>], n1: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n1 || rows.iter().any(|r| r.len() != n1) {
        return Err(GeomError::Schema(format!(
            "{what}: expected a {n1}×{n1} matrix (dimension + 1)"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(GeomError::Schema(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_row_slice(n1, n1, &flat))
}

/// Parse and validate a holonomy group file. Generators are rescaled to
/// unit |det|; the pre-normalization determinants of rescaled generators
/// are reported in `rescaled` for logging.
pub fn parse_group_file(path: &Path, tol: &Tol) -> Result<ParsedGroup> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GeomError::Io(format!("{}: {e}", path.display())))?;
    let raw: GroupFileRaw = serde_json::from_str(&text).map_err(|e| {
        GeomError::Schema(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if raw.dimension < 1 {
        return Err(GeomError::Schema("dimension must be at least 1".into()));
    }
    if raw.generators.is_empty() {
        return Err(GeomError::Schema("generators: empty list".into()));
    }
    let n1 = raw.dimension + 1;
    let mut generators = Vec::with_capacity(raw.generators.len());
    let mut rescaled = Vec::new();
    for (i, rows) in raw.generators.iter().enumerate() {
        let m = parse_matrix(rows, n1, &format!("generators[{i}]"))?;
        let (g, scale) = ProjMap::new_normalized(m, tol)?;
        let absdet = scale.powi(n1 as i32);
        if (absdet - 1.0).abs() > tol.det {
            rescaled.push((i, absdet));
        }
        generators.push(g);
    }
    let vertex = match &raw.vertex {
        None => None,
        Some(v) => {
            if v.len() != n1 {
                return Err(GeomError::Schema(format!(
                    "vertex: expected {n1} coordinates, got {}",
                    v.len()
                )));
            }
            Some(ProjPoint::new(DVector::from_row_slice(v), tol)?)
        }
    };
    if let Some(r) = raw.ball_radius {
        if r < 1 {
            return Err(GeomError::Schema("ball_radius must be ≥ 1".into()));
        }
    }
    let base = match &raw.base_vertices {
        None => None,
        Some(vs) => {
            let pts: Result<Vec<ProjPoint>> = vs
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if v.len() != raw.dimension {
                        return Err(GeomError::Schema(format!(
                            "base_vertices[{i}]: expected {} link coordinates, got {}",
                            raw.dimension,
                            v.len()
                        )));
                    }
                    ProjPoint::new(DVector::from_row_slice(v), tol)
                })
                .collect();
            Some(ConvexBody::polytope(pts?, tol)?)
        }
    };
    let zeta = match &raw.zeta {
        None => None,
        Some(rows) => Some(ProjMap::new(parse_matrix(rows, n1, "zeta")?, tol)?),
    };
    Ok(ParsedGroup {
        dimension: raw.dimension,
        generators,
        vertex,
        ball_radius: raw.ball_radius,
        base,
        zeta,
        rescaled,
    })
}

// ---------------------------------------------------------------------------
// Job plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    R,
    T,
}

impl From<KindArg> for EndKind {
    fn from(k: KindArg) -> EndKind {
        match k {
            KindArg::R => EndKind::R,
            KindArg::T => EndKind::T,
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub radius: Option<usize>,
    pub tol: Tol,
    pub seed: u64,
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl JobConfig {
    /// The word-ball radius: flag beats file beats default.
    fn radius(&self, file: Option<usize>, default: usize) -> usize {
        self.radius.or(file).unwrap_or(default)
    }
}

fn apply_tol_override(tol: &mut Tol, spec: &str) -> Result<()> {
    let (key, val) = spec.split_once('=').ok_or_else(|| {
        GeomError::Schema(format!("--tol {spec}: expected KEY=VAL"))
    })?;
    let parse = |v: &str| -> Result<f64> {
        let x: f64 = v
            .parse()
            .map_err(|_| GeomError::Schema(format!("--tol {spec}: bad number")))?;
        if !(x > 0.0) {
            return Err(GeomError::Schema(format!("--tol {spec}: must be positive")));
        }
        Ok(x)
    };
    match key {
        "norm" => tol.norm = parse(val)?,
        "det" => tol.det = parse(val)?,
        "col" => tol.col = parse(val)?,
        "den" => tol.den = parse(val)?,
        "mat" => tol.mat = parse(val)?,
        "eig" => tol.eig = parse(val)?,
        "gap" => tol.gap = parse(val)?,
        "geo" => tol.geo = parse(val)?,
        "dedup" => tol.dedup = parse(val)?,
        "coc" => tol.coc = parse(val)?,
        "hull" => tol.hull = parse(val)?,
        "ball_cap" => {
            tol.ball_cap = val.parse().map_err(|_| {
                GeomError::Schema(format!("--tol {spec}: bad integer"))
            })?;
        }
        other => {
            return Err(GeomError::Schema(format!(
                "--tol {spec}: unknown key '{other}'"
            )));
        }
    }
    Ok(())
}

fn emit(job: &JobConfig, json: String, text: String) -> Result<()> {
    let body = match job.format {
        Format::Json => json,
        Format::Text => text,
    };
    match &job.output {
        None => {
            println!("{body}");
            Ok(())
        }
        Some(p) => std::fs::write(p, body + "\n")
            .map_err(|e| GeomError::Io(format!("{}: {e}", p.display()))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn log_rescaled(parsed: &ParsedGroup) {
    for (i, det) in &parsed.rescaled {
        eprintln!("note: generator {i} rescaled to unit |det| (was |det| = {det:.6e})");
    }
}

fn require_vertex(parsed: &ParsedGroup) -> Result<ProjPoint> {
    parsed
        .vertex
        .clone()
        .ok_or_else(|| GeomError::Schema("this subcommand needs a 'vertex' field".into()))
}

fn build_sample(parsed: &ParsedGroup, job: &JobConfig, default_radius: usize) -> Result<GroupSample> {
    word_ball(
        &parsed.generators,
        job.radius(parsed.ball_radius, default_radius),
        &job.tol,
    )
}

/// Tube over the file's vertex: the declared polytope base when present,
/// the unit ball of the link sphere otherwise.
fn build_tube(parsed: &ParsedGroup, v: &ProjPoint, tol: &Tol) -> Result<TubeDomain> {
    let base = match &parsed.base {
        Some(b) => b.clone(),
        None => ConvexBody::unit_ball(parsed.dimension - 1, tol)?,
    };
    TubeDomain::new(v.clone(), base, tol)
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "endgeo",
    about = "Eigenvalue and convexity audits for ends of real projective orbifolds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Word-ball radius override (beats the group file's ball_radius).
    #[arg(long, global = true)]
    radius: Option<usize>,
    /// Tolerance override, repeatable: --tol eig=1e-6 --tol ball_cap=500000
    #[arg(long = "tol", global = true, value_name = "KEY=VAL")]
    tol: Vec<String>,
    /// Seed for all sampled randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hilbert distance between chart points of the unit ball.
    HilbertDist {
        /// Chart coordinates, comma-separated; give exactly two.
        #[arg(long = "point", required = true)]
        points: Vec<String>,
    },
    /// Polar-dual data: inverse-transpose generators, dual vertex covector.
    Dual { input: PathBuf },
    /// Uniform middle-eigenvalue condition on the sampled word ball.
    CheckUmec {
        input: PathBuf,
        /// R tests the maps at the vertex, T their duals at the dual point.
        #[arg(long, value_enum, default_value_t = KindArg::R)]
        kind: KindArg,
    },
    /// Weak middle-eigenvalue condition (multiplicity + factor reports).
    CheckWeakUmec { input: PathBuf },
    /// Full end classification with evidence.
    ClassifyEnd {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::R)]
        kind: KindArg,
    },
    /// Distanced hull and lens-cone sweep with shape audits.
    LensOrbit {
        input: PathBuf,
        /// Polar-angle offset of the lens seeds from the equator.
        #[arg(long, default_value_t = 0.1)]
        offset: f64,
        /// Extra sampled seed directions beyond the balanced interior one.
        /// Samples near the core's corners sit near limit fixed points and
        /// can push the orbit toward the vertex, so extras are opt-in.
        #[arg(long, default_value_t = 0)]
        seeds: usize,
    },
    /// Quasi-lens hull for the file's zeta and antipode-exclusion audit.
    QuasiLens { input: PathBuf },
    /// Dualize a radial sample and audit the tube–affine correspondence.
    DualTube { input: PathBuf },
    /// Contraction audit of the geodesic flow on the unit ball.
    FlowContract {
        input: PathBuf,
        /// Number of tangent vectors in the fan at the origin.
        #[arg(long, default_value_t = 8)]
        vectors: usize,
        /// Flow time per listed unit (2 = audit in half-Hilbert time).
        #[arg(long, default_value_t = 2.0)]
        time_scale: f64,
        /// Contraction threshold: V₋ slopes must be below −k_min.
        #[arg(long, default_value_t = 0.1)]
        k_min: f64,
        /// Largest listed time; measurements run on 0, 0.5, …, t_max.
        #[arg(long, default_value_t = 8.0)]
        t_max: f64,
        /// Also write the raw measurement table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the built-in fixture suite.
    SelfTest,
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let mut tol = Tol::default();
    for spec in &cli.tol {
        if let Err(e) = apply_tol_override(&mut tol, spec) {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let job = JobConfig {
        radius: cli.radius,
        tol,
        seed: cli.seed,
        format: cli.format,
        output: cli.output.clone(),
    };
    match dispatch(&cli.command, &job) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: &Command, job: &JobConfig) -> Result<i32> {
    match cmd {
        Command::HilbertDist { points } => cmd_hilbert_dist(points, job),
        Command::Dual { input } => cmd_dual(input, job),
        Command::CheckUmec { input, kind } => cmd_check_umec(input, (*kind).into(), job),
        Command::CheckWeakUmec { input } => cmd_check_weak_umec(input, job),
        Command::ClassifyEnd { input, kind } => cmd_classify_end(input, *kind, job),
        Command::LensOrbit {
            input,
            offset,
            seeds,
        } => cmd_lens_orbit(input, *offset, *seeds, job),
        Command::QuasiLens { input } => cmd_quasi_lens(input, job),
        Command::DualTube { input } => cmd_dual_tube(input, job),
        Command::FlowContract {
            input,
            vectors,
            time_scale,
            k_min,
            t_max,
            csv,
        } => cmd_flow_contract(input, *vectors, *time_scale, *k_min, *t_max, csv.as_deref(), job),
        Command::SelfTest => cmd_self_test(job),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HilbertReport {
    dimension: usize,
    points: Vec<Vec<f64>>,
    distance: f64,
}

fn cmd_hilbert_dist(points: &[String], job: &JobConfig) -> Result<i32> {
    if points.len() != 2 {
        return Err(GeomError::Schema(format!(
            "--point must be given exactly twice, got {}",
            points.len()
        )));
    }
    let coords: Result<Vec<Vec<f64>>> = points
        .iter()
        .map(|s| {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| GeomError::Schema(format!("--point {s}: bad number")))
                })
                .collect()
        })
        .collect();
    let coords = coords?;
    let dim = coords[0].len();
    if coords[1].len() != dim || dim == 0 {
        return Err(GeomError::Schema(
            "--point arguments must share a positive dimension".into(),
        ));
    }
    let ball = ConvexBody::unit_ball(dim, &job.tol)?;
    let p = ball.chart.from_chart(&DVector::from_row_slice(&coords[0]));
    let q = ball.chart.from_chart(&DVector::from_row_slice(&coords[1]));
    let distance = ball.hilbert_distance(&p, &q, &job.tol)?;
    let report = HilbertReport {
        dimension: dim,
        points: coords,
        distance,
    };
    let text = format!("hilbert distance = {distance}");
    emit(job, to_json(&report), text)?;
    Ok(0)
}

#[derive(Serialize)]
struct DualReport {
    dimension: usize,
    generators: Vec<Vec<Vec<f64>>>,
    /// Covector of the hyperplane dual to the file's vertex, when present.
    dual_hyperplane: Option<Vec<f64>>,
}

fn cmd_dual(input: &Path, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let gens: Result<Vec<DMatrix<f64>>> = parsed
        .generators
        .iter()
        .map(|g| g.dual_map().map(|d| d.matrix().clone()))
        .collect();
    let report = DualReport {
        dimension: parsed.dimension,
        generators: gens?.iter().map(matrix_rows).collect(),
        dual_hyperplane: parsed.vertex.as_ref().map(|v| {
            v.vec().iter().copied().collect()
        }),
    };
    let text = format!(
        "dualized {} generator(s) in dimension {}",
        report.generators.len(),
        report.dimension
    );
    emit(job, to_json(&report), text)?;
    Ok(0)
}

fn cmd_check_umec(input: &Path, kind: EndKind, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let sample = build_sample(&parsed, job, 4)?;
    let report = check_umec(&sample, &v, kind, &job.tol)?;
    let text = format!(
        "umec: pass = {}, best_C = {:?}, tested = {}, violations = {}",
        report.pass,
        report.best_c,
        report.tested,
        report.violations.len()
    );
    let pass = report.pass;
    emit(job, to_json(&report), text)?;
    Ok(if pass { 0 } else { 1 })
}

fn cmd_check_weak_umec(input: &Path, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let sample = build_sample(&parsed, job, 4)?;
    let report = check_weak_umec(&sample, &v, &job.tol)?;
    let text = format!(
        "weak umec: pass = {}, factors = {}, multiplicity failures = {}",
        report.pass,
        report.factor_count,
        report.multiplicity_failures.len()
    );
    let pass = report.pass;
    emit(job, to_json(&report), text)?;
    Ok(if pass { 0 } else { 1 })
}

fn cmd_classify_end(input: &Path, kind: KindArg, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let sample = build_sample(&parsed, job, 4)?;
    let data = match kind {
        KindArg::R => EndData::radial(sample, v),
        KindArg::T => {
            let h = Hyperplane::new(v.vec().clone(), &job.tol)?;
            EndData::totally_geodesic(sample, h)
        }
    };
    let done = classify_end(data, &job.tol)?;
    let evidence = done.evidence.expect("classification always attaches evidence");
    let text = format!(
        "verdict = {:?} (ball radius {}, best_C {:?}, violations {})",
        evidence.verdict, evidence.ball_radius, evidence.best_c, evidence.violations
    );
    let inconclusive = evidence.verdict == EndVerdict::Inconclusive;
    emit(job, to_json(&evidence), text)?;
    Ok(if inconclusive { 1 } else { 0 })
}

#[derive(Serialize)]
struct LensReport {
    delta: f64,
    flat: bool,
    ball_radius: usize,
    seed_count: usize,
    audit: LensAudit,
}

fn cmd_lens_orbit(input: &Path, offset: f64, extra: usize, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let sample = build_sample(&parsed, job, 4)?;
    let tube = build_tube(&parsed, &v, &job.tol)?;
    let core = distanced_hull(&sample, &tube, &job.tol)?;
    let seeds = fixtures::lens_seeds(&tube, &core.hull, offset, extra, &job.tol)?;
    let lens = lens_cone_from_orbit(&sample, &tube, &core.hull, &seeds, &job.tol)?;
    let report = LensReport {
        delta: core.delta,
        flat: core.flat.is_some(),
        ball_radius: core.ball_radius,
        seed_count: seeds.len(),
        audit: lens.audit,
    };
    let text = format!(
        "lens sweep: delta = {:.6}, audit pass = {} (lateral {}, sides {}, collar {}, rays {}/{})",
        report.delta,
        report.audit.pass,
        report.audit.lateral_pass,
        report.audit.sides_pass,
        report.audit.eps_pass,
        report.audit.rays_hit,
        report.audit.rays_tested
    );
    let pass = report.audit.pass;
    emit(job, to_json(&report), text)?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct QuasiLensReport {
    hull_vertices: usize,
    audit: QuasiLensAudit,
}

fn cmd_quasi_lens(input: &Path, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let zeta = parsed
        .zeta
        .clone()
        .ok_or_else(|| GeomError::Schema("quasi-lens needs a 'zeta' field".into()))?;
    let sample = build_sample(&parsed, job, 2)?;
    // Deterministic seed point near the vertex, tilted by the seeded RNG so
    // reruns with the same --seed match byte for byte. The tilt has positive
    // entries so that the truncated orbit starts strictly inside the cone
    // over the vertex's coordinate orthant.
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed ^ 0x9d5eed);
    let n1 = v.ambient();
    let mut tilt = DVector::zeros(n1);
    for i in 0..n1 {
        tilt[i] = rng.random::<f64>() * 0.9 + 0.1;
    }
    let tilt = &tilt - v.vec() * v.vec().dot(&tilt);
    let seed_pt = ProjPoint::new(v.vec() + tilt.normalize() * 0.8, &job.tol)?;
    let ql = quasi_lens_construct(&sample, &zeta, &v, &seed_pt, &job.tol)?;
    let report = QuasiLensReport {
        hull_vertices: ql.hull.vertices().map_or(0, |v| v.len()),
        audit: ql.audit,
    };
    let text = format!(
        "quasi-lens: exclusion radius = {:.6}, orbit = {}, truncation margins = {:?}",
        report.audit.exclusion_radius, report.audit.orbit_count, report.audit.truncation_margins
    );
    emit(job, to_json(&report), text)?;
    Ok(0)
}

#[derive(Serialize)]
struct DualTubeReport {
    round_trip_hausdorff: f64,
    dual_ball: usize,
}

fn cmd_dual_tube(input: &Path, job: &JobConfig) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    let v = require_vertex(&parsed)?;
    let sample = build_sample(&parsed, job, 3)?;
    // The radial sample at v dualizes to an affine sample preserving the
    // hyperplane with covector v; the tube correspondence is audited there.
    let dual_sample = sample.dualized()?;
    let boundary = Hyperplane::new(v.vec().clone(), &job.tol)?;
    let base = match &parsed.base {
        Some(b) => b.clone(),
        None => ConvexBody::unit_ball(parsed.dimension - 1, &job.tol)?,
    };
    let dt = dual_tube(&dual_sample, &boundary, &base, &job.tol)?;
    let report = DualTubeReport {
        round_trip_hausdorff: dt.round_trip_hausdorff,
        dual_ball: dt.dual_sample.len(),
    };
    let text = format!(
        "dual tube: round-trip Hausdorff = {:.3e} over {} dual elements",
        report.round_trip_hausdorff, report.dual_ball
    );
    emit(job, to_json(&report), text)?;
    Ok(0)
}

fn cmd_flow_contract(
    input: &Path,
    vectors: usize,
    time_scale: f64,
    k_min: f64,
    t_max: f64,
    csv: Option<&Path>,
    job: &JobConfig,
) -> Result<i32> {
    let parsed = parse_group_file(input, &job.tol)?;
    log_rescaled(&parsed);
    if vectors == 0 || !(t_max > 0.0) {
        return Err(GeomError::Schema(
            "flow-contract needs vectors ≥ 1 and t_max > 0".into(),
        ));
    }
    let n = parsed.dimension;
    let omega = ConvexBody::unit_ball(n, &job.tol)?;
    let sample = build_sample(&parsed, job, 4)?;
    let center = omega.chart.from_chart(&DVector::zeros(n));
    let mut u_set = Vec::with_capacity(vectors);
    if n == 2 {
        for k in 0..vectors {
            let a = 2.0 * std::f64::consts::PI * k as f64 / vectors as f64;
            u_set.push(UnitTangent::new(
                &omega,
                center.clone(),
                DVector::from_row_slice(&[a.cos(), a.sin()]),
                &job.tol,
            )?);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(job.seed ^ 0xf10a);
        for _ in 0..vectors {
            let mut d = DVector::zeros(n);
            for i in 0..n {
                // Box–Muller for a rotation-invariant direction.
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                d[i] = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            u_set.push(UnitTangent::new(&omega, center.clone(), d, &job.tol)?);
        }
    }
    let steps = (2.0 * t_max).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * 0.5).collect();
    let cfg = AuditConfig {
        time_scale,
        k_min,
        ..AuditConfig::default()
    };
    let audit = contraction_audit(&omega, &sample, &u_set, &times, &cfg, &job.tol)?;
    if let Some(p) = csv {
        std::fs::write(p, audit.csv())
            .map_err(|e| GeomError::Io(format!("{}: {e}", p.display())))?;
    }
    let text = summarize_audit(&audit);
    let pass = audit.pass;
    emit(job, to_json(&audit), text)?;
    Ok(if pass { 0 } else { 1 })
}

fn summarize_audit(audit: &ContractionAudit) -> String {
    use crate::flow::FrameSpace;
    let extreme = |s: FrameSpace, init: f64, f: fn(f64, f64) -> f64| {
        audit
            .slopes
            .iter()
            .filter(|x| x.space == s)
            .map(|x| x.slope)
            .fold(init, f)
    };
    format!(
        "flow audit: pass = {} (worst V- slope {:.3}, worst |V0| slope {:.3}, best V+ slope {:.3})",
        audit.pass,
        extreme(FrameSpace::Minus, f64::NEG_INFINITY, f64::max),
        extreme(FrameSpace::Zero, 0.0, |a, b| a.max(b.abs())),
        extreme(FrameSpace::Plus, f64::INFINITY, f64::min),
    )
}

// ---------------------------------------------------------------------------
// Self test
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SelfCheck {
    name: &'static str,
    pass: bool,
    value: f64,
}

#[derive(Serialize)]
struct SelfTestReport {
    checks: Vec<SelfCheck>,
    pass: bool,
}

fn cmd_self_test(job: &JobConfig) -> Result<i32> {
    let tol = &job.tol;
    let mut checks = Vec::new();
    let mut record = |name: &'static str, pass: bool, value: f64| {
        checks.push(SelfCheck { name, pass, value });
    };

    // Hilbert interval oracle: d(0, ½) in (−1, 1) is log 3.
    {
        let ball = ConvexBody::unit_ball(1, tol)?;
        let p = ball.chart.from_chart(&DVector::from_row_slice(&[0.0]));
        let q = ball.chart.from_chart(&DVector::from_row_slice(&[0.5]));
        let d = ball.hilbert_distance(&p, &q, tol)?;
        let err = (d - 3.0_f64.ln()).abs();
        record("hilbert_interval_log3", err < 1e-10, err);
    }

    // Double dual on the square.
    {
        let ball = ConvexBody::unit_ball(2, tol)?;
        let verts: Vec<ProjPoint> = [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]]
            .iter()
            .map(|p| ball.chart.from_chart(&DVector::from_row_slice(p)))
            .collect();
        let square = ConvexBody::polytope(verts, tol)?;
        let dd = square.dual_body(tol)?.dual_body(tol)?;
        let gap = crate::ends::support_hausdorff(&square, &dd, tol)?;
        record("square_double_dual", gap < 1e-7, gap);
    }

    // Middle-eigenvalue constant of the SO(2,1) fixture.
    {
        let gens = fixtures::so21_schottky_sl4(tol)?;
        let sample = word_ball(&gens, 4, tol)?;
        let v = ProjPoint::basis(4, 3);
        let rep = check_umec(&sample, &v, EndKind::R, tol)?;
        let c = rep.best_c.unwrap_or(f64::NAN);
        record("schottky_umec_best_c", rep.pass && (c - 2.0).abs() < 0.1, c);
    }

    // The vertex-dominant counterexample must fail.
    {
        let gens = fixtures::vertex_dominant_sl3(tol)?;
        let sample = word_ball(&gens, 4, tol)?;
        let v = ProjPoint::basis(3, 2);
        let rep = check_umec(&sample, &v, EndKind::R, tol)?;
        record(
            "vertex_dominant_fails",
            !rep.pass && !rep.violations.is_empty(),
            rep.violations.len() as f64,
        );
    }

    // Classification endpoints.
    {
        let gens = fixtures::unipotent_sl3(tol)?;
        let sample = word_ball(&gens, 3, tol)?;
        let data = EndData::radial(sample, ProjPoint::basis(3, 0));
        let done = classify_end(data, tol)?;
        let ok = done.verdict == Some(EndVerdict::Horospherical);
        record("unipotent_horospherical", ok, if ok { 1.0 } else { 0.0 });
    }
    {
        let gens = fixtures::diag_lens_sl3(tol)?;
        let sample = word_ball(&gens, 4, tol)?;
        let data = EndData::radial(sample, ProjPoint::basis(3, 2));
        let done = classify_end(data, tol)?;
        let ok = done.verdict == Some(EndVerdict::Lens);
        record("diag_lens_verdict", ok, if ok { 1.0 } else { 0.0 });
    }

    // Quasi-lens hull exclusion on the model generator.
    {
        let zeta = fixtures::quasi_zeta(1.0, tol)?;
        let sample = word_ball(&[ProjMap::identity(3)], 1, tol)?;
        let v = ProjPoint::basis(3, 1);
        let seed = ProjPoint::new(DVector::from_row_slice(&[0.6, 0.7, 0.4]), tol)?;
        let ql = quasi_lens_construct(&sample, &zeta, &v, &seed, tol)?;
        record(
            "quasi_lens_exclusion",
            ql.audit.exclusion_radius > 0.02,
            ql.audit.exclusion_radius,
        );
    }

    // Flow contraction on the cyclic Fuchsian fixture.
    {
        let omega = fixtures::klein_disk(tol)?;
        let g = fixtures::so21_boost(0.0, 1.2, tol)?;
        let sample = word_ball(&[g], 5, tol)?;
        let u = UnitTangent::new(
            &omega,
            omega.chart.from_chart(&DVector::zeros(2)),
            DVector::from_row_slice(&[1.0, 0.0]),
            tol,
        )?;
        let times: Vec<f64> = (0..=5).map(|k| k as f64).collect();
        let cfg = AuditConfig {
            time_scale: 2.0,
            k_min: 0.5,
            ..AuditConfig::default()
        };
        let audit = contraction_audit(&omega, &sample, &[u], &times, &cfg, tol)?;
        let worst = audit
            .slopes
            .iter()
            .filter(|s| s.space == crate::flow::FrameSpace::Minus)
            .map(|s| s.slope)
            .fold(f64::NEG_INFINITY, f64::max);
        record("flow_contraction_slope", audit.pass && worst < -0.5, worst);
    }

    let pass = checks.iter().all(|c| c.pass);
    let report = SelfTestReport { checks, pass };
    let mut text = String::new();
    for c in &report.checks {
        text.push_str(&format!(
            "[{}] {} (value {:.6e})\n",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.value
        ));
    }
    text.push_str(&format!("self-test: pass = {pass}"));
    emit(job, to_json(&report), text)?;
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// Fixture files
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GroupFileOut {
    dimension: usize,
    generators: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertex: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ball_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_vertices: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta: Option<Vec<Vec<f64>>>,
}

/// The shipped fixture files, as (name, content) pairs.
pub fn fixture_files(tol: &Tol) -> Result<Vec<(&'static str, String)>> {
    let rows = |g: &ProjMap| matrix_rows(g.matrix());
    let mut out = Vec::new();

    let schottky = fixtures::so21_schottky_sl4(tol)?;
    out.push((
        "so21_lattice.json",
        GroupFileOut {
            dimension: 3,
            generators: schottky.iter().map(&rows).collect(),
            vertex: Some(vec![0.0, 0.0, 0.0, 1.0]),
            ball_radius: Some(6),
            base_vertices: None,
            zeta: None,
        },
    ));

    out.push((
        "bad_vertex_dominant.json",
        GroupFileOut {
            dimension: 2,
            generators: fixtures::vertex_dominant_sl3(tol)?.iter().map(&rows).collect(),
            vertex: Some(vec![0.0, 0.0, 1.0]),
            ball_radius: Some(4),
            base_vertices: None,
            zeta: None,
        },
    ));

    out.push((
        "unipotent.json",
        GroupFileOut {
            dimension: 2,
            generators: fixtures::unipotent_sl3(tol)?.iter().map(&rows).collect(),
            vertex: Some(vec![1.0, 0.0, 0.0]),
            ball_radius: Some(3),
            base_vertices: None,
            zeta: None,
        },
    ));

    let zq = fixtures::quasi_zeta(1.0, tol)?;
    out.push((
        "quasi_lens.json",
        GroupFileOut {
            dimension: 2,
            generators: vec![rows(&zq)],
            vertex: Some(vec![0.0, 1.0, 0.0]),
            ball_radius: Some(3),
            base_vertices: None,
            zeta: Some(rows(&zq)),
        },
    ));

    let a = ProjMap::new(
        DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 0.5, 1.0, 1.0])),
        tol,
    )?;
    let b = ProjMap::new(
        DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 0.5, 1.0])),
        tol,
    )?;
    out.push((
        "z2_diagonal.json",
        GroupFileOut {
            dimension: 3,
            generators: vec![rows(&a), rows(&b)],
            vertex: Some(vec![0.0, 0.0, 0.0, 1.0]),
            ball_radius: Some(3),
            base_vertices: Some(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ]),
            zeta: None,
        },
    ));

    // Two-generator SO(3,1) ping-pong group, block-embedded in SL(5).
    let boost4 = |axis: usize, ell: f64| -> Result<ProjMap> {
        let (c, s) = (ell.cosh(), ell.sinh());
        let mut m = DMatrix::identity(4, 4);
        m[(axis, axis)] = c;
        m[(axis, 3)] = s;
        m[(3, axis)] = s;
        m[(3, 3)] = c;
        ProjMap::new(m, tol)
    };
    let g1 = fixtures::embed_block(&boost4(0, 2.0)?, tol)?;
    let g2 = fixtures::embed_block(&boost4(1, 2.2)?, tol)?;
    out.push((
        "so31_lattice.json",
        GroupFileOut {
            dimension: 4,
            generators: vec![rows(&g1), rows(&g2)],
            vertex: Some(vec![0.0, 0.0, 0.0, 0.0, 1.0]),
            ball_radius: Some(3),
            base_vertices: None,
            zeta: None,
        },
    ));

    out.push((
        "octagon.json",
        GroupFileOut {
            dimension: 2,
            generators: fixtures::octagon_surface_group(tol)?.iter().map(&rows).collect(),
            vertex: None,
            ball_radius: Some(4),
            base_vertices: None,
            zeta: None,
        },
    ));

    out.into_iter()
        .map(|(name, content)| {
            serde_json::to_string_pretty(&content)
                .map(|s| (name, s + "\n"))
                .map_err(|e| GeomError::Io(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tol {
        Tol::default()
    }

    #[test]
    fn tol_overrides_parse_and_validate() {
        let mut tol = t();
        apply_tol_override(&mut tol, "eig=1e-6").unwrap();
        assert_eq!(tol.eig, 1e-6);
        apply_tol_override(&mut tol, "ball_cap=5000").unwrap();
        assert_eq!(tol.ball_cap, 5000);
        assert!(apply_tol_override(&mut tol, "eig=-1").is_err());
        assert!(apply_tol_override(&mut tol, "nope=1").is_err());
        assert!(apply_tol_override(&mut tol, "eig").is_err());
    }

    #[test]
    fn group_files_round_trip_through_the_parser() {
        let tol = t();
        let dir = std::env::temp_dir().join(format!("endgeo-fixture-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (name, content) in fixture_files(&tol).unwrap() {
            let path = dir.join(name);
            std::fs::write(&path, &content).unwrap();
            let parsed = parse_group_file(&path, &tol).unwrap();
            assert!(!parsed.generators.is_empty(), "{name}");
            assert!(parsed.rescaled.is_empty(), "{name}: fixtures ship unimodular");
            for g in &parsed.generators {
                assert_eq!(g.ambient(), parsed.dimension + 1, "{name}");
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn parser_rejects_malformed_input() {
        let tol = t();
        let dir = std::env::temp_dir().join(format!("endgeo-schema-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.join(name);
            std::fs::write(&p, body).unwrap();
            p
        };
        let bad_json = write("bad.json", "{ not json");
        assert!(matches!(
            parse_group_file(&bad_json, &tol),
            Err(GeomError::Schema(_))
        ));
        let bad_shape = write(
            "shape.json",
            r#"{"dimension": 2, "generators": [[[1.0, 0.0], [0.0, 1.0]]]}"#,
        );
        assert!(matches!(
            parse_group_file(&bad_shape, &tol),
            Err(GeomError::Schema(_))
        ));
        let singular = write(
            "singular.json",
            r#"{"dimension": 1, "generators": [[[1.0, 0.0], [0.0, 0.0]]]}"#,
        );
        assert!(matches!(
            parse_group_file(&singular, &tol),
            Err(GeomError::SingularMatrix { .. })
        ));
        let missing = dir.join("missing.json");
        assert!(matches!(
            parse_group_file(&missing, &tol),
            Err(GeomError::Io(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rescaling_is_reported() {
        let tol = t();
        let dir = std::env::temp_dir().join(format!("endgeo-rescale-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("scaled.json");
        // det = 8; the parser must normalize and report the original scale.
        std::fs::write(
            &p,
            r#"{"dimension": 1, "generators": [[[2.0, 0.0], [0.0, 4.0]]]}"#,
        )
        .unwrap();
        let parsed = parse_group_file(&p, &tol).unwrap();
        assert_eq!(parsed.rescaled.len(), 1);
        assert!((parsed.rescaled[0].1 - 8.0).abs() < 1e-12);
        let m = parsed.generators[0].matrix();
        assert!((m[(0, 0)] * m[(1, 1)] - 1.0).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }

    /// Regenerate the shipped fixture JSON files. Run manually:
    /// `cargo test -p endgeo --lib regen_fixture_files -- --ignored`
    #[test]
    #[ignore]
    fn regen_fixture_files() {
        let tol = t();
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
        std::fs::create_dir_all(&dir).unwrap();
        for (name, content) in fixture_files(&tol).unwrap() {
            std::fs::write(dir.join(name), content).unwrap();
        }
    }
}
