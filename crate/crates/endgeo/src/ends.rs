//! End geometry: tube domains over convex bases, dual tubes, limit sets,
//! distanced hulls, lens cones, quasi-lens translation cocycles, asymptotic
//! hyperplane fields, and the end classification verdict.
//!
//! A radial end datum is a word-ball sample fixing a vertex `v ∈ S^n`; a
//! totally geodesic end datum preserves a hyperplane (and is handled through
//! the dual sample at the dual point). All audits are sampled: a passing
//! report certifies the inspected ball at its recorded radius and sampling
//! resolution, nothing more.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::body::{homogeneous_form, BodyRep, ConvexBody};
use crate::chart::Chart;
use crate::config::Tol;
use crate::error::{GeomError, Result};
use crate::holonomy::{
    check_umec, check_weak_umec, eigen_profile_of, factor_decomposition, kernel_basis,
    vertex_block_form, BlockKind, EndKind, GroupSample, UmecReport,
};
use crate::hull::{dist_to_hull, Location};
use crate::sphere::{span_basis, Hyperplane, ProjMap, ProjPoint, Subspace};

// ---------------------------------------------------------------------------
// Tube domains
// ---------------------------------------------------------------------------

/// The tube over a properly convex base: the union of open great-circle
/// segments from `v` to `−v` through the directions of a body in the link
/// sphere at `v`. The link sphere is realized concretely: a Householder
/// involution takes `v` to the last coordinate axis, and link directions are
/// points of `S^{n−1}` in the first `n` coordinates.
#[derive(Debug, Clone)]
pub struct TubeDomain {
    vertex: ProjPoint,
    base: ConvexBody,
    frame: DMatrix<f64>,
}

impl TubeDomain {
    /// `base` lives in the link sphere: its ambient dimension must be one
    /// less than the vertex's.
    pub fn new(vertex: ProjPoint, base: ConvexBody, _tol: &Tol) -> Result<TubeDomain> {
        if base.ambient() + 1 != vertex.ambient() {
            return Err(GeomError::DimensionMismatch {
                expected: vertex.ambient() - 1,
                got: base.ambient(),
            });
        }
        let frame = reflect_to_axis(vertex.vec(), vertex.ambient() - 1);
        Ok(TubeDomain {
            vertex,
            base,
            frame,
        })
    }

    pub fn vertex(&self) -> &ProjPoint {
        &self.vertex
    }

    pub fn base(&self) -> &ConvexBody {
        &self.base
    }

    /// Link direction of a point other than `±v`, as a point of the link
    /// sphere `S^{n−1}`.
    pub fn link_direction(&self, x: &ProjPoint, tol: &Tol) -> Result<ProjPoint> {
        let w = &self.frame * x.vec();
        let n = w.len() - 1;
        let link = DVector::from_fn(n, |i, _| w[i]);
        if link.norm() < 1e-12 {
            return Err(GeomError::AtVertex);
        }
        ProjPoint::new(link, tol)
    }

    /// Realize a link direction as the ambient equator point orthogonal
    /// to the vertex.
    pub fn ambient_direction(&self, d: &ProjPoint, tol: &Tol) -> Result<ProjPoint> {
        let n = d.ambient();
        if n + 1 != self.vertex.ambient() {
            return Err(GeomError::DimensionMismatch {
                expected: self.vertex.ambient() - 1,
                got: n,
            });
        }
        let mut ext = DVector::zeros(n + 1);
        for i in 0..n {
            ext[i] = d.vec()[i];
        }
        ProjPoint::new(&self.frame * ext, tol)
    }

    /// The point at angle `θ ∈ (0, π)` from `v` along the segment through
    /// link direction `d`.
    pub fn lift(&self, d: &ProjPoint, theta: f64, tol: &Tol) -> Result<ProjPoint> {
        let amb = self.ambient_direction(d, tol)?;
        ProjPoint::new(
            self.vertex.vec() * theta.cos() + amb.vec() * theta.sin(),
            tol,
        )
    }

    /// Where a point sits relative to the tube: interior segments, lateral
    /// boundary, or outside. `±v` count as boundary (they close the
    /// segments).
    pub fn location(&self, x: &ProjPoint, tol: &Tol) -> Location {
        match self.link_direction(x, tol) {
            Ok(link) => self.base.contains(&link, tol),
            Err(_) => Location::Boundary,
        }
    }
}

/// Radial projection away from the vertex: the equator point of the segment
/// through `x`, i.e. the unique point of the tube's great-circle fiber
/// orthogonal to `v`. Fails only on `±v` itself.
pub fn radial_projection(t: &TubeDomain, x: &ProjPoint, tol: &Tol) -> Result<ProjPoint> {
    let d = t.link_direction(x, tol)?;
    t.ambient_direction(&d, tol)
}

// ---------------------------------------------------------------------------
// Support-function Hausdorff distance
// ---------------------------------------------------------------------------

/// Exact support-function data of a body expressed in a target chart:
/// polytopes through their vertices, ellipsoids through the quadric
/// `(y − yc)ᵀ M (y − yc) ≤ r²` their homogeneous form cuts in the chart.
enum SupportData {
    Points(Vec<DVector<f64>>),
    Quadric {
        yc: DVector<f64>,
        /// `r² · M⁻¹`, so the support is `u·yc + sqrt(uᵀ (r²M⁻¹) u)`.
        minv: DMatrix<f64>,
    },
}

impl SupportData {
    fn of(body: &ConvexBody, frame: &Chart, tol: &Tol) -> Result<SupportData> {
        match &body.rep {
            BodyRep::Polytope { vertices } => {
                let mut pts = Vec::with_capacity(vertices.len());
                for p in vertices {
                    pts.push(frame.to_chart(p, tol)?);
                }
                Ok(SupportData::Points(pts))
            }
            BodyRep::Ellipsoid { center, form } => {
                let mc = body.chart.to_chart(center, tol)?;
                let f = homogeneous_form(&body.chart, &mc, form);
                let c = frame.covector();
                let bm = frame.basis();
                let m2 = {
                    let raw = bm.transpose() * &f * bm;
                    (&raw + &raw.transpose()) * 0.5
                };
                let m1 = bm.transpose() * &f * c;
                let m0 = (c.transpose() * &f * c)[(0, 0)];
                let chol = m2.clone().cholesky().ok_or(GeomError::DegenerateBody {
                    reason: "ellipsoid does not cut an ellipse in the target chart".into(),
                })?;
                let yc = chol.solve(&(-&m1));
                let r2 = -m1.dot(&yc) - m0;
                if r2 <= 0.0 {
                    return Err(GeomError::DegenerateBody {
                        reason: "ellipsoid is empty in the target chart".into(),
                    });
                }
                Ok(SupportData::Quadric {
                    yc,
                    minv: chol.inverse() * r2,
                })
            }
        }
    }

    fn eval(&self, u: &DVector<f64>) -> f64 {
        match self {
            SupportData::Points(pts) => pts
                .iter()
                .map(|y| y.dot(u))
                .fold(f64::NEG_INFINITY, f64::max),
            SupportData::Quadric { yc, minv } => u.dot(yc) + u.dot(&(minv * u)).max(0.0).sqrt(),
        }
    }
}

/// Hausdorff distance between two bodies measured through support functions
/// in the first body's chart. Polytope and ellipsoid supports are exact in
/// any direction; the maximum is taken over the chart axes and 1024 seeded
/// random directions.
pub fn support_hausdorff(a: &ConvexBody, b: &ConvexBody, tol: &Tol) -> Result<f64> {
    if a.ambient() != b.ambient() {
        return Err(GeomError::DimensionMismatch {
            expected: a.ambient(),
            got: b.ambient(),
        });
    }
    let n = a.dim();
    let sa = SupportData::of(a, &a.chart, tol)?;
    let sb = SupportData::of(b, &a.chart, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a3d);
    let mut dirs = Vec::with_capacity(2 * n + 1024);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    for _ in 0..1024 {
        dirs.push(random_unit(n, &mut rng));
    }
    let mut gap: f64 = 0.0;
    for u in &dirs {
        gap = gap.max((sa.eval(u) - sb.eval(u)).abs());
    }
    Ok(gap)
}

/// Boundary points of a body for hull-based round trips: exact vertices
/// plus seeded samples for polytopes; a uniform angular grid for planar
/// ellipses (exact boundary points, inscribed-polygon resolution ~(π/m)²);
/// seeded boundary samples otherwise.
fn boundary_cloud(body: &ConvexBody, count: usize, seed: u64, tol: &Tol) -> Vec<ProjPoint> {
    if let BodyRep::Ellipsoid { center, form } = &body.rep {
        if body.dim() == 2 {
            if let (Ok(mc), Some(qinv)) = (body.chart.to_chart(center, tol), form.clone().try_inverse())
            {
                if let Some(chol) = ((&qinv + &qinv.transpose()) * 0.5).cholesky() {
                    let l = chol.l();
                    let mut pts = Vec::with_capacity(count);
                    for k in 0..count {
                        let phi = std::f64::consts::TAU * k as f64 / count as f64;
                        let z = DVector::from_vec(vec![phi.cos(), phi.sin()]);
                        pts.push(body.chart.from_chart(&(&mc + &l * z)));
                    }
                    return pts;
                }
            }
        }
        return body.sample_boundary(count, seed, tol);
    }
    let mut pts = body.vertices().map(<[_]>::to_vec).unwrap_or_default();
    pts.extend(body.sample_boundary(512.min(count), seed, tol));
    pts
}

// ---------------------------------------------------------------------------
// Dual tubes
// ---------------------------------------------------------------------------

/// The dual end datum of a totally geodesic end: the tube over the polar
/// dual of the base, carried by the dualized sample at the dual point of
/// the boundary hyperplane.
#[derive(Debug, Clone)]
pub struct DualTube {
    pub tube: TubeDomain,
    pub dual_sample: GroupSample,
    /// Support-Hausdorff gap between the dual base recovered through the
    /// tube machinery (lift, project, hull, polar) and the direct polar
    /// dual of the base. A sampled-resolution consistency audit.
    pub round_trip_hausdorff: f64,
}

/// Dualize a totally geodesic end datum: `sample` must preserve `boundary`
/// with its coorientation, and `omega` (given in link coordinates at the
/// dual point) must be preserved by the induced link action.
pub fn dual_tube(
    sample: &GroupSample,
    boundary: &Hyperplane,
    omega: &ConvexBody,
    tol: &Tol,
) -> Result<DualTube> {
    let np1 = boundary.ambient();
    if sample.ambient() != np1 {
        return Err(GeomError::DimensionMismatch {
            expected: np1,
            got: sample.ambient(),
        });
    }
    if omega.ambient() + 1 != np1 {
        return Err(GeomError::DimensionMismatch {
            expected: np1 - 1,
            got: omega.ambient(),
        });
    }
    let v = boundary.dual_point();
    let primal = TubeDomain::new(v.clone(), omega.clone(), tol)?;

    // Every nonidentity element must be in affine block form at v: it
    // preserves the boundary hyperplane and its positive side.
    for (_, e) in sample.nonidentity() {
        vertex_block_form(&e.map, &v, BlockKind::Affine, tol).map_err(|err| match err {
            GeomError::NotFixed { residual } => GeomError::NotBoundaryPreserving { residual },
            other => other,
        })?;
    }
    // The induced link action must preserve omega (sampled on the
    // boundary, with a loosened band for the resolution of the samples).
    let mut loose = tol.clone();
    loose.geo = loose.geo.max(1e-6);
    let probes = omega.sample_boundary(32, 0x70b3, tol);
    for g in &sample.generators {
        for s in &probes {
            let p = primal.ambient_direction(s, tol)?;
            let q = g.apply(&p);
            let link = primal
                .link_direction(&q, tol)
                .map_err(|_| GeomError::NotBoundaryPreserving { residual: 1.0 })?;
            if omega.contains(&link, &loose) == Location::Outside {
                return Err(GeomError::NotBoundaryPreserving { residual: 1.0 });
            }
        }
    }

    let dual_sample = sample.dualized()?;

    // Round trip: push boundary samples through the tube (lift to several
    // latitudes, project back), hull them in the link, and dualize; compare
    // against the representation-level polar dual.
    let bdry = boundary_cloud(omega, 4096, 0x1b, tol);
    let mut link_pts = Vec::with_capacity(3 * bdry.len());
    for d in &bdry {
        for theta in [0.6, std::f64::consts::FRAC_PI_2, 2.4] {
            let x = primal.lift(d, theta, tol)?;
            let amb = radial_projection(&primal, &x, tol)?;
            link_pts.push(primal.link_direction(&amb, tol)?);
        }
    }
    let base_a = ConvexBody::polytope(link_pts, tol)?;
    let dual_a = base_a.dual_body(tol)?;
    let dual_b = omega.dual_body(tol)?;
    let round_trip_hausdorff = support_hausdorff(&dual_b, &dual_a, tol)?;

    let tube = TubeDomain::new(v, dual_b, tol)?;
    Ok(DualTube {
        tube,
        dual_sample,
        round_trip_hausdorff,
    })
}

// ---------------------------------------------------------------------------
// Limit sets
// ---------------------------------------------------------------------------

/// Attracting fixed points of the sampled elements inside a tube.
#[derive(Debug, Clone)]
pub struct LimitSet {
    pub points: Vec<ProjPoint>,
    /// Whether the corresponding point's link direction lies on the base
    /// boundary (lateral limit point).
    pub lateral: Vec<bool>,
    /// When the points span a hyperplane preserved by every generator.
    pub invariant_hyperplane: Option<Hyperplane>,
    pub ball_radius: usize,
}

/// Attracting eigendirection of a matrix whose top eigenvalue norm is
/// attained by a single real eigenvalue (of either sign). Returns a unit
/// vector with arbitrary sign choice.
fn attracting_direction(m: &DMatrix<f64>, tol: &Tol) -> Option<DVector<f64>> {
    let p = eigen_profile_of(m, tol).ok()?;
    if p.top_multiplicity != 1 {
        return None;
    }
    let lam = p.norms[0];
    let k = m.nrows();
    for s in [1.0_f64, -1.0] {
        let shifted = m - DMatrix::identity(k, k) * (s * lam);
        let kb = kernel_basis(&shifted, 1e-6);
        if kb.len() == 1 {
            return Some(kb.into_iter().next().unwrap());
        }
    }
    None
}

/// One-dimensional quantized index for deduplicating unit vectors.
struct DirIndex {
    probe: DVector<f64>,
    buckets: BTreeMap<i64, Vec<usize>>,
    pts: Vec<DVector<f64>>,
}

const DIR_QUANTUM: f64 = 1e-7;

impl DirIndex {
    fn new(n: usize) -> DirIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd14c);
        DirIndex {
            probe: random_unit(n, &mut rng),
            buckets: BTreeMap::new(),
            pts: Vec::new(),
        }
    }

    /// Insert if no stored vector is within `DIR_QUANTUM`; report freshness.
    fn insert(&mut self, x: &DVector<f64>) -> bool {
        let key = (x.dot(&self.probe) / DIR_QUANTUM).round() as i64;
        for kk in (key - 1)..=(key + 1) {
            if let Some(ids) = self.buckets.get(&kk) {
                for &id in ids {
                    if (&self.pts[id] - x).norm() < DIR_QUANTUM {
                        return false;
                    }
                }
            }
        }
        let id = self.pts.len();
        self.pts.push(x.clone());
        self.buckets.entry(key).or_default().push(id);
        true
    }
}

/// When `cloud` spans exactly a hyperplane whose normal is preserved by
/// every generator (up to sign), return that hyperplane.
fn invariant_span_hyperplane(
    cloud: &[DVector<f64>],
    sample: &GroupSample,
    tol: &Tol,
) -> Option<Hyperplane> {
    if cloud.is_empty() {
        return None;
    }
    let np1 = cloud[0].len();
    let (basis, _) = span_basis(cloud, 1e-8);
    if basis.len() != np1 - 1 {
        return None;
    }
    let sub = Subspace::from_basis(DMatrix::from_columns(&basis));
    let comp = sub.orthogonal_complement();
    if comp.linear_dim() != 1 {
        return None;
    }
    let normal = comp.basis().column(0).into_owned();
    let h = Hyperplane::new(normal, tol).ok()?;
    for g in &sample.generators {
        let moved = g.apply_hyperplane(&h).ok()?;
        let c = h.covector().dot(moved.covector()).abs();
        if c < 1.0 - 1e-8 {
            return None;
        }
    }
    Some(h)
}

/// Collect the attracting directions of all sampled elements, keeping the
/// representative sign that lands in the tube and discarding directions
/// along the vertex axis or outside the tube's closure.
pub fn limit_set(sample: &GroupSample, t: &TubeDomain, tol: &Tol) -> Result<LimitSet> {
    let vhat = t.vertex().vec();
    let mut loose = tol.clone();
    loose.geo = loose.geo.max(1e-6);
    let mut index = DirIndex::new(sample.ambient());
    let mut points = Vec::new();
    let mut lateral = Vec::new();
    for (_, e) in sample.nonidentity() {
        let Some(x) = attracting_direction(e.map.matrix(), tol) else {
            continue;
        };
        if x.dot(vhat).abs() > 1.0 - 1e-12 {
            continue;
        }
        for s in [1.0_f64, -1.0] {
            let cand = ProjPoint::new(&x * s, tol)?;
            let Ok(link) = t.link_direction(&cand, tol) else {
                continue;
            };
            let loc = t.base().contains(&link, &loose);
            if loc == Location::Outside {
                continue;
            }
            if index.insert(cand.vec()) {
                points.push(cand);
                lateral.push(loc == Location::Boundary);
            }
            break;
        }
    }
    if points.is_empty() {
        return Err(GeomError::NoProximalElements);
    }
    let cloud: Vec<DVector<f64>> = points.iter().map(|p| p.vec().clone()).collect();
    let invariant_hyperplane = invariant_span_hyperplane(&cloud, sample, tol);
    Ok(LimitSet {
        points,
        lateral,
        invariant_hyperplane,
        ball_radius: sample.radius,
    })
}

// ---------------------------------------------------------------------------
// Distanced hulls
// ---------------------------------------------------------------------------

/// Convex hull of the limit set, together with its angular distance from
/// the vertex axis. Nonzero `delta` is what makes a lens construction
/// possible over the hull.
#[derive(Debug, Clone)]
pub struct DistancedHull {
    pub hull: ConvexBody,
    /// Minimal angle between hull points and the vertex axis `{±v}`,
    /// sampled over limit points and hull body samples.
    pub delta: f64,
    /// The invariant hyperplane containing the hull, when the limit set
    /// spans one (the totally-geodesic-like case).
    pub flat: Option<Hyperplane>,
    pub ball_radius: usize,
    pub umec: UmecReport,
}

/// Build the distanced hull of the limit set. Gated on the uniform middle
/// eigenvalue condition: without it the limit set may touch the vertex
/// axis and no distanced hull exists.
pub fn distanced_hull(sample: &GroupSample, t: &TubeDomain, tol: &Tol) -> Result<DistancedHull> {
    let v = t.vertex().clone();
    let umec = check_umec(sample, &v, EndKind::R, tol)?;
    if !umec.pass {
        return Err(GeomError::UmecFailed {
            violations: umec.violations.len(),
        });
    }
    let ls = limit_set(sample, t, tol)?;
    let cloud: Vec<DVector<f64>> = ls.points.iter().map(|p| p.vec().clone()).collect();
    let (basis, _) = span_basis(&cloud, 1e-9);
    if basis.len() < 2 {
        return Err(GeomError::DegenerateHull {
            reason: format!("limit set spans only {} direction(s)", basis.len()),
        });
    }
    let hull = ConvexBody::polytope(ls.points.clone(), tol).map_err(|e| {
        GeomError::DegenerateHull {
            reason: format!("limit set has no properly convex hull: {e}"),
        }
    })?;
    let vhat = v.vec();
    let axis_distance = |p: &ProjPoint| (p.vec().dot(vhat).abs().min(1.0)).acos();
    let mut delta = f64::INFINITY;
    for p in &ls.points {
        delta = delta.min(axis_distance(p));
    }
    for p in hull.sample_body(500, 0x5e11, tol) {
        delta = delta.min(axis_distance(&p));
    }
    Ok(DistancedHull {
        hull,
        delta,
        flat: ls.invariant_hyperplane,
        ball_radius: ls.ball_radius,
        umec,
    })
}

// ---------------------------------------------------------------------------
// Lens cones
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LensAudit {
    /// Hull vertices on the lateral tube boundary coincide with core
    /// vertices, and the core is contained in the hull.
    pub lateral_pass: bool,
    /// Largest distance from a lateral hull vertex to the nearest core
    /// vertex.
    pub lateral_gap: f64,
    /// The hull has vertices strictly on both sides of the core's
    /// vertex-height slab.
    pub sides_pass: bool,
    pub outer_count: usize,
    pub inner_count: usize,
    /// Largest chart distance from a seed to the core.
    pub eps_seed: f64,
    /// Largest chart distance from a hull vertex to the core.
    pub eps_hull: f64,
    pub eps_pass: bool,
    pub rays_tested: usize,
    /// Rays from the vertex through core directions whose intersection
    /// with the hull is a single angular interval away from `±v`.
    pub rays_hit: usize,
    pub pass: bool,
}

/// A lens cone: the orbit hull (the lens) and its join with the vertex.
#[derive(Debug, Clone)]
pub struct LensCone {
    pub lens: ConvexBody,
    pub cone: ConvexBody,
    pub audit: LensAudit,
}

const LENS_RAYS: usize = 1000;
const LATERAL_BAND: f64 = 1e-8;
const LATERAL_MATCH: f64 = 1e-6;
const SIDE_BAND: f64 = 1e-7;

/// Sweep seed points through the sampled ball and hull the orbit together
/// with the core `K` (a distanced hull). The audit checks the lens shape:
/// (a) hull vertices on the lateral tube boundary lie on the core's own
/// lateral set, (b) material sits strictly on both sides of the core,
/// (c) the hull stays within a seed-controlled collar of the core
/// (distances in the hull chart: an affine stand-in for the Hilbert
/// collar, exact on the sampled cloud), and (d) radial rays through core
/// directions cross the hull in one angular interval away from `±v`.
pub fn lens_cone_from_orbit(
    sample: &GroupSample,
    t: &TubeDomain,
    core: &ConvexBody,
    seeds: &[ProjPoint],
    tol: &Tol,
) -> Result<LensCone> {
    if seeds.is_empty() {
        return Err(GeomError::EmptySample);
    }
    let v = t.vertex().clone();
    let vhat = v.vec();
    let axis_distance = |p: &ProjPoint| (p.vec().dot(vhat).abs().min(1.0)).acos();

    let mut seed_margin = f64::INFINITY;
    for s in seeds {
        if t.location(s, tol) == Location::Outside {
            return Err(GeomError::NotInterior);
        }
        seed_margin = seed_margin.min(axis_distance(s));
    }

    let mut orbit: Vec<ProjPoint> = Vec::with_capacity(sample.len() * seeds.len());
    let mut orbit_margin = f64::INFINITY;
    for e in &sample.ball {
        for s in seeds {
            let p = e.map.apply(s);
            orbit_margin = orbit_margin.min(axis_distance(&p));
            orbit.push(p);
        }
    }
    // An orbit sliding into the vertex axis means the vertex eigenvalue
    // dominates somewhere: no lens cone bounded away from ±v exists.
    if orbit_margin < 0.25 * seed_margin {
        return Err(GeomError::OrbitEscape { dist: orbit_margin });
    }

    let core_pts: Vec<ProjPoint> = match core.vertices() {
        Some(vs) => vs.to_vec(),
        None => core.sample_boundary(256, 0x2e, tol),
    };
    let mut cloud = orbit;
    cloud.extend(core_pts.iter().cloned());
    let lens = ConvexBody::polytope(cloud, tol)?;
    let lens_verts = lens.vertices().expect("polytope").to_vec();

    let mut loose = tol.clone();
    loose.geo = loose.geo.max(1e-6);

    // Chart coordinates of the core, shared by audits (a) and (c).
    let mut kchart = Vec::with_capacity(core_pts.len());
    for k in &core_pts {
        kchart.push(lens.chart.to_chart(k, tol)?);
    }

    // (a) Lateral vertices must be inherited from the core.
    let mut lateral_pass = true;
    let mut lateral_gap: f64 = 0.0;
    let mut tight = tol.clone();
    tight.geo = LATERAL_BAND;
    for x in &lens_verts {
        let Ok(link) = t.link_direction(x, tol) else {
            lateral_pass = false;
            continue;
        };
        if t.base().contains(&link, &tight) == Location::Boundary {
            let d = dist_to_hull(&lens.chart.to_chart(x, tol)?, &kchart);
            lateral_gap = lateral_gap.max(d);
            if d > LATERAL_MATCH {
                lateral_pass = false;
            }
        }
    }
    for k in &core_pts {
        if lens.contains(k, &loose) == Location::Outside {
            lateral_pass = false;
        }
    }

    // (b) Material strictly on both sides of the core's height slab.
    let resign = |p: &ProjPoint| -> DVector<f64> {
        let s = if lens.chart.pairing(p) < 0.0 { -1.0 } else { 1.0 };
        p.vec() * s
    };
    let core_heights: Vec<f64> = core_pts.iter().map(|k| resign(k).dot(vhat)).collect();
    let kmin = core_heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let kmax = core_heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut outer_count = 0;
    let mut inner_count = 0;
    for x in &lens_verts {
        let h = resign(x).dot(vhat);
        if h > kmax + SIDE_BAND {
            outer_count += 1;
        } else if h < kmin - SIDE_BAND {
            inner_count += 1;
        }
    }
    let sides_pass = outer_count > 0 && inner_count > 0;

    // (c) Collar: the hull stays within a seed-controlled chart distance of
    // the core. The ball contracts chart distances toward the lateral
    // corners, so the seeds themselves carry the extreme offsets.
    let mut eps_seed: f64 = 0.0;
    for s in seeds {
        eps_seed = eps_seed.max(dist_to_hull(&lens.chart.to_chart(s, tol)?, &kchart));
    }
    let mut eps_hull: f64 = 0.0;
    for x in &lens_verts {
        eps_hull = eps_hull.max(dist_to_hull(&lens.chart.to_chart(x, tol)?, &kchart));
    }
    let eps_pass = eps_hull <= 1.5 * eps_seed + 1e-6;

    // (d) Radial rays through core directions cross the lens in one
    // angular interval bounded away from ±v. Directions are nudged a hair
    // toward the base interior so rays at the extreme lateral edge (where
    // the lens section degenerates to a tangency) stay testable.
    let hull = lens.hull().expect("polytope");
    let base_mid = t
        .base()
        .chart
        .to_chart(&t.base().interior_point(tol), tol)?;
    let ray_dirs: Vec<ProjPoint> = core.sample_body(LENS_RAYS, 0x11a7, tol);
    let mut rays_tested = 0;
    let mut rays_hit = 0;
    for p in &ray_dirs {
        let Ok(d0) = t.link_direction(p, tol) else {
            continue;
        };
        let Ok(dc) = t.base().chart.to_chart(&d0, tol) else {
            continue;
        };
        let d = t
            .base()
            .chart
            .from_chart(&(&base_mid + (&dc - &base_mid) * 0.999));
        rays_tested += 1;
        // Two chart points on the ray bracketing the valid window.
        let mut window: Vec<(f64, DVector<f64>)> = Vec::new();
        for i in 0..48 {
            let theta = 0.02 + (std::f64::consts::PI - 0.04) * i as f64 / 47.0;
            let Ok(x) = t.lift(&d, theta, tol) else {
                continue;
            };
            if lens.chart.pairing(&x) > 1e-4 {
                if let Ok(y) = lens.chart.to_chart(&x, tol) {
                    window.push((theta, y));
                }
            }
        }
        if window.len() < 2 {
            continue;
        }
        let (_, ya) = &window[0];
        let (_, yb) = &window[window.len() - 1];
        let (za, ra) = hull.reduce(ya);
        let (zb, rb) = hull.reduce(yb);
        if ra.max(rb) > 1e-7 {
            continue;
        }
        let dir = &zb - &za;
        let Some((t0, t1)) = hull.clip_line(&za, &dir, 1e-9) else {
            continue;
        };
        if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
            continue;
        }
        let angle_at = |tt: f64| -> f64 {
            let y = ya + (yb - ya) * tt;
            let x = lens.chart.from_chart(&y);
            x.vec().dot(vhat).abs().min(1.0).acos()
        };
        let th0 = angle_at(t0);
        let th1 = angle_at(t1);
        if th0.min(th1) > 1e-3 && th0.max(th1) < std::f64::consts::PI - 1e-3 {
            rays_hit += 1;
        }
    }

    let mut cone_pts = lens_verts.clone();
    cone_pts.push(v.clone());
    let cone = ConvexBody::polytope(cone_pts, tol)?;

    let audit = LensAudit {
        lateral_pass,
        lateral_gap,
        sides_pass,
        outer_count,
        inner_count,
        eps_seed,
        eps_hull,
        eps_pass,
        rays_tested,
        rays_hit,
        pass: lateral_pass && sides_pass && eps_pass && rays_tested > 0 && rays_hit == rays_tested,
    };
    Ok(LensCone { lens, cone, audit })
}

// ---------------------------------------------------------------------------
// Translation cocycles
// ---------------------------------------------------------------------------

/// The quasi-translation values of a sample in block form along an
/// invariant circle through the vertex: in adapted coordinates every
/// element looks like `[[S, 0, 0], [0, λ, λ·v(g)], [0, 0, λ]]`, and
/// `g ↦ v(g)` is an additive cocycle.
#[derive(Debug, Clone)]
pub struct TranslationCocycle {
    pub vertex: ProjPoint,
    /// Cocycle values aligned with the sample's ball (identity first).
    pub values: Vec<f64>,
    pub words: Vec<String>,
    /// The vertex eigenvalue λ of each ball element.
    pub vertex_eigenvalues: Vec<f64>,
    pub generator_values: Vec<f64>,
    /// The invariant complement subspace carrying the `S` blocks.
    pub d_block: Subspace,
    /// Largest observed violation of `v(gh) = v(g) + v(h)`.
    pub additivity_defect: f64,
    /// Largest observed violation of `v(hgh⁻¹) = v(g)`.
    pub conjugation_defect: f64,
}

/// Householder involution taking a unit vector to the `k`-th coordinate
/// axis.
fn reflect_to_axis(v: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let n = v.len();
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    let w = v - &e;
    let ww = w.norm_squared();
    if ww < 1e-28 {
        return DMatrix::identity(n, n);
    }
    DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / ww)
}

/// Extract `(λ, v(g))` of a matrix in the adapted frame `q`, verifying the
/// block pattern. The global matrix sign is normalized so λ > 0.
fn corner_value(q: &DMatrix<f64>, m: &DMatrix<f64>, tol: &Tol) -> Result<(f64, f64)> {
    let np1 = m.nrows();
    let p = np1 - 2;
    let last = np1 - 1;
    let mut mp = q * m * q.transpose();
    if mp[(last, last)] < 0.0 {
        mp = -mp;
    }
    let scale = mp.norm();
    let mut res2 = 0.0;
    for i in 0..p {
        res2 += mp[(i, p)].powi(2) + mp[(i, last)].powi(2);
        res2 += mp[(p, i)].powi(2) + mp[(last, i)].powi(2);
    }
    res2 += mp[(last, p)].powi(2);
    res2 += (mp[(p, p)] - mp[(last, last)]).powi(2);
    let residual = res2.sqrt() / scale;
    if residual > tol.mat {
        return Err(GeomError::NotBlockForm { residual });
    }
    let lam = mp[(last, last)];
    if lam <= 0.0 {
        return Err(GeomError::NotBlockForm { residual: 1.0 });
    }
    Ok((lam, mp[(p, last)] / lam))
}

/// Read the translation cocycle of the sample along `circle`, a
/// 2-dimensional subspace containing the vertex. Every ball element must be
/// in the block pattern; the adapted frame sends the vertex to coordinate
/// `n−1` and the circle partner to coordinate `n`.
pub fn translation_cocycle(
    sample: &GroupSample,
    v: &ProjPoint,
    circle: &Subspace,
    tol: &Tol,
) -> Result<TranslationCocycle> {
    let np1 = sample.ambient();
    if circle.linear_dim() != 2 {
        return Err(GeomError::DimensionMismatch {
            expected: 2,
            got: circle.linear_dim(),
        });
    }
    if !circle.contains(v, 1e-8) {
        return Err(GeomError::NotFixed {
            residual: (circle.project(v) - v.vec()).norm(),
        });
    }
    let vhat = v.vec();
    // Circle partner: the basis direction orthogonal to the vertex.
    let mut u = DVector::zeros(np1);
    let mut best = 0.0;
    for c in 0..circle.basis().ncols() {
        let col = circle.basis().column(c).into_owned();
        let residual = &col - vhat * col.dot(vhat);
        if residual.norm() > best {
            best = residual.norm();
            u = residual;
        }
    }
    if best < 1e-8 {
        return Err(GeomError::DegenerateConfig {
            which: "circle partner",
        });
    }
    u /= u.norm();
    // Deterministic gauge: make the largest-magnitude entry positive.
    let imax = (0..np1).fold(0, |a, i| if u[i].abs() > u[a].abs() { i } else { a });
    if u[imax] < 0.0 {
        u = -u;
    }

    let p = np1 - 2;
    let h1 = reflect_to_axis(vhat, p);
    let u1 = &h1 * &u;
    let h2 = reflect_to_axis(&u1, np1 - 1);
    let q = &h2 * &h1;

    let mut values = Vec::with_capacity(sample.len());
    let mut words = Vec::with_capacity(sample.len());
    let mut lambdas = Vec::with_capacity(sample.len());
    for e in &sample.ball {
        let (lam, val) = corner_value(&q, e.map.matrix(), tol)?;
        values.push(val);
        lambdas.push(lam);
        words.push(e.word.clone());
    }
    let mut generator_values = Vec::with_capacity(sample.generators.len());
    for g in &sample.generators {
        let (_, val) = corner_value(&q, g.matrix(), tol)?;
        generator_values.push(val);
    }

    // The cocycle identities hold exactly for matrices in the pattern; any
    // defect measures how far the sample drifts from the block form.
    let ids: Vec<usize> = sample.nonidentity().map(|(i, _)| i).take(15).collect();
    let mut additivity_defect: f64 = 0.0;
    let mut conjugation_defect: f64 = 0.0;
    let mut budget = 200;
    'outer: for &i in &ids {
        for &j in &ids {
            if budget == 0 {
                break 'outer;
            }
            budget -= 1;
            let prod = sample.ball[i].map.matrix() * sample.ball[j].map.matrix();
            if let Ok((_, val)) = corner_value(&q, &prod, tol) {
                additivity_defect = additivity_defect.max((val - values[i] - values[j]).abs());
            }
            let hi = sample.ball[i].map.matrix();
            if let Some(hinv) = hi.clone().try_inverse() {
                let conj = hi * sample.ball[j].map.matrix() * hinv;
                if let Ok((_, val)) = corner_value(&q, &conj, tol) {
                    conjugation_defect = conjugation_defect.max((val - values[j]).abs());
                }
            }
        }
    }

    // The S-block subspace in ambient coordinates: preimage of the first
    // n−1 coordinates under the adapted frame.
    let mut db = DMatrix::zeros(np1, p);
    for c in 0..p {
        let col = q.transpose().column(c).into_owned();
        db.set_column(c, &col);
    }
    Ok(TranslationCocycle {
        vertex: v.clone(),
        values,
        words,
        vertex_eigenvalues: lambdas,
        generator_values,
        d_block: Subspace::from_basis(db),
        additivity_defect,
        conjugation_defect,
    })
}

/// Result of the positive translation test: among the elements whose
/// vertex eigenvalue dominates the `S`-block spectrum, the cocycle values
/// must share one strict sign, and the ratio `v(g)/log(λ_v/λ_D)` is
/// bounded below by `c₁`.
#[derive(Debug, Clone, Serialize)]
pub struct PositiveTranslation {
    pub pass: bool,
    /// `min v(g)/log(λ_v(g)/λ_D(g))` over qualifying elements.
    pub c1: Option<f64>,
    pub qualifying: usize,
    /// No qualifying elements in the ball: the test passes by default and
    /// says so.
    pub vacuous: bool,
    /// The uniform sign was negative: the circle gauge was flipped to make
    /// the statement positive.
    pub gauge_flipped: bool,
    pub failures: Vec<String>,
}

/// Check positivity of the translation cocycle over the sampled ball.
pub fn positive_translation_check(
    sample: &GroupSample,
    coc: &TranslationCocycle,
    tol: &Tol,
) -> Result<PositiveTranslation> {
    let b = coc.d_block.basis();
    let mut qualifying = Vec::new();
    for (i, e) in sample.ball.iter().enumerate() {
        if e.word_length == 0 {
            continue;
        }
        let a_d = b.transpose() * e.map.matrix() * b;
        let lam_d = top_modulus(&a_d)?;
        let lam_v = coc.vertex_eigenvalues[i];
        if lam_v.ln() - lam_d.ln() > tol.gap {
            qualifying.push(i);
        }
    }
    if qualifying.is_empty() {
        return Ok(PositiveTranslation {
            pass: true,
            c1: None,
            qualifying: 0,
            vacuous: true,
            gauge_flipped: false,
            failures: Vec::new(),
        });
    }
    let mut pos = 0;
    let mut neg = 0;
    for &i in &qualifying {
        if coc.values[i] > tol.coc {
            pos += 1;
        } else if coc.values[i] < -tol.coc {
            neg += 1;
        }
    }
    let gauge_flipped = neg > pos;
    let sign = if gauge_flipped { -1.0 } else { 1.0 };
    let mut failures = Vec::new();
    let mut c1 = f64::INFINITY;
    for &i in &qualifying {
        let val = sign * coc.values[i];
        if val <= tol.coc {
            failures.push(coc.words[i].clone());
            continue;
        }
        let a_d = b.transpose() * sample.ball[i].map.matrix() * b;
        let lam_d = top_modulus(&a_d)?;
        let denom = coc.vertex_eigenvalues[i].ln() - lam_d.ln();
        c1 = c1.min(val / denom);
    }
    let pass = failures.is_empty();
    Ok(PositiveTranslation {
        pass,
        c1: if pass { Some(c1) } else { None },
        qualifying: qualifying.len(),
        vacuous: false,
        gauge_flipped,
        failures,
    })
}

/// Largest eigenvalue modulus of a (not necessarily normalized) real
/// matrix.
fn top_modulus(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let eigs = m.clone().complex_eigenvalues();
    let mut top: f64 = 0.0;
    for z in eigs.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(GeomError::EigenFailure);
        }
        top = top.max(z.norm());
    }
    Ok(top)
}

// ---------------------------------------------------------------------------
// Quasi-lens construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct QuasiLensAudit {
    /// Smallest angle from the hull to the vertex antipode.
    pub exclusion_radius: f64,
    /// Closest orbit approach to the antipode at truncation |k| ≤ 8 and
    /// |k| ≤ 16: stability of the pair certifies the truncation.
    pub truncation_margins: (f64, f64),
    pub orbit_count: usize,
}

/// The hull of a quasi-translation orbit and its antipode-exclusion audit.
#[derive(Debug, Clone)]
pub struct QuasiLens {
    pub hull: ConvexBody,
    pub audit: QuasiLensAudit,
}

const QL_TRUNCATION: i64 = 8;

/// Hull the orbit of a seed under `ball × ζ^k` for a quasi-translation ζ
/// fixing `v`, and certify that the hull stays away from `−v`. The vertex
/// is an explicit argument: a quasi-translation distinguishes the vertex
/// from its antipode, and the mirror group is checked against the
/// opposite one.
pub fn quasi_lens_construct(
    sample: &GroupSample,
    zeta: &ProjMap,
    v: &ProjPoint,
    seed: &ProjPoint,
    tol: &Tol,
) -> Result<QuasiLens> {
    let np1 = sample.ambient();
    if zeta.ambient() != np1 || v.ambient() != np1 || seed.ambient() != np1 {
        return Err(GeomError::DimensionMismatch {
            expected: np1,
            got: zeta.ambient(),
        });
    }
    // ζ must genuinely quasi-translate at v: radial block form plus a rank-2
    // Jordan structure over the vertex eigenvalue.
    let bf = vertex_block_form(zeta, v, BlockKind::Radial, tol)?;
    let m = zeta.matrix();
    let lam = bf.vertex_eigenvalue;
    let a = m - DMatrix::identity(np1, np1) * lam;
    let a2 = &a * &a;
    let k2 = kernel_basis(&a2, 1e-6);
    if k2.len() < 2 {
        return Err(GeomError::NotBlockForm {
            residual: k2.len() as f64,
        });
    }
    let vhat = v.vec();
    let mut partner = DVector::zeros(np1);
    let mut best = 0.0;
    for col in &k2 {
        let residual = col - vhat * col.dot(vhat);
        if residual.norm() > best {
            best = residual.norm();
            partner = residual;
        }
    }
    if best < 1e-8 {
        return Err(GeomError::NotBlockForm { residual: best });
    }
    partner /= partner.norm();
    let c = vhat.dot(&(&a * &partner));
    if c.abs() <= tol.eig * m.norm() {
        // Diagonalizable at the vertex eigenvalue: no translation part.
        return Err(GeomError::NotBlockForm {
            residual: c.abs() / m.norm(),
        });
    }

    // Powers ζ^k for |k| ≤ 16 (the far half only feeds the stability
    // margin; the hull uses |k| ≤ 8).
    let zinv = zeta.inverse()?;
    let mut pows: Vec<(i64, ProjMap)> = vec![(0, ProjMap::identity(np1))];
    let mut fwd = ProjMap::identity(np1);
    let mut bwd = ProjMap::identity(np1);
    for k in 1..=(2 * QL_TRUNCATION) {
        fwd = fwd.compose(zeta);
        bwd = bwd.compose(&zinv);
        pows.push((k, fwd.clone()));
        pows.push((-k, bwd.clone()));
    }
    let antipode = v.antipode();
    let mut hull_pts = Vec::new();
    let mut margin8 = f64::INFINITY;
    let mut margin16 = f64::INFINITY;
    for e in &sample.ball {
        for (k, zp) in &pows {
            let p = e.map.apply(&zp.apply(seed));
            let ang = p.angle_to(&antipode);
            margin16 = margin16.min(ang);
            if k.abs() <= QL_TRUNCATION {
                margin8 = margin8.min(ang);
                hull_pts.push(p);
            }
        }
    }
    // Doubling the truncation must not erode the antipode margin: a
    // shrinking margin means the orbit accumulates at −v and no properly
    // convex hull exists at any truncation.
    if margin16 < margin8 / 1.5 - 1e-12 || margin16 < tol.geo.max(1e-9) {
        return Err(GeomError::HullTouchesAntipode { margin: margin16 });
    }
    let orbit_count = hull_pts.len();
    let hull = ConvexBody::polytope(hull_pts, tol).map_err(|_| GeomError::HullTouchesAntipode {
        margin: margin16,
    })?;
    if hull.contains(&antipode, tol) != Location::Outside {
        return Err(GeomError::HullTouchesAntipode { margin: margin16 });
    }
    let mut exclusion_radius = f64::INFINITY;
    for p in hull
        .sample_boundary(1024, 0x9d, tol)
        .iter()
        .chain(hull.vertices().expect("polytope").iter())
    {
        exclusion_radius = exclusion_radius.min(p.angle_to(&antipode));
    }
    Ok(QuasiLens {
        hull,
        audit: QuasiLensAudit {
            exclusion_radius,
            truncation_margins: (margin8, margin16),
            orbit_count,
        },
    })
}

// ---------------------------------------------------------------------------
// Asymptotic hyperplanes
// ---------------------------------------------------------------------------

/// A boundary point of the base paired with the hyperplane asymptotic to
/// the domain there, detected from an element's attracting data.
#[derive(Debug, Clone)]
pub struct AsymptoticPair {
    pub point: ProjPoint,
    pub hyperplane: Hyperplane,
    pub word: String,
}

#[derive(Debug, Clone)]
pub struct AsymptoticField {
    pub pairs: Vec<AsymptoticPair>,
    /// Largest |⟨W_g, x_g⟩|: each hyperplane should pass through its point.
    pub max_incidence: f64,
    /// Smallest angle between an asymptotic hyperplane and the boundary
    /// hyperplane.
    pub min_transversality: f64,
    /// Pairs whose hyperplane separates interior samples of the base.
    pub support_violations: usize,
    /// Largest hyperplane deviation among pairs sharing a boundary point.
    pub uniqueness_defect: f64,
    pub round_trip_hausdorff: f64,
}

/// Compute the asymptotic hyperplane field of a totally geodesic end:
/// attracting points of the sample paired with the duals of the attracting
/// points of the dual sample. Gated on the uniform middle eigenvalue
/// condition of the dual end.
pub fn asymptotic_hyperplanes(
    sample: &GroupSample,
    boundary: &Hyperplane,
    omega: &ConvexBody,
    tol: &Tol,
) -> Result<AsymptoticField> {
    let dt = dual_tube(sample, boundary, omega, tol)?;
    let v = dt.tube.vertex().clone();
    let umec = check_umec(&dt.dual_sample, &v, EndKind::R, tol)?;
    if !umec.pass {
        return Err(GeomError::UmecFailed {
            violations: umec.violations.len(),
        });
    }
    let primal = TubeDomain::new(v.clone(), omega.clone(), tol)?;
    let mut loose = tol.clone();
    loose.geo = loose.geo.max(1e-6);
    let interior = omega.sample_body(128, 0x5afe, tol);

    let mut raw: Vec<(DVector<f64>, Hyperplane, String)> = Vec::new();
    let mut max_incidence: f64 = 0.0;
    let mut min_transversality = f64::INFINITY;
    let mut support_violations = 0;
    for (_, e) in sample.nonidentity() {
        let Some(x) = attracting_direction(e.map.matrix(), tol) else {
            continue;
        };
        if x.dot(v.vec()).abs() > 1e-6 {
            continue;
        }
        let dual = e.map.dual_map()?;
        let Some(w) = attracting_direction(dual.matrix(), tol) else {
            continue;
        };
        let hyper = Hyperplane::new(w.clone(), tol)?;
        // Representative sign: the one whose link direction meets the base.
        let mut signed = None;
        for s in [1.0_f64, -1.0] {
            let cand = ProjPoint::new(&x * s, tol)?;
            if let Ok(link) = primal.link_direction(&cand, tol) {
                if omega.contains(&link, &loose) != Location::Outside {
                    signed = Some(cand);
                    break;
                }
            }
        }
        let Some(point) = signed else { continue };
        max_incidence = max_incidence.max(hyper.eval(&point).abs());
        let cosb = hyper
            .covector()
            .dot(boundary.covector())
            .abs()
            .min(1.0);
        min_transversality = min_transversality.min(cosb.acos());
        let mut plus = 0;
        let mut minus = 0;
        for s in &interior {
            let amb = primal.ambient_direction(s, tol)?;
            let val = hyper.eval(&amb);
            if val > 1e-9 {
                plus += 1;
            } else if val < -1e-9 {
                minus += 1;
            }
        }
        if plus > 0 && minus > 0 {
            support_violations += 1;
        }
        raw.push((point.vec().clone(), hyper, e.word.clone()));
    }
    if raw.is_empty() {
        return Err(GeomError::NoProximalElements);
    }

    // Same boundary point ⇒ same hyperplane; measure the worst deviation,
    // then deduplicate for the output list.
    let mut uniqueness_defect: f64 = 0.0;
    for i in 0..raw.len() {
        for j in (i + 1)..raw.len() {
            let pa = (raw[i].0.dot(&raw[j].0).abs().min(1.0)).acos();
            if pa < 1e-6 {
                let ca = raw[i]
                    .1
                    .covector()
                    .dot(raw[j].1.covector())
                    .abs()
                    .min(1.0);
                uniqueness_defect = uniqueness_defect.max(ca.acos());
            }
        }
    }
    let mut index = DirIndex::new(sample.ambient());
    let mut pairs = Vec::new();
    for (xv, hyper, word) in raw {
        if index.insert(&xv) {
            pairs.push(AsymptoticPair {
                point: ProjPoint::new(xv, tol)?,
                hyperplane: hyper,
                word,
            });
        }
    }
    Ok(AsymptoticField {
        pairs,
        max_incidence,
        min_transversality,
        support_violations,
        uniqueness_defect,
        round_trip_hausdorff: dt.round_trip_hausdorff,
    })
}

// ---------------------------------------------------------------------------
// End classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndVerdict {
    Horospherical,
    Lens,
    GeneralizedLens,
    QuasiLens,
    TotallyGeodesic,
    Inconclusive,
}

/// The serialized classification report.
#[derive(Debug, Clone, Serialize)]
pub struct EndEvidence {
    pub verdict: EndVerdict,
    pub ball_radius: usize,
    #[serde(rename = "best_C")]
    pub best_c: Option<f64>,
    /// Angular distance of the raw limit cloud from the vertex axis.
    pub delta: Option<f64>,
    pub violations: usize,
    pub caveats: Vec<String>,
}

/// An end datum under classification: the sample with either a vertex
/// (radial) or a preserved hyperplane (totally geodesic).
#[derive(Debug, Clone)]
pub struct EndData {
    pub kind: EndKind,
    pub sample: GroupSample,
    pub vertex: Option<ProjPoint>,
    pub hyperplane: Option<Hyperplane>,
    pub verdict: Option<EndVerdict>,
    pub evidence: Option<EndEvidence>,
}

impl EndData {
    pub fn radial(sample: GroupSample, vertex: ProjPoint) -> EndData {
        EndData {
            kind: EndKind::R,
            sample,
            vertex: Some(vertex),
            hyperplane: None,
            verdict: None,
            evidence: None,
        }
    }

    pub fn totally_geodesic(sample: GroupSample, hyperplane: Hyperplane) -> EndData {
        EndData {
            kind: EndKind::T,
            sample,
            vertex: None,
            hyperplane: Some(hyperplane),
            verdict: None,
            evidence: None,
        }
    }
}

/// Unit-spectrum test with two layers: exact nilpotency of `m − 1`, then a
/// spectral-spread gate adapted to the conditioning of defective
/// eigenvalues (a Jordan block of size k perturbed by ε moves its
/// eigenvalues by ε^{1/k}, so a fixed tolerance would be meaningless).
fn is_horospherical(m: &DMatrix<f64>, tol: &Tol) -> bool {
    let np1 = m.nrows();
    let p = m - DMatrix::identity(np1, np1);
    let mut pw = p.clone();
    for _ in 1..np1 {
        pw = &pw * &p;
    }
    if pw.norm() <= 1e-10 * (1.0 + m.norm()).powi(np1 as i32) {
        return true;
    }
    match eigen_profile_of(m, tol) {
        Ok(pr) => {
            let gate = tol
                .eig
                .max(3.0 * (1e-15 * m.norm()).powf(1.0 / np1 as f64));
            pr.log_spread() <= gate
        }
        Err(_) => false,
    }
}

/// Find an invariant circle candidate for the quasi-translation route: an
/// element with a rank-2 Jordan structure over its vertex eigenvalue whose
/// plane (vertex + partner) has a sample-invariant complement.
fn detect_quasi_circle(
    sample: &GroupSample,
    v: &ProjPoint,
    tol: &Tol,
) -> Option<Subspace> {
    let np1 = sample.ambient();
    let vhat = v.vec();
    for (_, e) in sample.nonidentity().take(200) {
        let Ok(bf) = vertex_block_form(&e.map, v, BlockKind::Radial, tol) else {
            continue;
        };
        let m = e.map.matrix();
        let a = m - DMatrix::identity(np1, np1) * bf.vertex_eigenvalue;
        let k2 = kernel_basis(&(&a * &a), 1e-6);
        if k2.len() < 2 {
            continue;
        }
        let mut partner = DVector::zeros(np1);
        let mut best = 0.0;
        for col in &k2 {
            let residual = col - vhat * col.dot(vhat);
            if residual.norm() > best {
                best = residual.norm();
                partner = residual;
            }
        }
        if best < 1e-8 {
            continue;
        }
        partner /= partner.norm();
        if vhat.dot(&(&a * &partner)).abs() <= tol.eig * m.norm() {
            continue;
        }
        // The complement of the circle plane must be preserved by every
        // generator for the block pattern to make sense globally.
        let pc = vhat * vhat.transpose() + &partner * partner.transpose();
        let n_id = DMatrix::identity(np1, np1);
        let pd = &n_id - &pc;
        let mut invariant = true;
        for g in &sample.generators {
            let off = (&pc * g.matrix() * &pd).norm() / g.matrix().norm();
            if off > tol.mat {
                invariant = false;
                break;
            }
        }
        if !invariant {
            continue;
        }
        let mut basis = DMatrix::zeros(np1, 2);
        basis.set_column(0, vhat);
        basis.set_column(1, &partner);
        return Some(Subspace::from_basis(basis));
    }
    None
}

/// Classify an end datum: horospherical (unit spectrum), lens or
/// generalized lens / totally geodesic (uniform middle eigenvalue
/// condition), quasi-lens (weak condition + positive translation cocycle),
/// or inconclusive. The verdict certifies only the sampled ball.
pub fn classify_end(mut data: EndData, tol: &Tol) -> Result<EndData> {
    let (v, sample, is_t) = match data.kind {
        EndKind::R => {
            let v = data
                .vertex
                .clone()
                .ok_or_else(|| GeomError::Schema("radial end datum needs a vertex".into()))?;
            (v, data.sample.clone(), false)
        }
        EndKind::T => {
            let h = data.hyperplane.clone().ok_or_else(|| {
                GeomError::Schema("totally geodesic end datum needs a hyperplane".into())
            })?;
            (h.dual_point(), data.sample.dualized()?, true)
        }
    };
    let mut caveats: Vec<String> = Vec::new();
    let mut violations = 0;
    let mut best_c = None;

    // Raw limit cloud (unsigned attracting directions): the distance of the
    // visible limit material from the vertex axis.
    let mut cloud: Vec<DVector<f64>> = Vec::new();
    let mut delta: Option<f64> = None;
    for (_, e) in sample.nonidentity() {
        if let Some(x) = attracting_direction(e.map.matrix(), tol) {
            if x.dot(v.vec()).abs() > 1.0 - 1e-12 {
                continue;
            }
            let d = (x.dot(v.vec()).abs().min(1.0)).acos();
            delta = Some(delta.map_or(d, |cur: f64| cur.min(d)));
            cloud.push(x);
        }
    }

    let nonidentity = sample.nonidentity().count();
    let verdict = if nonidentity == 0 {
        caveats.push("the ball contains no nonidentity elements".into());
        EndVerdict::Inconclusive
    } else if sample
        .nonidentity()
        .all(|(_, e)| is_horospherical(e.map.matrix(), tol))
    {
        caveats.push(
            "horospherical verdict is spectral: it assumes a properly convex ambient domain \
             (no invariant horoball is constructed)"
                .into(),
        );
        EndVerdict::Horospherical
    } else {
        let umec = check_umec(&sample, &v, EndKind::R, tol)?;
        violations = umec.violations.len();
        if umec.pass && umec.tested > 0 {
            best_c = umec.best_c;
            caveats.extend(umec.caveats.iter().cloned());
            if is_t {
                EndVerdict::TotallyGeodesic
            } else {
                let flat = invariant_span_hyperplane(&cloud, &sample, tol).is_some();
                let split = factor_decomposition(&sample, &v, tol)?;
                if flat || split.l0() > 1 {
                    EndVerdict::Lens
                } else {
                    caveats.push(
                        "uniform condition holds but the limit cloud shows no flat or split \
                         structure; the lens is generalized"
                            .into(),
                    );
                    EndVerdict::GeneralizedLens
                }
            }
        } else if !is_t {
            let weak = check_weak_umec(&sample, &v, tol)?;
            caveats.extend(weak.caveats.iter().cloned());
            if weak.pass {
                let quasi = detect_quasi_circle(&sample, &v, tol).and_then(|circle| {
                    let coc = translation_cocycle(&sample, &v, &circle, tol).ok()?;
                    let pt = positive_translation_check(&sample, &coc, tol).ok()?;
                    Some((coc, pt))
                });
                match quasi {
                    Some((_, pt)) if pt.pass && !pt.vacuous => {
                        if pt.gauge_flipped {
                            caveats.push("translation signs are uniform after a gauge flip".into());
                        }
                        EndVerdict::QuasiLens
                    }
                    Some((_, pt)) if pt.pass && pt.vacuous => {
                        caveats.push(
                            "weak condition holds but no element qualifies for the translation \
                             test"
                                .into(),
                        );
                        EndVerdict::Inconclusive
                    }
                    _ => {
                        caveats.push("translation cocycle not positive".into());
                        EndVerdict::Inconclusive
                    }
                }
            } else {
                caveats.push("neither the uniform nor the weak condition holds".into());
                EndVerdict::Inconclusive
            }
        } else {
            caveats.push("dual uniform condition fails".into());
            EndVerdict::Inconclusive
        }
    };
    if !caveats.iter().any(|c| c.contains("certified up to")) {
        caveats.push(format!(
            "certified up to word-ball radius {}",
            sample.radius
        ));
    }
    data.evidence = Some(EndEvidence {
        verdict,
        ball_radius: sample.radius,
        best_c,
        delta,
        violations,
        caveats,
    });
    data.verdict = Some(verdict);
    Ok(data)
}

// ---------------------------------------------------------------------------

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| {
            let u: f64 = rng.random::<f64>().max(1e-12);
            let a: f64 = rng.random();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * a).cos()
        });
        let nm = v.norm();
        if nm > 1e-6 {
            return v / nm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomy::word_ball;
    use approx::assert_relative_eq;

    fn t() -> Tol {
        Tol::default()
    }

    fn pt(v: &[f64]) -> ProjPoint {
        ProjPoint::from_slice(v, &t()).unwrap()
    }

    fn pm(rows: &[&[f64]]) -> ProjMap {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        ProjMap::new(m, &t()).unwrap()
    }

    /// diag(2, 1/2, 1) fixed-vertex sample at v = e3, interval base tube.
    fn diag_fixture(radius: usize) -> (GroupSample, TubeDomain) {
        let g = pm(&[&[2.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 1.0]]);
        let sample = word_ball(&[g], radius, &t()).unwrap();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], &t()).unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(3, 2), base, &t()).unwrap();
        (sample, tube)
    }

    /// Z^2 diagonal sample in SL(4) at v = e4, triangle base tube.
    fn z2_fixture(radius: usize) -> (GroupSample, TubeDomain) {
        let a = pm(&[
            &[2.0, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let b = pm(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 2.0, 0.0, 0.0],
            &[0.0, 0.0, 0.5, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let sample = word_ball(&[a, b], radius, &t()).unwrap();
        let base = ConvexBody::polytope(
            vec![pt(&[1.0, 0.0, 0.0]), pt(&[0.0, 1.0, 0.0]), pt(&[0.0, 0.0, 1.0])],
            &t(),
        )
        .unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(4, 3), base, &t()).unwrap();
        (sample, tube)
    }

    fn boost4(axis: usize, c: f64) -> ProjMap {
        let s = (c * c - 1.0).sqrt();
        let mut m = DMatrix::identity(4, 4);
        m[(axis, axis)] = c;
        m[(axis, 2)] = s;
        m[(2, axis)] = s;
        m[(2, 2)] = c;
        ProjMap::new(m, &t()).unwrap()
    }

    fn zeta_quasi3(sign: f64) -> ProjMap {
        pm(&[&[0.5, 0.0, 0.0], &[0.0, 1.0, sign], &[0.0, 0.0, 1.0]])
    }

    #[test]
    fn radial_projection_oracles() {
        let tol = t();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], &tol).unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(3, 2), base, &tol).unwrap();
        let x = pt(&[1.0, 0.0, 1.0]);
        let proj = radial_projection(&tube, &x, &tol).unwrap();
        assert!(proj.approx_eq(&ProjPoint::basis(3, 0), 1e-12));
        // A point already orthogonal to the vertex projects to itself.
        let y = pt(&[0.6, 0.8, 0.0]);
        assert!(radial_projection(&tube, &y, &tol).unwrap().approx_eq(&y, 1e-12));
        // Near the antipode the projection is still the segment direction.
        let z = pt(&[1e-6, 0.0, -1.0]);
        let pz = radial_projection(&tube, &z, &tol).unwrap();
        assert!(pz.approx_eq(&ProjPoint::basis(3, 0), 1e-9));
        // The vertex itself has no link direction.
        assert!(matches!(
            radial_projection(&tube, &ProjPoint::basis(3, 2), &tol),
            Err(GeomError::AtVertex)
        ));
    }

    #[test]
    fn tube_lift_and_location() {
        let tol = t();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], &tol).unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(3, 2), base, &tol).unwrap();
        let mid = pt(&[1.0, 1.0]);
        for theta in [0.3, std::f64::consts::FRAC_PI_2, 2.6] {
            let x = tube.lift(&mid, theta, &tol).unwrap();
            assert_eq!(tube.location(&x, &tol), Location::Interior);
            assert_relative_eq!(
                x.angle_to(tube.vertex()),
                theta,
                epsilon = 1e-12
            );
        }
        let lateral = tube.lift(&pt(&[1.0, 0.0]), 1.0, &tol).unwrap();
        assert_eq!(tube.location(&lateral, &tol), Location::Boundary);
        let outside = tube.lift(&pt(&[1.0, -0.4]), 1.0, &tol).unwrap();
        assert_eq!(tube.location(&outside, &tol), Location::Outside);
        assert_eq!(
            tube.location(&ProjPoint::basis(3, 2), &tol),
            Location::Boundary
        );
    }

    #[test]
    fn support_hausdorff_oracles() {
        let tol = t();
        let square = ConvexBody::polytope(
            vec![
                pt(&[0.5, 0.5, 1.0]),
                pt(&[-0.5, 0.5, 1.0]),
                pt(&[-0.5, -0.5, 1.0]),
                pt(&[0.5, -0.5, 1.0]),
            ],
            &tol,
        )
        .unwrap();
        assert!(support_hausdorff(&square, &square, &tol).unwrap() < 1e-14);
        let shifted = ConvexBody::polytope(
            vec![
                pt(&[0.6, 0.5, 1.0]),
                pt(&[-0.4, 0.5, 1.0]),
                pt(&[-0.4, -0.5, 1.0]),
                pt(&[0.6, -0.5, 1.0]),
            ],
            &tol,
        )
        .unwrap();
        let d = support_hausdorff(&square, &shifted, &tol).unwrap();
        assert!((d - 0.1).abs() < 1e-9, "translation distance 0.1, got {d}");
        // Uniformly inscribed polygon against the disk: the support gap is
        // the sagitta 1 − cos(π/4096) ≈ 2.9e−7.
        let disk = ConvexBody::unit_ball(2, &tol).unwrap();
        let poly =
            ConvexBody::polytope(boundary_cloud(&disk, 4096, 3, &tol), &tol).unwrap();
        let gap = support_hausdorff(&disk, &poly, &tol).unwrap();
        assert!(gap < 1e-6, "inscribed-polygon gap {gap}");
        assert!(gap > 1e-8, "grid polygon is not the disk itself");
    }

    #[test]
    fn dual_tube_interval_matches_hand_polar() {
        let tol = t();
        let (a, b) = (-0.4_f64, 0.7_f64);
        let omega = ConvexBody::polytope(
            vec![pt(&[a.cos(), a.sin()]), pt(&[b.cos(), b.sin()])],
            &tol,
        )
        .unwrap();
        let sample = word_ball(&[ProjMap::identity(3)], 1, &tol).unwrap();
        let boundary = Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 1.0]), &tol).unwrap();
        let dt = dual_tube(&sample, &boundary, &omega, &tol).unwrap();
        assert!(dt.round_trip_hausdorff < 1e-9);
        assert!(dt.tube.vertex().approx_eq(&ProjPoint::basis(3, 2), 1e-12));
        // Positive polar of the arc [a, b]: the arc [b − π/2, a + π/2].
        let verts = dt.tube.base().vertices().unwrap();
        assert_eq!(verts.len(), 2);
        let expect = [b - std::f64::consts::FRAC_PI_2, a + std::f64::consts::FRAC_PI_2];
        for e in expect {
            let target = pt(&[e.cos(), e.sin()]);
            assert!(
                verts.iter().any(|w| w.approx_eq(&target, 1e-9)),
                "missing polar endpoint at angle {e}"
            );
        }
    }

    #[test]
    fn dual_tube_disk_roundtrip() {
        let tol = t();
        let gens = vec![boost4(0, 2.0), boost4(1, 2.0)];
        let sample = word_ball(&gens, 2, &tol).unwrap();
        let boundary =
            Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]), &tol).unwrap();
        let omega = ConvexBody::unit_ball(2, &tol).unwrap();
        let dt = dual_tube(&sample, &boundary, &omega, &tol).unwrap();
        assert!(
            dt.round_trip_hausdorff < 1e-6,
            "round trip {}",
            dt.round_trip_hausdorff
        );
        // The Klein disk is self-dual.
        assert!(support_hausdorff(&omega, dt.tube.base(), &tol).unwrap() < 1e-9);
        // The dual sample fixes the dual point radially.
        for (_, e) in dt.dual_sample.nonidentity() {
            vertex_block_form(&e.map, dt.tube.vertex(), BlockKind::Radial, &tol).unwrap();
        }
    }

    #[test]
    fn dual_tube_square_double_dual() {
        let tol = t();
        let omega = ConvexBody::polytope(
            vec![
                pt(&[0.6, 0.6, 1.0]),
                pt(&[-0.6, 0.6, 1.0]),
                pt(&[-0.6, -0.6, 1.0]),
                pt(&[0.6, -0.6, 1.0]),
            ],
            &tol,
        )
        .unwrap();
        let sample = word_ball(&[ProjMap::identity(4)], 1, &tol).unwrap();
        let boundary =
            Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]), &tol).unwrap();
        let dt = dual_tube(&sample, &boundary, &omega, &tol).unwrap();
        assert!(dt.round_trip_hausdorff < 1e-9);
        // Facet/vertex counts swap (a square has four of each).
        assert_eq!(dt.tube.base().vertices().unwrap().len(), 4);
        let dd = dt.tube.base().dual_body(&tol).unwrap();
        assert!(support_hausdorff(&omega, &dd, &tol).unwrap() < 1e-9);
    }

    #[test]
    fn dual_tube_rejects_nonpreserving_sample() {
        let tol = t();
        // Rotation mixing the boundary hyperplane with its complement.
        let c = 0.3_f64.cos();
        let s = 0.3_f64.sin();
        let rot = pm(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, c, -s],
            &[0.0, 0.0, s, c],
        ]);
        let sample = word_ball(&[rot], 1, &tol).unwrap();
        let boundary =
            Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]), &tol).unwrap();
        let omega = ConvexBody::unit_ball(2, &tol).unwrap();
        assert!(matches!(
            dual_tube(&sample, &boundary, &omega, &tol),
            Err(GeomError::NotBoundaryPreserving { .. })
        ));
    }

    #[test]
    fn limit_set_diagonal_fixture() {
        let tol = t();
        let (sample, tube) = diag_fixture(6);
        let ls = limit_set(&sample, &tube, &tol).unwrap();
        assert_eq!(ls.points.len(), 2);
        let e1 = ProjPoint::basis(3, 0);
        let e2 = ProjPoint::basis(3, 1);
        for target in [&e1, &e2] {
            assert!(ls.points.iter().any(|p| p.approx_eq(target, 1e-10)));
        }
        assert!(ls.lateral.iter().all(|&l| l), "both endpoints are lateral");
        let h = ls.invariant_hyperplane.expect("span hyperplane");
        assert!(h.covector()[2].abs() > 1.0 - 1e-10);
        assert_eq!(ls.ball_radius, 6);
    }

    #[test]
    fn limit_set_requires_proximal_elements() {
        let tol = t();
        let u = pm(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]);
        let sample = word_ball(&[u], 3, &tol).unwrap();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.1]), pt(&[1.0, -0.1])], &tol).unwrap();
        // The unipotent fixes e1; use it as the tube vertex.
        let tube = TubeDomain::new(ProjPoint::basis(3, 0), base, &tol).unwrap();
        assert!(matches!(
            limit_set(&sample, &tube, &tol),
            Err(GeomError::NoProximalElements)
        ));
    }

    #[test]
    fn limit_set_equivariant_on_z2() {
        let tol = t();
        let (sample, tube) = z2_fixture(3);
        let ls = limit_set(&sample, &tube, &tol).unwrap();
        assert_eq!(ls.points.len(), 3);
        // The cloud is a single orbit structure: generators permute it.
        for g in &sample.generators {
            for p in &ls.points {
                let q = g.apply(p);
                let d = ls
                    .points
                    .iter()
                    .map(|r| (r.vec() - q.vec()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(d < 1e-9, "image off the cloud by {d}");
            }
        }
        let h = ls.invariant_hyperplane.expect("triangle spans x4 = 0");
        assert!(h.covector()[3].abs() > 1.0 - 1e-10);
    }

    #[test]
    fn distanced_hull_z2_triangle() {
        let tol = t();
        let (sample, tube) = z2_fixture(3);
        let dh = distanced_hull(&sample, &tube, &tol).unwrap();
        assert_relative_eq!(dh.delta, std::f64::consts::FRAC_PI_2, epsilon = 1e-9);
        assert!(dh.flat.is_some());
        assert_eq!(dh.hull.vertices().unwrap().len(), 3);
        assert!(dh.umec.pass);
    }

    #[test]
    fn distanced_hull_gates() {
        let tol = t();
        // Vertex-dominant sample: the middle eigenvalue condition fails.
        let g = pm(&[&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 2.0]]);
        let sample = word_ball(&[g], 3, &tol).unwrap();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], &tol).unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(3, 2), base, &tol).unwrap();
        assert!(matches!(
            distanced_hull(&sample, &tube, &tol),
            Err(GeomError::UmecFailed { violations }) if violations > 0
        ));
        // A base that admits only one limit direction degenerates the hull.
        let (sample2, _) = diag_fixture(5);
        let tiny = ConvexBody::polytope(
            vec![pt(&[1.0, -0.05]), pt(&[1.0, 0.05])],
            &tol,
        )
        .unwrap();
        let tube2 = TubeDomain::new(ProjPoint::basis(3, 2), tiny, &tol).unwrap();
        assert!(matches!(
            distanced_hull(&sample2, &tube2, &tol),
            Err(GeomError::DegenerateHull { .. })
        ));
    }

    #[test]
    fn lens_cone_diag_audits() {
        let tol = t();
        let (sample, tube) = diag_fixture(6);
        let core = distanced_hull(&sample, &tube, &tol).unwrap();
        let mid = 0.15_f64;
        let up = pt(&[1.0, 1.0, mid * 2.0_f64.sqrt()]);
        let dn = pt(&[1.0, 1.0, -mid * 2.0_f64.sqrt()]);
        let lc =
            lens_cone_from_orbit(&sample, &tube, &core.hull, &[up.clone(), dn], &tol).unwrap();
        assert!(lc.audit.lateral_pass, "lateral audit: {:?}", lc.audit);
        assert!(lc.audit.sides_pass, "sides audit: {:?}", lc.audit);
        assert!(lc.audit.eps_pass, "collar audit: {:?}", lc.audit);
        assert_eq!(lc.audit.rays_tested, lc.audit.rays_hit);
        assert!(lc.audit.rays_tested > LENS_RAYS / 2);
        assert!(lc.audit.pass);
        assert!(lc.lens.included_in(&lc.cone, &tol));
        // One-sided seeds leave the inner half empty: audit (b) fails.
        let one = lens_cone_from_orbit(&sample, &tube, &core.hull, &[up], &tol).unwrap();
        assert!(!one.audit.sides_pass);
        assert_eq!(one.audit.inner_count, 0);
        assert!(!one.audit.pass);
    }

    #[test]
    fn lens_cone_detects_orbit_escape() {
        let tol = t();
        let g = pm(&[&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 2.0]]);
        let sample = word_ball(&[g], 5, &tol).unwrap();
        let base =
            ConvexBody::polytope(vec![pt(&[1.0, 0.0]), pt(&[0.0, 1.0])], &tol).unwrap();
        let tube = TubeDomain::new(ProjPoint::basis(3, 2), base, &tol).unwrap();
        let fake_core = ConvexBody::polytope(
            vec![ProjPoint::basis(3, 0), ProjPoint::basis(3, 1)],
            &tol,
        )
        .unwrap();
        let seed = pt(&[1.0, 1.0, 0.2]);
        assert!(matches!(
            lens_cone_from_orbit(&sample, &tube, &fake_core, &[seed], &tol),
            Err(GeomError::OrbitEscape { .. })
        ));
    }

    #[test]
    fn translation_cocycle_oracle() {
        let tol = t();
        let zeta = pm(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 6.0], &[0.0, 0.0, 2.0]]);
        let sample = word_ball(&[zeta], 4, &tol).unwrap();
        let v = ProjPoint::basis(3, 1);
        let mut circle = DMatrix::zeros(3, 2);
        circle[(1, 0)] = 1.0;
        circle[(2, 1)] = 1.0;
        let circle = Subspace::from_basis(circle);
        let coc = translation_cocycle(&sample, &v, &circle, &tol).unwrap();
        assert_eq!(coc.generator_values.len(), 1);
        assert_relative_eq!(coc.generator_values[0], 3.0, epsilon = 1e-10);
        // Powers ζ^k carry value 3k.
        for (i, w) in coc.words.iter().enumerate() {
            let k = w.chars().filter(|&c| c == 'a').count() as f64
                - w.chars().filter(|&c| c == 'A').count() as f64;
            assert_relative_eq!(coc.values[i], 3.0 * k, epsilon = 1e-9);
        }
        assert!(coc.additivity_defect < 1e-9);
        assert!(coc.conjugation_defect < 1e-9);
        // The S-block lives on the first axis.
        assert_eq!(coc.d_block.linear_dim(), 1);
        assert!(coc.d_block.contains(&ProjPoint::basis(3, 0), 1e-10));
        // A rotation is nowhere near the block pattern.
        let rot = pm(&[
            &[0.3_f64.cos(), -(0.3_f64.sin()), 0.0],
            &[0.3_f64.sin(), 0.3_f64.cos(), 0.0],
            &[0.0, 0.0, 1.0],
        ]);
        let bad = word_ball(&[rot], 2, &tol).unwrap();
        assert!(matches!(
            translation_cocycle(&bad, &v, &circle, &tol),
            Err(GeomError::NotBlockForm { .. })
        ));
    }

    #[test]
    fn positive_translation_oracle_and_failures() {
        let tol = t();
        let v = ProjPoint::basis(3, 1);
        let mut cb = DMatrix::zeros(3, 2);
        cb[(1, 0)] = 1.0;
        cb[(2, 1)] = 1.0;
        let circle = Subspace::from_basis(cb.clone());

        let zeta = pm(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 6.0], &[0.0, 0.0, 2.0]]);
        let sample = word_ball(&[zeta], 4, &tol).unwrap();
        let coc = translation_cocycle(&sample, &v, &circle, &tol).unwrap();
        let pt_report = positive_translation_check(&sample, &coc, &tol).unwrap();
        assert!(pt_report.pass && !pt_report.vacuous && !pt_report.gauge_flipped);
        assert_eq!(pt_report.qualifying, 4, "powers k = 1..4 qualify");
        assert_relative_eq!(
            pt_report.c1.unwrap(),
            3.0 / 2.0_f64.ln(),
            epsilon = 1e-9
        );

        // All-negative values pass with the gauge flipped.
        let zneg = pm(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, -6.0], &[0.0, 0.0, 2.0]]);
        let sneg = word_ball(&[zneg], 3, &tol).unwrap();
        let cneg = translation_cocycle(&sneg, &v, &circle, &tol).unwrap();
        let rneg = positive_translation_check(&sneg, &cneg, &tol).unwrap();
        assert!(rneg.pass && rneg.gauge_flipped);
        assert_relative_eq!(rneg.c1.unwrap(), 3.0 / 2.0_f64.ln(), epsilon = 1e-9);

        // Mixed signs among qualifying elements fail.
        let zflip = pm(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, -2.0], &[0.0, 0.0, 2.0]]);
        let smix = word_ball(&[zeta_mixed_a(), zflip], 2, &tol).unwrap();
        let cmix = translation_cocycle(&smix, &v, &circle, &tol).unwrap();
        let rmix = positive_translation_check(&smix, &cmix, &tol).unwrap();
        assert!(!rmix.pass && !rmix.failures.is_empty());

        // A dominated vertex eigenvalue never qualifies: vacuous pass.
        let zvac = pm(&[
            &[4.0, 0.0, 0.0, 0.0],
            &[0.0, 0.25, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 1.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let svac = word_ball(&[zvac], 3, &tol).unwrap();
        let v4 = ProjPoint::basis(4, 2);
        let mut cb4 = DMatrix::zeros(4, 2);
        cb4[(2, 0)] = 1.0;
        cb4[(3, 1)] = 1.0;
        let circle4 = Subspace::from_basis(cb4);
        let cvac = translation_cocycle(&svac, &v4, &circle4, &tol).unwrap();
        let rvac = positive_translation_check(&svac, &cvac, &tol).unwrap();
        assert!(rvac.pass && rvac.vacuous);
        assert_eq!(rvac.qualifying, 0);
    }

    fn zeta_mixed_a() -> ProjMap {
        pm(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 2.0], &[0.0, 0.0, 2.0]])
    }

    #[test]
    fn quasi_lens_proper_and_negated() {
        let tol = t();
        let v = ProjPoint::basis(3, 1);
        let seed = pt(&[0.6, 0.7, 0.4]);
        let trivial = word_ball(&[ProjMap::identity(3)], 1, &tol).unwrap();
        let ql = quasi_lens_construct(&trivial, &zeta_quasi3(1.0), &v, &seed, &tol).unwrap();
        assert!(
            ql.audit.exclusion_radius > 0.02,
            "exclusion {}",
            ql.audit.exclusion_radius
        );
        let (m8, m16) = ql.audit.truncation_margins;
        assert!(m16 >= m8 / 1.5 - 1e-12);
        assert_eq!(ql.audit.orbit_count, 17);
        assert_eq!(
            ql.hull.contains(&v.antipode(), &tol),
            Location::Outside
        );
        // The reversed translation accumulates at the antipode.
        assert!(matches!(
            quasi_lens_construct(&trivial, &zeta_quasi3(-1.0), &v, &seed, &tol),
            Err(GeomError::HullTouchesAntipode { .. })
        ));
        // A diagonalizable element has no translation part at all.
        let diag = pm(&[&[0.5, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(
            quasi_lens_construct(&trivial, &diag, &v, &seed, &tol),
            Err(GeomError::NotBlockForm { .. })
        ));
    }

    #[test]
    fn quasi_lens_with_commuting_factor() {
        let tol = t();
        let zeta = pm(&[
            &[0.5, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 2.0, 2.0],
            &[0.0, 0.0, 0.0, 2.0],
        ]);
        let g = pm(&[
            &[2.0, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let sample = word_ball(&[g], 2, &tol).unwrap();
        let v = ProjPoint::basis(4, 2);
        let seed = pt(&[0.5, 0.5, 0.6, 0.4]);
        let ql = quasi_lens_construct(&sample, &zeta, &v, &seed, &tol).unwrap();
        assert!(ql.audit.exclusion_radius > 0.02);
        assert!(ql.audit.orbit_count > 17);
    }

    #[test]
    fn asymptotic_hyperplanes_on_boost_sample() {
        let tol = t();
        let gens = vec![boost4(0, 2.0), boost4(1, 2.0)];
        let sample = word_ball(&gens, 3, &tol).unwrap();
        let boundary =
            Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]), &tol).unwrap();
        let omega = ConvexBody::unit_ball(2, &tol).unwrap();
        let field = asymptotic_hyperplanes(&sample, &boundary, &omega, &tol).unwrap();
        assert!(!field.pairs.is_empty());
        assert!(field.max_incidence < 1e-8, "incidence {}", field.max_incidence);
        assert!(
            field.min_transversality > 1.0,
            "transversality {}",
            field.min_transversality
        );
        assert_eq!(field.support_violations, 0);
        assert!(field.uniqueness_defect < 1e-6);
        assert!(field.round_trip_hausdorff < 1e-6);
        // The boost along the first axis supports the disk at (1, 0, 1)/√2
        // with the tangent hyperplane x1 = x3.
        let x = pt(&[1.0, 0.0, 1.0, 0.0]);
        let pair = field
            .pairs
            .iter()
            .find(|p| p.point.approx_eq(&x, 1e-9))
            .expect("boost axis endpoint");
        let w = pair.hyperplane.covector();
        assert!(w[1].abs() < 1e-9 && w[3].abs() < 1e-9);
        assert_relative_eq!(w[0].abs(), w[2].abs(), epsilon = 1e-9);
    }

    #[test]
    fn classify_end_verdicts() {
        let tol = t();
        // Unipotent ball: horospherical.
        let u = pm(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]);
        let su = word_ball(&[u], 4, &tol).unwrap();
        let du = classify_end(EndData::radial(su, ProjPoint::basis(3, 0)), &tol).unwrap();
        assert_eq!(du.verdict, Some(EndVerdict::Horospherical));

        // Diagonalizable with a flat invariant limit cloud: lens.
        let (sd, _) = diag_fixture(5);
        let dd = classify_end(EndData::radial(sd.clone(), ProjPoint::basis(3, 2)), &tol).unwrap();
        assert_eq!(dd.verdict, Some(EndVerdict::Lens));
        let ev = dd.evidence.as_ref().unwrap();
        assert_relative_eq!(ev.best_c.unwrap(), 2.0, epsilon = 1e-9);
        assert_relative_eq!(ev.delta.unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-9);
        assert_eq!(ev.violations, 0);

        // Quasi-translation ball: quasi-lens.
        let sq = word_ball(&[zeta_quasi3(1.0)], 4, &tol).unwrap();
        let dq = classify_end(EndData::radial(sq, ProjPoint::basis(3, 1)), &tol).unwrap();
        assert_eq!(dq.verdict, Some(EndVerdict::QuasiLens));

        // Vertex-dominant ball: inconclusive, with recorded violations.
        let gdom = pm(&[&[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[0.0, 0.0, 2.0]]);
        let sdom = word_ball(&[gdom], 3, &tol).unwrap();
        let ddom = classify_end(EndData::radial(sdom, ProjPoint::basis(3, 2)), &tol).unwrap();
        assert_eq!(ddom.verdict, Some(EndVerdict::Inconclusive));
        assert!(ddom.evidence.unwrap().violations > 0);

        // The dual datum of the lens sample is a totally geodesic end.
        let h = Hyperplane::new(DVector::from_vec(vec![0.0, 0.0, 1.0]), &tol).unwrap();
        let dt = classify_end(EndData::totally_geodesic(sd.clone(), h), &tol).unwrap();
        assert_eq!(dt.verdict, Some(EndVerdict::TotallyGeodesic));

        // Conjugation invariance of the radial verdict.
        let h = pm(&[&[1.0, 0.3, -0.2], &[0.1, 1.1, 0.4], &[-0.3, 0.2, 0.9]]);
        let sc = sd.conjugated(&h).unwrap();
        let vc = h.apply(&ProjPoint::basis(3, 2));
        let dc = classify_end(EndData::radial(sc, vc), &tol).unwrap();
        assert_eq!(dc.verdict, Some(EndVerdict::Lens));
    }

    #[test]
    fn classify_quasi_lens_with_factor() {
        let tol = t();
        let zeta = pm(&[
            &[0.5, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 2.0, 2.0],
            &[0.0, 0.0, 0.0, 2.0],
        ]);
        let g = pm(&[
            &[2.0, 0.0, 0.0, 0.0],
            &[0.0, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let sample = word_ball(&[zeta, g], 3, &tol).unwrap();
        let d = classify_end(EndData::radial(sample, ProjPoint::basis(4, 2)), &tol).unwrap();
        assert_eq!(d.verdict, Some(EndVerdict::QuasiLens));
        let ev = d.evidence.unwrap();
        assert!(ev.violations > 0, "weak route engaged after hard violations");
    }

    #[test]
    fn evidence_serializes_with_pinned_keys() {
        let tol = t();
        let (sd, _) = diag_fixture(3);
        let d = classify_end(EndData::radial(sd, ProjPoint::basis(3, 2)), &tol).unwrap();
        let json = serde_json::to_string(&d.evidence.unwrap()).unwrap();
        let keys = ["verdict", "ball_radius", "best_C", "delta", "violations", "caveats"];
        let mut last = 0;
        for k in keys {
            let pos = json.find(&format!("\"{k}\"")).expect("key present");
            assert!(pos > last || last == 0, "key order: {k}");
            last = pos;
        }
    }
}
