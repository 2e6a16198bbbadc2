//! Properly convex bodies in `S^n`: Hilbert metric, polar duality, joins.
//!
//! A body is stored together with a chart witnessing proper convexity: the
//! whole body lies in the open hemisphere of the chart covector, where it is
//! an ordinary compact convex set in affine coordinates. Two representations
//! are supported — polytopes (vertex lists) and ellipsoids (center plus a
//! positive-definite chart form). Smooth constructions elsewhere in the
//! crate are approximated by sampled polytopes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::config::Tol;
use crate::error::{GeomError, Result};
use crate::hull::{convex_hull, positive_functional, Hull, Location};
use crate::sphere::{cross_ratio_affine, Hyperplane, ProjMap, ProjPoint};

#[derive(Debug, Clone)]
pub enum BodyRep {
    Polytope { vertices: Vec<ProjPoint> },
    Ellipsoid { center: ProjPoint, form: DMatrix<f64> },
}

/// How the boundary looks at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    StrictC1,
    Corner,
    FlatFace,
}

/// The maximal segment of a body through two interior points, with its
/// boundary endpoints ordered so that o, q separate p, s along the line.
#[derive(Debug, Clone)]
pub struct Chord {
    pub o: ProjPoint,
    pub s: ProjPoint,
    pub p: ProjPoint,
    pub q: ProjPoint,
}

#[derive(Debug, Clone)]
pub struct ConvexBody {
    pub rep: BodyRep,
    pub chart: Chart,
    hull: Option<Hull>,
}

impl ConvexBody {
    /// Build a polytope body, discovering a hemisphere chart from the vertex
    /// representatives themselves. Fails when no single hemisphere contains
    /// all of them — i.e. the cone over the representatives is not salient.
    pub fn polytope(vertices: Vec<ProjPoint>, tol: &Tol) -> Result<Self> {
        if vertices.is_empty() {
            return Err(GeomError::DegenerateBody {
                reason: "empty vertex list".into(),
            });
        }
        let cloud: Vec<DVector<f64>> = vertices.iter().map(|v| v.vec().clone()).collect();
        let c = positive_functional(&cloud, tol.den).ok_or(GeomError::NotProperlyConvex {
            reason: "no hemisphere contains all vertices".into(),
        })?;
        let chart = Chart::new(&Hyperplane::new(c, tol)?);
        Self::polytope_in_chart(vertices, chart, tol)
    }

    /// Build a polytope body in a prescribed chart. Redundant vertices are
    /// pruned so the stored list is exactly the extreme points.
    pub fn polytope_in_chart(vertices: Vec<ProjPoint>, chart: Chart, tol: &Tol) -> Result<Self> {
        let mut coords = Vec::with_capacity(vertices.len());
        for v in &vertices {
            coords.push(chart.to_chart(v, tol)?);
        }
        let pre = convex_hull(&coords, tol.hull)?;
        let kept: Vec<ProjPoint> = pre
            .vertex_ids
            .iter()
            .map(|&i| vertices[i].clone())
            .collect();
        let kept_coords: Vec<DVector<f64>> = pre
            .vertex_ids
            .iter()
            .map(|&i| coords[i].clone())
            .collect();
        // Rebuild so hull vertex ids index the stored list directly.
        let hull = convex_hull(&kept_coords, tol.hull)?;
        Ok(ConvexBody {
            rep: BodyRep::Polytope { vertices: kept },
            chart,
            hull: Some(hull),
        })
    }

    /// Ellipsoid `(y − m)ᵀ Q (y − m) ≤ 1` in the given chart, with the
    /// center given as a point of the sphere.
    pub fn ellipsoid(center: ProjPoint, form: DMatrix<f64>, chart: Chart, tol: &Tol) -> Result<Self> {
        let n = chart.dim();
        if form.nrows() != n || form.ncols() != n {
            return Err(GeomError::DimensionMismatch {
                expected: n,
                got: form.nrows(),
            });
        }
        chart.to_chart(&center, tol)?;
        let sym = (&form + &form.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(GeomError::NotProperlyConvex {
                reason: "ellipsoid form is not positive definite".into(),
            });
        }
        Ok(ConvexBody {
            rep: BodyRep::Ellipsoid { center, form: sym },
            chart,
            hull: None,
        })
    }

    /// The unit ball of the standard chart on `S^n` (Klein model).
    pub fn unit_ball(n: usize, tol: &Tol) -> Result<Self> {
        let chart = Chart::new(&Hyperplane::new(standard_last(n + 1), tol)?);
        let center = chart.from_chart(&DVector::zeros(n));
        Self::ellipsoid(center, DMatrix::identity(n, n), chart, tol)
    }

    pub fn ambient(&self) -> usize {
        self.chart.ambient()
    }

    /// Chart dimension n (the body lives in S^n).
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Intrinsic dimension: affine rank for polytopes, n for ellipsoids.
    pub fn intrinsic_dim(&self) -> usize {
        match &self.rep {
            BodyRep::Polytope { .. } => self.hull.as_ref().map(|h| h.dim).unwrap_or(0),
            BodyRep::Ellipsoid { .. } => self.dim(),
        }
    }

    pub fn hull(&self) -> Option<&Hull> {
        self.hull.as_ref()
    }

    pub fn vertices(&self) -> Option<&[ProjPoint]> {
        match &self.rep {
            BodyRep::Polytope { vertices } => Some(vertices),
            BodyRep::Ellipsoid { .. } => None,
        }
    }

    /// A canonical interior point (vertex centroid, or the ellipsoid center).
    pub fn interior_point(&self, tol: &Tol) -> ProjPoint {
        match &self.rep {
            BodyRep::Polytope { vertices } => {
                let mut m = DVector::zeros(self.dim());
                for v in vertices {
                    m += self.chart.to_chart(v, tol).expect("body invariant");
                }
                m /= vertices.len() as f64;
                self.chart.from_chart(&m)
            }
            BodyRep::Ellipsoid { center, .. } => center.clone(),
        }
    }

    /// Classify a point against the body with boundary band `tol.geo` in
    /// chart coordinates.
    pub fn contains(&self, x: &ProjPoint, tol: &Tol) -> Location {
        let y = match self.chart.to_chart(x, tol) {
            Ok(y) => y,
            Err(_) => return Location::Outside,
        };
        match &self.rep {
            BodyRep::Polytope { .. } => self
                .hull
                .as_ref()
                .expect("polytope bodies carry a hull")
                .location(&y, tol.geo),
            BodyRep::Ellipsoid { center, form } => {
                let m = self.chart.to_chart(center, tol).expect("body invariant");
                let d = &y - &m;
                let r = (d.dot(&(form * &d))).max(0.0).sqrt();
                if r < 1.0 - tol.geo {
                    Location::Interior
                } else if r <= 1.0 + tol.geo {
                    Location::Boundary
                } else {
                    Location::Outside
                }
            }
        }
    }

    /// Chord parameters: for interior chart points yp ≠ yq, the extreme
    /// parameters (t0 < 0, t1 > 1) of `yp + t (yq − yp)` inside the body.
    pub(crate) fn chord_params(
        &self,
        yp: &DVector<f64>,
        yq: &DVector<f64>,
        tol: &Tol,
    ) -> Result<(f64, f64)> {
        let d = yq - yp;
        match &self.rep {
            BodyRep::Polytope { .. } => {
                let h = self.hull.as_ref().unwrap();
                let (zp, rp) = h.reduce(yp);
                let (zq, rq) = h.reduce(yq);
                if rp > h.span_tol || rq > h.span_tol {
                    return Err(GeomError::NotInterior);
                }
                let zd = &zq - &zp;
                h.clip_line(&zp, &zd, tol.geo)
                    .ok_or(GeomError::DegenerateChord)
            }
            BodyRep::Ellipsoid { center, form } => {
                let m = self.chart.to_chart(center, tol)?;
                let u = yp - &m;
                let a = d.dot(&(form * &d));
                let b = 2.0 * d.dot(&(form * &u));
                let c = u.dot(&(form * &u)) - 1.0;
                let disc = b * b - 4.0 * a * c;
                if a <= 0.0 || disc <= 0.0 {
                    return Err(GeomError::DegenerateChord);
                }
                let sq = disc.sqrt();
                Ok(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
            }
        }
    }

    /// The maximal segment of the body through two interior points.
    pub fn maximal_chord(&self, p: &ProjPoint, q: &ProjPoint, tol: &Tol) -> Result<Chord> {
        if self.contains(p, tol) != Location::Interior
            || self.contains(q, tol) != Location::Interior
        {
            return Err(GeomError::NotInterior);
        }
        let yp = self.chart.to_chart(p, tol)?;
        let yq = self.chart.to_chart(q, tol)?;
        if (&yq - &yp).norm() < tol.geo {
            return Err(GeomError::DegenerateChord);
        }
        let (t0, t1) = self.chord_params(&yp, &yq, tol)?;
        let d = &yq - &yp;
        let o = self.chart.from_chart(&(&yp + &d * t0));
        let s = self.chart.from_chart(&(&yp + &d * t1));
        Ok(Chord {
            o,
            s,
            p: p.clone(),
            q: q.clone(),
        })
    }

    /// Hilbert distance `log |[o, s; q, p]|` along the maximal chord.
    pub fn hilbert_distance(&self, p: &ProjPoint, q: &ProjPoint, tol: &Tol) -> Result<f64> {
        let yp = self.chart.to_chart(p, tol)?;
        let yq = self.chart.to_chart(q, tol)?;
        if (&yq - &yp).norm() < tol.geo {
            return Ok(0.0);
        }
        let (t0, t1) = self.chord_params(&yp, &yq, tol)?;
        // Affine parameters are projective coordinates on the chord, so the
        // cross-ratio can be taken directly on them: o at t0, s at t1,
        // q at 1, p at 0.
        let cr = cross_ratio_affine(t0, t1, 1.0, 0.0);
        Ok(cr.abs().ln())
    }

    /// Hilbert distance from a point to another body inside this one,
    /// estimated over a deterministic sample of the target at resolution
    /// roughly `h` (sample count grows like 1/h).
    pub fn hilbert_distance_to_body(
        &self,
        x: &ProjPoint,
        target: &ConvexBody,
        h: f64,
        tol: &Tol,
    ) -> Result<f64> {
        let count = ((1.0 / h.max(1e-3)).ceil() as usize).clamp(50, 4000);
        let samples = target.sample_body(count, 0x5eed, tol);
        let mut best = f64::INFINITY;
        for s in &samples {
            let d = self.hilbert_distance(x, s, tol)?;
            best = best.min(d);
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(GeomError::EmptySample)
        }
    }

    /// Boundary behaviour at a boundary point.
    pub fn strict_convexity_at(&self, x: &ProjPoint, tol: &Tol) -> Result<BoundaryKind> {
        if self.contains(x, tol) != Location::Boundary {
            return Err(GeomError::NotOnBoundary);
        }
        match &self.rep {
            BodyRep::Ellipsoid { .. } => Ok(BoundaryKind::StrictC1),
            BodyRep::Polytope { vertices } => {
                let h = self.hull.as_ref().unwrap();
                let y = self.chart.to_chart(x, tol)?;
                let (z, _) = h.reduce(&y);
                let vert_band = (tol.geo * 100.0).max(1e-12) * h.scale;
                for v in vertices {
                    let yv = self.chart.to_chart(v, tol)?;
                    let (zv, _) = h.reduce(&yv);
                    if (&z - &zv).norm() < vert_band {
                        return Ok(BoundaryKind::Corner);
                    }
                }
                let active = h.supporting_planes_at(&z, tol.geo * 10.0 * h.scale.max(1.0));
                if active.len() >= 2 {
                    Ok(BoundaryKind::Corner)
                } else {
                    Ok(BoundaryKind::FlatFace)
                }
            }
        }
    }

    /// Polar dual: the body of hyperplanes strictly positive on this one,
    /// as a body in the dual sphere. Polytopes dualize facets ↦ vertices;
    /// ellipsoids dualize through the inverse homogeneous form.
    pub fn dual_body(&self, tol: &Tol) -> Result<ConvexBody> {
        match &self.rep {
            BodyRep::Polytope { vertices } => {
                let h = self.hull.as_ref().unwrap();
                if h.dim < self.dim() {
                    return Err(GeomError::DegenerateBody {
                        reason: "interior is empty; polar dual would be unbounded".into(),
                    });
                }
                let mut m = DVector::zeros(self.dim());
                let coords: Vec<DVector<f64>> = vertices
                    .iter()
                    .map(|v| self.chart.to_chart(v, tol).expect("body invariant"))
                    .collect();
                for y in &coords {
                    m += y;
                }
                m /= coords.len() as f64;
                let x0 = self.chart.from_chart(&m);
                let dual_chart = Chart::new(&Hyperplane::new(x0.vec().clone(), tol)?);
                let mut dual_vertices = Vec::with_capacity(h.planes.len());
                for pl in &h.planes {
                    // Plane in chart coordinates: a·y ≤ b.
                    let a = &h.frame * &pl.normal;
                    let b = pl.offset + a.dot(&h.origin);
                    if b - a.dot(&m) <= tol.den {
                        return Err(GeomError::DegenerateBody {
                            reason: "centroid sits on a supporting plane".into(),
                        });
                    }
                    let cov = self.chart.lift_functional(&a, b)?;
                    dual_vertices.push(ProjPoint::new(cov.covector().clone(), tol)?);
                }
                ConvexBody::polytope_in_chart(dual_vertices, dual_chart, tol)
            }
            BodyRep::Ellipsoid { center, form } => {
                let m = self.chart.to_chart(center, tol)?;
                let big = homogeneous_form(&self.chart, &m, form);
                let w = big.clone().try_inverse().ok_or(GeomError::SingularMatrix {
                    det: big.determinant(),
                })?;
                let x0 = self.chart.from_chart(&m);
                let dual_chart = Chart::new(&Hyperplane::new(x0.vec().clone(), tol)?);
                let (dm, dq) = ellipsoid_from_homogeneous(&dual_chart, &w)?;
                let dcenter = dual_chart.from_chart(&dm);
                ConvexBody::ellipsoid(dcenter, dq, dual_chart, tol)
            }
        }
    }

    /// Whether every sampled point of `self` lies in `other` (non-Outside).
    pub fn included_in(&self, other: &ConvexBody, tol: &Tol) -> bool {
        let probes: Vec<ProjPoint> = match &self.rep {
            BodyRep::Polytope { vertices } => vertices.clone(),
            BodyRep::Ellipsoid { .. } => self.sample_boundary(64, 0x11, tol),
        };
        probes
            .iter()
            .chain(std::iter::once(&self.interior_point(tol)))
            .all(|x| other.contains(x, tol) != Location::Outside)
    }

    /// Inclusion-reversal self-test: (A ⊆ B) must coincide with (B* ⊆ A*).
    pub fn dual_inclusion_check(a: &ConvexBody, b: &ConvexBody, tol: &Tol) -> Result<bool> {
        let fwd = a.included_in(b, tol);
        let bwd = b.dual_body(tol)?.included_in(&a.dual_body(tol)?, tol);
        Ok(fwd == bwd)
    }

    /// Transform the body by a projective map.
    pub fn apply_map(&self, g: &ProjMap, tol: &Tol) -> Result<ConvexBody> {
        let dual = g.dual_map()?;
        let new_cov = dual.apply(&self.chart.center());
        let new_chart = Chart::new(&Hyperplane::new(new_cov.vec().clone(), tol)?);
        match &self.rep {
            BodyRep::Polytope { vertices } => {
                let moved: Vec<ProjPoint> = vertices.iter().map(|v| g.apply(v)).collect();
                ConvexBody::polytope_in_chart(moved, new_chart, tol)
            }
            BodyRep::Ellipsoid { center, form } => {
                let m = self.chart.to_chart(center, tol)?;
                let big = homogeneous_form(&self.chart, &m, form);
                let gi = g
                    .matrix()
                    .clone()
                    .try_inverse()
                    .ok_or(GeomError::SingularMatrix {
                        det: g.matrix().determinant(),
                    })?;
                let moved = gi.transpose() * big * gi;
                let (nm, nq) = ellipsoid_from_homogeneous(&new_chart, &moved)?;
                let ncenter = new_chart.from_chart(&nm);
                ConvexBody::ellipsoid(ncenter, nq, new_chart, tol)
            }
        }
    }

    /// Join of two bodies inside an ambient body: the convex hull of the
    /// union taken in the cone lift fixed by the ambient chart.
    pub fn join(a: &ConvexBody, b: &ConvexBody, ambient: &ConvexBody, tol: &Tol) -> Result<ConvexBody> {
        let mut pts = Vec::new();
        for body in [a, b] {
            match &body.rep {
                BodyRep::Polytope { vertices } => pts.extend(vertices.iter().cloned()),
                BodyRep::Ellipsoid { .. } => pts.extend(body.sample_boundary(200, 0x07, tol)),
            }
        }
        for p in &pts {
            if ambient.chart.pairing(p) <= tol.norm {
                return Err(GeomError::NotInAmbient);
            }
        }
        ConvexBody::polytope_in_chart(pts, ambient.chart.clone(), tol)
    }

    /// Strict join of bodies supported on independent subspaces: the image
    /// of the sum of their cones. Requires joint linear independence.
    pub fn strict_join(parts: &[ConvexBody], tol: &Tol) -> Result<ConvexBody> {
        if parts.is_empty() {
            return Err(GeomError::DegenerateBody {
                reason: "empty join".into(),
            });
        }
        let mut all: Vec<ProjPoint> = Vec::new();
        let mut expected = 0usize;
        for part in parts {
            let verts: Vec<ProjPoint> = match &part.rep {
                BodyRep::Polytope { vertices } => vertices.clone(),
                BodyRep::Ellipsoid { .. } => part.sample_boundary(100, 0x13, tol),
            };
            expected += span_rank(&verts, tol);
            all.extend(verts);
        }
        let total = span_rank(&all, tol);
        if total < expected {
            return Err(GeomError::NotIndependent {
                rank: total,
                expected,
            });
        }
        ConvexBody::polytope(all, tol)
    }

    /// Closed eps-neighborhood of `sub` inside `amb` in the Hilbert metric
    /// of `amb`, approximated by sampling: points at Hilbert distance eps
    /// from body samples along sampled chords, then the hull.
    pub fn eps_neighborhood(
        sub: &ConvexBody,
        amb: &ConvexBody,
        eps: f64,
        samples: usize,
        seed: u64,
        tol: &Tol,
    ) -> Result<ConvexBody> {
        if eps <= 0.0 {
            return Err(GeomError::DegenerateConfig { which: "eps" });
        }
        // The smoothing lemma needs the inner boundary strictly convex or
        // the core totally geodesic; solid polytopes have flat interior
        // boundary faces and are rejected.
        if let BodyRep::Polytope { .. } = &sub.rep {
            if sub.intrinsic_dim() >= sub.dim() {
                return Err(GeomError::NotStrictlyConvexInput {
                    reason: "solid polytope has flat boundary faces".into(),
                });
            }
        }
        let n = amb.dim();
        let base = sub.sample_body(samples.max(24), seed, tol);
        for p in &base {
            if amb.contains(p, tol) != Location::Interior {
                return Err(GeomError::NotInterior);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1f);
        let ndirs = (samples / 2).max(8);
        let dirs: Vec<DVector<f64>> = (0..ndirs).map(|_| gaussian_dir(n, &mut rng)).collect();
        let e = eps.exp();
        let mut cloud: Vec<ProjPoint> = Vec::with_capacity(base.len() * (2 * ndirs + 1));
        for p in &base {
            cloud.push(p.clone());
            let yp = amb.chart.to_chart(p, tol)?;
            for d0 in &dirs {
                for sgn in [1.0, -1.0] {
                    let d = d0 * sgn;
                    let yq = &yp + &d;
                    // Chord of the ambient through p in direction d.
                    let (t0, t1) = match amb.chord_params(&yp, &yq, tol) {
                        Ok(v) => v,
                        Err(_) => continue,
                    };
                    // Parameter at Hilbert distance eps toward +d.
                    let t = t0 * t1 * (1.0 - e) / (t1 - e * t0);
                    cloud.push(amb.chart.from_chart(&(&yp + &d * t)));
                }
            }
        }
        ConvexBody::polytope_in_chart(cloud, amb.chart.clone(), tol)
    }

    /// Deterministic boundary sample.
    pub fn sample_boundary(&self, count: usize, seed: u64, tol: &Tol) -> Vec<ProjPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match &self.rep {
            BodyRep::Polytope { vertices } => {
                let h = self.hull.as_ref().unwrap();
                out.extend(vertices.iter().cloned());
                if h.planes.is_empty() {
                    return out;
                }
                let coords: Vec<DVector<f64>> = vertices
                    .iter()
                    .map(|v| self.chart.to_chart(v, tol).expect("body invariant"))
                    .collect();
                while out.len() < count {
                    for pl in &h.planes {
                        if out.len() >= count {
                            break;
                        }
                        let y = dirichlet_combo(&coords, &pl.vertex_ids, &mut rng);
                        out.push(self.chart.from_chart(&y));
                    }
                }
            }
            BodyRep::Ellipsoid { center, form } => {
                let m = self.chart.to_chart(center, tol).expect("body invariant");
                let n = self.dim();
                for _ in 0..count {
                    let u = gaussian_dir(n, &mut rng);
                    let scale = u.dot(&(form * &u)).sqrt();
                    out.push(self.chart.from_chart(&(&m + &u / scale)));
                }
            }
        }
        out
    }

    /// Deterministic sample covering the whole body (not just the boundary).
    pub fn sample_body(&self, count: usize, seed: u64, tol: &Tol) -> Vec<ProjPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0d);
        match &self.rep {
            BodyRep::Polytope { vertices } => {
                let coords: Vec<DVector<f64>> = vertices
                    .iter()
                    .map(|v| self.chart.to_chart(v, tol).expect("body invariant"))
                    .collect();
                let ids: Vec<usize> = (0..coords.len()).collect();
                let mut out: Vec<ProjPoint> = vertices.iter().cloned().collect();
                while out.len() < count {
                    let y = dirichlet_combo(&coords, &ids, &mut rng);
                    out.push(self.chart.from_chart(&y));
                }
                out
            }
            BodyRep::Ellipsoid { center, .. } => {
                let mut out = self.sample_boundary(count.saturating_sub(1).max(1), seed, tol);
                out.push(center.clone());
                out
            }
        }
    }

    /// Serialize to the interchange JSON form.
    pub fn to_json(&self) -> serde_json::Value {
        let chart: Vec<f64> = self.chart.covector().iter().cloned().collect();
        let dto = match &self.rep {
            BodyRep::Polytope { vertices } => BodyDto {
                kind: "polytope".into(),
                vertices: Some(
                    vertices
                        .iter()
                        .map(|v| v.vec().iter().cloned().collect())
                        .collect(),
                ),
                center: None,
                form: None,
                chart,
            },
            BodyRep::Ellipsoid { center, form } => BodyDto {
                kind: "ellipsoid".into(),
                vertices: None,
                center: Some(center.vec().iter().cloned().collect()),
                form: Some(
                    (0..form.nrows())
                        .map(|i| (0..form.ncols()).map(|j| form[(i, j)]).collect())
                        .collect(),
                ),
                chart,
            },
        };
        serde_json::to_value(dto).expect("plain data")
    }

    pub fn from_json(v: &serde_json::Value, tol: &Tol) -> Result<ConvexBody> {
        let dto: BodyDto = serde_json::from_value(v.clone())
            .map_err(|e| GeomError::Schema(format!("body: {e}")))?;
        let chart = Chart::new(&Hyperplane::from_slice(&dto.chart, tol)?);
        let n1 = dto.chart.len();
        match dto.kind.as_str() {
            "polytope" => {
                let vs = dto
                    .vertices
                    .ok_or_else(|| GeomError::Schema("polytope needs \"vertices\"".into()))?;
                let mut vertices = Vec::with_capacity(vs.len());
                for row in &vs {
                    if row.len() != n1 {
                        return Err(GeomError::Schema(format!(
                            "vertex length {} does not match chart length {}",
                            row.len(),
                            n1
                        )));
                    }
                    vertices.push(ProjPoint::from_slice(row, tol)?);
                }
                ConvexBody::polytope_in_chart(vertices, chart, tol)
            }
            "ellipsoid" => {
                let c = dto
                    .center
                    .ok_or_else(|| GeomError::Schema("ellipsoid needs \"center\"".into()))?;
                let f = dto
                    .form
                    .ok_or_else(|| GeomError::Schema("ellipsoid needs \"form\"".into()))?;
                let n = n1 - 1;
                if c.len() != n1 || f.len() != n || f.iter().any(|r| r.len() != n) {
                    return Err(GeomError::Schema("ellipsoid dimensions inconsistent".into()));
                }
                let center = ProjPoint::from_slice(&c, tol)?;
                let form = DMatrix::from_fn(n, n, |i, j| f[i][j]);
                ConvexBody::ellipsoid(center, form, chart, tol)
            }
            other => Err(GeomError::Schema(format!("unknown body kind \"{other}\""))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BodyDto {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<Vec<Vec<f64>>>,
    chart: Vec<f64>,
}

fn standard_last(n1: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n1);
    v[n1 - 1] = 1.0;
    v
}

fn gaussian_dir(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let mut v = DVector::zeros(n);
        for i in 0..n {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            v[i] = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

fn dirichlet_combo(
    coords: &[DVector<f64>],
    ids: &[usize],
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let mut y = DVector::zeros(coords[0].len());
    let mut total = 0.0;
    let weights: Vec<f64> = ids
        .iter()
        .map(|_| -(rng.random::<f64>().max(1e-300)).ln())
        .collect();
    for (k, &i) in ids.iter().enumerate() {
        y += &coords[i] * weights[k];
        total += weights[k];
    }
    y / total
}

fn span_rank(points: &[ProjPoint], _tol: &Tol) -> usize {
    let cols: Vec<DVector<f64>> = points.iter().map(|p| p.vec().clone()).collect();
    crate::sphere::span_basis(&cols, 1e-9).0.len()
}

/// Homogeneous quadratic form of a chart ellipsoid: the body is
/// `{x : xᵀ M x ≤ 0, c·x > 0}` with signature (n, 1).
pub fn homogeneous_form(chart: &Chart, m: &DVector<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let c = chart.covector();
    let b = chart.basis();
    let l = b.transpose() - m * c.transpose();
    l.transpose() * q * l - c * c.transpose()
}

/// Recover (center, form) of the chart ellipsoid cut out by a homogeneous
/// signature-(n,1) form whose negative cone contains the chart center.
pub fn ellipsoid_from_homogeneous(
    chart: &Chart,
    big: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let c = chart.covector();
    let bmat = chart.basis();
    let a = bmat.transpose() * big * bmat;
    let b = bmat.transpose() * big * c;
    let gamma = (c.transpose() * big * c)[(0, 0)];
    let a_sym = (&a + &a.transpose()) * 0.5;
    let chol = a_sym.clone().cholesky().ok_or(GeomError::DegenerateBody {
        reason: "homogeneous form does not cut an ellipsoid in this chart".into(),
    })?;
    let m = chol.solve(&(-&b));
    let rho = -b.dot(&m) - gamma;
    if rho <= 0.0 {
        return Err(GeomError::DegenerateBody {
            reason: "homogeneous form has empty interior in this chart".into(),
        });
    }
    Ok((m, a_sym / rho))
}
