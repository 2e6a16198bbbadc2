//! Geodesic flow on the unit tangent bundle of a properly convex domain and
//! the chord-endpoint splitting of the ambient space along flow lines.
//!
//! A unit tangent vector is an interior point together with a unit direction
//! in the body's chart. The flow moves the point along the straight chord at
//! unit Hilbert speed; since affine parameters are projective coordinates on
//! the chord, the time-`t` position has the closed form
//! `s(t) = AB(e^t − 1)/(A + e^t B)` where `A` and `B` are the chart distances
//! to the forward and backward chord endpoints. Over each tangent vector the
//! ambient space splits into the two endpoint lines plus the intersection of
//! the supporting hyperplanes at the endpoints; for a divisible domain the
//! recentered holonomy contracts the forward-endpoint line at a definite
//! exponential rate, which `contraction_audit` measures empirically.
//!
//! Throughout, `v_minus` is the *forward* endpoint direction — the line the
//! recentered flow contracts — and `v_plus` the backward one.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::body::{BodyRep, ConvexBody};
use crate::config::Tol;
use crate::error::{GeomError, Result};
use crate::holonomy::GroupSample;
use crate::hull::Location;
use crate::sphere::{span_basis, Hyperplane, ProjPoint, Subspace};

/// A unit tangent vector: interior base point plus unit chart direction.
#[derive(Debug, Clone)]
pub struct UnitTangent {
    base: ProjPoint,
    direction: DVector<f64>,
}

impl UnitTangent {
    /// Validates interiority and normalizes the direction.
    pub fn new(
        omega: &ConvexBody,
        base: ProjPoint,
        direction: DVector<f64>,
        tol: &Tol,
    ) -> Result<Self> {
        if direction.len() != omega.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: omega.dim(),
                got: direction.len(),
            });
        }
        if omega.contains(&base, tol) != Location::Interior {
            return Err(GeomError::NotInterior);
        }
        let n = direction.norm();
        if n < tol.norm {
            return Err(GeomError::ZeroVector);
        }
        Ok(UnitTangent {
            base,
            direction: direction / n,
        })
    }

    pub fn base(&self) -> &ProjPoint {
        &self.base
    }

    /// Unit direction in the body's chart.
    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }
}

/// The splitting of the ambient space over a tangent vector. `v_minus` and
/// `v_plus` span the lifts of the forward and backward chord endpoints,
/// `h_minus`/`h_plus` are the supporting hyperplanes there, and `v_zero` is
/// the intersection of those hyperplanes. The three pieces are a direct sum
/// but in general not an orthogonal one.
#[derive(Debug, Clone)]
pub struct BundleFrame {
    v_plus: Subspace,
    v_minus: Subspace,
    v_zero: Subspace,
    h_plus: Hyperplane,
    h_minus: Hyperplane,
}

impl BundleFrame {
    pub fn v_plus(&self) -> &Subspace {
        &self.v_plus
    }

    pub fn v_minus(&self) -> &Subspace {
        &self.v_minus
    }

    pub fn v_zero(&self) -> &Subspace {
        &self.v_zero
    }

    pub fn h_plus(&self) -> &Hyperplane {
        &self.h_plus
    }

    pub fn h_minus(&self) -> &Hyperplane {
        &self.h_minus
    }
}

/// Chord endpoints need a supporting hyperplane that varies continuously, so
/// the flow machinery is restricted to ellipsoid bodies; polytopes have
/// corners and flat faces where the endpoint data is ambiguous.
fn require_strictly_convex(omega: &ConvexBody) -> Result<()> {
    match &omega.rep {
        BodyRep::Ellipsoid { .. } => Ok(()),
        BodyRep::Polytope { .. } => Err(GeomError::NotStrictlyConvexInput {
            reason: "geodesic flow needs a strictly convex C¹ boundary; \
                     polytopes have corners and flat faces"
                .into(),
        }),
    }
}

/// Chord gaps `(a, b)` with `a` the chart distance from the base to the
/// forward boundary point along the direction and `b` the distance backward.
fn chord_gaps(omega: &ConvexBody, y: &DVector<f64>, w: &DVector<f64>, tol: &Tol) -> Result<(f64, f64)> {
    let (s0, s1) = omega.chord_params(y, &(y + w), tol)?;
    if !(s0 < 0.0 && s1 > 0.0) {
        return Err(GeomError::NotInterior);
    }
    Ok((s1, -s0))
}

/// Flow a unit tangent vector for Hilbert time `t` (negative times flow
/// backward). The base moves along the chord; the chart direction is
/// unchanged, which is the parallel transport along a straight segment.
pub fn geodesic_flow(omega: &ConvexBody, u: &UnitTangent, t: f64, tol: &Tol) -> Result<UnitTangent> {
    require_strictly_convex(omega)?;
    let y = omega.chart.to_chart(&u.base, tol)?;
    let (a, b) = chord_gaps(omega, &y, &u.direction, tol)?;
    // s(t) = ab(e^t − 1)/(a + e^t b), rewritten on each side so the
    // exponential never overflows.
    let s = if t >= 0.0 {
        let q = (-t).exp();
        a * b * (1.0 - q) / (a * q + b)
    } else {
        let q = t.exp();
        a * b * (q - 1.0) / (a + q * b)
    };
    let base = omega.chart.from_chart(&(&y + &u.direction * s));
    Ok(UnitTangent {
        base,
        direction: u.direction.clone(),
    })
}

/// The endpoint splitting over a tangent vector.
///
/// Fails with a degenerate-configuration error when the three pieces do not
/// span the ambient space transversally (smallest singular value of the
/// stacked unit basis below the matrix tolerance); on an ellipsoid this
/// cannot happen away from numerically collapsed forms.
pub fn bundle_frame(omega: &ConvexBody, u: &UnitTangent, tol: &Tol) -> Result<BundleFrame> {
    require_strictly_convex(omega)?;
    let (center, form) = match &omega.rep {
        BodyRep::Ellipsoid { center, form } => (center, form),
        BodyRep::Polytope { .. } => unreachable!("gated above"),
    };
    let m = omega.chart.to_chart(center, tol)?;
    let y = omega.chart.to_chart(&u.base, tol)?;
    let (a, b) = chord_gaps(omega, &y, &u.direction, tol)?;
    let z_fwd = &y + &u.direction * a;
    let z_bwd = &y - &u.direction * b;
    // Supporting hyperplane at a boundary point z: the gradient Q(z − m)
    // gives the affine functional grad·x = grad·z, positive on the interior
    // side after the chart lift.
    let support_at = |z: &DVector<f64>| -> Result<Hyperplane> {
        let grad = form * (z - &m);
        omega.chart.lift_functional(&grad, grad.dot(z))
    };
    let h_minus = support_at(&z_fwd)?;
    let h_plus = support_at(&z_bwd)?;
    let xi_fwd = omega.chart.from_chart(&z_fwd);
    let xi_bwd = omega.chart.from_chart(&z_bwd);
    let v_minus = Subspace::from_basis(DMatrix::from_columns(&[xi_fwd.vec().clone()]));
    let v_plus = Subspace::from_basis(DMatrix::from_columns(&[xi_bwd.vec().clone()]));
    let (span, _) = span_basis(
        &[h_minus.covector().clone(), h_plus.covector().clone()],
        1e-8,
    );
    if span.len() != 2 {
        return Err(GeomError::DegenerateConfig {
            which: "coincident supporting hyperplanes",
        });
    }
    let v_zero = Subspace::from_basis(DMatrix::from_columns(&span)).orthogonal_complement();
    // Transversality of the direct sum: stack the unit basis vectors and
    // check the smallest singular value.
    let n1 = omega.ambient();
    let mut cols = Vec::with_capacity(n1);
    cols.push(v_minus.basis().column(0).into_owned());
    for i in 0..v_zero.linear_dim() {
        cols.push(v_zero.basis().column(i).into_owned());
    }
    cols.push(v_plus.basis().column(0).into_owned());
    let stacked = DMatrix::from_columns(&cols);
    let gram = stacked.transpose() * &stacked;
    let eig = gram.symmetric_eigen();
    let smin = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &l| acc.min(l.max(0.0).sqrt()));
    if smin < tol.mat {
        return Err(GeomError::DegenerateConfig {
            which: "tangent splitting is not a direct sum",
        });
    }
    Ok(BundleFrame {
        v_plus,
        v_minus,
        v_zero,
        h_plus,
        h_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameSpace {
    Plus,
    Zero,
    Minus,
}

impl FrameSpace {
    fn label(self) -> &'static str {
        match self {
            FrameSpace::Plus => "plus",
            FrameSpace::Zero => "zero",
            FrameSpace::Minus => "minus",
        }
    }
}

/// One measurement: the log of the largest singular value of the recentering
/// matrix restricted to the frame subspace, relative to the time-0 value.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub u_index: usize,
    pub t: f64,
    pub space: FrameSpace,
    pub log_norm: f64,
}

/// Least-squares fit of `log_norm` against the listed times.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub u_index: usize,
    pub space: FrameSpace,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionAudit {
    pub rows: Vec<AuditRow>,
    pub slopes: Vec<SlopeFit>,
    pub time_scale: f64,
    pub k_min: f64,
    pub zero_band: f64,
    pub recenter_bound: f64,
    /// All forward-endpoint slopes below `−k_min` and all neutral slopes
    /// within `±zero_band`. Backward-endpoint slopes are reported but not
    /// gated: under the forward flow they measure expansion.
    pub pass: bool,
}

impl ContractionAudit {
    /// The measurement table as CSV with header
    /// `u_index,t,space,log_norm`.
    pub fn csv(&self) -> String {
        let mut out = String::from("u_index,t,space,log_norm\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.u_index,
                r.t,
                r.space.label(),
                r.log_norm
            ));
        }
        out
    }
}

/// Knobs for `contraction_audit`. `time_scale` multiplies the listed times
/// before flowing (the fit is still against the listed times), so a scale of
/// 2 reads rates per unit of half-Hilbert time. `recenter_bound` is the
/// largest acceptable Hilbert distance from the recentered flow point to the
/// basepoint; `None` derives it from the generators' eigenvalue spreads.
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub time_scale: f64,
    pub k_min: f64,
    pub zero_band: f64,
    pub recenter_bound: Option<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            time_scale: 1.0,
            k_min: 0.1,
            zero_band: 0.1,
            recenter_bound: None,
        }
    }
}

fn max_generator_spread(sample: &GroupSample, tol: &Tol) -> f64 {
    let mut best: f64 = 0.0;
    for g in &sample.generators {
        if let Ok(p) = crate::holonomy::eigen_profile_of(g.matrix(), tol) {
            best = best.max(p.log_spread());
        }
    }
    best
}

/// Largest singular value of the matrix applied to the (orthonormal) basis
/// of a subspace, via the Gram eigendecomposition.
fn restricted_top_norm(m: &DMatrix<f64>, s: &Subspace) -> f64 {
    let mb = m * s.basis();
    let gram = mb.transpose() * &mb;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l));
    lmax.sqrt()
}

/// Empirical contraction rates of the recentered flow on the endpoint
/// splitting.
///
/// For each tangent vector the frame is computed once and its pieces kept as
/// constant ambient subspaces. The point is flowed for each listed time
/// (scaled by `time_scale`), pulled back to the fundamental region by the
/// ball element whose image of the flow point is Hilbert-closest to the
/// basepoint, and the pulled-back matrix is applied to each frame piece; the
/// logged norm is relative to the time-0 measurement, so the first row of
/// every series is exactly zero. Unimodularity of the group matrices pins
/// the overall scale, so no further normalization is applied — this is what
/// makes the forward-endpoint line decay at the translation rate while the
/// neutral piece stays bounded.
pub fn contraction_audit(
    omega: &ConvexBody,
    sample: &GroupSample,
    u_set: &[UnitTangent],
    times: &[f64],
    cfg: &AuditConfig,
    tol: &Tol,
) -> Result<ContractionAudit> {
    require_strictly_convex(omega)?;
    if u_set.is_empty() || times.len() < 2 {
        return Err(GeomError::DegenerateConfig {
            which: "contraction audit needs tangent vectors and at least two times",
        });
    }
    let bound = cfg
        .recenter_bound
        .unwrap_or_else(|| (0.75 * max_generator_spread(sample, tol)).max(2.0));
    let basepoint = omega.interior_point(tol);
    // Recentering: the ball element minimizing the Hilbert distance of the
    // moved point to the basepoint. Elements throwing the point outside the
    // domain's chart are skipped (they cannot be minimizers anyway).
    let recenter = |x: &ProjPoint| -> Result<(DMatrix<f64>, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in sample.ball.iter().enumerate() {
            let gx = e.map.apply(x);
            if omega.contains(&gx, tol) != Location::Interior {
                continue;
            }
            let d = match omega.hilbert_distance(&gx, &basepoint, tol) {
                Ok(d) => d,
                Err(_) => continue,
            };
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (idx, dist) = best.ok_or(GeomError::RecenterFailure {
            dist: f64::INFINITY,
            bound,
        })?;
        if dist > bound {
            return Err(GeomError::RecenterFailure { dist, bound });
        }
        Ok((sample.ball[idx].map.matrix().clone(), dist))
    };
    let spaces = [FrameSpace::Minus, FrameSpace::Zero, FrameSpace::Plus];
    let mut rows = Vec::with_capacity(u_set.len() * times.len() * 3);
    let mut slopes = Vec::with_capacity(u_set.len() * 3);
    let mut pass = true;
    for (ui, u) in u_set.iter().enumerate() {
        let frame = bundle_frame(omega, u, tol)?;
        let piece = |s: FrameSpace| -> &Subspace {
            match s {
                FrameSpace::Plus => frame.v_plus(),
                FrameSpace::Zero => frame.v_zero(),
                FrameSpace::Minus => frame.v_minus(),
            }
        };
        let (m0, _) = recenter(u.base())?;
        let base_vals: Vec<f64> = spaces
            .iter()
            .map(|&s| restricted_top_norm(&m0, piece(s)).ln())
            .collect();
        let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 3];
        for &t in times {
            let moved = geodesic_flow(omega, u, cfg.time_scale * t, tol)?;
            let (mt, _) = recenter(moved.base())?;
            for (si, &s) in spaces.iter().enumerate() {
                let val = restricted_top_norm(&mt, piece(s)).ln() - base_vals[si];
                rows.push(AuditRow {
                    u_index: ui,
                    t,
                    space: s,
                    log_norm: val,
                });
                series[si].push((t, val));
            }
        }
        for (si, &s) in spaces.iter().enumerate() {
            let (slope, intercept) = least_squares(&series[si])?;
            match s {
                FrameSpace::Minus => {
                    if slope >= -cfg.k_min {
                        pass = false;
                    }
                }
                FrameSpace::Zero => {
                    if slope.abs() > cfg.zero_band {
                        pass = false;
                    }
                }
                FrameSpace::Plus => {}
            }
            slopes.push(SlopeFit {
                u_index: ui,
                space: s,
                slope,
                intercept,
            });
        }
    }
    Ok(ContractionAudit {
        rows,
        slopes,
        time_scale: cfg.time_scale,
        k_min: cfg.k_min,
        zero_band: cfg.zero_band,
        recenter_bound: bound,
        pass,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(t, y) in pts {
        cov += (t - mean_t) * (y - mean_y);
        var += (t - mean_t) * (t - mean_t);
    }
    if var < 1e-12 {
        return Err(GeomError::DegenerateConfig {
            which: "slope fit needs at least two distinct times",
        });
    }
    Ok((cov / var, mean_y - cov / var * mean_t))
}
