//! Dimension-general convex hulls with facet adjacency and merged planes.
//!
//! Inputs are point clouds in chart coordinates (dimension ≤ 5 in practice).
//! The wrapper first reduces to the affine span (so flat clouds are handled
//! in their intrinsic dimension), then runs monotone chain in 2-d and a
//! conflict-list quickhull in higher dimensions. Degeneracies are resolved
//! by a deterministic joggle retry: the perturbed run fixes the
//! combinatorics, planes are refit from the original coordinates, and
//! near-coplanar simplicial facets are merged into supporting planes so that
//! facet counts mean geometric facets (a cube has 6, not 12).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior,
    Boundary,
    Outside,
}

/// A supporting plane `normal·y ≤ offset` in reduced coordinates, together
/// with the hull vertices lying on it.
#[derive(Debug, Clone)]
pub struct Plane {
    pub normal: DVector<f64>,
    pub offset: f64,
    pub vertex_ids: Vec<usize>,
}

/// A simplicial facet from the raw hull (reduced coordinates).
#[derive(Debug, Clone)]
pub struct Facet {
    pub vertex_ids: Vec<usize>,
    pub normal: DVector<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Hull {
    /// Indices of extreme points among the input cloud.
    pub vertex_ids: Vec<usize>,
    /// Intrinsic (affine) dimension of the cloud.
    pub dim: usize,
    /// Affine frame: x ≈ origin + frame·y for points in the span.
    pub origin: DVector<f64>,
    pub frame: DMatrix<f64>,
    /// Merged supporting planes (reduced coordinates).
    pub planes: Vec<Plane>,
    /// Raw simplicial facets (reduced coordinates); empty for dim ≤ 1.
    pub facets: Vec<Facet>,
    /// Length scale of the input (bounding box diagonal, at least 1e-12).
    pub scale: f64,
    /// Absolute tolerance used for span membership.
    pub span_tol: f64,
}

impl Hull {
    /// Reduced coordinates of an ambient point plus its distance to the
    /// affine span.
    pub fn reduce(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let d = x - &self.origin;
        let y = self.frame.transpose() * &d;
        let res = (&d - &self.frame * &y).norm();
        (y, res)
    }

    pub fn unreduce(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.origin + &self.frame * y
    }

    /// Largest violation `normal·y − offset` over the merged planes
    /// (negative deep inside). For dim 0 returns the distance to the vertex.
    pub fn excess(&self, y: &DVector<f64>) -> f64 {
        if self.dim == 0 {
            return y.norm();
        }
        self.planes
            .iter()
            .map(|p| p.normal.dot(y) - p.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Classify an ambient point against the hull with a tolerance band.
    /// For flat hulls "Interior" means relative interior within the span.
    pub fn location(&self, x: &DVector<f64>, band: f64) -> Location {
        let (y, res) = self.reduce(x);
        if res > band.max(self.span_tol) {
            return Location::Outside;
        }
        let e = self.excess(&y);
        if e > band {
            Location::Outside
        } else if e >= -band {
            Location::Boundary
        } else {
            Location::Interior
        }
    }

    /// Intersect the reduced-coordinate line `p + t·d` with the hull.
    /// Returns the parameter interval, or None when the line misses.
    pub fn clip_line(&self, p: &DVector<f64>, d: &DVector<f64>, band: f64) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for pl in &self.planes {
            let a = pl.normal.dot(d);
            let b = pl.offset - pl.normal.dot(p);
            if a.abs() < 1e-14 * (1.0 + pl.normal.norm() * d.norm()) {
                if b < -band {
                    return None;
                }
            } else {
                let t = b / a;
                if a > 0.0 {
                    hi = hi.min(t);
                } else {
                    lo = lo.max(t);
                }
            }
        }
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Planes active at a reduced point within the band.
    pub fn supporting_planes_at(&self, y: &DVector<f64>, band: f64) -> Vec<usize> {
        self.planes
            .iter()
            .enumerate()
            .filter(|(_, p)| (p.normal.dot(y) - p.offset).abs() <= band)
            .map(|(i, _)| i)
            .collect()
    }
}

fn bbox_scale(points: &[DVector<f64>]) -> f64 {
    let d = points[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut s = 0.0;
    for i in 0..d {
        s += (hi[i] - lo[i]).powi(2);
    }
    s.sqrt().max(1e-12)
}

/// Orthonormal eigenbasis of a symmetric PSD matrix, split at
/// `rel_tol · λ_max`: returns (large-eigenvalue basis, small-eigenvalue
/// basis). The symmetric eigensolver is used deliberately — the general SVD
/// is unreliable on exactly rank-deficient inputs.
pub(crate) fn split_eigenbasis(
    cov: &DMatrix<f64>,
    rel_tol: f64,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let sym = (cov + &cov.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let mut big = Vec::new();
    let mut small = Vec::new();
    for &i in &order {
        let v = eig.eigenvectors.column(i).into_owned();
        if lmax > 0.0 && eig.eigenvalues[i] > rel_tol * lmax {
            big.push(v);
        } else {
            small.push(v);
        }
    }
    (big, small)
}

/// Affine frame of a cloud: centroid plus an orthonormal basis of the span
/// of the centered points (covariance eigenvectors above `rel_tol²`
/// relative eigenvalue — eigenvalues scale as squared lengths).
fn affine_frame(points: &[DVector<f64>], rel_tol: f64) -> (DVector<f64>, DMatrix<f64>) {
    let d = points[0].len();
    let mut origin = DVector::zeros(d);
    for p in points {
        origin += p;
    }
    origin /= points.len() as f64;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = p - &origin;
        cov += &c * c.transpose();
    }
    let (big, _) = split_eigenbasis(&cov, rel_tol * rel_tol);
    let frame = if big.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&big)
    };
    (origin, frame)
}

/// Convex hull of a cloud in any dimension. `tol` is the relative hull
/// tolerance (distances below `tol·scale` are treated as incident).
pub fn convex_hull(points: &[DVector<f64>], tol: f64) -> Result<Hull> {
    if points.is_empty() {
        return Err(GeomError::HullFailure {
            reason: "empty point set".into(),
        });
    }
    let scale = bbox_scale(points);
    let span_rel = (tol * 10.0).max(1e-10);
    let (origin, frame) = affine_frame(points, span_rel);
    let r = frame.ncols();
    let reduced: Vec<DVector<f64>> = points
        .iter()
        .map(|p| frame.transpose() * (p - &origin))
        .collect();
    let span_tol = scale * span_rel * 10.0;
    let eps = tol * scale;

    let (vertex_ids, facets) = match r {
        0 => (vec![0usize], Vec::new()),
        1 => hull_1d(&reduced, eps),
        2 => hull_2d(&reduced, eps)?,
        _ => hull_nd(&reduced, r, eps)?,
    };

    let planes = merge_planes(&reduced, &facets, r, eps);

    Ok(Hull {
        vertex_ids,
        dim: r,
        origin,
        frame,
        planes,
        facets,
        scale,
        span_tol,
    })
}

fn hull_1d(reduced: &[DVector<f64>], _eps: f64) -> (Vec<usize>, Vec<Facet>) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, p) in reduced.iter().enumerate() {
        if p[0] < reduced[imin][0] {
            imin = i;
        }
        if p[0] > reduced[imax][0] {
            imax = i;
        }
    }
    let facets = vec![
        Facet {
            vertex_ids: vec![imax],
            normal: DVector::from_row_slice(&[1.0]),
            offset: reduced[imax][0],
        },
        Facet {
            vertex_ids: vec![imin],
            normal: DVector::from_row_slice(&[-1.0]),
            offset: -reduced[imin][0],
        },
    ];
    let verts = if imin == imax {
        vec![imin]
    } else {
        vec![imin, imax]
    };
    (verts, facets)
}

fn hull_2d(reduced: &[DVector<f64>], eps: f64) -> Result<(Vec<usize>, Vec<Facet>)> {
    let mut idx: Vec<usize> = (0..reduced.len()).collect();
    idx.sort_by(|&a, &b| {
        (reduced[a][0], reduced[a][1])
            .partial_cmp(&(reduced[b][0], reduced[b][1]))
            .unwrap()
    });
    idx.dedup_by(|&mut a, &mut b| (&reduced[a] - &reduced[b]).norm() < eps);
    if idx.len() == 1 {
        return Ok((idx, Vec::new()));
    }
    let cross = |o: usize, a: usize, b: usize| -> f64 {
        let (po, pa, pb) = (&reduced[o], &reduced[a], &reduced[b]);
        (pa[0] - po[0]) * (pb[1] - po[1]) - (pa[1] - po[1]) * (pb[0] - po[0])
    };
    // Monotone chain. Turn tolerance is area-scaled.
    let turn_tol = eps * eps.max(1e-9);
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= turn_tol
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= turn_tol
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    let ring: Vec<usize> = lower.into_iter().chain(upper).collect();
    if ring.len() < 3 {
        // Degenerate: effectively a segment at this tolerance.
        let (v, f) = hull_1d_along(reduced, &ring);
        return Ok((v, f));
    }
    let mut facets = Vec::with_capacity(ring.len());
    for k in 0..ring.len() {
        let a = ring[k];
        let b = ring[(k + 1) % ring.len()];
        let e = &reduced[b] - &reduced[a];
        // Ring is counterclockwise; outward normal is the right-hand normal.
        let mut n = DVector::from_row_slice(&[e[1], -e[0]]);
        let nn = n.norm();
        if nn < 1e-300 {
            continue;
        }
        n /= nn;
        facets.push(Facet {
            vertex_ids: vec![a, b],
            normal: n.clone(),
            offset: n.dot(&reduced[a]),
        });
    }
    Ok((ring, facets))
}

fn hull_1d_along(reduced: &[DVector<f64>], ring: &[usize]) -> (Vec<usize>, Vec<Facet>) {
    // Fallback when a 2-d cloud collapses to a segment: treat extremes along
    // the dominant direction, with two halfplane "facets" per side direction.
    let mut imin = ring[0];
    let mut imax = ring[0];
    for &i in ring {
        if reduced[i][0] < reduced[imin][0] {
            imin = i;
        }
        if reduced[i][0] > reduced[imax][0] {
            imax = i;
        }
    }
    let dir = (&reduced[imax] - &reduced[imin]).normalize();
    let n1 = dir.clone();
    let n2 = -dir.clone();
    let facets = vec![
        Facet {
            vertex_ids: vec![imax],
            offset: n1.dot(&reduced[imax]),
            normal: n1,
        },
        Facet {
            vertex_ids: vec![imin],
            offset: n2.dot(&reduced[imin]),
            normal: n2,
        },
    ];
    (vec![imin, imax], facets)
}

/// Quickhull with conflict lists for dimension ≥ 3, with joggle retries.
fn hull_nd(reduced: &[DVector<f64>], r: usize, eps: f64) -> Result<(Vec<usize>, Vec<Facet>)> {
    let mut attempt = 0u32;
    loop {
        let pts: Vec<DVector<f64>> = if attempt == 0 {
            reduced.to_vec()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9 + attempt as u64);
            let amp = eps * 10.0_f64.powi(attempt as i32 + 1);
            reduced
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    for i in 0..q.len() {
                        q[i] += amp * (rng.random::<f64>() - 0.5);
                    }
                    q
                })
                .collect()
        };
        match quickhull(&pts, r, eps) {
            Ok(raw) => {
                // Refit facet planes from the original (unjoggled) points.
                let mut out = Vec::with_capacity(raw.len());
                for f in &raw {
                    if let Some((n, o)) = fit_plane(reduced, &f.verts, &f.normal) {
                        out.push(Facet {
                            vertex_ids: f.verts.clone(),
                            normal: n,
                            offset: o,
                        });
                    }
                }
                let mut verts: Vec<usize> = out.iter().flat_map(|f| f.vertex_ids.clone()).collect();
                verts.sort_unstable();
                verts.dedup();
                return Ok((verts, out));
            }
            Err(_) if attempt < 4 => {
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Plane through the listed points, oriented like `hint`. Exactly r points
/// use the generalized cross product; larger (merged, coplanar) sets use the
/// smallest covariance eigenvector as a least-squares normal.
fn fit_plane(
    points: &[DVector<f64>],
    ids: &[usize],
    hint: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let r = points[0].len();
    let mut c = DVector::zeros(r);
    for &i in ids {
        c += &points[i];
    }
    c /= ids.len() as f64;
    let mut n = if ids.len() == r {
        let rows: Vec<DVector<f64>> = ids[1..]
            .iter()
            .map(|&i| &points[i] - &points[ids[0]])
            .collect();
        nullspace_normal(&rows)?
    } else {
        // Least-squares normal: smallest covariance eigenvector.
        let mut cov = DMatrix::zeros(r, r);
        for &i in ids {
            let d = &points[i] - &c;
            cov += &d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut k = 0;
        for i in 0..r {
            if eig.eigenvalues[i] < eig.eigenvalues[k] {
                k = i;
            }
        }
        eig.eigenvectors.column(k).into_owned()
    };
    let nn = n.norm();
    if nn < 1e-300 {
        return None;
    }
    n /= nn;
    if n.dot(hint) < 0.0 {
        n = -n;
    }
    let o = n.dot(&c);
    Some((n, o))
}

/// Generalized cross product: the vector orthogonal to r−1 rows of length
/// r, computed from cofactor determinants. Returns None when the rows are
/// (nearly) dependent relative to their lengths.
fn nullspace_normal(rows: &[DVector<f64>]) -> Option<DVector<f64>> {
    let r = rows[0].len();
    debug_assert_eq!(rows.len(), r - 1);
    let mut n = DVector::zeros(r);
    for j in 0..r {
        let mut minor = DMatrix::zeros(r - 1, r - 1);
        for (i, row) in rows.iter().enumerate() {
            let mut cj = 0;
            for k in 0..r {
                if k == j {
                    continue;
                }
                minor[(i, cj)] = row[k];
                cj += 1;
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        n[j] = sign * minor.determinant();
    }
    let scale: f64 = rows.iter().map(|d| d.norm()).product();
    if scale <= 0.0 || n.norm() < 1e-12 * scale {
        None
    } else {
        Some(n)
    }
}

struct QhFacet {
    verts: Vec<usize>,
    normal: DVector<f64>,
    offset: f64,
    neighbors: Vec<usize>,
    outside: Vec<usize>,
    alive: bool,
}

fn facet_normal(
    pts: &[DVector<f64>],
    verts: &[usize],
    interior: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let base = &pts[verts[0]];
    let rows: Vec<DVector<f64>> = verts[1..].iter().map(|&v| &pts[v] - base).collect();
    let n = nullspace_normal(&rows)?;
    let nn = n.norm();
    if nn < 1e-300 {
        return None;
    }
    let mut n = n / nn;
    let mut o = n.dot(base);
    if n.dot(interior) > o {
        n = -n;
        o = -o;
    }
    Some((n, o))
}

fn quickhull(pts: &[DVector<f64>], r: usize, eps: f64) -> Result<Vec<QhFacet>> {
    let m = pts.len();
    if m < r + 1 {
        return Err(GeomError::HullFailure {
            reason: format!("need at least {} points for dimension {}", r + 1, r),
        });
    }
    // Initial simplex: greedy farthest-point selection.
    let mut simplex: Vec<usize> = Vec::with_capacity(r + 1);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..m {
        if pts[i][0] < pts[lo][0] {
            lo = i;
        }
        if pts[i][0] > pts[hi][0] {
            hi = i;
        }
    }
    if lo == hi {
        hi = (lo + 1) % m;
    }
    simplex.push(lo);
    simplex.push(hi);
    let mut basis: Vec<DVector<f64>> = vec![(&pts[hi] - &pts[lo]).normalize()];
    while simplex.len() < r + 1 {
        let mut best = usize::MAX;
        let mut best_d = eps;
        for i in 0..m {
            if simplex.contains(&i) {
                continue;
            }
            let mut d = &pts[i] - &pts[simplex[0]];
            for b in &basis {
                let t = b.dot(&d);
                d -= b * t;
            }
            let dist = d.norm();
            if dist > best_d {
                best_d = dist;
                best = i;
            }
        }
        if best == usize::MAX {
            return Err(GeomError::HullFailure {
                reason: "degenerate initial simplex".into(),
            });
        }
        let mut d = &pts[best] - &pts[simplex[0]];
        for b in &basis {
            let t = b.dot(&d);
            d -= b * t;
        }
        basis.push(d.normalize());
        simplex.push(best);
    }
    let mut interior = DVector::zeros(r);
    for &i in &simplex {
        interior += &pts[i];
    }
    interior /= (r + 1) as f64;

    // Simplex facets: omit one vertex each.
    let mut facets: Vec<QhFacet> = Vec::new();
    for omit in 0..=r {
        let verts: Vec<usize> = simplex
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != omit)
            .map(|(_, &v)| v)
            .collect();
        let (n, o) = facet_normal(pts, &verts, &interior).ok_or(GeomError::HullFailure {
            reason: "degenerate simplex facet".into(),
        })?;
        facets.push(QhFacet {
            verts,
            normal: n,
            offset: o,
            neighbors: vec![usize::MAX; r],
            outside: Vec::new(),
            alive: true,
        });
    }
    // Neighbor wiring inside the simplex: facets f (omit a) and g (omit b)
    // share the ridge omitting both.
    let mut ridge_map: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
    for (fi, f) in facets.iter().enumerate() {
        for (vi, _) in f.verts.iter().enumerate() {
            let mut ridge: Vec<usize> = f
                .verts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != vi)
                .map(|(_, &v)| v)
                .collect();
            ridge.sort_unstable();
            ridge_map.entry(ridge).or_default().push((fi, vi));
        }
    }
    for entry in ridge_map.values() {
        if entry.len() == 2 {
            let (f1, p1) = entry[0];
            let (f2, p2) = entry[1];
            facets[f1].neighbors[p1] = f2;
            facets[f2].neighbors[p2] = f1;
        } else {
            return Err(GeomError::HullFailure {
                reason: "bad simplex adjacency".into(),
            });
        }
    }

    // Conflict assignment.
    let assign = |facets: &mut Vec<QhFacet>, pt: usize, candidates: &[usize]| {
        let mut best = usize::MAX;
        let mut best_e = eps;
        for &fi in candidates {
            if !facets[fi].alive {
                continue;
            }
            let e = facets[fi].normal.dot(&pts[pt]) - facets[fi].offset;
            if e > best_e {
                best_e = e;
                best = fi;
            }
        }
        if best != usize::MAX {
            facets[best].outside.push(pt);
            true
        } else {
            false
        }
    };
    let all: Vec<usize> = (0..facets.len()).collect();
    for i in 0..m {
        if simplex.contains(&i) {
            continue;
        }
        assign(&mut facets, i, &all);
    }

    // Main loop.
    let mut stack: Vec<usize> = (0..facets.len()).collect();
    let mut guard = 0usize;
    while let Some(fi) = stack.pop() {
        guard += 1;
        if guard > 200 * m + 10_000 {
            return Err(GeomError::HullFailure {
                reason: "quickhull did not terminate".into(),
            });
        }
        if !facets[fi].alive || facets[fi].outside.is_empty() {
            continue;
        }
        // Apex: farthest outside point of this facet.
        let apex = *facets[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| {
                let da = facets[fi].normal.dot(&pts[a]);
                let db = facets[fi].normal.dot(&pts[b]);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        // Visible set via BFS.
        let mut visible = vec![fi];
        let mut seen: HashMap<usize, bool> = HashMap::new();
        seen.insert(fi, true);
        let mut queue = vec![fi];
        while let Some(g) = queue.pop() {
            for k in 0..r {
                let nb = facets[g].neighbors[k];
                if nb == usize::MAX || seen.contains_key(&nb) || !facets[nb].alive {
                    continue;
                }
                let e = facets[nb].normal.dot(&pts[apex]) - facets[nb].offset;
                if e > eps * 0.5 {
                    seen.insert(nb, true);
                    visible.push(nb);
                    queue.push(nb);
                } else {
                    seen.insert(nb, false);
                }
            }
        }
        // Horizon ridges: (visible facet, vertex position) whose neighbor is hidden.
        let mut horizon: Vec<(usize, usize, usize)> = Vec::new(); // (vis facet, pos, hidden facet)
        for &v in &visible {
            for k in 0..r {
                let nb = facets[v].neighbors[k];
                if nb == usize::MAX {
                    return Err(GeomError::HullFailure {
                        reason: "open horizon".into(),
                    });
                }
                let nb_visible = visible.contains(&nb);
                if !nb_visible {
                    horizon.push((v, k, nb));
                }
            }
        }
        if horizon.is_empty() {
            return Err(GeomError::HullFailure {
                reason: "empty horizon".into(),
            });
        }
        // Collect orphaned outside points.
        let mut orphans: Vec<usize> = Vec::new();
        for &v in &visible {
            orphans.append(&mut facets[v].outside);
            facets[v].alive = false;
        }
        orphans.retain(|&p| p != apex);
        orphans.sort_unstable();
        orphans.dedup();
        // Build new facets over the horizon ridges.
        let mut new_ids: Vec<usize> = Vec::new();
        let mut sub_ridges: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for &(v, k, hidden) in &horizon {
            let ridge: Vec<usize> = facets[v]
                .verts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &x)| x)
                .collect();
            let mut verts = ridge.clone();
            verts.push(apex);
            let (n, o) = facet_normal(pts, &verts, &interior).ok_or(GeomError::HullFailure {
                reason: "degenerate horizon facet".into(),
            })?;
            let id = facets.len();
            facets.push(QhFacet {
                verts: verts.clone(),
                normal: n,
                offset: o,
                neighbors: vec![usize::MAX; r],
                outside: Vec::new(),
                alive: true,
            });
            new_ids.push(id);
            // Wire across the old ridge to the hidden facet.
            let apex_pos = verts.len() - 1;
            facets[id].neighbors[apex_pos] = hidden;
            // Hidden facet's pointer to v must now point to id.
            for k2 in 0..r {
                if facets[hidden].neighbors[k2] == v {
                    facets[hidden].neighbors[k2] = id;
                }
            }
            // Record sub-ridges (drop one ridge vertex, keep apex) for wiring
            // between the new facets.
            for drop_pos in 0..verts.len() - 1 {
                let mut sr: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != drop_pos)
                    .map(|(_, &x)| x)
                    .collect();
                sr.sort_unstable();
                sub_ridges.entry(sr).or_default().push((id, drop_pos));
            }
        }
        for entry in sub_ridges.values() {
            if entry.len() == 2 {
                let (f1, p1) = entry[0];
                let (f2, p2) = entry[1];
                facets[f1].neighbors[p1] = f2;
                facets[f2].neighbors[p2] = f1;
            } else if entry.len() > 2 {
                return Err(GeomError::HullFailure {
                    reason: "non-manifold horizon".into(),
                });
            }
        }
        // Sanity: every new facet fully wired.
        for &id in &new_ids {
            if facets[id].neighbors.iter().any(|&x| x == usize::MAX) {
                return Err(GeomError::HullFailure {
                    reason: "incomplete adjacency".into(),
                });
            }
        }
        // Reassign orphans to the new facets; as a numerical safety net a
        // point below all of them is rechecked against the full hull before
        // being declared interior.
        let alive_ids: Vec<usize> = (0..facets.len()).filter(|&i| facets[i].alive).collect();
        for p in orphans {
            if !assign(&mut facets, p, &new_ids) {
                assign(&mut facets, p, &alive_ids);
            }
        }
        for &id in &new_ids {
            if !facets[id].outside.is_empty() {
                stack.push(id);
            }
        }
    }
    Ok(facets.into_iter().filter(|f| f.alive).collect())
}

fn merge_planes(reduced: &[DVector<f64>], facets: &[Facet], r: usize, eps: f64) -> Vec<Plane> {
    if r == 0 {
        return Vec::new();
    }
    let mut planes: Vec<Plane> = Vec::new();
    let ang_tol = 1e-7;
    let off_tol = eps.max(1e-12) * 50.0;
    for f in facets {
        let mut found = None;
        for (i, p) in planes.iter().enumerate() {
            if p.normal.dot(&f.normal) > 1.0 - ang_tol && (p.offset - f.offset).abs() < off_tol {
                found = Some(i);
                break;
            }
        }
        match found {
            Some(i) => {
                planes[i].vertex_ids.extend_from_slice(&f.vertex_ids);
            }
            None => planes.push(Plane {
                normal: f.normal.clone(),
                offset: f.offset,
                vertex_ids: f.vertex_ids.clone(),
            }),
        }
    }
    for p in &mut planes {
        p.vertex_ids.sort_unstable();
        p.vertex_ids.dedup();
        // Refit genuinely merged planes by least squares over their members.
        if p.vertex_ids.len() > r {
            if let Some((n, o)) = fit_plane(reduced, &p.vertex_ids, &p.normal) {
                p.normal = n;
                p.offset = o;
            }
        }
    }
    planes
}

/// Wolfe's minimum-norm-point algorithm over the convex hull of a cloud.
/// Returns the point of smallest Euclidean norm in conv(points).
pub fn min_norm_point(points: &[DVector<f64>], tol: f64, max_iter: usize) -> DVector<f64> {
    assert!(!points.is_empty());
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.norm() < points[best].norm() {
            best = i;
        }
    }
    let mut corral: Vec<usize> = vec![best];
    let mut alpha: Vec<f64> = vec![1.0];
    let mut x = points[best].clone();
    let scale = points.iter().map(|p| p.norm()).fold(1e-30, f64::max);

    for _ in 0..max_iter {
        // Linear minimization oracle.
        let mut k = 0;
        let mut kv = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let v = x.dot(p);
            if v < kv {
                kv = v;
                k = i;
            }
        }
        if x.dot(&x) - kv <= tol * scale * scale {
            break;
        }
        if !corral.contains(&k) {
            corral.push(k);
            alpha.push(0.0);
        }
        // Inner loop: affine minimizer over the corral, walking back when
        // weights go negative.
        let mut inner_guard = 0;
        loop {
            inner_guard += 1;
            if inner_guard > 200 {
                break;
            }
            let m = corral.len();
            // Solve [G+ridge  1; 1^T 0][a; λ] = [0; 1].
            let mut sys = DMatrix::zeros(m + 1, m + 1);
            for i in 0..m {
                for j in 0..m {
                    sys[(i, j)] = points[corral[i]].dot(&points[corral[j]]);
                }
                sys[(i, i)] += 1e-14 * scale * scale;
                sys[(i, m)] = 1.0;
                sys[(m, i)] = 1.0;
            }
            let mut rhs = DVector::zeros(m + 1);
            rhs[m] = 1.0;
            let sol = sys.lu().solve(&rhs);
            let a_aff: Vec<f64> = match sol {
                Some(s) => (0..m).map(|i| s[i]).collect(),
                None => break,
            };
            if a_aff.iter().all(|&a| a > 1e-12) {
                alpha = a_aff;
                break;
            }
            // Walk from alpha toward a_aff until the first weight hits zero.
            let mut theta = 1.0_f64;
            for i in 0..m {
                if a_aff[i] < 1e-12 && alpha[i] > a_aff[i] {
                    theta = theta.min(alpha[i] / (alpha[i] - a_aff[i]));
                }
            }
            for i in 0..m {
                alpha[i] = (1.0 - theta) * alpha[i] + theta * a_aff[i];
            }
            let mut keep_c = Vec::new();
            let mut keep_a = Vec::new();
            for i in 0..m {
                if alpha[i] > 1e-12 {
                    keep_c.push(corral[i]);
                    keep_a.push(alpha[i]);
                }
            }
            if keep_c.is_empty() {
                keep_c.push(corral[0]);
                keep_a.push(1.0);
            }
            corral = keep_c;
            alpha = keep_a;
        }
        // Rebuild x from the corral.
        let mut nx = DVector::zeros(points[0].len());
        let s: f64 = alpha.iter().sum();
        for (i, &ci) in corral.iter().enumerate() {
            nx += &points[ci] * (alpha[i] / s);
        }
        if (&nx - &x).norm() <= 1e-16 * scale {
            x = nx;
            break;
        }
        x = nx;
    }
    x
}

/// Euclidean distance from a point to the convex hull of a cloud.
pub fn dist_to_hull(x: &DVector<f64>, points: &[DVector<f64>]) -> f64 {
    let shifted: Vec<DVector<f64>> = points.iter().map(|p| p - x).collect();
    min_norm_point(&shifted, 1e-12, 500).norm()
}

/// A unit functional strictly positive on every point of the cloud, if one
/// exists at the given margin: the normalized minimum-norm point of the hull.
/// Returns None when the hull (nearly) contains the origin, i.e. the cloud is
/// not properly convex as a set of sphere representatives.
pub fn positive_functional(points: &[DVector<f64>], margin: f64) -> Option<DVector<f64>> {
    let m = min_norm_point(points, 1e-14, 1000);
    let n = m.norm();
    if n <= margin {
        None
    } else {
        Some(m / n)
    }
}
