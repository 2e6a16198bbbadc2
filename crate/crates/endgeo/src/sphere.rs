//! Points, hyperplanes, subspaces and maps on the projective sphere `S^n`.
//!
//! `S^n` is the sphere of directions in `R^{n+1}`: a point and its antipode
//! are distinct, every hyperplane is cooriented by a unit covector, and the
//! automorphism group is `SL±(n+1, R)` (determinant ±1) acting by
//! `x ↦ Ax/‖Ax‖`. Keeping the double cover explicit is what lets the convex
//! body and tube machinery do honest sign bookkeeping near antipodes.

use nalgebra::{DMatrix, DVector};

use crate::config::Tol;
use crate::error::{GeomError, Result};

/// A point of `S^n`, stored as a unit vector in `R^{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjPoint {
    v: DVector<f64>,
}

impl ProjPoint {
    pub fn new(v: DVector<f64>, tol: &Tol) -> Result<Self> {
        let n = v.norm();
        if n < tol.norm {
            return Err(GeomError::ZeroVector);
        }
        Ok(ProjPoint { v: v / n })
    }

    pub fn from_slice(s: &[f64], tol: &Tol) -> Result<Self> {
        Self::new(DVector::from_row_slice(s), tol)
    }

    /// Standard basis point `e_i` of `S^n` (ambient dimension n+1).
    pub fn basis(ambient: usize, i: usize) -> Self {
        let mut v = DVector::zeros(ambient);
        v[i] = 1.0;
        ProjPoint { v }
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.v
    }

    /// Ambient dimension n+1.
    pub fn ambient(&self) -> usize {
        self.v.len()
    }

    pub fn antipode(&self) -> Self {
        ProjPoint { v: -&self.v }
    }

    /// Spherical (angular) distance in [0, π].
    pub fn angle_to(&self, other: &ProjPoint) -> f64 {
        self.v.dot(&other.v).clamp(-1.0, 1.0).acos()
    }

    pub fn approx_eq(&self, other: &ProjPoint, eps: f64) -> bool {
        (&self.v - &other.v).norm() <= eps
    }
}

/// A cooriented hyperplane of `S^n`: the zero set of a unit covector, with
/// positive side `{x : c·x > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    c: DVector<f64>,
}

impl Hyperplane {
    pub fn new(c: DVector<f64>, tol: &Tol) -> Result<Self> {
        let n = c.norm();
        if n < tol.norm {
            return Err(GeomError::ZeroVector);
        }
        Ok(Hyperplane { c: c / n })
    }

    pub fn from_slice(s: &[f64], tol: &Tol) -> Result<Self> {
        Self::new(DVector::from_row_slice(s), tol)
    }

    pub fn covector(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn ambient(&self) -> usize {
        self.c.len()
    }

    /// Signed pairing `c·x`; positive means the positive side.
    pub fn eval(&self, p: &ProjPoint) -> f64 {
        self.c.dot(p.vec())
    }

    /// The point of `S^{n*}` this hyperplane corresponds to under the
    /// standard inner product (and conversely: each point has a dual
    /// hyperplane with the same coordinates).
    pub fn dual_point(&self) -> ProjPoint {
        ProjPoint { v: self.c.clone() }
    }

    pub fn from_point(p: &ProjPoint) -> Hyperplane {
        Hyperplane { c: p.vec().clone() }
    }
}

/// An element of `SL±(n+1, R)` acting on `S^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjMap {
    m: DMatrix<f64>,
}

impl ProjMap {
    /// Ingest a square matrix, rescaling to `|det| = 1`. Returns the map and
    /// the rescaling factor that was applied (1.0 when already unimodular).
    pub fn new_normalized(m: DMatrix<f64>, tol: &Tol) -> Result<(Self, f64)> {
        if m.nrows() != m.ncols() {
            return Err(GeomError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(GeomError::SingularMatrix { det });
        }
        let scale = det.abs().powf(1.0 / m.nrows() as f64);
        let _ = tol;
        Ok((ProjMap { m: m / scale }, scale))
    }

    pub fn new(m: DMatrix<f64>, tol: &Tol) -> Result<Self> {
        Self::new_normalized(m, tol).map(|(g, _)| g)
    }

    pub fn identity(ambient: usize) -> Self {
        ProjMap {
            m: DMatrix::identity(ambient, ambient),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn ambient(&self) -> usize {
        self.m.nrows()
    }

    /// Action on points: `x ↦ Ax/‖Ax‖`. No antipodal collapse — the sign of
    /// the image is the sign of `Ax`.
    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        let w = &self.m * p.vec();
        let n = w.norm();
        ProjPoint { v: w / n }
    }

    /// Action on hyperplanes (inverse-transpose on covectors), so that
    /// incidence and coorientation are preserved: `(g·h)(g·x) ∝ h(x)`.
    pub fn apply_hyperplane(&self, h: &Hyperplane) -> Result<Hyperplane> {
        let d = self.dual_map()?;
        Ok(Hyperplane {
            c: {
                let w = d.m * &h.c;
                let n = w.norm();
                w / n
            },
        })
    }

    /// The induced automorphism of the dual sphere: inverse transpose.
    pub fn dual_map(&self) -> Result<ProjMap> {
        let inv = self
            .m
            .clone()
            .try_inverse()
            .ok_or(GeomError::SingularMatrix { det: 0.0 })?;
        Ok(ProjMap { m: inv.transpose() })
    }

    pub fn inverse(&self) -> Result<ProjMap> {
        let inv = self
            .m
            .clone()
            .try_inverse()
            .ok_or(GeomError::SingularMatrix { det: 0.0 })?;
        Ok(ProjMap { m: inv })
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &ProjMap) -> ProjMap {
        ProjMap {
            m: &self.m * &other.m,
        }
    }

    /// Matrix with a canonical global sign: the entry of largest magnitude
    /// (first such in column-major order on ties) is made positive. Two
    /// matrices representing the same map on `S^n` differ at most by this
    /// sign only when the determinant parity allows it; dedup uses this
    /// normalization purely as a hashing canonical form.
    pub fn sign_normalized(&self) -> DMatrix<f64> {
        let mut best = 0.0_f64;
        let mut sign = 1.0_f64;
        for &x in self.m.iter() {
            if x.abs() > best + 1e-15 {
                best = x.abs();
                sign = if x >= 0.0 { 1.0 } else { -1.0 };
            }
        }
        &self.m * sign
    }

    /// Frobenius distance between sign-normalized representatives.
    pub fn dist(&self, other: &ProjMap) -> f64 {
        (self.sign_normalized() - other.sign_normalized()).norm()
    }

    /// True action distance on the sphere: min over the ± representative.
    pub fn dist_projective(&self, other: &ProjMap) -> f64 {
        let a = (&self.m - &other.m).norm();
        let b = (&self.m + &other.m).norm();
        a.min(b)
    }
}

/// A great subsphere of `S^n`, stored as an orthonormal basis of the linear
/// subspace it spans.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn from_basis(basis: DMatrix<f64>) -> Self {
        Subspace { basis }
    }

    /// Dimension of the linear span (the great sphere has dimension one less).
    pub fn linear_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn project(&self, p: &ProjPoint) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * p.vec())
    }

    pub fn contains(&self, p: &ProjPoint, eps: f64) -> bool {
        (p.vec() - self.project(p)).norm() <= eps
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn orthogonal_complement(&self) -> Subspace {
        let n = self.basis.nrows();
        let k = self.basis.ncols();
        // Eigenvectors of the complement projector with eigenvalue ≈ 1.
        let proj = DMatrix::identity(n, n) - &self.basis * self.basis.transpose();
        let eig = proj.symmetric_eigen();
        let mut cols = Vec::new();
        for i in 0..n {
            if eig.eigenvalues[i] > 0.5 {
                cols.push(eig.eigenvectors.column(i).into_owned());
            }
        }
        debug_assert_eq!(cols.len(), n - k);
        Subspace {
            basis: DMatrix::from_columns(&cols),
        }
    }
}

/// Orthonormal basis of the span of the given vectors, via the symmetric
/// eigendecomposition of Σ v vᵀ (the general SVD is unreliable on exactly
/// rank-deficient input). Returns the basis vectors in descending
/// eigenvalue order together with the relative singular values
/// `σ_i/σ_max = sqrt(λ_i/λ_max)`; vectors with relative singular value
/// above `rel` make up the basis.
pub(crate) fn span_basis(cols: &[DVector<f64>], rel: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = cols[0].len();
    let mut gram = DMatrix::zeros(n, n);
    for v in cols {
        gram += v * v.transpose();
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let mut basis = Vec::new();
    let mut rel_sv = Vec::with_capacity(n);
    for &i in &order {
        let s = if lmax > 0.0 {
            (eig.eigenvalues[i].max(0.0) / lmax).sqrt()
        } else {
            0.0
        };
        rel_sv.push(s);
        if s > rel {
            basis.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    (basis, rel_sv)
}

/// Least great subsphere containing the given points (span of their lifts).
pub fn join_points(points: &[ProjPoint], tol: &Tol) -> Result<Subspace> {
    if points.is_empty() {
        return Err(GeomError::ZeroVector);
    }
    let n = points[0].ambient();
    for p in points {
        if p.ambient() != n {
            return Err(GeomError::DimensionMismatch {
                expected: n,
                got: p.ambient(),
            });
        }
    }
    let cols: Vec<_> = points.iter().map(|p| p.vec().clone()).collect();
    let (basis_cols, _) = span_basis(&cols, tol.col);
    Ok(Subspace::from_basis(DMatrix::from_columns(&basis_cols)))
}

/// Cross-ratio `[o, s, q, p]` of four points on a common great circle,
/// computed as `((ō−q̄)/(s̄−q̄)) · ((s̄−p̄)/(ō−p̄))` in an affine coordinate
/// on that circle. The value does not depend on the chosen coordinate.
///
/// Preconditions: the four points are collinear (span of rank 2 within the
/// collinearity tolerance), and the pairs `(o,p)` and `(s,q)` are distinct
/// so the denominators make sense. `q = o` gives 0, `q = p` gives 1.
pub fn cross_ratio(
    o: &ProjPoint,
    s: &ProjPoint,
    q: &ProjPoint,
    p: &ProjPoint,
    tol: &Tol,
) -> Result<f64> {
    let pts = [o, s, q, p];
    let n = o.ambient();
    for x in &pts {
        if x.ambient() != n {
            return Err(GeomError::DimensionMismatch {
                expected: n,
                got: x.ambient(),
            });
        }
    }
    let cols = [
        o.vec().clone(),
        s.vec().clone(),
        q.vec().clone(),
        p.vec().clone(),
    ];
    let (basis, rel_sv) = span_basis(&cols, tol.col);
    let rank3 = if rel_sv.len() > 2 { rel_sv[2] } else { 0.0 };
    if rank3 > tol.col {
        return Err(GeomError::NotCollinear { residual: rank3 });
    }
    if basis.len() < 2 {
        return Err(GeomError::DegenerateConfig { which: "span" });
    }
    let b1 = basis[0].clone();
    let b2 = basis[1].clone();

    // Plane coordinates of the four points.
    let coords: Vec<(f64, f64)> = pts
        .iter()
        .map(|x| (b1.dot(x.vec()), b2.dot(x.vec())))
        .collect();

    // Pick the affine frame direction (the "line at infinity" of the
    // coordinate) maximizing the smallest denominator among the four
    // points, for conditioning.
    let mut best_w = (1.0, 0.0);
    let mut best_min = -1.0;
    let k_dirs = 32;
    for k in 0..k_dirs {
        let th = std::f64::consts::PI * (k as f64) / (k_dirs as f64);
        let w = (th.cos(), th.sin());
        let mn = coords
            .iter()
            .map(|&(a, b)| (w.0 * a + w.1 * b).abs())
            .fold(f64::INFINITY, f64::min);
        if mn > best_min {
            best_min = mn;
            best_w = w;
        }
    }
    let (wc, ws) = best_w;
    // Affine coordinate t = (w⊥·x)/(w·x).
    let t: Vec<f64> = coords
        .iter()
        .map(|&(a, b)| (-ws * a + wc * b) / (wc * a + ws * b))
        .collect();
    let (to, ts, tq, tp) = (t[0], t[1], t[2], t[3]);
    let scale = t.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    if (ts - tq).abs() < tol.den * scale {
        return Err(GeomError::DegenerateConfig { which: "s - q" });
    }
    if (to - tp).abs() < tol.den * scale {
        return Err(GeomError::DegenerateConfig { which: "o - p" });
    }
    Ok(((to - tq) / (ts - tq)) * ((ts - tp) / (to - tp)))
}

/// Cross-ratio of four real numbers in a fixed affine coordinate; the
/// pattern `[o, s, q, p]` as above. Used on chord parameters.
pub fn cross_ratio_affine(o: f64, s: f64, q: f64, p: f64) -> f64 {
    ((o - q) / (s - q)) * ((s - p) / (o - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> Tol {
        Tol::default()
    }

    /// Lift an affine parameter t to the great circle {(t,0,1)}/norm of S².
    fn lift(t: f64) -> ProjPoint {
        ProjPoint::from_slice(&[t, 0.0, 1.0], &tol()).unwrap()
    }

    #[test]
    fn cross_ratio_matches_affine_oracle() {
        // ((0−1)/(3−1))·((3−2)/(0−2)) = (−1/2)(−1/2) = 1/4.
        let cr = cross_ratio(&lift(0.0), &lift(3.0), &lift(1.0), &lift(2.0), &tol()).unwrap();
        assert_relative_eq!(cr, 0.25, epsilon = 1e-12);
        assert_relative_eq!(cross_ratio_affine(0.0, 3.0, 1.0, 2.0), 0.25);
    }

    #[test]
    fn cross_ratio_degenerate_values() {
        // q = p gives 1, q = o gives 0.
        let cr1 = cross_ratio(&lift(0.0), &lift(3.0), &lift(2.0), &lift(2.0), &tol()).unwrap();
        assert_relative_eq!(cr1, 1.0, epsilon = 1e-12);
        let cr0 = cross_ratio(&lift(0.0), &lift(3.0), &lift(0.0), &lift(2.0), &tol()).unwrap();
        assert_relative_eq!(cr0, 0.0, epsilon = 1e-12);
        // o = p is a genuine degeneracy.
        let e = cross_ratio(&lift(1.0), &lift(3.0), &lift(0.0), &lift(1.0), &tol());
        assert!(matches!(e, Err(GeomError::DegenerateConfig { .. })));
    }

    #[test]
    fn cross_ratio_rejects_noncollinear() {
        let a = ProjPoint::from_slice(&[1.0, 0.0, 0.0], &tol()).unwrap();
        let b = ProjPoint::from_slice(&[0.0, 1.0, 0.0], &tol()).unwrap();
        let c = ProjPoint::from_slice(&[0.0, 0.0, 1.0], &tol()).unwrap();
        let d = ProjPoint::from_slice(&[1.0, 1.0, 1.0], &tol()).unwrap();
        assert!(matches!(
            cross_ratio(&a, &b, &c, &d, &tol()),
            Err(GeomError::NotCollinear { .. })
        ));
    }

    #[test]
    fn cross_ratio_is_sign_independent() {
        let cr1 = cross_ratio(&lift(0.0), &lift(3.0), &lift(1.0), &lift(2.0), &tol()).unwrap();
        let cr2 = cross_ratio(
            &lift(0.0).antipode(),
            &lift(3.0),
            &lift(1.0),
            &lift(2.0).antipode(),
            &tol(),
        )
        .unwrap();
        assert_relative_eq!(cr1, cr2, epsilon = 1e-12);
    }

    #[test]
    fn apply_normalizes_and_composes() {
        let t = tol();
        let g = ProjMap::new(
            DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            &t,
        )
        .unwrap();
        let h = ProjMap::new(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]),
            &t,
        )
        .unwrap();
        let p = ProjPoint::from_slice(&[1.0, 2.0, 3.0], &t).unwrap();
        let lhs = g.compose(&h).apply(&p);
        let rhs = g.apply(&h.apply(&p));
        assert!(lhs.approx_eq(&rhs, 1e-12));
        assert_relative_eq!(lhs.vec().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dual_map_is_contravariant_with_inverse() {
        // (gh)^{-T} = g^{-T} h^{-T}.
        let t = tol();
        let g = ProjMap::new(
            DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, 0.0, 1.0, -1.0, 0.3, 0.0, 1.0]),
            &t,
        )
        .unwrap();
        let h = ProjMap::new(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.5, 1.0, 0.0, -0.1, 0.4, 1.0]),
            &t,
        )
        .unwrap();
        let lhs = g.compose(&h).dual_map().unwrap();
        let rhs = g.dual_map().unwrap().compose(&h.dual_map().unwrap());
        assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-12);
    }

    #[test]
    fn hyperplane_action_preserves_incidence_and_side() {
        let t = tol();
        let g = ProjMap::new(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.7, 0.0, 0.0, 2.0, 0.1, 0.0, 0.0, 0.9]),
            &t,
        )
        .unwrap();
        let h = Hyperplane::from_slice(&[0.3, -1.0, 0.5], &t).unwrap();
        let p = ProjPoint::from_slice(&[1.0, 0.4, -0.2], &t).unwrap();
        let side_before = h.eval(&p);
        let side_after = g.apply_hyperplane(&h).unwrap().eval(&g.apply(&p));
        // Signs agree (the pairing is rescaled by positive factors only when
        // det-normalized maps act; check sign consistency).
        assert!(side_before * side_after > 0.0);
    }

    #[test]
    fn join_points_finds_great_circle() {
        let t = tol();
        let pts = vec![lift(0.0), lift(1.0), lift(-2.5)];
        let s = join_points(&pts, &t).unwrap();
        assert_eq!(s.linear_dim(), 2);
        assert!(s.contains(&lift(7.0), 1e-9));
        let off = ProjPoint::from_slice(&[0.0, 1.0, 0.0], &t).unwrap();
        assert!(!s.contains(&off, 1e-9));
        let comp = s.orthogonal_complement();
        assert_eq!(comp.linear_dim(), 1);
        assert!(comp.contains(&off, 1e-9));
    }

    #[test]
    fn sign_normalization_makes_dedup_stable() {
        let t = tol();
        let m = DMatrix::from_row_slice(3, 3, &[-2.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, -1.0]);
        let g = ProjMap::new(m.clone(), &t).unwrap();
        let h = ProjMap::new(-m, &t).unwrap();
        assert!(g.dist(&h) < 1e-15);
    }
}
