//! Affine charts on hemispheres of `S^n`.
//!
//! The open hemisphere on the positive side of a cooriented hyperplane is
//! identified with affine `R^n` by central (gnomonic) projection: a point u
//! with `c·u > 0` gets coordinates `x_i = (b_i·u)/(c·u)` for a fixed
//! orthonormal basis `b_1..b_n` of `c^⊥`. Great-circle arcs inside the
//! hemisphere map to straight segments, so convexity questions become affine
//! convexity questions in the chart.

use nalgebra::{DMatrix, DVector};

use crate::config::Tol;
use crate::error::{GeomError, Result};
use crate::sphere::{Hyperplane, ProjPoint};

#[derive(Debug, Clone)]
pub struct Chart {
    /// Unit covector of the hemisphere (doubles as the chart center point).
    c: DVector<f64>,
    /// (n+1)×n matrix with orthonormal columns spanning `c^⊥`.
    basis: DMatrix<f64>,
}

impl Chart {
    /// Deterministic chart for a hyperplane: the basis of `c^⊥` is built by
    /// Gram–Schmidt over the standard basis with the coordinate most aligned
    /// with `c` dropped, so equal inputs always give byte-identical charts.
    pub fn new(h: &Hyperplane) -> Chart {
        let c = h.covector().clone();
        let n1 = c.len();
        let mut drop = 0usize;
        for i in 0..n1 {
            if c[i].abs() > c[drop].abs() {
                drop = i;
            }
        }
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n1 - 1);
        for i in 0..n1 {
            if i == drop {
                continue;
            }
            let mut v = DVector::zeros(n1);
            v[i] = 1.0;
            v -= &c * c[i];
            for b in &cols {
                let d = b.dot(&v);
                v -= b * d;
            }
            let norm = v.norm();
            v /= norm;
            cols.push(v);
        }
        Chart {
            c,
            basis: DMatrix::from_columns(&cols),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.c.len()
    }

    pub fn center(&self) -> ProjPoint {
        ProjPoint::new(self.c.clone(), &Tol::default()).expect("unit covector")
    }

    pub fn covector(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn hyperplane(&self) -> Hyperplane {
        Hyperplane::new(self.c.clone(), &Tol::default()).expect("unit covector")
    }

    /// Chart coordinates of a point strictly inside the hemisphere.
    pub fn to_chart(&self, p: &ProjPoint, tol: &Tol) -> Result<DVector<f64>> {
        let den = self.c.dot(p.vec());
        if den <= tol.norm {
            return Err(GeomError::NotInHemisphere { pairing: den });
        }
        Ok((self.basis.transpose() * p.vec()) / den)
    }

    /// Pairing `c·p`; positive iff p is in the open hemisphere.
    pub fn pairing(&self, p: &ProjPoint) -> f64 {
        self.c.dot(p.vec())
    }

    /// Inverse of `to_chart`.
    pub fn from_chart(&self, x: &DVector<f64>) -> ProjPoint {
        let v = &self.c + &self.basis * x;
        let n = v.norm();
        ProjPoint::new(v / n, &Tol::default()).expect("nonzero by construction")
    }

    /// Lift the affine functional `x ↦ b − a·x` (nonnegative on a chart set)
    /// to a cooriented hyperplane of `S^n` whose positive side contains the
    /// preimage of `{a·x < b}`.
    pub fn lift_functional(&self, a: &DVector<f64>, b: f64) -> Result<Hyperplane> {
        let cov = &self.c * b - &self.basis * a;
        Hyperplane::new(cov, &Tol::default())
    }

    /// Push a covector of `R^{n+1}` down to the affine functional it induces
    /// on the chart: φ(pt(x)) ∝ β − α·x with the returned (α, β).
    pub fn functional_of(&self, h: &Hyperplane) -> (DVector<f64>, f64) {
        let beta = self.c.dot(h.covector());
        let alpha = -(self.basis.transpose() * h.covector());
        (alpha, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip_and_determinism() {
        let t = Tol::default();
        let h = Hyperplane::from_slice(&[0.2, -0.3, 1.0], &t).unwrap();
        let ch = Chart::new(&h);
        let ch2 = Chart::new(&h);
        assert_eq!(ch.basis, ch2.basis);
        let x = DVector::from_row_slice(&[0.7, -1.3]);
        let p = ch.from_chart(&x);
        let back = ch.to_chart(&p, &t).unwrap();
        assert_relative_eq!((back - x).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_points_outside_hemisphere() {
        let t = Tol::default();
        let h = Hyperplane::from_slice(&[0.0, 0.0, 1.0], &t).unwrap();
        let ch = Chart::new(&h);
        let p = ProjPoint::from_slice(&[0.1, 0.1, -1.0], &t).unwrap();
        assert!(matches!(
            ch.to_chart(&p, &t),
            Err(GeomError::NotInHemisphere { .. })
        ));
    }

    #[test]
    fn lifted_functionals_vanish_on_the_right_locus() {
        let t = Tol::default();
        let h = Hyperplane::from_slice(&[0.0, 0.0, 1.0], &t).unwrap();
        let ch = Chart::new(&h);
        // Line x_0 = 1 in the chart.
        let a = DVector::from_row_slice(&[1.0, 0.0]);
        let plane = ch.lift_functional(&a, 1.0).unwrap();
        let on = ch.from_chart(&DVector::from_row_slice(&[1.0, 3.0]));
        let inside = ch.from_chart(&DVector::from_row_slice(&[0.0, 0.0]));
        let outside = ch.from_chart(&DVector::from_row_slice(&[2.0, 0.0]));
        assert!(plane.eval(&on).abs() < 1e-12);
        assert!(plane.eval(&inside) > 0.0);
        assert!(plane.eval(&outside) < 0.0);
        // functional_of inverts lift_functional up to positive scale.
        let (alpha, beta) = ch.functional_of(&plane);
        assert!(beta > 0.0);
        assert_relative_eq!(alpha[0] / beta, 1.0, epsilon = 1e-12);
        assert_relative_eq!(alpha[1] / beta, 0.0, epsilon = 1e-12);
    }
}
