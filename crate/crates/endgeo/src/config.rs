//! Numerical tolerances, collected in one overridable bundle.
//!
//! Every geometric predicate in the crate bands its comparisons with one of
//! these constants so that a run can be tightened or loosened coherently
//! (e.g. from the CLI via `--tol KEY=VAL`).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tol {
    /// Vector normalization slack: a vector shorter than this is "zero".
    pub norm: f64,
    /// Unit-determinant check when ingesting matrices.
    pub det: f64,
    /// Collinearity / rank decisions (relative singular value cutoff).
    pub col: f64,
    /// Cross-ratio denominator guard.
    pub den: f64,
    /// Matrix equality / block-structure residuals.
    pub mat: f64,
    /// Eigenvalue norm comparisons (unimodularity of the norm product).
    pub eig: f64,
    /// Eigenvalue norm gap used when clustering multiplicities.
    pub gap: f64,
    /// Geometric membership band in chart coordinates.
    pub geo: f64,
    /// Word-ball deduplication distance (Frobenius, after sign normalization).
    pub dedup: f64,
    /// Cocycle additivity residual.
    pub coc: f64,
    /// Convex hull construction tolerance (relative to bounding box).
    pub hull: f64,
    /// Word-ball element cap; exceeding it aborts enumeration.
    pub ball_cap: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            norm: 1e-12,
            det: 1e-9,
            col: 1e-8,
            den: 1e-10,
            mat: 1e-8,
            eig: 1e-7,
            gap: 1e-6,
            geo: 1e-9,
            dedup: 1e-8,
            coc: 1e-7,
            hull: 1e-9,
            ball_cap: 200_000,
        }
    }
}

impl Tol {
    /// Apply a `KEY=VALUE` override. Unknown keys are rejected so typos in
    /// job files surface as input errors instead of silently defaulting.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        match key {
            "norm" => self.norm = value,
            "det" => self.det = value,
            "col" => self.col = value,
            "den" => self.den = value,
            "mat" => self.mat = value,
            "eig" => self.eig = value,
            "gap" => self.gap = value,
            "geo" => self.geo = value,
            "dedup" => self.dedup = value,
            "coc" => self.coc = value,
            "hull" => self.hull = value,
            "ball_cap" => {
                if value < 1.0 {
                    return Err("ball_cap must be at least 1".into());
                }
                self.ball_cap = value as usize;
            }
            other => return Err(format!("unknown tolerance key `{other}`")),
        }
        Ok(())
    }
}
