//! Computational convex projective geometry on the sphere.
//!
//! Everything happens on the projective sphere `S^n` (the double cover of
//! `RP^n`): points keep their signs, hyperplanes keep a positive side, and
//! the automorphism group is `SL±(n+1, R)` acting by `x ↦ Ax/|Ax|`.
//! On top of that sit properly convex bodies with their Hilbert metrics and
//! polar duals, eigenvalue machinery for holonomy samples (proximality,
//! length functions, the uniform middle eigenvalue condition and its weak
//! variant), tube domains and lens-cone constructions for radial and totally
//! geodesic ends, quasi-lens translation cocycles, and a geodesic-flow
//! bundle audit measuring exponential contraction rates.
//!
//! All checks operate on finite samples (word balls of a generated group),
//! so every "pass" is a statement about the sampled ball at the recorded
//! radius, not a proof about the full group. Reports say so.

pub mod config;
pub mod error;
pub mod sphere;
pub mod chart;
pub mod hull;
pub mod body;
pub mod holonomy;
pub mod ends;
pub mod flow;
pub mod fixtures;
pub mod cli;

pub use config::Tol;
pub use error::GeomError;
