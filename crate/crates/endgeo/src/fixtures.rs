//! Deterministic example groups and domains.
//!
//! Everything the command-line self-test, the shipped JSON examples, and the
//! integration suite run against is built here, so the numbers appearing in
//! reports are reproducible from source. All constructors are deterministic;
//! the only randomness anywhere takes an explicit seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::body::ConvexBody;
use crate::config::Tol;
use crate::ends::TubeDomain;
use crate::error::Result;
use crate::sphere::{ProjMap, ProjPoint};

/// The Klein disk: unit ball of the chart at e₃ in `S²`.
pub fn klein_disk(tol: &Tol) -> Result<ConvexBody> {
    ConvexBody::unit_ball(2, tol)
}

/// Hyperbolic translation of rapidity `ell` along the Klein-disk axis at
/// angle `theta`, as an element of SO(2,1) for the standard chart at e₃.
pub fn so21_boost(theta: f64, ell: f64, tol: &Tol) -> Result<ProjMap> {
    let (c, s) = (ell.cosh(), ell.sinh());
    let b = DMatrix::from_row_slice(3, 3, &[c, 0.0, s, 0.0, 1.0, 0.0, s, 0.0, c]);
    let (ct, st) = (theta.cos(), theta.sin());
    let r = DMatrix::from_row_slice(3, 3, &[ct, -st, 0.0, st, ct, 0.0, 0.0, 0.0, 1.0]);
    ProjMap::new(&r * b * r.transpose(), tol)
}

/// Side-pairing translations of the regular hyperbolic octagon with vertex
/// angle π/4: four boosts of length `2·arccosh(1+√2)` along the axes at
/// angles kπ/4. They generate the genus-two surface group, which is a
/// cocompact lattice in SO(2,1) — the workhorse for flow recentering, where
/// every direction must return to a bounded fundamental region.
pub fn octagon_surface_group(tol: &Tol) -> Result<Vec<ProjMap>> {
    let ell = 2.0 * (1.0 + 2.0_f64.sqrt()).acosh();
    (0..4)
        .map(|k| so21_boost(k as f64 * std::f64::consts::FRAC_PI_4, ell, tol))
        .collect()
}

/// Embed an SO(2,1)-style block as the leading block of a map one dimension
/// up, fixing the last coordinate axis.
pub fn embed_block(g: &ProjMap, tol: &Tol) -> Result<ProjMap> {
    let n = g.ambient();
    let mut m = DMatrix::identity(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(g.matrix());
    ProjMap::new(m, tol)
}

/// Two-generator free convex-cocompact SO(2,1) subgroup embedded in SL(4),
/// fixing the vertex e₄ with vertex eigenvalue 1: boosts of rapidity 2 and
/// 2.2 along orthogonal Klein-disk axes. The rapidities are large enough
/// for ping-pong, so word balls grow like the free group and eigenvalue
/// data is exactly block-diagonal: `leng = 2·rapidity` for the generators
/// and `log λ̄ − log λ_v = leng/2` for every hyperbolic word, which pins the
/// middle-eigenvalue constant at 2.
pub fn so21_schottky_sl4(tol: &Tol) -> Result<Vec<ProjMap>> {
    let a = so21_boost(0.0, 2.0, tol)?;
    let b = so21_boost(std::f64::consts::FRAC_PI_2, 2.2, tol)?;
    Ok(vec![embed_block(&a, tol)?, embed_block(&b, tol)?])
}

/// The tube over the Klein disk at the Schottky fixture's vertex e₄. The
/// base lives in the link sphere at e₄, whose coordinates are e₁..e₃, so it
/// is exactly the Klein disk the SO(2,1) block acts on.
pub fn so21_tube_sl4(tol: &Tol) -> Result<TubeDomain> {
    TubeDomain::new(ProjPoint::basis(4, 3), ConvexBody::unit_ball(2, tol)?, tol)
}

/// Single-generator fixture whose vertex eigenvalue is the top of the
/// spectrum: `diag(1, ½, 2)` fixing e₃. The middle-eigenvalue condition
/// fails on every power, making this the canonical counterexample input.
pub fn vertex_dominant_sl3(tol: &Tol) -> Result<Vec<ProjMap>> {
    Ok(vec![ProjMap::new(
        DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.5, 2.0])),
        tol,
    )?])
}

/// Middle-eigenvalue model fixture in SL(3): `diag(2, ½, 1)` fixing e₃ with
/// vertex eigenvalue 1.
pub fn diag_lens_sl3(tol: &Tol) -> Result<Vec<ProjMap>> {
    Ok(vec![ProjMap::new(
        DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 0.5, 1.0])),
        tol,
    )?])
}

/// Full unipotent upper-triangular generator in SL(3): a cusp-type end.
pub fn unipotent_sl3(tol: &Tol) -> Result<Vec<ProjMap>> {
    Ok(vec![ProjMap::new(
        DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
        tol,
    )?])
}

/// Quasi-joined model generator: proximal 1×1 block `½` against a 2×2
/// unipotent block with translation +1, fixing the vertex e₂ inside the
/// unipotent block. `sign` flips the translation; the negative sign sends
/// the hull across the vertex axis and must be rejected downstream.
pub fn quasi_zeta(sign: f64, tol: &Tol) -> Result<ProjMap> {
    ProjMap::new(
        DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.0, 1.0, sign, 0.0, 0.0, 1.0]),
        tol,
    )
}

/// Generator with a nontrivial translation cocycle at the vertex e₃:
/// `[[1,0,0],[0,2,6],[0,0,2]]` has vertex block `2·(unipotent with shear 3)`,
/// so the cocycle value is 3 per letter and the positive-translation check
/// has a strict sign to certify.
pub fn cocycle_zeta(tol: &Tol) -> Result<ProjMap> {
    ProjMap::new(
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 6.0, 0.0, 0.0, 2.0]),
        tol,
    )
}

/// Seeds for a lens sweep: directions of the (ambient, equatorial) core
/// lifted slightly off the equatorial angle π/2 toward both tube vertices.
/// `offset` is the polar-angle step — the chart-metric collar scale of the
/// resulting lens.
pub fn lens_seeds(
    t: &TubeDomain,
    core: &ConvexBody,
    offset: f64,
    extra: usize,
    tol: &Tol,
) -> Result<Vec<ProjPoint>> {
    let mut dirs = vec![core.interior_point(tol)];
    dirs.extend(core.sample_body(extra.max(1), 0x5eed5, tol).into_iter().take(extra));
    let mut seeds = Vec::with_capacity(2 * dirs.len());
    for x in &dirs {
        let d = t.link_direction(x, tol)?;
        seeds.push(t.lift(&d, std::f64::consts::FRAC_PI_2 - offset, tol)?);
        seeds.push(t.lift(&d, std::f64::consts::FRAC_PI_2 + offset, tol)?);
    }
    Ok(seeds)
}

/// Perturb the leading n×n linear block of radial block-form generators by
/// `(I + eps·E)` with `E` uniform in [−1,1] entrywise, leaving the vertex
/// column and translation row untouched. The vertex stays exactly fixed, so
/// perturbed families probe openness of the eigenvalue conditions.
pub fn perturb_radial(gens: &[ProjMap], eps: f64, seed: u64, tol: &Tol) -> Result<Vec<ProjMap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gens.iter()
        .map(|g| {
            let n1 = g.ambient();
            let n = n1 - 1;
            let mut m = g.matrix().clone();
            let mut e = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    e[(i, j)] = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
            let block = m.view((0, 0), (n, n)) * (DMatrix::identity(n, n) + e * eps);
            m.view_mut((0, 0), (n, n)).copy_from(&block);
            ProjMap::new(m, tol)
        })
        .collect()
}
