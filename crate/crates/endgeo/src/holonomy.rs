//! Eigenvalue analysis of end holonomy groups: proximality classes,
//! translation lengths, vertex block forms, word balls, and the middle
//! eigenvalue conditions.
//!
//! Everything here works on finite word balls. A [`GroupSample`] enumerates
//! reduced words up to a radius and deduplicates them by matrix proximity,
//! so every verdict produced downstream is a certificate "up to radius R",
//! never a statement about the infinite group.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::config::Tol;
use crate::error::{GeomError, Result};
use crate::sphere::{ProjMap, ProjPoint, Subspace};

// ---------------------------------------------------------------------------
// Eigenvalue profiles and proximality
// ---------------------------------------------------------------------------

/// The sorted eigenvalue-modulus data of a unimodular matrix.
///
/// `norms` are renormalized to exact unit product (the raw product drifts
/// from 1 by product and solver roundoff; gross drift is reported as a
/// solver failure). Multiplicities count eigenvalues whose log-moduli
/// cluster within `tol.gap` of the extremes.
#[derive(Debug, Clone)]
pub struct EigenProfile {
    /// Eigenvalue moduli, sorted descending: λ₁ ≥ … ≥ λ_{n+1}.
    pub norms: Vec<f64>,
    /// The top cluster contains a positive real eigenvalue and no negative
    /// real one.
    pub top_real_positive: bool,
    pub bottom_real_positive: bool,
    /// Algebraic multiplicity of the top/bottom norm cluster.
    pub top_multiplicity: usize,
    pub bottom_multiplicity: usize,
}

impl EigenProfile {
    pub fn dim(&self) -> usize {
        self.norms.len()
    }

    /// log(λ₁ / λ_last): the spectral spread.
    pub fn log_spread(&self) -> f64 {
        (self.norms[0] / self.norms[self.norms.len() - 1]).ln()
    }
}

/// Complex spectrum of a square matrix via the real Schur form.
fn complex_spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let eigs = m.clone().complex_eigenvalues();
    let v: Vec<Complex<f64>> = eigs.iter().copied().collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(GeomError::EigenFailure);
    }
    Ok(v)
}

/// Eigenvalue profile of a raw unimodular matrix.
pub(crate) fn eigen_profile_of(m: &DMatrix<f64>, tol: &Tol) -> Result<EigenProfile> {
    let spec = complex_spectrum(m)?;
    let k = spec.len();
    let mut moduli: Vec<f64> = spec.iter().map(|z| z.norm()).collect();
    if moduli.iter().any(|&x| x <= 0.0) {
        return Err(GeomError::EigenFailure);
    }
    // Product of moduli = |det| = 1; renormalize the roundoff away, treat
    // gross drift as non-convergence. Long word products are not exactly
    // unimodular in f64: entry errors scale with the product of the factor
    // norms, so the bottom modulus of a spread-L word is resolved only to
    // within O(exp stray log units) and the drift grows with L. Verdicts
    // never hinge on that resolution (they compare log quantities against
    // margins of order L/n), so the gate scales with the spread instead of
    // rejecting long words outright.
    let drift: f64 = moduli.iter().map(|x| x.ln()).sum();
    let spread = moduli.iter().cloned().fold(0.0_f64, f64::max).ln()
        - moduli.iter().cloned().fold(f64::INFINITY, f64::min).ln();
    if drift.abs() > 0.05 + 0.25 * spread {
        return Err(GeomError::EigenFailure);
    }
    let fix = (-drift / k as f64).exp();
    for x in moduli.iter_mut() {
        *x *= fix;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| moduli[b].partial_cmp(&moduli[a]).unwrap());
    let norms: Vec<f64> = order.iter().map(|&i| moduli[i]).collect();

    // Cluster the extremes by log-norm gap and inspect realness/signs.
    let log_top = norms[0].ln();
    let log_bot = norms[k - 1].ln();
    let mut top_mult = 0;
    let mut bot_mult = 0;
    let (mut top_pos, mut top_neg, mut bot_pos, mut bot_neg) = (false, false, false, false);
    for (&i, &nm) in order.iter().zip(norms.iter()) {
        let z = spec[i];
        let real = z.im.abs() < tol.eig * (1.0 + z.norm());
        if nm.ln() >= log_top - tol.gap {
            top_mult += 1;
            top_pos |= real && z.re > 0.0;
            top_neg |= real && z.re < 0.0;
        }
        if nm.ln() <= log_bot + tol.gap {
            bot_mult += 1;
            bot_pos |= real && z.re > 0.0;
            bot_neg |= real && z.re < 0.0;
        }
    }
    Ok(EigenProfile {
        norms,
        top_real_positive: top_pos && !top_neg,
        bottom_real_positive: bot_pos && !bot_neg,
        top_multiplicity: top_mult,
        bottom_multiplicity: bot_mult,
    })
}

pub fn eigen_profile(g: &ProjMap, tol: &Tol) -> Result<EigenProfile> {
    eigen_profile_of(g.matrix(), tol)
}

/// Proximality classes, strongest first. `None` covers elements whose
/// extreme eigenvalue norms coincide (elliptic/parabolic types) or are
/// attained only by negative or complex eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Proximality {
    Biproximal,
    Proximal,
    BiSemiproximal,
    Semiproximal,
    None,
}

pub(crate) fn classify_profile(p: &EigenProfile, tol: &Tol) -> Proximality {
    if p.log_spread() <= tol.gap {
        return Proximality::None;
    }
    let top_prox = p.top_real_positive && p.top_multiplicity == 1;
    let bot_prox = p.bottom_real_positive && p.bottom_multiplicity == 1;
    if top_prox && bot_prox {
        Proximality::Biproximal
    } else if top_prox {
        Proximality::Proximal
    } else if p.top_real_positive && p.bottom_real_positive {
        Proximality::BiSemiproximal
    } else if p.top_real_positive || p.bottom_real_positive {
        Proximality::Semiproximal
    } else {
        Proximality::None
    }
}

pub fn proximality_class(g: &ProjMap, tol: &Tol) -> Result<Proximality> {
    Ok(classify_profile(&eigen_profile(g, tol)?, tol))
}

/// Translation length `log(λ₁/λ_n)`; equals the infimum of Hilbert
/// displacements on any properly convex domain the element translates.
pub fn leng(g: &ProjMap, tol: &Tol) -> Result<f64> {
    let p = eigen_profile(g, tol)?;
    if classify_profile(&p, tol) == Proximality::None {
        return Err(GeomError::NotProximal {
            reason: "extreme eigenvalue norms give no proximal pair".into(),
        });
    }
    Ok(p.log_spread())
}

/// The gap ratios `α_g = (logλ₁−logλ_n)/(logλ₁−logλ_{n−1})` and
/// `β_g = (logλ₁−logλ_n)/(logλ₁−logλ₂)` of a biproximal element, computed
/// on the matrix handed in (pass the linear block for vertex data).
/// Divisible strictly convex actions satisfy `1 < α ≤ 2 ≤ β`; the values
/// are reported, not enforced.
pub fn alpha_beta(g: &ProjMap, tol: &Tol) -> Result<(f64, f64)> {
    let p = eigen_profile(g, tol)?;
    let n = p.norms.len();
    if n < 3 {
        return Err(GeomError::DimensionMismatch { expected: 3, got: n });
    }
    let logs: Vec<f64> = p.norms.iter().map(|x| x.ln()).collect();
    let top_gap = logs[0] - logs[1];
    if top_gap < tol.eig {
        return Err(GeomError::ZeroGap { gap: top_gap });
    }
    if classify_profile(&p, tol) != Proximality::Biproximal {
        return Err(GeomError::NotProximal {
            reason: "alpha/beta need a biproximal element".into(),
        });
    }
    let spread = logs[0] - logs[n - 1];
    Ok((spread / (logs[0] - logs[n - 2]), spread / top_gap))
}

/// Margins of the two-sided eigenvalue–length inequality
/// `(1/n)·leng(g) ≤ log λ₁(g) ≤ ((n−1)/n)·leng(g)`, an identity for any
/// sorted log-spectrum summing to zero.
#[derive(Debug, Clone, Serialize)]
pub struct LengthBounds {
    pub n: usize,
    pub leng: f64,
    pub log_top: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn eigen_length_bounds_check(g: &ProjMap, tol: &Tol) -> Result<LengthBounds> {
    let p = eigen_profile(g, tol)?;
    if classify_profile(&p, tol) == Proximality::None {
        return Err(GeomError::NotProximal {
            reason: "length bounds need a (bi)semiproximal element".into(),
        });
    }
    let n = p.norms.len();
    let l = p.log_spread();
    let log_top = p.norms[0].ln();
    let lower = l / n as f64;
    let upper = (n as f64 - 1.0) / n as f64 * l;
    Ok(LengthBounds {
        n,
        leng: l,
        log_top,
        lower,
        upper,
        pass: log_top >= lower - tol.eig && log_top <= upper + tol.eig,
    })
}

// ---------------------------------------------------------------------------
// Vertex block forms
// ---------------------------------------------------------------------------

/// Which block pattern to extract at the distinguished point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// The point is a fixed vertex: zero upper-right column, translation in
    /// the bottom row.
    Radial,
    /// The hyperplane dual to the point is preserved: zero bottom row,
    /// translation in the last column.
    Affine,
}

/// The block decomposition of a holonomy element at a vertex conjugated to
/// the last coordinate: `g ~ [[λ_v^{−1/n}·ĥ, 0], [b, λ_v]]` (radial) with
/// `|det ĥ| = 1`, or its transpose-pattern affine variant.
#[derive(Debug, Clone)]
pub struct VertexBlockForm {
    /// ĥ(g): the n×n linear part, normalized to |det| = 1.
    pub linear_part: DMatrix<f64>,
    /// b_g: bottom row (radial) or last column (affine) of the conjugated
    /// matrix.
    pub translation: DVector<f64>,
    /// λ_v(g) > 0.
    pub vertex_eigenvalue: f64,
}

impl VertexBlockForm {
    /// Norms λ̃ᵢ of the linear part, sorted descending.
    pub fn linear_profile(&self, tol: &Tol) -> Result<EigenProfile> {
        eigen_profile_of(&self.linear_part, tol)
    }

    /// Largest eigenvalue norm of the full (n+1)×(n+1) element, recovered
    /// from the block data: max(λ_v, λ_v^{−1/n}·λ̃₁).
    pub fn full_top_norm(&self, tol: &Tol) -> Result<f64> {
        let p = self.linear_profile(tol)?;
        let n = self.linear_part.nrows() as f64;
        Ok(self
            .vertex_eigenvalue
            .max(self.vertex_eigenvalue.powf(-1.0 / n) * p.norms[0]))
    }
}

/// Householder reflection taking the unit vector `v` to the last coordinate
/// vector (an involution).
pub(crate) fn reflect_to_last(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let mut e = DVector::zeros(n);
    e[n - 1] = 1.0;
    let w = v - &e;
    let ww = w.norm_squared();
    if ww < 1e-28 {
        return DMatrix::identity(n, n);
    }
    DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / ww)
}

/// Extract the block form of `g` at `v`. For `Radial` the precondition is
/// `g(v) = v` on the sphere (eigenvector with positive eigenvalue); for
/// `Affine`, that `g` preserves the hyperplane dual to `v` together with
/// its coorientation.
pub fn vertex_block_form(
    g: &ProjMap,
    v: &ProjPoint,
    kind: BlockKind,
    tol: &Tol,
) -> Result<VertexBlockForm> {
    let np1 = g.ambient();
    if v.ambient() != np1 {
        return Err(GeomError::DimensionMismatch {
            expected: np1,
            got: v.ambient(),
        });
    }
    let n = np1 - 1;
    let h = reflect_to_last(v.vec());
    let m = &h * g.matrix() * &h;
    let scale = m.norm();
    let residual = match kind {
        BlockKind::Radial => m.view((0, n), (n, 1)).norm(),
        BlockKind::Affine => m.view((n, 0), (1, n)).norm(),
    } / scale;
    if residual > tol.mat {
        return Err(GeomError::NotFixed { residual });
    }
    let lam = m[(n, n)];
    if lam <= tol.norm * scale {
        // Negative λ maps v to −v: not fixed on the sphere (and λ ≈ 0 is
        // impossible for an invertible block matrix).
        return Err(GeomError::NotFixed {
            residual: (g.apply(v).vec() - v.vec()).norm(),
        });
    }
    let a = m.view((0, 0), (n, n)).into_owned();
    let det_a = a.determinant();
    if det_a.abs() < 1e-300 {
        return Err(GeomError::SingularMatrix { det: det_a });
    }
    let linear_part = &a / det_a.abs().powf(1.0 / n as f64);
    let translation = match kind {
        BlockKind::Radial => DVector::from_fn(n, |i, _| m[(n, i)]),
        BlockKind::Affine => DVector::from_fn(n, |i, _| m[(i, n)]),
    };
    Ok(VertexBlockForm {
        linear_part,
        translation,
        vertex_eigenvalue: lam,
    })
}

// ---------------------------------------------------------------------------
// Word balls
// ---------------------------------------------------------------------------

/// One enumerated element of a word ball.
#[derive(Debug, Clone)]
pub struct SampledElement {
    pub map: ProjMap,
    /// BFS depth of first visit = minimum reduced word length over the
    /// listed generators.
    pub word_length: usize,
    /// Reduced word, letters `a, b, …` for generators and `A, B, …` for
    /// their inverses; `"1"` for the identity.
    pub word: String,
}

/// Deduplication index: buckets on the quantized log-Frobenius norm of the
/// sign-normalized matrix, with a ±1-bucket probe (unimodular matrices have
/// Frobenius norm ≥ 1, so log quantization is scale-free).
#[derive(Debug, Clone, Default)]
struct DedupIndex {
    buckets: BTreeMap<i64, Vec<usize>>,
    forms: Vec<DMatrix<f64>>,
}

const DEDUP_QUANTUM: f64 = 1e-6;

impl DedupIndex {
    fn key(form: &DMatrix<f64>) -> i64 {
        (form.norm().ln() / DEDUP_QUANTUM).round() as i64
    }

    fn find(&self, form: &DMatrix<f64>, tol: &Tol) -> Option<usize> {
        let k = Self::key(form);
        let cut = tol.dedup * form.norm().max(1.0);
        for kk in (k - 1)..=(k + 1) {
            if let Some(ids) = self.buckets.get(&kk) {
                for &id in ids {
                    if (&self.forms[id] - form).norm() < cut {
                        return Some(id);
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, id: usize, form: DMatrix<f64>) {
        self.buckets.entry(Self::key(&form)).or_default().push(id);
        debug_assert_eq!(self.forms.len(), id);
        self.forms.push(form);
    }
}

/// A finite word ball of a matrix group: the computational stand-in for an
/// end holonomy group.
#[derive(Debug, Clone)]
pub struct GroupSample {
    pub generators: Vec<ProjMap>,
    pub ball: Vec<SampledElement>,
    pub radius: usize,
    index: DedupIndex,
}

fn letter_label(i: usize, inverse: bool) -> String {
    if i < 26 {
        let c = (b'a' + i as u8) as char;
        if inverse {
            c.to_ascii_uppercase().to_string()
        } else {
            c.to_string()
        }
    } else if inverse {
        format!("G{i}")
    } else {
        format!("g{i}")
    }
}

/// BFS over reduced words up to `radius`, merging elements whose
/// sign-normalized matrices are within the dedup tolerance (relative to the
/// matrix norm, which grows along the ball).
pub fn word_ball(gens: &[ProjMap], radius: usize, tol: &Tol) -> Result<GroupSample> {
    if gens.is_empty() {
        return Err(GeomError::EmptySample);
    }
    if radius < 1 {
        return Err(GeomError::Schema("ball radius must be ≥ 1".into()));
    }
    let np1 = gens[0].ambient();
    for g in gens {
        if g.ambient() != np1 {
            return Err(GeomError::DimensionMismatch {
                expected: np1,
                got: g.ambient(),
            });
        }
    }
    // Letters: generator i at slot 2i, its inverse at 2i+1.
    let mut letters: Vec<(ProjMap, String)> = Vec::with_capacity(2 * gens.len());
    for (i, g) in gens.iter().enumerate() {
        letters.push((g.clone(), letter_label(i, false)));
        letters.push((g.inverse()?, letter_label(i, true)));
    }
    let inv_letter = |l: usize| l ^ 1;

    let mut ball = vec![SampledElement {
        map: ProjMap::identity(np1),
        word_length: 0,
        word: "1".to_string(),
    }];
    let mut last_letter: Vec<usize> = vec![usize::MAX];
    let mut index = DedupIndex::default();
    index.insert(0, ball[0].map.sign_normalized());

    let mut lo = 0;
    for depth in 1..=radius {
        let hi = ball.len();
        for e in lo..hi {
            for (l, (lg, label)) in letters.iter().enumerate() {
                if last_letter[e] != usize::MAX && inv_letter(last_letter[e]) == l {
                    continue;
                }
                let m = ball[e].map.compose(lg);
                let form = m.sign_normalized();
                if index.find(&form, tol).is_some() {
                    continue;
                }
                if ball.len() >= tol.ball_cap {
                    return Err(GeomError::BallExplosion { cap: tol.ball_cap });
                }
                let word = if ball[e].word_length == 0 {
                    label.clone()
                } else {
                    format!("{}{}", ball[e].word, label)
                };
                index.insert(ball.len(), form);
                ball.push(SampledElement {
                    map: m,
                    word_length: depth,
                    word,
                });
                last_letter.push(l);
            }
        }
        lo = hi;
    }
    Ok(GroupSample {
        generators: gens.to_vec(),
        ball,
        radius,
        index,
    })
}

impl GroupSample {
    pub fn len(&self) -> usize {
        self.ball.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ball.is_empty()
    }

    pub fn ambient(&self) -> usize {
        self.generators[0].ambient()
    }

    /// Index of the ball element matching `g` under the dedup metric.
    pub fn find(&self, g: &ProjMap, tol: &Tol) -> Option<usize> {
        self.index.find(&g.sign_normalized(), tol)
    }

    /// Ball elements other than the identity, with their indices.
    pub fn nonidentity(&self) -> impl Iterator<Item = (usize, &SampledElement)> {
        self.ball
            .iter()
            .enumerate()
            .filter(|(_, e)| e.word_length > 0)
    }

    fn rebuilt(&self, f: impl Fn(&ProjMap) -> Result<ProjMap>) -> Result<GroupSample> {
        let generators = self
            .generators
            .iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()?;
        let mut ball = Vec::with_capacity(self.ball.len());
        let mut index = DedupIndex::default();
        for (i, e) in self.ball.iter().enumerate() {
            let map = f(&e.map)?;
            index.insert(i, map.sign_normalized());
            ball.push(SampledElement {
                map,
                word_length: e.word_length,
                word: e.word.clone(),
            });
        }
        Ok(GroupSample {
            generators,
            ball,
            radius: self.radius,
            index,
        })
    }

    /// The sample of dual maps (inverse transposes), preserving words.
    pub fn dualized(&self) -> Result<GroupSample> {
        self.rebuilt(|g| g.dual_map())
    }

    /// The sample conjugated elementwise by `h`.
    pub fn conjugated(&self, h: &ProjMap) -> Result<GroupSample> {
        let hinv = h.inverse()?;
        self.rebuilt(|g| Ok(h.compose(g).compose(&hinv)))
    }
}

/// Upper bound for the conjugate word length of `g`: the minimum ball word
/// length among ball conjugates `c·g·c⁻¹`. An estimate — conjugators
/// outside the ball may do better.
pub fn cwl_estimate(sample: &GroupSample, g: &ProjMap, tol: &Tol) -> Result<usize> {
    let gi = sample.find(g, tol).ok_or(GeomError::NotInBall)?;
    let mut best = sample.ball[gi].word_length;
    let gm = sample.ball[gi].map.clone();
    for c in &sample.ball {
        if best == 0 {
            break;
        }
        let conj = c.map.compose(&gm).compose(&c.map.inverse()?);
        if let Some(j) = sample.find(&conj, tol) {
            best = best.min(sample.ball[j].word_length);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Middle eigenvalue conditions
// ---------------------------------------------------------------------------

/// Which end geometry the vertex datum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndKind {
    /// Radial end: the sample fixes the vertex.
    R,
    /// Totally geodesic end: the sample preserves the hyperplane dual to
    /// the given point; the test runs on the dual maps at that point.
    T,
}

/// A hard violation of the middle eigenvalue inequality: the vertex
/// eigenvalue ties or beats every other norm, so no constant C works.
#[derive(Debug, Clone, Serialize)]
pub struct UmecViolation {
    pub word: String,
    /// log(λ̄/λ_v) ≤ 0.
    pub ratio_log: f64,
    pub leng_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UmecReport {
    pub pass: bool,
    /// Smallest admissible C over the tested ball: max(sup r, sup 1/r) for
    /// r(g) = log(λ̄/λ_v)/leng_K(g). `None` when vacuous or failed.
    pub best_c: Option<f64>,
    pub violations: Vec<UmecViolation>,
    pub ball_radius: usize,
    /// Nonidentity elements whose ratio was measured.
    pub tested: usize,
    /// Elements skipped as near-elliptic (leng_K below the gap tolerance).
    pub skipped: usize,
    pub caveats: Vec<String>,
}

/// Verify the uniform middle eigenvalue condition on the sampled ball at
/// vertex `v`: every nonidentity element must satisfy
/// `C⁻¹·leng_K(g) ≤ log(λ̄(g)/λ_v(g)) ≤ C·leng_K(g)` for one constant C.
/// `λ̄` is the largest eigenvalue norm of the full matrix, `leng_K` the
/// spectral spread of the linear block at the vertex. The T-end variant
/// applies the radial test to the dual maps at the dual point.
pub fn check_umec(
    sample: &GroupSample,
    v: &ProjPoint,
    kind: EndKind,
    tol: &Tol,
) -> Result<UmecReport> {
    let mut report = UmecReport {
        pass: true,
        best_c: None,
        violations: Vec::new(),
        ball_radius: sample.radius,
        tested: 0,
        skipped: 0,
        caveats: Vec::new(),
    };
    let mut sup_r = f64::NEG_INFINITY;
    let mut inf_r = f64::INFINITY;
    for (_, e) in sample.nonidentity() {
        let g = match kind {
            EndKind::R => e.map.clone(),
            EndKind::T => e.map.dual_map()?,
        };
        let bf = vertex_block_form(&g, v, BlockKind::Radial, tol)?;
        let lp = bf.linear_profile(tol)?;
        let leng_k = lp.log_spread();
        if leng_k <= tol.gap {
            report.skipped += 1;
            continue;
        }
        let num = (bf.full_top_norm(tol)? / bf.vertex_eigenvalue).ln();
        report.tested += 1;
        // Exact ties λ̄ = λ_v land at ±ulp; any honest pass has
        // num ≥ leng_K/C ≫ τ_eig since leng_K > τ_gap was enforced.
        if num <= tol.eig {
            report.violations.push(UmecViolation {
                word: e.word.clone(),
                ratio_log: num,
                leng_k,
            });
        } else {
            let r = num / leng_k;
            sup_r = sup_r.max(r);
            inf_r = inf_r.min(r);
        }
    }
    report.pass = report.violations.is_empty();
    if report.tested == 0 {
        report
            .caveats
            .push("no usable nonidentity elements: vacuous pass".into());
    } else if report.pass {
        report.best_c = Some(sup_r.max(1.0 / inf_r));
    }
    if report.skipped > 0 {
        report.caveats.push(format!(
            "{} near-elliptic element(s) skipped",
            report.skipped
        ));
    }
    report
        .caveats
        .push(format!("certified up to word-ball radius {}", sample.radius));
    Ok(report)
}

/// Report of the weak variant: the vertex eigenvalue may attain the top
/// norm, but then with multiplicity ≥ 2; and every hyperbolic join factor
/// must satisfy the uniform condition on its own spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct WeakUmecReport {
    pub pass: bool,
    pub multiplicity_pass: bool,
    /// Words of elements whose top norm is the simple vertex eigenvalue.
    pub multiplicity_failures: Vec<String>,
    pub factor_count: usize,
    /// Per-hyperbolic-factor uniform-condition reports.
    pub factor_reports: Vec<UmecReport>,
    pub caveats: Vec<String>,
}

pub fn check_weak_umec(sample: &GroupSample, v: &ProjPoint, tol: &Tol) -> Result<WeakUmecReport> {
    let np1 = sample.ambient();
    let n = np1 - 1;
    let mut report = WeakUmecReport {
        pass: true,
        multiplicity_pass: true,
        multiplicity_failures: Vec::new(),
        factor_count: 1,
        factor_reports: Vec::new(),
        caveats: Vec::new(),
    };

    // Clause (a): whenever λ_v attains the top norm of the full spectrum,
    // require multiplicity ≥ 2 of that norm.
    let mut blocks: Vec<(usize, VertexBlockForm)> = Vec::new();
    for (i, e) in sample.nonidentity() {
        let bf = vertex_block_form(&e.map, v, BlockKind::Radial, tol)?;
        let lp = bf.linear_profile(tol)?;
        let scale = bf.vertex_eigenvalue.powf(-1.0 / n as f64);
        let log_v = bf.vertex_eigenvalue.ln();
        let full_top = bf.full_top_norm(tol)?.ln();
        if log_v >= full_top - tol.gap {
            // λ_v is (within clustering) the largest norm; count the
            // cluster in the full spectrum.
            let mult = 1 + lp
                .norms
                .iter()
                .filter(|&&x| (scale * x).ln() >= log_v - tol.gap)
                .count();
            if mult < 2 {
                report.multiplicity_pass = false;
                report.multiplicity_failures.push(e.word.clone());
            }
        }
        blocks.push((i, bf));
    }

    // Clause (b): the uniform condition on each hyperbolic factor of the
    // linear part, over the elements acting by scalars on all other factors.
    let split = factor_decomposition(sample, v, tol)?;
    report.factor_count = split.factors.len();
    if !split.consistent {
        report
            .caveats
            .push(format!("factor splitting not consistent: {}", split.note));
    }
    for (fi, basis) in split.linear_bases.iter().enumerate() {
        if basis.ncols() < 2 {
            continue; // singleton factors carry no hyperbolic action
        }
        let mut fr = UmecReport {
            pass: true,
            best_c: None,
            violations: Vec::new(),
            ball_radius: sample.radius,
            tested: 0,
            skipped: 0,
            caveats: vec![format!("factor {fi}, dimension {}", basis.ncols())],
        };
        let mut sup_r = f64::NEG_INFINITY;
        let mut inf_r = f64::INFINITY;
        let mut hyperbolic = false;
        for (i, bf) in &blocks {
            // Restrict to this factor; require scalar action elsewhere.
            let mut supported_here = true;
            for (fj, other) in split.linear_bases.iter().enumerate() {
                if fj == fi {
                    continue;
                }
                let mj = other.transpose() * &bf.linear_part * other;
                let d = other.ncols() as f64;
                let s = mj.trace() / d;
                let dev = (&mj - DMatrix::identity(other.ncols(), other.ncols()) * s).norm();
                if dev > tol.mat * bf.linear_part.norm().max(1.0) {
                    supported_here = false;
                    break;
                }
            }
            if !supported_here {
                continue;
            }
            let mi = basis.transpose() * &bf.linear_part * basis;
            let pi = eigen_profile_of(&mi, tol)?;
            let leng_i = pi.log_spread();
            if leng_i <= tol.gap {
                fr.skipped += 1;
                continue;
            }
            hyperbolic = true;
            let num = (bf.full_top_norm(tol)? / bf.vertex_eigenvalue).ln();
            fr.tested += 1;
            if num <= tol.eig {
                fr.violations.push(UmecViolation {
                    word: sample.ball[*i].word.clone(),
                    ratio_log: num,
                    leng_k: leng_i,
                });
            } else {
                let r = num / leng_i;
                sup_r = sup_r.max(r);
                inf_r = inf_r.min(r);
            }
        }
        if !hyperbolic {
            continue; // no hyperbolic action on this factor
        }
        fr.pass = fr.violations.is_empty();
        if fr.pass && fr.tested > 0 {
            fr.best_c = Some(sup_r.max(1.0 / inf_r));
        }
        report.factor_reports.push(fr);
    }

    report.pass =
        report.multiplicity_pass && report.factor_reports.iter().all(|r| r.pass);
    report
        .caveats
        .push(format!("certified up to word-ball radius {}", sample.radius));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Factor decomposition
// ---------------------------------------------------------------------------

/// A splitting of the linear part at a fixed vertex into subspaces
/// preserved by the whole sample, detected from commuting (virtual center)
/// candidates. `factors` are ambient subspaces through the canonical
/// orthogonal complement frame of the vertex; `linear_bases` are the same
/// subspaces in the conjugated linear coordinates.
#[derive(Debug, Clone)]
pub struct FactorSplit {
    pub vertex: ProjPoint,
    pub factors: Vec<Subspace>,
    pub linear_bases: Vec<DMatrix<f64>>,
    /// Words of the detected central elements.
    pub center_words: Vec<String>,
    /// False when the verification failed and the trivial splitting was
    /// returned instead.
    pub consistent: bool,
    pub note: String,
}

impl FactorSplit {
    pub fn l0(&self) -> usize {
        self.factors.len()
    }
}

fn trivial_split(sample: &GroupSample, v: &ProjPoint, note: &str, consistent: bool) -> FactorSplit {
    let np1 = sample.ambient();
    let n = np1 - 1;
    let h = reflect_to_last(v.vec());
    let full = DMatrix::identity(n, n);
    let ambient = lift_linear_subspace(&h, &full);
    FactorSplit {
        vertex: v.clone(),
        factors: vec![ambient],
        linear_bases: vec![full],
        center_words: Vec::new(),
        consistent,
        note: note.to_string(),
    }
}

/// Lift an orthonormal basis of a subspace of the linear coordinates back
/// through the vertex reflection into the ambient space.
fn lift_linear_subspace(h: &DMatrix<f64>, basis: &DMatrix<f64>) -> Subspace {
    let np1 = h.nrows();
    let n = np1 - 1;
    let mut lifted = DMatrix::zeros(np1, basis.ncols());
    for c in 0..basis.ncols() {
        let mut ext = DVector::zeros(np1);
        for r in 0..n {
            ext[r] = basis[(r, c)];
        }
        lifted.set_column(c, &(h * ext));
    }
    Subspace::from_basis(lifted)
}

/// Kernel basis of `m` (vectors with `m·x ≈ 0`), via the symmetric
/// eigendecomposition of `mᵀm`; `rel` is the relative singular value cutoff.
pub(crate) fn kernel_basis(m: &DMatrix<f64>, rel: f64) -> Vec<DVector<f64>> {
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cut = (rel * rel * lmax).max(1e-300);
    let mut out = Vec::new();
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i].max(0.0) <= cut {
            out.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    out
}

/// Orthonormal basis of the intersection of two subspaces given by
/// orthonormal bases, via the spectrum of the composed projector.
fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tol) -> DMatrix<f64> {
    let n = a.nrows();
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    let m = &pa * &pb * &pa;
    let eig = m.symmetric_eigen();
    let mut cols = Vec::new();
    for i in 0..n {
        if eig.eigenvalues[i] > 1.0 - tol.col.sqrt() {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Detect a sample-preserved splitting of the linear part at `v` from
/// commuting center candidates: simultaneously decompose along their real
/// eigenvalue clusters and verify every sample element preserves each
/// factor. A failed verification is reported (`consistent = false`) with
/// the trivial splitting, not as an error.
pub fn factor_decomposition(sample: &GroupSample, v: &ProjPoint, tol: &Tol) -> Result<FactorSplit> {
    let np1 = sample.ambient();
    let n = np1 - 1;
    let h = reflect_to_last(v.vec());

    let mut linears: Vec<(usize, DMatrix<f64>)> = Vec::new();
    for (i, e) in sample.nonidentity() {
        let bf = vertex_block_form(&e.map, v, BlockKind::Radial, tol)?;
        linears.push((i, bf.linear_part));
    }
    if linears.is_empty() {
        return Ok(trivial_split(sample, v, "no nonidentity elements", true));
    }

    // Center candidates: nonscalar linear parts commuting with everything.
    let mut centers: Vec<(usize, &DMatrix<f64>)> = Vec::new();
    for (i, li) in &linears {
        let scalar_dev =
            (li - DMatrix::identity(n, n) * (li.trace() / n as f64)).norm();
        if scalar_dev <= tol.mat * li.norm().max(1.0) {
            continue;
        }
        let commutes = linears.iter().all(|(_, lg)| {
            let comm = li * lg - lg * li;
            comm.norm() <= tol.mat * li.norm().max(1.0) * lg.norm().max(1.0) * 10.0
        });
        if commutes {
            centers.push((*i, li));
        }
    }
    if centers.is_empty() {
        return Ok(trivial_split(sample, v, "no nonscalar central elements", true));
    }

    // Refine the trivial partition along real eigenvalue clusters of each
    // center candidate.
    let mut parts: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for (_, c) in &centers {
        let spec = complex_spectrum(c)?;
        // Cluster real eigenvalues by value.
        let mut reals: Vec<f64> = spec
            .iter()
            .filter(|z| z.im.abs() < tol.eig * (1.0 + z.norm()))
            .map(|z| z.re)
            .collect();
        if reals.len() < spec.len() {
            continue; // complex blocks: skip this candidate
        }
        reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut cluster_reps: Vec<f64> = Vec::new();
        let scale = reals.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for &x in &reals {
            if cluster_reps
                .last()
                .map(|&r| (x - r).abs() > tol.gap * scale)
                .unwrap_or(true)
            {
                cluster_reps.push(x);
            }
        }
        if cluster_reps.len() < 2 {
            continue;
        }
        let mut next = Vec::new();
        for part in &parts {
            let mut covered = 0;
            let mut pieces = Vec::new();
            for &lam in &cluster_reps {
                let shifted = *c - DMatrix::identity(n, n) * lam;
                let kern = kernel_basis(&shifted, tol.col * 10.0);
                if kern.is_empty() {
                    continue;
                }
                let kb = DMatrix::from_columns(&kern);
                let sect = intersect_subspaces(part, &kb, tol);
                if sect.ncols() > 0 {
                    covered += sect.ncols();
                    pieces.push(sect);
                }
            }
            if covered == part.ncols() {
                next.extend(pieces);
            } else {
                // Eigenspaces do not exhaust this part (defective or
                // ill-separated); keep it whole.
                next.push(part.clone());
            }
        }
        parts = next;
    }

    if parts.len() == 1 {
        return Ok(trivial_split(
            sample,
            v,
            "center eigenvalue patterns give no refinement",
            true,
        ));
    }

    // Verify every sample element preserves every factor.
    for (_, lg) in &linears {
        for part in &parts {
            let img = lg * part;
            let proj = part * (part.transpose() * &img);
            if (&img - proj).norm() > tol.mat * lg.norm().max(1.0) * 10.0 {
                return Ok(trivial_split(
                    sample,
                    v,
                    "a sample element does not preserve the candidate splitting",
                    false,
                ));
            }
        }
    }

    let factors = parts
        .iter()
        .map(|p| lift_linear_subspace(&h, p))
        .collect();
    let center_words = centers
        .iter()
        .map(|(i, _)| sample.ball[*i].word.clone())
        .collect();
    Ok(FactorSplit {
        vertex: v.clone(),
        factors,
        linear_bases: parts,
        center_words,
        consistent: true,
        note: String::new(),
    })
}
