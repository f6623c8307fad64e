//! Searching for invariant line fields and conformal structures.
//!
//! Candidates are trigonometric polynomials of degree `≤ D` on `T²`. A line
//! field is an angle function `Φ`; a conformal structure is a field
//! `z = X + i·exp(L)` in the upper half-plane, where `z` stands for the unit
//! determinant inner product
//!
//! ```text
//! Q_z = (1/Y) [[1, X], [X, X² + Y²]].
//! ```
//!
//! The defect of a candidate is
//!
//! ```text
//! (1/m) Σ_points Σ_atoms weight · d(push_{D_p f}(s(p)), s(f p))²
//! ```
//!
//! with `d` the projective distance for lines and the hyperbolic distance
//! for conformal structures. It is minimized by multi-start descent with
//! Armijo backtracking. Degree `D` is warm-started from the best degree
//! `D − 1` candidate, so the reported defect never increases with `D`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::seed::{derive_seed, rng_from_seed};
use crate::torus::{line_angle, projective_difference, Jacobian2, TorusPoint};

/// Defects below this count as zero.
pub const ZERO_DEFECT: f64 = 1e-10;
pub const DEFAULT_STARTS: usize = 32;
pub const DEFAULT_TEST_POINTS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    LineField,
    Conformal,
}

impl StructureKind {
    pub fn name(self) -> &'static str {
        match self {
            StructureKind::LineField => "line_field",
            StructureKind::Conformal => "conformal",
        }
    }

    /// Real fields per candidate.
    fn components(self) -> usize {
        match self {
            StructureKind::LineField => 1,
            StructureKind::Conformal => 2,
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line_field" => Ok(StructureKind::LineField),
            "conformal" => Ok(StructureKind::Conformal),
            _ => Err(Error::range(
                "kind",
                format!("expected line_field or conformal, got `{s}`"),
            )),
        }
    }
}

/// Real trigonometric polynomials of degree `≤ D` on `T²`: the constant,
/// then `cos` and `sin` of `2π(m x + k y)` for each `(m, k)` in a half plane
/// with `|m|, |k| ≤ D`. There are `(2D + 1)²` functions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigBasis {
    degree: usize,
    freqs: Vec<(i64, i64)>,
}

impl TrigBasis {
    pub fn new(degree: usize) -> Self {
        let d = degree as i64;
        let mut freqs = Vec::new();
        for m in 0..=d {
            for k in -d..=d {
                if m > 0 || k > 0 {
                    freqs.push((m, k));
                }
            }
        }
        Self { degree, freqs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes all basis values at `p` into `out`.
    pub fn eval_into(&self, p: TorusPoint, out: &mut Vec<f64>) {
        out.push(1.0);
        for &(m, k) in &self.freqs {
            let (s, c) = (TAU * (m as f64 * p.x() + k as f64 * p.y())).sin_cos();
            out.push(c);
            out.push(s);
        }
    }

    /// Index of each basis function of `self` inside `larger`.
    fn embedding(&self, larger: &TrigBasis) -> Vec<usize> {
        let pos: HashMap<(i64, i64), usize> = larger.freqs.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let mut idx = vec![0];
        for f in &self.freqs {
            let j = pos[f];
            idx.push(1 + 2 * j);
            idx.push(2 + 2 * j);
        }
        idx
    }
}

/// One summand of the defect: a test point pushed by one atom.
#[derive(Clone, Copy, Debug)]
struct Term {
    point: usize,
    weight: f64,
    jac: Jacobian2,
}

/// The defect as a function of candidate coefficients, for a fixed
/// measure, degree and set of test points.
///
/// Coefficients are laid out one block of `basis.len()` per field
/// component: `Φ` for line fields, `(X, L)` for conformal structures.
#[derive(Clone, Debug)]
pub struct DefectProblem {
    kind: StructureKind,
    basis: TrigBasis,
    points: Vec<TorusPoint>,
    at_points: Vec<f64>,
    at_images: Vec<f64>,
    terms: Vec<Term>,
}

impl DefectProblem {
    pub fn new(measure: &AtomicMeasure, kind: StructureKind, degree: usize, points: Vec<TorusPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::range("test_points", "must be at least 1"));
        }
        let basis = TrigBasis::new(degree);
        let mut at_points = Vec::with_capacity(points.len() * basis.len());
        for &p in &points {
            basis.eval_into(p, &mut at_points);
        }
        let mut at_images = Vec::with_capacity(points.len() * measure.len() * basis.len());
        let mut terms = Vec::with_capacity(points.len() * measure.len());
        for (i, &p) in points.iter().enumerate() {
            for atom in measure.atoms() {
                let (q, jac) = atom.word.apply_with_derivative(p)?;
                basis.eval_into(q, &mut at_images);
                terms.push(Term {
                    point: i,
                    weight: atom.weight,
                    jac,
                });
            }
        }
        Ok(Self {
            kind,
            basis,
            points,
            at_points,
            at_images,
            terms,
        })
    }

    /// `m` test points drawn uniformly with `seed`.
    pub fn random_points(m: usize, seed: u64) -> Vec<TorusPoint> {
        let mut rng = rng_from_seed(seed);
        (0..m).map(|_| TorusPoint::new(rng.random(), rng.random())).collect()
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn basis(&self) -> &TrigBasis {
        &self.basis
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn dimension(&self) -> usize {
        self.kind.components() * self.basis.len()
    }

    fn row(table: &[f64], i: usize, n: usize) -> &[f64] {
        &table[i * n..(i + 1) * n]
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Field components at every test point and every image point.
    fn fields(&self, coeffs: &[f64]) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let n = self.basis.len();
        let blocks: Vec<&[f64]> = coeffs.chunks(n).collect();
        let field = |table: &[f64], i: usize| {
            let r = Self::row(table, i, n);
            let mut out = [0.0; 2];
            for (o, b) in out.iter_mut().zip(&blocks) {
                *o = Self::dot(r, b);
            }
            out
        };
        let at_p = (0..self.points.len()).map(|i| field(&self.at_points, i)).collect();
        let at_q = (0..self.terms.len()).map(|t| field(&self.at_images, t)).collect();
        (at_p, at_q)
    }

    /// Defect of the candidate with these coefficients.
    pub fn evaluate(&self, coeffs: &[f64]) -> f64 {
        assert_eq!(coeffs.len(), self.dimension(), "coefficient count");
        let (at_p, at_q) = self.fields(coeffs);
        let mut total = 0.0;
        for (t, term) in self.terms.iter().enumerate() {
            total += term.weight * residual_sq(self.kind, &term.jac, at_p[term.point], at_q[t]);
        }
        total / self.points.len() as f64
    }

    /// Defect and its gradient.
    pub fn gradient(&self, coeffs: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(coeffs.len(), self.dimension(), "coefficient count");
        let n = self.basis.len();
        let (at_p, at_q) = self.fields(coeffs);
        let mut total = 0.0;
        let mut grad = vec![0.0; self.dimension()];
        for (t, term) in self.terms.iter().enumerate() {
            let (r2, dp, dq) = residual_sq_partials(self.kind, &term.jac, at_p[term.point], at_q[t]);
            total += term.weight * r2;
            let rp = Self::row(&self.at_points, term.point, n);
            let rq = Self::row(&self.at_images, t, n);
            for c in 0..self.kind.components() {
                let (gp, gq) = (term.weight * dp[c], term.weight * dq[c]);
                let block = &mut grad[c * n..(c + 1) * n];
                for ((g, bp), bq) in block.iter_mut().zip(rp).zip(rq) {
                    *g += gp * bp + gq * bq;
                }
            }
        }
        let m = self.points.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (total / m, grad)
    }

    /// Local descent from `start`; never returns a point worse than it.
    pub fn descend(&self, start: Vec<f64>, max_iter: usize) -> (f64, Vec<f64>) {
        let mut c = start;
        let (mut f, mut g) = self.gradient(&c);
        let mut step = 1.0;
        for _ in 0..max_iter {
            let g2 = Self::dot(&g, &g);
            if f <= ZERO_DEFECT * 1e-6 || g2 <= 1e-30 {
                break;
            }
            let mut trial = step;
            let accepted = loop {
                let cand: Vec<f64> = c.iter().zip(&g).map(|(ci, gi)| ci - trial * gi).collect();
                let fc = self.evaluate(&cand);
                if fc <= f - 1e-4 * trial * g2 {
                    break Some((cand, fc));
                }
                trial *= 0.5;
                if trial < 1e-16 {
                    break None;
                }
            };
            let Some((cand, fc)) = accepted else { break };
            let (_, gc) = self.gradient(&cand);
            // Barzilai–Borwein step for the next trial
            let mut sy = 0.0;
            let mut ss = 0.0;
            for i in 0..c.len() {
                let s = cand[i] - c[i];
                ss += s * s;
                sy += s * (gc[i] - g[i]);
            }
            step = if sy > 0.0 { (ss / sy).min(1e6) } else { 2.0 * trial };
            let improvement = f - fc;
            c = cand;
            g = gc;
            f = fc;
            if improvement <= 1e-15 * f {
                break;
            }
        }
        (f, c)
    }
}

/// Squared distance between `push_A(s_p)` and `s_q`.
fn residual_sq(kind: StructureKind, jac: &Jacobian2, sp: [f64; 2], sq: [f64; 2]) -> f64 {
    match kind {
        StructureKind::LineField => {
            let r = line_residual(jac, sp[0], sq[0]);
            r * r
        }
        StructureKind::Conformal => {
            let d = hyperbolic_distance(push_conformal(jac, sp[0], sp[1].exp()), (sq[0], sq[1].exp()));
            d * d
        }
    }
}

fn line_residual(jac: &Jacobian2, phi_p: f64, phi_q: f64) -> f64 {
    let (vx, vy) = jac.apply((phi_p.cos(), phi_p.sin()));
    projective_difference(line_angle(vx, vy), phi_q)
}

/// Squared residual and its partials in the components at `p` and at `f p`.
fn residual_sq_partials(kind: StructureKind, jac: &Jacobian2, sp: [f64; 2], sq: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
    match kind {
        StructureKind::LineField => {
            let (vx, vy) = jac.apply((sp[0].cos(), sp[0].sin()));
            let r = projective_difference(line_angle(vx, vy), sq[0]);
            // d(angle of Av)/dΦ = det A / ‖Av‖²
            let dpsi = jac.det() / (vx * vx + vy * vy);
            (r * r, [2.0 * r * dpsi, 0.0], [-2.0 * r, 0.0])
        }
        StructureKind::Conformal => {
            let f = |p: [f64; 2], q: [f64; 2]| residual_sq(kind, jac, p, q);
            let r2 = f(sp, sq);
            let h = 1e-6;
            let mut dp = [0.0; 2];
            let mut dq = [0.0; 2];
            for c in 0..2 {
                let (mut a, mut b) = (sp, sp);
                a[c] += h;
                b[c] -= h;
                dp[c] = (f(a, sq) - f(b, sq)) / (2.0 * h);
                let (mut a, mut b) = (sq, sq);
                a[c] += h;
                b[c] -= h;
                dq[c] = (f(sp, a) - f(sp, b)) / (2.0 * h);
            }
            (r2, dp, dq)
        }
    }
}

/// Pushes the structure `z = x + iy` forward by `A`: `Q ↦ A⁻ᵀ Q A⁻¹`.
pub fn push_conformal(a: &Jacobian2, x: f64, y: f64) -> (f64, f64) {
    let q = Jacobian2::new(1.0 / y, x / y, x / y, (x * x + y * y) / y);
    let inv = Jacobian2::new(a.d, -a.b, -a.c, a.a).scale(1.0 / a.det());
    let pushed = inv.transpose().mul(&q).mul(&inv);
    let (q11, q12) = (pushed.a, 0.5 * (pushed.b + pushed.c));
    let det = pushed.a * pushed.d - q12 * q12;
    (q12 / q11, det.sqrt() / q11)
}

/// Distance in the upper half-plane of curvature −1.
pub fn hyperbolic_distance(z1: (f64, f64), z2: (f64, f64)) -> f64 {
    let (dx, dy) = (z1.0 - z2.0, z1.1 - z2.1);
    let u = (dx * dx + dy * dy) / (2.0 * z1.1 * z2.1);
    // arccosh(1 + u) without cancellation near 0
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

/// Best candidate found at one degree.
#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub structure_kind: StructureKind,
    pub family_degree: usize,
    pub defect: f64,
    /// Coefficients of the best candidate, one block per field component.
    pub minimizer: Vec<f64>,
    /// `defect ≤ ZERO_DEFECT`.
    pub invariant_candidate: bool,
    pub test_points: usize,
    pub starts: usize,
    /// Start that produced the minimizer; 0 is the zero (or warm) start.
    pub best_start: usize,
    /// Best defect at each degree `0..=family_degree`.
    pub by_degree: Vec<f64>,
}

/// Options of [`invariant_structure_defect`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DefectSettings {
    pub test_points: usize,
    pub starts: usize,
    pub max_iter: usize,
}

impl Default for DefectSettings {
    fn default() -> Self {
        Self {
            test_points: DEFAULT_TEST_POINTS,
            starts: DEFAULT_STARTS,
            max_iter: 300,
        }
    }
}

fn random_start(problem: &DefectProblem, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let n = problem.basis.len();
    let mut c = vec![0.0; problem.dimension()];
    for comp in 0..problem.kind.components() {
        let block = &mut c[comp * n..(comp + 1) * n];
        block[0] = match problem.kind {
            StructureKind::LineField => rng.random_range(0.0..PI),
            StructureKind::Conformal => rng.random_range(-1.0..1.0),
        };
        for v in &mut block[1..] {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    c
}

/// Minimized defect over candidates of degree `≤ degree`.
pub fn invariant_structure_defect(
    measure: &AtomicMeasure,
    kind: StructureKind,
    degree: usize,
    settings: &DefectSettings,
    seed: u64,
) -> Result<DefectReport> {
    if settings.starts == 0 {
        return Err(Error::range("starts", "must be at least 1"));
    }
    let points = DefectProblem::random_points(settings.test_points, derive_seed(seed, 0));
    let mut warm: Option<(TrigBasis, Vec<f64>)> = None;
    let mut by_degree = Vec::with_capacity(degree + 1);
    let mut best = (f64::INFINITY, Vec::new(), 0);
    for d in 0..=degree {
        let problem = DefectProblem::new(measure, kind, d, points.clone())?;
        let first = match &warm {
            None => vec![0.0; problem.dimension()],
            Some((basis, coeffs)) => {
                let idx = basis.embedding(&problem.basis);
                let (n_old, n_new) = (basis.len(), problem.basis.len());
                let mut c = vec![0.0; problem.dimension()];
                for comp in 0..kind.components() {
                    for (i, &j) in idx.iter().enumerate() {
                        c[comp * n_new + j] = coeffs[comp * n_old + i];
                    }
                }
                c
            }
        };
        let degree_seed = derive_seed(seed, 1 + d as u64);
        let results: Vec<(f64, Vec<f64>)> = (0..settings.starts)
            .into_par_iter()
            .map(|s| {
                let start = if s == 0 {
                    first.clone()
                } else {
                    random_start(&problem, derive_seed(degree_seed, s as u64))
                };
                problem.descend(start, settings.max_iter)
            })
            .collect();
        // min by defect, ties to the lower start index
        let mut k = 0;
        for (s, r) in results.iter().enumerate() {
            if r.0 < results[k].0 {
                k = s;
            }
        }
        let (f, c) = results[k].clone();
        by_degree.push(f);
        best = (f, c.clone(), k);
        warm = Some((problem.basis.clone(), c));
    }
    let (defect, minimizer, best_start) = best;
    Ok(DefectReport {
        structure_kind: kind,
        family_degree: degree,
        defect,
        minimizer,
        invariant_candidate: defect <= ZERO_DEFECT,
        test_points: settings.test_points,
        starts: settings.starts,
        best_start,
        by_degree,
    })
}
