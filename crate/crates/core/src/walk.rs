//! Orbits of the random walk and what can be read off them: Weyl sums,
//! finite-orbit detection, and the two-step smoothing of a diffusion.

use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::seed::rng_from_seed;
use crate::torus::{circle_difference, Jacobian2, TorusPoint};
use crate::word::{AtomKind, MapWord};

/// Orbit of `x0` under independently drawn atoms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub x0: TorusPoint,
    pub seed: u64,
    /// `points[0] = x0`, `points[j + 1]` is the image of `points[j]` under
    /// the atom drawn at step `j`.
    pub points: Vec<TorusPoint>,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` points of the orbit of `x0` (including `x0`).
pub fn run_orbit(measure: &AtomicMeasure, x0: TorusPoint, n: usize, seed: u64) -> Result<OrbitTrace> {
    if n == 0 {
        return Err(Error::range("n", "must be at least 1"));
    }
    let atoms = measure.atoms();
    let sampler = measure.index_sampler();
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    let (mut x, mut y) = (x0.x(), x0.y());
    points.push(x0);
    for _ in 1..n {
        let i = sampler.sample(&mut rng);
        (x, y, _) = atoms[i].word.advance(x, y, Jacobian2::IDENTITY);
        points.push(TorusPoint::new(x, y));
    }
    Ok(OrbitTrace { x0, seed, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquidistributionVerdict {
    Equidistributing,
    Suspicious,
}

/// Acceptance band for Weyl averages of `n` points.
pub fn weyl_threshold(n: usize) -> f64 {
    5.0 / (n as f64).sqrt()
}

/// Weyl averages `|(1/n) Σ exp(2πi(m x_j + k y_j))|` over `|m|, |k| ≤ F`.
///
/// A coordinate that never moves along the trace makes every frequency
/// orthogonal to it equal 1 in modulus. Those frequencies are reported in
/// `max_weyl` but excluded from `max_weyl_effective` and from the verdict;
/// if both coordinates are frozen the verdict is `Suspicious`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquidistributionReport {
    pub n: usize,
    #[serde(rename = "F")]
    pub f: usize,
    pub max_weyl: f64,
    /// `(m, k)` attaining `max_weyl`.
    pub argmax: (i64, i64),
    pub max_weyl_effective: f64,
    pub threshold: f64,
    /// Coordinates constant along the whole trace.
    pub frozen_axes: Vec<&'static str>,
    pub verdict: EquidistributionVerdict,
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn axis_frozen(values: impl Iterator<Item = f64> + Clone) -> bool {
    let mut it = values.clone();
    let Some(first) = it.next() else { return true };
    it.all(|v| circle_difference(v, first).abs() <= 1e-12)
}

pub fn weyl_report(trace: &OrbitTrace, f: usize) -> Result<EquidistributionReport> {
    if f == 0 {
        return Err(Error::range("F", "must be at least 1"));
    }
    let n = trace.len();
    let fi = f as i64;
    // half plane; S(-m, -k) is the conjugate of S(m, k)
    let freqs: Vec<(i64, i64)> = (0..=fi)
        .flat_map(|m| (-fi..=fi).map(move |k| (m, k)))
        .filter(|&(m, k)| m > 0 || k > 0)
        .collect();
    let mut re = vec![CompensatedSum::default(); freqs.len()];
    let mut im = vec![CompensatedSum::default(); freqs.len()];
    let one = Complex64::new(1.0, 0.0);
    let mut xp = vec![one; f + 1];
    let mut yp = vec![one; 2 * f + 1];
    for p in &trace.points {
        let (ex, ey) = (Complex64::cis(TAU * p.x()), Complex64::cis(TAU * p.y()));
        for m in 1..=f {
            xp[m] = xp[m - 1] * ex;
        }
        for k in 1..=f {
            yp[f + k] = yp[f + k - 1] * ey;
            yp[f - k] = yp[f + k].conj();
        }
        for (i, &(m, k)) in freqs.iter().enumerate() {
            let z = xp[m as usize] * yp[(k + fi) as usize];
            re[i].add(z.re);
            im[i].add(z.im);
        }
    }

    let x_frozen = axis_frozen(trace.points.iter().map(|p| p.x()));
    let y_frozen = axis_frozen(trace.points.iter().map(|p| p.y()));
    let mut frozen_axes = Vec::new();
    if x_frozen {
        frozen_axes.push("x");
    }
    if y_frozen {
        frozen_axes.push("y");
    }
    let nf = n as f64;
    let (mut max_weyl, mut argmax, mut effective) = (0.0f64, freqs[0], 0.0f64);
    for (i, &(m, k)) in freqs.iter().enumerate() {
        let a = (re[i].value() / nf).hypot(im[i].value() / nf).min(1.0);
        if a > max_weyl {
            max_weyl = a;
            argmax = (m, k);
        }
        // a frozen x makes (m, 0) trivial; a frozen y makes (0, k) trivial
        let trivial = (x_frozen && k == 0) || (y_frozen && m == 0);
        if !trivial {
            effective = effective.max(a);
        }
    }
    let threshold = weyl_threshold(n);
    let verdict = if (x_frozen && y_frozen) || effective > threshold {
        EquidistributionVerdict::Suspicious
    } else {
        EquidistributionVerdict::Equidistributing
    };
    Ok(EquidistributionReport {
        n,
        f,
        max_weyl,
        argmax,
        max_weyl_effective: if x_frozen && y_frozen { max_weyl } else { effective },
        threshold,
        frozen_axes,
        verdict,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "size", rename_all = "snake_case")]
pub enum OrbitVerdict {
    FiniteCandidate(usize),
    Infinite,
}

pub const DEFAULT_ORBIT_TOL: f64 = 1e-9;

/// Distinct-point counter with wrap-aware tolerance.
struct DistinctPoints {
    tol: f64,
    cells: i64,
    buckets: HashMap<(i64, i64), Vec<TorusPoint>>,
    count: usize,
}

impl DistinctPoints {
    fn new(tol: f64) -> Self {
        let cells = (1.0 / tol).floor().clamp(1.0, 1e12) as i64;
        Self {
            tol,
            cells,
            buckets: HashMap::new(),
            count: 0,
        }
    }

    fn key(&self, p: &TorusPoint) -> (i64, i64) {
        let c = self.cells as f64;
        (
            ((p.x() * c) as i64).min(self.cells - 1),
            ((p.y() * c) as i64).min(self.cells - 1),
        )
    }

    fn insert(&mut self, p: TorusPoint) {
        let (kx, ky) = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let k = ((kx + dx).rem_euclid(self.cells), (ky + dy).rem_euclid(self.cells));
                if let Some(b) = self.buckets.get(&k) {
                    if b.iter().any(|q| q.distance(&p) <= self.tol) {
                        return;
                    }
                }
            }
        }
        self.buckets.entry((kx, ky)).or_default().push(p);
        self.count += 1;
    }
}

/// `FiniteCandidate(s)` when the number `s` of distinct points stops growing
/// over the second half of the trace.
pub fn finite_orbit_detect(trace: &OrbitTrace, tol: f64) -> Result<OrbitVerdict> {
    if trace.len() < 10 {
        return Err(Error::range("n", "finite-orbit detection needs at least 10 points"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::range("tol", "must be positive"));
    }
    let mut seen = DistinctPoints::new(tol);
    let half = trace.len() / 2;
    for p in &trace.points[..half] {
        seen.insert(*p);
    }
    let at_half = seen.count;
    for p in &trace.points[half..] {
        seen.insert(*p);
    }
    Ok(if seen.count == at_half {
        OrbitVerdict::FiniteCandidate(seen.count)
    } else {
        OrbitVerdict::Infinite
    })
}

/// Two-step smoothing of a discretized diffusion started at `v`.
///
/// The continuous diffusion spreads mass `p₁p₂` absolutely continuously
/// over a square of side `2ε` around `f₀(f₀(v))` after two steps. With
/// quadrature nodes the law stays atomic, so smoothing counts as visible
/// when the translation branch (a `G1` atom, then a `G2` atom) occupies at
/// least `n_quad²` grid cells and carries its expected mass.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub start: TorusPoint,
    pub center: TorusPoint,
    pub eps: f64,
    pub n_quad: usize,
    pub g: usize,
    pub samples: usize,
    /// Minimum of `count · g² / samples` over cells whose centre lies in the
    /// square `center ± ε`.
    pub min_cell_density: f64,
    pub cells_in_square: usize,
    /// Distinct cells hit by the `n_quad²` translation-branch points.
    pub translation_cells: usize,
    /// Sampled mass of the translation branch, expected `p₁p₂`.
    pub translation_mass: f64,
    pub expected_translation_mass: f64,
    pub occupied_cells: usize,
    pub visible: bool,
    /// Sample counts, row `iy`, column `ix`.
    #[serde(skip)]
    pub histogram: Vec<Vec<u64>>,
}

/// Relative shortfall of the translation-branch mass still accepted.
pub const SMOOTHING_SLACK: f64 = 0.1;

fn family_of(word: &MapWord, f0: &MapWord) -> Option<AtomKind> {
    let (atoms, base) = (word.atoms(), f0.atoms());
    if atoms.len() == base.len() + 1 && atoms[..base.len()] == *base {
        Some(atoms[base.len()].kind)
    } else {
        None
    }
}

fn cell_of(p: TorusPoint, g: usize) -> (usize, usize) {
    let gf = g as f64;
    (((p.x() * gf) as usize).min(g - 1), ((p.y() * gf) as usize).min(g - 1))
}

pub fn smoothing_check(
    measure: &AtomicMeasure,
    v: TorusPoint,
    samples: usize,
    g: usize,
    seed: u64,
) -> Result<SmoothingReport> {
    let params = measure
        .diffusion()
        .ok_or_else(|| Error::BadMeasure("smoothing check needs a measure built by make_diffusion".into()))?;
    if params.p[1] == 0.0 || params.p[2] == 0.0 {
        return Err(Error::BadMeasure(
            "smoothing check needs both translation families (p1 > 0 and p2 > 0)".into(),
        ));
    }
    if g == 0 || samples == 0 {
        return Err(Error::range(if g == 0 { "g" } else { "samples" }, "must be at least 1"));
    }
    let f0 = &params.f0;
    let atoms = measure.atoms();
    let families: Vec<Option<AtomKind>> = atoms.iter().map(|a| family_of(&a.word, f0)).collect();

    let center = f0.apply(f0.apply(v)?)?;
    let nodes = params.nodes();
    let mut branch_cells = HashSet::new();
    for &t in &nodes {
        for &s in &nodes {
            let p = f0.apply(v)?.translate(t, 0.0);
            let q = f0.apply(p)?.translate(0.0, s);
            branch_cells.insert(cell_of(q, g));
        }
    }

    let sampler = measure.index_sampler();
    let mut rng = rng_from_seed(seed);
    let mut histogram = vec![vec![0u64; g]; g];
    let mut branch_hits = 0u64;
    for _ in 0..samples {
        let i1 = sampler.sample(&mut rng);
        let i2 = sampler.sample(&mut rng);
        let p = atoms[i2].word.apply(atoms[i1].word.apply(v)?)?;
        let (ix, iy) = cell_of(p, g);
        histogram[iy][ix] += 1;
        if families[i1] == Some(AtomKind::G1) && families[i2] == Some(AtomKind::G2) {
            branch_hits += 1;
        }
    }

    let gf = g as f64;
    let mut min_density = f64::INFINITY;
    let mut cells_in_square = 0;
    let mut occupied = 0;
    for (iy, row) in histogram.iter().enumerate() {
        for (ix, &count) in row.iter().enumerate() {
            if count > 0 {
                occupied += 1;
            }
            let (cx, cy) = ((ix as f64 + 0.5) / gf, (iy as f64 + 0.5) / gf);
            if circle_difference(cx, center.x()).abs() <= params.eps
                && circle_difference(cy, center.y()).abs() <= params.eps
            {
                cells_in_square += 1;
                min_density = min_density.min(count as f64 * gf * gf / samples as f64);
            }
        }
    }
    if cells_in_square == 0 {
        min_density = 0.0;
    }
    let expected = params.p[1] * params.p[2];
    let mass = branch_hits as f64 / samples as f64;
    let n2 = params.n_quad * params.n_quad;
    Ok(SmoothingReport {
        start: v,
        center,
        eps: params.eps,
        n_quad: params.n_quad,
        g,
        samples,
        min_cell_density: min_density,
        cells_in_square,
        translation_cells: branch_cells.len(),
        translation_mass: mass,
        expected_translation_mass: expected,
        occupied_cells: occupied,
        visible: branch_cells.len() >= n2 && mass >= expected * (1.0 - SMOOTHING_SLACK),
        histogram,
    })
}
