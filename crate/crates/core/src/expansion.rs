//! The expansion functional
//!
//! ```text
//! E_N(x, v) = ∫ log ‖D_x f v‖ dμ^(N)(f)
//! ```
//!
//! its minimum over the unit tangent bundle, Lipschitz certificates for grid
//! minima, and the search for the first `N` with `min E_N > C`.
//!
//! Exact mode walks the full tree of `kᴺ` branches; Monte Carlo mode draws
//! `samples` words once and evaluates every grid node on that same sample, so
//! the sampled functional is a single Lipschitz function of `(x, θ)` and grid
//! certificates apply to it as well.
//!
//! At each base point the branch derivatives `M_w(x)` are computed once and
//! reused for all angles. The best grid angle at each base point is then
//! polished by golden-section search inside its neighbouring grid cells,
//! because for strongly hyperbolic branches the minimum over θ sits in a
//! valley far narrower than any practical angular grid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::seed::derive_seed;
use crate::torus::{Jacobian2, TorusPoint, UnitTangent};
use crate::word::{AtomKind, GeneratorAtom, MapWord};

/// Default expansion threshold `C`.
pub const DEFAULT_THRESHOLD: f64 = 2.0;
pub const DEFAULT_BUDGET: u128 = 1_000_000;
pub const DEFAULT_SAMPLES: usize = 20_000;

/// Conventions every reported value depends on.
pub const METRIC: &str = "flat euclidean metric on the unit-square chart; euclidean norms; natural log";

/// Cell-centred grid on `T² × [0, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BundleGrid {
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
}

impl Default for BundleGrid {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            ntheta: 64,
        }
    }
}

impl BundleGrid {
    pub fn new(nx: usize, ny: usize, ntheta: usize) -> Result<Self> {
        for (key, v) in [("nx", nx), ("ny", ny), ("ntheta", ntheta)] {
            if v == 0 {
                return Err(Error::range(key, "must be at least 1"));
            }
        }
        Ok(Self { nx, ny, ntheta })
    }

    /// Doubles every resolution.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx,
            ny: 2 * self.ny,
            ntheta: 2 * self.ntheta,
        }
    }

    pub fn dx(&self) -> f64 {
        0.5 / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        0.5 / self.ny as f64
    }

    pub fn dtheta(&self) -> f64 {
        PI / (2.0 * self.ntheta as f64)
    }

    /// Distance from any base point to the nearest base node.
    pub fn base_radius(&self) -> f64 {
        self.dx().hypot(self.dy())
    }

    pub fn base_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny * self.ntheta
    }

    /// Base node number `i` (x-major: `i = ix·ny + iy`).
    pub fn base_point(&self, i: usize) -> TorusPoint {
        let (ix, iy) = (i / self.ny, i % self.ny);
        TorusPoint::new((ix as f64 + 0.5) / self.nx as f64, (iy as f64 + 0.5) / self.ny as f64)
    }

    pub fn angle(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * PI / self.ntheta as f64
    }
}

/// How `μ^(N)` is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvalMode {
    /// Sum over all `kᴺ` branches; fails with `BudgetExceeded` past `budget`.
    Exact { budget: u128 },
    /// Mean over `samples` independent draws.
    MonteCarlo { samples: usize },
}

/// Mode selection for a scan over `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ModePolicy {
    Exact {
        budget: u128,
    },
    MonteCarlo {
        samples: usize,
    },
    /// Exact while `kᴺ ≤ budget`, Monte Carlo afterwards.
    Auto {
        budget: u128,
        samples: usize,
    },
}

impl Default for ModePolicy {
    fn default() -> Self {
        ModePolicy::Auto {
            budget: DEFAULT_BUDGET,
            samples: DEFAULT_SAMPLES,
        }
    }
}

impl ModePolicy {
    pub fn resolve(&self, measure: &AtomicMeasure, n: usize) -> EvalMode {
        match *self {
            ModePolicy::Exact { budget } => EvalMode::Exact { budget },
            ModePolicy::MonteCarlo { samples } => EvalMode::MonteCarlo { samples },
            ModePolicy::Auto { budget, samples } => {
                if measure.branch_count(n) <= budget {
                    EvalMode::Exact { budget }
                } else {
                    EvalMode::MonteCarlo { samples }
                }
            }
        }
    }
}

/// A value of the functional with its Monte Carlo standard error (zero in
/// exact mode).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub stderr: f64,
}

/// Lipschitz constants of `(p, θ) ↦ log ‖D_p f v(θ)‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzBound {
    /// With respect to the base point, in the flat torus metric.
    pub base: f64,
    /// With respect to the angle θ.
    pub angle: f64,
}

/// Result of minimizing `E_N` over a [`BundleGrid`].
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub mode: &'static str,
    /// Branch count (exact) or sample count (Monte Carlo).
    pub branches: u128,
    pub threshold: f64,
    pub min_value: f64,
    pub argmin: UnitTangent,
    /// Minimum over grid nodes before angle polishing.
    pub grid_min_value: f64,
    pub stderr_max: f64,
    pub argmin_stderr: f64,
    pub certified: bool,
    pub certified_lower_bound: Option<f64>,
    pub lipschitz: Option<LipschitzBound>,
    pub grid: BundleGrid,
    pub metric: &'static str,
    /// Polished minimum over θ at each base node, x-major.
    #[serde(skip)]
    pub base_minima: Vec<f64>,
    /// Value at every grid node, index `base · ntheta + k`.
    #[serde(skip)]
    pub node_values: Vec<f64>,
    #[serde(skip)]
    pub node_stderrs: Vec<f64>,
}

impl ExpansionReport {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// The quantity compared against the threshold: the certified lower
    /// bound when certification ran, the minimum otherwise.
    pub fn decisive_value(&self) -> f64 {
        self.certified_lower_bound.unwrap_or(self.min_value)
    }

    pub fn exceeds_threshold(&self) -> bool {
        self.decisive_value() > self.threshold
    }
}

// ---------------------------------------------------------------------------
// Branch sets

/// The branches of `μ^(N)` the functional integrates over.
enum Branches<'a> {
    Tree {
        measure: &'a AtomicMeasure,
        depth: usize,
    },
    Sampled {
        measure: &'a AtomicMeasure,
        draws: Vec<Vec<usize>>,
    },
}

impl<'a> Branches<'a> {
    fn build(measure: &'a AtomicMeasure, n: usize, mode: EvalMode, seed: u64) -> Result<Self> {
        match mode {
            EvalMode::Exact { budget } => {
                let branches = measure.branch_count(n);
                if branches > budget {
                    return Err(Error::BudgetExceeded { branches, budget });
                }
                Ok(Branches::Tree { measure, depth: n })
            }
            EvalMode::MonteCarlo { samples } => {
                if samples == 0 {
                    return Err(Error::range("samples", "must be at least 1"));
                }
                let draws = (0..samples as u64)
                    .map(|i| measure.sample_indices(n, derive_seed(seed, i)))
                    .collect();
                Ok(Branches::Sampled { measure, draws })
            }
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, Branches::Tree { .. })
    }

    fn count(&self) -> u128 {
        match self {
            Branches::Tree { measure, depth } => measure.branch_count(*depth),
            Branches::Sampled { draws, .. } => draws.len() as u128,
        }
    }

    /// Branch derivatives at `p`.
    fn leaves_at(&self, p: TorusPoint) -> Leaves {
        match self {
            Branches::Tree { measure, depth } => {
                let mut leaves = Leaves {
                    mats: Vec::new(),
                    weights: Some(Vec::new()),
                };
                tree_leaves(measure, *depth, p.x(), p.y(), Jacobian2::IDENTITY, 1.0, &mut leaves);
                leaves
            }
            Branches::Sampled { measure, draws } => {
                let atoms = measure.atoms();
                let mats = draws
                    .iter()
                    .map(|draw| {
                        let (mut x, mut y, mut m) = (p.x(), p.y(), Jacobian2::IDENTITY);
                        for &i in draw {
                            (x, y, m) = atoms[i].word.advance(x, y, m);
                        }
                        m
                    })
                    .collect();
                Leaves { mats, weights: None }
            }
        }
    }

    /// Branch-weighted mean of the per-branch Lipschitz constants.
    fn lipschitz(&self) -> LipschitzBound {
        match self {
            Branches::Tree { measure, depth } => {
                let mut acc = LipschitzBound { base: 0.0, angle: 0.0 };
                tree_lipschitz(measure, *depth, ChainBound::START, 1.0, &mut acc);
                acc
            }
            Branches::Sampled { measure, draws } => {
                let mut acc = LipschitzBound { base: 0.0, angle: 0.0 };
                for draw in draws {
                    let mut chain = ChainBound::START;
                    for &i in draw {
                        chain = chain.extend_word(&measure.atoms()[i].word);
                    }
                    let l = chain.finish();
                    acc.base += l.base;
                    acc.angle += l.angle;
                }
                let s = draws.len() as f64;
                LipschitzBound {
                    base: acc.base / s,
                    angle: acc.angle / s,
                }
            }
        }
    }
}

fn tree_leaves(measure: &AtomicMeasure, depth: usize, x: f64, y: f64, m: Jacobian2, w: f64, out: &mut Leaves) {
    if depth == 0 {
        out.mats.push(m);
        out.weights.as_mut().expect("tree leaves are weighted").push(w);
        return;
    }
    for atom in measure.atoms() {
        let (nx, ny, nm) = atom.word.advance(x, y, m);
        tree_leaves(measure, depth - 1, nx, ny, nm, w * atom.weight, out);
    }
}

fn tree_lipschitz(measure: &AtomicMeasure, depth: usize, chain: ChainBound, w: f64, acc: &mut LipschitzBound) {
    if depth == 0 {
        let l = chain.finish();
        acc.base += w * l.base;
        acc.angle += w * l.angle;
        return;
    }
    for atom in measure.atoms() {
        tree_lipschitz(measure, depth - 1, chain.extend_word(&atom.word), w * atom.weight, acc);
    }
}

/// Branch derivatives at one base point.
struct Leaves {
    mats: Vec<Jacobian2>,
    /// `None` for equally weighted Monte Carlo draws.
    weights: Option<Vec<f64>>,
}

impl Leaves {
    fn evaluate(&self, theta: f64) -> FunctionalValue {
        let (s, c) = theta.sin_cos();
        match &self.weights {
            Some(w) => {
                let value = self.mats.iter().zip(w).map(|(m, w)| w * m.log_norm_along(c, s)).sum();
                FunctionalValue { value, stderr: 0.0 }
            }
            None => {
                // shifted sums: exact zero variance for identical draws
                let n = self.mats.len() as f64;
                let shift = self.mats[0].log_norm_along(c, s);
                let (mut s1, mut s2) = (0.0, 0.0);
                for m in &self.mats {
                    let d = m.log_norm_along(c, s) - shift;
                    s1 += d;
                    s2 += d * d;
                }
                let value = shift + s1 / n;
                let stderr = if self.mats.len() > 1 {
                    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
                    (var / n).sqrt()
                } else {
                    0.0
                };
                FunctionalValue { value, stderr }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Functional and grid minimization

/// `E_N` at a single unit tangent vector.
pub fn expansion_functional(
    measure: &AtomicMeasure,
    n: usize,
    u: &UnitTangent,
    mode: EvalMode,
    seed: u64,
) -> Result<FunctionalValue> {
    let branches = Branches::build(measure, n, mode, seed)?;
    Ok(branches.leaves_at(u.base).evaluate(u.theta()))
}

struct BaseResult {
    values: Vec<f64>,
    stderrs: Vec<f64>,
    best_theta: f64,
    best: FunctionalValue,
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn minimize_at_base(leaves: &Leaves, grid: &BundleGrid) -> BaseResult {
    let mut values = Vec::with_capacity(grid.ntheta);
    let mut stderrs = Vec::with_capacity(grid.ntheta);
    for k in 0..grid.ntheta {
        let fv = leaves.evaluate(grid.angle(k));
        values.push(fv.value);
        stderrs.push(fv.stderr);
    }
    let mut k_best = 0;
    for k in 1..grid.ntheta {
        if values[k] < values[k_best] {
            k_best = k;
        }
    }
    let spacing = PI / grid.ntheta as f64;
    let center = grid.angle(k_best);
    let (theta, value) = golden_section(|t| leaves.evaluate(t).value, center - spacing, center + spacing, 1e-11);
    let (best_theta, best) = if value < values[k_best] {
        (theta, leaves.evaluate(theta))
    } else {
        (
            center,
            FunctionalValue {
                value: values[k_best],
                stderr: stderrs[k_best],
            },
        )
    };
    BaseResult {
        values,
        stderrs,
        best_theta,
        best,
    }
}

/// Minimizes `E_N` over the grid, polishing the best angle at each base
/// node. With `certify`, also returns `grid min − L_base·r − L_angle·δθ`,
/// a lower bound for `E_N` on the whole bundle.
pub fn min_over_bundle(
    measure: &AtomicMeasure,
    n: usize,
    grid: &BundleGrid,
    mode: EvalMode,
    certify: bool,
    seed: u64,
) -> Result<ExpansionReport> {
    let branches = Branches::build(measure, n, mode, seed)?;
    let per_base: Vec<BaseResult> = (0..grid.base_count())
        .into_par_iter()
        .map(|i| minimize_at_base(&branches.leaves_at(grid.base_point(i)), grid))
        .collect();

    // deterministic reduction: first index wins ties
    let mut best_base = 0;
    let mut grid_min = f64::INFINITY;
    let mut stderr_max: f64 = 0.0;
    let mut node_values = Vec::with_capacity(grid.node_count());
    let mut node_stderrs = Vec::with_capacity(grid.node_count());
    let mut base_minima = Vec::with_capacity(grid.base_count());
    for (i, r) in per_base.iter().enumerate() {
        if r.best.value < per_base[best_base].best.value {
            best_base = i;
        }
        for &v in &r.values {
            grid_min = grid_min.min(v);
        }
        for &s in &r.stderrs {
            stderr_max = stderr_max.max(s);
        }
        stderr_max = stderr_max.max(r.best.stderr);
        node_values.extend_from_slice(&r.values);
        node_stderrs.extend_from_slice(&r.stderrs);
        base_minima.push(r.best.value);
    }
    let best = &per_base[best_base];

    let (lipschitz, certified_lower_bound) = if certify {
        let l = branches.lipschitz();
        let bound = grid_min - l.base * grid.base_radius() - l.angle * grid.dtheta();
        (Some(l), Some(bound.min(best.best.value)))
    } else {
        (None, None)
    };

    Ok(ExpansionReport {
        n,
        mode: if branches.is_exact() { "exact" } else { "monte_carlo" },
        branches: branches.count(),
        threshold: DEFAULT_THRESHOLD,
        min_value: best.best.value,
        argmin: UnitTangent::new(grid.base_point(best_base), best.best_theta),
        grid_min_value: grid_min,
        stderr_max,
        argmin_stderr: best.best.stderr,
        certified: certify,
        certified_lower_bound,
        lipschitz,
        grid: *grid,
        metric: METRIC,
        base_minima,
        node_values,
        node_stderrs,
    })
}

// ---------------------------------------------------------------------------
// Lipschitz certificates

/// Uniform bounds for one atom: `norm = sup ‖Da‖` (which also bounds
/// `‖(Da)⁻¹‖`, the derivative being unimodular) and `second = sup ‖D²a‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomBounds {
    pub norm: f64,
    pub second: f64,
}

/// Operator norm of the shear `[[1, s], [0, 1]]`.
pub fn shear_norm(s: f64) -> f64 {
    let s = s.abs();
    0.5 * (s + (s * s + 4.0).sqrt())
}

pub fn atom_bounds(atom: &GeneratorAtom) -> AtomBounds {
    match atom.kind {
        AtomKind::G1 | AtomKind::G2 | AtomKind::Id => AtomBounds { norm: 1.0, second: 0.0 },
        AtomKind::G3 | AtomKind::G4 => {
            let t = atom.param.abs();
            AtomBounds {
                norm: shear_norm(t * PI),
                second: 2.0 * PI * PI * t,
            }
        }
        AtomKind::Cat => AtomBounds {
            norm: 0.5 * (3.0 + 5f64.sqrt()),
            second: 0.0,
        },
        AtomKind::Std => {
            // the norm is convex in cos(2πx) ∈ [-1, 1]: check both ends
            let k = atom.param;
            let hi = Jacobian2::new(1.0 + k, 1.0, k, 1.0).operator_norm();
            let lo = Jacobian2::new(1.0 - k, 1.0, -k, 1.0).operator_norm();
            AtomBounds {
                norm: hi.max(lo),
                second: 2.0 * 2f64.sqrt() * PI * k.abs(),
            }
        }
    }
}

/// Running bounds along a word: `second` bounds `‖D²‖` of the composition
/// so far, `norm` bounds `‖D‖`.
#[derive(Clone, Copy, Debug)]
struct ChainBound {
    second: f64,
    norm: f64,
    all_isometries: bool,
}

impl ChainBound {
    const START: ChainBound = ChainBound {
        second: 0.0,
        norm: 1.0,
        all_isometries: true,
    };

    /// `‖D²(g∘f)‖ ≤ ‖D²g‖·‖Df‖² + ‖Dg‖·‖D²f‖`
    fn extend(self, atom: &GeneratorAtom) -> ChainBound {
        let b = atom_bounds(atom);
        ChainBound {
            second: b.second * self.norm * self.norm + b.norm * self.second,
            norm: self.norm * b.norm,
            all_isometries: self.all_isometries && atom.is_isometry(),
        }
    }

    fn extend_word(self, word: &MapWord) -> ChainBound {
        word.atoms().iter().fold(self, |c, a| c.extend(a))
    }

    fn finish(self) -> LipschitzBound {
        if self.all_isometries {
            // derivative is the identity everywhere: log‖v‖ ≡ 0
            return LipschitzBound { base: 0.0, angle: 0.0 };
        }
        // ‖Mv‖ ≥ 1/‖M⁻¹‖ and ‖M⁻¹‖ ≤ Π bⱼ = Π Bⱼ
        LipschitzBound {
            base: self.second * self.norm,
            angle: self.norm * self.norm,
        }
    }
}

/// Sound Lipschitz constants of `(p, θ) ↦ log ‖D_p f v(θ)‖` for one branch.
pub fn lipschitz_bound(branch: &MapWord) -> LipschitzBound {
    ChainBound::START.extend_word(branch).finish()
}

/// First-order bound on `|∂/∂η log ‖D_p f_η v‖|` when every atom parameter
/// of `branch` is moved by at most `η`, uniformly in `(p, θ)`.
pub fn parameter_lipschitz(branch: &MapWord) -> f64 {
    let atoms = branch.atoms();
    let bounds: Vec<AtomBounds> = atoms.iter().map(atom_bounds).collect();
    // displacement of the orbit point after each atom, per unit η
    let mut displacement = 0.0;
    // per-atom bound on the perturbation of its Jacobian
    let mut jac_shift = Vec::with_capacity(atoms.len());
    for (atom, b) in atoms.iter().zip(&bounds) {
        let (move_rate, jac_rate) = match atom.kind {
            AtomKind::G1 | AtomKind::G2 => (1.0, 0.0),
            AtomKind::G3 | AtomKind::G4 => (1.0, PI),
            AtomKind::Std => (2f64.sqrt() / (2.0 * PI), 2f64.sqrt()),
            AtomKind::Cat | AtomKind::Id => (0.0, 0.0),
        };
        jac_shift.push(b.second * displacement + jac_rate);
        displacement = b.norm * displacement + move_rate;
    }
    // ‖ΔM‖ ≤ Σⱼ (Π_{i>j} Bᵢ)·‖ΔJⱼ‖·(Π_{i<j} Bᵢ)
    let total: f64 = bounds.iter().map(|b| b.norm).product();
    let mut delta_m = 0.0;
    for (j, shift) in jac_shift.iter().enumerate() {
        delta_m += shift * total / bounds[j].norm;
    }
    delta_m * total
}

// ---------------------------------------------------------------------------
// Search over N

/// Outcome of [`find_minimal_n`]. `found: None` means no `N ≤ N_max`
/// passed, which is inconclusive rather than a proof of failure.
#[derive(Clone, Debug, Serialize)]
pub struct MinimalNSearch {
    pub found: Option<usize>,
    pub threshold: f64,
    pub n_max: usize,
    pub trace: Vec<ExpansionReport>,
}

impl MinimalNSearch {
    pub fn is_not_found(&self) -> bool {
        self.found.is_none()
    }
}

/// Settings shared by every `N` in a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanSettings {
    pub grid: BundleGrid,
    pub threshold: f64,
    pub n_max: usize,
    pub policy: ModePolicy,
    pub certify: bool,
    pub seed: u64,
}

impl ScanSettings {
    pub fn new(grid: BundleGrid, threshold: f64, n_max: usize) -> Self {
        Self {
            grid,
            threshold,
            n_max,
            policy: ModePolicy::default(),
            certify: false,
            seed: 0,
        }
    }
}

fn scan(measure: &AtomicMeasure, settings: &ScanSettings, stop_early: bool) -> Result<MinimalNSearch> {
    if settings.n_max == 0 {
        return Err(Error::range("N_max", "must be at least 1"));
    }
    let mut trace = Vec::new();
    let mut found = None;
    for n in 1..=settings.n_max {
        let mode = settings.policy.resolve(measure, n);
        let report = min_over_bundle(
            measure,
            n,
            &settings.grid,
            mode,
            settings.certify,
            derive_seed(settings.seed, n as u64),
        )?
        .with_threshold(settings.threshold);
        let passed = report.exceeds_threshold();
        trace.push(report);
        if passed && found.is_none() {
            found = Some(n);
            if stop_early {
                break;
            }
        }
    }
    Ok(MinimalNSearch {
        found,
        threshold: settings.threshold,
        n_max: settings.n_max,
        trace,
    })
}

/// Iterates `N = 1, …, N_max` and stops at the first `N` whose report
/// exceeds the threshold (its certified lower bound, when certifying).
pub fn find_minimal_n(measure: &AtomicMeasure, settings: &ScanSettings) -> Result<MinimalNSearch> {
    scan(measure, settings, true)
}

/// Like [`find_minimal_n`] but evaluates every `N ≤ N_max`.
pub fn scan_all_n(measure: &AtomicMeasure, settings: &ScanSettings) -> Result<MinimalNSearch> {
    scan(measure, settings, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_diffusion, translation_preset};
    use approx::assert_abs_diff_eq;

    fn word(s: &str) -> MapWord {
        s.parse().unwrap()
    }

    fn cat() -> AtomicMeasure {
        AtomicMeasure::dirac(word("CAT")).unwrap()
    }

    const EXACT: EvalMode = EvalMode::Exact { budget: DEFAULT_BUDGET };

    #[test]
    fn isometries_give_zero() {
        let m = translation_preset(0.3, 0.7).unwrap();
        for n in 1..4 {
            let u = UnitTangent::new(TorusPoint::new(0.2, 0.9), 1.1);
            let v = expansion_functional(&m, n, &u, EXACT, 0).unwrap();
            assert_eq!(
                v,
                FunctionalValue {
                    value: 0.0,
                    stderr: 0.0
                }
            );
        }
    }

    #[test]
    fn cat_squared_along_x_axis() {
        let u = UnitTangent::new(TorusPoint::new(0.4, 0.1), 0.0);
        let v = expansion_functional(&cat(), 2, &u, EXACT, 0).unwrap();
        assert_abs_diff_eq!(v.value, 0.5 * 34f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.value, 1.7632, epsilon = 1e-4);
    }

    #[test]
    fn monte_carlo_on_dirac_is_exact() {
        let u = UnitTangent::new(TorusPoint::new(0.4, 0.1), 0.3);
        let exact = expansion_functional(&cat(), 3, &u, EXACT, 0).unwrap();
        let mc = expansion_functional(&cat(), 3, &u, EvalMode::MonteCarlo { samples: 500 }, 9).unwrap();
        assert_eq!(mc.stderr, 0.0);
        assert_abs_diff_eq!(mc.value, exact.value, epsilon = 1e-14);
    }

    #[test]
    fn exact_mode_respects_budget() {
        let m = make_diffusion(&word("CAT"), 0.1, [0.2; 5], 2).unwrap();
        let u = UnitTangent::new(TorusPoint::new(0.0, 0.0), 0.0);
        let err = expansion_functional(&m, 7, &u, EvalMode::Exact { budget: 1000 }, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                branches: 4_782_969,
                budget: 1000
            }
        ));
    }

    #[test]
    fn cat_minimum_is_contracting_eigenvalue() {
        let grid = BundleGrid::new(4, 4, 64).unwrap();
        let r = min_over_bundle(&cat(), 1, &grid, EXACT, false, 0).unwrap();
        let mu = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((r.min_value - mu.ln()).abs() < 1e-2);
        assert!((r.min_value - mu.ln()).abs() < 1e-9, "polished minimum {}", r.min_value);
    }

    #[test]
    fn translation_measure_minimum_is_zero() {
        let grid = BundleGrid::new(4, 4, 8).unwrap();
        let r = min_over_bundle(&translation_preset(0.1, 0.2).unwrap(), 3, &grid, EXACT, true, 0).unwrap();
        assert_eq!(r.min_value, 0.0);
        assert_eq!(r.certified_lower_bound, Some(0.0));
    }

    #[test]
    fn linear_measures_are_base_independent() {
        let m = AtomicMeasure::new([
            (word("CAT"), 0.5),
            (word("G1(0.3);CAT^-1"), 0.25),
            (word("G2(0.1)"), 0.25),
        ])
        .unwrap();
        let grid = BundleGrid::new(6, 5, 16).unwrap();
        let r = min_over_bundle(&m, 3, &grid, EXACT, false, 0).unwrap();
        let hi = r.base_minima.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.base_minima.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi - lo <= 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(
            lipschitz_bound(&word("G1(0.2);G2(0.4)")),
            LipschitzBound { base: 0.0, angle: 0.0 }
        );
        let l = lipschitz_bound(&word("CAT"));
        assert_eq!(l.base, 0.0);
        let big = 0.5 * (3.0 + 5f64.sqrt());
        assert_abs_diff_eq!(l.angle, big * big, epsilon = 1e-12);
        assert_abs_diff_eq!(l.angle, 6.854, epsilon = 1e-3);

        // G3(1): C = 2π², b = ‖[[1, π], [0, 1]]‖
        let l = lipschitz_bound(&word("G3(1)"));
        let b = (PI + (PI * PI + 4.0).sqrt()) / 2.0;
        assert_abs_diff_eq!(l.base, 2.0 * PI * PI * b, epsilon = 1e-12);
        assert!(l.base.is_finite() && l.base > 0.0);
    }

    #[test]
    fn shear_norm_matches_svd() {
        for s in [-3.0, -0.5, 0.0, 0.25, 2.0, 10.0] {
            let m = Jacobian2::new(1.0, s, 0.0, 1.0);
            assert_abs_diff_eq!(shear_norm(s), m.operator_norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn scan_on_cat_is_not_found() {
        let grid = BundleGrid::new(2, 2, 64).unwrap();
        let mut settings = ScanSettings::new(grid, 2.0, 4);
        settings.policy = ModePolicy::Exact { budget: 10 };
        let s = find_minimal_n(&cat(), &settings).unwrap();
        assert!(s.is_not_found());
        assert_eq!(s.trace.len(), 4);
    }

    #[test]
    fn auto_policy_switches_past_budget() {
        let m = make_diffusion(&word("CAT"), 0.1, [0.2; 5], 2).unwrap();
        let p = ModePolicy::Auto {
            budget: 100,
            samples: 10,
        };
        assert_eq!(p.resolve(&m, 2), EvalMode::Exact { budget: 100 });
        assert_eq!(p.resolve(&m, 3), EvalMode::MonteCarlo { samples: 10 });
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|t| (t - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-12);
    }
}
