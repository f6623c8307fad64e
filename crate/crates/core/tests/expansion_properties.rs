use proptest::prelude::*;
use rand::Rng;
use uniexp::expansion::{
    expansion_functional, find_minimal_n, lipschitz_bound, min_over_bundle, parameter_lipschitz, BundleGrid, EvalMode,
    ModePolicy, ScanSettings,
};
use uniexp::measure::{enumerate_power, symmetric_preset, AtomicMeasure};
use uniexp::seed::{derive_seed, rng_from_seed};
use uniexp::torus::{TorusPoint, UnitTangent};
use uniexp::word::{AtomKind, GeneratorAtom, MapWord};

const EXACT: EvalMode = EvalMode::Exact { budget: 1_000_000 };

fn random_atom(rng: &mut impl Rng) -> GeneratorAtom {
    let t = rng.random_range(-0.6..0.6);
    let atom = match rng.random_range(0..6) {
        0 => GeneratorAtom::g1(t),
        1 => GeneratorAtom::g2(t),
        2 => GeneratorAtom::g3(t),
        3 => GeneratorAtom::g4(t),
        4 => GeneratorAtom::cat(),
        _ => GeneratorAtom::standard(t),
    };
    if atom.kind != AtomKind::Std && rng.random_bool(0.3) {
        atom.inverted()
    } else {
        atom
    }
}

fn random_word(rng: &mut impl Rng, max_len: usize) -> MapWord {
    let len = rng.random_range(1..=max_len);
    MapWord::new((0..len).map(|_| random_atom(rng)).collect())
}

/// k atoms of length ≤ 2 with random positive weights.
fn random_measure(rng: &mut impl Rng, k: usize) -> AtomicMeasure {
    loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let atoms: Vec<(MapWord, f64)> = raw.iter().map(|w| (random_word(rng, 2), w / total)).collect();
        if let Ok(m) = AtomicMeasure::new(atoms) {
            return m;
        }
    }
}

fn random_tangent(rng: &mut impl Rng) -> UnitTangent {
    UnitTangent::new(
        TorusPoint::new(rng.random(), rng.random()),
        rng.random_range(0.0..std::f64::consts::PI),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dirac_powers_are_exact(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let w = random_word(&mut rng, 4);
        let u = random_tangent(&mut rng);
        let m = AtomicMeasure::dirac(w.clone()).unwrap();
        let v = expansion_functional(&m, n, &u, EXACT, 0).unwrap();
        let direct = w.power(n).log_norm_growth(&u).unwrap();
        prop_assert!((v.value - direct).abs() <= 1e-12, "{} vs {}", v.value, direct);
        prop_assert_eq!(v.stderr, 0.0);
    }
}

#[test]
fn exact_and_monte_carlo_agree() {
    let mut rng = rng_from_seed(2024);
    let mut within = 0;
    for case in 0..100 {
        let k = rng.random_range(2..5);
        let m = random_measure(&mut rng, k);
        let n = rng.random_range(1..4);
        let u = random_tangent(&mut rng);
        let exact = expansion_functional(&m, n, &u, EXACT, 0).unwrap();
        let mc = expansion_functional(
            &m,
            n,
            &u,
            EvalMode::MonteCarlo { samples: 10_000 },
            derive_seed(5, case),
        )
        .unwrap();
        assert!(mc.stderr > 0.0 || (mc.value - exact.value).abs() < 1e-12);
        if (exact.value - mc.value).abs() <= 4.0 * mc.stderr + 1e-12 {
            within += 1;
        }
    }
    assert!(within >= 95, "only {within}/100 within 4 standard errors");
}

#[test]
fn refined_minimum_respects_certificate() {
    let mut rng = rng_from_seed(77);
    let grid = BundleGrid::new(6, 6, 16).unwrap();
    for _ in 0..8 {
        let k = rng.random_range(2..4);
        let m = random_measure(&mut rng, k);
        let n = rng.random_range(1..3);
        let coarse = min_over_bundle(&m, n, &grid, EXACT, true, 0).unwrap();
        let bound = coarse.certified_lower_bound.unwrap();
        assert!(bound <= coarse.min_value);
        let fine = min_over_bundle(&m, n, &grid.refined(), EXACT, false, 0).unwrap();
        assert!(fine.min_value >= bound, "{} < {}", fine.min_value, bound);
    }
}

#[test]
fn lipschitz_bounds_hold_pointwise() {
    let mut rng = rng_from_seed(31);
    for _ in 0..200 {
        let w = random_word(&mut rng, 3);
        let l = lipschitz_bound(&w);
        let u = random_tangent(&mut rng);
        let (dx, dy, dt) = (
            rng.random_range(-1e-3..1e-3),
            rng.random_range(-1e-3..1e-3),
            rng.random_range(-1e-3..1e-3),
        );
        let v = UnitTangent::new(u.base.translate(dx, dy), u.theta() + dt);
        let diff = (w.log_norm_growth(&u).unwrap() - w.log_norm_growth(&v).unwrap()).abs();
        let allowed = l.base * dx.hypot(dy) + l.angle * dt.abs();
        assert!(diff <= allowed * (1.0 + 1e-9) + 1e-13, "{w}: {diff} > {allowed}");
    }
}

fn perturbed(m: &AtomicMeasure, eta: f64) -> AtomicMeasure {
    let atoms = m.atoms().iter().map(|a| {
        let word = MapWord::new(
            a.word
                .atoms()
                .iter()
                .map(|g| {
                    if g.kind.has_param() {
                        GeneratorAtom {
                            param: g.param + eta,
                            ..*g
                        }
                    } else {
                        *g
                    }
                })
                .collect(),
        );
        (word, a.weight)
    });
    AtomicMeasure::new(atoms).unwrap()
}

#[test]
fn minimum_moves_at_most_parameter_lipschitz_times_eta() {
    let mut rng = rng_from_seed(404);
    let grid = BundleGrid::new(5, 5, 12).unwrap();
    let eta = 1e-3;
    for _ in 0..10 {
        let m = random_measure(&mut rng, 3);
        let n = 2;
        let sensitivity: f64 = enumerate_power(&m, n, 1000)
            .unwrap()
            .iter()
            .map(|(w, weight)| weight * parameter_lipschitz(&w))
            .sum();
        let a = min_over_bundle(&m, n, &grid, EXACT, false, 0).unwrap();
        let b = min_over_bundle(&perturbed(&m, eta), n, &grid, EXACT, false, 0).unwrap();
        let moved = (a.grid_min_value - b.grid_min_value).abs();
        assert!(
            moved <= 1.01 * sensitivity * eta + 1e-9,
            "moved {moved}, bound {}",
            sensitivity * eta
        );
    }
}

/// First `N` from a full-grid Monte Carlo run, frozen.
const SYMMETRIC_FIRST_N: usize = 2;

#[test]
fn symmetric_preset_first_expanding_n_is_frozen() {
    let m = symmetric_preset(2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0, 4.0, 4.0, [0.125; 4]).unwrap();
    let mut settings = ScanSettings::new(BundleGrid::new(32, 32, 64).unwrap(), 0.05, 4);
    settings.policy = ModePolicy::MonteCarlo { samples: 20_000 };
    let search = find_minimal_n(&m, &settings).unwrap();
    assert_eq!(search.found, Some(SYMMETRIC_FIRST_N));
    assert!(search.trace[0].min_value < 0.0);
}
