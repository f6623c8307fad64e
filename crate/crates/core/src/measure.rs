//! Finitely supported probability measures on map words.
//!
//! Besides explicit atom lists this module builds the two families the lab
//! studies: the midpoint-quadrature discretization of a diffusion of a base
//! map `f₀`, and the symmetric eight-atom measure on translations and
//! shears together with their inverses.

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::word::{AtomKind, GeneratorAtom, MapWord};

const WEIGHT_TOL: f64 = 1e-12;

/// One atom of a measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedWord {
    pub word: MapWord,
    pub weight: f64,
}

/// Construction parameters of a discretized diffusion, kept on the measure
/// so later checks can recover `f₀`, `ε` and the family weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffusionParams {
    pub f0: MapWord,
    pub eps: f64,
    /// `[p₀, p₁, p₂, p₃, p₄]`: mass of `f₀` and of each generator family.
    pub p: [f64; 5],
    pub n_quad: usize,
}

impl DiffusionParams {
    /// Midpoint nodes of the even partition of `[-ε, ε]` into `n_quad` cells.
    pub fn nodes(&self) -> Vec<f64> {
        quadrature_nodes(self.eps, self.n_quad)
    }
}

pub(crate) fn quadrature_nodes(eps: f64, n_quad: usize) -> Vec<f64> {
    (0..n_quad)
        .map(|j| eps * ((2 * j + 1) as f64 / n_quad as f64 - 1.0))
        .collect()
}

/// A probability measure with finitely many atoms.
///
/// Weights are strictly positive and sum to one within 1e-12; atom words
/// are distinct as printed literals.
#[derive(Clone, Debug, Serialize)]
pub struct AtomicMeasure {
    atoms: Vec<WeightedWord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diffusion: Option<DiffusionParams>,
}

impl PartialEq for AtomicMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl AtomicMeasure {
    /// Validates and builds a measure. Zero-weight atoms are dropped.
    pub fn new(atoms: impl IntoIterator<Item = (MapWord, f64)>) -> Result<Self> {
        let mut kept = Vec::new();
        let mut total = 0.0;
        for (word, weight) in atoms {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::BadWeights(format!("weight {weight} for `{word}`")));
            }
            total += weight;
            if weight > 0.0 {
                kept.push(WeightedWord { word, weight });
            }
        }
        if kept.is_empty() {
            return Err(Error::BadWeights("no atom with positive weight".into()));
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::BadWeights(format!("weights sum to {total}")));
        }
        let mut seen = HashSet::new();
        for a in &kept {
            a.word.check_supported()?;
            if !seen.insert(a.word.to_string()) {
                return Err(Error::BadMeasure(format!("duplicate atom `{}`", a.word)));
            }
        }
        Ok(Self {
            atoms: kept,
            diffusion: None,
        })
    }

    /// The point mass at `word`.
    pub fn dirac(word: MapWord) -> Result<Self> {
        Self::new([(word, 1.0)])
    }

    /// Uniform measure on the given words.
    pub fn uniform(words: Vec<MapWord>) -> Result<Self> {
        let w = 1.0 / words.len() as f64;
        Self::new(words.into_iter().map(|word| (word, w)))
    }

    pub fn atoms(&self) -> &[WeightedWord] {
        &self.atoms
    }

    /// Number of atoms `k`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn diffusion(&self) -> Option<&DiffusionParams> {
        self.diffusion.as_ref()
    }

    /// The same weights on the inverted atoms.
    pub fn inverted(&self) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok((a.word.invert()?, a.weight)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    /// `kᴺ`, saturating at `u128::MAX`.
    pub fn branch_count(&self, n: usize) -> u128 {
        u32::try_from(n)
            .ok()
            .and_then(|n| (self.len() as u128).checked_pow(n))
            .unwrap_or(u128::MAX)
    }

    pub(crate) fn index_sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.weights()).expect("validated weights")
    }

    /// Atom indices of one length-`n` draw, in draw order.
    pub fn sample_indices(&self, n: usize, seed: u64) -> Vec<usize> {
        let dist = self.index_sampler();
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    /// Concatenation of the atom words at `indices`.
    pub fn compose(&self, indices: &[usize]) -> MapWord {
        let atoms: Vec<GeneratorAtom> = indices
            .iter()
            .flat_map(|&i| self.atoms[i].word.atoms().iter().copied())
            .collect();
        MapWord::new(atoms)
    }

    /// Measure literal: one `weight <w> word <literal>` line per atom.
    pub fn to_literal(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AtomicMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "weight {} word {}", a.weight, a.word)?;
        }
        Ok(())
    }
}

/// Discretized diffusion of `f0`: an atom `f₀` of mass `p₀`, and for each
/// generator family `i` the words `f₀ ; G_i(t_j)` (that is `g_i^{t_j} ∘ f₀`)
/// at the `n_quad` midpoint nodes of `[-ε, ε]`, each of mass `p_i / n_quad`.
pub fn make_diffusion(f0: &MapWord, eps: f64, p: [f64; 5], n_quad: usize) -> Result<AtomicMeasure> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::BadMeasure(format!(
            "diffusion width must be positive, got {eps}"
        )));
    }
    if n_quad == 0 {
        return Err(Error::BadMeasure("n_quad must be at least 1".into()));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::BadWeights(format!("family weights {p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::BadWeights(format!("family weights sum to {total}")));
    }
    let nodes = quadrature_nodes(eps, n_quad);
    let families = [AtomKind::G1, AtomKind::G2, AtomKind::G3, AtomKind::G4];
    let mut atoms = vec![(f0.clone(), p[0])];
    for (kind, &pi) in families.iter().zip(&p[1..]) {
        for &t in &nodes {
            let g = MapWord::single(GeneratorAtom::new(*kind, t));
            atoms.push((f0.then(&g), pi / n_quad as f64));
        }
    }
    let mut measure = AtomicMeasure::new(atoms)?;
    measure.diffusion = Some(DiffusionParams {
        f0: f0.clone(),
        eps,
        p,
        n_quad,
    });
    Ok(measure)
}

/// The eight-atom symmetric measure on `G1(α)^±1, G2(β)^±1, G3(a)^±1,
/// G4(b)^±1`, giving mass `w_i` to each of the pair `ĝ_i, ĝ_i⁻¹`.
pub fn symmetric_preset(alpha: f64, beta: f64, a: f64, b: f64, w: [f64; 4]) -> Result<AtomicMeasure> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::BadMeasure(format!(
            "shear amounts must be positive, got a={a}, b={b}"
        )));
    }
    if w.iter().any(|&x| x.is_nan() || x <= 0.0 || !x.is_finite()) {
        return Err(Error::BadWeights(format!("pair weights {w:?} must be positive")));
    }
    let total: f64 = w.iter().map(|x| 2.0 * x).sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::BadWeights(format!("pair weights give total mass {total}")));
    }
    let gens = generators(alpha, beta, a, b);
    let mut atoms = Vec::with_capacity(8);
    for (g, wi) in gens.into_iter().zip(w) {
        let inv = MapWord::single(g.inverted());
        atoms.push((MapWord::single(g), wi));
        atoms.push((inv, wi));
    }
    AtomicMeasure::new(atoms)
}

/// Uniform measure on the four generators `G1(α), G2(β), G3(a), G4(b)`.
pub fn generator_preset(alpha: f64, beta: f64, a: f64, b: f64) -> Result<AtomicMeasure> {
    AtomicMeasure::uniform(generators(alpha, beta, a, b).into_iter().map(MapWord::single).collect())
}

/// Uniform measure on the translations `G1(α), G2(β)`.
pub fn translation_preset(alpha: f64, beta: f64) -> Result<AtomicMeasure> {
    AtomicMeasure::uniform(vec![
        MapWord::single(GeneratorAtom::g1(alpha)),
        MapWord::single(GeneratorAtom::g2(beta)),
    ])
}

fn generators(alpha: f64, beta: f64, a: f64, b: f64) -> [GeneratorAtom; 4] {
    [
        GeneratorAtom::g1(alpha),
        GeneratorAtom::g2(beta),
        GeneratorAtom::g3(a),
        GeneratorAtom::g4(b),
    ]
}

/// The N-th convolution power as the tree of all length-N draws.
#[derive(Clone, Copy, Debug)]
pub struct WordTree<'a> {
    measure: &'a AtomicMeasure,
    depth: usize,
}

impl<'a> WordTree<'a> {
    pub fn measure(&self) -> &'a AtomicMeasure {
        self.measure
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branch_count(&self) -> u128 {
        self.measure.branch_count(self.depth)
    }

    /// All `(composed word, product weight)` pairs in lexicographic branch
    /// order, the first draw being most significant.
    pub fn iter(&self) -> PowerIter<'a> {
        PowerIter {
            measure: self.measure,
            digits: vec![0; self.depth],
            done: false,
        }
    }
}

/// Streaming enumerator over the branches of a [`WordTree`].
pub struct PowerIter<'a> {
    measure: &'a AtomicMeasure,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for PowerIter<'_> {
    type Item = (MapWord, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let word = self.measure.compose(&self.digits);
        let weight = self.digits.iter().map(|&i| self.measure.atoms[i].weight).product();
        // odometer, least significant digit last
        let k = self.measure.len();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < k {
                break;
            }
            self.digits[pos] = 0;
        }
        Some((word, weight))
    }
}

/// Exact N-th convolution power, provided `kᴺ ≤ budget`.
pub fn enumerate_power(measure: &AtomicMeasure, n: usize, budget: u128) -> Result<WordTree<'_>> {
    let branches = measure.branch_count(n);
    if branches > budget {
        return Err(Error::BudgetExceeded { branches, budget });
    }
    Ok(WordTree { measure, depth: n })
}

/// One draw from the N-th convolution power: `n` i.i.d. atoms composed in
/// draw order.
pub fn sample_power(measure: &AtomicMeasure, n: usize, seed: u64) -> MapWord {
    measure.compose(&measure.sample_indices(n, seed))
}

// ---------------------------------------------------------------------------
// Literal and preset parsing

/// Parses a measure literal or preset.
///
/// Accepted forms:
/// - `preset:symmetric(alpha=…,beta=…,a=…,b=…[,w1=…,w2=…,w3=…,w4=…])`
/// - `preset:generators(alpha=…,beta=…,a=…,b=…)`
/// - `preset:translations(alpha=…,beta=…)`
/// - `preset:diffusion(f0=<word>,eps=…[,p0=…,…,p4=…][,n_quad=…])`
/// - `preset:dirac(word=<word>)`
/// - atom lines `weight <w> word <literal>`, separated by newlines or `|`.
pub fn parse_measure(text: &str) -> Result<AtomicMeasure> {
    let text = text.trim();
    match text.strip_prefix("preset:") {
        Some(preset) => parse_preset(preset),
        None => parse_atom_lines(text),
    }
}

fn parse_atom_lines(text: &str) -> Result<AtomicMeasure> {
    let mut atoms = Vec::new();
    for line in text.split(['\n', '|']) {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("weight")
            .ok_or_else(|| Error::BadMeasure(format!("expected `weight <w> word <literal>`, got `{line}`")))?;
        let (w, lit) = rest
            .split_once("word")
            .ok_or_else(|| Error::BadMeasure(format!("missing `word` in `{line}`")))?;
        let weight: f64 = w
            .trim()
            .parse()
            .map_err(|_| Error::BadMeasure(format!("bad weight `{}`", w.trim())))?;
        let word: MapWord = lit.trim().parse().map_err(Error::BadMeasure)?;
        atoms.push((word, weight));
    }
    AtomicMeasure::new(atoms)
}

/// Splits `s` at top-level commas (outside parentheses).
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

struct PresetArgs<'a> {
    name: &'a str,
    args: Vec<(&'a str, &'a str)>,
    used: HashSet<&'a str>,
}

impl<'a> PresetArgs<'a> {
    fn parse(s: &'a str) -> Result<Self> {
        let open = s
            .find('(')
            .ok_or_else(|| Error::BadMeasure(format!("preset `{s}` needs `(…)`")))?;
        let inner = s[open + 1..]
            .trim_end()
            .strip_suffix(')')
            .ok_or_else(|| Error::BadMeasure(format!("preset `{s}` is missing `)`")))?;
        let mut args = Vec::new();
        if !inner.trim().is_empty() {
            for part in split_top_level(inner) {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::BadMeasure(format!("expected key=value, got `{part}`")))?;
                args.push((k.trim(), v.trim()));
            }
        }
        Ok(Self {
            name: s[..open].trim(),
            args,
            used: HashSet::new(),
        })
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a str> {
        let v = self.args.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        if v.is_some() {
            self.used.insert(key);
        }
        v
    }

    fn real(&mut self, key: &'a str, default: Option<f64>) -> Result<f64> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::BadMeasure(format!("`{key}`: bad number `{v}`"))),
            None => default.ok_or_else(|| Error::BadMeasure(format!("preset `{}` needs `{key}`", self.name))),
        }
    }

    fn word(&mut self, key: &'a str) -> Result<MapWord> {
        let v = self
            .raw(key)
            .ok_or_else(|| Error::BadMeasure(format!("preset `{}` needs `{key}`", self.name)))?;
        v.parse().map_err(Error::BadMeasure)
    }

    fn finish(self) -> Result<()> {
        for (k, _) in &self.args {
            if !self.used.contains(k) {
                return Err(Error::BadMeasure(format!("preset `{}` has no key `{k}`", self.name)));
            }
        }
        Ok(())
    }
}

fn parse_preset(s: &str) -> Result<AtomicMeasure> {
    let mut args = PresetArgs::parse(s)?;
    let measure = match args.name {
        "symmetric" => {
            let (alpha, beta) = (args.real("alpha", None)?, args.real("beta", None)?);
            let (a, b) = (args.real("a", None)?, args.real("b", None)?);
            let w = [
                args.real("w1", Some(0.125))?,
                args.real("w2", Some(0.125))?,
                args.real("w3", Some(0.125))?,
                args.real("w4", Some(0.125))?,
            ];
            symmetric_preset(alpha, beta, a, b, w)?
        }
        "generators" => {
            let (alpha, beta) = (args.real("alpha", None)?, args.real("beta", None)?);
            let (a, b) = (args.real("a", None)?, args.real("b", None)?);
            generator_preset(alpha, beta, a, b)?
        }
        "translations" => {
            let (alpha, beta) = (args.real("alpha", None)?, args.real("beta", None)?);
            translation_preset(alpha, beta)?
        }
        "diffusion" => {
            let f0 = args.word("f0")?;
            let eps = args.real("eps", None)?;
            let p = [
                args.real("p0", Some(0.2))?,
                args.real("p1", Some(0.2))?,
                args.real("p2", Some(0.2))?,
                args.real("p3", Some(0.2))?,
                args.real("p4", Some(0.2))?,
            ];
            let n_quad = args.real("n_quad", Some(2.0))?;
            if n_quad < 1.0 || n_quad.fract() != 0.0 {
                return Err(Error::BadMeasure(format!(
                    "n_quad must be a positive integer, got {n_quad}"
                )));
            }
            make_diffusion(&f0, eps, p, n_quad as usize)?
        }
        "dirac" => AtomicMeasure::dirac(args.word("word")?)?,
        other => return Err(Error::BadMeasure(format!("unknown preset `{other}`"))),
    };
    args.finish()?;
    Ok(measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn word(s: &str) -> MapWord {
        s.parse().unwrap()
    }

    fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let stat: f64 = counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
        1.0 - dist.cdf(stat)
    }

    #[test]
    fn degenerate_diffusion_drops_zero_atoms() {
        let m = make_diffusion(&MapWord::identity(), 0.1, [1.0, 0.0, 0.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.atoms()[0].word, MapWord::identity());
        assert_eq!(m.atoms()[0].weight, 1.0);
    }

    #[test]
    fn diffusion_of_cat_layout() {
        let m = make_diffusion(&word("CAT"), 0.1, [0.2; 5], 2).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.atoms()[0].weight, 0.2);
        for a in &m.atoms()[1..] {
            assert_abs_diff_eq!(a.weight, 0.1, epsilon = 1e-15);
        }
        let nodes = m.diffusion().unwrap().nodes();
        assert_abs_diff_eq!(nodes[0], -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(nodes[1], 0.05, epsilon = 1e-15);
        assert_eq!(m.atoms()[1].word.to_string(), "CAT;G1(-0.05)");
        let total: f64 = m.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diffusion_atoms_stay_within_eps() {
        let eps = 0.07;
        let m = make_diffusion(&word("STD(0.5)"), eps, [0.1, 0.3, 0.2, 0.2, 0.2], 5).unwrap();
        for a in &m.atoms()[1..] {
            let atoms = a.word.atoms();
            assert_eq!(atoms.len(), 2);
            assert_eq!(atoms[0], GeneratorAtom::standard(0.5));
            assert!(atoms[1].param.abs() <= eps);
        }
    }

    #[test]
    fn diffusion_rejects_bad_weights() {
        let f0 = word("CAT");
        assert!(matches!(
            make_diffusion(&f0, 0.1, [0.5, 0.5, 0.5, 0.0, 0.0], 2),
            Err(Error::BadWeights(_))
        ));
        assert!(matches!(
            make_diffusion(&f0, 0.1, [1.2, -0.2, 0.0, 0.0, 0.0], 2),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn symmetric_preset_is_uniform_and_inversion_invariant() {
        let m = symmetric_preset(2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0, 0.5, 0.5, [0.125; 4]).unwrap();
        assert_eq!(m.len(), 8);
        assert!(m.weights().iter().all(|&w| w == 0.125));
        let inv = m.inverted().unwrap();
        let mut a: Vec<String> = m.atoms().iter().map(|x| format!("{} {}", x.word, x.weight)).collect();
        let mut b: Vec<String> = inv.atoms().iter().map(|x| format!("{} {}", x.word, x.weight)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_pair_weights() {
        let m = symmetric_preset(0.3, 0.4, 1.0, 2.0, [0.1, 0.1, 0.2, 0.1]).unwrap();
        let find = |lit: &str| m.atoms().iter().find(|a| a.word.to_string() == lit).unwrap().weight;
        assert_eq!(find("G3(1)"), 0.2);
        assert_eq!(find("G3(1)^-1"), 0.2);
        assert!(matches!(
            symmetric_preset(0.3, 0.4, 1.0, 2.0, [0.1; 4]),
            Err(Error::BadWeights(_))
        ));
    }

    #[test]
    fn enumerate_two_atoms_depth_three() {
        let m = AtomicMeasure::new([(word("G1(0.1)"), 0.3), (word("G3(0.2)"), 0.7)]).unwrap();
        let tree = enumerate_power(&m, 3, 100).unwrap();
        let branches: Vec<_> = tree.iter().collect();
        assert_eq!(branches.len(), 8);
        assert_eq!(branches[0].0.to_string(), "G1(0.1);G1(0.1);G1(0.1)");
        assert_eq!(branches[1].0.to_string(), "G1(0.1);G1(0.1);G3(0.2)");
        assert_eq!(branches[7].0.to_string(), "G3(0.2);G3(0.2);G3(0.2)");
        assert_abs_diff_eq!(branches[1].1, 0.3 * 0.3 * 0.7, epsilon = 1e-15);
        let total: f64 = branches.iter().map(|b| b.1).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn dirac_power_is_single_branch() {
        let m = AtomicMeasure::dirac(word("CAT;G3(0.1)")).unwrap();
        let branches: Vec<_> = enumerate_power(&m, 4, 1).unwrap().iter().collect();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].0, word("CAT;G3(0.1)").power(4));
        assert_eq!(branches[0].1, 1.0);
    }

    #[test]
    fn budget_boundary() {
        let m = AtomicMeasure::uniform((1..=5).map(|i| word(&format!("G1(0.{i})"))).collect()).unwrap();
        let tree = enumerate_power(&m, 8, 1_000_000).unwrap();
        assert_eq!(tree.branch_count(), 390_625);
        assert_eq!(tree.iter().count(), 390_625);
        assert!(matches!(
            enumerate_power(&m, 8, 390_624),
            Err(Error::BudgetExceeded { branches: 390_625, .. })
        ));
        assert!(enumerate_power(&m, 8, 390_625).is_ok());
        assert!(matches!(
            enumerate_power(&m, 200, u128::MAX - 1),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn sample_power_dirac_and_determinism() {
        let m = AtomicMeasure::dirac(word("CAT")).unwrap();
        assert_eq!(sample_power(&m, 5, 1), word("CAT").power(5));
        let m = make_diffusion(&word("CAT"), 0.1, [0.2; 5], 2).unwrap();
        assert_eq!(sample_power(&m, 20, 77), sample_power(&m, 20, 77));
        assert_ne!(sample_power(&m, 20, 77), sample_power(&m, 20, 78));
    }

    #[test]
    fn sampled_frequencies_match_weights() {
        let m = AtomicMeasure::new([
            (word("G1(0.1)"), 0.5),
            (word("G2(0.1)"), 0.3),
            (word("CAT"), 0.15),
            (word("G3(1)"), 0.05),
        ])
        .unwrap();
        let idx = m.sample_indices(100_000, 2024);
        let mut counts = vec![0u64; m.len()];
        for i in idx {
            counts[i] += 1;
        }
        let p = chi_square_p(&counts, &m.weights());
        assert!(p > 0.001, "p = {p}, counts {counts:?}");
    }

    #[test]
    fn sampling_agrees_with_enumeration() {
        let m = AtomicMeasure::new([(word("G1(0.1)"), 0.2), (word("G2(0.3)"), 0.5), (word("CAT"), 0.3)]).unwrap();
        let branches: Vec<f64> = enumerate_power(&m, 4, 1000).unwrap().iter().map(|b| b.1).collect();
        let mut counts = vec![0u64; branches.len()];
        for s in 0..100_000u64 {
            let idx = m.sample_indices(4, crate::seed::derive_seed(31, s));
            let branch = idx.iter().fold(0, |acc, &i| acc * 3 + i);
            counts[branch] += 1;
        }
        let p = chi_square_p(&counts, &branches);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn measure_validation() {
        assert!(matches!(
            AtomicMeasure::new([(word("CAT"), 0.5), (word("CAT"), 0.5)]),
            Err(Error::BadMeasure(_))
        ));
        assert!(matches!(
            AtomicMeasure::new([(word("CAT"), 0.9)]),
            Err(Error::BadWeights(_))
        ));
        assert!(matches!(
            AtomicMeasure::dirac(word("STD(1)^-1")),
            Err(Error::UnsupportedInverse(_))
        ));
    }

    #[test]
    fn literal_round_trip() {
        let m = make_diffusion(&word("CAT"), 0.3, [0.2; 5], 3).unwrap();
        let back = parse_measure(&m.to_literal()).unwrap();
        assert_eq!(back, m);
        let piped = parse_measure("weight 0.5 word G1(0.25) | weight 0.5 word G3(0.7);CAT^-1").unwrap();
        assert_eq!(piped.len(), 2);
    }

    #[test]
    fn preset_parsing() {
        let m = parse_measure("preset:symmetric(alpha=0.41421356,beta=0.73205081,a=0.5,b=0.5)").unwrap();
        assert_eq!(m.len(), 8);
        let d = parse_measure("preset:diffusion(f0=G3(0.7);CAT,eps=0.3,n_quad=3)").unwrap();
        assert_eq!(d.len(), 13);
        assert_eq!(d.diffusion().unwrap().f0, word("G3(0.7);CAT"));
        assert_eq!(
            parse_measure("preset:translations(alpha=0.1,beta=0.2)").unwrap().len(),
            2
        );
        assert_eq!(
            parse_measure("preset:generators(alpha=0.1,beta=0.2,a=1,b=1)")
                .unwrap()
                .len(),
            4
        );
        assert_eq!(parse_measure("preset:dirac(word=CAT;CAT)").unwrap().len(), 1);
        assert!(parse_measure("preset:dirac(word=CAT,extra=1)").is_err());
        assert!(parse_measure("preset:nope(a=1)").is_err());
        assert!(parse_measure("preset:symmetric(alpha=0.1)").is_err());
    }
}
