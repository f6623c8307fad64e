//! Generator atoms, composition words and their derivative cocycle.
//!
//! A [`MapWord`] is applied left to right: the first listed atom acts first.
//! The literal syntax is a semicolon-separated atom list such as
//! `G3(0.7);G1(-0.25);CAT`, with a `^-1` suffix marking an inverse atom.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::torus::{wrap_unit, Jacobian2, TorusPoint, UnitTangent};

/// The catalog of maps a word can be built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomKind {
    /// `(x, y) ↦ (x + t, y)`
    G1,
    /// `(x, y) ↦ (x, y + t)`
    G2,
    /// `(x, y) ↦ (x + t·φ(y), y)`
    G3,
    /// `(x, y) ↦ (x, y + t·φ(x))`
    G4,
    /// The linear automorphism `[[2, 1], [1, 1]]`.
    Cat,
    /// Standard-map twist with coupling `K`:
    /// `y' = y + K/(2π)·sin(2πx)`, `x' = x + y'`.
    Std,
    Id,
}

impl AtomKind {
    pub fn name(self) -> &'static str {
        match self {
            AtomKind::G1 => "G1",
            AtomKind::G2 => "G2",
            AtomKind::G3 => "G3",
            AtomKind::G4 => "G4",
            AtomKind::Cat => "CAT",
            AtomKind::Std => "STD",
            AtomKind::Id => "ID",
        }
    }

    pub fn has_param(self) -> bool {
        !matches!(self, AtomKind::Cat | AtomKind::Id)
    }
}

/// One catalog map, possibly inverted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorAtom {
    pub kind: AtomKind,
    /// Shear/translation amount for G1–G4, coupling for STD, 0 otherwise.
    pub param: f64,
    pub inverse: bool,
}

const CAT: Jacobian2 = Jacobian2::new(2.0, 1.0, 1.0, 1.0);
const CAT_INV: Jacobian2 = Jacobian2::new(1.0, -1.0, -1.0, 2.0);

impl GeneratorAtom {
    pub fn new(kind: AtomKind, param: f64) -> Self {
        Self {
            kind,
            param: if kind.has_param() { param } else { 0.0 },
            inverse: false,
        }
    }

    pub fn g1(t: f64) -> Self {
        Self::new(AtomKind::G1, t)
    }

    pub fn g2(t: f64) -> Self {
        Self::new(AtomKind::G2, t)
    }

    pub fn g3(t: f64) -> Self {
        Self::new(AtomKind::G3, t)
    }

    pub fn g4(t: f64) -> Self {
        Self::new(AtomKind::G4, t)
    }

    pub fn cat() -> Self {
        Self::new(AtomKind::Cat, 0.0)
    }

    pub fn standard(k: f64) -> Self {
        Self::new(AtomKind::Std, k)
    }

    pub fn identity() -> Self {
        Self::new(AtomKind::Id, 0.0)
    }

    /// The same atom with its exponent flipped.
    pub fn inverted(self) -> Self {
        Self {
            inverse: !self.inverse,
            ..self
        }
    }

    pub fn is_supported(&self) -> bool {
        !(self.kind == AtomKind::Std && self.inverse)
    }

    /// True when the derivative is the identity everywhere.
    pub fn is_isometry(&self) -> bool {
        matches!(self.kind, AtomKind::G1 | AtomKind::G2 | AtomKind::Id)
    }

    /// Shear or translation amount with the exponent folded in.
    #[inline]
    fn signed_param(&self) -> f64 {
        if self.inverse {
            -self.param
        } else {
            self.param
        }
    }

    /// Image of `(x, y)` and the derivative there. Inverse STD atoms must be
    /// rejected before calling this.
    #[inline]
    pub(crate) fn step(&self, x: f64, y: f64) -> (f64, f64, Jacobian2) {
        match self.kind {
            AtomKind::G1 => (wrap_unit(x + self.signed_param()), y, Jacobian2::IDENTITY),
            AtomKind::G2 => (x, wrap_unit(y + self.signed_param()), Jacobian2::IDENTITY),
            AtomKind::G3 => {
                let t = self.signed_param();
                let (s, c) = (PI * y).sin_cos();
                let shear = t * 2.0 * PI * s * c;
                (wrap_unit(x + t * s * s), y, Jacobian2::new(1.0, shear, 0.0, 1.0))
            }
            AtomKind::G4 => {
                let t = self.signed_param();
                let (s, c) = (PI * x).sin_cos();
                let shear = t * 2.0 * PI * s * c;
                (x, wrap_unit(y + t * s * s), Jacobian2::new(1.0, 0.0, shear, 1.0))
            }
            AtomKind::Cat => {
                if self.inverse {
                    (wrap_unit(x - y), wrap_unit(2.0 * y - x), CAT_INV)
                } else {
                    (wrap_unit(2.0 * x + y), wrap_unit(x + y), CAT)
                }
            }
            AtomKind::Std => {
                debug_assert!(!self.inverse);
                let k = self.param;
                let (s, c) = (2.0 * PI * x).sin_cos();
                let y1 = y + k / (2.0 * PI) * s;
                let kc = k * c;
                (wrap_unit(x + y1), wrap_unit(y1), Jacobian2::new(1.0 + kc, 1.0, kc, 1.0))
            }
            AtomKind::Id => (x, y, Jacobian2::IDENTITY),
        }
    }
}

impl fmt::Display for GeneratorAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if self.kind.has_param() {
            write!(f, "({})", self.param)?;
        }
        if self.inverse {
            f.write_str("^-1")?;
        }
        Ok(())
    }
}

impl FromStr for GeneratorAtom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (body, inverse) = match s.strip_suffix("^-1") {
            Some(b) => (b.trim_end(), true),
            None => (s, false),
        };
        let (name, param) = match body.find('(') {
            Some(open) => {
                let inner = body[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| format!("missing `)` in atom `{s}`"))?;
                let value: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad parameter `{inner}` in atom `{s}`"))?;
                if !value.is_finite() {
                    return Err(format!("non-finite parameter in atom `{s}`"));
                }
                (body[..open].trim(), Some(value))
            }
            None => (body, None),
        };
        let kind = match name {
            "G1" => AtomKind::G1,
            "G2" => AtomKind::G2,
            "G3" => AtomKind::G3,
            "G4" => AtomKind::G4,
            "CAT" => AtomKind::Cat,
            "STD" => AtomKind::Std,
            "ID" => AtomKind::Id,
            other => return Err(format!("unknown atom `{other}`")),
        };
        let param = match (kind.has_param(), param) {
            (true, Some(v)) => v,
            (true, None) => return Err(format!("atom `{name}` needs a parameter")),
            (false, None) => 0.0,
            (false, Some(_)) => return Err(format!("atom `{name}` takes no parameter")),
        };
        Ok(GeneratorAtom { kind, param, inverse })
    }
}

/// A finite composition of generator atoms, first atom applied first.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MapWord {
    atoms: Vec<GeneratorAtom>,
}

impl MapWord {
    pub fn new(atoms: Vec<GeneratorAtom>) -> Self {
        Self { atoms }
    }

    pub fn single(atom: GeneratorAtom) -> Self {
        Self { atoms: vec![atom] }
    }

    pub fn identity() -> Self {
        Self::single(GeneratorAtom::identity())
    }

    pub fn atoms(&self) -> &[GeneratorAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `other ∘ self`: this word acts first.
    pub fn then(&self, other: &MapWord) -> MapWord {
        let mut atoms = Vec::with_capacity(self.len() + other.len());
        atoms.extend_from_slice(&self.atoms);
        atoms.extend_from_slice(&other.atoms);
        MapWord { atoms }
    }

    /// The n-fold self-composition.
    pub fn power(&self, n: usize) -> MapWord {
        let mut atoms = Vec::with_capacity(self.len() * n);
        for _ in 0..n {
            atoms.extend_from_slice(&self.atoms);
        }
        MapWord { atoms }
    }

    pub fn is_isometry(&self) -> bool {
        self.atoms.iter().all(GeneratorAtom::is_isometry)
    }

    pub fn check_supported(&self) -> Result<()> {
        match self.atoms.iter().find(|a| !a.is_supported()) {
            Some(a) => Err(Error::UnsupportedInverse(a.to_string())),
            None => Ok(()),
        }
    }

    pub fn apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        self.check_supported()?;
        let (mut x, mut y) = (p.x(), p.y());
        for atom in &self.atoms {
            let (nx, ny, _) = atom.step(x, y);
            x = nx;
            y = ny;
        }
        Ok(TorusPoint::new(x, y))
    }

    /// Derivative at `p` by the chain rule along the orbit of `p`.
    pub fn derivative(&self, p: TorusPoint) -> Result<Jacobian2> {
        self.apply_with_derivative(p).map(|(_, m)| m)
    }

    pub fn apply_with_derivative(&self, p: TorusPoint) -> Result<(TorusPoint, Jacobian2)> {
        self.check_supported()?;
        let (x, y, m) = self.advance(p.x(), p.y(), Jacobian2::IDENTITY);
        Ok((TorusPoint::new(x, y), m))
    }

    /// Pushes `(x, y)` through the word, left-multiplying `m` by each atom
    /// derivative. The word must be supported.
    #[inline]
    pub(crate) fn advance(&self, mut x: f64, mut y: f64, mut m: Jacobian2) -> (f64, f64, Jacobian2) {
        for atom in &self.atoms {
            let (nx, ny, j) = atom.step(x, y);
            if !atom.is_isometry() {
                m = j.mul(&m);
            }
            x = nx;
            y = ny;
        }
        (x, y, m)
    }

    /// Like [`advance`](Self::advance) but rescales the running product so
    /// that long words cannot overflow. Returns the accumulated log scale:
    /// the true product is `exp(log_scale) · m`.
    pub(crate) fn advance_rescaled(
        &self,
        mut x: f64,
        mut y: f64,
        mut m: Jacobian2,
        mut log_scale: f64,
    ) -> (f64, f64, Jacobian2, f64) {
        for atom in &self.atoms {
            let (nx, ny, j) = atom.step(x, y);
            if !atom.is_isometry() {
                m = j.mul(&m);
                let big = m.max_abs();
                if big > 1e64 {
                    m = m.scale(1.0 / big);
                    log_scale += big.ln();
                }
            }
            x = nx;
            y = ny;
        }
        (x, y, m, log_scale)
    }

    /// `log ‖D f v‖` at the base of `u`.
    pub fn log_norm_growth(&self, u: &UnitTangent) -> Result<f64> {
        let m = self.derivative(u.base)?;
        let (c, s) = u.vector();
        Ok(m.log_norm_along(c, s))
    }

    /// The inverse word: atoms reversed, each exponent flipped.
    pub fn invert(&self) -> Result<MapWord> {
        if let Some(a) = self.atoms.iter().find(|a| a.kind == AtomKind::Std) {
            return Err(Error::UnsupportedInverse(a.to_string()));
        }
        Ok(MapWord {
            atoms: self.atoms.iter().rev().map(|a| a.inverted()).collect(),
        })
    }
}

impl fmt::Display for MapWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{atom}")?;
        }
        Ok(())
    }
}

impl FromStr for MapWord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(MapWord::default());
        }
        s.split(';')
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(MapWord::new)
    }
}

impl Serialize for MapWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
