//! The free product `<a, b, c | a² = b² = c² = 1>` and its Cayley graph, the
//! infinite trivalent tree, with exact one-sample quality computations.
//!
//! Here a non-invariant estimator (drop the last letter) reaches quality 2/3
//! while every left- or right-translation estimator is stuck at 1/3 or less.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest ball enumerated by [`quality_inf_ball`].
pub const BALL_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    A,
    B,
    C,
}

impl Letter {
    pub const ALL: [Letter; 3] = [Letter::A, Letter::B, Letter::C];

    fn as_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
            Letter::C => 'c',
        }
    }
}

/// Reduced word: no letter appears twice in a row. The empty word is the
/// identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn generator(l: Letter) -> Self {
        Self(vec![l])
    }

    /// Reduces an arbitrary letter sequence by cancelling adjacent pairs.
    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != w[1])
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn multiply(&self, other: &Word) -> Word {
        // both factors are reduced, so cancellation only happens at the seam
        let mut out = self.0.clone();
        let mut rest = other.0.iter().peekable();
        while let (Some(&l), Some(&&r)) = (out.last(), rest.peek()) {
            if l != r {
                break;
            }
            out.pop();
            rest.next();
        }
        out.extend(rest);
        Word(out)
    }

    /// Reversal, since every generator is an involution.
    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn distance(&self, other: &Word) -> usize {
        self.inverse().multiply(other).len()
    }

    /// `"1"` for the identity, the letters otherwise.
    pub fn pretty(&self) -> String {
        if self.is_empty() {
            "1".into()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Accepts strings over `{a, b, c}`; `""` and `"1"` are the identity.
    /// Unreduced input is rejected.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Word::identity());
        }
        let letters = s
            .chars()
            .map(|ch| match ch {
                'a' => Ok(Letter::A),
                'b' => Ok(Letter::B),
                'c' => Ok(Letter::C),
                _ => Err(Error::param("word", format!("letter {ch:?} is not one of a, b, c"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let w = Word(letters);
        if !w.is_reduced() {
            return Err(Error::param("word", format!("{s:?} is not reduced")));
        }
        Ok(w)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// All reduced words of length at most `radius`, shortest first.
pub fn ball(radius: usize) -> Result<Vec<Word>> {
    let size = ball_size(radius);
    if size > BALL_LIMIT {
        return Err(Error::EnumerationLimit { what: "tree ball", size: size as u128, limit: BALL_LIMIT as u128 });
    }
    let mut out = vec![Word::identity()];
    let mut frontier = 0;
    for _ in 0..radius {
        let end = out.len();
        for i in frontier..end {
            for l in Letter::ALL {
                if out[i].last() != Some(l) {
                    let mut w = out[i].0.clone();
                    w.push(l);
                    out.push(Word(w));
                }
            }
        }
        frontier = end;
    }
    Ok(out)
}

/// `1 + 3(2^radius - 1)`.
pub fn ball_size(radius: usize) -> u64 {
    if radius >= 62 {
        return u64::MAX;
    }
    1 + 3 * ((1u64 << radius) - 1)
}

/// Finitely supported law on vertices with exact rational masses.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeDistribution {
    atoms: Vec<(Word, Rational64)>,
}

impl TreeDistribution {
    pub fn new(atoms: Vec<(Word, Rational64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("tree distribution has no atoms".into()));
        }
        let total: Rational64 = atoms.iter().map(|a| a.1).sum();
        if total != Rational64::from_integer(1) {
            return Err(Error::InvalidDistribution(format!("tree masses sum to {total}, expected 1")));
        }
        if atoms.iter().any(|a| a.1 <= Rational64::from_integer(0)) {
            return Err(Error::InvalidDistribution("tree masses must be positive".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.0 == a.0) {
                return Err(Error::InvalidDistribution(format!("duplicate vertex {}", a.0.pretty())));
            }
        }
        Ok(Self { atoms })
    }

    /// Mass 1/3 on each of the three neighbours a, b, c of the identity.
    pub fn standard() -> Self {
        let third = Rational64::new(1, 3);
        Self { atoms: Letter::ALL.iter().map(|&l| (Word::generator(l), third)).collect() }
    }

    pub fn atoms(&self) -> &[(Word, Rational64)] {
        &self.atoms
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeEstimator {
    /// Drop the last letter; the identity maps to `a`.
    Truncation,
    /// `x -> x·w` (left-invariant).
    LeftTranslate(Word),
    /// `x -> w·x` (right-invariant).
    RightTranslate(Word),
    Table { map: HashMap<Word, Word>, default: Word },
}

impl TreeEstimator {
    pub fn evaluate(&self, x: &Word) -> Word {
        match self {
            TreeEstimator::Truncation => {
                if x.is_empty() {
                    Word::generator(Letter::A)
                } else {
                    Word(x.0[..x.len() - 1].to_vec())
                }
            }
            TreeEstimator::LeftTranslate(w) => x.multiply(w),
            TreeEstimator::RightTranslate(w) => w.multiply(x),
            TreeEstimator::Table { map, default } => map.get(x).unwrap_or(default).clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TreeEstimator::Truncation => "truncation".into(),
            TreeEstimator::LeftTranslate(w) => format!("x·{}", w.pretty()),
            TreeEstimator::RightTranslate(w) => format!("{}·x", w.pretty()),
            TreeEstimator::Table { map, .. } => format!("table({} entries)", map.len()),
        }
    }

    /// Whether the ball minimum over radius >= 2 is the global infimum.
    ///
    /// Truncation: at θ of length >= 2 (and at `b`, `c`) the three samples
    /// are θ's neighbours and only the one through θ's last letter fails,
    /// so the quality depends only on the last letter. Left translations
    /// are invariant under the left action that moves θ, so their quality
    /// is constant.
    pub fn ball_minimum_is_global(&self) -> bool {
        matches!(self, TreeEstimator::Truncation | TreeEstimator::LeftTranslate(_))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("tree quality needs 0 < δ < 1, got {delta}")));
    }
    Ok(())
}

/// `Q^θ(e) = Σ p_z [e(θz) = θ]`; with `δ < 1` success is exact equality.
pub fn exact_quality_tree(e: &TreeEstimator, mu: &TreeDistribution, theta: &Word, delta: f64) -> Result<Rational64> {
    check_delta(delta)?;
    Ok(mu
        .atoms
        .iter()
        .filter(|(z, _)| e.evaluate(&theta.multiply(z)) == *theta)
        .map(|(_, p)| *p)
        .sum())
}

/// Rationals go out as `[numerator, denominator]`.
fn ratio_pair<S: serde::Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    (r.numer(), r.denom()).serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeQualityRow {
    pub theta: Word,
    #[serde(serialize_with = "ratio_pair")]
    pub q: Rational64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallQuality {
    pub estimator: String,
    pub radius: usize,
    #[serde(serialize_with = "ratio_pair")]
    pub q: Rational64,
    pub argmin: Word,
    /// False when the ball minimum is only an upper bound on `Q(e)`.
    pub global: bool,
    pub rows: Vec<TreeQualityRow>,
}

/// Minimum exact quality over all θ in the ball of the given radius.
pub fn quality_inf_ball(e: &TreeEstimator, mu: &TreeDistribution, delta: f64, radius: usize) -> Result<BallQuality> {
    check_delta(delta)?;
    if radius < 2 {
        return Err(Error::param("radius", "ball radius must be at least 2"));
    }
    let rows = ball(radius)?
        .into_iter()
        .map(|theta| exact_quality_tree(e, mu, &theta, delta).map(|q| TreeQualityRow { theta, q }))
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().fold(&rows[0], |w, r| if r.q < w.q { r } else { w });
    Ok(BallQuality {
        estimator: e.label(),
        radius,
        q: worst.q,
        argmin: worst.theta.clone(),
        global: e.ball_minimum_is_global(),
        rows,
    })
}
