//! Base laws on the line, their translates, and the family traits the
//! estimator constructions depend on.
//!
//! Every variant samples by inverse CDF so that a seed fixes the draw
//! regardless of family.

use std::fmt;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::threshold::{Rational, ATOM_TOL};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Linearly interpolated density table. Zero outside the knot range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseDensity {
    knots: Vec<(f64, f64)>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl PiecewiseDensity {
    /// Builds the table, renormalizing if the trapezoid integral is within
    /// 1e-3 of one.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidDistribution("piecewise density needs at least two knots".into()));
        }
        for (i, &(x, f)) in knots.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() || f < 0.0 {
                return Err(Error::InvalidDistribution(format!("knot {i} = ({x}, {f}) is not a finite nonnegative value")));
            }
            if i > 0 && x <= knots[i - 1].0 {
                return Err(Error::InvalidDistribution(format!("knot x-values must be strictly increasing (knot {i})")));
            }
        }
        let total: f64 = knots.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        if (total - 1.0).abs() >= 1e-3 {
            return Err(Error::InvalidDistribution(format!("density integrates to {total}, expected 1")));
        }
        let knots: Vec<(f64, f64)> = knots.into_iter().map(|(x, f)| (x, f / total)).collect();
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in knots.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            cumulative.push(acc);
        }
        Ok(Self { knots, cumulative })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    fn segment(&self, x: f64) -> usize {
        // last i with knots[i].0 <= x, capped so that i + 1 is valid
        let i = self.knots.partition_point(|k| k.0 <= x);
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        let i = self.segment(x);
        let (x0, f0) = self.knots[i];
        let (x1, f1) = self.knots[i + 1];
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let i = self.segment(x);
        let (x0, f0) = self.knots[i];
        let (x1, f1) = self.knots[i + 1];
        let t = x - x0;
        let slope = (f1 - f0) / (x1 - x0);
        (self.cumulative[i] + f0 * t + 0.5 * slope * t * t).min(1.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.cumulative[self.cumulative.len() - 1];
        let target = u.clamp(0.0, 1.0) * total;
        // first segment whose cumulative upper end exceeds the target
        let mut i = self.cumulative.partition_point(|&c| c <= target).saturating_sub(1);
        i = i.min(self.knots.len() - 2);
        let (x0, f0) = self.knots[i];
        let (x1, f1) = self.knots[i + 1];
        let h = x1 - x0;
        let slope = (f1 - f0) / h;
        let rest = (target - self.cumulative[i]).max(0.0);
        // solve f0 t + slope t^2 / 2 = rest in the cancellation-free form
        let disc = (f0 * f0 + 2.0 * slope * rest).max(0.0);
        let denom = f0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * rest / denom } else { 0.0 };
        x0 + t.clamp(0.0, h)
    }

    pub fn mean(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| {
                let ((a, fa), (b, fb)) = (w[0], w[1]);
                (b - a) / 6.0 * (fa * (2.0 * a + b) + fb * (a + 2.0 * b))
            })
            .sum()
    }

    fn is_unimodal(&self) -> bool {
        let f: Vec<f64> = self.knots.iter().map(|k| k.1).collect();
        let peak = f.iter().enumerate().fold(0, |best, (i, &v)| if v > f[best] { i } else { best });
        f[..=peak].windows(2).all(|w| w[1] >= w[0]) && f[peak..].windows(2).all(|w| w[1] <= w[0])
    }

    /// Log-concavity of a piecewise-linear density reduces to positivity in
    /// the interior plus concavity at each knot.
    fn is_log_concave(&self) -> bool {
        let k = &self.knots;
        if k[1..k.len() - 1].iter().any(|&(_, f)| f <= 0.0) {
            return false;
        }
        k.windows(3).all(|w| {
            let left = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let right = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            right <= left + 1e-12 * left.abs().max(1.0)
        })
    }

    fn is_monotone_on_halfline(&self) -> bool {
        self.knots[0].0.abs() <= ATOM_TOL && self.knots.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Purely atomic law on finitely many points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteAtoms {
    locations: Vec<f64>,
    masses: Vec<f64>,
    #[serde(skip)]
    exact: Option<Vec<Rational>>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl FiniteAtoms {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::build(atoms.into_iter().map(|(z, p)| (z, None, p)).collect())
    }

    /// Atoms with exact rational locations.
    pub fn exact(atoms: Vec<(Rational, f64)>) -> Result<Self> {
        Self::build(atoms.into_iter().map(|(z, p)| (crate::threshold::to_f64(&z), Some(z), p)).collect())
    }

    fn build(mut atoms: Vec<(f64, Option<Rational>, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("atom list is empty".into()));
        }
        for &(z, _, p) in &atoms {
            if !z.is_finite() {
                return Err(Error::InvalidDistribution(format!("atom location {z} is not finite")));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidDistribution(format!("atom mass {p} at {z} is outside (0, 1]")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in atoms.windows(2) {
            let duplicate = match (w[0].1, w[1].1) {
                (Some(a), Some(b)) => a == b,
                _ => (w[1].0 - w[0].0).abs() <= ATOM_TOL,
            };
            if duplicate {
                return Err(Error::InvalidDistribution(format!("duplicate atom location {}", w[0].0)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("atom masses sum to {total}, expected 1")));
        }
        let exact = atoms.iter().map(|a| a.1).collect::<Option<Vec<_>>>();
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.2;
                acc
            })
            .collect();
        Ok(Self {
            locations: atoms.iter().map(|a| a.0).collect(),
            masses: atoms.iter().map(|a| a.2).collect(),
            exact,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn exact_locations(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.locations.partition_point(|&z| z <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1].min(1.0)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u * total);
        self.locations[i.min(self.len() - 1)]
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(z, p)| z * p).sum()
    }

    /// Index of the atom within [`ATOM_TOL`] of `x`, if any.
    pub fn atom_near(&self, x: f64) -> Option<usize> {
        let i = self.locations.partition_point(|&z| z < x - ATOM_TOL);
        (i < self.len() && (self.locations[i] - x).abs() <= ATOM_TOL).then_some(i)
    }

    pub fn has_distinct_pairwise_distances(&self) -> bool {
        if let Some(exact) = &self.exact {
            let mut diffs: Vec<Rational> = Vec::new();
            for i in 0..exact.len() {
                for j in i + 1..exact.len() {
                    diffs.push(exact[j] - exact[i]);
                }
            }
            diffs.sort();
            return diffs.windows(2).all(|w| w[0] != w[1]);
        }
        let z = &self.locations;
        let mut diffs: Vec<f64> = Vec::new();
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                diffs.push(z[j] - z[i]);
            }
        }
        diffs.sort_by(f64::total_cmp);
        diffs.windows(2).all(|w| w[1] - w[0] > ATOM_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian { mean: f64, sigma: f64 },
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Piecewise(PiecewiseDensity),
    Atoms(FiniteAtoms),
}

/// Analytic or numerically checked properties of a base law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FamilyTraits {
    pub unimodal: bool,
    /// Log-density concave on the support, so the windowed likelihood has a
    /// single sign change. Piecewise tables qualify when the table is concave.
    pub log_concave_strict: bool,
    pub monotone_on_halfline: bool,
    pub discrete: bool,
    pub distinct_pairwise_distances: bool,
}

impl Distribution {
    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidDistribution(format!("gaussian needs finite mean and sigma > 0 (got {mean}, {sigma})")));
        }
        Ok(Self::Gaussian { mean, sigma })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidDistribution(format!("exponential rate must be positive (got {rate})")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDistribution(format!("uniform needs lo < hi (got {lo}, {hi})")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        PiecewiseDensity::new(knots).map(Self::Piecewise)
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        FiniteAtoms::new(atoms).map(Self::Atoms)
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Exponential { .. } => "exponential",
            Self::Uniform { .. } => "uniform",
            Self::Piecewise(_) => "piecewise",
            Self::Atoms(_) => "atoms",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Atoms(_))
    }

    pub fn as_atoms(&self) -> Option<&FiniteAtoms> {
        match self {
            Self::Atoms(a) => Some(a),
            _ => None,
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::Gaussian { mean, sigma } => {
                let z = (x - mean) / sigma;
                (-0.5 * z * z - LN_SQRT_2PI).exp() / sigma
            }
            Self::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Piecewise(ref p) => p.pdf(x),
            Self::Atoms(_) => return Err(Error::Unsupported { operation: "pdf", family: "atoms".into() }),
        })
    }

    /// `ln f(x)`, computed analytically where possible so that far tails stay
    /// finite. Returns `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        match *self {
            Self::Gaussian { mean, sigma } => {
                let z = (x - mean) / sigma;
                Ok(-0.5 * z * z - LN_SQRT_2PI - sigma.ln())
            }
            Self::Exponential { rate } => Ok(if x < 0.0 { f64::NEG_INFINITY } else { rate.ln() - rate * x }),
            _ => self.pdf(x).map(f64::ln),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, sigma } => 0.5 * erfc(-(x - mean) / (sigma * std::f64::consts::SQRT_2)),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Piecewise(ref p) => p.cdf(x),
            Self::Atoms(ref a) => a.cdf(x),
        }
    }

    /// Inverse CDF. For atoms, the first location whose cumulative mass
    /// exceeds `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, sigma } => mean - sigma * std::f64::consts::SQRT_2 * erfc_inv(2.0 * u),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Piecewise(ref p) => p.quantile(u),
            Self::Atoms(ref a) => a.quantile(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Piecewise(ref p) => p.mean(),
            Self::Atoms(ref a) => a.mean(),
        }
    }

    /// Closed hull of the support; infinite ends where the law has them.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Exponential { .. } => (0.0, f64::INFINITY),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::Piecewise(ref p) => p.support(),
            Self::Atoms(ref a) => (a.locations[0], a.locations[a.len() - 1]),
        }
    }

    /// Finite range outside which the density is negligible for root
    /// bracketing purposes.
    pub fn effective_range(&self) -> (f64, f64) {
        match *self {
            Self::Gaussian { mean, sigma } => (mean - 40.0 * sigma, mean + 40.0 * sigma),
            Self::Exponential { rate } => (0.0, 750.0 / rate),
            _ => self.support(),
        }
    }

    pub fn classify(&self) -> FamilyTraits {
        match self {
            Self::Gaussian { .. } => FamilyTraits { unimodal: true, log_concave_strict: true, ..Default::default() },
            Self::Exponential { .. } => FamilyTraits { monotone_on_halfline: true, ..Default::default() },
            Self::Uniform { lo, .. } => FamilyTraits {
                unimodal: true,
                monotone_on_halfline: *lo == 0.0,
                ..Default::default()
            },
            Self::Piecewise(p) => FamilyTraits {
                unimodal: p.is_unimodal(),
                log_concave_strict: p.is_log_concave(),
                monotone_on_halfline: p.is_monotone_on_halfline(),
                ..Default::default()
            },
            Self::Atoms(a) => FamilyTraits {
                discrete: true,
                distinct_pairwise_distances: a.has_distinct_pairwise_distances(),
                ..Default::default()
            },
        }
    }

    pub fn shifted(&self, theta: f64) -> ShiftedDistribution {
        ShiftedDistribution { base: self.clone(), theta }
    }

    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { mean, sigma } => write!(f, "Gaussian({mean}, {sigma})"),
            Self::Exponential { rate } => write!(f, "Exponential({rate})"),
            Self::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            Self::Piecewise(p) => write!(f, "Piecewise({} knots on [{}, {}])", p.knots.len(), p.support().0, p.support().1),
            Self::Atoms(a) => {
                write!(f, "Atoms{{")?;
                for (i, (z, p)) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{z}:{p}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// The translate μ_θ of a base law.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedDistribution {
    pub base: Distribution,
    pub theta: f64,
}

impl ShiftedDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        self.base.cdf(x - self.theta)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.base.pdf(x - self.theta)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.theta + self.base.quantile(rng.sample(Open01))
    }

    /// Overwrites `out` with fresh draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out {
            *x = self.draw(rng);
        }
    }

    /// `n` draws from a generator seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![0.0; n];
        self.fill(&mut rng, &mut out);
        out
    }
}
