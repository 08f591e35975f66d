//! Estimators of the shift θ from an n-sample, including every construction
//! whose optimality the bounds module certifies.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::bounds::best_window;
use crate::distributions::{Distribution, FiniteAtoms};
use crate::error::{Error, Result};
use crate::threshold::{Threshold, ATOM_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariance {
    /// `e(x + c) = e(x) + c` for every sample vector and every `c`.
    ShiftInvariant,
    None,
}

/// What is known about an estimator's optimality for its family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimality {
    Certified,
    /// Certified for a single sample; unverified for larger n.
    OneSampleOnly,
    Unverified,
    NotClaimed,
}

/// Anything that maps a sample vector to a shift estimate.
pub trait Estimate: Send + Sync {
    fn label(&self) -> &str;
    /// Accepted sample count, or `None` for any.
    fn sample_size(&self) -> Option<usize>;
    fn invariance(&self) -> Invariance;
    /// Randomized estimators draw from `rng`; deterministic ones ignore it.
    fn estimate(&self, samples: &[f64], rng: &mut dyn RngCore) -> Result<f64>;
    fn as_deterministic(&self) -> Option<&Estimator> {
        None
    }
}

type Rule = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

#[derive(Clone)]
pub struct Estimator {
    label: String,
    sample_size: Option<usize>,
    invariance: Invariance,
    optimality: Optimality,
    rule: Arc<Rule>,
}

impl fmt::Debug for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Estimator")
            .field("label", &self.label)
            .field("sample_size", &self.sample_size)
            .field("invariance", &self.invariance)
            .field("optimality", &self.optimality)
            .finish()
    }
}

impl Estimator {
    /// Wraps an arbitrary rule. The invariance claim is taken on trust;
    /// [`check_shift_invariance`] tests it.
    pub fn custom<F>(label: impl Into<String>, sample_size: Option<usize>, invariance: Invariance, rule: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self { label: label.into(), sample_size, invariance, optimality: Optimality::NotClaimed, rule: Arc::new(rule) }
    }

    fn with_optimality(mut self, optimality: Optimality) -> Self {
        self.optimality = optimality;
        self
    }

    pub fn optimality(&self) -> Optimality {
        self.optimality
    }

    pub fn evaluate(&self, samples: &[f64]) -> Result<f64> {
        if let Some(n) = self.sample_size {
            if samples.len() != n {
                return Err(Error::SampleSize { expected: n, got: samples.len() });
            }
        }
        if samples.is_empty() {
            return Err(Error::SampleSize { expected: self.sample_size.unwrap_or(1), got: 0 });
        }
        (self.rule)(samples)
    }

    /// The estimator `x -> e(x) + offset`.
    pub fn offset(&self, offset: f64) -> Self {
        let inner = self.clone();
        Self {
            label: format!("{}{:+}", self.label, offset),
            sample_size: self.sample_size,
            invariance: self.invariance,
            optimality: Optimality::NotClaimed,
            rule: Arc::new(move |x| Ok(inner.evaluate(x)? + offset)),
        }
    }
}

impl Estimate for Estimator {
    fn label(&self) -> &str {
        &self.label
    }

    fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    fn invariance(&self) -> Invariance {
        self.invariance
    }

    fn estimate(&self, samples: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.evaluate(samples)
    }

    fn as_deterministic(&self) -> Option<&Estimator> {
        Some(self)
    }
}

/// Always guesses `value`.
pub fn constant(value: f64) -> Estimator {
    Estimator::custom(format!("constant({value})"), None, Invariance::None, move |_| Ok(value))
}

/// Sample mean minus the mean of the base law.
pub fn mean_estimator(d: &Distribution) -> Estimator {
    let center = d.mean();
    Estimator::custom("mean", None, Invariance::ShiftInvariant, move |x| {
        Ok(x.iter().sum::<f64>() / x.len() as f64 - center)
    })
}

/// `min(x) - δ`, optimal for densities decreasing on the half-line.
pub fn min_shift_estimator(threshold: Threshold) -> Estimator {
    let delta = threshold.value();
    Estimator::custom(format!("min_shift(δ={delta})"), None, Invariance::ShiftInvariant, move |x| {
        Ok(x.iter().copied().fold(f64::INFINITY, f64::min) - delta)
    })
    .with_optimality(Optimality::Certified)
}

/// Shift-invariant extension of a rule given on the cross-section
/// `{x : x_1 = 0}`: `e(x) = x_1 - f0(x - x_1)`.
pub fn invariant_extension<F>(f0: F, n: usize) -> Estimator
where
    F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
{
    Estimator::custom("invariant_extension", Some(n), Invariance::ShiftInvariant, move |x| {
        let x1 = x[0];
        let section: Vec<f64> = x.iter().map(|&xi| xi - x1).collect();
        Ok(x1 - f0(&section)?)
    })
}

/// Window-maximizing estimator: on each orbit picks the length-2δ window of
/// largest integrated likelihood.
///
/// With offsets `o_i = x_i - x_1` and `h(t) = Π f(o_i + t)`, the estimate is
/// `x_1 - t*` where `t*` centers the best window. The window mass derivative
/// vanishes where `log h(t+δ) = log h(t-δ)`; for log-concave `f` the
/// difference is nonincreasing in `t`, so bisection finds the lowest root.
pub fn window_mle_estimator(d: &Distribution, threshold: Threshold) -> Result<Estimator> {
    let traits = d.classify();
    if traits.discrete {
        return Err(Error::Unsupported { operation: "window_mle_estimator", family: d.family().into() });
    }
    let optimality = if traits.log_concave_strict {
        Optimality::Certified
    } else if traits.unimodal || traits.monotone_on_halfline {
        Optimality::OneSampleOnly
    } else {
        return Err(Error::Unsupported {
            operation: "window_mle_estimator (needs a unimodal or log-concave density)",
            family: d.to_string(),
        });
    };
    let base = d.clone();
    let delta = threshold.value();
    Ok(Estimator::custom(format!("window_mle(δ={delta})"), None, Invariance::ShiftInvariant, move |x| {
        let x1 = x[0];
        let offsets: Vec<f64> = x.iter().map(|&xi| xi - x1).collect();
        Ok(x1 - best_window_center(&base, &offsets, delta)?)
    })
    .with_optimality(optimality))
}

/// Center `t*` of the window `(t* - δ, t* + δ)` maximizing `∫ h` for the
/// orbit with the given offsets.
pub fn best_window_center(d: &Distribution, offsets: &[f64], delta: f64) -> Result<f64> {
    let (lo_o, hi_o) = offsets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
    let (lo, hi) = d.support();
    // support of h in t
    let (t_lo, t_hi) = (lo - lo_o, hi - hi_o);
    if t_lo > t_hi + ATOM_TOL {
        return Err(Error::Degenerate(format!("sample spread {} exceeds the support width", hi_o - lo_o)));
    }
    let log_h = |t: f64| -> Result<f64> {
        let mut s = 0.0;
        for &o in offsets {
            s += d.log_pdf(o + t)?;
        }
        Ok(s)
    };
    let slope_sign = |c: f64| -> Result<f64> {
        let (a, b) = (c - delta, c + delta);
        if b <= t_lo {
            return Ok(f64::INFINITY);
        }
        if a >= t_hi {
            return Ok(f64::NEG_INFINITY);
        }
        if a <= t_lo && b >= t_hi {
            return Ok(0.0);
        }
        let la = if a < t_lo { f64::NEG_INFINITY } else { log_h(a)? };
        let lb = if b > t_hi { f64::NEG_INFINITY } else { log_h(b)? };
        Ok(match (la.is_finite(), lb.is_finite()) {
            (true, true) => lb - la,
            (false, true) => f64::INFINITY,
            (true, false) => f64::NEG_INFINITY,
            (false, false) => {
                return Err(Error::Degenerate("window never meets positive likelihood".into()));
            }
        })
    };
    let (r_lo, r_hi) = d.effective_range();
    let mut left = t_lo.max(r_lo - hi_o) - 2.0 * delta;
    let mut right = t_hi.min(r_hi - lo_o) + 2.0 * delta;
    if slope_sign(left)? <= 0.0 {
        return Ok(left);
    }
    for _ in 0..300 {
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right || right - left <= 1e-12 {
            break;
        }
        if slope_sign(mid)? > 0.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    Ok(0.5 * (left + right))
}

/// One-sample estimator for atoms: `x - c*` with `c*` the center of a
/// maximal-mass window of the base law.
pub fn discrete_one_sample_estimator(d: &Distribution, threshold: Threshold) -> Result<Estimator> {
    let atoms = require_atoms(d, "discrete_one_sample_estimator")?;
    let center = best_window(atoms, threshold).center;
    Ok(Estimator::custom(format!("discrete_window(c*={center})"), Some(1), Invariance::ShiftInvariant, move |x| {
        Ok(x[0] - center)
    })
    .with_optimality(Optimality::Certified))
}

/// n-sample estimator for atoms with distinct pairwise distances: two
/// distinct sample values pin θ down; identical samples fall back to the
/// one-sample window rule.
pub fn discrete_n_sample_estimator(d: &Distribution, threshold: Threshold, n: usize) -> Result<Estimator> {
    let atoms = require_atoms(d, "discrete_n_sample_estimator")?.clone();
    if n == 0 {
        return Err(Error::param("n", "need at least one sample"));
    }
    if !atoms.has_distinct_pairwise_distances() {
        return Err(Error::Unsupported {
            operation: "discrete_n_sample_estimator (needs distinct pairwise distances)",
            family: d.to_string(),
        });
    }
    let center = best_window(&atoms, threshold).center;
    Ok(Estimator::custom(format!("discrete_mle(n={n})"), Some(n), Invariance::ShiftInvariant, move |x| {
        let x1 = x[0];
        if x.iter().all(|&xi| (xi - x1).abs() <= ATOM_TOL) {
            return Ok(x1 - center);
        }
        atoms
            .locations()
            .iter()
            .map(|&z| x1 - z)
            .find(|&theta| x.iter().all(|&xi| atoms.atom_near(xi - theta).is_some()))
            .ok_or_else(|| Error::InconsistentSamples(x.to_vec()))
    })
    .with_optimality(Optimality::Certified))
}

fn require_atoms<'a>(d: &'a Distribution, operation: &'static str) -> Result<&'a FiniteAtoms> {
    d.as_atoms().ok_or_else(|| Error::Unsupported { operation, family: d.family().into() })
}

/// Finite mixture of deterministic estimators; each evaluation draws one
/// component by weight.
#[derive(Clone, Debug)]
pub struct RandomizedEstimator {
    label: String,
    components: Vec<(Estimator, f64)>,
    cumulative: Vec<f64>,
}

pub fn mixture(components: Vec<(Estimator, f64)>) -> Result<RandomizedEstimator> {
    if components.is_empty() {
        return Err(Error::EmptyMixture);
    }
    if components.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::param("weights", "mixture weights must be positive"));
    }
    let total: f64 = components.iter().map(|c| c.1).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("weights", format!("mixture weights sum to {total}, expected 1")));
    }
    let sizes: Vec<Option<usize>> = components.iter().map(|c| c.0.sample_size).collect();
    if sizes.iter().flatten().any(|s| Some(*s) != sizes.iter().flatten().next().copied()) {
        return Err(Error::param("components", "components accept different sample sizes"));
    }
    let mut acc = 0.0;
    let cumulative = components
        .iter()
        .map(|c| {
            acc += c.1;
            acc
        })
        .collect();
    let label = components.iter().map(|(e, w)| format!("{w}·{}", e.label)).collect::<Vec<_>>().join(" + ");
    Ok(RandomizedEstimator { label: format!("mixture({label})"), components, cumulative })
}

impl RandomizedEstimator {
    pub fn components(&self) -> &[(Estimator, f64)] {
        &self.components
    }

    fn pick(&self, u: f64) -> &Estimator {
        let total = self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u * total);
        &self.components[i.min(self.components.len() - 1)].0
    }
}

impl Estimate for RandomizedEstimator {
    fn label(&self) -> &str {
        &self.label
    }

    fn sample_size(&self) -> Option<usize> {
        self.components.iter().find_map(|c| c.0.sample_size)
    }

    fn invariance(&self) -> Invariance {
        if self.components.iter().all(|c| c.0.invariance == Invariance::ShiftInvariant) {
            Invariance::ShiftInvariant
        } else {
            Invariance::None
        }
    }

    fn estimate(&self, samples: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        let u: f64 = rng.random();
        self.pick(u).evaluate(samples)
    }

    fn as_deterministic(&self) -> Option<&Estimator> {
        match self.components.as_slice() {
            [(only, _)] => Some(only),
            _ => None,
        }
    }
}

/// Largest violation `|e(x + c) - e(x) - c|` over the given probes.
pub fn shift_invariance_defect(e: &Estimator, probes: &[(Vec<f64>, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, c) in probes {
        let shifted: Vec<f64> = x.iter().map(|xi| xi + c).collect();
        let defect = (e.evaluate(&shifted)? - e.evaluate(x)? - c).abs();
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Checks an estimator's invariance claim on probes at tolerance 1e-9.
pub fn check_shift_invariance(e: &Estimator, probes: &[(Vec<f64>, f64)]) -> Result<bool> {
    Ok(e.invariance != Invariance::ShiftInvariant || shift_invariance_defect(e, probes)? <= 1e-9)
}
