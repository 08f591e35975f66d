//! Location estimation on the circle `R/Z`.
//!
//! On a compact group any estimator `e` can be averaged into shift-invariant
//! ones: `s_γ(x) = x₁ ⊖ γ ⊕ e(γ, γ ⊕ (x₂ ⊖ x₁), ...)`. The mean of `Q(s_γ)`
//! over uniform `γ` is the θ-average of `Q^θ(e)`, so the best `s_γ` does at
//! least as well as `e`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::distributions::PiecewiseDensity;
use crate::error::{Error, Result};
use crate::estimators::Invariance;
use crate::montecarlo::{count_successes, McConfig};

/// A point of `[0, 1)`, read modulo 1.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(x: f64) -> Self {
        Self(wrap(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn add(self, other: CirclePoint) -> Self {
        Self::new(self.0 + other.0)
    }

    pub fn sub(self, other: CirclePoint) -> Self {
        Self::new(self.0 - other.0)
    }

    /// Arc length to `other`, in `[0, 1/2]`.
    pub fn distance(self, other: CirclePoint) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Reduces `x` into `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Continuous noise law on the circle, given by a density on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleDistribution {
    density: PiecewiseDensity,
}

impl CircleDistribution {
    pub fn new(density: PiecewiseDensity) -> Result<Self> {
        let (lo, hi) = density.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidDistribution(format!(
                "circle density must live on [0, 1], support is [{lo}, {hi}]"
            )));
        }
        Ok(Self { density })
    }

    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(PiecewiseDensity::new(knots)?)
    }

    pub fn uniform() -> Self {
        Self { density: PiecewiseDensity::new(vec![(0.0, 1.0), (1.0, 1.0)]).expect("valid") }
    }

    pub fn density(&self) -> &PiecewiseDensity {
        &self.density
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density.pdf(wrap(x))
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(rand::distr::Open01);
        wrap(self.density.quantile(u))
    }
}

type CircleRule = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Deterministic estimator on `(R/Z)^n`. Inputs and outputs are in `[0, 1)`.
#[derive(Clone)]
pub struct CircleEstimator {
    label: String,
    n: usize,
    invariance: Invariance,
    rule: CircleRule,
}

impl fmt::Debug for CircleEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleEstimator")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("invariance", &self.invariance)
            .finish()
    }
}

impl CircleEstimator {
    pub fn custom<F>(label: impl Into<String>, n: usize, invariance: Invariance, rule: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), n, invariance, rule: Arc::new(rule) }
    }

    pub fn constant(c: f64, n: usize) -> Self {
        let c = wrap(c);
        Self::custom(format!("constant({c})"), n, Invariance::None, move |_| c)
    }

    pub fn first_sample(n: usize) -> Self {
        Self::custom("first_sample", n, Invariance::ShiftInvariant, |x| x[0])
    }

    /// `x₁ ⊕ c`.
    pub fn biased_first_sample(c: f64, n: usize) -> Self {
        Self::custom(format!("first_sample+{c}"), n, Invariance::ShiftInvariant, move |x| wrap(x[0] + c))
    }

    /// Argument of the mean of `exp(2πi x_k)`; falls back to `x₁` when the
    /// resultant vanishes.
    pub fn circular_mean(n: usize) -> Self {
        Self::custom("circular_mean", n, Invariance::ShiftInvariant, |x| {
            let tau = std::f64::consts::TAU;
            let (s, c) = x.iter().fold((0.0, 0.0), |(s, c), &v| (s + (tau * v).sin(), c + (tau * v).cos()));
            if s.hypot(c) < 1e-12 {
                x[0]
            } else {
                wrap(s.atan2(c) / tau)
            }
        })
    }

    /// Circular mean shifted by `c`.
    pub fn biased_circular_mean(c: f64, n: usize) -> Self {
        let mean = Self::circular_mean(n);
        Self::custom(format!("circular_mean+{c}"), n, Invariance::ShiftInvariant, move |x| wrap((mean.rule)(x) + c))
    }

    /// `x₁ ⊕ offsets[⌊m·x₁⌋]` with `m = offsets.len()`: a step-function bias
    /// that depends on where `x₁` falls, so not shift-invariant.
    pub fn table_warp(offsets: Vec<f64>, n: usize) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::param("offsets", "warp table is empty"));
        }
        let m = offsets.len();
        Ok(Self::custom(format!("table_warp({m})"), n, Invariance::None, move |x| {
            let cell = ((x[0] * m as f64) as usize).min(m - 1);
            wrap(x[0] + offsets[cell])
        }))
    }

    /// `x₁ ⊕ a·sin(2π x₁)`: a position-dependent bias, not shift-invariant.
    pub fn warp(amplitude: f64, n: usize) -> Self {
        Self::custom(format!("warp({amplitude})"), n, Invariance::None, move |x| {
            wrap(x[0] + amplitude * (std::f64::consts::TAU * x[0]).sin())
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn invariance(&self) -> Invariance {
        self.invariance
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::SampleSize { expected: self.n, got: x.len() });
        }
        Ok(wrap((self.rule)(x)))
    }
}

/// The shift-invariant estimator `s_γ` built from `e`.
pub fn s_gamma(e: &CircleEstimator, gamma: f64) -> CircleEstimator {
    let base = e.clone();
    let gamma = wrap(gamma);
    CircleEstimator::custom(
        format!("s_{gamma}[{}]", e.label),
        e.n,
        Invariance::ShiftInvariant,
        move |x| {
            let x1 = x[0];
            // difference first, so the first coordinate is exactly γ
            let moved: Vec<f64> = x.iter().map(|&v| wrap(gamma + (v - x1))).collect();
            wrap(x1 - gamma + (base.rule)(&moved))
        },
    )
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::param("delta", format!("circle threshold needs 0 < δ < 1/2, got {delta}")));
    }
    Ok(())
}

/// Monte Carlo `Q^θ(e)` with strict inequality `d(e(x), θ) < δ`.
pub fn circle_quality_at(
    e: &CircleEstimator,
    d: &CircleDistribution,
    theta: f64,
    delta: f64,
    mc: &McConfig,
) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let target = CirclePoint::new(theta);
    let n = e.n;
    let p = count_successes::<Vec<f64>, _>(mc, |rng, buf| {
        buf.clear();
        buf.extend((0..n).map(|_| wrap(theta + d.draw(rng))));
        let est = CirclePoint::new((e.rule)(buf));
        Ok(est.distance(target) < delta)
    })?;
    Ok((p.estimate, p.ci_half_width))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub q: f64,
    pub ci: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragingCheck {
    pub estimator: String,
    pub n: usize,
    pub delta: f64,
    /// Minimum of `Q^θ(e)` over the θ grid `j / G`.
    pub q_e: f64,
    pub q_e_ci: f64,
    pub worst_theta: f64,
    pub best_gamma: f64,
    pub q_best: f64,
    pub q_best_ci: f64,
    pub gamma_average: f64,
    pub table: Vec<GammaRow>,
    pub holds: bool,
}

/// Grid size used when none is given.
pub const DEFAULT_GRID: usize = 64;

/// Compares `e` with the best of its averages `s_γ`, `γ = j / G`.
pub fn averaging_check(
    e: &CircleEstimator,
    d: &CircleDistribution,
    delta: f64,
    gamma_grid: usize,
    mc: &McConfig,
) -> Result<AveragingCheck> {
    check_delta(delta)?;
    if gamma_grid < 8 {
        return Err(Error::param("gamma_grid", format!("need at least 8 grid points, got {gamma_grid}")));
    }
    let grid: Vec<f64> = (0..gamma_grid).map(|j| j as f64 / gamma_grid as f64).collect();

    let mut q_e = (f64::INFINITY, 0.0, 0.0);
    for &theta in &grid {
        let (q, ci) = circle_quality_at(e, d, theta, delta, mc)?;
        if q < q_e.0 {
            q_e = (q, ci, theta);
        }
    }

    let mut table = Vec::with_capacity(grid.len());
    for &gamma in &grid {
        // s_γ is invariant, so θ = 0 suffices
        let (q, ci) = circle_quality_at(&s_gamma(e, gamma), d, 0.0, delta, mc)?;
        table.push(GammaRow { gamma, q, ci });
    }
    let best = table.iter().fold(&table[0], |b, r| if r.q > b.q { r } else { b }).clone();
    let gamma_average = table.iter().map(|r| r.q).sum::<f64>() / table.len() as f64;

    Ok(AveragingCheck {
        estimator: e.label.clone(),
        n: e.n,
        delta,
        q_e: q_e.0,
        q_e_ci: q_e.1,
        worst_theta: q_e.2,
        best_gamma: best.gamma,
        q_best: best.q,
        q_best_ci: best.ci,
        gamma_average,
        holds: best.q >= q_e.0 - 3.0 * (q_e.1 + best.ci),
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> CircleDistribution {
        CircleDistribution::from_knots(vec![(0.0, 0.0), (0.25, 4.0), (0.5, 0.0)]).unwrap()
    }

    #[test]
    fn arithmetic_mod_one() {
        let a = CirclePoint::new(0.9);
        let b = CirclePoint::new(0.2);
        assert!((a.add(b).value() - 0.1).abs() < 1e-12);
        assert!((b.sub(a).value() - 0.3).abs() < 1e-12);
        assert!((a.distance(b) - 0.3).abs() < 1e-12);
        assert_eq!(CirclePoint::new(-1e-18).value(), 0.0);
        assert!((CirclePoint::new(-0.25).value() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_density_off_the_circle() {
        assert!(CircleDistribution::from_knots(vec![(-0.5, 1.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn s_gamma_is_shift_invariant() {
        let s = s_gamma(&CircleEstimator::warp(0.1, 3), 0.3);
        let x = [0.1, 0.45, 0.8];
        let base = s.evaluate(&x).unwrap();
        for c in [0.05, 0.37, 0.9] {
            let shifted: Vec<f64> = x.iter().map(|v| wrap(v + c)).collect();
            let got = s.evaluate(&shifted).unwrap();
            assert!(CirclePoint::new(got).distance(CirclePoint::new(base + c)) < 1e-12);
        }
    }

    #[test]
    fn s_gamma_agrees_on_its_coset() {
        let s = s_gamma(&CircleEstimator::constant(0.0, 2), 0.3);
        assert!(CirclePoint::new(s.evaluate(&[0.3, 0.5]).unwrap()).distance(CirclePoint::new(0.0)) < 1e-12);
    }

    #[test]
    fn s_gamma_feeds_gamma_exactly_at_cell_edges() {
        let e = CircleEstimator::table_warp(vec![0.0, 0.0, 0.5, 0.0], 1).unwrap();
        let s = s_gamma(&e, 0.5);
        for x1 in [0.1, 0.3, 0.7, 0.123456789] {
            let got = s.evaluate(&[x1]).unwrap();
            assert!(CirclePoint::new(got).distance(CirclePoint::new(x1 + 0.5)) < 1e-12, "x1 = {x1}");
        }
    }

    #[test]
    fn table_warp_steps() {
        let e = CircleEstimator::table_warp(vec![0.0, 0.1, 0.2, 0.3], 1).unwrap();
        assert!((e.evaluate(&[0.3]).unwrap() - 0.4).abs() < 1e-12);
        assert!((e.evaluate(&[0.8]).unwrap() - 0.1).abs() < 1e-12);
        assert!(CircleEstimator::table_warp(vec![], 1).is_err());
    }

    #[test]
    fn s_gamma_of_invariant_estimator_is_itself() {
        let e = CircleEstimator::biased_first_sample(0.2, 2);
        let s = s_gamma(&e, 0.6);
        let x = [0.3, 0.7];
        assert!((s.evaluate(&x).unwrap() - e.evaluate(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn uniform_noise_quality_is_two_delta() {
        // any invariant estimator has quality 2δ under uniform noise
        let mc = McConfig::new(100_000, 5).unwrap();
        let (q, ci) =
            circle_quality_at(&CircleEstimator::first_sample(1), &CircleDistribution::uniform(), 0.7, 0.1, &mc).unwrap();
        assert!((q - 0.2).abs() < 3.0 * ci);
    }

    #[test]
    fn averaging_dominates_constant() {
        let mc = McConfig::new(20_000, 11).unwrap();
        let r = averaging_check(&CircleEstimator::constant(0.0, 1), &tent(), 0.1, 8, &mc).unwrap();
        assert!(r.holds);
        assert!(r.q_e < 0.01);
        // best shift puts the window on the mode: mass of [0.15, 0.35]
        assert!((r.q_best - 0.64).abs() < 3.0 * r.q_best_ci + 0.02);
    }

    #[test]
    fn parameter_validation() {
        let mc = McConfig::new(1000, 1).unwrap();
        let e = CircleEstimator::first_sample(1);
        assert!(averaging_check(&e, &tent(), 0.5, 8, &mc).is_err());
        assert!(averaging_check(&e, &tent(), 0.1, 4, &mc).is_err());
        assert!(e.evaluate(&[0.1, 0.2]).is_err());
    }
}
