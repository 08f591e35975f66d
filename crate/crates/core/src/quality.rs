//! δ-quality of an estimator: the probability of landing strictly within δ
//! of the true shift, at one θ and in the worst case over a θ-grid.
//!
//! Atomic laws are evaluated exactly by enumerating atom tuples; everything
//! else goes through the chunked Monte Carlo engine with Wilson intervals.

use std::io::Write;

use rand::RngCore;
use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::{Estimate, Estimator, Invariance};
use crate::montecarlo::{count_successes, McConfig};
use crate::threshold::{Boundary, Threshold};

/// Largest number of atom tuples enumerated exactly.
pub const EXACT_ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaQuality {
    pub theta: f64,
    pub q: f64,
    pub ci_half_width: f64,
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorstCase {
    pub q: f64,
    pub theta: f64,
    pub ci_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub estimator: String,
    pub distribution: String,
    pub n: usize,
    pub delta: f64,
    pub boundary: Boundary,
    pub per_theta: Vec<ThetaQuality>,
    pub worst_case: WorstCase,
    /// The estimator is not shift-invariant, so the grid minimum only
    /// bounds the true infimum from above.
    pub grid_minimum_is_upper_bound: bool,
}

impl QualityReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// CSV rows `theta,q,ci,exact`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["theta", "q", "ci", "exact"]).map_err(err)?;
        for row in &self.per_theta {
            w.write_record([row.theta.to_string(), row.q.to_string(), row.ci_half_width.to_string(), row.exact.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn check_sample_size(e: &dyn Estimate, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "need at least one sample"));
    }
    match e.sample_size() {
        Some(m) if m != n => Err(Error::SampleSize { expected: m, got: n }),
        _ => Ok(()),
    }
}

/// Monte Carlo estimate of `P(|e(x) - θ| < δ)` for `x ~ μ_θ^n`.
pub fn quality_at(
    e: &dyn Estimate,
    d: &Distribution,
    theta: f64,
    threshold: Threshold,
    n: usize,
    mc: &McConfig,
) -> Result<ThetaQuality> {
    check_sample_size(e, n)?;
    let shifted = d.shifted(theta);
    let p = count_successes(mc, |rng, buf: &mut Vec<f64>| {
        buf.resize(n, 0.0);
        shifted.fill(rng, buf);
        let guess = e.estimate(buf, rng as &mut dyn RngCore)?;
        Ok(threshold.accepts(guess, theta))
    })?;
    Ok(ThetaQuality { theta, q: p.estimate, ci_half_width: p.ci_half_width, exact: false })
}

/// Exact quality at θ over atoms: sums `Π p_{z_i}` over the tuples whose
/// estimate lands within δ.
pub fn exact_quality_discrete(e: &Estimator, d: &Distribution, theta: f64, threshold: Threshold, n: usize) -> Result<f64> {
    check_sample_size(e, n)?;
    let atoms = d
        .as_atoms()
        .ok_or_else(|| Error::Unsupported { operation: "exact_quality_discrete", family: d.family().into() })?;
    let r = atoms.len();
    let size = (r as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > EXACT_ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit { what: "atom tuples", size, limit: EXACT_ENUMERATION_LIMIT });
    }
    let z = atoms.locations();
    let p = atoms.masses();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = theta + z[i];
        }
        if threshold.accepts(e.evaluate(&x)?, theta) {
            total += idx.iter().map(|&i| p[i]).product::<f64>();
        }
        let mut pos = 0;
        while pos < n {
            idx[pos] += 1;
            if idx[pos] < r {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    Ok(total.min(1.0))
}

/// Exact when the law is atomic, the estimator deterministic, and the tuple
/// count small enough; Monte Carlo otherwise.
pub fn point_quality(
    e: &dyn Estimate,
    d: &Distribution,
    theta: f64,
    threshold: Threshold,
    n: usize,
    mc: &McConfig,
) -> Result<ThetaQuality> {
    if let (Some(atoms), Some(det)) = (d.as_atoms(), e.as_deterministic()) {
        let size = (atoms.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size <= EXACT_ENUMERATION_LIMIT {
            let q = exact_quality_discrete(det, d, theta, threshold, n)?;
            return Ok(ThetaQuality { theta, q, ci_half_width: 0.0, exact: true });
        }
    }
    quality_at(e, d, theta, threshold, n, mc)
}

/// 41 points uniform on `[-10δn, 10δn]` followed by `2δi` for `i = 1..=k`.
pub fn default_theta_grid(threshold: Threshold, n: usize, k: usize) -> Vec<f64> {
    let delta = threshold.value();
    let half = 10.0 * delta * n as f64;
    let mut grid: Vec<f64> = (0..41).map(|i| -half + i as f64 * (2.0 * half / 40.0)).collect();
    grid.extend((1..=k).map(|i| 2.0 * delta * i as f64));
    grid
}

/// Worst case of the per-θ quality over a grid.
///
/// For an estimator claiming shift invariance every grid value must agree
/// within three combined interval half-widths; a disagreement is an error.
pub fn quality_inf(
    e: &dyn Estimate,
    d: &Distribution,
    threshold: Threshold,
    n: usize,
    theta_grid: &[f64],
    mc: &McConfig,
) -> Result<QualityReport> {
    if theta_grid.is_empty() {
        return Err(Error::param("theta_grid", "grid is empty"));
    }
    let per_theta =
        theta_grid.iter().map(|&theta| point_quality(e, d, theta, threshold, n, mc)).collect::<Result<Vec<_>>>()?;
    let worst = per_theta.iter().fold(per_theta[0], |w, t| if t.q < w.q { *t } else { w });
    let invariant = e.invariance() == Invariance::ShiftInvariant;
    if invariant {
        for (i, a) in per_theta.iter().enumerate() {
            for b in &per_theta[i + 1..] {
                let slack = 3.0 * (a.ci_half_width + b.ci_half_width) + 1e-12;
                if (a.q - b.q).abs() > slack {
                    return Err(Error::InvarianceViolated {
                        label: e.label().to_string(),
                        detail: format!("Q at θ={} is {}, at θ={} is {}", a.theta, a.q, b.theta, b.q),
                    });
                }
            }
        }
    }
    Ok(QualityReport {
        estimator: e.label().to_string(),
        distribution: d.to_string(),
        n,
        delta: threshold.value(),
        boundary: threshold.boundary(),
        per_theta,
        worst_case: WorstCase { q: worst.q, theta: worst.theta, ci_half_width: worst.ci_half_width },
        grid_minimum_is_upper_bound: !invariant,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragedPerformance {
    /// `(1/k) Σ Q^{2δi}(e)`, an upper bound on `Q(e)`.
    pub average: f64,
    /// `min_i Q^{2δi}(e)`, a sharper bound on the infimum.
    pub minimum: f64,
    pub ci_half_width: f64,
    pub points: Vec<ThetaQuality>,
}

/// Performance averaged over the shifts `θ_i = 2δi`, `i = 1..=k`.
pub fn averaged_performance_bound(
    e: &dyn Estimate,
    d: &Distribution,
    threshold: Threshold,
    n: usize,
    k: usize,
    mc: &McConfig,
) -> Result<AveragedPerformance> {
    if k == 0 {
        return Err(Error::param("k", "k must be at least 1"));
    }
    let delta = threshold.value();
    let points = (1..=k)
        .map(|i| point_quality(e, d, 2.0 * delta * i as f64, threshold, n, mc))
        .collect::<Result<Vec<_>>>()?;
    let average = points.iter().map(|p| p.q).sum::<f64>() / k as f64;
    let minimum = points.iter().map(|p| p.q).fold(f64::INFINITY, f64::min);
    let ci_half_width = points.iter().map(|p| p.ci_half_width).sum::<f64>() / k as f64;
    Ok(AveragedPerformance { average, minimum, ci_half_width, points })
}
