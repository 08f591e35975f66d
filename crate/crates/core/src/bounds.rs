//! Upper bounds on achievable quality: `S` (shift-invariant estimators) and
//! `T` (all estimators, randomized included), for the families where they
//! are computable, plus the sumset averaging lemma for atomic laws.
//!
//! `S` takes the best set built from one 2δ-window per orbit; `T` the best
//! set disjoint from all of its nonzero 2δ-multiple translates. Families
//! outside the registered classes are reported as unavailable rather than
//! approximated.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::distributions::{Distribution, FiniteAtoms};
use crate::error::{Error, Result};
use crate::estimators::{best_window_center, window_mle_estimator, Estimator};
use crate::montecarlo::McConfig;
use crate::quality::{exact_quality_discrete, quality_at};
use crate::threshold::{Boundary, Rational, Threshold, ATOM_TOL};

/// Enumeration cap for sumsets.
pub const SUMSET_LIMIT: u128 = 10_000_000;
pub const SUMSET_MAX_GENERATORS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    S,
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Best window `(center - δ, center + δ)` and the atoms it covers.
    WindowCenter { center: f64, covered: Vec<f64> },
    /// One atom per residue class modulo 2δ.
    Atoms { locations: Vec<f64> },
    Set { description: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub n: usize,
    pub delta: f64,
    pub boundary: Boundary,
    pub value: f64,
    /// Nonzero only for Monte Carlo values.
    pub ci_half_width: f64,
    pub method: String,
    pub s_equals_t_certified: bool,
    pub witness: Option<Witness>,
}

/// Maximal-mass window over sorted atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomWindow {
    pub first: usize,
    pub last: usize,
    pub mass: f64,
    /// Midpoint of the feasible center interval `(z_last - δ, z_first + δ)`.
    pub center: f64,
}

fn fits(atoms: &FiniteAtoms, threshold: &Threshold, i: usize, j: usize) -> bool {
    if let (Some(z), Some(_)) = (atoms.exact_locations(), threshold.exact()) {
        if let Some(v) = threshold.window_fits_exact(z[j] - z[i]) {
            return v;
        }
    }
    let z = atoms.locations();
    threshold.window_fits(z[j] - z[i])
}

/// Slides a window of width 2δ over the sorted atoms and keeps the leftmost
/// one of maximal mass. Masses are summed in atom order.
pub fn best_window(atoms: &FiniteAtoms, threshold: Threshold) -> AtomWindow {
    let p = atoms.masses();
    let z = atoms.locations();
    let mut best: Option<AtomWindow> = None;
    let mut j = 0;
    for i in 0..atoms.len() {
        j = j.max(i);
        while j + 1 < atoms.len() && fits(atoms, &threshold, i, j + 1) {
            j += 1;
        }
        let mass: f64 = p[i..=j].iter().sum();
        if best.as_ref().is_none_or(|b| mass > b.mass + 1e-15) {
            best = Some(AtomWindow { first: i, last: j, mass, center: 0.5 * (z[i] + z[j]) });
        }
    }
    best.expect("atom list is nonempty")
}

/// `S` for one sample: the largest mass of a single window of width 2δ.
pub fn s_bound_one_sample(d: &Distribution, threshold: Threshold) -> Result<BoundReport> {
    let delta = threshold.value();
    let report = |value: f64, method: &str, certified: bool, witness: Witness| BoundReport {
        kind: BoundKind::S,
        n: 1,
        delta,
        boundary: threshold.boundary(),
        value: value.clamp(0.0, 1.0),
        ci_half_width: 0.0,
        method: method.into(),
        s_equals_t_certified: certified,
        witness: Some(witness),
    };
    if let Some(atoms) = d.as_atoms() {
        let w = best_window(atoms, threshold);
        let covered = atoms.locations()[w.first..=w.last].to_vec();
        return Ok(report(
            w.mass,
            "exact sliding window over sorted atoms; optimal for one sample by the sumset lemma",
            false,
            Witness::WindowCenter { center: w.center, covered },
        ));
    }
    let mass = |c: f64| d.cdf(c + delta) - d.cdf(c - delta);
    let traits = d.classify();
    if traits.unimodal || traits.monotone_on_halfline {
        let center = best_window_center(d, &[0.0], delta)?;
        return Ok(report(
            mass(center),
            "window root f(c+δ) = f(c-δ) by bisection (unimodal density)",
            true,
            Witness::WindowCenter { center, covered: Vec::new() },
        ));
    }
    let center = grid_argmax(&mass, d.effective_range(), delta);
    Ok(report(mass(center), "grid search with golden-section refinement", false, Witness::WindowCenter {
        center,
        covered: Vec::new(),
    }))
}

fn grid_argmax(f: &impl Fn(f64) -> f64, (lo, hi): (f64, f64), delta: f64) -> f64 {
    let (lo, hi) = (lo - delta, hi + delta);
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps).map(|i| lo + i as f64 * h).fold(lo, |b, c| if f(c) > f(b) { c } else { b });
    // golden-section on the bracketing cell pair
    let (mut a, mut b) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    if f(mid) >= f(best) {
        mid
    } else {
        best
    }
}

/// Residue classes of the atoms modulo 2δ: two atoms share a class when
/// their difference is a nonzero integer multiple of 2δ.
pub fn residue_classes(atoms: &FiniteAtoms, threshold: Threshold) -> Vec<Vec<usize>> {
    let r = atoms.len();
    let mut parent: Vec<usize> = (0..r).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..r {
        for j in i + 1..r {
            if conflict(atoms, &threshold, i, j) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; r];
    for i in 0..r {
        let top = root(&mut parent, i);
        if slot[top] == usize::MAX {
            slot[top] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[top]].push(i);
    }
    classes
}

/// Whether atoms `i` and `j` may not both lie in a set disjoint from its
/// 2δ-translates.
pub fn conflict(atoms: &FiniteAtoms, threshold: &Threshold, i: usize, j: usize) -> bool {
    if let Some(z) = atoms.exact_locations() {
        if let Some(v) = threshold.is_nonzero_period_multiple_exact(z[j] - z[i]) {
            return v;
        }
    }
    let z = atoms.locations();
    threshold.is_nonzero_period_multiple(z[j] - z[i])
}

/// `T` for one sample over atoms: the heaviest atom of each residue class.
pub fn t_bound_one_sample_discrete(d: &Distribution, threshold: Threshold) -> Result<BoundReport> {
    let atoms = d
        .as_atoms()
        .ok_or_else(|| Error::Unsupported { operation: "t_bound_one_sample_discrete", family: d.family().into() })?;
    let p = atoms.masses();
    let mut chosen: Vec<usize> = residue_classes(atoms, threshold)
        .iter()
        .map(|class| *class.iter().fold(&class[0], |b, i| if p[*i] > p[*b] { i } else { b }))
        .collect();
    chosen.sort_unstable();
    let value: f64 = chosen.iter().map(|&i| p[i]).sum();
    Ok(BoundReport {
        kind: BoundKind::T,
        n: 1,
        delta: threshold.value(),
        boundary: threshold.boundary(),
        value: value.min(1.0),
        ci_half_width: 0.0,
        method: "heaviest atom per residue class modulo 2δ".into(),
        s_equals_t_certified: false,
        witness: Some(Witness::Atoms { locations: chosen.iter().map(|&i| atoms.locations()[i]).collect() }),
    })
}

/// `T = S = 1 - (1 - F(2δ))^n` for densities decreasing on the half-line,
/// attained by `min(x) - δ`.
pub fn t_bound_min_family(d: &Distribution, n: usize, threshold: Threshold) -> Result<BoundReport> {
    if !d.classify().monotone_on_halfline {
        return Err(Error::Unsupported {
            operation: "t_bound_min_family (needs a density decreasing on [0, ∞))",
            family: d.to_string(),
        });
    }
    if n == 0 {
        return Err(Error::param("n", "need at least one sample"));
    }
    let delta = threshold.value();
    let miss = 1.0 - d.cdf(2.0 * delta);
    Ok(BoundReport {
        kind: BoundKind::T,
        n,
        delta,
        boundary: threshold.boundary(),
        value: (1.0 - miss.powi(n as i32)).clamp(0.0, 1.0),
        ci_half_width: 0.0,
        method: "closed form 1 - (1 - F(2δ))^n".into(),
        s_equals_t_certified: true,
        witness: Some(Witness::Set { description: format!("B = {{x : 0 <= min(x) < {}}}", 2.0 * delta) }),
    })
}

/// `S = T` for log-concave densities, evaluated as the Monte Carlo quality
/// of the window estimator, which attains it.
pub fn s_bound_log_concave(d: &Distribution, n: usize, threshold: Threshold, mc: &McConfig) -> Result<BoundReport> {
    if !d.classify().log_concave_strict {
        return Err(Error::Unsupported { operation: "s_bound_log_concave (needs a log-concave density)", family: d.to_string() });
    }
    let e = window_mle_estimator(d, threshold)?;
    let q = quality_at(&e, d, 0.0, threshold, n, mc)?;
    Ok(BoundReport {
        kind: BoundKind::S,
        n,
        delta: threshold.value(),
        boundary: threshold.boundary(),
        value: q.q,
        ci_half_width: q.ci_half_width,
        method: format!("Monte Carlo quality of the window estimator ({} trials)", mc.trials),
        s_equals_t_certified: true,
        witness: Some(Witness::Set { description: "one maximal-likelihood 2δ-window per orbit".into() }),
    })
}

fn check_sumset_size(r: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "k must be at least 1"));
    }
    if r > SUMSET_MAX_GENERATORS {
        return Err(Error::EnumerationLimit { what: "sumset generators", size: r as u128, limit: SUMSET_MAX_GENERATORS as u128 });
    }
    let size = (k as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
    if size > SUMSET_LIMIT {
        return Err(Error::EnumerationLimit { what: "sumset", size, limit: SUMSET_LIMIT });
    }
    Ok(())
}

/// Calls `visit` with every coefficient vector in `{0..k}^r`.
fn for_each_coefficients(r: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut h = vec![0usize; r];
    loop {
        visit(&h);
        let mut pos = 0;
        while pos < r {
            h[pos] += 1;
            if h[pos] < k {
                break;
            }
            h[pos] = 0;
            pos += 1;
        }
        if pos == r {
            return;
        }
    }
}

/// Sorts and merges values closer than [`ATOM_TOL`].
pub fn dedup_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if out.last().is_none_or(|&last| v - last > ATOM_TOL) {
            out.push(v);
        }
    }
    out
}

/// `Y_k = {Σ h_i z_i : 0 <= h_i < k}`, deduplicated.
pub fn sumset_yk(z: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sumset_size(z.len(), k)?;
    let mut sums = Vec::new();
    for_each_coefficients(z.len(), k, |h| sums.push(h.iter().zip(z).map(|(&hi, &zi)| hi as f64 * zi).sum()));
    Ok(dedup_sorted(sums))
}

pub fn sumset_yk_exact(z: &[Rational], k: usize) -> Result<Vec<Rational>> {
    check_sumset_size(z.len(), k)?;
    let mut sums = BTreeSet::new();
    for_each_coefficients(z.len(), k, |h| {
        sums.insert(h.iter().zip(z).fold(Rational::from_integer(0), |acc, (&hi, zi)| acc + *zi * hi as i128));
    });
    Ok(sums.into_iter().collect())
}

/// `|Y + Z|` with the same dedup rule as the sumset.
pub fn minkowski_sum(y: &[f64], z: &[f64]) -> Vec<f64> {
    dedup_sorted(y.iter().flat_map(|a| z.iter().map(move |b| a + b)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub k: usize,
    pub y_size: usize,
    pub sum_size: usize,
    pub s_value: f64,
    pub avg_quality: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Averages the exact one-sample quality of `e` over `θ ∈ Y_k` and compares
/// it with `S · |Y_k + Z| / |Y_k|`. The average upper-bounds `Q(e)`.
pub fn lemma_bound_check(e: &Estimator, d: &Distribution, threshold: Threshold, k: usize) -> Result<LemmaCheck> {
    let atoms =
        d.as_atoms().ok_or_else(|| Error::Unsupported { operation: "lemma_bound_check", family: d.family().into() })?;
    let (y, y_size, sum_size) = match atoms.exact_locations() {
        Some(z) => {
            let y = sumset_yk_exact(z, k)?;
            let sums: BTreeSet<Rational> = y.iter().flat_map(|a| z.iter().map(move |b| a + b)).collect();
            let n = y.len();
            (y.iter().map(crate::threshold::to_f64).collect::<Vec<_>>(), n, sums.len())
        }
        None => {
            let y = sumset_yk(atoms.locations(), k)?;
            let sum_size = minkowski_sum(&y, atoms.locations()).len();
            let n = y.len();
            (y, n, sum_size)
        }
    };
    let s_value = best_window(atoms, threshold).mass;
    let mut total = 0.0;
    for &theta in &y {
        total += exact_quality_discrete(e, d, theta, threshold, 1)?;
    }
    let avg_quality = total / y_size as f64;
    let bound = s_value * sum_size as f64 / y_size as f64;
    Ok(LemmaCheck { k, y_size, sum_size, s_value, avg_quality, bound, holds: avg_quality <= bound + 1e-12 })
}
