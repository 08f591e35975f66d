//! The success threshold δ and the comparison rules used around it.
//!
//! Continuous families never hit the boundary `|e(x) - θ| = δ` with positive
//! probability, but discrete ones do, so every comparison against δ goes
//! through [`Threshold`]. When δ (and the atom locations) are supplied as
//! rationals, the window and residue computations in [`crate::bounds`] run in
//! exact arithmetic; otherwise they fall back to the float tolerances below.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for atom locations and δ.
pub type Rational = Ratio<i128>;

/// Absolute slack (scaled by magnitude) for float comparisons against δ.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Atom locations closer than this are the same point.
pub const ATOM_TOL: f64 = 1e-9;
/// Relative slack when testing whether a difference is an integer multiple of 2δ.
pub const RESIDUE_REL_TOL: f64 = 1e-9;

/// Whether success means `|e - θ| < δ` or `|e - θ| <= δ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    value: f64,
    exact: Option<Rational>,
    boundary: Boundary,
}

impl Threshold {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::param("delta", "delta must be positive"));
        }
        Ok(Self { value: delta, exact: None, boundary: Boundary::Open })
    }

    pub fn rational(delta: Rational) -> Result<Self> {
        if !delta.is_positive() {
            return Err(Error::param("delta", "delta must be positive"));
        }
        Ok(Self { value: to_f64(&delta), exact: Some(delta), boundary: Boundary::Open })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn closed(self) -> Self {
        self.with_boundary(Boundary::Closed)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Rational> {
        self.exact
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Same threshold with δ multiplied by `factor` (exactness is dropped).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(Self::new(self.value * factor)?.with_boundary(self.boundary))
    }

    /// Success test for an estimate against the true shift.
    pub fn accepts(&self, estimate: f64, target: f64) -> bool {
        let tol = BOUNDARY_TOL * 1f64.max(estimate.abs()).max(target.abs());
        within(self.boundary, (estimate - target).abs(), self.value, tol)
    }

    /// Exact success test; `None` when δ has no exact form.
    pub fn accepts_exact(&self, distance: Rational) -> Option<bool> {
        let delta = self.exact?;
        let distance = distance.abs();
        Some(match self.boundary {
            Boundary::Open => distance < delta,
            Boundary::Closed => distance <= delta,
        })
    }

    /// Whether two points `span` apart fit together inside one window
    /// `(c - δ, c + δ)` (or its closure).
    pub fn window_fits(&self, span: f64) -> bool {
        let width = 2.0 * self.value;
        within(self.boundary, span, width, BOUNDARY_TOL * width.max(span).max(1.0))
    }

    pub fn window_fits_exact(&self, span: Rational) -> Option<bool> {
        let width = self.exact? * 2;
        Some(match self.boundary {
            Boundary::Open => span < width,
            Boundary::Closed => span <= width,
        })
    }

    /// Whether `diff` is a nonzero integer multiple of 2δ (float rule).
    pub fn is_nonzero_period_multiple(&self, diff: f64) -> bool {
        let ratio = diff / (2.0 * self.value);
        let k = ratio.round();
        k != 0.0 && (ratio - k).abs() <= RESIDUE_REL_TOL * 1f64.max(ratio.abs())
    }

    pub fn is_nonzero_period_multiple_exact(&self, diff: Rational) -> Option<bool> {
        let ratio = diff / (self.exact? * 2);
        Some(!ratio.is_zero() && ratio.is_integer())
    }
}

fn within(boundary: Boundary, distance: f64, limit: f64, tol: f64) -> bool {
    match boundary {
        Boundary::Open => distance < limit - tol,
        Boundary::Closed => distance <= limit + tol,
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses `"p/q"`, `"p"`, or a terminating decimal such as `"0.75"` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: i128 = p.trim().parse().ok()?;
        let q: i128 = q.trim().parse().ok()?;
        return (q != 0).then(|| Rational::new(p, q));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 30 {
            return None;
        }
        let negative = whole.trim_start().starts_with('-');
        let whole: i128 = if whole.is_empty() || whole == "-" { 0 } else { whole.parse().ok()? };
        let scale = 10i128.checked_pow(frac.len() as u32)?;
        let frac: i128 = frac.parse().ok()?;
        let magnitude = whole.abs().checked_mul(scale)?.checked_add(frac)?;
        let numer = if negative { -magnitude } else { magnitude };
        return Some(Rational::new(numer, scale));
    }
    text.parse::<i128>().ok().map(Rational::from_integer)
}
