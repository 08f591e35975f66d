//! Worst-case threshold-quality location estimation.
//!
//! For a noise law `μ` on the line and a threshold `δ > 0`, the quality of an
//! estimator `e` is `Q(e) = inf_θ P(|e(θ + z) - θ| < δ)` with `z ~ μ^n`. This
//! crate computes qualities (exactly for atoms, by Monte Carlo otherwise),
//! the upper bounds `S` and `T`, the estimators that attain them, and two
//! group-valued variants: the trivalent tree and the circle.

pub mod bounds;
pub mod compact_circle;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod group_tree;
pub mod montecarlo;
pub mod quality;
pub mod threshold;

pub use bounds::{BoundKind, BoundReport, LemmaCheck, Witness};
pub use distributions::{Distribution, FamilyTraits, FiniteAtoms, PiecewiseDensity, ShiftedDistribution};
pub use error::{Error, Result};
pub use estimators::{Estimate, Estimator, Invariance, Optimality, RandomizedEstimator};
pub use montecarlo::{McConfig, Proportion};
pub use quality::{QualityReport, ThetaQuality, WorstCase};
pub use threshold::{parse_rational, Boundary, Rational, Threshold};
