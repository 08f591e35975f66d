//! TOML experiment configs: parsing, defaulting, validation with field-level
//! diagnostics, and construction of the core objects they describe.

use std::fmt;
use std::path::PathBuf;

use locest_core::compact_circle::{CircleDistribution, CircleEstimator};
use locest_core::estimators::{
    constant, discrete_n_sample_estimator, discrete_one_sample_estimator, mean_estimator, min_shift_estimator,
    mixture, window_mle_estimator,
};
use locest_core::quality::default_theta_grid;
use locest_core::threshold::to_f64;
use locest_core::{
    parse_rational, Boundary, Distribution, Estimate, Estimator, FiniteAtoms, McConfig, Rational, Threshold,
};
use serde::{Deserialize, Serialize};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Quality,
    Bounds,
    LemmaCheck,
    TreeDemo,
    CircleAvg,
    PaperSuite,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Quality => "quality",
            Command::Bounds => "bounds",
            Command::LemmaCheck => "lemma-check",
            Command::TreeDemo => "tree-demo",
            Command::CircleAvg => "circle-avg",
            Command::PaperSuite => "paper-suite",
        };
        f.write_str(s)
    }
}

/// A number as written: integer, float, or `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn is_float(&self) -> bool {
        matches!(self, Num::Float(_))
    }

    fn is_text(&self) -> bool {
        matches!(self, Num::Text(_))
    }

    pub fn exact(&self) -> Option<Rational> {
        match self {
            Num::Int(i) => Some(Rational::from_integer(*i as i128)),
            Num::Float(_) => None,
            Num::Text(s) => parse_rational(s),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Num::Int(i) => Some(*i as f64),
            Num::Float(x) => Some(*x),
            Num::Text(s) => parse_rational(s).map(|r| to_f64(&r)),
        }
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num::Float(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    Exponential {
        #[serde(default = "one")]
        rate: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Piecewise {
        knots: Vec<(f64, f64)>,
    },
    Atoms {
        points: Vec<(Num, Num)>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Mean,
    WindowMle,
    MinShift,
    /// One-sample window rule for `n = 1`, exact recovery otherwise.
    DiscreteMle,
    Constant { value: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub estimator: EstimatorSpec,
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Mean => "mean",
            EstimatorSpec::WindowMle => "window_mle",
            EstimatorSpec::MinShift => "min_shift",
            EstimatorSpec::DiscreteMle => "discrete_mle",
            EstimatorSpec::Constant { .. } => "constant",
            EstimatorSpec::Mixture { .. } => "mixture",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaGridSpec {
    /// Explicit grid; overrides the default grid when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    /// Number of `2δi` points appended to the default grid.
    pub k: usize,
}

impl Default for ThetaGridSpec {
    fn default() -> Self {
        Self { points: None, k: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub trials: u64,
    pub seed: u64,
    pub parallelism: usize,
    pub ci_level: f64,
}

impl Default for McSpec {
    fn default() -> Self {
        let d = McConfig::default();
        Self { trials: d.trials, seed: d.seed, parallelism: d.parallelism, ci_level: d.ci_level }
    }
}

impl McSpec {
    pub fn config(&self) -> McConfig {
        McConfig { trials: self.trials, seed: self.seed, parallelism: self.parallelism, ci_level: self.ci_level }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSpec {
    pub k: usize,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self { k: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSpec {
    pub radius: usize,
    /// Translation estimators `x·w`, `w·x` are listed for every `|w| <= max_word`.
    pub max_word: usize,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self { radius: 8, max_word: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircleEstimatorSpec {
    Constant { value: f64 },
    FirstSample,
    CircularMean,
    BiasedMean { bias: f64 },
    Warp { amplitude: f64 },
    TableWarp { offsets: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleSpec {
    /// Density knots on `[0, 1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<(f64, f64)>>,
    /// Two-column CSV file `x,density`, used when `density` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_file: Option<PathBuf>,
    pub estimator: CircleEstimatorSpec,
    pub gamma_grid: usize,
}

impl Default for CircleSpec {
    fn default() -> Self {
        Self {
            density: None,
            density_file: None,
            estimator: CircleEstimatorSpec::Constant { value: 0.0 },
            gamma_grid: locest_core::compact_circle::DEFAULT_GRID,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Filled from the subcommand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Num>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub closed_interval: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub theta_grid: ThetaGridSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub lemma: LemmaSpec,
    #[serde(default)]
    pub tree: TreeSpec,
    #[serde(default)]
    pub circle: CircleSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_n() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            delta: None,
            n: 1,
            closed_interval: false,
            distribution: None,
            estimator: None,
            estimators: Vec::new(),
            theta_grid: ThetaGridSpec::default(),
            mc: McSpec::default(),
            lemma: LemmaSpec::default(),
            tree: TreeSpec::default(),
            circle: CircleSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

/// One problem with one field of a config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    /// 1-based line of the offending value, when the field is present.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.path, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.path, self.message),
            (None, true) => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.to_string().contains(needle))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Seg {
    Key(String),
    Index(usize),
}

fn render_path(path: &[Seg]) -> String {
    let mut out = String::new();
    for s in path {
        match s {
            Seg::Key(k) if out.is_empty() => out.push_str(k),
            Seg::Key(k) => {
                out.push('.');
                out.push_str(k);
            }
            Seg::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

/// Byte spans of the parsed document, for turning field paths into lines.
struct Locator<'a> {
    text: &'a str,
    root: Option<Spanned<DeTable<'a>>>,
}

impl<'a> Locator<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, root: DeTable::parse(text).ok() }
    }

    fn line_at(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    /// Line of the deepest existing node along `path`.
    fn line(&self, path: &[Seg]) -> Option<usize> {
        let root = self.root.as_ref()?;
        let mut span = None;
        let mut node: Option<&DeValue<'a>> = None;
        for (depth, seg) in path.iter().enumerate() {
            let next = match (depth, seg) {
                (0, Seg::Key(k)) => table_get(root.get_ref(), k),
                (_, Seg::Key(k)) => node.and_then(|n| n.as_table()).and_then(|t| table_get(t, k)),
                (_, Seg::Index(i)) => node.and_then(|n| n.as_array()).and_then(|a| a.iter().nth(*i)),
            };
            match next {
                Some(v) => {
                    span = Some(v.span());
                    node = Some(v.get_ref());
                }
                None => break,
            }
        }
        span.map(|s| self.line_at(s.start))
    }
}

fn table_get<'t, 'a>(t: &'t DeTable<'a>, key: &str) -> Option<&'t Spanned<DeValue<'a>>> {
    t.iter().find(|(k, _)| k.get_ref().as_ref() == key).map(|(_, v)| v)
}

/// Collects field errors against a locator.
struct Diagnostics<'a> {
    locator: Option<&'a Locator<'a>>,
    errors: Vec<FieldError>,
}

impl<'a> Diagnostics<'a> {
    fn push(&mut self, path: &[Seg], message: impl Into<String>) {
        self.errors.push(FieldError {
            path: render_path(path),
            line: self.locator.and_then(|l| l.line(path)),
            message: message.into(),
        });
    }
}

fn key(k: &str) -> Seg {
    Seg::Key(k.into())
}

/// Parses and validates a TOML config. Every problem found is reported,
/// each with its field path and line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let locator = Locator::new(text);
    let config = parse_unvalidated(text)?;
    let mut diags = Diagnostics { locator: Some(&locator), errors: Vec::new() };
    check(&config, &mut diags);
    if diags.errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(diags.errors))
    }
}

/// Syntax and schema only; semantic checks are left to
/// [`ExperimentConfig::validate_with_source`].
pub fn parse_unvalidated(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| Locator::new(text).line_at(s.start));
        ConfigErrors(vec![FieldError { path: String::new(), line, message: e.message().trim().to_string() }])
    })
}

/// Serializes a config back to TOML.
pub fn to_toml(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("configs always serialize")
}

impl ExperimentConfig {
    pub fn effective_command(&self) -> Command {
        self.command.unwrap_or(Command::Quality)
    }

    /// Validates without line information (for configs built in code or
    /// changed by flag overrides).
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut diags = Diagnostics { locator: None, errors: Vec::new() };
        check(self, &mut diags);
        if diags.errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(diags.errors))
        }
    }

    /// Validates a config derived from `source` (for example after flag
    /// overrides), pointing errors at lines of `source` where possible.
    pub fn validate_with_source(&self, source: &str) -> Result<(), ConfigErrors> {
        let locator = Locator::new(source);
        let mut diags = Diagnostics { locator: Some(&locator), errors: Vec::new() };
        check(self, &mut diags);
        if diags.errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(diags.errors))
        }
    }

    pub fn mc_config(&self) -> McConfig {
        self.mc.config()
    }

    pub fn boundary(&self) -> Boundary {
        if self.closed_interval {
            Boundary::Closed
        } else {
            Boundary::Open
        }
    }

    /// Whether δ and the atom locations are all exact (integers or `"p/q"`).
    fn exact_mode(&self) -> bool {
        let mut nums: Vec<&Num> = self.delta.iter().collect();
        if let Some(DistributionSpec::Atoms { points }) = &self.distribution {
            nums.extend(points.iter().map(|p| &p.0));
        }
        nums.iter().any(|n| n.is_text()) && !nums.iter().any(|n| n.is_float())
    }

    pub fn threshold(&self) -> Result<Threshold, ConfigErrors> {
        self.validate()?;
        Ok(build_threshold(self).expect("validated"))
    }

    pub fn build_distribution(&self) -> Result<Distribution, ConfigErrors> {
        self.validate()?;
        Ok(build_distribution(self, self.distribution.as_ref().expect("validated")).expect("validated"))
    }

    pub fn estimator_specs(&self) -> Vec<&EstimatorSpec> {
        self.estimator.iter().chain(&self.estimators).collect()
    }

    pub fn build_estimators(&self) -> Result<Vec<Box<dyn Estimate>>, ConfigErrors> {
        let d = self.build_distribution()?;
        let t = self.threshold()?;
        Ok(self.estimator_specs().into_iter().map(|s| build_estimator(s, &d, t, self.n).expect("validated")).collect())
    }

    pub fn theta_grid(&self) -> Result<Vec<f64>, ConfigErrors> {
        let t = self.threshold()?;
        Ok(self.theta_grid.points.clone().unwrap_or_else(|| default_theta_grid(t, self.n, self.theta_grid.k)))
    }

    pub fn circle_distribution(&self) -> Result<CircleDistribution, ConfigErrors> {
        self.validate()?;
        Ok(build_circle_distribution(&self.circle).expect("validated"))
    }

    pub fn circle_estimator(&self) -> CircleEstimator {
        build_circle_estimator(&self.circle.estimator, self.n).expect("validated")
    }
}

fn build_threshold(c: &ExperimentConfig) -> Result<Threshold, String> {
    let delta = c.delta.as_ref().ok_or("delta is required")?;
    let t = if c.exact_mode() {
        let r = delta.exact().ok_or_else(|| format!("cannot read {delta:?} as a rational"))?;
        Threshold::rational(r)
    } else {
        let v = delta.value().ok_or_else(|| format!("cannot read {delta:?} as a number"))?;
        Threshold::new(v)
    };
    t.map(|t| t.with_boundary(c.boundary())).map_err(|_| "delta must be positive".to_string())
}

fn build_distribution(c: &ExperimentConfig, spec: &DistributionSpec) -> Result<Distribution, String> {
    let d = match spec {
        DistributionSpec::Gaussian { mean, sigma } => Distribution::gaussian(*mean, *sigma),
        DistributionSpec::Exponential { rate } => Distribution::exponential(*rate),
        DistributionSpec::Uniform { lo, hi } => Distribution::uniform(*lo, *hi),
        DistributionSpec::Piecewise { knots } => Distribution::piecewise(knots.clone()),
        DistributionSpec::Atoms { points } => {
            let masses = points
                .iter()
                .map(|p| p.1.value().ok_or_else(|| format!("cannot read mass {:?}", p.1)))
                .collect::<Result<Vec<_>, _>>()?;
            let total: f64 = masses.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(format!("atom masses sum to {total}, expected 1"));
            }
            if c.exact_mode() {
                let locs = points
                    .iter()
                    .map(|p| p.0.exact().ok_or_else(|| format!("cannot read location {:?}", p.0)))
                    .collect::<Result<Vec<_>, _>>()?;
                FiniteAtoms::exact(locs.into_iter().zip(masses).collect()).map(Distribution::Atoms)
            } else {
                let locs = points
                    .iter()
                    .map(|p| p.0.value().ok_or_else(|| format!("cannot read location {:?}", p.0)))
                    .collect::<Result<Vec<_>, _>>()?;
                Distribution::atoms(locs.into_iter().zip(masses).collect())
            }
        }
    };
    d.map_err(|e| e.to_string())
}

fn build_estimator(spec: &EstimatorSpec, d: &Distribution, t: Threshold, n: usize) -> Result<Box<dyn Estimate>, String> {
    Ok(match spec {
        EstimatorSpec::Mixture { components } => {
            let parts = components
                .iter()
                .map(|c| build_deterministic(&c.estimator, d, t, n).map(|e| (e, c.weight)))
                .collect::<Result<Vec<_>, _>>()?;
            Box::new(mixture(parts).map_err(|e| e.to_string())?)
        }
        other => Box::new(build_deterministic(other, d, t, n)?),
    })
}

fn build_deterministic(spec: &EstimatorSpec, d: &Distribution, t: Threshold, n: usize) -> Result<Estimator, String> {
    let e = match spec {
        EstimatorSpec::Mean => Ok(mean_estimator(d)),
        EstimatorSpec::WindowMle => window_mle_estimator(d, t),
        EstimatorSpec::MinShift => Ok(min_shift_estimator(t)),
        EstimatorSpec::DiscreteMle if n == 1 => discrete_one_sample_estimator(d, t),
        EstimatorSpec::DiscreteMle => discrete_n_sample_estimator(d, t, n),
        EstimatorSpec::Constant { value } => Ok(constant(*value)),
        EstimatorSpec::Mixture { .. } => return Err("mixtures cannot be nested".into()),
    };
    e.map_err(|e| e.to_string())
}

fn build_circle_distribution(c: &CircleSpec) -> Result<CircleDistribution, String> {
    let knots = match (&c.density, &c.density_file) {
        (Some(k), _) => k.clone(),
        (None, Some(path)) => read_density_file(path)?,
        (None, None) => return Err("circle-avg needs circle.density or circle.density_file".into()),
    };
    CircleDistribution::from_knots(knots).map_err(|e| e.to_string())
}

/// Reads `x,density` rows; a non-numeric first row is taken as a header.
pub fn read_density_file(path: &std::path::Path) -> Result<Vec<(f64, f64)>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut knots = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed: Option<(f64, f64)> = (|| Some((row.get(0)?.parse().ok()?, row.get(1)?.parse().ok()?)))();
        match parsed {
            Some(k) => knots.push(k),
            None if i == 0 => continue,
            None => return Err(format!("{}: row {} is not two numbers", path.display(), i + 1)),
        }
    }
    Ok(knots)
}

fn build_circle_estimator(spec: &CircleEstimatorSpec, n: usize) -> Result<CircleEstimator, String> {
    Ok(match spec {
        CircleEstimatorSpec::Constant { value } => CircleEstimator::constant(*value, n),
        CircleEstimatorSpec::FirstSample => CircleEstimator::first_sample(n),
        CircleEstimatorSpec::CircularMean => CircleEstimator::circular_mean(n),
        CircleEstimatorSpec::BiasedMean { bias } => CircleEstimator::biased_circular_mean(*bias, n),
        CircleEstimatorSpec::Warp { amplitude } => CircleEstimator::warp(*amplitude, n),
        CircleEstimatorSpec::TableWarp { offsets } => {
            CircleEstimator::table_warp(offsets.clone(), n).map_err(|e| e.to_string())?
        }
    })
}

fn check(c: &ExperimentConfig, diags: &mut Diagnostics<'_>) {
    let cmd = c.effective_command();

    if let Err(e) = c.mc.config().validate() {
        diags.push(&[key("mc")], e.to_string());
    }
    if c.n == 0 {
        diags.push(&[key("n")], "n must be at least 1");
    }

    // rational and float literals may not meet in the exact-arithmetic group
    let mut group: Vec<(Vec<Seg>, &Num)> = c.delta.iter().map(|d| (vec![key("delta")], d)).collect();
    if let Some(DistributionSpec::Atoms { points }) = &c.distribution {
        for (i, p) in points.iter().enumerate() {
            group.push((vec![key("distribution"), key("points"), Seg::Index(i), Seg::Index(0)], &p.0));
        }
    }
    let mixing = group.iter().any(|g| g.1.is_text()) && group.iter().any(|g| g.1.is_float());
    if mixing {
        for (path, num) in group.iter().filter(|g| g.1.is_float()) {
            diags.push(path, format!("float literal {num:?} mixed with \"p/q\" rationals; write it as a rational"));
        }
    }
    for (path, num) in &group {
        if let Num::Text(s) = num {
            if parse_rational(s).is_none() {
                diags.push(path, format!("{s:?} is not a number or \"p/q\" rational"));
            }
        }
    }

    let needs_delta = matches!(cmd, Command::Quality | Command::Bounds | Command::LemmaCheck | Command::CircleAvg);
    let threshold = match (&c.delta, needs_delta) {
        (None, true) => {
            diags.push(&[key("delta")], format!("delta is required for {cmd}"));
            None
        }
        (None, false) => None,
        (Some(_), _) if mixing => None,
        (Some(_), _) => match build_threshold(c) {
            Ok(t) => Some(t),
            Err(msg) => {
                diags.push(&[key("delta")], msg);
                None
            }
        },
    };
    if cmd == Command::CircleAvg {
        if let Some(t) = threshold {
            if t.value() >= 0.5 {
                diags.push(&[key("delta")], "circle-avg needs delta < 1/2");
            }
        }
    }

    let needs_distribution = matches!(cmd, Command::Quality | Command::Bounds | Command::LemmaCheck);
    let distribution = match (&c.distribution, needs_distribution) {
        (None, true) => {
            diags.push(&[key("distribution")], format!("a distribution is required for {cmd}"));
            None
        }
        (None, false) => None,
        (Some(_), _) if mixing => None,
        (Some(spec), _) => match build_distribution(c, spec) {
            Ok(d) => Some(d),
            Err(msg) => {
                diags.push(&[key("distribution")], msg);
                None
            }
        },
    };

    let specs = c.estimator_specs();
    if matches!(cmd, Command::Quality | Command::LemmaCheck) && specs.is_empty() {
        diags.push(&[key("estimator")], format!("an estimator is required for {cmd}"));
    }
    if let (Some(d), Some(t)) = (&distribution, threshold) {
        let paths = c
            .estimator
            .iter()
            .map(|_| vec![key("estimator")])
            .chain((0..c.estimators.len()).map(|i| vec![key("estimators"), Seg::Index(i)]));
        for (spec, path) in specs.iter().zip(paths) {
            if let Err(msg) = build_estimator(spec, d, t, c.n) {
                diags.push(&path, msg);
            } else if cmd == Command::LemmaCheck && (matches!(spec, EstimatorSpec::Mixture { .. }) || c.n != 1) {
                diags.push(&path, "lemma-check needs a deterministic one-sample estimator (n = 1)");
            }
        }
    }
    if cmd == Command::LemmaCheck {
        if let Some(d) = &distribution {
            if !d.is_discrete() {
                diags.push(&[key("distribution")], "lemma-check needs an atoms distribution");
            }
        }
        if c.lemma.k == 0 {
            diags.push(&[key("lemma"), key("k")], "k must be at least 1");
        }
    }
    if let Some(points) = &c.theta_grid.points {
        if points.is_empty() {
            diags.push(&[key("theta_grid"), key("points")], "grid is empty");
        }
    }

    if cmd == Command::TreeDemo {
        if c.tree.radius < 2 {
            diags.push(&[key("tree"), key("radius")], "radius must be at least 2");
        }
        if c.tree.max_word > c.tree.radius {
            diags.push(&[key("tree"), key("max_word")], "max_word may not exceed radius");
        }
        if let Some(delta) = &c.delta {
            if !delta.value().is_some_and(|v| v > 0.0 && v < 1.0) {
                diags.push(&[key("delta")], "tree-demo needs 0 < delta < 1");
            }
        }
    }
    if cmd == Command::CircleAvg {
        if let Err(msg) = build_circle_distribution(&c.circle) {
            diags.push(&[key("circle"), key("density")], msg);
        }
        if let Err(msg) = build_circle_estimator(&c.circle.estimator, c.n.max(1)) {
            diags.push(&[key("circle"), key("estimator")], msg);
        }
        if c.circle.gamma_grid < 8 {
            diags.push(&[key("circle"), key("gamma_grid")], "gamma_grid must be at least 8");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN_SHIFT: &str = r#"
command = "quality"
delta = 0.25
n = 2

[distribution]
family = "exponential"
rate = 1.0

[estimator]
kind = "min_shift"
"#;

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(MIN_SHIFT).unwrap();
        assert_eq!(c.mc.trials, 100_000);
        assert_eq!(c.mc.seed, 42);
        assert_eq!(c.theta_grid, ThetaGridSpec::default());
        assert_eq!(c.theta_grid().unwrap().len(), 51);
        assert_eq!(c.output.format, Format::Csv);
        assert!(!c.closed_interval);
    }

    #[test]
    fn negative_delta_is_a_field_error() {
        let err = parse_config(&MIN_SHIFT.replace("delta = 0.25", "delta = -1.0")).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].path, "delta");
        assert_eq!(err.0[0].line, Some(3));
        assert!(err.0[0].message.contains("delta must be positive"));
    }

    #[test]
    fn bad_mass_sum_names_the_sum() {
        let text = r#"
delta = 0.5
[distribution]
family = "atoms"
points = [[0, 0.5], [1, 0.4]]
[estimator]
kind = "discrete_mle"
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.mentions("sum to 0.9"), "{err}");
        assert_eq!(err.0[0].line, Some(3));
    }

    #[test]
    fn rational_float_mixing_is_rejected() {
        let text = r#"
delta = "1/4"
[distribution]
family = "atoms"
points = [["0", 0.5], [0.5, 0.5]]
[estimator]
kind = "discrete_mle"
"#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.0.len(), 1, "{err}");
        assert_eq!(err.0[0].path, "distribution.points[1][0]");
        assert_eq!(err.0[0].line, Some(5));
    }

    #[test]
    fn rationals_give_exact_arithmetic() {
        let text = r#"
delta = "1/4"
[distribution]
family = "atoms"
points = [[0, "1/3"], ["1/2", "2/3"]]
[estimator]
kind = "discrete_mle"
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.threshold().unwrap().exact(), Some(Rational::new(1, 4)));
        let d = c.build_distribution().unwrap();
        assert_eq!(d.as_atoms().unwrap().exact_locations().unwrap()[1], Rational::new(1, 2));
    }

    #[test]
    fn unknown_family_and_fields_are_reported_with_lines() {
        let err = parse_config("delta = 1.0\n[distribution]\nfamily = \"cauchy\"\n").unwrap_err();
        assert!(err.mentions("cauchy"), "{err}");
        assert_eq!(err.0[0].line, Some(3));
        let err = parse_config("delta = 1.0\ntrails = 5\n").unwrap_err();
        assert!(err.mentions("trails"), "{err}");
    }

    #[test]
    fn several_errors_at_once() {
        let text = r#"
delta = -2
n = 0
[mc]
trials = 10
[distribution]
family = "gaussian"
sigma = -1
"#;
        let err = parse_config(text).unwrap_err();
        let paths: Vec<&str> = err.0.iter().map(|e| e.path.as_str()).collect();
        for p in ["mc", "n", "delta", "distribution", "estimator"] {
            assert!(paths.contains(&p), "missing {p} in {err}");
        }
    }

    #[test]
    fn round_trip() {
        let texts = [
            MIN_SHIFT.to_string(),
            r#"
command = "quality"
delta = "1/2"
n = 1
closed_interval = true
[distribution]
family = "atoms"
points = [[0, 0.25], ["3/2", 0.35], [10, 0.4]]
[[estimators]]
kind = "discrete_mle"
[[estimators]]
kind = "mixture"
components = [{ weight = 0.5, estimator = { kind = "constant", value = 1.5 } }, { weight = 0.5, estimator = { kind = "discrete_mle" } }]
[theta_grid]
points = [-1.0, 0.0, 2.5]
[mc]
trials = 5000
seed = 9
parallelism = 3
[output]
format = "json"
path = "out.json"
"#
            .to_string(),
            r#"
command = "circle-avg"
delta = 0.1
[circle]
density = [[0.0, 0.0], [0.5, 2.0], [1.0, 0.0]]
estimator = { kind = "table_warp", offsets = [0.0, 0.1] }
gamma_grid = 16
"#
            .to_string(),
        ];
        for text in texts {
            let c = parse_config(&text).unwrap();
            let again = parse_config(&to_toml(&c)).unwrap();
            assert_eq!(again, c, "\n{}", to_toml(&c));
        }
    }

    #[test]
    fn tree_demo_needs_nothing() {
        let c = parse_config("command = \"tree-demo\"\n").unwrap();
        assert_eq!(c.effective_command(), Command::TreeDemo);
        assert_eq!(c.tree, TreeSpec::default());
    }

    #[test]
    fn lemma_check_rejects_continuous_laws() {
        let text = "command = \"lemma-check\"\ndelta = 1.0\n[distribution]\nfamily = \"gaussian\"\n[estimator]\nkind = \"mean\"\n";
        assert!(parse_config(text).unwrap_err().mentions("atoms distribution"));
    }
}
