use locest_core::bounds::{
    lemma_bound_check, s_bound_log_concave, s_bound_one_sample, t_bound_min_family, t_bound_one_sample_discrete,
};
use locest_core::compact_circle::{averaging_check, CircleDistribution, CircleEstimator};
use locest_core::estimators::{discrete_one_sample_estimator, min_shift_estimator, window_mle_estimator};
use locest_core::group_tree::{
    ball, exact_quality_tree, quality_inf_ball, Rational64, TreeDistribution, TreeEstimator, Word,
};
use locest_core::quality::{exact_quality_discrete, quality_inf};
use locest_core::{Distribution, Estimate, Estimator, FiniteAtoms, Invariance, Rational, Threshold};

use crate::config::{Command, ConfigErrors, ExperimentConfig};
use crate::report::{
    BoundEntry, BoundsReport, LemmaReport, Report, SuiteReport, SuiteRow, TranslateRow, TreeDemoReport,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Core(#[from] locest_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

/// Runs the configured command and returns its report.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    match config.effective_command() {
        Command::Quality => run_quality(config),
        Command::Bounds => run_bounds(config),
        Command::LemmaCheck => run_lemma(config),
        Command::TreeDemo => run_tree(config),
        Command::CircleAvg => run_circle(config),
        Command::PaperSuite => run_suite(config),
    }
}

fn run_quality(c: &ExperimentConfig) -> Result<Report, CliError> {
    let d = c.build_distribution()?;
    let t = c.threshold()?;
    let grid = c.theta_grid()?;
    let mc = c.mc_config();
    let reports = c
        .build_estimators()?
        .iter()
        .map(|e| quality_inf(e.as_ref(), &d, t, c.n, &grid, &mc))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report::Quality(reports))
}

fn entry(name: &'static str, r: locest_core::Result<locest_core::BoundReport>) -> BoundEntry {
    match r {
        Ok(report) => BoundEntry { name, report: Some(report), unavailable: None },
        Err(e) => BoundEntry { name, report: None, unavailable: Some(e.to_string()) },
    }
}

fn unavailable(name: &'static str, reason: &str) -> BoundEntry {
    BoundEntry { name, report: None, unavailable: Some(reason.into()) }
}

fn run_bounds(c: &ExperimentConfig) -> Result<Report, CliError> {
    let d = c.build_distribution()?;
    let t = c.threshold()?;
    let traits = d.classify();
    let mut bounds = Vec::new();
    if c.n == 1 {
        bounds.push(entry("s_one_sample", s_bound_one_sample(&d, t)));
        bounds.push(if d.is_discrete() {
            entry("t_one_sample_discrete", t_bound_one_sample_discrete(&d, t))
        } else {
            unavailable("t_one_sample_discrete", "needs an atoms distribution")
        });
    } else {
        bounds.push(unavailable("s_one_sample", "only computed for n = 1"));
        bounds.push(unavailable("t_one_sample_discrete", "only computed for n = 1"));
    }
    bounds.push(if traits.monotone_on_halfline {
        entry("t_min_family", t_bound_min_family(&d, c.n, t))
    } else {
        unavailable("t_min_family", "needs a density decreasing on [0, ∞)")
    });
    bounds.push(if traits.log_concave_strict {
        entry("s_log_concave", s_bound_log_concave(&d, c.n, t, &c.mc_config()))
    } else {
        unavailable("s_log_concave", "needs a log-concave density")
    });
    Ok(Report::Bounds(BoundsReport { distribution: d.to_string(), n: c.n, delta: t.value(), bounds }))
}

fn run_lemma(c: &ExperimentConfig) -> Result<Report, CliError> {
    let d = c.build_distribution()?;
    let t = c.threshold()?;
    let mut out = Vec::new();
    for e in c.build_estimators()? {
        let det = e.as_deterministic().expect("validated as deterministic");
        let check = lemma_bound_check(det, &d, t, c.lemma.k)?;
        out.push(LemmaReport { estimator: det.label().to_string(), distribution: d.to_string(), check });
    }
    Ok(Report::Lemma(out))
}

fn ratio(q: Rational64) -> (i64, i64) {
    (*q.numer(), *q.denom())
}

fn tree_report(delta: f64, radius: usize, max_word: usize) -> Result<TreeDemoReport, CliError> {
    let mu = TreeDistribution::standard();
    let truncation = quality_inf_ball(&TreeEstimator::Truncation, &mu, delta, radius)?;
    let mut translates = Vec::new();
    for w in ball(max_word)? {
        for e in [TreeEstimator::LeftTranslate(w.clone()), TreeEstimator::RightTranslate(w.clone())] {
            let q_identity = exact_quality_tree(&e, &mu, &Word::identity(), delta)?;
            let ball_min = quality_inf_ball(&e, &mu, delta, radius)?;
            translates.push(TranslateRow {
                estimator: e.label(),
                word: w.clone(),
                q_identity: ratio(q_identity),
                q: ratio(ball_min.q),
                argmin: ball_min.argmin,
                global: ball_min.global,
            });
        }
    }
    let best = translates
        .iter()
        .map(|r| Rational64::new(r.q.0, r.q.1))
        .max()
        .unwrap_or_else(|| Rational64::from_integer(0));
    Ok(TreeDemoReport { delta, radius, truncation, translates, best_translate: ratio(best) })
}

fn run_tree(c: &ExperimentConfig) -> Result<Report, CliError> {
    let delta = c.delta.as_ref().and_then(|d| d.value()).unwrap_or(0.5);
    Ok(Report::Tree(tree_report(delta, c.tree.radius, c.tree.max_word)?))
}

fn run_circle(c: &ExperimentConfig) -> Result<Report, CliError> {
    let d = c.circle_distribution()?;
    let e = c.circle_estimator();
    let delta = c.threshold()?.value();
    Ok(Report::Circle(averaging_check(&e, &d, delta, c.circle.gamma_grid, &c.mc_config())?))
}

fn within(achieved: f64, ci: f64, reference: f64) -> bool {
    (achieved - reference).abs() <= 3.0 * ci + 1e-12
}

/// Every built-in scenario, each compared with its closed form or bound.
fn run_suite(c: &ExperimentConfig) -> Result<Report, CliError> {
    let mc = c.mc_config();
    let mut rows = Vec::new();
    let mut push = |scenario: String, quantity: &str, achieved: f64, ci: f64, reference: f64, relation: &'static str| {
        let pass = match relation {
            "=" => within(achieved, ci, reference),
            _ => achieved <= reference + 3.0 * ci + 1e-12,
        };
        rows.push(SuiteRow { scenario, quantity: quantity.into(), achieved, ci_half_width: ci, reference, relation, pass });
    };

    // trivalent tree
    let tree = tree_report(0.5, 8, 4)?;
    let tq = tree.truncation.q;
    push("tree: truncation".into(), "Q (radius 8)", ratio_f64(ratio(tq)), 0.0, 2.0 / 3.0, "=");
    push("tree: translations |w| <= 4".into(), "max ball Q", ratio_f64(tree.best_translate), 0.0, 1.0 / 3.0, "<=");

    // decreasing density on the half-line
    let expo = Distribution::exponential(1.0)?;
    let quarter = Threshold::new(0.25)?.with_boundary(c.boundary());
    for n in [1usize, 2, 5] {
        let r = quality_inf(&min_shift_estimator(quarter), &expo, quarter, n, &[-5.0, 0.0, 3.0, 100.0], &mc)?;
        let t = t_bound_min_family(&expo, n, quarter)?.value;
        push(format!("exponential(1) min-shift n={n}"), "worst Q vs T", r.worst_case.q, r.worst_case.ci_half_width, t, "=");
    }

    // log-concave: window estimator = mean for the Gaussian
    let gauss = Distribution::gaussian(0.0, 1.0)?;
    let half = Threshold::new(0.5)?.with_boundary(c.boundary());
    let r = quality_inf(&window_mle_estimator(&gauss, half)?, &gauss, half, 4, &[-3.0, 0.0, 7.0], &mc)?;
    let closed = 2.0 * gauss.cdf(1.0) - 1.0;
    push("gaussian window n=4 δ=1/2".into(), "worst Q vs 2Φ(1)-1", r.worst_case.q, r.worst_case.ci_half_width, closed, "=");

    // atoms: one-sample window estimator attains S, and S <= T
    let atoms = Distribution::atoms(vec![(0.0, 0.25), (1.0, 0.35), (10.0, 0.4)])?;
    let t06 = Threshold::new(0.6)?.with_boundary(c.boundary());
    let s = s_bound_one_sample(&atoms, t06)?.value;
    let tb = t_bound_one_sample_discrete(&atoms, t06)?.value;
    let e = discrete_one_sample_estimator(&atoms, t06)?;
    let q = exact_quality_discrete(&e, &atoms, 0.0, t06, 1)?;
    push("atoms {0,1,10}, δ=0.6".into(), "Q(window) vs S", q, 0.0, s, "=");
    push("atoms {0,1,10}, δ=0.6".into(), "S vs T", s, 0.0, tb, "<=");

    // sumset averaging bound
    let two = Distribution::Atoms(FiniteAtoms::exact(vec![
        (Rational::from_integer(0), 0.4),
        (Rational::from_integer(1), 0.6),
    ])?);
    let t14 = Threshold::rational(Rational::new(1, 4))?.with_boundary(c.boundary());
    let guess_one = Estimator::custom("x - 1", Some(1), Invariance::ShiftInvariant, |x| Ok(x[0] - 1.0));
    let l = lemma_bound_check(&guess_one, &two, t14, 4)?;
    push("atoms {0,1}, e(x)=x-1, k=4".into(), "avg over Y_k vs bound", l.avg_quality, 0.0, l.bound, "<=");

    // circle averaging
    let bump = CircleDistribution::from_knots(vec![(0.0, 0.0), (0.25, 4.0), (0.5, 0.0)])?;
    let ac = averaging_check(&CircleEstimator::constant(0.0, 1), &bump, 0.1, 16, &mc)?;
    push("circle: constant on bump".into(), "Q(e) vs best Q(s_γ)", ac.q_e, ac.q_e_ci + ac.q_best_ci, ac.q_best, "<=");
    let uni = averaging_check(&CircleEstimator::warp(0.2, 2), &CircleDistribution::uniform(), 0.1, 16, &mc)?;
    let worst = uni.table.iter().fold(&uni.table[0], |w, g| if (g.q - 0.2).abs() > (w.q - 0.2).abs() { g } else { w });
    push("circle: warp on uniform".into(), "Q(s_γ) vs 2δ", worst.q, worst.ci, 0.2, "=");

    let all_pass = rows.iter().all(|r| r.pass);
    Ok(Report::Suite(SuiteReport { trials: mc.trials, seed: mc.seed, rows, all_pass }))
}

fn ratio_f64(q: (i64, i64)) -> f64 {
    q.0 as f64 / q.1 as f64
}
