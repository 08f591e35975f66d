//! Report types produced by the subcommands, with CSV, JSON and
//! plain-text renderings.

use std::fmt::Write as _;

use locest_core::bounds::{BoundReport, LemmaCheck};
use locest_core::compact_circle::AveragingCheck;
use locest_core::group_tree::{BallQuality, Word};
use locest_core::QualityReport;
use serde::Serialize;

use crate::config::Format;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundEntry {
    pub name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BoundReport>,
    /// Why the bound is not computed for this instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub distribution: String,
    pub n: usize,
    pub delta: f64,
    pub bounds: Vec<BoundEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub estimator: String,
    pub distribution: String,
    pub check: LemmaCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslateRow {
    pub estimator: String,
    pub word: Word,
    #[serde(serialize_with = "pair")]
    pub q_identity: (i64, i64),
    #[serde(serialize_with = "pair")]
    pub q: (i64, i64),
    pub argmin: Word,
    pub global: bool,
}

fn pair<S: serde::Serializer>(q: &(i64, i64), s: S) -> Result<S::Ok, S::Error> {
    [q.0, q.1].serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeDemoReport {
    pub delta: f64,
    pub radius: usize,
    pub truncation: BallQuality,
    pub translates: Vec<TranslateRow>,
    /// Largest ball minimum over all translation estimators.
    #[serde(serialize_with = "pair")]
    pub best_translate: (i64, i64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub quantity: String,
    pub achieved: f64,
    pub ci_half_width: f64,
    pub reference: f64,
    /// `"="` (agreement within 3 CI, exact when the CI is 0) or `"<="`.
    pub relation: &'static str,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub trials: u64,
    pub seed: u64,
    pub rows: Vec<SuiteRow>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Quality(Vec<QualityReport>),
    Bounds(BoundsReport),
    Lemma(Vec<LemmaReport>),
    Tree(TreeDemoReport),
    Circle(AveragingCheck),
    Suite(SuiteReport),
}

fn num(x: f64) -> String {
    x.to_string()
}

fn ratio_text(q: (i64, i64)) -> String {
    if q.1 == 1 {
        q.0.to_string()
    } else {
        format!("{}/{}", q.0, q.1)
    }
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv(),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Report::Quality(reports) => {
                let mut rows = Vec::new();
                for r in reports {
                    let base = |row: &str, theta: f64, q: f64, ci: f64, exact: bool| {
                        vec![
                            r.estimator.clone(),
                            r.n.to_string(),
                            num(r.delta),
                            row.to_string(),
                            num(theta),
                            num(q),
                            num(ci),
                            exact.to_string(),
                        ]
                    };
                    for t in &r.per_theta {
                        rows.push(base("theta", t.theta, t.q, t.ci_half_width, t.exact));
                    }
                    let w = &r.worst_case;
                    let exact = r.per_theta.iter().all(|t| t.exact);
                    rows.push(base("worst_case", w.theta, w.q, w.ci_half_width, exact));
                }
                csv_table(&["estimator", "n", "delta", "row", "theta", "q", "ci_half_width", "exact"], rows)
            }
            Report::Bounds(b) => {
                let rows = b
                    .bounds
                    .iter()
                    .map(|e| match (&e.report, &e.unavailable) {
                        (Some(r), _) => vec![
                            e.name.to_string(),
                            format!("{:?}", r.kind),
                            r.n.to_string(),
                            num(r.delta),
                            num(r.value),
                            num(r.ci_half_width),
                            r.s_equals_t_certified.to_string(),
                            r.method.clone(),
                        ],
                        (None, reason) => vec![
                            e.name.to_string(),
                            String::new(),
                            b.n.to_string(),
                            num(b.delta),
                            String::new(),
                            String::new(),
                            String::new(),
                            format!("unavailable: {}", reason.clone().unwrap_or_default()),
                        ],
                    })
                    .collect();
                csv_table(&["bound", "kind", "n", "delta", "value", "ci_half_width", "s_equals_t", "method"], rows)
            }
            Report::Lemma(list) => {
                let rows = list
                    .iter()
                    .map(|l| {
                        let c = &l.check;
                        vec![
                            l.estimator.clone(),
                            c.k.to_string(),
                            c.y_size.to_string(),
                            c.sum_size.to_string(),
                            num(c.s_value),
                            num(c.avg_quality),
                            num(c.bound),
                            c.holds.to_string(),
                        ]
                    })
                    .collect();
                csv_table(&["estimator", "k", "y_size", "sum_size", "s_value", "avg_quality", "bound", "holds"], rows)
            }
            Report::Tree(t) => {
                let mut rows: Vec<Vec<String>> = t
                    .truncation
                    .rows
                    .iter()
                    .map(|r| {
                        let q = (*r.q.numer(), *r.q.denom());
                        vec![
                            t.truncation.estimator.clone(),
                            "theta".into(),
                            r.theta.to_string(),
                            ratio_text(q),
                            num(q.0 as f64 / q.1 as f64),
                            t.truncation.global.to_string(),
                        ]
                    })
                    .collect();
                let tq = (*t.truncation.q.numer(), *t.truncation.q.denom());
                rows.push(vec![
                    t.truncation.estimator.clone(),
                    "minimum".into(),
                    t.truncation.argmin.to_string(),
                    ratio_text(tq),
                    num(tq.0 as f64 / tq.1 as f64),
                    t.truncation.global.to_string(),
                ]);
                for r in &t.translates {
                    rows.push(vec![
                        r.estimator.clone(),
                        "minimum".into(),
                        r.argmin.to_string(),
                        ratio_text(r.q),
                        num(r.q.0 as f64 / r.q.1 as f64),
                        r.global.to_string(),
                    ]);
                }
                csv_table(&["estimator", "row", "theta", "q", "q_value", "global"], rows)
            }
            Report::Circle(c) => {
                let mut rows: Vec<Vec<String>> = c
                    .table
                    .iter()
                    .map(|g| vec![c.estimator.clone(), "gamma".into(), num(g.gamma), num(g.q), num(g.ci)])
                    .collect();
                rows.push(vec![c.estimator.clone(), "q_e".into(), num(c.worst_theta), num(c.q_e), num(c.q_e_ci)]);
                rows.push(vec![c.estimator.clone(), "best".into(), num(c.best_gamma), num(c.q_best), num(c.q_best_ci)]);
                let avg_ci = c.table.iter().map(|g| g.ci).sum::<f64>() / c.table.len() as f64;
                rows.push(vec![c.estimator.clone(), "gamma_average".into(), String::new(), num(c.gamma_average), num(avg_ci)]);
                for r in &mut rows {
                    r.push(c.holds.to_string());
                }
                csv_table(&["estimator", "row", "point", "q", "ci_half_width", "holds"], rows)
            }
            Report::Suite(s) => {
                let rows = s
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.scenario.clone(),
                            r.quantity.clone(),
                            num(r.achieved),
                            num(r.ci_half_width),
                            r.relation.to_string(),
                            num(r.reference),
                            r.pass.to_string(),
                        ]
                    })
                    .collect();
                csv_table(&["scenario", "quantity", "achieved", "ci_half_width", "relation", "reference", "pass"], rows)
            }
        }
    }

    /// Short human-readable table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        match self {
            Report::Quality(reports) => {
                let _ = writeln!(s, "{:<40} {:>3} {:>10} {:>10} {:>10}", "estimator", "n", "worst q", "± ci", "at θ");
                for r in reports {
                    let w = &r.worst_case;
                    let _ = writeln!(
                        s,
                        "{:<40} {:>3} {:>10.5} {:>10.5} {:>10}{}",
                        r.estimator,
                        r.n,
                        w.q,
                        w.ci_half_width,
                        w.theta,
                        if r.grid_minimum_is_upper_bound { "  (grid minimum: upper bound on Q)" } else { "" }
                    );
                }
            }
            Report::Bounds(b) => {
                let _ = writeln!(s, "{} with n = {}, δ = {}", b.distribution, b.n, b.delta);
                for e in &b.bounds {
                    match &e.report {
                        Some(r) => {
                            let _ = writeln!(s, "  {:<24} {:?} = {:.6}  ({})", e.name, r.kind, r.value, r.method);
                        }
                        None => {
                            let _ = writeln!(s, "  {:<24} unavailable: {}", e.name, e.unavailable.as_deref().unwrap_or(""));
                        }
                    }
                }
            }
            Report::Lemma(list) => {
                for l in list {
                    let c = &l.check;
                    let _ = writeln!(
                        s,
                        "{}: avg over Y_{} ({} points) = {:.6} <= S·|Y+Z|/|Y| = {:.6}: {}",
                        l.estimator,
                        c.k,
                        c.y_size,
                        c.avg_quality,
                        c.bound,
                        if c.holds { "holds" } else { "VIOLATED" }
                    );
                }
            }
            Report::Tree(t) => {
                let _ = writeln!(s, "tree ball radius {}, δ = {}", t.radius, t.delta);
                for r in t.truncation.rows.iter().take(4) {
                    let _ = writeln!(s, "  truncation  θ = {:<6} Q = {}", r.theta.pretty(), r.q);
                }
                let _ = writeln!(s, "  truncation  Q = {} (global infimum)", t.truncation.q);
                let _ = writeln!(
                    s,
                    "  best of {} translation estimators: Q <= {}",
                    t.translates.len(),
                    ratio_text(t.best_translate)
                );
            }
            Report::Circle(c) => {
                let _ = writeln!(
                    s,
                    "{}: Q(e) <= {:.5} (θ = {}), best s_γ at γ = {}: {:.5}, γ-average {:.5}: {}",
                    c.estimator,
                    c.q_e,
                    c.worst_theta,
                    c.best_gamma,
                    c.q_best,
                    c.gamma_average,
                    if c.holds { "holds" } else { "VIOLATED" }
                );
            }
            Report::Suite(r) => {
                let _ = writeln!(
                    s,
                    "{:<34} {:<22} {:>10} {:>9} {:>3} {:>10} {}",
                    "scenario", "quantity", "achieved", "± ci", "", "reference", "verdict"
                );
                for row in &r.rows {
                    let _ = writeln!(
                        s,
                        "{:<34} {:<22} {:>10.6} {:>9.6} {:>3} {:>10.6} {}",
                        row.scenario,
                        row.quantity,
                        row.achieved,
                        row.ci_half_width,
                        row.relation,
                        row.reference,
                        if row.pass { "ok" } else { "FAIL" }
                    );
                }
            }
        }
        s
    }
}
