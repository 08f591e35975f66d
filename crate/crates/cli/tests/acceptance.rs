//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p locest-cli --test acceptance`.

use std::time::{Duration, Instant};

use locest_cli::config::parse_config;
use locest_cli::{run, Report};
use locest_core::bounds::{
    lemma_bound_check, s_bound_one_sample, sumset_yk, t_bound_min_family, t_bound_one_sample_discrete,
};
use locest_core::compact_circle::{averaging_check, s_gamma, wrap, CircleDistribution, CircleEstimator, CirclePoint};
use locest_core::estimators::{
    constant, discrete_n_sample_estimator, discrete_one_sample_estimator, invariant_extension, mean_estimator,
    min_shift_estimator, window_mle_estimator,
};
use locest_core::group_tree::{ball, Letter, Rational64, Word};
use locest_core::quality::{exact_quality_discrete, quality_at, quality_inf};
use locest_core::{Distribution, Estimate, Estimator, FiniteAtoms, Invariance, McConfig, Rational, Threshold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn th(d: f64) -> Threshold {
    Threshold::new(d).unwrap()
}

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

/// `erf` by its Maclaurin series; accurate to ~1e-15 for |x| <= 2.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for k in 1..60 {
        term *= -x * x / k as f64;
        sum += term / (2 * k + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

/// Direct simulation of `min(x) - δ` under Exponential(1) with an
/// unrelated generator and sampler (`-ln U`).
fn min_shift_oracle(n: usize, delta: f64, trials: u64, seed: u64) -> (f64, f64) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let m = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).fold(f64::INFINITY, f64::min);
        hits += u64::from((m - delta - 0.0).abs() < delta);
    }
    let p = hits as f64 / trials as f64;
    (p, 1.96 * (p * (1.0 - p) / trials as f64).sqrt() + 1.0 / trials as f64)
}

/// Heaviest atom subset with no two locations a nonzero multiple of 2δ
/// apart.
fn brute_force_t(z: &[Rational], p: &[f64], two_delta: Rational) -> f64 {
    let r = z.len();
    let clash = |i: usize, j: usize| {
        let q = (z[j] - z[i]) / two_delta;
        q.is_integer() && q != Rational::from_integer(0)
    };
    (0u32..1 << r)
        .filter(|mask| {
            (0..r).all(|i| mask >> i & 1 == 0 || (i + 1..r).all(|j| mask >> j & 1 == 0 || !clash(i, j)))
        })
        .map(|mask| (0..r).filter(|i| mask >> i & 1 == 1).map(|i| p[i]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Atoms on the lattice `Z/4 ∩ [0, 8]` with `δ = 1/2`.
fn lattice_instance(rng: &mut ChaCha8Rng, r: usize) -> (Distribution, Threshold) {
    let mut slots: Vec<i128> = Vec::new();
    while slots.len() < r {
        let s = rng.random_range(0..=32);
        if !slots.contains(&s) {
            slots.push(s);
        }
    }
    let w: Vec<u32> = (0..r).map(|_| rng.random_range(1..=10)).collect();
    let total: u32 = w.iter().sum();
    let atoms = slots.iter().zip(&w).map(|(&s, &w)| (Rational::new(s, 4), w as f64 / total as f64)).collect();
    (Distribution::Atoms(FiniteAtoms::exact(atoms).unwrap()), Threshold::rational(Rational::new(1, 2)).unwrap())
}

/// One-sample estimator guessing `x - z_j`, `j` a salted hash of `x`.
fn table_estimator(d: &Distribution, salt: u64) -> Estimator {
    let z = d.as_atoms().unwrap().locations().to_vec();
    Estimator::custom(format!("table#{salt}"), Some(1), Invariance::None, move |x| {
        let key = ((x[0] * 1e6).round() as i64 as u64) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let h = key.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(29).wrapping_mul(0x94D0_49BB_1331_11EB);
        Ok(x[0] - z[(h % z.len() as u64) as usize])
    })
}

// ---------------------------------------------------------------- criteria

fn ac1_tree() -> Outcome {
    let start = Instant::now();
    let c = parse_config("command = \"tree-demo\"\n[tree]\nradius = 8\nmax_word = 4\n").unwrap();
    let Report::Tree(t) = run(&c).map_err(|e| e.to_string())? else { return Err("wrong report".into()) };
    let one = Rational64::from_integer(1);
    let two_thirds = Rational64::new(2, 3);
    let third = Rational64::new(1, 3);
    let special = [Word::identity(), Word::generator(Letter::A)];
    ensure(t.truncation.rows.len() == 766, || format!("{} rows in the radius-8 ball", t.truncation.rows.len()))?;
    for r in &t.truncation.rows {
        let want = if special.contains(&r.theta) { one } else { two_thirds };
        ensure(r.q == want, || format!("Q at θ = {} is {}, expected {want}", r.theta.pretty(), r.q))?;
    }
    ensure(t.truncation.q == two_thirds && t.truncation.global, || format!("global Q = {}", t.truncation.q))?;
    ensure(t.translates.len() == 2 * 46, || format!("{} translation estimators", t.translates.len()))?;
    for r in &t.translates {
        let q = Rational64::new(r.q.0, r.q.1);
        let q1 = Rational64::new(r.q_identity.0, r.q_identity.1);
        ensure(q <= third && q1 <= third, || format!("{}: Q = {q}, Q^1 = {q1}", r.estimator))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("Q = 1 at {{1, a}}, 2/3 on the other 764 vertices; 92 translations <= 1/3; {elapsed:.2?}"))
}

fn ac2_min_shift() -> Outcome {
    let start = Instant::now();
    let expo = Distribution::exponential(1.0).unwrap();
    let delta = 0.25;
    let mc = McConfig::new(1_000_000, 2024).unwrap().with_parallelism(threads());
    let pinned = [(1usize, 0.39347), (2, 0.63212), (5, 0.91792)];
    let mut notes = Vec::new();
    for (n, approx) in pinned {
        let closed = 1.0 - (-2.0 * delta * n as f64).exp();
        ensure((closed - approx).abs() < 5e-6, || format!("closed form {closed} vs pinned {approx}"))?;
        let (oracle, oracle_ci) = min_shift_oracle(n, delta, 1_000_000, 99 + n as u64);
        ensure((oracle - closed).abs() <= 3.0 * oracle_ci, || format!("oracle {oracle} disagrees with {closed}"))?;
        let r = quality_inf(&min_shift_estimator(th(delta)), &expo, th(delta), n, &[-5.0, 0.0, 3.0, 100.0], &mc)
            .map_err(|e| e.to_string())?;
        let w = &r.worst_case;
        ensure((w.q - closed).abs() <= 3.0 * w.ci_half_width, || {
            format!("n={n}: worst {} vs {closed} (ci {})", w.q, w.ci_half_width)
        })?;
        notes.push(format!("n={n}: {:.5}±{:.5}", w.q, w.ci_half_width));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.2?}", notes.join(", ")))
}

fn ac3_gaussian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap = 0.0f64;
    for i in 0..1000 {
        let sigma = [0.5, 1.0, 2.0][i % 3];
        let n = rng.random_range(1..=8);
        let g = Distribution::gaussian(rng.random_range(-2.0..2.0), sigma).unwrap();
        let delta = rng.random_range(0.05..2.0);
        let theta = rng.random_range(-50.0..50.0);
        let x = g.shifted(theta).sample(rng.random(), n);
        let w = window_mle_estimator(&g, th(delta)).unwrap().evaluate(&x).map_err(|e| e.to_string())?;
        let m = mean_estimator(&g).evaluate(&x).unwrap();
        worst_gap = worst_gap.max((w - m).abs());
    }
    ensure(worst_gap < 1e-6, || format!("window and mean differ by {worst_gap}"))?;

    let oracle = erf_series(std::f64::consts::FRAC_1_SQRT_2);
    ensure((oracle - 0.68269).abs() < 5e-6, || format!("oracle 2Φ(1)-1 = {oracle}"))?;
    let g = Distribution::gaussian(0.0, 1.0).unwrap();
    let mc = McConfig::new(200_000, 5).unwrap().with_parallelism(threads());
    let mut notes = Vec::new();
    for e in [window_mle_estimator(&g, th(0.5)).unwrap(), mean_estimator(&g)] {
        let q = quality_at(&e, &g, 1.7, th(0.5), 4, &mc).map_err(|e| e.to_string())?;
        ensure((q.q - oracle).abs() <= 3.0 * q.ci_half_width, || format!("{}: {} vs {oracle}", e.label(), q.q))?;
        notes.push(format!("{:.5}", q.q));
    }
    Ok(format!("max |window - mean| = {worst_gap:.1e}; Q(n=4, δ=1/2) = {} vs {oracle:.5}", notes.join(" / ")))
}

fn ac4_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..25 {
        let r = rng.random_range(1..=5);
        let (d, t) = lattice_instance(&mut rng, r);
        let s = s_bound_one_sample(&d, t).map_err(|e| e.to_string())?.value;
        let tv = t_bound_one_sample_discrete(&d, t).map_err(|e| e.to_string())?.value;
        ensure(s <= tv, || format!("{d}: S = {s} > T = {tv}"))?;

        let e = discrete_one_sample_estimator(&d, t).unwrap();
        let y = sumset_yk(d.as_atoms().unwrap().locations(), 6).map_err(|e| e.to_string())?;
        let worst =
            y.iter().map(|&theta| exact_quality_discrete(&e, &d, theta, t, 1).unwrap()).fold(f64::INFINITY, f64::min);
        ensure((worst - s).abs() < 1e-12, || format!("{d}: worst over Y_6 = {worst}, S = {s}"))?;
    }
    for r in 1..=12 {
        for _ in 0..3 {
            let (d, t) = lattice_instance(&mut rng, r);
            let a = d.as_atoms().unwrap();
            let want = brute_force_t(a.exact_locations().unwrap(), a.masses(), Rational::from_integer(1));
            let got = t_bound_one_sample_discrete(&d, t).unwrap().value;
            ensure((got - want).abs() < 1e-12, || format!("{d}: T = {got}, brute force {want}"))?;
        }
    }
    Ok("25 instances S <= T and worst over Y_6 = S; T = brute force for r = 1..12".into())
}

fn ac5_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut tightest = f64::INFINITY;
    for _ in 0..10 {
        let r = rng.random_range(1..=4);
        let (d, t) = lattice_instance(&mut rng, r);
        for salt in 0..100 {
            let k = rng.random_range(1..=5);
            let c = lemma_bound_check(&table_estimator(&d, salt), &d, t, k).map_err(|e| e.to_string())?;
            ensure(c.holds && c.avg_quality <= c.bound + 1e-12, || {
                format!("{d}, k={k}: avg {} > bound {}", c.avg_quality, c.bound)
            })?;
            tightest = tightest.min(c.bound - c.avg_quality);
        }
    }
    Ok(format!("1000 checks hold, smallest slack {tightest:.4}"))
}

fn ac6_circle() -> Outcome {
    let start = Instant::now();
    let densities = [
        ("uniform", CircleDistribution::uniform()),
        ("bump", CircleDistribution::from_knots(vec![(0.0, 0.0), (0.25, 4.0), (0.5, 0.0)]).unwrap()),
        ("skewed", CircleDistribution::from_knots(vec![(0.0, 0.1), (0.4, 1.7), (0.6, 1.5), (1.0, 0.1)]).unwrap()),
    ];
    let n = 2;
    let estimators = [
        CircleEstimator::constant(0.0, n),
        CircleEstimator::constant(0.6, n),
        CircleEstimator::biased_circular_mean(0.05, n),
        CircleEstimator::table_warp(vec![0.0, 0.12, -0.05, 0.3, 0.08, -0.2, 0.02, 0.15], n).unwrap(),
        CircleEstimator::warp(0.1, n),
    ];
    let mc = McConfig::new(100_000, 66).unwrap().with_parallelism(threads());
    let delta = 0.1;
    let mut uniform_checks = 0;
    for (name, d) in &densities {
        for e in &estimators {
            let r = averaging_check(e, d, delta, 16, &mc).map_err(|e| e.to_string())?;
            ensure(r.holds, || format!("{name}/{}: best {} < Q(e) {}", e.label(), r.q_best, r.q_e))?;
            let avg_ci = r.table.iter().map(|g| g.ci).sum::<f64>() / r.table.len() as f64;
            ensure(r.gamma_average >= r.q_e - 3.0 * (r.q_e_ci + avg_ci), || {
                format!("{name}/{}: γ-average {} < Q(e) {}", e.label(), r.gamma_average, r.q_e)
            })?;
            if *name == "uniform" {
                for g in &r.table {
                    uniform_checks += 1;
                    ensure((g.q - 2.0 * delta).abs() <= 3.0 * g.ci, || {
                        format!("{}: Q(s_γ) at γ = {} is {} (ci {})", e.label(), g.gamma, g.q, g.ci)
                    })?;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("15 checks hold; {uniform_checks} uniform Q(s_γ) within 3 CI of 0.2; {elapsed:.2?}"))
}

fn ac7_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    // shift invariance of every invariant estimator
    let g = Distribution::gaussian(0.0, 1.0).unwrap();
    let x_exp = Distribution::exponential(1.0).unwrap();
    let atoms = Distribution::atoms(vec![(0.0, 0.25), (1.0, 0.35), (10.0, 0.4)]).unwrap();
    let bump = Distribution::piecewise(vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]).unwrap();
    let invariant: Vec<(Estimator, usize)> = vec![
        (mean_estimator(&g), 4),
        (min_shift_estimator(th(0.25)), 3),
        (window_mle_estimator(&g, th(0.5)).unwrap(), 5),
        (window_mle_estimator(&x_exp, th(0.25)).unwrap(), 3),
        (window_mle_estimator(&bump, th(0.3)).unwrap(), 2),
        (discrete_one_sample_estimator(&atoms, th(0.6)).unwrap(), 1),
        (invariant_extension(|o: &[f64]| Ok(0.3 * o.iter().sum::<f64>()), 3), 3),
    ];
    for (e, n) in &invariant {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..*n).map(|_| rng.random_range(-0.4..0.4)).collect();
            let c = rng.random_range(-1e6..1e6);
            let moved: Vec<f64> = x.iter().map(|v| v + c).collect();
            let defect = e.evaluate(&moved).unwrap() - e.evaluate(&x).unwrap() - c;
            ensure(defect.abs() <= 1e-9, || format!("{}: shift defect {defect}", e.label()))?;
        }
    }
    let dn = discrete_n_sample_estimator(&atoms, th(0.6), 3).unwrap();
    let a = atoms.as_atoms().unwrap();
    for _ in 0..10_000 {
        let theta = rng.random_range(-100.0..100.0);
        let x: Vec<f64> = (0..3).map(|_| theta + a.quantile(rng.random::<f64>())).collect();
        if x.iter().any(|&v| (v - x[0]).abs() > 1e-9) {
            let est = dn.evaluate(&x).unwrap();
            ensure((est - theta).abs() <= 1e-9, || format!("discrete n-sample returned {est} for θ = {theta}"))?;
        }
    }

    // circle: every s_γ is invariant
    let base = CircleEstimator::table_warp(vec![0.0, 0.2, -0.1], 3).unwrap();
    for _ in 0..1000 {
        let s = s_gamma(&base, rng.random());
        let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let c: f64 = rng.random();
        let moved: Vec<f64> = x.iter().map(|v| wrap(v + c)).collect();
        let d = CirclePoint::new(s.evaluate(&moved).unwrap()).distance(CirclePoint::new(s.evaluate(&x).unwrap() + c));
        ensure(d <= 1e-9, || format!("s_γ shift defect {d}"))?;
    }

    // determinism under parallelism
    let mc = McConfig::new(40_000, 7).unwrap();
    let e = window_mle_estimator(&g, th(0.5)).unwrap();
    let one = quality_inf(&e, &g, th(0.5), 3, &[-2.0, 0.0, 4.0], &mc).unwrap();
    for t in [2, 4, 7] {
        let other = quality_inf(&e, &g, th(0.5), 3, &[-2.0, 0.0, 4.0], &mc.with_parallelism(t)).unwrap();
        ensure(other == one, || format!("report changed with {t} threads"))?;
    }

    // KS sampling at n = 1e5
    let families = [
        g.clone(),
        x_exp.clone(),
        Distribution::uniform(-1.0, 2.0).unwrap(),
        bump.clone(),
    ];
    for d in &families {
        let n = 100_000;
        let mut xs = d.shifted(0.0).sample(31, n);
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        ensure(ks < 1.63 / (n as f64).sqrt(), || format!("{d}: KS {ks}"))?;
    }

    // word algebra
    for _ in 0..10_000 {
        let mut word = || {
            let len = rng.random_range(0..12);
            Word::from_letters((0..len).map(|_| Letter::ALL[rng.random_range(0..3)]))
        };
        let (u, v, w) = (word(), word(), word());
        let p = u.multiply(&v);
        ensure(p.is_reduced(), || format!("{u}·{v} = {p} is not reduced"))?;
        ensure(p.multiply(&w) == u.multiply(&v.multiply(&w)), || "associativity".into())?;
        ensure(u.multiply(&u.inverse()).is_empty(), || format!("{u} times its inverse"))?;
        ensure(w.multiply(&u).distance(&w.multiply(&v)) == u.distance(&v), || "left invariance".into())?;
    }
    ensure(ball(8).unwrap().iter().all(Word::is_reduced), || "ball words".into())?;

    // measured quality never exceeds the applicable bound
    let mc = McConfig::new(100_000, 8).unwrap().with_parallelism(threads());
    let grid = [-3.0, 0.0, 2.0, 40.0];
    let s1 = s_bound_one_sample(&g, th(0.5)).unwrap().value;
    let candidates: Vec<Box<dyn Estimate>> =
        vec![Box::new(mean_estimator(&g)), Box::new(constant(0.0)), Box::new(window_mle_estimator(&g, th(0.5)).unwrap())];
    for e in &candidates {
        let r = quality_inf(e.as_ref(), &g, th(0.5), 1, &grid, &mc).unwrap();
        ensure(r.worst_case.q <= s1 + 3.0 * r.worst_case.ci_half_width, || format!("{} beats S", e.label()))?;
    }
    for n in [1, 3] {
        let t = t_bound_min_family(&x_exp, n, th(0.25)).unwrap().value;
        for e in [min_shift_estimator(th(0.25)), mean_estimator(&x_exp)] {
            let r = quality_inf(&e, &x_exp, th(0.25), n, &grid, &mc).unwrap();
            ensure(r.worst_case.q <= t + 3.0 * r.worst_case.ci_half_width, || format!("{} beats T", e.label()))?;
        }
    }
    for salt in 0..50 {
        let (d, t) = lattice_instance(&mut rng, 4);
        let tv = t_bound_one_sample_discrete(&d, t).unwrap().value;
        let thetas: Vec<f64> = (0..16).map(|i| i as f64 * 0.25 - 2.0).collect();
        let r = quality_inf(&table_estimator(&d, salt), &d, t, 1, &thetas, &mc).unwrap();
        ensure(r.worst_case.q <= tv + 1e-12, || format!("table estimator beats T on {d}"))?;
    }
    Ok("shift invariance, determinism, KS, word algebra and quality <= S/T all hold".into())
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 7] = [
        ("AC1", "tree example exactness", ac1_tree),
        ("AC2", "exponential min-shift closed form", ac2_min_shift),
        ("AC3", "gaussian window = mean", ac3_gaussian),
        ("AC4", "bounds coherence", ac4_bounds),
        ("AC5", "sumset lemma", ac5_lemma),
        ("AC6", "circle averaging", ac6_circle),
        ("AC7", "property suites", ac7_properties),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id} {name} ({secs:.2} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name} ({secs:.2} s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
