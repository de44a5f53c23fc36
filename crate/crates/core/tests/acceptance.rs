//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nlpot::asymptotics::{
    bounds_at_infinity, bounds_weighted, classify_region, kelvin, kelvin_consistent, moser_ledger, region_memberships,
    sweep, Region,
};
use nlpot::constructor::{
    build_bump_solution, check_bump_solution, make_xseq, measure_blowup, schedule_sharp_rate, SeedSequence,
};
use nlpot::core_model::{Ball, GridDensity, Measure, Point};
use nlpot::estimates::{
    ball_newtonian_probes, random_atomic_measures, random_bump_mixes, verify_ball_newtonian, verify_bessel_wolff,
    verify_composite_on_ball, verify_composite_unit_ball, EstimateId, EstimateReport, VerifyConfig,
};
use nlpot::potentials::{composite_nn, havin_mazya, riesz_kernel, riesz_layercake, wolff, wolff_sigma};
use nlpot::report::{Growth, Verdict};
use nlpot::repr_formula::{compose, default_ladder, estimate_point_mass, Decomposition, HarmonicPoly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_factor(a: f64, b: f64, f: f64) -> bool {
    a > 0.0 && b > 0.0 && a / b <= f && b / a <= f
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn timed(limit: Duration, start: Instant) -> Result<f64, String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {:.2}s, limit {:.0}s", t.as_secs_f64(), limit.as_secs_f64()))?;
    Ok(t.as_secs_f64())
}

/// Dirac mass: both Riesz routes against |x|^{α−n}/(n−α).
fn dirac_riesz() -> Outcome {
    let start = Instant::now();
    let n = 3;
    let mu = Measure::dirac(Point::origin(n));
    let mut worst = (0.0f64, 0.0f64);
    for alpha in [0.5, 1.0, 2.0] {
        for r in [1e-3, 0.05, 0.5, 2.0, 30.0] {
            let x = Point::on_axis(n, r);
            let exact = r.powf(alpha - n as f64) / (n as f64 - alpha);
            let k = riesz_kernel(&mu, alpha, &x).map_err(e)?.value;
            let l = riesz_layercake(&mu, alpha, &x, 512).map_err(e)?.value;
            worst.0 = worst.0.max(rel(k, exact));
            worst.1 = worst.1.max(rel(l, exact));
        }
    }
    ensure(worst.0 <= 1e-9, || format!("kernel route off by {:.2e}", worst.0))?;
    ensure(worst.1 <= 1e-3, || format!("layer-cake route off by {:.2e}", worst.1))?;
    let t = timed(Duration::from_secs(1), start)?;
    Ok(format!("kernel {:.1e}, layer-cake {:.1e}, {t:.3}s", worst.0, worst.1))
}

/// Uniform unit ball: ∫|x−y|^{-1}dy inside, on and outside the ball.
fn shell_theorem() -> Outcome {
    let start = Instant::now();
    let ball = Ball::new(Point::origin(3), 1.0).map_err(e)?;
    let g = GridDensity::cube(3, 1.0, 64, |_| 1.0).map_err(e)?.restricted_to_ball(&ball);
    let mu = Measure::Grid(g);
    let cases = [
        (0.0, 2.0 * PI),
        (0.5, 2.0 * PI * (1.0 - 0.25 / 3.0)),
        (1.0, 4.0 * PI / 3.0),
        (2.0, 4.0 * PI / 6.0),
        (3.5, 4.0 * PI / 10.5),
    ];
    let mut worst = 0.0f64;
    for (a, exact) in cases {
        for dir in [[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.6, -0.8]] {
            let x = Point(dir.iter().map(|c| c * a).collect());
            let v = riesz_kernel(&mu, 2.0, &x).map_err(e)?.value;
            worst = worst.max(rel(v, exact));
        }
    }
    ensure(worst <= 5e-3, || format!("worst relative error {worst:.2e}"))?;
    let t = timed(Duration::from_secs(30), start)?;
    Ok(format!("worst relative error {worst:.2e} at 64^3 cells, {t:.2}s"))
}

/// Scaling μ ↦ tμ multiplies each potential by t^degree.
fn homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let atoms = random_atomic_measures(3, 20, 4);
    let mixes = random_bump_mixes(3, 20, 4);
    let mut worst = [0.0f64; 5];
    for i in 0..20 {
        let t = rng.gen_range(0.1..10.0);
        let p = rng.gen_range(1.3..3.0);
        let sigma = rng.gen_range(2.1..4.0);
        let x = Point(vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
        let mu = &atoms[i];
        let tmu = mu.scale(t).map_err(e)?;
        let pairs = [
            (riesz_kernel(mu, 1.0, &x).map_err(e)?.value, riesz_kernel(&tmu, 1.0, &x).map_err(e)?.value, 1.0),
            (
                wolff(mu, 1.0, p, 1.0, &x, 256).map_err(e)?.value,
                wolff(&tmu, 1.0, p, 1.0, &x, 256).map_err(e)?.value,
                1.0 / (p - 1.0),
            ),
            (
                havin_mazya(mu, 1.0, p, &x, 8).map_err(e)?.value,
                havin_mazya(&tmu, 1.0, p, &x, 8).map_err(e)?.value,
                1.0 / (p - 1.0),
            ),
        ];
        for (k, (a, b, deg)) in pairs.into_iter().enumerate() {
            worst[k] = worst[k].max(rel(b, t.powf(deg) * a));
        }
        let g = mixes[i].sample(&Point::origin(3), 1.0, 8).map_err(e)?;
        let tg = g.scaled(t);
        let ball = Ball::new(Point::origin(3), 1.0).map_err(e)?;
        let a = composite_nn(&g, &ball, sigma, &x).map_err(e)?.value;
        let b = composite_nn(&tg, &ball, sigma, &x).map_err(e)?.value;
        worst[3] = worst[3].max(rel(b, t.powf(sigma) * a));
        let a = wolff_sigma(&g, sigma, &x, 256).map_err(e)?.value;
        let b = wolff_sigma(&tg, sigma, &x, 256).map_err(e)?.value;
        worst[4] = worst[4].max(rel(b, t.powf(sigma) * a));
    }
    let names = ["riesz", "wolff", "havin-mazya", "composite", "wolff-sigma"];
    for (w, name) in worst.iter().zip(names) {
        ensure(*w <= 1e-12, || format!("{name} defect {w:.2e}"))?;
    }
    Ok(format!("20 cases x 5 operators, worst defect {:.1e}", worst.iter().cloned().fold(0.0, f64::max)))
}

fn report(reports: &[EstimateReport], id: EstimateId) -> Result<&EstimateReport, String> {
    reports.iter().find(|r| r.estimate_id == id).ok_or_else(|| format!("no {} report", id.name()))
}

/// V against the damped Wolff potential on atomic measures, both directions, two ring counts.
fn bessel_wolff() -> Outcome {
    let mus = random_atomic_measures(3, 20, 21);
    let run = |rings| {
        verify_bessel_wolff(&mus, 1.0, 2.0, 1.0, &VerifyConfig { grid: 12, rings, probes: 16, seed: 3 }).map_err(e)
    };
    let coarse = run(256)?;
    let fine = run(512)?;
    let mut parts = Vec::new();
    for id in [EstimateId::WolffBelowV, EstimateId::VBelowWolff] {
        let (c, f) = (report(&coarse, id)?, report(&fine, id)?);
        for r in [c, f] {
            ensure(r.verdict == Verdict::Consistent, || format!("{} verdict {:?}", id.name(), r.verdict))?;
            ensure(r.min_ratio > 0.0 && r.max_ratio.is_finite(), || format!("{} ratios degenerate", id.name()))?;
        }
        ensure(within_factor(c.min_ratio, f.min_ratio, 2.0) && within_factor(c.max_ratio, f.max_ratio, 2.0), || {
            format!("{} ratios moved under refinement: {c:?} vs {f:?}", id.name())
        })?;
        parts.push(format!("{} [{:.3e}, {:.3e}]", id.name(), f.min_ratio, f.max_ratio));
    }
    Ok(format!("20 measures: {}", parts.join(", ")))
}

/// Composite estimates on the unit ball and on an off-centre ball, power and log branches.
fn composite() -> Outcome {
    let mixes = random_bump_mixes(3, 20, 31);
    let unit = Point::origin(3);
    let centre = Point(vec![0.3, -0.2, 0.1]);
    let ball = Ball::new(centre.clone(), 0.5).map_err(e)?;
    let mut parts = Vec::new();
    for (sigma, s) in [(3.0, 1.0), (2.0, 1.0)] {
        let mut maxes = Vec::new();
        for cells in [8, 16] {
            let fs: Vec<GridDensity> =
                mixes.iter().map(|m| m.sample(&unit, 1.0, cells)).collect::<Result<_, _>>().map_err(e)?;
            let gs: Vec<GridDensity> =
                mixes.iter().map(|m| m.sample(&centre, 0.5, cells)).collect::<Result<_, _>>().map_err(e)?;
            let a = verify_composite_unit_ball(&fs, sigma, s).map_err(e)?;
            let b = verify_composite_on_ball(&gs, &ball, sigma).map_err(e)?;
            for r in [&a, &b] {
                ensure(r.verdict != Verdict::Violated, || format!("{} violated at {cells}^3", r.estimate_id.name()))?;
                ensure(r.max_ratio > 0.0 && r.max_ratio.is_finite(), || {
                    format!("{} ratio degenerate", r.estimate_id.name())
                })?;
            }
            maxes.push((a.estimate_id, a.max_ratio, b.estimate_id, b.max_ratio));
        }
        let (c, f) = (maxes[0], maxes[1]);
        ensure(within_factor(c.1, f.1, 2.0) && within_factor(c.3, f.3, 2.0), || {
            format!("sigma {sigma}: max ratios moved under refinement {c:?} -> {f:?}")
        })?;
        parts.push(format!("{} {:.3}, {} {:.3}", f.0.name(), f.1, f.2.name(), f.3));
    }
    Ok(parts.join("; "))
}

/// Newtonian potential of a ball: fitted constant is scale free and stable in the probe count.
fn ball_newtonian() -> Outcome {
    let x0 = Point(vec![0.2, -0.1, 0.4]);
    let base = ball_newtonian_probes(&x0, 1.0, 100, 5);
    let fit = |r: f64, probes: &[Point]| -> Result<f64, String> {
        let scaled: Vec<Point> = probes.iter().map(|p| x0.add(&p.sub(&x0).scale(r))).collect();
        Ok(verify_ball_newtonian(&x0, r, &scaled).map_err(e)?.fitted_c)
    };
    let c1 = fit(1.0, &base)?;
    for r in [0.5, 2.0] {
        let c = fit(r, &base)?;
        ensure(rel(c, c1) <= 1e-6, || format!("R = {r}: C = {c} vs {c1}"))?;
    }
    let dense = ball_newtonian_probes(&x0, 1.0, 200, 6);
    let c2 = fit(1.0, &dense)?;
    ensure(within_factor(c1, c2, 2.0), || format!("C moved from {c1} to {c2} with 200 probes"))?;
    Ok(format!("C = {c1:.6} for R in {{0.5, 1, 2}}, {c2:.6} with 200 probes"))
}

fn reference_seed(n: usize, count: usize) -> Result<SeedSequence, String> {
    let xs = make_xseq(n, 0.2, 0.2, count).map_err(e)?;
    let lr = xs.iter().map(|x| (x.norm() / 2.0).ln()).collect();
    let phi = xs.iter().map(Point::norm).collect();
    SeedSequence::new(xs, lr, phi).map_err(e)
}

/// Bump solution on the reference seed passes every pointwise check.
fn bump_solution() -> Outcome {
    let start = Instant::now();
    let sol = build_bump_solution(reference_seed(3, 6)?).map_err(e)?;
    let c = check_bump_solution(&sol, 20, 7);
    ensure(c.all_pass(), || format!("{c:?}"))?;
    ensure(c.min_u >= 1.0, || format!("min u = {}", c.min_u))?;
    let t = timed(Duration::from_secs(60), start)?;
    Ok(format!("{} samples, min u {:.3}, Poisson residual {:.1e}, {t:.2}s", c.samples, c.min_u, c.poisson_residual))
}

/// Sharp rate: the blow-up ratio grows along the kept points.
fn sharp_rate() -> Outcome {
    let n = 3;
    let lambda = 4.0;
    let xs = make_xseq(n, 0.2, 0.2, 8).map_err(e)?;
    let seed = schedule_sharp_rate(lambda, &|r| r, &xs).map_err(e)?;
    ensure(seed.indices == vec![4, 5, 6, 7, 8], || format!("kept indices {:?}", seed.indices))?;
    let sol = build_bump_solution(seed).map_err(e)?;
    let ex = (n as f64 - 2.0).powi(2) * lambda / n as f64;
    let rep = measure_blowup(&sol, &|r| r * r.powf(-ex), 10.0);
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.ratio).collect();
    ensure(ratios.windows(2).all(|w| w[1] > w[0]), || format!("ratios not increasing: {ratios:?}"))?;
    let growth = ratios.last().unwrap() / ratios[0];
    ensure(growth >= 10.0, || format!("last/first = {growth}"))?;
    ensure(rep.growth == Growth::Diverges, || format!("growth verdict {:?}", rep.growth))?;
    Ok(format!("indices 4..8, last/first ratio {growth:.2}"))
}

/// Moser ledger at (n, λ, σ) = (3, 4, 2.2).
fn moser() -> Outcome {
    let t = moser_ledger(3, 4.0, 2.2).map_err(e)?;
    ensure((t.c0 - 0.46667).abs() <= 1e-4, || format!("C0 = {}", t.c0))?;
    ensure(t.steps.last().is_some_and(|s| s.q.is_none()), || "ledger does not reach q = inf".into())?;
    ensure(t.steps.len() <= 4, || format!("{} steps", t.steps.len()))?;
    for s in &t.steps {
        ensure(s.gain >= t.c0 - 1e-12, || format!("step gain {} below C0", s.gain))?;
    }
    Ok(format!("C0 {:.5}, eps {}, {} steps", t.c0, t.epsilon, t.steps.len()))
}

/// 200×200 sweep: each pair lies in exactly one region; hand-checked pairs.
fn region_partition() -> Outcome {
    let rows = sweep(3, 6.0, 200).map_err(e)?;
    ensure(!rows.is_empty(), || "empty sweep".into())?;
    for r in &rows {
        let m = region_memberships(r.lambda, r.sigma, 3).map_err(e)?;
        ensure(m.iter().filter(|b| **b).count() == 1, || format!("({}, {}) in {m:?}", r.lambda, r.sigma))?;
    }
    let hand = [
        (2.0, 1.0, Region::A),
        (3.0, 3.0, Region::A),
        (4.0, 1.0, Region::B),
        (4.0, 3.0, Region::C),
        (4.0, 2.75, Region::D),
        (6.0, 6.0, Region::C),
    ];
    for (l, s, want) in hand {
        let got = classify_region(l, s, 3).map_err(e)?;
        ensure(got == want, || format!("({l}, {s}) classified {got}, expected {want}"))?;
    }
    Ok(format!("{} grid pairs, 6 hand cases", rows.len()))
}

/// Unweighted bounds in region B, and bounds at infinity equal to the Kelvin image.
fn weighted_and_infinity() -> Outcome {
    for (l, s, n) in [(4.0, 1.0, 3usize), (5.0, 1.5, 3), (3.0, 0.5, 4)] {
        let b = bounds_weighted(l, s, n, 0.0, 0.0, 0.05).map_err(e)?;
        let m = n as f64 - 2.0;
        let want_u = m * m * l / n as f64;
        ensure(rel(b.u.base_exponent, want_u) <= 1e-12 && rel(b.v.base_exponent, m) <= 1e-12, || {
            format!("({l}, {s}, {n}): got ({}, {}), want ({want_u}, {m})", b.u.base_exponent, b.v.base_exponent)
        })?;
    }
    let mut cases = std::collections::BTreeSet::new();
    let pairs = [
        (2.0, 0.0, 3usize),
        (2.5, 1.0, 3),
        (4.0, 1.0, 3),
        (4.0, 2.0, 3),
        (4.0, 2.5, 3),
        (3.0, 0.5, 4),
        (5.0, 1.0, 4),
        (2.0, 1.2, 5),
    ];
    for (l, s, n) in pairs {
        ensure(kelvin_consistent(l, s, n, 0.05).map_err(e)?, || {
            format!("({l}, {s}, {n}) disagrees with its Kelvin image")
        })?;
        cases.insert(bounds_at_infinity(l, s, n, 0.05).map_err(e)?.case);
    }
    ensure(cases.len() == 4, || format!("only cases {cases:?} exercised"))?;
    Ok(format!("region B exponents exact, Kelvin images agree on cases {cases:?}"))
}

/// Point mass recovered from composed data, and the Kelvin transform is an involution.
fn representation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ladder = default_ladder(1.0, 4.0, 12);
    let mut worst = 0.0f64;
    for n in [2usize, 3, 4] {
        for m in [0.0, 1.0, 2.0, 5.0] {
            let pts = (0..3)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let r = rng.gen_range(0.4..0.9);
                    Point(v.iter().map(|a| a * r / s).collect())
                })
                .collect();
            let masses = (0..3).map(|_| rng.gen_range(0.1..2.0)).collect();
            let mu = Measure::atomic(pts, masses).map_err(e)?;
            let harmonic =
                HarmonicPoly { constant: rng.gen_range(0.0..2.0), linear: vec![0.3; n], ..Default::default() };
            let dec = Decomposition { n, m, mu, harmonic, epsilon: 1.0 };
            let u = |p: &Point| compose(&dec, p).unwrap_or(f64::NAN);
            let fit = estimate_point_mass(&u, n, &ladder).map_err(e)?;
            let err = (fit.m - m).abs() / m.max(1.0);
            ensure(err <= 0.01, || format!("n = {n}, m = {m}: recovered {}", fit.m))?;
            worst = worst.max(err);
        }
    }
    let mut kworst = 0.0f64;
    for n in [2usize, 3, 5] {
        let samples: Vec<(Point, f64)> = (0..50)
            .map(|_| {
                let p = Point((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect());
                (p, rng.gen_range(-5.0..5.0))
            })
            .collect();
        let back = kelvin(&kelvin(&samples).map_err(e)?).map_err(e)?;
        for ((p, u), (q, w)) in samples.iter().zip(&back) {
            kworst = kworst.max(p.dist(q) / p.norm()).max((u - w).abs() / u.abs().max(1.0));
        }
    }
    ensure(kworst <= 1e-12, || format!("Kelvin round trip off by {kworst:.2e}"))?;
    Ok(format!("mass error {worst:.1e} relative, Kelvin round trip {kworst:.1e}"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("dirac riesz potential, both routes", dirac_riesz),
        ("uniform ball potential", shell_theorem),
        ("homogeneity under scaling", homogeneity),
        ("bessel potential against wolff potential", bessel_wolff),
        ("composite estimates", composite),
        ("newtonian potential of a ball", ball_newtonian),
        ("bump solution checks", bump_solution),
        ("sharp blow-up rate", sharp_rate),
        ("moser ledger", moser),
        ("region partition", region_partition),
        ("weighted bounds and kelvin images", weighted_and_infinity),
        ("point mass and kelvin involution", representation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
