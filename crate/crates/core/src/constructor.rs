//! Bump-superposition solutions of -Δu = f ≥ 0 with prescribed concentration along a sequence
//! x_j → 0, the radius schedules that tune them, and blow-up measurement along {x_j}.
//!
//! Radii are stored as natural logarithms because several schedules produce radii far below
//! the smallest positive f64.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::critical_sigma;
use crate::core_model::{omega, sphere_area, Dimension, Point};
use crate::error::{domain, Error, Result};
use crate::report::{growth_trend, Growth};

/// Quadrature panels for the radial profile integrals.
const PROFILE_PANELS: usize = 512;
/// Points on the ladder used to locate the minimum of the profile potential.
const J_LADDER: usize = 64;

/// Points x_j, log radii ln r_j and weights ε_j = φ(|x_j|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSequence {
    pub points: Vec<Point>,
    pub log_radii: Vec<f64>,
    pub phi_values: Vec<f64>,
    /// 1-based positions in the sequence the schedule started from.
    pub indices: Vec<usize>,
}

impl SeedSequence {
    pub fn new(points: Vec<Point>, log_radii: Vec<f64>, phi_values: Vec<f64>) -> Result<Self> {
        let indices = (1..=points.len()).collect();
        let s = SeedSequence { points, log_radii, phi_values, indices };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    /// Radii as plain numbers; these underflow to zero for the steepest schedules.
    pub fn radii(&self) -> Vec<f64> {
        self.log_radii.iter().map(|l| l.exp()).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.points.iter().map(Point::norm).collect()
    }

    /// Checks separation, radius and summability conditions.
    pub fn validate(&self) -> Result<()> {
        let k = self.points.len();
        if k == 0 {
            return domain("seed sequence is empty");
        }
        if self.log_radii.len() != k || self.phi_values.len() != k || self.indices.len() != k {
            return domain("points, radii, weights and indices must have equal length");
        }
        let n = self.dim();
        if self.points.iter().any(|p| p.dim() != n) {
            return domain("all points must share one dimension");
        }
        let norms = self.norms();
        if !(norms[0] < 0.5) {
            return domain(format!("|x_1| = {} must be below 1/2", norms[0]));
        }
        for j in 0..k {
            if !(norms[j] > 0.0) {
                return domain(format!("x_{} must differ from the origin", j + 1));
            }
            if j + 1 < k && !(4.0 * norms[j + 1] < norms[j]) {
                return domain(format!("need 4|x_{}| < |x_{}|", j + 2, j + 1));
            }
            let lr = self.log_radii[j];
            if !lr.is_finite() || lr > (norms[j] / 2.0).ln() + 1e-12 {
                return domain(format!("r_{} must lie in (0, |x_{}|/2]", j + 1, j + 1));
            }
            let phi = self.phi_values[j];
            if !(phi > 0.0 && phi < 1.0) {
                return domain(format!("phi value {phi} at index {} must lie in (0, 1)", j + 1));
            }
        }
        if !summable_trend(&self.phi_values) {
            return domain("phi values do not look summable (tail not decreasing or too heavy)");
        }
        Ok(())
    }

    fn retain_from(mut self, start: usize) -> Self {
        self.points.drain(..start);
        self.log_radii.drain(..start);
        self.phi_values.drain(..start);
        self.indices.drain(..start);
        self
    }
}

/// Finite-sequence stand-in for Σφ < ∞: the second half is nonincreasing and weighs no more
/// than the first half.
pub fn summable_trend(values: &[f64]) -> bool {
    if values.len() < 2 {
        return true;
    }
    let mid = values.len() / 2;
    let (head, tail) = values.split_at(mid);
    let tail_ok = tail.windows(2).all(|w| w[1] <= w[0]);
    tail_ok && tail.iter().sum::<f64>() <= head.iter().sum::<f64>()
}

/// |x_j| = first_norm·ρ^{j-1} along the first axis.
pub fn make_xseq(n: usize, rho: f64, first_norm: f64, count: usize) -> Result<Vec<Point>> {
    Dimension::new(n)?;
    if !(rho > 0.0 && rho < 0.25) {
        return domain(format!("ratio must lie in (0, 1/4), got {rho}"));
    }
    if !(first_norm > 0.0 && first_norm < 0.5) {
        return domain(format!("first norm must lie in (0, 1/2), got {first_norm}"));
    }
    Ok((0..count).map(|j| Point::on_axis(n, first_norm * rho.powi(j as i32))).collect())
}

/// The radial bump ψ(η) = exp(1 - 1/(1 - |η|²)) on the unit ball, with ψ(0) = 1.
pub fn bump(t: f64) -> f64 {
    if t < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

fn log_weight(t: f64) -> f64 {
    if t > 0.0 {
        bump(t) * t * (4.0 / t).ln()
    } else {
        0.0
    }
}

/// ∫_0^s ψ(t) t log(4/t) dt after t = w², which smooths the log-singular slope at 0.
fn log_weight_integral(s: f64) -> f64 {
    simpson(|w| 2.0 * w * log_weight(w * w), 0.0, s.sqrt(), PROFILE_PANELS)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = panels + panels % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integrals of the bump needed by the solution evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub n: usize,
    /// ∫ψ over R^n.
    pub i: f64,
    /// min over |ξ| ≤ 1 of ∫ψ(η)|ξ-η|^{2-n}dη; only defined for n ≥ 3.
    pub j: Option<f64>,
    /// ∫_0^1 ψ(t) t log(4/t) dt, used by the planar profile.
    pub log_moment: f64,
}

impl BumpProfile {
    pub fn new(n: usize) -> Result<Self> {
        Dimension::new(n)?;
        let area = sphere_area(n);
        let i = area * simpson(|t| bump(t) * t.powi(n as i32 - 1), 0.0, 1.0, PROFILE_PANELS);
        let log_moment = log_weight_integral(1.0);
        let mut b = BumpProfile { n, i, j: None, log_moment };
        if n >= 3 {
            let j = (0..=J_LADDER).map(|k| b.potential(k as f64 / J_LADDER as f64)).fold(f64::INFINITY, f64::min);
            b.j = Some(j);
        }
        Ok(b)
    }

    /// Φ(s) = ∫ψ(η)|ξ-η|^{2-n}dη at |ξ| = s (n ≥ 3), using the spherical mean max(s,t)^{2-n}.
    pub fn potential(&self, s: f64) -> f64 {
        let n = self.n as i32;
        if s >= 1.0 {
            return self.i * s.powi(2 - n);
        }
        let area = sphere_area(self.n);
        let inner =
            if s > 0.0 { s.powi(2 - n) * simpson(|t| bump(t) * t.powi(n - 1), 0.0, s, PROFILE_PANELS) } else { 0.0 };
        let outer = simpson(|t| bump(t) * t, s, 1.0, PROFILE_PANELS);
        area * (inner + outer)
    }

    /// ∫ψ(η) log(4/|ξ-η|)dη at |ξ| = s (n = 2), using the circular mean log(1/max(s,t)).
    pub fn log_potential(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return self.i * (4.0 / s).ln();
        }
        let inner = if s > 0.0 { (4.0 / s).ln() * simpson(|t| bump(t) * t, 0.0, s, PROFILE_PANELS) } else { 0.0 };
        let outer = self.log_moment - log_weight_integral(s);
        2.0 * PI * (inner + outer)
    }
}

/// u = 1 + (fundamental solution) * f with f = Σ (ε_j/r_j^n) ψ((x - x_j)/r_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSolution {
    pub seed: SeedSequence,
    pub bump: BumpProfile,
    pub n: usize,
    /// Lower-bound constant: u ≥ Aφ/r_j^{n-2} (n ≥ 3) or Aφ log(1/r_j) (n = 2) on each ball.
    pub a_const: f64,
    /// Fundamental-solution constant.
    pub b_const: f64,
}

/// Builds the bump superposition for a validated seed.
pub fn build_bump_solution(seed: SeedSequence) -> Result<SingularSolution> {
    seed.validate()?;
    let n = seed.dim();
    if n < 2 {
        return domain("dimension must be at least 2");
    }
    let bump = BumpProfile::new(n)?;
    let b_const = omega(Dimension::new(n)?);
    let a_const = match bump.j {
        Some(j) => b_const * j,
        None => bump.i / (2.0 * PI),
    };
    Ok(SingularSolution { seed, bump, n, a_const, b_const })
}

impl SingularSolution {
    /// ∫f = I·Σε_j.
    pub fn total_mass(&self) -> f64 {
        self.bump.i * self.seed.phi_values.iter().sum::<f64>()
    }

    /// ln M_j = ln ε_j - n ln r_j.
    pub fn log_height(&self, j: usize) -> f64 {
        self.seed.phi_values[j].ln() - self.n as f64 * self.seed.log_radii[j]
    }

    /// Contribution of bump k at scaled distance s = |x - x_k|/r_k.
    fn term_scaled(&self, k: usize, s: f64, dist: f64) -> f64 {
        let eps = self.seed.phi_values[k];
        let lr = self.seed.log_radii[k];
        if self.n == 2 {
            let v =
                if s < 1.0 { self.bump.i * -lr + self.bump.log_potential(s) } else { self.bump.i * (4.0 / dist).ln() };
            eps * v / (2.0 * PI)
        } else if s < 1.0 {
            self.b_const * (eps.ln() + (2.0 - self.n as f64) * lr).exp() * self.bump.potential(s)
        } else {
            self.b_const * eps * self.bump.i * dist.powi(2 - self.n as i32)
        }
    }

    fn term(&self, k: usize, x: &[f64]) -> f64 {
        let d = dist(x, self.seed.points[k].coords());
        self.term_scaled(k, d / self.seed.log_radii[k].exp(), d)
    }

    pub fn u(&self, x: &Point) -> f64 {
        self.u_at(x.coords())
    }

    fn u_at(&self, x: &[f64]) -> f64 {
        1.0 + (0..self.seed.len()).map(|k| self.term(k, x)).sum::<f64>()
    }

    /// u at x_j + r_j ξ, exact in ξ even when r_j underflows.
    pub fn u_local(&self, j: usize, xi: &[f64]) -> f64 {
        let r = self.seed.log_radii[j].exp();
        let xj = self.seed.points[j].coords();
        let x: Vec<f64> = xj.iter().zip(xi).map(|(a, b)| a + r * b).collect();
        let s = norm(xi);
        let own = self.term_scaled(j, s, s * r);
        let others: f64 = (0..self.seed.len()).filter(|&k| k != j).map(|k| self.term(k, &x)).sum();
        1.0 + own + others
    }

    /// f at x_j + r_j ξ (the balls are disjoint, so only bump j contributes).
    pub fn f_local(&self, j: usize, xi: &[f64]) -> f64 {
        let p = bump(norm(xi));
        if p == 0.0 {
            0.0
        } else {
            (self.log_height(j) + p.ln()).exp()
        }
    }

    pub fn f(&self, x: &Point) -> f64 {
        let x = x.coords();
        (0..self.seed.len())
            .map(|k| {
                let r = self.seed.log_radii[k].exp();
                let xi: Vec<f64> = x.iter().zip(self.seed.points[k].coords()).map(|(a, b)| (a - b) / r).collect();
                self.f_local(k, &xi)
            })
            .sum()
    }

    /// The claimed lower bound of u on B_{r_j}(x_j).
    pub fn lower_bound(&self, j: usize) -> f64 {
        let eps = self.seed.phi_values[j];
        let lr = self.seed.log_radii[j];
        if self.n == 2 {
            self.a_const * eps * -lr
        } else {
            (self.a_const.ln() + eps.ln() + (2.0 - self.n as f64) * lr).exp()
        }
    }

    /// Radius of the ball the solution lives on: R^n for n ≥ 3 (sampled on B_1), B_2 for n = 2.
    fn domain_radius(&self) -> f64 {
        if self.n == 2 {
            2.0
        } else {
            1.0
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sample_unit_ball(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm(&v) <= 1.0 {
            return v;
        }
    }
}

/// 2n+1 point discrete Laplacian.
fn discrete_laplacian(g: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (f64, f64) {
    let n = x.len();
    let centre = g(x);
    let mut acc = -2.0 * n as f64 * centre;
    let mut scale = centre.abs();
    let mut y = x.to_vec();
    for i in 0..n {
        for sgn in [-1.0, 1.0] {
            y[i] = x[i] + sgn * h;
            let v = g(&y);
            acc += v;
            scale = scale.max(v.abs());
        }
        y[i] = x[i];
    }
    (acc / (h * h), scale)
}

/// Outcome of checking the four conclusions of the bump construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpCheck {
    /// f ≤ φ(|x_j|)/r_j^n on every ball, with equality at the centres.
    pub density_cap: bool,
    /// Largest |Δ_h u| / tolerance over off-support samples.
    pub harmonic_residual: f64,
    pub harmonic_off_support: bool,
    /// Δu ≤ 0 inside the balls, up to the Richardson error estimate.
    pub superharmonic: bool,
    /// Largest |Δu + f| / max f inside the balls.
    pub poisson_residual: f64,
    /// Smallest u / (claimed lower bound) over the ball samples.
    pub lower_bound_ratio: f64,
    pub lower_bound: bool,
    pub min_u: f64,
    pub u_at_least_one: bool,
    pub samples: usize,
    pub total_mass: f64,
}

impl BumpCheck {
    pub fn all_pass(&self) -> bool {
        self.density_cap && self.harmonic_off_support && self.superharmonic && self.lower_bound && self.u_at_least_one
    }
}

/// Samples drawn uniformly from the solution's domain ball when checking u ≥ 1.
pub const GLOBAL_SAMPLES: usize = 1000;

/// Verifies the density cap, harmonicity off the supports, the lower bound on each ball and u ≥ 1.
pub fn check_bump_solution(sol: &SingularSolution, samples_per_ball: usize, seed: u64) -> BumpCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sol.n;
    let nf = n as f64;
    let k = sol.seed.len();
    let radii = sol.seed.radii();
    let mut samples = 0;

    // density cap, exact because ψ ≤ 1 = ψ(0)
    let mut density_cap = bump(0.0) == 1.0;
    let mut lower_ratio = f64::INFINITY;
    let mut min_u = f64::INFINITY;
    let mut superharmonic = true;
    let mut poisson: f64 = 0.0;
    for j in 0..k {
        let cap = sol.log_height(j);
        let cap_from_phi = sol.seed.phi_values[j].ln() - nf * sol.seed.log_radii[j];
        density_cap &= cap <= cap_from_phi;
        let bound = sol.lower_bound(j);
        let mut local = vec![vec![0.0; n]];
        local.extend((0..samples_per_ball).map(|_| sample_unit_ball(n, &mut rng)));
        for xi in &local {
            samples += 1;
            let p = bump(norm(xi));
            density_cap &= p == 0.0 || cap + p.ln() <= cap_from_phi;
            let u = sol.u_local(j, xi);
            min_u = min_u.min(u);
            lower_ratio = lower_ratio.min(u / bound);
        }
        // Richardson pair of stencils in the local frame; Δ_x = r^{-2}Δ_ξ
        let fmax = cap.exp();
        let r2 = (2.0 * sol.seed.log_radii[j]).exp();
        let g = |xi: &[f64]| sol.u_local(j, xi);
        for xi in local.iter().take(samples_per_ball.min(24) + 1) {
            let xi: Vec<f64> = xi.iter().map(|v| 0.95 * v).collect();
            let (d1, _) = discrete_laplacian(g, &xi, 0.02);
            let (d2, scale) = discrete_laplacian(g, &xi, 0.01);
            let err = (d2 - d1).abs() / 3.0;
            let roundoff = 16.0 * nf * f64::EPSILON * scale / 1e-4;
            superharmonic &= d2 <= err + roundoff;
            if r2 > 0.0 && fmax.is_finite() && fmax > 0.0 {
                let lap = (d2 + (d2 - d1) / 3.0) / r2;
                poisson = poisson.max((lap + sol.f_local(j, &xi)).abs() / fmax);
            }
        }
    }

    // off-support harmonicity against the stencil truncation bound
    let radius = sol.domain_radius();
    let mut pts: Vec<Vec<f64>> =
        (0..GLOBAL_SAMPLES).map(|_| sample_unit_ball(n, &mut rng).into_iter().map(|v| v * radius).collect()).collect();
    for j in 0..k {
        if radii[j] < 1e-150 {
            continue;
        }
        let xj = sol.seed.points[j].coords();
        for _ in 0..samples_per_ball {
            let dir = sample_unit_ball(n, &mut rng);
            let len = norm(&dir).max(1e-3);
            let t = radii[j] * rng.gen_range(1.2..2.0) / len;
            pts.push(xj.iter().zip(&dir).map(|(a, b)| a + t * b).collect());
        }
    }
    let m = nf - 2.0;
    let mut harmonic_residual: f64 = 0.0;
    for x in &pts {
        samples += 1;
        min_u = min_u.min(sol.u_at(x));
        let gaps: Vec<f64> = (0..k).map(|j| dist(x, sol.seed.points[j].coords()) - radii[j]).collect();
        let gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            continue;
        }
        let h = (0.05 * gap).min(1e-3);
        let (lap, scale) = discrete_laplacian(|y| sol.u_at(y), x, h);
        let mut fourth = 0.0;
        let mut grad = 0.0;
        for j in 0..k {
            let c = sol.seed.phi_values[j] * sol.bump.i * sol.b_const;
            let d = gaps[j] + radii[j] - h;
            fourth +=
                if n == 2 { c * 6.0 / d.powi(4) } else { c * m * (m + 1.0) * (m + 2.0) * (m + 3.0) * d.powf(-m - 4.0) };
            grad += if n == 2 { c / d } else { c * m * d.powf(-m - 1.0) };
        }
        // rounding of the stencil coordinates moves each evaluation by about |∇u|·ε|x|
        let reach = x.iter().fold(0.0f64, |a, v| a.max(v.abs())) + h;
        let rounding = 4.0 * nf * (f64::EPSILON * scale + grad * f64::EPSILON * reach) / (h * h);
        let tol = nf * h * h / 12.0 * fourth + rounding;
        harmonic_residual = harmonic_residual.max(lap.abs() / tol);
    }

    BumpCheck {
        density_cap,
        harmonic_residual,
        harmonic_off_support: harmonic_residual <= 1.0,
        superharmonic,
        poisson_residual: poisson,
        lower_bound_ratio: lower_ratio,
        lower_bound: lower_ratio >= 1.0,
        min_u,
        u_at_least_one: min_u >= 1.0,
        samples,
        total_mass: sol.total_mass(),
    }
}

fn drop_until_fits(seed: SeedSequence) -> Result<SeedSequence> {
    let norms = seed.norms();
    let fits = |j: usize| seed.log_radii[j] <= (norms[j] / 2.0).ln();
    let start = (0..seed.len()).rev().take_while(|&j| fits(j)).last();
    match start {
        Some(s) => Ok(seed.retain_from(s)),
        None => domain("no index satisfies r_j <= |x_j|/2; extend the point sequence"),
    }
}

fn weights(xs: &[Point], phi: &dyn Fn(f64) -> f64) -> Vec<f64> {
    xs.iter().map(|x| phi(x.norm())).collect()
}

fn lower_constant(n: usize) -> Result<f64> {
    let b = build_bump_solution(SeedSequence::new(vec![Point::on_axis(n, 0.25)], vec![(0.125f64).ln()], vec![0.5])?)?;
    Ok(b.a_const)
}

/// min over τ ≥ t of log F(τ)/τ on a geometric grid t·1.05^k, τ ≤ 10^4 t.
pub fn min_growth_rate(log_f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let mut m = f64::INFINITY;
    let mut tau = t;
    while tau <= 1e4 * t {
        m = m.min(log_f(tau) / tau);
        tau *= 1.05;
    }
    m
}

/// Radii for planar solutions whose nonlinearity grows faster than every exponential.
///
/// `log_f` and `log_g` are log f and log g, so that e^{t²}-type growth stays representable.
/// φ(r) = r. Each ln(1/r_j) is doubled until T = Aφ(|x_j|)ln(1/r_j) satisfies T ≥ K,
/// Aφ(|x_j|)·M(T) > 2 and h(|x_j|)² < T, where F > 1 on [K, ∞) and M(t) = min_{τ≥t} log F(τ)/τ.
pub fn schedule_superexponential(
    log_f: &dyn Fn(f64) -> f64,
    log_g: &dyn Fn(f64) -> f64,
    h: &dyn Fn(f64) -> f64,
    xs: &[Point],
) -> Result<SeedSequence> {
    if xs.iter().any(|x| x.dim() != 2) {
        return domain("the superexponential schedule is planar; points must lie in R^2");
    }
    let log_big = |t: f64| log_f(t).min(log_g(t));
    if !(min_growth_rate(&log_big, 1e12) > 0.0) {
        return domain("min(f, g) must grow superexponentially: log F(t)/t is not eventually positive");
    }
    // K: last grid point after which log F stays positive
    let grid: Vec<f64> = (0..=150).map(|k| 1e-3 * 1.25f64.powi(k)).collect();
    let k_const = match grid.iter().rposition(|&t| !(log_big(t) > 0.0)) {
        Some(i) if i + 1 < grid.len() => grid[i + 1],
        Some(_) => return domain("F never exceeds 1 on the scan range"),
        None => grid[0],
    };
    let a = lower_constant(2)?;
    let phi: Vec<f64> = xs.iter().map(Point::norm).collect();
    let mut log_radii = Vec::with_capacity(xs.len());
    for (x, &p) in xs.iter().zip(&phi) {
        let target = h(x.norm());
        let mut l = (2.0 / x.norm()).ln();
        let mut ok = false;
        for _ in 0..400 {
            let t = a * p * l;
            if t >= k_const && a * p * min_growth_rate(&log_big, t) > 2.0 && target * target < t {
                ok = true;
                break;
            }
            l *= 2.0;
        }
        if !ok {
            return domain("could not meet the growth conditions; log F(t)/t must tend to infinity");
        }
        log_radii.push(-l);
    }
    SeedSequence::new(xs.to_vec(), log_radii, phi)
}

/// Radii r_j = exp(-h(log(2/|x_j|))/2) with φ = √ψ, dropping leading indices until r_j ≤ |x_j|/2.
pub fn schedule_exponential_pair(
    h: &dyn Fn(f64) -> f64,
    psi: &dyn Fn(f64) -> f64,
    xs: &[Point],
) -> Result<SeedSequence> {
    let log_radii = xs.iter().map(|x| -0.5 * h((2.0 / x.norm()).ln())).collect();
    let phi = weights(xs, &|r| psi(r).sqrt());
    let raw = SeedSequence { points: xs.to_vec(), log_radii, phi_values: phi, indices: (1..=xs.len()).collect() };
    let seed = drop_until_fits(raw)?;
    seed.validate()?;
    Ok(seed)
}

/// Radii r_j = (2|x_j|)^{(n-2)λ/n} with φ = √ψ, for λ > n/(n-2).
pub fn schedule_sharp_rate(lambda: f64, psi: &dyn Fn(f64) -> f64, xs: &[Point]) -> Result<SeedSequence> {
    let n = xs.first().map_or(0, Point::dim);
    if n < 3 {
        return domain("the sharp-rate schedule needs n >= 3");
    }
    let nf = n as f64;
    let m = nf - 2.0;
    if !(lambda > nf / m) {
        return domain(format!("lambda must exceed n/(n-2) = {}", nf / m));
    }
    let log_radii = xs.iter().map(|x| m * lambda / nf * (2.0 * x.norm()).ln()).collect();
    let phi = weights(xs, &|r| psi(r).sqrt());
    let raw = SeedSequence { points: xs.to_vec(), log_radii, phi_values: phi, indices: (1..=xs.len()).collect() };
    let seed = drop_until_fits(raw)?;
    seed.validate()?;
    Ok(seed)
}

/// Seeds for a pair (u, v) above the critical curve that each escape O(h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AboveCurvePair {
    pub u_seed: SeedSequence,
    pub v_seed: SeedSequence,
    pub alpha: f64,
    pub beta: f64,
    /// σ actually used; reduced below n/(n-2) when the input is not already.
    pub sigma_used: f64,
    /// Largest |ln(φ/r^n) - λ ln(Aψ_j/r^{n-2})| over j.
    pub identity_defect: f64,
    /// ψ_j/r_j^n ≤ (Aφ/r_j^{n-2})^σ at every index.
    pub cross_bound: bool,
}

/// Couples the radii of u and v so that φ/r^n = (Aψ_j/r^{n-2})^λ, for critical σ < σ ≤ λ.
pub fn schedule_above_curve(lambda: f64, sigma: f64, h: &dyn Fn(f64) -> f64, xs: &[Point]) -> Result<AboveCurvePair> {
    let n = xs.first().map_or(0, Point::dim);
    if n < 3 {
        return domain("the above-curve schedule needs n >= 3");
    }
    let nf = n as f64;
    let m = nf - 2.0;
    if !(sigma <= lambda) {
        return domain(format!("need sigma <= lambda, got sigma = {sigma}, lambda = {lambda}"));
    }
    let crit = critical_sigma(lambda, n)?;
    if !(sigma > crit) {
        return domain(format!("sigma = {sigma} must exceed the critical value 2/(n-2) + n/((n-2)lambda) = {crit}"));
    }
    let sigma_used = if sigma < nf / m { sigma } else { 0.5 * (crit + nf / m) };
    let alpha = 1.0 / (m * lambda - nf);
    let beta = 1.0 / (nf - m * sigma_used);
    if !(beta > alpha * lambda && alpha * lambda > 0.0) {
        return Err(Error::Domain(format!("need beta > alpha*lambda > 0, got beta = {beta}, alpha = {alpha}")));
    }
    let a = lower_constant(n)?;
    let la = a.ln();
    let phi = weights(xs, &|r| r);
    let log_psi = |lphi: f64, lr: f64| (lphi + lr / alpha) / lambda - la;
    let mut log_radii = Vec::with_capacity(xs.len());
    let mut psi = Vec::with_capacity(xs.len());
    let mut prev_psi = f64::INFINITY;
    for (x, &p) in xs.iter().zip(&phi) {
        let lphi = p.ln();
        let lh2 = 2.0 * h(x.norm()).ln();
        let mut lr = (x.norm() / 2.0).ln();
        let mut found = false;
        for _ in 0..4000 {
            let lpsi = log_psi(lphi, lr);
            let c1 = la + lphi - m * lr > lh2;
            let c2 = (alpha * lambda - beta) * lpsi
                >= (alpha - sigma_used * beta) * lphi - (sigma_used * beta + alpha * lambda) * la;
            let c3 = la + lpsi - m * lr > lh2;
            let c4 = lpsi < 0.0 && lpsi <= prev_psi - std::f64::consts::LN_2;
            if c1 && c2 && c3 && c4 {
                found = true;
                break;
            }
            lr -= std::f64::consts::LN_2;
        }
        if !found {
            return domain("radius search did not meet the coupling conditions");
        }
        let lpsi = log_psi(lphi, lr);
        prev_psi = lpsi;
        log_radii.push(lr);
        psi.push(lpsi.exp());
    }
    let mut defect: f64 = 0.0;
    let mut cross = true;
    for j in 0..xs.len() {
        let (lr, lphi, lpsi) = (log_radii[j], phi[j].ln(), psi[j].ln());
        let lhs = lphi - nf * lr;
        let rhs = lambda * (la + lpsi - m * lr);
        defect = defect.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        cross &= lpsi - nf * lr <= sigma_used * (la + lphi - m * lr) + 1e-12 * lhs.abs().max(1.0);
    }
    let u_seed = SeedSequence::new(xs.to_vec(), log_radii.clone(), phi)?;
    let v_seed = SeedSequence::new(xs.to_vec(), log_radii, psi)?;
    Ok(AboveCurvePair { u_seed, v_seed, alpha, beta, sigma_used, identity_defect: defect, cross_bound: cross })
}

/// One row of a blow-up measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub j: usize,
    pub norm: f64,
    pub log_radius: f64,
    pub u: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub rows: Vec<BlowupRow>,
    pub growth: Growth,
}

/// Ratios u(x_j)/h(|x_j|), classified by the growth-trend rule with the given factor.
pub fn measure_blowup(sol: &SingularSolution, h: &dyn Fn(f64) -> f64, factor: f64) -> BlowupReport {
    let origin = vec![0.0; sol.n];
    let rows: Vec<BlowupRow> = (0..sol.seed.len())
        .map(|j| {
            let norm = sol.seed.points[j].norm();
            let u = sol.u_local(j, &origin);
            BlowupRow { j: sol.seed.indices[j], norm, log_radius: sol.seed.log_radii[j], u, ratio: u / h(norm) }
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    BlowupReport { growth: growth_trend(&ratios, factor), rows }
}

pub fn write_blowup_csv(rows: &[BlowupRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "norm", "log_radius", "u", "ratio"]).map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.j.to_string(),
            format!("{:e}", r.norm),
            format!("{:e}", r.log_radius),
            format!("{:e}", r.u),
            format!("{:e}", r.ratio),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Domain(format!("write failed: {e}")))?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::Domain(format!("write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_seed(n: usize, count: usize) -> SeedSequence {
        let xs = make_xseq(n, 0.2, 0.2, count).unwrap();
        let lr = xs.iter().map(|x| (x.norm() / 2.0).ln()).collect();
        let phi = xs.iter().map(Point::norm).collect();
        SeedSequence::new(xs, lr, phi).unwrap()
    }

    #[test]
    fn xseq_rules() {
        let xs = make_xseq(3, 0.2, 0.2, 6).unwrap();
        for (j, x) in xs.iter().enumerate() {
            assert_relative_eq!(x.norm(), 5f64.powi(-(j as i32 + 1)), max_relative = 1e-14);
        }
        assert!(make_xseq(3, 0.25, 0.2, 6).is_err());
        assert!(make_xseq(3, 0.2, 0.5, 6).is_err());
        let phi: f64 = xs.iter().map(Point::norm).sum();
        assert!(phi < 0.25);
    }

    #[test]
    fn seed_invariants_rejected() {
        let xs = make_xseq(3, 0.2, 0.2, 3).unwrap();
        let phi: Vec<f64> = xs.iter().map(Point::norm).collect();
        let too_big = xs.iter().map(|x| x.norm().ln()).collect();
        assert!(SeedSequence::new(xs.clone(), too_big, phi.clone()).is_err());
        let close = vec![Point::on_axis(3, 0.2), Point::on_axis(3, 0.06)];
        assert!(SeedSequence::new(close, vec![-5.0, -6.0], vec![0.1, 0.05]).is_err());
        assert!(SeedSequence::new(xs.clone(), vec![-5.0, -6.0, -7.0], vec![0.1, 1.0, 0.01]).is_err());
        assert!(!summable_trend(&[1.0, 0.5, 0.6, 0.7]));
        assert!(summable_trend(&[1.0, 0.5, 0.25, 0.125]));
    }

    #[test]
    fn bump_integral_matches_cartesian_sum() {
        let b = BumpProfile::new(3).unwrap();
        let k = 80;
        let h = 2.0 / k as f64;
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let c = |a: usize| -1.0 + (a as f64 + 0.5) * h;
                    acc += bump(norm(&[c(i), c(j), c(l)]));
                }
            }
        }
        assert_relative_eq!(b.i, acc * h * h * h, max_relative = 1e-4);
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
    }

    #[test]
    fn profile_potential_continuous_and_minimal_at_edge() {
        let b = BumpProfile::new(3).unwrap();
        assert_relative_eq!(b.potential(1.0 - 1e-9), b.i, max_relative = 1e-6);
        assert_relative_eq!(b.j.unwrap(), b.i, max_relative = 1e-12);
        assert!(b.potential(0.0) > b.potential(0.5));
        let b2 = BumpProfile::new(2).unwrap();
        assert_relative_eq!(b2.log_potential(1.0 - 1e-9), b2.i * 4f64.ln(), max_relative = 1e-6);
        assert!(b2.j.is_none());
    }

    #[test]
    fn profile_potential_matches_direct_quadrature() {
        // independent check: brute-force ∫ψ(η)|ξ-η|^{-1}dη in R^3 at |ξ| = 2
        let b = BumpProfile::new(3).unwrap();
        let k = 60;
        let h = 2.0 / k as f64;
        let xi = [2.0, 0.0, 0.0];
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let c = |a: usize| -1.0 + (a as f64 + 0.5) * h;
                    let y = [c(i), c(j), c(l)];
                    acc += bump(norm(&y)) / dist(&xi, &y);
                }
            }
        }
        assert_relative_eq!(b.potential(2.0), acc * h * h * h, max_relative = 1e-3);
    }

    #[test]
    fn reference_seed_passes_all_checks() {
        let sol = build_bump_solution(reference_seed(3, 6)).unwrap();
        let c = check_bump_solution(&sol, 20, 7);
        assert!(c.all_pass(), "{c:?}");
        assert!(c.poisson_residual < 1e-3, "{c:?}");
        assert_relative_eq!(c.total_mass, sol.bump.i * 0.25 * (1.0 - 5f64.powi(-6)), max_relative = 1e-12);
        assert_relative_eq!(sol.a_const, sol.b_const * sol.bump.i, max_relative = 1e-12);
    }

    #[test]
    fn planar_seed_passes_all_checks() {
        let sol = build_bump_solution(reference_seed(2, 5)).unwrap();
        assert_relative_eq!(sol.a_const, sol.bump.i / (2.0 * PI), max_relative = 1e-14);
        let c = check_bump_solution(&sol, 12, 3);
        assert!(c.all_pass(), "{c:?}");
        assert!(c.poisson_residual < 1e-3, "{c:?}");
    }

    #[test]
    fn u_matches_direct_superposition_outside_balls() {
        let sol = build_bump_solution(reference_seed(3, 3)).unwrap();
        let x = Point::new(vec![0.3, 0.4, 0.1]).unwrap();
        let direct: f64 = 1.0
            + (0..3)
                .map(|j| {
                    let mass = sol.seed.phi_values[j] * sol.bump.i;
                    mass / (4.0 * PI * x.dist(&sol.seed.points[j]))
                })
                .sum::<f64>();
        assert_relative_eq!(sol.u(&x), direct, max_relative = 1e-13);
    }

    #[test]
    fn own_lower_bound_ratios_at_least_one() {
        let sol = build_bump_solution(reference_seed(3, 5)).unwrap();
        let rep = measure_blowup(
            &sol,
            &|r| {
                let j = sol.seed.points.iter().position(|p| (p.norm() - r).abs() < 1e-15).unwrap();
                sol.lower_bound(j)
            },
            2.0,
        );
        assert!(rep.rows.iter().all(|r| r.ratio >= 1.0));
        let flat = measure_blowup(&sol, &|_| 1e300, 2.0);
        assert_eq!(flat.growth, Growth::Bounded);
    }

    #[test]
    fn growth_rate_oracle() {
        let sq = |t: f64| t * t;
        for t in [1.0, 3.0, 10.0] {
            assert_relative_eq!(min_growth_rate(&sq, t), t, max_relative = 1e-12);
        }
    }

    #[test]
    fn superexponential_conditions_hold() {
        let xs = make_xseq(2, 0.2, 0.2, 4).unwrap();
        let sq = |t: f64| t * t;
        let h = |r: f64| (1.0 / r).ln();
        let seed = schedule_superexponential(&sq, &sq, &h, &xs).unwrap();
        let a = lower_constant(2).unwrap();
        for j in 0..seed.len() {
            let l = -seed.log_radii[j];
            let p = seed.phi_values[j];
            let t = a * p * l;
            assert!((a * p).powi(2) * l > 2.0);
            assert!(h(xs[j].norm()).powi(2) < t);
            // shrinking further keeps every condition
            assert!(a * p * min_growth_rate(&sq, 2.0 * t) > 2.0);
        }
        let linear = |t: f64| t;
        assert!(schedule_superexponential(&linear, &sq, &h, &xs).is_err());
        let negative = |t: f64| -t;
        assert!(schedule_superexponential(&negative, &sq, &h, &xs).is_err());
    }

    #[test]
    fn superexponential_solution_checks() {
        let xs = make_xseq(2, 0.2, 0.2, 3).unwrap();
        let sq = |t: f64| t * t;
        let seed = schedule_superexponential(&sq, &sq, &|r: f64| (1.0 / r).ln(), &xs).unwrap();
        let sol = build_bump_solution(seed).unwrap();
        let c = check_bump_solution(&sol, 8, 1);
        assert!(c.lower_bound && c.u_at_least_one && c.density_cap && c.superharmonic, "{c:?}");
    }

    #[test]
    fn exponential_pair_drop_index() {
        let xs = make_xseq(2, 0.2, 0.2, 6).unwrap();
        let seed = schedule_exponential_pair(&|t: f64| t * t, &|r| r, &xs).unwrap();
        // direct scan for the first index with r_j <= |x_j|/2
        let first = (1..=6usize)
            .find(|&j| {
                let x = 5f64.powi(-(j as i32));
                -0.5 * (2.0 / x).ln().powi(2) <= (x / 2.0).ln()
            })
            .unwrap();
        assert_eq!(seed.indices[0], first);
        for j in 0..seed.len() {
            assert_relative_eq!(seed.phi_values[j], seed.points[j].norm().sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn sharp_rate_keeps_from_four() {
        let xs = make_xseq(3, 0.2, 0.2, 8).unwrap();
        let seed = schedule_sharp_rate(4.0, &|r| r, &xs).unwrap();
        assert_eq!(seed.indices, vec![4, 5, 6, 7, 8]);
        assert!(schedule_sharp_rate(3.0, &|r| r, &xs).is_err());
        let sol = build_bump_solution(seed).unwrap();
        let rep = measure_blowup(&sol, &|r| r * r.powf(-4.0 / 3.0), 10.0);
        assert_eq!(rep.growth, Growth::Diverges);
        // the ratio grows like 1/√ψ, a factor √5 per step
        for w in rep.rows.windows(2) {
            assert_relative_eq!(w[1].ratio / w[0].ratio, 5f64.sqrt(), max_relative = 0.05);
        }
    }

    #[test]
    fn above_curve_pair() {
        let xs = make_xseq(3, 0.2, 0.2, 5).unwrap();
        let h = |r: f64| 1.0 / r;
        let pair = schedule_above_curve(4.0, 2.9, &h, &xs).unwrap();
        assert_relative_eq!(pair.alpha, 1.0, max_relative = 1e-14);
        assert_relative_eq!(pair.beta, 10.0, max_relative = 1e-12);
        assert!(pair.identity_defect < 1e-13);
        assert!(pair.cross_bound);
        let err = schedule_above_curve(4.0, 2.5, &h, &xs).unwrap_err().to_string();
        assert!(err.contains("critical"), "{err}");
        assert!(schedule_above_curve(4.0, 4.5, &h, &xs).is_err());
        // σ = 3.5 ≥ n/(n-2) is reduced into (critical, 3)
        let red = schedule_above_curve(4.0, 3.5, &h, &xs).unwrap();
        assert!(red.sigma_used > 2.75 && red.sigma_used < 3.0);
        for seed in [&pair.u_seed, &pair.v_seed] {
            let sol = build_bump_solution(seed.clone()).unwrap();
            let rep = measure_blowup(&sol, &|r| h(r), 2.0);
            assert!(rep.rows.iter().all(|r| r.ratio > h(r.norm)), "{rep:?}");
        }
    }

    #[test]
    fn steep_schedules_pass_all_checks() {
        let xs = make_xseq(2, 0.2, 0.2, 6).unwrap();
        let seed = schedule_exponential_pair(&|t: f64| t * t, &|r| r, &xs).unwrap();
        let c = check_bump_solution(&build_bump_solution(seed).unwrap(), 12, 2);
        assert!(c.all_pass(), "{c:?}");
        let xs = make_xseq(3, 0.2, 0.2, 6).unwrap();
        let pair = schedule_above_curve(4.0, 2.9, &|r: f64| 1.0 / r, &xs).unwrap();
        for seed in [pair.u_seed, pair.v_seed] {
            let c = check_bump_solution(&build_bump_solution(seed).unwrap(), 12, 2);
            assert!(c.all_pass(), "{c:?}");
        }
    }

    #[test]
    fn blowup_csv_header() {
        let sol = build_bump_solution(reference_seed(3, 2)).unwrap();
        let rep = measure_blowup(&sol, &|_| 1.0, 2.0);
        let mut buf = Vec::new();
        write_blowup_csv(&rep.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,norm,log_radius,u,ratio\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn xseq_invariants(rho in 0.01f64..0.249, first in 0.01f64..0.49, count in 1usize..8) {
            let xs = make_xseq(3, rho, first, count).unwrap();
            let lr = xs.iter().map(|x| (x.norm() / 2.0).ln()).collect();
            let phi = xs.iter().map(|x| x.norm()).collect();
            prop_assert!(SeedSequence::new(xs, lr, phi).is_ok());
        }

        #[test]
        fn dropping_prefix_preserves_validity(drop in 0usize..5) {
            let seed = reference_seed(3, 6);
            prop_assert!(seed.retain_from(drop).validate().is_ok());
        }
    }
}
