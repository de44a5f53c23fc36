//! Two-pass potentials: Havin-Maz'ya U_{α,p}, its Bessel analogue V_{α,p}, and N((Ng)^σ).

use rayon::prelude::*;

use super::kernel::{BesselKernel, NewtonKernel, RadialKernel, RieszKernel};
use super::linear::{grid_kernel_sum, kernel_sum, riesz_layercake};
use super::PotentialValue;
use crate::core_model::{dist, equal_volume_radius, sphere_area, Ball, GridDensity, Measure, Point};
use crate::error::{domain, Error, Result};

/// Which linear potential the two-pass operator composes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Inner {
    Riesz(f64),
    Bessel,
}

/// Box that holds the support of `mu` and every probe, padded by its own half-width.
fn working_grid(mu: &Measure, probes: &[Point], cells: usize) -> Result<GridDensity> {
    let n = probes[0].dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut take = |p: &[f64]| {
        for i in 0..n {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    };
    for p in probes {
        take(&p.0);
    }
    match mu {
        Measure::Atomic(a) => a.points.iter().for_each(|p| take(&p.0)),
        Measure::Grid(g) => {
            take(&g.lo);
            take(&g.hi);
        }
        Measure::Radial(r) => {
            let o = r.outer_radius();
            take(&vec![-o; n]);
            take(&vec![o; n]);
        }
    }
    let half = (0..n).map(|i| 0.5 * (hi[i] - lo[i])).fold(0.5, f64::max);
    let mid: Vec<f64> = (0..n).map(|i| 0.5 * (hi[i] + lo[i])).collect();
    let lo = mid.iter().map(|m| m - 2.0 * half).collect();
    let hi = mid.iter().map(|m| m + 2.0 * half).collect();
    GridDensity::new(lo, hi, vec![cells; n], vec![0.0; cells.pow(n as u32)])
}

/// Inner linear potential of `mu` at every working-cell centre, never sampled exactly at an atom.
fn inner_field<K: RadialKernel>(mu: &Measure, w: &GridDensity, k: &K, inner: Inner) -> Result<Vec<f64>> {
    let rho = equal_volume_radius(w.dim(), w.cell_volume());
    let own_avg = k.ball_average(rho);
    match mu {
        Measure::Atomic(a) => {
            let owner: Vec<Option<usize>> = a.points.iter().map(|p| w.cell_of(&p.0)).collect();
            Ok((0..w.len())
                .into_par_iter()
                .map(|i| {
                    let c = w.center(i);
                    a.points
                        .iter()
                        .zip(&a.masses)
                        .zip(&owner)
                        .map(|((p, m), o)| if *o == Some(i) { m * own_avg } else { m * k.value(dist(&c, &p.0)) })
                        .sum()
                })
                .collect())
        }
        Measure::Grid(_) => {
            (0..w.len()).into_par_iter().map(|i| kernel_sum(mu, &Point(w.center(i)), k).map(|v| v.value)).collect()
        }
        Measure::Radial(_) => match inner {
            Inner::Riesz(alpha) => (0..w.len())
                .into_par_iter()
                .map(|i| riesz_layercake(mu, alpha, &Point(w.center(i)), 256).map(|v| v.value))
                .collect(),
            Inner::Bessel => Err(Error::Unsupported("Bessel potentials of radial measures off the origin".into())),
        },
    }
}

fn two_pass<K: RadialKernel>(
    mu: &Measure,
    p: f64,
    xs: &[Point],
    cells: usize,
    k: &K,
    inner: Inner,
    tail_alpha: Option<f64>,
) -> Result<Vec<PotentialValue>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let n = xs[0].dim();
    if xs.iter().any(|x| x.dim() != n) || mu.dim().is_some_and(|d| d != n) {
        return domain("dimension mismatch between measure and probes");
    }
    let q = 1.0 / (p - 1.0);
    let w = working_grid(mu, xs, cells)?;
    let field = inner_field(mu, &w, k, inner)?;
    let powered: Vec<f64> = field.iter().map(|v| v.powf(q)).collect();
    let tail = match tail_alpha {
        Some(alpha) => monopole_tail(mu.total_mass(), alpha, q, n, &w),
        None => 0.0,
    };
    Ok(xs
        .iter()
        .map(|x| {
            let v = grid_kernel_sum(&w, &powered, &x.0, k);
            PotentialValue { value: v.value + tail, error_estimate: v.error_estimate + 0.5 * tail }
        })
        .collect())
}

/// Far-field correction: the outer integral over the complement of the working box with the inner
/// field replaced by its monopole M|y|^{α-n}/(n-α).
fn monopole_tail(mass: f64, alpha: f64, q: f64, n: usize, w: &GridDensity) -> f64 {
    if mass == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let r = 0.5 * (w.hi[0] - w.lo[0]);
    let decay = (nf - alpha) * q - alpha;
    sphere_area(n) * (mass / (nf - alpha)).powf(q) * r.powf(-decay) / ((nf - alpha) * decay)
}

/// U_{α,p}μ(x) = I_α((I_α μ)^{1/(p-1)})(x) at each probe, sharing one inner field.
pub fn havin_mazya_many(mu: &Measure, alpha: f64, p: f64, xs: &[Point], cells: usize) -> Result<Vec<PotentialValue>> {
    let n = xs.first().map(|x| x.dim()).unwrap_or(3);
    check(alpha, p, n, false)?;
    two_pass(mu, p, xs, cells, &RieszKernel { alpha, n }, Inner::Riesz(alpha), Some(alpha))
}

/// U_{α,p}μ(x) = I_α((I_α μ)^{1/(p-1)})(x).
pub fn havin_mazya(mu: &Measure, alpha: f64, p: f64, x: &Point, cells: usize) -> Result<PotentialValue> {
    Ok(havin_mazya_many(mu, alpha, p, std::slice::from_ref(x), cells)?[0])
}

/// V_{α,p}μ(x) = J_α((J_α μ)^{1/(p-1)})(x) at each probe.
pub fn v_potential_many(mu: &Measure, alpha: f64, p: f64, xs: &[Point], cells: usize) -> Result<Vec<PotentialValue>> {
    let n = xs.first().map(|x| x.dim()).unwrap_or(3);
    check(alpha, p, n, true)?;
    two_pass(mu, p, xs, cells, BesselKernel::cached(alpha, n).as_ref(), Inner::Bessel, None)
}

/// V_{α,p} without the α·p ≤ n restriction; finite for bounded densities of any order.
pub(crate) fn v_potential_unrestricted(
    mu: &Measure,
    alpha: f64,
    p: f64,
    xs: &[Point],
    cells: usize,
) -> Result<Vec<PotentialValue>> {
    if !(p > 1.0 && alpha > 0.0) {
        return domain("need p > 1 and alpha > 0");
    }
    let n = xs.first().map(|x| x.dim()).unwrap_or(3);
    two_pass(mu, p, xs, cells, BesselKernel::cached(alpha, n).as_ref(), Inner::Bessel, None)
}

/// V_{α,p}μ(x) = J_α((J_α μ)^{1/(p-1)})(x).
pub fn v_potential(mu: &Measure, alpha: f64, p: f64, x: &Point, cells: usize) -> Result<PotentialValue> {
    Ok(v_potential_many(mu, alpha, p, std::slice::from_ref(x), cells)?[0])
}

fn check(alpha: f64, p: f64, n: usize, allow_equal: bool) -> Result<()> {
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    let ap = alpha * p;
    let nf = n as f64;
    if !(alpha > 0.0) || ap > nf || (!allow_equal && ap == nf) {
        let rel = if allow_equal { "<=" } else { "<" };
        return domain(format!("need 0 < alpha and alpha*p {rel} n, got alpha*p = {ap}, n = {n}"));
    }
    Ok(())
}

/// N((Ng)^σ) for a density on a ball, with the inner field materialized once.
#[derive(Debug, Clone)]
pub struct CompositeNN {
    grid: GridDensity,
    coverage: Vec<f64>,
    powered: Vec<f64>,
    sigma: f64,
}

impl CompositeNN {
    pub fn new(g: &GridDensity, ball: &Ball, sigma: f64) -> Result<Self> {
        let n = g.dim();
        if n < 3 {
            return domain("the Newtonian kernel needs n >= 3");
        }
        if !(sigma >= 0.0) {
            return domain(format!("sigma must be nonnegative, got {sigma}"));
        }
        let coverage = g.coverage(ball, crate::core_model::subsamples_for(n));
        let weighted: Vec<f64> = g.values.iter().zip(&coverage).map(|(v, c)| v * c).collect();
        let k = NewtonKernel { n };
        let powered = (0..g.len())
            .into_par_iter()
            .map(|i| {
                if coverage[i] == 0.0 {
                    0.0
                } else {
                    let inner = grid_kernel_sum(g, &weighted, &g.center(i), &k).value;
                    coverage[i] * inner.powf(sigma)
                }
            })
            .collect();
        Ok(CompositeNN { grid: g.clone(), coverage, powered, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, x: &Point) -> PotentialValue {
        grid_kernel_sum(&self.grid, &self.powered, &x.0, &NewtonKernel { n: self.grid.dim() })
    }

    /// Maximum over the centres of cells that meet the ball.
    pub fn sup_on_cells(&self) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .filter(|&i| self.coverage[i] > 0.0)
            .map(|i| self.eval(&Point(self.grid.center(i))).value)
            .reduce(|| 0.0, f64::max)
    }
}

/// N((Ng)^σ)(x).
pub fn composite_nn(g: &GridDensity, ball: &Ball, sigma: f64, x: &Point) -> Result<PotentialValue> {
    Ok(CompositeNN::new(g, ball, sigma)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::linear::newtonian_ball;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn two_atoms() -> Measure {
        Measure::atomic(vec![Point(vec![0.3, 0.0, 0.0]), Point(vec![-0.2, 0.4, 0.1])], vec![1.0, 0.7]).unwrap()
    }

    #[test]
    fn havin_mazya_scales_with_degree_one_over_p_minus_one() {
        let mu = two_atoms();
        let x = Point(vec![0.1, 0.1, 0.6]);
        let p = 2.5;
        let a = havin_mazya(&mu, 1.0, p, &x, 12).unwrap().value;
        let b = havin_mazya(&mu.scale(3.0).unwrap(), 1.0, p, &x, 12).unwrap().value;
        assert_relative_eq!(b, 3f64.powf(1.0 / (p - 1.0)) * a, max_relative = 1e-12);
    }

    #[test]
    fn zero_measure_gives_zero() {
        let zero = Measure::atomic(vec![Point::origin(3)], vec![0.0]).unwrap();
        let x = Point::on_axis(3, 0.5);
        assert_eq!(havin_mazya(&zero, 1.0, 2.0, &x, 8).unwrap().value, 0.0);
        assert_eq!(v_potential(&zero, 1.0, 2.0, &x, 8).unwrap().value, 0.0);
    }

    #[test]
    fn u_one_two_tracks_newtonian_up_to_constant() {
        let mu = two_atoms();
        let xs: Vec<Point> = [0.9, 1.3, 1.8].iter().map(|&t| Point(vec![t, 0.2, -0.1])).collect();
        let u = havin_mazya_many(&mu, 1.0, 2.0, &xs, 20).unwrap();
        let ratios: Vec<f64> = xs
            .iter()
            .zip(&u)
            .map(|(x, u)| u.value / crate::potentials::riesz_kernel(&mu, 2.0, x).unwrap().value)
            .collect();
        let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.5, "{ratios:?}");
    }

    #[test]
    fn v_below_constant_times_u() {
        let mu = two_atoms();
        let xs: Vec<Point> = [0.5, 1.0, 2.0].iter().map(|&t| Point(vec![t, -0.1, 0.2])).collect();
        let u = havin_mazya_many(&mu, 1.0, 2.0, &xs, 12).unwrap();
        let v = v_potential_many(&mu, 1.0, 2.0, &xs, 12).unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!(b.value <= a.value);
        }
    }

    #[test]
    fn composite_sigma_zero_is_newtonian_of_one() {
        let g = GridDensity::cube(3, 1.0, 16, |c| 1.0 + c[0] * c[0]).unwrap();
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        let x = Point(vec![0.2, 0.1, 0.0]);
        let one = GridDensity::cube(3, 1.0, 16, |_| 1.0).unwrap();
        let a = composite_nn(&g, &ball, 0.0, &x).unwrap().value;
        let b = newtonian_ball(&one, &ball, &x).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn composite_uniform_ball_sigma_one() {
        let g = GridDensity::cube(3, 1.0, 28, |_| 1.0).unwrap();
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        let h = 1.0 / 28.0;
        let v = composite_nn(&g, &ball, 1.0, &Point(vec![h, h, h])).unwrap().value;
        let exact = 8.0 * PI * PI * 5.0 / 12.0;
        assert_relative_eq!(exact, 32.899, max_relative = 1e-4);
        assert_relative_eq!(v, exact, max_relative = 1e-2);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mu = two_atoms();
        let x = Point::on_axis(3, 1.0);
        assert!(havin_mazya(&mu, 1.5, 2.0, &x, 8).is_err());
        assert!(v_potential(&mu, 1.5, 2.0, &x, 8).is_ok());
        assert!(v_potential(&mu, 1.0, 1.0, &x, 8).is_err());
    }
}
