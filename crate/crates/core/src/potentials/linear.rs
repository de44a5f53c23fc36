//! Riesz, Bessel and Newtonian potentials: linear in the measure.

use rayon::prelude::*;

use super::kernel::{BesselKernel, NewtonKernel, RadialKernel, RieszKernel};
use super::profile::{power_exp_integral, ring_integral, Profile, RingQuad};
use super::PotentialValue;
use crate::core_model::{dist, equal_volume_radius, sphere_area, Ball, GridDensity, Measure, Point};
use crate::error::{domain, Error, Result};

/// Cells per chunk of a parallel grid sum.
const PAR_CELLS: usize = 4096;

fn check_alpha(alpha: f64, n: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < n as f64) {
        return domain(format!("order alpha must lie in (0, {n}), got {alpha}"));
    }
    Ok(())
}

fn dim_of(mu: &Measure, x: &Point) -> Result<usize> {
    if let Some(d) = mu.dim() {
        if d != x.dim() {
            return domain(format!("measure lives in R^{d} but the point has {} coordinates", x.dim()));
        }
    }
    if x.dim() < 2 {
        return domain("dimension must be at least 2");
    }
    Ok(x.dim())
}

/// ∫ K(|x-y|) dμ(y), with the cell containing `x` integrated over its equal-volume ball.
pub fn kernel_sum<K: RadialKernel>(mu: &Measure, x: &Point, k: &K) -> Result<PotentialValue> {
    match mu {
        Measure::Atomic(a) => {
            let mut v = 0.0;
            for (p, m) in a.points.iter().zip(&a.masses) {
                let d = p.dist(x);
                if d == 0.0 {
                    if *m > 0.0 {
                        return Err(Error::AtomAtPoint);
                    }
                    continue;
                }
                v += m * k.value(d);
            }
            Ok(PotentialValue::exact(v))
        }
        Measure::Grid(g) => Ok(grid_kernel_sum(g, &g.values, &x.0, k)),
        Measure::Radial(r) => {
            if x.norm() != 0.0 {
                return Err(Error::Unsupported(
                    "kernel form of a radial measure is only available at the origin; use the layer-cake route".into(),
                ));
            }
            let n = r.dim as i32;
            let area = sphere_area(r.dim);
            let mut v = 0.0;
            let mut r0: f64 = 0.0;
            let mut m0 = 0.0;
            for (&r1, &m1) in r.knot_radii.iter().zip(&r.cumulative_mass) {
                if m1 > m0 {
                    let density = (m1 - m0) * r.dim as f64 / (area * (r1.powi(n) - r0.powi(n)));
                    v += density * area * k.shell_integral(r0, r1);
                }
                r0 = r1;
                m0 = m1;
            }
            Ok(PotentialValue::exact(v))
        }
    }
}

/// Σ_cells w_c·vol·K(|x-c|) with the own-cell rule and a midpoint-rule error estimate.
pub(crate) fn grid_kernel_sum<K: RadialKernel>(g: &GridDensity, weights: &[f64], x: &[f64], k: &K) -> PotentialValue {
    let vol = g.cell_volume();
    let h2 = g.spacing().iter().map(|h| h * h).sum::<f64>() / g.dim() as f64;
    let own = g.cell_of(x);
    let term = |i: usize| -> (f64, f64) {
        let w = weights[i];
        if w == 0.0 || Some(i) == own {
            return (0.0, 0.0);
        }
        let c = g.center(i);
        let d = dist(&c, x);
        (w * vol * k.value(d), w * vol * k.laplacian(d).abs() * h2 / 24.0)
    };
    let add = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);
    let chunk_sum = |c: usize| {
        let hi = ((c + 1) * PAR_CELLS).min(g.len());
        (c * PAR_CELLS..hi).map(term).fold((0.0, 0.0), add)
    };
    // fixed chunks summed in order keep the result bit-identical across thread counts
    let chunks = g.len().div_ceil(PAR_CELLS);
    let (mut v, mut e) = if chunks > 1 {
        let parts: Vec<(f64, f64)> = (0..chunks).into_par_iter().map(chunk_sum).collect();
        parts.into_iter().fold((0.0, 0.0), add)
    } else {
        chunk_sum(0)
    };
    if let Some(i) = own {
        let own_part = weights[i] * k.ball_integral(equal_volume_radius(g.dim(), vol));
        v += own_part;
        e += 0.05 * own_part;
    }
    PotentialValue { value: v, error_estimate: e }
}

/// Riesz potential I_α μ(x) by ring quadrature of the ball-mass profile.
pub fn riesz_layercake(mu: &Measure, alpha: f64, x: &Point, rings: usize) -> Result<PotentialValue> {
    let n = dim_of(mu, x)?;
    check_alpha(alpha, n)?;
    let profile = Profile::new(mu, x)?;
    let e = n as f64 - alpha;
    let weight = |a: f64, b: f64| power_exp_integral(e, 0.0, a, b);
    let head = |c: f64, r_min: f64| c * r_min.powf(alpha) / alpha;
    let q = RingQuad { rings, transform: &|m| m, weight_integral: &weight, head: &head, r_max: None, n };
    let b = ring_integral(&profile, &q)?;
    Ok(PotentialValue { value: b.value, error_estimate: b.half_width })
}

/// Riesz potential I_α μ(x) = (n-α)^{-1} ∫ |x-y|^{α-n} dμ(y) by direct summation.
pub fn riesz_kernel(mu: &Measure, alpha: f64, x: &Point) -> Result<PotentialValue> {
    let n = dim_of(mu, x)?;
    check_alpha(alpha, n)?;
    kernel_sum(mu, x, &RieszKernel { alpha, n })
}

/// Bessel potential J_α μ(x) = ∫ G_α(x-t) dμ(t).
pub fn bessel(mu: &Measure, alpha: f64, x: &Point) -> Result<PotentialValue> {
    let n = dim_of(mu, x)?;
    if !(alpha > 0.0) {
        return domain(format!("Bessel order must be positive, got {alpha}"));
    }
    kernel_sum(mu, x, BesselKernel::cached(alpha, n).as_ref())
}

/// N f(x) = ∫_B f(y)|x-y|^{2-n} dy for x in the closure of B.
pub fn newtonian_ball(f: &GridDensity, ball: &Ball, x: &Point) -> Result<PotentialValue> {
    if ball.center.dist(x) > ball.radius * (1.0 + 1e-12) {
        return domain("newtonian_ball needs the evaluation point in the closed ball");
    }
    newtonian_restricted(f, ball, x)
}

/// (N_R f)(ξ) = ∫_{|ζ|<R} |ξ-ζ|^{2-n} f(ζ) dζ.
pub fn truncated_newtonian(f: &GridDensity, r: f64, xi: &Point) -> Result<PotentialValue> {
    let ball = Ball::new(Point::origin(f.dim()), r)?;
    newtonian_restricted(f, &ball, xi)
}

fn newtonian_restricted(f: &GridDensity, ball: &Ball, x: &Point) -> Result<PotentialValue> {
    let n = f.dim();
    if n < 3 {
        return domain("the Newtonian kernel |x|^{2-n} needs n >= 3");
    }
    if x.dim() != n || ball.center.dim() != n {
        return domain("dimension mismatch between density, ball and point");
    }
    let restricted = f.restricted_to_ball(ball);
    Ok(grid_kernel_sum(&restricted, &restricted.values, &x.0, &NewtonKernel { n }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p3(x: f64) -> Point {
        Point::on_axis(3, x)
    }

    #[test]
    fn dirac_riesz_examples() {
        let mu = Measure::dirac(Point::origin(3));
        assert_relative_eq!(riesz_layercake(&mu, 2.0, &p3(0.5), 512).unwrap().value, 2.0, max_relative = 1e-12);
        assert_relative_eq!(riesz_kernel(&mu, 2.0, &p3(0.5)).unwrap().value, 2.0, max_relative = 1e-14);
        assert_relative_eq!(riesz_layercake(&mu, 1.0, &p3(0.25), 512).unwrap().value, 8.0, max_relative = 1e-12);
        let zero = Measure::atomic(vec![], vec![]).unwrap();
        assert_eq!(riesz_layercake(&zero, 1.0, &p3(0.3), 64).unwrap().value, 0.0);
    }

    #[test]
    fn atom_at_point_errors() {
        let mu = Measure::dirac(Point::origin(3));
        assert_eq!(riesz_kernel(&mu, 1.0, &Point::origin(3)).unwrap_err(), Error::AtomAtPoint);
        assert_eq!(riesz_layercake(&mu, 1.0, &Point::origin(3), 64).unwrap_err(), Error::AtomAtPoint);
        assert!(riesz_kernel(&mu, 3.0, &p3(1.0)).is_err());
    }

    #[test]
    fn uniform_ball_riesz_two_at_center() {
        // I_2 of the unit-ball indicator at 0 in R^3: ∫_{B_1}|y|^{-1}dy/(n-2) = 2π
        let g = GridDensity::cube(3, 1.0, 40, |_| 1.0).unwrap();
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        let mu = Measure::Grid(g.restricted_to_ball(&ball));
        let v = riesz_kernel(&mu, 2.0, &Point(vec![0.0125, 0.0125, 0.0125])).unwrap();
        assert_relative_eq!(v.value, 2.0 * PI, max_relative = 5e-3);
    }

    #[test]
    fn radial_uniform_ball_at_origin() {
        let knots: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let cum: Vec<f64> = knots.iter().map(|r| 4.0 / 3.0 * PI * r * r * r).collect();
        let mu = Measure::Radial(crate::core_model::RadialMeasure::new(3, knots, cum).unwrap());
        let k = riesz_kernel(&mu, 2.0, &Point::origin(3)).unwrap().value;
        assert_relative_eq!(k, 2.0 * PI, max_relative = 1e-12);
        let l = riesz_layercake(&mu, 2.0, &Point::origin(3), 512).unwrap();
        assert!((l.value - 2.0 * PI).abs() <= l.error_estimate + 1e-9);
        let off = riesz_layercake(&mu, 2.0, &p3(0.3), 512).unwrap();
        // interior value of the uniform ball: 2π(1 - a²/3)
        assert!((off.value - 2.0 * PI * (1.0 - 0.03)).abs() <= off.error_estimate + 1e-6);
        assert!(riesz_kernel(&mu, 2.0, &p3(0.3)).is_err());
        // off-centre values are now exact up to ring quadrature, well inside 1e-3
        assert_relative_eq!(off.value, 2.0 * PI * (1.0 - 0.03), max_relative = 1e-3);
        let far = riesz_layercake(&mu, 2.0, &p3(2.0), 512).unwrap();
        assert_relative_eq!(far.value, 4.0 / 3.0 * PI / 2.0, max_relative = 1e-3);
    }

    #[test]
    fn newtonian_ball_examples() {
        let g = GridDensity::cube(3, 1.0, 48, |_| 1.0).unwrap();
        let ball = Ball::new(Point::origin(3), 1.0).unwrap();
        let h = 1.0 / 48.0;
        let centre = Point(vec![h, h, h]);
        assert_relative_eq!(
            newtonian_ball(&g, &ball, &centre).unwrap().value,
            2.0 * PI * (1.0 - 3.0 * h * h / 3.0),
            max_relative = 5e-3
        );
        assert_relative_eq!(newtonian_ball(&g, &ball, &p3(1.0)).unwrap().value, 4.0 * PI / 3.0, max_relative = 5e-3);
        let zero = GridDensity::cube(3, 1.0, 8, |_| 0.0).unwrap();
        assert_eq!(newtonian_ball(&zero, &ball, &p3(0.2)).unwrap().value, 0.0);
        assert!(newtonian_ball(&g, &ball, &p3(1.5)).is_err());
    }

    #[test]
    fn truncated_newtonian_examples() {
        let g = GridDensity::cube(3, 1.0, 32, |_| 1.0).unwrap();
        let full = truncated_newtonian(&g, 1.0, &Point(vec![1.0 / 32.0; 3])).unwrap().value;
        assert_relative_eq!(full, 2.0 * PI, max_relative = 1e-2);
        let small = truncated_newtonian(&g, 0.5, &Point(vec![1.0 / 32.0; 3])).unwrap().value;
        assert!(small < full);
        let hot =
            GridDensity::cube(3, 1.0, 8, |c| if c[0] > 0.7 && c[1] > 0.7 && c[2] > 0.7 { 5.0 } else { 0.0 }).unwrap();
        assert_eq!(truncated_newtonian(&hot, 0.5, &Point::origin(3)).unwrap().value, 0.0);
    }

    #[test]
    fn bessel_examples() {
        let mu = Measure::dirac(Point::origin(3));
        let v = bessel(&mu, 2.0, &p3(1.0)).unwrap().value;
        assert_relative_eq!(v, (-1.0f64).exp() / (4.0 * PI), max_relative = 1e-4);
        let zero = Measure::atomic(vec![], vec![]).unwrap();
        assert_eq!(bessel(&zero, 2.0, &p3(1.0)).unwrap().value, 0.0);
    }

    fn atoms3() -> impl Strategy<Value = Measure> {
        prop::collection::vec((prop::array::uniform3(-1.0f64..1.0), 0.01f64..2.0), 1..8).prop_map(|v| {
            Measure::atomic(v.iter().map(|(p, _)| Point(p.to_vec())).collect(), v.iter().map(|a| a.1).collect())
                .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn layercake_agrees_with_kernel_on_atoms(mu in atoms3(), alpha in 0.3f64..2.7,
                                                 x in prop::array::uniform3(-1.5f64..1.5)) {
            let x = Point(x.to_vec());
            prop_assume!(matches!(&mu, Measure::Atomic(a) if a.points.iter().all(|p| p.dist(&x) > 1e-3)));
            let a = riesz_layercake(&mu, alpha, &x, 512).unwrap();
            let b = riesz_kernel(&mu, alpha, &x).unwrap();
            prop_assert!((a.value - b.value).abs() <= a.error_estimate + b.error_estimate + 1e-9 * b.value);
        }

        #[test]
        fn layercake_agrees_with_kernel_on_grids(seed in 0u64..500, alpha in 0.5f64..2.5,
                                                 x in prop::array::uniform3(-1.2f64..1.2)) {
            let g = GridDensity::cube(3, 1.0, 8, |c| 1.0 + (c[0] * 3.0 + c[1] * 5.0 + seed as f64).sin()).unwrap();
            let mu = Measure::Grid(g);
            let x = Point(x.to_vec());
            let a = riesz_layercake(&mu, alpha, &x, 512).unwrap();
            let b = riesz_kernel(&mu, alpha, &x).unwrap();
            prop_assert!((a.value - b.value).abs() <= a.error_estimate + 1e-9 * b.value,
                "{} vs {} (+-{})", a.value, b.value, a.error_estimate);
        }

        #[test]
        fn riesz_monotone_in_measure(mu in atoms3(), extra in 0.0f64..1.0, alpha in 0.3f64..2.7) {
            let x = Point(vec![2.0, 2.0, 2.0]);
            let bigger = match &mu {
                Measure::Atomic(a) => Measure::atomic(a.points.clone(), a.masses.iter().map(|m| m + extra).collect()).unwrap(),
                _ => unreachable!(),
            };
            prop_assert!(riesz_kernel(&mu, alpha, &x).unwrap().value <= riesz_kernel(&bigger, alpha, &x).unwrap().value);
        }
    }
}
