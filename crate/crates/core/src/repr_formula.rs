//! Representation of nonnegative superharmonic functions on a punctured ball as
//! u = mΓ + ω∫Γ(|x-y|)dμ(y) + h, recovery of the point mass m from evaluations of u, and
//! harmonic-boundedness verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core_model::{gamma_kernel, omega, Dimension, Measure, Point};
use crate::error::{domain, Result};
use crate::potentials::kernel::{LogKernel, NewtonKernel};
use crate::potentials::kernel_sum;
use crate::report::{growth_trend, Growth, Verdict};

/// h(x) = c + b·x + xᵀAx with trace A = 0, so h is harmonic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HarmonicPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    /// Row-major n×n matrix; empty means zero.
    #[serde(default)]
    pub quadratic: Vec<Vec<f64>>,
}

impl HarmonicPoly {
    pub fn constant(c: f64) -> Self {
        HarmonicPoly { constant: c, ..Default::default() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !self.linear.is_empty() && self.linear.len() != n {
            return domain(format!("linear part has {} entries, expected {n}", self.linear.len()));
        }
        if !self.quadratic.is_empty() {
            if self.quadratic.len() != n || self.quadratic.iter().any(|r| r.len() != n) {
                return domain(format!("quadratic part must be {n}x{n}"));
            }
            let trace: f64 = (0..n).map(|i| self.quadratic[i][i]).sum();
            let size: f64 = self.quadratic.iter().flatten().map(|v| v.abs()).sum();
            if trace.abs() > 1e-12 * size.max(1.0) {
                return domain(format!("quadratic part must be trace-free to be harmonic, trace = {trace}"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        v += self.linear.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>();
        for (i, row) in self.quadratic.iter().enumerate() {
            v += x[i] * row.iter().zip(x).map(|(a, xj)| a * xj).sum::<f64>();
        }
        v
    }
}

/// The data (m, μ, h) of the representation on B_ε(0) \ {0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    pub m: f64,
    pub mu: Measure,
    #[serde(default)]
    pub harmonic: HarmonicPoly,
    pub epsilon: f64,
}

impl Decomposition {
    pub fn validate(&self) -> Result<()> {
        let n = Dimension::new(self.n)?.get();
        if !(self.m >= 0.0) || !self.m.is_finite() {
            return domain(format!("point mass m must be finite and nonnegative, got {}", self.m));
        }
        if !(self.epsilon > 0.0) {
            return domain("epsilon must be positive");
        }
        if let Some(d) = self.mu.dim() {
            if d != n {
                return domain(format!("measure lives in R^{d}, decomposition in R^{n}"));
            }
        }
        let total = self.mu.total_mass();
        if !total.is_finite() || total < 0.0 {
            return domain("measure must be finite and nonnegative");
        }
        self.harmonic.validate(n)
    }
}

/// ∫Γ(|x-y|)dμ(y) with Γ = r^{2-n} or log(2/r).
pub fn gamma_potential(mu: &Measure, x: &Point) -> Result<f64> {
    let v =
        if x.dim() == 2 { kernel_sum(mu, x, &LogKernel)? } else { kernel_sum(mu, x, &NewtonKernel { n: x.dim() })? };
    Ok(v.value)
}

/// u(x) = mΓ(|x|) + ω∫Γ(|x-y|)dμ(y) + h(x) for 0 < |x| < ε.
pub fn compose(dec: &Decomposition, x: &Point) -> Result<f64> {
    dec.validate()?;
    if x.dim() != dec.n {
        return domain(format!("point has {} coordinates, expected {}", x.dim(), dec.n));
    }
    let r = x.norm();
    if r == 0.0 {
        return domain("the representation is not defined at the origin");
    }
    if r >= dec.epsilon {
        return domain(format!("|x| = {r} must be below epsilon = {}", dec.epsilon));
    }
    let n = Dimension::new(dec.n)?;
    let singular = if dec.m == 0.0 { 0.0 } else { dec.m * gamma_kernel(r, n)? };
    Ok(singular + omega(n) * gamma_potential(&dec.mu, x)? + dec.harmonic.eval(x.coords()))
}

/// Geometric ladder 10^{-lo} .. 10^{-hi} with `count` points, largest first.
pub fn default_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|k| 10f64.powf(-(lo + (hi - lo) * k as f64 / (count - 1) as f64))).collect()
}

/// Least-squares fit of u/Γ against 1/Γ; the intercept is m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassFit {
    pub m: f64,
    /// Intercepts from the outer and inner halves of the ladder.
    pub half_fits: (f64, f64),
    pub verdict: Verdict,
}

fn axis_mean(u: &(dyn Fn(&Point) -> f64 + Sync), n: usize, r: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut c = vec![0.0; n];
            c[i] = s * r;
            acc += u(&Point(c));
        }
    }
    acc / (2 * n) as f64
}

fn intercept(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - sxy / sxx * mx
}

/// Recovers m as the limit of u/Γ, averaging u over the 2n axis points at each ladder radius.
pub fn estimate_point_mass(u: &(dyn Fn(&Point) -> f64 + Sync), n: usize, ladder: &[f64]) -> Result<PointMassFit> {
    let dim = Dimension::new(n)?;
    if ladder.len() < 4 {
        return domain("the ladder needs at least four radii");
    }
    if ladder.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return domain("ladder radii must lie in (0, 1)");
    }
    let means: Vec<f64> = ladder.par_iter().map(|&r| axis_mean(u, n, r)).collect();
    let gammas = ladder.iter().map(|&r| gamma_kernel(r, dim)).collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = gammas.iter().map(|g| 1.0 / g).collect();
    let ys: Vec<f64> = means.iter().zip(&gammas).map(|(u, g)| u / g).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Ok(PointMassFit { m: f64::NAN, half_fits: (f64::NAN, f64::NAN), verdict: Verdict::Inconclusive });
    }
    let m = intercept(&xs, &ys);
    let h = xs.len() / 2;
    let outer = intercept(&xs[..h], &ys[..h]);
    let inner = intercept(&xs[h..], &ys[h..]);
    let stable = (outer - inner).abs() <= 0.05 * m.abs().max(1.0);
    let verdict = if stable { Verdict::Consistent } else { Verdict::Inconclusive };
    Ok(PointMassFit { m, half_fits: (outer, inner), verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicReport {
    pub verdict: Verdict,
    /// Largest extrapolated discrete Laplacian over the checked samples.
    pub max_laplacian: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn stencil(u: &(dyn Fn(&Point) -> f64 + Sync), x: &[f64], h: f64) -> (f64, f64) {
    let n = x.len();
    let c = u(&Point(x.to_vec()));
    let mut acc = -2.0 * n as f64 * c;
    let mut scale = c.abs();
    let mut y = x.to_vec();
    for i in 0..n {
        for s in [-h, h] {
            y[i] = x[i] + s;
            let v = u(&Point(y.clone()));
            acc += v;
            scale = scale.max(v.abs());
        }
        y[i] = x[i];
    }
    (acc / (h * h), scale)
}

/// Discrete check of Δu ≤ 0: the Richardson-extrapolated Laplacian from steps h and h/2 must
/// not exceed the difference of the two stencils plus a roundoff allowance.
pub fn superharmonic_check(u: &(dyn Fn(&Point) -> f64 + Sync), samples: &[Point], h: f64) -> SuperharmonicReport {
    let results: Vec<Option<(f64, bool)>> = samples
        .par_iter()
        .map(|x| {
            if x.norm() < 2.0 * h {
                return None;
            }
            let (d1, _) = stencil(u, x.coords(), h);
            let (d2, scale) = stencil(u, x.coords(), h / 2.0);
            let extrapolated = d2 + (d2 - d1) / 3.0;
            let roundoff = 16.0 * x.dim() as f64 * f64::EPSILON * scale / (h * h / 4.0);
            Some((extrapolated, extrapolated <= (d2 - d1).abs() + roundoff))
        })
        .collect();
    let checked: Vec<(f64, bool)> = results.iter().flatten().copied().collect();
    let skipped = samples.len() - checked.len();
    let max_laplacian = checked.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if checked.is_empty() {
        Verdict::Inconclusive
    } else if checked.iter().all(|c| c.1) {
        Verdict::Consistent
    } else {
        Verdict::Violated
    };
    SuperharmonicReport { verdict, max_laplacian, checked: checked.len(), skipped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBound {
    /// u/Γ at each ladder radius along the first axis.
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    pub growth: Growth,
}

/// Ratios u/Γ along the first axis at the ladder radii (largest first), classified by the
/// growth-trend rule with factor 2.
pub fn harmonic_bound_verdict(u: &(dyn Fn(&Point) -> f64 + Sync), n: usize, ladder: &[f64]) -> Result<HarmonicBound> {
    let dim = Dimension::new(n)?;
    let ratios = ladder
        .par_iter()
        .map(|&r| Ok(u(&Point::on_axis(n, r)) / gamma_kernel(r, dim)?))
        .collect::<Result<Vec<f64>>>()?;
    let sup_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(HarmonicBound { growth: growth_trend(&ratios, 2.0), sup_ratio, ratios })
}
