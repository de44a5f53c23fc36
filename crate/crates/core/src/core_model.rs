//! Measures, balls, the fundamental kernel and its normalization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};

/// Ambient dimension, always at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("dimension must be at least 2, got {n}"));
        }
        Ok(Dimension(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<usize> for Dimension {
    type Error = crate::error::Error;
    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// Surface area of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume of the ball of radius `r` in R^n.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    sphere_area(n) / n as f64 * r.powi(n as i32)
}

/// Radius of the ball whose volume equals `vol`.
/// Volume of the cap of height `h` cut from a ball of radius `rho` in R^n.
fn cap_volume(n: usize, rho: f64, h: f64) -> f64 {
    let full = ball_volume(n, rho);
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 2.0 * rho {
        return full;
    }
    if h > rho {
        return full - cap_volume(n, rho, 2.0 * rho - h);
    }
    let x = ((2.0 * rho * h - h * h) / (rho * rho)).clamp(0.0, 1.0);
    0.5 * full * beta_reg((n as f64 + 1.0) / 2.0, 0.5, x)
}

/// |B_r(x) ∩ B_R(x0)| with d = |x − x0|.
pub fn lens_volume(n: usize, r: f64, big_r: f64, d: f64) -> f64 {
    if r + d <= big_r {
        return ball_volume(n, r);
    }
    if big_r + d <= r {
        return ball_volume(n, big_r);
    }
    if d >= r + big_r {
        return 0.0;
    }
    // the two spheres meet on the plane at signed distance c1 from x along x0 − x
    let c1 = (d * d + r * r - big_r * big_r) / (2.0 * d);
    cap_volume(n, r, r - c1) + cap_volume(n, big_r, big_r - (d - c1))
}

pub fn equal_volume_radius(n: usize, vol: f64) -> f64 {
    (vol / ball_volume(n, 1.0)).powf(1.0 / n as f64)
}

/// Normalization making `omega(n) * gamma_kernel` a fundamental solution of -Δ.
pub fn omega(n: Dimension) -> f64 {
    match n.get() {
        2 => 1.0 / (2.0 * PI),
        k => 1.0 / ((k as f64 - 2.0) * sphere_area(k)),
    }
}

/// Γ(r) = r^{-(n-2)} for n ≥ 3 and log(2/r) for n = 2.
pub fn gamma_kernel(r: f64, n: Dimension) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("kernel radius must be positive and finite, got {r}"));
    }
    Ok(match n.get() {
        2 => (2.0 / r).ln(),
        k => r.powi(-(k as i32 - 2)),
    })
}

/// The fundamental kernel for a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGamma {
    pub n: Dimension,
}

impl KernelGamma {
    pub fn eval(&self, r: f64) -> Result<f64> {
        gamma_kernel(r, self.n)
    }
}

/// A point of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return domain("point coordinates must be finite");
        }
        Ok(Point(coords))
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    /// The point `t * e_1`.
    pub fn on_axis(n: usize, t: f64) -> Self {
        let mut c = vec![0.0; n];
        c[0] = t;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, t: f64) -> Point {
        Point(self.0.iter().map(|a| a * t).collect())
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// An open ball B_r(center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("ball radius must be positive and finite, got {radius}"));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(x, &self.center.0) < self.radius
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.center.dim(), self.radius)
    }
}

/// Finitely many point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub points: Vec<Point>,
    pub masses: Vec<f64>,
}

/// Cell-centred density on an axis-aligned box, stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
}

/// Radially symmetric measure about the origin given by cumulative masses at knot radii.
///
/// Between knots the mass is interpolated linearly in r^n, which corresponds to a
/// piecewise-constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMeasure {
    pub dim: usize,
    pub knot_radii: Vec<f64>,
    pub cumulative_mass: Vec<f64>,
}

/// A finite nonnegative measure in one of three representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Measure {
    Atomic(AtomicMeasure),
    Grid(GridDensity),
    Radial(RadialMeasure),
}

/// Ball mass together with a bracketing half-width; every current representation is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub value: f64,
    pub half_width: f64,
}

impl GridDensity {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let g = GridDensity { lo, hi, cells, values };
        g.validate()?;
        Ok(g)
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut g = GridDensity { lo, hi, cells, values: Vec::new() };
        let total: usize = g.cells.iter().product();
        let mut c = vec![0.0; g.dim()];
        g.values = (0..total)
            .map(|i| {
                g.center_into(i, &mut c);
                f(&c)
            })
            .collect();
        g.validate()?;
        Ok(g)
    }

    /// Cube [-half, half]^n with `k` cells per axis.
    pub fn cube(n: usize, half: f64, k: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(vec![-half; n], vec![half; n], vec![k; n], f)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lo.len();
        if n < 2 || self.hi.len() != n || self.cells.len() != n {
            return domain("grid box and cell counts must share a dimension of at least 2");
        }
        for i in 0..n {
            if !(self.hi[i] > self.lo[i]) || !self.lo[i].is_finite() || !self.hi[i].is_finite() {
                return domain(format!("grid box axis {i} is empty or not finite"));
            }
            if self.cells[i] == 0 {
                return domain(format!("grid axis {i} has no cells"));
            }
        }
        if self.values.len() != self.cells.iter().product::<usize>() {
            return domain("grid value count does not match cells_per_axis");
        }
        if self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return domain("grid values must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.hi[i] - self.lo[i]) / self.cells[i] as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Half the length of a cell diagonal.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.spacing().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn center_into(&self, mut idx: usize, out: &mut [f64]) {
        for axis in (0..self.dim()).rev() {
            let k = self.cells[axis];
            let j = idx % k;
            idx /= k;
            let h = (self.hi[axis] - self.lo[axis]) / k as f64;
            out[axis] = self.lo[axis] + (j as f64 + 0.5) * h;
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.center_into(idx, &mut c);
        c
    }

    /// All cell centres, flattened.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x`, if `x` lies in the closed box.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for axis in 0..self.dim() {
            if x[axis] < self.lo[axis] || x[axis] > self.hi[axis] {
                return None;
            }
            let k = self.cells[axis];
            let h = (self.hi[axis] - self.lo[axis]) / k as f64;
            let j = (((x[axis] - self.lo[axis]) / h).floor() as usize).min(k - 1);
            idx = idx * k + j;
        }
        Some(idx)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Midpoint-rule L^s norm over the box, for any s > 0.
    pub fn lp_norm(&self, s: f64) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.powf(s)).sum();
        (sum * self.cell_volume()).powf(1.0 / s)
    }

    pub fn scaled(&self, t: f64) -> GridDensity {
        GridDensity { values: self.values.iter().map(|v| v * t).collect(), ..self.clone() }
    }

    /// Fraction of each cell lying in `ball`, estimated by `k^n` sub-samples on straddling cells.
    pub fn coverage(&self, ball: &Ball, k: usize) -> Vec<f64> {
        let n = self.dim();
        let h = self.spacing();
        let hd = self.half_diagonal();
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        (0..self.len())
            .map(|i| {
                self.center_into(i, &mut c);
                let d = dist(&c, &ball.center.0);
                if d + hd <= ball.radius {
                    1.0
                } else if d - hd >= ball.radius {
                    0.0
                } else {
                    let total = k.pow(n as u32);
                    let mut inside = 0usize;
                    for m in 0..total {
                        let mut rem = m;
                        for a in 0..n {
                            let j = rem % k;
                            rem /= k;
                            s[a] = c[a] - 0.5 * h[a] + (j as f64 + 0.5) * h[a] / k as f64;
                        }
                        if dist(&s, &ball.center.0) < ball.radius {
                            inside += 1;
                        }
                    }
                    inside as f64 / total as f64
                }
            })
            .collect()
    }

    /// The density multiplied by the indicator of `ball`, with fractional boundary cells.
    pub fn restricted_to_ball(&self, ball: &Ball) -> GridDensity {
        let cov = self.coverage(ball, subsamples_for(self.dim()));
        GridDensity { values: self.values.iter().zip(&cov).map(|(v, c)| v * c).collect(), ..self.clone() }
    }

    /// Mass inside B_r(x) with straddling cells split by sub-sampling.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let ball = Ball { center: Point(x.to_vec()), radius: r };
        let cov = self.coverage(&ball, subsamples_for(self.dim()));
        self.values.iter().zip(&cov).map(|(v, c)| v * c).sum::<f64>() * self.cell_volume()
    }
}

pub(crate) fn subsamples_for(n: usize) -> usize {
    match n {
        2 | 3 => 4,
        4 => 3,
        _ => 2,
    }
}

impl RadialMeasure {
    pub fn new(dim: usize, knot_radii: Vec<f64>, cumulative_mass: Vec<f64>) -> Result<Self> {
        let m = RadialMeasure { dim, knot_radii, cumulative_mass };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        Dimension::new(self.dim)?;
        if self.knot_radii.is_empty() || self.knot_radii.len() != self.cumulative_mass.len() {
            return domain("radial measure needs equally many knots and cumulative masses");
        }
        if !(self.knot_radii[0] > 0.0) {
            return domain("radial knots must be positive");
        }
        if self.knot_radii.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("radial knots must be strictly increasing");
        }
        if !(self.cumulative_mass[0] >= 0.0) || self.cumulative_mass.iter().any(|m| !m.is_finite()) {
            return domain("cumulative masses must be finite and nonnegative");
        }
        if self.cumulative_mass.windows(2).any(|w| w[1] < w[0]) {
            return domain("cumulative mass must be nondecreasing");
        }
        Ok(())
    }

    /// μ(B_r(0)).
    pub fn mass_within(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let n = self.dim as i32;
        let k = self.knot_radii.partition_point(|&q| q < r);
        if k == self.knot_radii.len() {
            return *self.cumulative_mass.last().unwrap();
        }
        let (r0, m0) = if k == 0 { (0.0, 0.0) } else { (self.knot_radii[k - 1], self.cumulative_mass[k - 1]) };
        let (r1, m1) = (self.knot_radii[k], self.cumulative_mass[k]);
        let t = (r.powi(n) - r0.powi(n)) / (r1.powi(n) - r0.powi(n));
        m0 + t * (m1 - m0)
    }

    /// μ(B_r(x)) for |x| = `offset`, summing shell density times the lens volume of each shell.
    pub fn mass_in_ball(&self, offset: f64, r: f64) -> f64 {
        if offset == 0.0 {
            return self.mass_within(r);
        }
        let n = self.dim;
        let mut acc = 0.0;
        let (mut r0, mut m0, mut lens0) = (0.0, 0.0, 0.0);
        for (&r1, &m1) in self.knot_radii.iter().zip(&self.cumulative_mass) {
            let lens1 = lens_volume(n, r, r1, offset);
            if m1 > m0 {
                acc += (m1 - m0) / (ball_volume(n, r1) - ball_volume(n, r0)) * (lens1 - lens0);
            }
            (r0, m0, lens0) = (r1, m1, lens1);
        }
        acc.clamp(0.0, self.total())
    }

    /// Density of the shell holding radius `s`, zero outside the support.
    pub fn density_at(&self, s: f64) -> f64 {
        let k = self.knot_radii.partition_point(|&q| q < s);
        if k == self.knot_radii.len() {
            return 0.0;
        }
        let (r0, m0) = if k == 0 { (0.0, 0.0) } else { (self.knot_radii[k - 1], self.cumulative_mass[k - 1]) };
        (self.cumulative_mass[k] - m0) / (ball_volume(self.dim, self.knot_radii[k]) - ball_volume(self.dim, r0))
    }

    pub fn outer_radius(&self) -> f64 {
        *self.knot_radii.last().unwrap()
    }

    pub fn total(&self) -> f64 {
        *self.cumulative_mass.last().unwrap()
    }
}

impl Measure {
    pub fn atomic(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        let m = Measure::Atomic(AtomicMeasure { points, masses });
        m.validate()?;
        Ok(m)
    }

    /// Unit Dirac mass at `p`.
    pub fn dirac(p: Point) -> Self {
        Measure::Atomic(AtomicMeasure { points: vec![p], masses: vec![1.0] })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measure::Atomic(a) => {
                if a.points.len() != a.masses.len() {
                    return domain("atomic measure needs one mass per point");
                }
                if let Some(p) = a.points.first() {
                    Dimension::new(p.dim())?;
                    if a.points.iter().any(|q| q.dim() != p.dim()) {
                        return domain("atoms must share a dimension");
                    }
                }
                if a.points.iter().any(|p| p.0.iter().any(|c| !c.is_finite())) {
                    return domain("atom coordinates must be finite");
                }
                if a.masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                    return domain("atom masses must be finite and nonnegative");
                }
                Ok(())
            }
            Measure::Grid(g) => g.validate(),
            Measure::Radial(r) => r.validate(),
        }
    }

    /// Dimension, or `None` for an atomic measure with no atoms.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Measure::Atomic(a) => a.points.first().map(|p| p.dim()),
            Measure::Grid(g) => Some(g.dim()),
            Measure::Radial(r) => Some(r.dim),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atomic(a) => a.masses.iter().sum(),
            Measure::Grid(g) => g.integral(),
            Measure::Radial(r) => r.total(),
        }
    }

    /// Every mass multiplied by `t`.
    pub fn scale(&self, t: f64) -> Result<Measure> {
        if !(t > 0.0) || !t.is_finite() {
            return domain(format!("scale factor must be positive, got {t}"));
        }
        Ok(match self {
            Measure::Atomic(a) => Measure::Atomic(AtomicMeasure {
                points: a.points.clone(),
                masses: a.masses.iter().map(|m| m * t).collect(),
            }),
            Measure::Grid(g) => Measure::Grid(g.scaled(t)),
            Measure::Radial(r) => Measure::Radial(RadialMeasure {
                dim: r.dim,
                knot_radii: r.knot_radii.clone(),
                cumulative_mass: r.cumulative_mass.iter().map(|m| m * t).collect(),
            }),
        })
    }

    /// μ(B_r(x)) with an error half-width.
    pub fn ball_mass_estimate(&self, x: &Point, r: f64) -> Result<MassEstimate> {
        if !(r > 0.0) {
            return domain(format!("ball radius must be positive, got {r}"));
        }
        let exact = |value| MassEstimate { value, half_width: 0.0 };
        Ok(match self {
            Measure::Atomic(a) => {
                exact(a.points.iter().zip(&a.masses).filter(|(p, _)| p.dist(x) < r).map(|(_, m)| m).sum())
            }
            Measure::Grid(g) => exact(g.ball_mass(&x.0, r)),
            Measure::Radial(m) => exact(m.mass_in_ball(x.norm(), r)),
        })
    }

    /// μ(B_r(x)).
    pub fn ball_mass(&self, x: &Point, r: f64) -> Result<f64> {
        Ok(self.ball_mass_estimate(x, r)?.value)
    }
}

/// Free-function form of [`Measure::ball_mass`].
pub fn ball_mass(mu: &Measure, x: &Point, r: f64) -> Result<f64> {
    mu.ball_mass(x, r)
}

/// Free-function form of [`Measure::scale`].
pub fn scale_measure(mu: &Measure, t: f64) -> Result<Measure> {
    mu.scale(t)
}

/// Free-function form of [`Measure::total_mass`].
pub fn total_mass(mu: &Measure) -> f64 {
    mu.total_mass()
}
