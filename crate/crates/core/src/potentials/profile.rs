//! Ball-mass profiles r ↦ μ(B_r(x)) around a fixed point and log-ring quadrature over them.

use crate::core_model::{ball_volume, dist, equal_volume_radius, Measure, Point, RadialMeasure};
use crate::error::{Error, Result};

/// μ(B_r(x)) as a function of r for one fixed x.
///
/// Grid densities are discretized as point masses at cell centres, except the cell holding `x`,
/// whose mass is spread uniformly over the ball of equal volume centred at `x`. This is the same
/// discretization the kernel-form sums use, so both routes integrate the same measure.
#[derive(Debug, Clone)]
pub enum Profile<'a> {
    Discrete { dists: Vec<f64>, cum: Vec<f64>, smear_rho: f64, smear_mass: f64, n: i32 },
    Radial { m: &'a RadialMeasure, offset: f64 },
}

impl<'a> Profile<'a> {
    pub fn new(mu: &'a Measure, x: &Point) -> Result<Profile<'a>> {
        match mu {
            Measure::Atomic(a) => {
                let mut pairs: Vec<(f64, f64)> = a.points.iter().zip(&a.masses).map(|(p, m)| (p.dist(x), *m)).collect();
                if pairs.iter().any(|(d, m)| *d == 0.0 && *m > 0.0) {
                    return Err(Error::AtomAtPoint);
                }
                pairs.retain(|(d, _)| *d > 0.0);
                Ok(Self::discrete(pairs, 0.0, 0.0, x.dim()))
            }
            Measure::Grid(g) => {
                let vol = g.cell_volume();
                let own = g.cell_of(&x.0);
                let mut c = vec![0.0; g.dim()];
                let mut pairs = Vec::with_capacity(g.len());
                for i in 0..g.len() {
                    if Some(i) == own {
                        continue;
                    }
                    g.center_into(i, &mut c);
                    pairs.push((dist(&c, &x.0), g.values[i] * vol));
                }
                let (rho, m) = match own {
                    Some(i) => (equal_volume_radius(g.dim(), vol), g.values[i] * vol),
                    None => (0.0, 0.0),
                };
                Ok(Self::discrete(pairs, rho, m, x.dim()))
            }
            Measure::Radial(m) => Ok(Profile::Radial { m, offset: x.norm() }),
        }
    }

    fn discrete(mut pairs: Vec<(f64, f64)>, smear_rho: f64, smear_mass: f64, n: usize) -> Profile<'a> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let dists = pairs.iter().map(|p| p.0).collect();
        let mut acc = 0.0;
        let cum = pairs
            .iter()
            .map(|p| {
                acc += p.1;
                acc
            })
            .collect();
        Profile::Discrete { dists, cum, smear_rho, smear_mass, n: n as i32 }
    }

    /// Lower and upper bounds for μ(B_r(x)); currently always equal.
    pub fn mass(&self, r: f64) -> (f64, f64) {
        match self {
            Profile::Discrete { dists, cum, smear_rho, smear_mass, n } => {
                let k = dists.partition_point(|&d| d < r);
                let atoms = if k == 0 { 0.0 } else { cum[k - 1] };
                let smear = if *smear_mass > 0.0 { smear_mass * (r / smear_rho).min(1.0).powi(*n) } else { 0.0 };
                (atoms + smear, atoms + smear)
            }
            Profile::Radial { m, offset } => {
                let v = m.mass_in_ball(*offset, r);
                (v, v)
            }
        }
    }

    /// Radius beyond which μ(B_r(x)) equals the total mass.
    pub fn reach(&self) -> f64 {
        match self {
            Profile::Discrete { dists, smear_rho, .. } => dists.last().copied().unwrap_or(0.0).max(*smear_rho),
            Profile::Radial { m, offset } => m.outer_radius() + offset,
        }
    }

    /// Smallest positive atom distance, if any.
    pub fn nearest(&self) -> Option<f64> {
        match self {
            Profile::Discrete { dists, .. } => dists.first().copied(),
            Profile::Radial { .. } => None,
        }
    }

    pub fn total(&self) -> f64 {
        match self {
            Profile::Discrete { cum, smear_mass, .. } => cum.last().copied().unwrap_or(0.0) + smear_mass,
            Profile::Radial { m, .. } => m.total(),
        }
    }

    /// Mass of the smeared own-cell ball and its radius.
    pub fn smear(&self) -> (f64, f64) {
        match self {
            Profile::Discrete { smear_rho, smear_mass, .. } => (*smear_rho, *smear_mass),
            Profile::Radial { .. } => (0.0, 0.0),
        }
    }

    /// Radial profile near r = 0: mass ~ c r^n with the density of the shell holding x.
    fn radial_head_density(&self, n: usize) -> Option<f64> {
        match self {
            Profile::Radial { m, offset } => Some(m.density_at(*offset) * ball_volume(n, 1.0)),
            _ => None,
        }
    }
}

/// Quadrature description for ∫_0^{r_max} T(μ(B_r(x))) w(r) dr with T nondecreasing.
pub struct RingQuad<'f> {
    pub rings: usize,
    /// Nondecreasing transform of the ball mass.
    pub transform: &'f dyn Fn(f64) -> f64,
    /// ∫_a^b w(r) dr.
    pub weight_integral: &'f dyn Fn(f64, f64) -> f64,
    /// Integral of T(c r^n) w(r) over (0, r_min) for a mass c r^n near zero.
    pub head: &'f dyn Fn(f64, f64) -> f64,
    /// Upper integration limit; `None` means infinity.
    pub r_max: Option<f64>,
    pub n: usize,
}

/// Result of a monotone ring quadrature: midpoint of a rigorous bracket and its half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracketed {
    pub value: f64,
    pub half_width: f64,
}

/// Log-spaced ring quadrature from 1e-6·reach to the saturation radius with an exact tail.
///
/// Monotonicity of the ball mass in r brackets the integral on each ring between the values at
/// its two endpoints, which yields the reported half-width.
pub fn ring_integral(profile: &Profile, q: &RingQuad) -> Result<Bracketed> {
    let reach = profile.reach();
    let total = profile.total();
    if total == 0.0 || reach == 0.0 {
        return Ok(Bracketed { value: 0.0, half_width: 0.0 });
    }
    let mut top = reach;
    let mut tail = true;
    if let Some(rm) = q.r_max {
        if rm <= reach {
            top = rm;
            tail = false;
        }
    }
    let mut r_min = 1e-6 * reach;
    if let Some(d) = profile.nearest() {
        r_min = r_min.min(0.5 * d);
    }
    r_min = r_min.min(0.5 * top);

    // head: only the smeared own cell or a radial density reaches below r_min
    let (rho, sm) = profile.smear();
    let mut head = 0.0;
    if sm > 0.0 && rho > r_min {
        head += (q.head)(sm / rho.powi(q.n as i32), r_min);
    } else if sm > 0.0 {
        return Err(Error::Nonconvergence("own cell smaller than the innermost ring".into()));
    }
    if let Some(c) = profile.radial_head_density(q.n) {
        head += (q.head)(c, r_min);
    }
    let mut lo_sum = head;
    let mut hi_sum = head;
    let ratio = (top / r_min).powf(1.0 / q.rings as f64);
    let mut a = r_min;
    let mut m_a = profile.mass(a);
    for k in 1..=q.rings {
        let b = if k == q.rings { top } else { r_min * ratio.powi(k as i32) };
        let m_b = profile.mass(b);
        let w = (q.weight_integral)(a, b);
        lo_sum += (q.transform)(m_a.0) * w;
        hi_sum += (q.transform)(m_b.1) * w;
        a = b;
        m_a = m_b;
    }
    if tail {
        let w_tail = (q.weight_integral)(top, q.r_max.unwrap_or(f64::INFINITY));
        lo_sum += (q.transform)(total) * w_tail;
        hi_sum += (q.transform)(total) * w_tail;
    }
    if !lo_sum.is_finite() || !hi_sum.is_finite() {
        return Err(Error::Nonconvergence("ring quadrature overflowed".into()));
    }
    Ok(Bracketed { value: 0.5 * (lo_sum + hi_sum), half_width: 0.5 * (hi_sum - lo_sum) })
}

/// ∫_a^b r^{-e-1} e^{-c r} dr, with b possibly infinite.
pub fn power_exp_integral(e: f64, c: f64, a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if c == 0.0 {
        if e == 0.0 {
            return if b.is_infinite() { f64::INFINITY } else { (b / a).ln() };
        }
        let fb = if b.is_infinite() {
            if e > 0.0 {
                0.0
            } else {
                return f64::INFINITY;
            }
        } else {
            b.powf(-e)
        };
        return (a.powf(-e) - fb) / e;
    }
    // Simpson in log r; the integrand is smooth in t = log r
    let t_hi = if b.is_infinite() {
        // e^{-c r} below 1e-300 relative once c r > 700
        (a.max(700.0 / c)).ln()
    } else {
        b.ln()
    };
    let t_lo = a.ln();
    if t_hi <= t_lo {
        return 0.0;
    }
    let m = ((t_hi - t_lo) / 0.005).ceil().max(2.0) as usize;
    let m = m + m % 2;
    let h = (t_hi - t_lo) / m as f64;
    let g = |t: f64| (-e * t - c * t.exp()).exp();
    let mut acc = g(t_lo) + g(t_hi);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(t_lo + k as f64 * h);
    }
    acc * h / 3.0
}
