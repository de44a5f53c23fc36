//! Regions of the (λ, σ) exponent plane, predicted growth bounds near a singularity and at
//! infinity, the Moser iteration ledger and the Kelvin transform.
//!
//! Throughout, m = n − 2 and a descriptor exponent e means a bound by (1/|x|)^e near the origin or
//! by |y|^e at infinity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::core_model::Point;
use crate::error::{domain, Result};

/// Tolerance for boundary equalities between exponents.
pub const BOUNDARY_TOL: f64 = 1e-12;

fn check_n(n: usize) -> Result<f64> {
    if n < 3 {
        return domain(format!("this bound needs n >= 3, got {n}"));
    }
    Ok(n as f64)
}

/// σ on the critical curve: 2/(n−2) + n/((n−2)λ).
pub fn critical_sigma(lambda: f64, n: usize) -> Result<f64> {
    let nf = check_n(n)?;
    if !(lambda > 0.0) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    let m = nf - 2.0;
    Ok(2.0 / m + nf / (m * lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// λ ≤ n/(n−2): both components harmonically bounded.
    A,
    /// λ > n/(n−2) and σ below the critical curve.
    B,
    /// λ > n/(n−2) and σ above the critical curve: no pointwise bound.
    C,
    /// The critical curve itself.
    D,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

fn check_pair(lambda: f64, sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !lambda.is_finite() || !sigma.is_finite() {
        return domain("lambda and sigma must be finite with sigma >= 0");
    }
    if sigma > lambda {
        return domain(format!("sigma = {sigma} exceeds lambda = {lambda}; order the pair as sigma <= lambda"));
    }
    Ok(())
}

/// Membership of (λ, σ) in A, B, C, D, each tested on its own defining inequalities.
pub fn region_memberships(lambda: f64, sigma: f64, n: usize) -> Result<[bool; 4]> {
    let nf = check_n(n)?;
    check_pair(lambda, sigma)?;
    let corner = nf / (nf - 2.0);
    if lambda <= corner {
        return Ok([true, false, false, false]);
    }
    let crit = critical_sigma(lambda, n)?;
    let on_curve = (sigma - crit).abs() <= BOUNDARY_TOL * crit.max(1.0);
    Ok([false, sigma < crit && !on_curve, sigma > crit && !on_curve, on_curve])
}

/// The region containing (λ, σ); requires 0 ≤ σ ≤ λ.
pub fn classify_region(lambda: f64, sigma: f64, n: usize) -> Result<Region> {
    let m = region_memberships(lambda, sigma, n)?;
    let regions = [Region::A, Region::B, Region::C, Region::D];
    let hits: Vec<Region> = regions.iter().zip(m).filter(|(_, b)| *b).map(|(r, _)| *r).collect();
    match hits.as_slice() {
        [r] => Ok(*r),
        _ => Err(crate::error::Error::Nonconvergence(format!(
            "region tests overlap or miss at lambda = {lambda}, sigma = {sigma}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    BigO,
    LittleO,
}

/// A growth bound (1/|x|)^e (log 1/|x|)^k, big-O or little-o, with an optional "+ε" in the
/// exponent kept separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDescriptor {
    pub base_exponent: f64,
    pub log_power: f64,
    pub flavor: Flavor,
    pub epsilon_slack: f64,
}

impl BoundDescriptor {
    pub fn big_o(e: f64) -> Self {
        BoundDescriptor { base_exponent: e, log_power: 0.0, flavor: Flavor::BigO, epsilon_slack: 0.0 }
    }

    pub fn little_o(e: f64) -> Self {
        BoundDescriptor { base_exponent: e, log_power: 0.0, flavor: Flavor::LittleO, epsilon_slack: 0.0 }
    }

    pub fn with_log(mut self, k: f64) -> Self {
        self.log_power = k;
        self
    }

    pub fn with_slack(mut self, eps: f64) -> Self {
        self.epsilon_slack = eps;
        self
    }

    /// The harmonic bound O((1/|x|)^{n−2}).
    pub fn harmonic(n: usize) -> Self {
        Self::big_o(n as f64 - 2.0)
    }

    /// The bound implied by a sum of two bounds: the faster-growing term wins, and on a tie a
    /// big-O term absorbs a little-o one.
    pub fn plus(self, other: Self) -> Self {
        let key = |d: &Self| (d.base_exponent + d.epsilon_slack, d.log_power);
        let (a, b) = (key(&self), key(&other));
        let close = |x: f64, y: f64| (x - y).abs() <= BOUNDARY_TOL * x.abs().max(y.abs()).max(1.0);
        if close(a.0, b.0) && close(a.1, b.1) {
            return if self.flavor == Flavor::BigO { self } else { other };
        }
        if a.0 > b.0 + BOUNDARY_TOL || (close(a.0, b.0) && a.1 > b.1) {
            self
        } else {
            other
        }
    }
}

impl fmt::Display for BoundDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = match self.flavor {
            Flavor::BigO => "O",
            Flavor::LittleO => "o",
        };
        write!(f, "{o}(r^{}", fmt_num(self.base_exponent))?;
        if self.epsilon_slack > 0.0 {
            write!(f, "+{}ε", fmt_num(self.epsilon_slack))?;
        }
        if self.log_power != 0.0 {
            write!(f, " log^{}", fmt_num(self.log_power))?;
        }
        write!(f, ")")
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// A bound for u and one for v, plus whether some case inequality held with equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub u: BoundDescriptor,
    pub v: BoundDescriptor,
    /// Which case of the weighted split fired, e.g. "B2".
    pub case: &'static str,
    /// True when a deciding inequality held with equality, within tolerance.
    pub on_boundary: bool,
}

/// λ ≥ σ ≥ 0 and σ below the critical curve.
fn check_subcritical(lambda: f64, sigma: f64, n: usize) -> Result<()> {
    check_pair(lambda, sigma)?;
    let crit = critical_sigma(lambda, n)?;
    if !(sigma < crit) {
        return domain(format!("need sigma < 2/(n-2) + n/((n-2)lambda) = {crit}, got {sigma}"));
    }
    Ok(())
}

/// Bounds near the origin for 0 ≤ −Δu ≤ |x|^{−α}(v + |x|^{2−n})^λ, 0 ≤ −Δv ≤ |x|^{−β}(u + |x|^{2−n})^σ.
///
/// The case split follows σ against 2/(n−2); `eps` is the slack carried in the D2 exponents.
pub fn bounds_weighted(lambda: f64, sigma: f64, n: usize, alpha: f64, beta: f64, eps: f64) -> Result<PairBounds> {
    let nf = check_n(n)?;
    check_subcritical(lambda, sigma, n)?;
    if !(eps > 0.0) {
        return domain("eps must be positive");
    }
    let m = nf - 2.0;
    let h = BoundDescriptor::harmonic(n);
    let r = m / nf;
    let mut tie = false;
    let mut eq = |a: f64, b: f64| {
        if (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()).max(1.0) {
            tie = true;
        }
    };
    let crit_low = 2.0 / m;
    let on_low = (sigma - crit_low).abs() <= BOUNDARY_TOL * crit_low;
    // v under the (B1) rule
    let v_b1 = |tie_eq: &mut dyn FnMut(f64, f64)| {
        tie_eq(beta, nf - m * sigma);
        if beta <= nf - m * sigma {
            h
        } else {
            BoundDescriptor::little_o(r * (m * sigma + beta))
        }
    };
    let out = if sigma == 0.0 {
        eq(beta, nf);
        if beta <= nf {
            PairBounds {
                u: h.plus(BoundDescriptor::little_o(r * (m * lambda + alpha))),
                v: h,
                case: "A1",
                on_boundary: false,
            }
        } else {
            PairBounds {
                u: h.plus(BoundDescriptor::little_o(r * (r * beta * lambda + alpha))),
                v: BoundDescriptor::little_o(r * beta),
                case: "A2",
                on_boundary: false,
            }
        }
    } else if sigma < crit_low && !on_low {
        let delta = (m * lambda + alpha).max((m * sigma - 2.0 + beta) * lambda + alpha);
        eq(delta, nf);
        if delta <= nf {
            let v = v_b1(&mut eq);
            PairBounds { u: h, v, case: "B1", on_boundary: false }
        } else {
            PairBounds {
                u: BoundDescriptor::little_o(r * delta),
                v: BoundDescriptor::big_o(m.max(m * sigma - 2.0 + beta)),
                case: "B2",
                on_boundary: false,
            }
        }
    } else if on_low {
        eq(beta, m);
        let c1 = if beta < m {
            eq(m * lambda + alpha, nf);
            m * lambda + alpha <= nf
        } else {
            eq(beta * lambda + alpha, nf);
            beta * lambda + alpha < nf
        };
        if c1 {
            let v = if beta <= m { h } else { BoundDescriptor::little_o(r * (beta + 2.0)) };
            PairBounds { u: h, v, case: "C1", on_boundary: false }
        } else {
            let u = if beta < m {
                BoundDescriptor::little_o(r * (m * lambda + alpha))
            } else {
                BoundDescriptor::little_o(r * (beta * lambda + alpha)).with_log(r * lambda)
            };
            PairBounds { u, v: h.plus(BoundDescriptor::little_o(beta).with_log(1.0)), case: "C2", on_boundary: false }
        }
    } else {
        let a = lambda / nf * (m * sigma - 2.0);
        let b = alpha / nf * (m * sigma - 2.0) + beta;
        if !(a > 0.0 && a < 1.0) {
            return Err(crate::error::Error::Nonconvergence(format!("expected 0 < a < 1, got a = {a}")));
        }
        let k = b / (1.0 - a);
        eq(k, m);
        let d1 = if k < m {
            eq(m * lambda, nf - alpha);
            m * lambda <= nf - alpha
        } else {
            eq(k * lambda, nf - alpha);
            k * lambda < nf - alpha
        };
        if d1 {
            let v = v_b1(&mut eq);
            PairBounds { u: h, v, case: "D1", on_boundary: false }
        } else if k < m {
            PairBounds { u: BoundDescriptor::little_o(r * (m * lambda + alpha)), v: h, case: "D2", on_boundary: false }
        } else {
            PairBounds {
                u: BoundDescriptor::little_o(r * (k * lambda + alpha)).with_slack(r * eps),
                v: BoundDescriptor::little_o(k).with_slack(eps),
                case: "D2",
                on_boundary: false,
            }
        }
    };
    Ok(PairBounds { on_boundary: tie, ..out })
}

/// Bounds as |y| → ∞ for 0 ≤ −ΔU ≤ (V+1)^λ, 0 ≤ −ΔV ≤ (U+1)^σ outside a compact set.
pub fn bounds_at_infinity(lambda: f64, sigma: f64, n: usize, eps: f64) -> Result<PairBounds> {
    let nf = check_n(n)?;
    check_subcritical(lambda, sigma, n)?;
    if !(eps > 0.0) {
        return domain("eps must be positive");
    }
    let m = nf - 2.0;
    let crit_low = 2.0 / m;
    let on_low = (sigma - crit_low).abs() <= BOUNDARY_TOL * crit_low;
    let lo = BoundDescriptor::little_o;
    Ok(if sigma == 0.0 {
        PairBounds { u: lo(m / nf * (2.0 * m * lambda / nf + 2.0)), v: lo(2.0 * m / nf), case: "A", on_boundary: false }
    } else if sigma < crit_low && !on_low {
        PairBounds {
            u: lo(2.0 * m * (lambda + 1.0) / nf),
            v: BoundDescriptor::big_o(2.0),
            case: "B",
            on_boundary: false,
        }
    } else if on_low {
        PairBounds {
            u: lo(2.0 * m * (lambda + 1.0) / nf).with_log(m / nf * lambda),
            v: lo(2.0).with_log(1.0),
            case: "C",
            on_boundary: true,
        }
    } else {
        let d = m * lambda * (critical_sigma(lambda, n)? - sigma);
        PairBounds {
            u: lo(2.0 * m * (lambda + 1.0) / d).with_slack(eps),
            v: lo(2.0 * m * (sigma + 1.0) / d).with_slack(eps),
            case: "D",
            on_boundary: false,
        }
    })
}

/// Bounds in the plane for 0 ≤ −Δu ≤ f(v), 0 ≤ −Δv ≤ g(u) with f = O(e^{λv})-type growth split
/// by λ: v is O(log 1/|x|), and u is O(log 1/|x|) at λ = 1 or o((log 1/|x|)^λ) above.
pub fn bounds_planar(lambda: f64) -> Result<(BoundDescriptor, BoundDescriptor)> {
    if !(lambda >= 1.0) {
        return domain(format!("the planar bounds need lambda >= 1, got {lambda}"));
    }
    let v = BoundDescriptor::big_o(0.0).with_log(1.0);
    let u = if lambda == 1.0 { v } else { BoundDescriptor::little_o(0.0).with_log(lambda) };
    Ok((u, v))
}

/// v alone is harmonically bounded when −Δu ≥ 0 and −Δv ≤ g(u) with g = O(t^σ), σ < 2/(n−2).
pub fn bounds_v_only(sigma: f64, n: usize) -> Result<BoundDescriptor> {
    let nf = check_n(n)?;
    if !(sigma >= 0.0 && sigma < 2.0 / (nf - 2.0)) {
        return domain(format!("need 0 <= sigma < 2/(n-2) = {}", 2.0 / (nf - 2.0)));
    }
    Ok(BoundDescriptor::harmonic(n))
}

/// What is known about pointwise bounds in each region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionBounds {
    /// Both components satisfy the given bounds.
    Bounded { u: BoundDescriptor, v: BoundDescriptor },
    /// Solutions can exceed any prescribed growth.
    NoPointwiseBound,
    /// The critical curve is not settled.
    Open,
}

/// The bounds valid throughout the region of (λ, σ).
pub fn region_bounds(lambda: f64, sigma: f64, n: usize) -> Result<RegionBounds> {
    let m = n as f64 - 2.0;
    Ok(match classify_region(lambda, sigma, n)? {
        Region::A => RegionBounds::Bounded { u: BoundDescriptor::harmonic(n), v: BoundDescriptor::harmonic(n) },
        Region::B => RegionBounds::Bounded {
            u: BoundDescriptor::little_o(m * m * lambda / n as f64),
            v: BoundDescriptor::harmonic(n),
        },
        Region::C => RegionBounds::NoPointwiseBound,
        Region::D => RegionBounds::Open,
    })
}

/// One row of a region sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub sigma: f64,
    pub region: Region,
    pub u_exponent: Option<f64>,
    pub v_exponent: Option<f64>,
    pub log_power: Option<f64>,
}

/// Region and bound exponents on a `steps`×`steps` grid of [0, max]², keeping σ ≤ λ.
pub fn sweep(n: usize, max: f64, steps: usize) -> Result<Vec<SweepRow>> {
    check_n(n)?;
    if steps < 2 || !(max > 0.0) {
        return domain("sweep needs at least 2 steps and a positive range");
    }
    let mut out = Vec::new();
    for i in 0..steps {
        let lambda = max * i as f64 / (steps - 1) as f64;
        for j in 0..steps {
            let sigma = max * j as f64 / (steps - 1) as f64;
            if sigma > lambda {
                break;
            }
            let region = classify_region(lambda, sigma, n)?;
            let (u, v, l) = match region_bounds(lambda, sigma, n)? {
                RegionBounds::Bounded { u, v } => (Some(u.base_exponent), Some(v.base_exponent), Some(u.log_power)),
                _ => (None, None, None),
            };
            out.push(SweepRow { lambda, sigma, region, u_exponent: u, v_exponent: v, log_power: l });
        }
    }
    Ok(out)
}

/// Writes sweep rows as CSV.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda", "sigma", "region", "u_exponent", "v_exponent", "log_power"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.lambda.to_string(),
            r.sigma.to_string(),
            r.region.to_string(),
            opt(r.u_exponent),
            opt(r.v_exponent),
            opt(r.log_power),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// Moser iteration ledger
// ---------------------------------------------------------------------------------------------

/// One step p ↦ q; reciprocals at or below zero stand for ∞ and are stored as `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserStep {
    pub p: f64,
    pub p2: Option<f64>,
    pub p3: Option<f64>,
    pub q: Option<f64>,
    /// 1/p − 1/q from the update formula.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoserTrace {
    pub epsilon: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub steps: Vec<MoserStep>,
    /// Steps sufficient by the gain bound: ceil(1/C0) + 1.
    pub iterations_needed: usize,
}

fn recip(x: f64) -> Option<f64> {
    if x > 0.0 {
        Some(1.0 / x)
    } else {
        None
    }
}

/// Integrability ledger p ↦ p2 ↦ p3 ↦ q for exponents between 2/(n−2) and the critical curve.
///
/// ε is the smallest multiple of 1/16 satisfying σ < n/(n−2+ε) and
/// σ < (2−ε)/(n−2+ε) + n/((n−2+ε)λ).
pub fn moser_ledger(n: usize, lambda: f64, sigma: f64) -> Result<MoserTrace> {
    let nf = check_n(n)?;
    let m = nf - 2.0;
    let crit = critical_sigma(lambda, n)?;
    if !(lambda >= sigma && sigma >= 2.0 / m && sigma < crit) {
        return domain(format!(
            "need lambda >= sigma >= 2/(n-2) = {} and sigma < {crit}; got lambda = {lambda}, sigma = {sigma}",
            2.0 / m
        ));
    }
    let valid = |e: f64| sigma < nf / (m + e) && sigma < (2.0 - e) / (m + e) + nf / ((m + e) * lambda);
    let epsilon = (1..16)
        .map(|k| k as f64 / 16.0)
        .find(|&e| valid(e))
        .ok_or_else(|| crate::error::Error::Nonconvergence("no eps = k/16 works; use a finer grid".into()))?;
    let t = 2.0 - epsilon;
    let c0 = if lambda * sigma <= 1.0 {
        t * lambda * (sigma + 1.0) / nf
    } else {
        (nf - t) * lambda / nf * (t / (nf - t) + nf / ((nf - t) * lambda) - sigma)
    };
    if !(c0 > 0.0) {
        return Err(crate::error::Error::Nonconvergence(format!("nonpositive C0 = {c0}")));
    }
    let iterations_needed = (1.0 / c0).ceil() as usize + 1;
    let mut steps = Vec::new();
    let mut inv_p = 1.0;
    loop {
        let inv_p2 = inv_p - t / nf;
        let inv_p3 = sigma * inv_p2 - t / nf;
        let inv_q = lambda * inv_p3;
        let gain = -(lambda * sigma - 1.0) * inv_p + t * lambda * (sigma + 1.0) / nf;
        steps.push(MoserStep { p: 1.0 / inv_p, p2: recip(inv_p2), p3: recip(inv_p3), q: recip(inv_q), gain });
        if inv_q <= 0.0 {
            break;
        }
        inv_p = inv_q;
        if steps.len() > iterations_needed + 1 {
            return Err(crate::error::Error::Nonconvergence(format!("iteration exceeded {iterations_needed} steps")));
        }
    }
    Ok(MoserTrace { epsilon, c0, steps, iterations_needed })
}

// ---------------------------------------------------------------------------------------------
// Kelvin transform
// ---------------------------------------------------------------------------------------------

/// y = x/|x|², U(y) = |x|^{n−2}u(x) for n ≥ 3 and U(y) = u(x) for n = 2.
pub fn kelvin(samples: &[(Point, f64)]) -> Result<Vec<(Point, f64)>> {
    samples
        .iter()
        .map(|(x, u)| {
            let r2: f64 = x.0.iter().map(|c| c * c).sum();
            if r2 == 0.0 {
                return domain("the Kelvin transform is undefined at the origin");
            }
            let n = x.dim();
            let y = Point(x.0.iter().map(|c| c / r2).collect());
            let w = if n == 2 { 1.0 } else { r2.sqrt().powi(n as i32 - 2) };
            Ok((y, w * u))
        })
        .collect()
}

/// Image at infinity of a bound near the origin: the exponent drops by n − 2 (unchanged in the
/// plane), the log power, flavor and slack carry over.
pub fn kelvin_descriptor(d: BoundDescriptor, n: usize) -> BoundDescriptor {
    let shift = if n == 2 { 0.0 } else { n as f64 - 2.0 };
    BoundDescriptor { base_exponent: d.base_exponent - shift, ..d }
}

/// Compares the bounds at infinity with the Kelvin image of the weighted bounds at
/// α = n+2−(n−2)λ, β = n+2−(n−2)σ. Exponent, log power and flavor must agree exactly; the slack
/// only by whether it is present.
pub fn kelvin_consistent(lambda: f64, sigma: f64, n: usize, eps: f64) -> Result<bool> {
    let nf = n as f64;
    let m = nf - 2.0;
    let near = bounds_weighted(lambda, sigma, n, nf + 2.0 - m * lambda, nf + 2.0 - m * sigma, eps)?;
    let far = bounds_at_infinity(lambda, sigma, n, eps)?;
    let same = |a: BoundDescriptor, b: BoundDescriptor| {
        let tol = 1e-9 * a.base_exponent.abs().max(1.0);
        (a.base_exponent - b.base_exponent).abs() <= tol
            && (a.log_power - b.log_power).abs() <= 1e-9
            && a.flavor == b.flavor
            && (a.epsilon_slack > 0.0) == (b.epsilon_slack > 0.0)
    };
    Ok(same(kelvin_descriptor(near.u, n), far.u) && same(kelvin_descriptor(near.v, n), far.v))
}
