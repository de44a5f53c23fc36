//! Wolff potentials W_{α,p}, their damped variant and the truncated 𝐖_σ functional.

use super::profile::{power_exp_integral, ring_integral, Profile, RingQuad};
use super::PotentialValue;
use crate::core_model::{GridDensity, Measure, Point};
use crate::error::{domain, Result};

/// ∫_0^∞ (μ(B_r(x))/r^{n-αp})^{1/(p-1)} e^{-cr} dr/r.
pub fn wolff(mu: &Measure, alpha: f64, p: f64, c: f64, x: &Point, rings: usize) -> Result<PotentialValue> {
    let n = x.dim();
    if let Some(d) = mu.dim() {
        if d != n {
            return domain("measure and point dimensions differ");
        }
    }
    if !(p > 1.0) {
        return domain(format!("Wolff exponent p must exceed 1, got {p}"));
    }
    if !(alpha > 0.0) {
        return domain(format!("Wolff order alpha must be positive, got {alpha}"));
    }
    if !(c >= 0.0) {
        return domain("damping c must be nonnegative");
    }
    let nf = n as f64;
    if c == 0.0 && !(alpha * p < nf) {
        return domain(format!("undamped Wolff potential diverges unless alpha*p < n (alpha*p = {})", alpha * p));
    }
    if c > 0.0 && alpha * p > nf {
        return domain(format!("damped Wolff potential requires alpha*p <= n (alpha*p = {})", alpha * p));
    }
    let q = 1.0 / (p - 1.0);
    let e = (nf - alpha * p) * q;
    let profile = Profile::new(mu, x)?;
    let weight = |a: f64, b: f64| power_exp_integral(e, c, a, b);
    let head = |c0: f64, r_min: f64| c0.powf(q) * r_min.powf(nf * q - e) / (nf * q - e);
    let rq = RingQuad { rings, transform: &|m: f64| m.powf(q), weight_integral: &weight, head: &head, r_max: None, n };
    let b = ring_integral(&profile, &rq)?;
    Ok(PotentialValue { value: b.value, error_estimate: b.half_width })
}

/// 𝐖_σ f(x) = ∫_0^3 (∫_{B_r(x)} f)^σ dr / r^{(n-2)σ-1} for x in B_1(0).
///
/// `f` is extended by zero outside its box.
pub fn wolff_sigma(f: &GridDensity, sigma: f64, x: &Point, rings: usize) -> Result<PotentialValue> {
    let n = f.dim();
    if n < 3 {
        return domain("wolff_sigma needs n >= 3");
    }
    if x.dim() != n {
        return domain("density and point dimensions differ");
    }
    let crit = 2.0 / (n as f64 - 2.0);
    if !(sigma >= crit) {
        return domain(format!("wolff_sigma requires sigma >= 2/(n-2) = {crit}, got {sigma}"));
    }
    if !(x.norm() < 1.0) {
        return domain("wolff_sigma is defined for x in the open unit ball");
    }
    let mu = Measure::Grid(f.clone());
    let profile = Profile::new(&mu, x)?;
    let e = (n as f64 - 2.0) * sigma - 2.0;
    let nf = n as f64;
    let weight = |a: f64, b: f64| power_exp_integral(e, 0.0, a, b);
    let head = |c0: f64, r_min: f64| c0.powf(sigma) * r_min.powf(nf * sigma - e) / (nf * sigma - e);
    let rq = RingQuad {
        rings,
        transform: &|m: f64| m.powf(sigma),
        weight_integral: &weight,
        head: &head,
        r_max: Some(3.0),
        n,
    };
    let b = ring_integral(&profile, &rq)?;
    Ok(PotentialValue { value: b.value, error_estimate: b.half_width })
}
