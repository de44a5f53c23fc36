//! Radial convolution kernels and their averages over small balls.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::gamma;

use crate::core_model::{ball_volume, sphere_area};

/// A radially symmetric kernel K(|y|) on R^n.
pub trait RadialKernel: Sync {
    fn dim(&self) -> usize;

    fn value(&self, r: f64) -> f64;

    /// ∫_{B_ρ} K(|y|) dy.
    fn ball_integral(&self, rho: f64) -> f64;

    /// Average of K over B_ρ; used for the cell that contains the evaluation point.
    fn ball_average(&self, rho: f64) -> f64 {
        self.ball_integral(rho) / ball_volume(self.dim(), rho)
    }

    /// Radial Laplacian K'' + (n-1)K'/r, by central differences unless overridden.
    fn laplacian(&self, r: f64) -> f64 {
        let h = 1e-3 * r;
        let (a, b, c) = (self.value(r - h), self.value(r), self.value(r + h));
        let d2 = (a - 2.0 * b + c) / (h * h);
        let d1 = (c - a) / (2.0 * h);
        d2 + (self.dim() as f64 - 1.0) * d1 / r
    }

    /// ∫_{r0}^{r1} K(s) s^{n-1} ds.
    fn shell_integral(&self, r0: f64, r1: f64) -> f64 {
        if r0 <= 0.0 {
            return self.ball_integral(r1) / sphere_area(self.dim());
        }
        log_simpson_shell(self, r0, r1)
    }
}

/// Simpson in log s of K(s) s^n over (r0, r1), r0 > 0.
fn log_simpson_shell<K: RadialKernel + ?Sized>(k: &K, r0: f64, r1: f64) -> f64 {
    let (a, b) = (r0.ln(), r1.ln());
    let m = ((b - a) / 0.01).ceil().max(2.0) as usize;
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let n = k.dim() as i32;
    let g = |t: f64| {
        let s = t.exp();
        k.value(s) * s.powi(n)
    };
    let mut acc = g(a) + g(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// |y|^{α-n}/(n-α), the kernel of the Riesz potential I_α.
#[derive(Debug, Clone, Copy)]
pub struct RieszKernel {
    pub alpha: f64,
    pub n: usize,
}

impl RadialKernel for RieszKernel {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, r: f64) -> f64 {
        let n = self.n as f64;
        r.powf(self.alpha - n) / (n - self.alpha)
    }

    fn ball_integral(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        sphere_area(self.n) * rho.powf(self.alpha) / (self.alpha * (n - self.alpha))
    }

    fn laplacian(&self, r: f64) -> f64 {
        let n = self.n as f64;
        let e = self.alpha - n;
        e * (e + n - 2.0) * r.powf(e - 2.0) / (n - self.alpha)
    }

    fn shell_integral(&self, r0: f64, r1: f64) -> f64 {
        let n = self.n as f64;
        (r1.powf(self.alpha) - r0.max(0.0).powf(self.alpha)) / (self.alpha * (n - self.alpha))
    }
}

/// |y|^{2-n}, the unnormalized Newtonian kernel (n ≥ 3).
#[derive(Debug, Clone, Copy)]
pub struct NewtonKernel {
    pub n: usize,
}

impl RadialKernel for NewtonKernel {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, r: f64) -> f64 {
        r.powi(2 - self.n as i32)
    }

    fn ball_integral(&self, rho: f64) -> f64 {
        sphere_area(self.n) * rho * rho / 2.0
    }

    fn laplacian(&self, _r: f64) -> f64 {
        0.0
    }
}

/// log(2/|y|), the planar fundamental kernel.
#[derive(Debug, Clone, Copy)]
pub struct LogKernel;

impl RadialKernel for LogKernel {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, r: f64) -> f64 {
        (2.0 / r).ln()
    }

    fn ball_integral(&self, rho: f64) -> f64 {
        // 2π ∫_0^ρ s log(2/s) ds
        2.0 * std::f64::consts::PI * (0.5 * rho * rho * (2.0 / rho).ln() + 0.25 * rho * rho)
    }

    fn laplacian(&self, _r: f64) -> f64 {
        0.0
    }
}

/// Bessel kernel G_α of (1-Δ)^{-α/2}, tabulated on a log grid from the subordination integral
///
/// G_α(r) = (4π)^{-n/2}/Γ(α/2) ∫_0^∞ t^{(α-n)/2} e^{-t} e^{-r²/(4t)} dt/t.
#[derive(Debug, Clone)]
pub struct BesselKernel {
    pub alpha: f64,
    pub n: usize,
    log_r0: f64,
    step: f64,
    log_g: Vec<f64>,
}

const BESSEL_R_MIN: f64 = 1e-9;
const BESSEL_R_MAX: f64 = 80.0;
const BESSEL_NODES: usize = 4000;

impl BesselKernel {
    /// Shared, lazily built table for `(alpha, n)`.
    pub fn cached(alpha: f64, n: usize) -> Arc<BesselKernel> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<BesselKernel>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (alpha.to_bits(), n);
        if let Some(k) = cache.lock().unwrap().get(&key) {
            return k.clone();
        }
        let k = Arc::new(BesselKernel::build(alpha, n));
        cache.lock().unwrap().insert(key, k.clone());
        k
    }

    pub fn build(alpha: f64, n: usize) -> BesselKernel {
        let log_r0 = BESSEL_R_MIN.ln();
        let step = (BESSEL_R_MAX.ln() - log_r0) / (BESSEL_NODES - 1) as f64;
        let log_g = (0..BESSEL_NODES).map(|i| subordination(alpha, n, (log_r0 + i as f64 * step).exp()).ln()).collect();
        BesselKernel { alpha, n, log_r0, step, log_g }
    }
}

/// Direct evaluation of the subordination integral (trapezoid in log t).
pub fn subordination(alpha: f64, n: usize, r: f64) -> f64 {
    let k = (alpha - n as f64) / 2.0;
    let b = r * r / 4.0;
    let s_lo = (b / 200.0).ln().min(-10.0);
    let s_hi = 200f64.ln().max(r.ln() + 3.0);
    let h = 0.02;
    let m = ((s_hi - s_lo) / h).ceil() as usize;
    let mut acc = 0.0;
    for i in 0..=m {
        let s = s_lo + i as f64 * h;
        let e = k * s - s.exp() - b * (-s).exp();
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        acc += w * e.exp();
    }
    acc * h / ((4.0 * std::f64::consts::PI).powf(n as f64 / 2.0) * gamma(alpha / 2.0))
}

impl RadialKernel for BesselKernel {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, r: f64) -> f64 {
        if r >= BESSEL_R_MAX {
            return 0.0;
        }
        let t = (r.ln() - self.log_r0) / self.step;
        let last = self.log_g.len() - 1;
        let (i, f) = if t < 0.0 {
            (0, t)
        } else {
            let i = (t.floor() as usize).min(last - 1);
            (i, t - i as f64)
        };
        (self.log_g[i] + f * (self.log_g[i + 1] - self.log_g[i])).exp()
    }

    fn ball_integral(&self, rho: f64) -> f64 {
        // below the table the log-log extrapolation is a pure power s^p
        let s0 = BESSEL_R_MIN.min(rho);
        let p = (self.log_g[1] - self.log_g[0]) / self.step;
        let n = self.n as f64;
        let head = self.value(s0) * s0.powf(n) / (p + n);
        if rho <= s0 {
            return sphere_area(self.n) * head;
        }
        sphere_area(self.n) * (head + log_simpson_shell(self, s0, rho))
    }
}
