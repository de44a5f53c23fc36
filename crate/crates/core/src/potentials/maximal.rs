//! Discrete Hardy-Littlewood maximal function on a geometric radius ladder.

use crate::core_model::{GridDensity, Point};
use crate::error::{domain, Result};

/// Lattice points of the unit ball, used to average over B_r(x) for every rung.
fn unit_ball_lattice(n: usize, k: usize) -> Vec<Vec<f64>> {
    let total = k.pow(n as u32);
    let mut out = Vec::new();
    for m in 0..total {
        let mut rem = m;
        let mut p = vec![0.0; n];
        for c in p.iter_mut() {
            *c = -1.0 + (2.0 * (rem % k) as f64 + 1.0) / k as f64;
            rem /= k;
        }
        if p.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            out.push(p);
        }
    }
    out
}

fn lattice_size(n: usize) -> usize {
    match n {
        2 => 64,
        3 => 20,
        4 => 10,
        _ => 6,
    }
}

/// Value of the cell containing `y`, zero outside the box.
fn sample(f: &GridDensity, y: &[f64]) -> f64 {
    f.cell_of(y).map(|i| f.values[i]).unwrap_or(0.0)
}

/// Radii r_k = r_min·2^{k/4} from a quarter of the smallest cell side up to the box diameter.
pub fn radius_ladder(f: &GridDensity) -> Vec<f64> {
    let r_min = 0.25 * f.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let top = f.diameter();
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = r_min * 2f64.powf(k as f64 / 4.0);
        out.push(r.min(top));
        if r >= top {
            break;
        }
        k += 1;
    }
    out
}

/// Average of f over B_r(x), approximated by a fixed lattice of points filling the ball.
pub fn ball_average(f: &GridDensity, x: &Point, r: f64) -> f64 {
    let lattice = unit_ball_lattice(f.dim(), lattice_size(f.dim()));
    average_with(f, x, r, &lattice)
}

fn average_with(f: &GridDensity, x: &Point, r: f64, lattice: &[Vec<f64>]) -> f64 {
    let mut y = vec![0.0; f.dim()];
    let mut acc = 0.0;
    for s in lattice {
        for i in 0..y.len() {
            y[i] = x.0[i] + r * s[i];
        }
        acc += sample(f, &y);
    }
    acc / lattice.len() as f64
}

/// sup_r |B_r(x)|^{-1} ∫_{B_r(x)} |f| over the ladder.
pub fn maximal(f: &GridDensity, x: &Point) -> Result<f64> {
    if x.dim() != f.dim() {
        return domain("density and point dimensions differ");
    }
    let lattice = unit_ball_lattice(f.dim(), lattice_size(f.dim()));
    Ok(radius_ladder(f).iter().map(|&r| average_with(f, x, r, &lattice)).fold(0.0, f64::max))
}
