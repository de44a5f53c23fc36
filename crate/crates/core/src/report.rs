//! Verdicts and the growth-trend rule shared by the verifiers and constructors.

use serde::{Deserialize, Serialize};

/// Outcome of checking an inequality against sampled data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Violated,
    Inconclusive,
}

/// Whether a ratio sequence along points approaching the singularity stays bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Growth {
    Bounded,
    Diverges,
}

/// `Diverges` when the second half of `ratios` is strictly increasing and the last entry exceeds
/// the first by at least `factor`.
pub fn growth_trend(ratios: &[f64], factor: f64) -> Growth {
    if ratios.len() < 2 {
        return Growth::Bounded;
    }
    let tail = &ratios[ratios.len() / 2..];
    let increasing = tail.len() < 2 || tail.windows(2).all(|w| w[1] > w[0]);
    let first = ratios[0];
    let last = ratios[ratios.len() - 1];
    if increasing && first > 0.0 && last >= factor * first {
        Growth::Diverges
    } else {
        Growth::Bounded
    }
}
