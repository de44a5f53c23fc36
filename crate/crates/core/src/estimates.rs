//! Numerical checks of pointwise potential inequalities.
//!
//! Every verifier samples both sides of an inequality `lhs ≤ C·rhs` on a probe set and reports the
//! observed ratios. The constant is never assumed: `fitted_c` is the largest ratio seen.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::core_model::lens_volume;
use crate::core_model::{ball_volume, Ball, GridDensity, Measure, Point};
use crate::error::{domain, Error, Result};
use crate::potentials::maximal;
use crate::potentials::profile::{power_exp_integral, Profile};
use crate::potentials::{
    havin_mazya_many, v_potential_many, v_potential_unrestricted, wolff, CompositeNN, PotentialValue,
};
pub use crate::report::Verdict;

/// Relative tolerance used to decide that a parameter sits exactly on a regime boundary.
const BOUNDARY_TOL: f64 = 1e-12;

fn on_boundary(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Which inequality a report checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateId {
    /// sup of N((Nf)^σ) on the unit ball against a product of L^s and L^∞ norms.
    CompositePower,
    /// The same composite at the critical exponent, against a logarithmic bound.
    CompositeLog,
    /// Composite on an arbitrary ball against L^1 and L^∞ norms, σ above 2/(n-2).
    BallCompositePower,
    /// Composite on an arbitrary ball at σ = 2/(n-2).
    BallCompositeLog,
    /// Damped Wolff potential bounded by the Bessel nonlinear potential V.
    WolffBelowV,
    /// V bounded by the damped Wolff potential.
    VBelowWolff,
    /// V bounded by the Wolff integral of the sup-over-centres ball mass.
    VBelowMajorant,
    /// V bounded by a rescaled Wolff potential when V itself is bounded by K.
    BoundedVPower,
    /// V bounded by a log-weighted Wolff integral at the endpoint exponent.
    BoundedVLog,
    /// U bounded by the maximal function and an L^s norm.
    HavinMaximal,
    /// U bounded by the L^∞ and L^s norms.
    HavinSup,
    /// V at the critical exponent bounded by a log of the maximal function.
    CriticalMaximal,
    /// V at the critical exponent bounded by a log of the L^∞ norm.
    CriticalSup,
    /// Newtonian potential of a ball indicator against its two-regime majorant.
    BallNewtonian,
}

impl EstimateId {
    pub const ALL: [EstimateId; 14] = [
        EstimateId::CompositePower,
        EstimateId::CompositeLog,
        EstimateId::BallCompositePower,
        EstimateId::BallCompositeLog,
        EstimateId::WolffBelowV,
        EstimateId::VBelowWolff,
        EstimateId::VBelowMajorant,
        EstimateId::BoundedVPower,
        EstimateId::BoundedVLog,
        EstimateId::HavinMaximal,
        EstimateId::HavinSup,
        EstimateId::CriticalMaximal,
        EstimateId::CriticalSup,
        EstimateId::BallNewtonian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateId::CompositePower => "composite-power",
            EstimateId::CompositeLog => "composite-log",
            EstimateId::BallCompositePower => "ball-composite-power",
            EstimateId::BallCompositeLog => "ball-composite-log",
            EstimateId::WolffBelowV => "wolff-below-v",
            EstimateId::VBelowWolff => "v-below-wolff",
            EstimateId::VBelowMajorant => "v-below-majorant",
            EstimateId::BoundedVPower => "bounded-v-power",
            EstimateId::BoundedVLog => "bounded-v-log",
            EstimateId::HavinMaximal => "havin-maximal",
            EstimateId::HavinSup => "havin-sup",
            EstimateId::CriticalMaximal => "critical-maximal",
            EstimateId::CriticalSup => "critical-sup",
            EstimateId::BallNewtonian => "ball-newtonian",
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimateId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimateId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown estimate id {s:?}")))
    }
}

/// One evaluation of both sides of an inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: String,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
    /// lhs/rhs when informative; `None` for 0/0 or ∞/∞.
    pub ratio: Option<f64>,
}

impl Sample {
    pub fn new(input: impl Into<String>, lhs: PotentialValue, rhs: PotentialValue) -> Sample {
        let (l, r) = (lhs.value, rhs.value);
        let ratio = if r.is_infinite() {
            if l.is_infinite() {
                None
            } else {
                Some(0.0)
            }
        } else if r > 0.0 {
            Some(l / r)
        } else if l <= lhs.error_estimate {
            None
        } else {
            Some(f64::INFINITY)
        };
        Sample {
            input: input.into(),
            lhs: l,
            rhs: r,
            lhs_error: lhs.error_estimate,
            rhs_error: rhs.error_estimate,
            ratio,
        }
    }

    /// True when lhs exceeds a zero rhs beyond its own error, which no constant can repair.
    fn violates(&self) -> bool {
        self.ratio == Some(f64::INFINITY)
    }
}

/// Sampled ratios for one inequality, with the fitted constant and a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate_id: EstimateId,
    pub samples: Vec<Sample>,
    /// Smallest and largest informative ratio; zero when there is none.
    pub min_ratio: f64,
    pub max_ratio: f64,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    pub verdict: Verdict,
    /// |ratio(t·f)/ratio(f) − 1| for the first input, when checked.
    pub homogeneity_defect: Option<f64>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    /// Builds the report, deciding the verdict from the samples and `hypothesis_ok`.
    pub fn from_samples(
        estimate_id: EstimateId,
        samples: Vec<Sample>,
        hypothesis_ok: bool,
        notes: Vec<String>,
    ) -> EstimateReport {
        let finite: Vec<f64> = samples.iter().filter_map(|s| s.ratio).filter(|r| r.is_finite() && *r > 0.0).collect();
        let min_ratio = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_ratio = finite.iter().cloned().fold(0.0, f64::max);
        let verdict = if samples.iter().any(Sample::violates) {
            Verdict::Violated
        } else if finite.is_empty() || !hypothesis_ok {
            Verdict::Inconclusive
        } else {
            Verdict::Consistent
        };
        EstimateReport {
            estimate_id,
            samples,
            min_ratio: if finite.is_empty() { 0.0 } else { min_ratio },
            max_ratio,
            fitted_c: max_ratio,
            verdict,
            homogeneity_defect: None,
            notes,
        }
    }

    /// Writes one CSV row per sample.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["estimate_id", "index", "input", "lhs", "rhs", "lhs_error", "rhs_error", "ratio"])?;
        for (i, s) in self.samples.iter().enumerate() {
            out.write_record([
                self.estimate_id.name().to_string(),
                i.to_string(),
                s.input.clone(),
                s.lhs.to_string(),
                s.rhs.to_string(),
                s.lhs_error.to_string(),
                s.rhs_error.to_string(),
                s.ratio.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Resolution knobs shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Cells per axis of the working grid for two-pass potentials.
    pub grid: usize,
    /// Log-spaced rings for radial quadrature.
    pub rings: usize,
    /// Quasi-random probes per input.
    pub probes: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { grid: 24, rings: 512, probes: 64, seed: 1 }
    }
}

// ---------------------------------------------------------------------------------------------
// Inputs: probes and random test data
// ---------------------------------------------------------------------------------------------

/// k-th element of the van der Corput sequence in `base`.
pub fn halton(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `count` Halton points in the box [lo, hi], rotated by a seed-dependent shift.
pub fn halton_box(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = lo.iter().map(|_| rng.gen::<f64>()).collect();
    (1..=count)
        .map(|k| {
            Point(
                (0..lo.len())
                    .map(|a| {
                        let u = (halton(k, PRIMES[a % PRIMES.len()]) + shift[a]).fract();
                        lo[a] + (hi[a] - lo[a]) * u
                    })
                    .collect(),
            )
        })
        .collect()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Quasi-random probes around the support of `mu`, plus one point at distance 1e-3 from each atom.
pub fn default_probes(mu: &Measure, count: usize, seed: u64) -> Result<Vec<Point>> {
    let n = mu.dim().ok_or_else(|| Error::Domain("cannot place probes for an empty measure".into()))?;
    let (lo, hi) = match mu {
        Measure::Grid(g) => (g.lo.clone(), g.hi.clone()),
        Measure::Radial(r) => {
            let a = 1.5 * r.outer_radius();
            (vec![-a; n], vec![a; n])
        }
        Measure::Atomic(a) => {
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for p in &a.points {
                for i in 0..n {
                    lo[i] = lo[i].min(p.0[i]);
                    hi[i] = hi[i].max(p.0[i]);
                }
            }
            let pad = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(1.0, f64::max) * 0.5;
            (lo.iter().map(|l| l - pad).collect(), hi.iter().map(|h| h + pad).collect())
        }
    };
    let mut out = halton_box(&lo, &hi, count, seed);
    if let Measure::Atomic(a) = mu {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for (p, m) in a.points.iter().zip(&a.masses) {
            if *m > 0.0 {
                let u = random_unit(n, &mut rng);
                out.push(Point(p.0.iter().zip(&u).map(|(c, d)| c + 1e-3 * d).collect()));
            }
        }
    }
    // a probe landing exactly on an atom would make every potential infinite
    out.retain(|x| match mu {
        Measure::Atomic(a) => a.points.iter().all(|p| p.dist(x) > 0.0),
        _ => true,
    });
    Ok(out)
}

/// A sum of Gaussian bumps in unit coordinates, sampled onto grids of any resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpMix {
    pub centers: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
    pub widths: Vec<f64>,
}

impl BumpMix {
    /// One to three bumps centred inside the ball of radius 0.7.
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> BumpMix {
        let k = rng.gen_range(1..=3);
        let mut mix = BumpMix { centers: Vec::new(), heights: Vec::new(), widths: Vec::new() };
        for _ in 0..k {
            let dir = random_unit(n, rng);
            let r = 0.7 * rng.gen::<f64>().powf(1.0 / n as f64);
            mix.centers.push(dir.iter().map(|d| d * r).collect());
            mix.heights.push(rng.gen_range(0.2..2.0));
            mix.widths.push(rng.gen_range(0.15..0.5));
        }
        mix
    }

    /// Value at a point given in unit coordinates.
    pub fn value(&self, u: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(self.heights.iter().zip(&self.widths))
            .map(|(c, (h, w))| {
                let d2: f64 = c.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
                h * (-d2 / (w * w)).exp()
            })
            .sum()
    }

    /// Samples x ↦ value((x − center)/half) on the cube of half-width `half` about `center`.
    pub fn sample(&self, center: &Point, half: f64, cells: usize) -> Result<GridDensity> {
        let n = center.dim();
        let lo: Vec<f64> = center.0.iter().map(|c| c - half).collect();
        let hi: Vec<f64> = center.0.iter().map(|c| c + half).collect();
        GridDensity::from_fn(lo, hi, vec![cells; n], |x| {
            let u: Vec<f64> = x.iter().zip(&center.0).map(|(a, c)| (a - c) / half).collect();
            self.value(&u)
        })
    }
}

/// `count` random bump mixtures from a fixed seed.
pub fn random_bump_mixes(n: usize, count: usize, seed: u64) -> Vec<BumpMix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| BumpMix::random(n, &mut rng)).collect()
}

/// `count` random atomic measures with 1 to 4 atoms in [-1, 1]^n and masses in [0.1, 2].
pub fn random_atomic_measures(n: usize, count: usize, seed: u64) -> Vec<Measure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=4);
            let points = (0..k).map(|_| Point((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
            let masses = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
            Measure::Atomic(crate::core_model::AtomicMeasure { points, masses })
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// Branch selection
// ---------------------------------------------------------------------------------------------

/// Composite on the unit ball: power form for σ > 2/(n-2) and 0 < s < nσ/(2(σ+1)), log form at
/// s = nσ/(2(σ+1)) with σ ≥ 2/(n-2).
pub fn composite_branch(n: usize, sigma: f64, s: f64) -> Result<EstimateId> {
    if n < 3 {
        return domain("the composite estimate needs n >= 3");
    }
    let nf = n as f64;
    let crit = 2.0 / (nf - 2.0);
    let s_star = nf * sigma / (2.0 * (sigma + 1.0));
    if !(s > 0.0) {
        return domain(format!("s must be positive, got {s}"));
    }
    if on_boundary(s, s_star) {
        if sigma >= crit || on_boundary(sigma, crit) {
            return Ok(EstimateId::CompositeLog);
        }
        return domain(format!("the log form needs sigma >= 2/(n-2) = {crit}"));
    }
    if !(sigma > crit) || on_boundary(sigma, crit) {
        return domain(format!("the power form needs sigma > 2/(n-2) = {crit}, got {sigma}"));
    }
    if s > s_star {
        return domain(format!("s must not exceed n*sigma/(2(sigma+1)) = {s_star}"));
    }
    Ok(EstimateId::CompositePower)
}

/// Composite on an arbitrary ball: log form at σ = 2/(n-2), power form above.
pub fn ball_composite_branch(n: usize, sigma: f64) -> Result<EstimateId> {
    if n < 3 {
        return domain("the composite estimate needs n >= 3");
    }
    let crit = 2.0 / (n as f64 - 2.0);
    if on_boundary(sigma, crit) {
        Ok(EstimateId::BallCompositeLog)
    } else if sigma > crit {
        Ok(EstimateId::BallCompositePower)
    } else {
        domain(format!("sigma must be at least 2/(n-2) = {crit}, got {sigma}"))
    }
}

/// Comparisons between V and the damped Wolff potential available for (n, α, p).
///
/// The lower comparison always applies; the upper one needs p > 2 − α/n, and otherwise the
/// majorant form needs α < n/p.
pub fn wolff_branches(n: usize, alpha: f64, p: f64) -> Result<Vec<EstimateId>> {
    let nf = n as f64;
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    if !(alpha > 0.0) || (alpha * p > nf && !on_boundary(alpha * p, nf)) {
        return domain(format!("need 0 < alpha <= n/p = {}", nf / p));
    }
    let endpoint = 2.0 - alpha / nf;
    let mut out = vec![EstimateId::WolffBelowV];
    if p > endpoint && !on_boundary(p, endpoint) {
        out.push(EstimateId::VBelowWolff);
    } else if alpha * p < nf && !on_boundary(alpha * p, nf) {
        out.push(EstimateId::VBelowMajorant);
    }
    Ok(out)
}

/// Bounded-V estimate: power form for p < 2 − α/n, log form at equality.
pub fn bounded_v_branch(n: usize, alpha: f64, p: f64) -> Result<EstimateId> {
    let nf = n as f64;
    if !(p > 1.0) {
        return domain(format!("p must exceed 1, got {p}"));
    }
    if !(alpha > 0.0 && alpha * p < nf) || on_boundary(alpha * p, nf) {
        return domain(format!("need 0 < alpha < n/p = {}", nf / p));
    }
    let endpoint = 2.0 - alpha / nf;
    if on_boundary(p, endpoint) {
        Ok(EstimateId::BoundedVLog)
    } else if p < endpoint {
        Ok(EstimateId::BoundedVPower)
    } else {
        domain(format!("need p <= 2 - alpha/n = {endpoint}, got {p}"))
    }
}

/// Maximal-function and norm bounds for U and V.
///
/// Below the critical exponent s* = n/(αp) the maximal form applies when p > 2 − α/n and s ≥ 1,
/// and the sup form otherwise. At s = s* the maximal log form needs the same two conditions.
pub fn havin_branch(n: usize, alpha: f64, p: f64, s: f64) -> Result<EstimateId> {
    let nf = n as f64;
    if !(p > 1.0) || !(alpha > 0.0 && alpha < nf) || !(s > 0.0) {
        return domain("need p > 1, 0 < alpha < n and s > 0");
    }
    let s_star = nf / (alpha * p);
    let upper = p > 2.0 - alpha / nf && !on_boundary(p, 2.0 - alpha / nf);
    if on_boundary(s, s_star) {
        return Ok(if upper && s >= 1.0 { EstimateId::CriticalMaximal } else { EstimateId::CriticalSup });
    }
    if s > s_star {
        return domain(format!("s must not exceed n/(alpha*p) = {s_star}"));
    }
    if alpha * p >= nf {
        return domain(format!("the subcritical forms need alpha < n/p = {}", nf / p));
    }
    Ok(if upper && s >= 1.0 { EstimateId::HavinMaximal } else { EstimateId::HavinSup })
}

// ---------------------------------------------------------------------------------------------
// Composite N((Nf)^σ)
// ---------------------------------------------------------------------------------------------

/// L^s norm and sup of `f` restricted to `ball`.
fn ball_norms(f: &GridDensity, ball: &Ball, s: f64) -> (f64, f64) {
    let cov = f.coverage(ball, crate::core_model::subsamples_for(f.dim()));
    let vol = f.cell_volume();
    let sum: f64 = f.values.iter().zip(&cov).map(|(v, c)| v.powf(s) * c).sum();
    let sup = f.values.iter().zip(&cov).filter(|(_, c)| **c > 0.0).map(|(v, _)| *v).fold(0.0, f64::max);
    ((sum * vol).powf(1.0 / s), sup)
}

fn composite_rhs(id: EstimateId, n: f64, sigma: f64, s: f64, ns: f64, sup: f64, ball_vol: f64) -> f64 {
    if ns == 0.0 {
        return 0.0;
    }
    match id {
        EstimateId::CompositePower | EstimateId::BallCompositePower => {
            ns.powf(2.0 * s * (sigma + 1.0) / n) * sup.powf(((n - 2.0 * s) * sigma - 2.0 * s) / n)
        }
        // the unspecified constant inside the log is taken as e·|B|^{1/s}, making the argument ≥ e
        _ => ns.powf(sigma) * (std::f64::consts::E * ball_vol.powf(1.0 / s) * sup / ns).ln(),
    }
}

/// sup over B of N((Nf)^σ) from the cell centres meeting B.
fn composite_sup(f: &GridDensity, ball: &Ball, sigma: f64) -> Result<f64> {
    Ok(CompositeNN::new(f, ball, sigma)?.sup_on_cells())
}

fn composite_report(
    id: EstimateId,
    fs: &[GridDensity],
    ball: &Ball,
    sigma: f64,
    s: f64,
    mut notes: Vec<String>,
) -> Result<EstimateReport> {
    let n = ball.center.dim();
    if fs.iter().any(|f| f.dim() != n) {
        return domain("density and ball dimensions differ");
    }
    let nf = n as f64;
    let vol = ball.volume();
    let side = |f: &GridDensity| -> Result<(f64, f64)> {
        let lhs = composite_sup(f, ball, sigma)?;
        let (ns, sup) = ball_norms(f, ball, s);
        Ok((lhs, composite_rhs(id, nf, sigma, s, ns, sup, vol)))
    };
    let mut samples = Vec::with_capacity(fs.len());
    for (i, f) in fs.iter().enumerate() {
        let (lhs, rhs) = side(f)?;
        samples.push(Sample::new(format!("density {i}"), PotentialValue::exact(lhs), PotentialValue::exact(rhs)));
    }
    notes.push("sup over the ball is the max over cell centres, a lower bound on the true sup".into());
    let mut report = EstimateReport::from_samples(id, samples, true, notes);
    report.homogeneity_defect = homogeneity(fs.first(), 3.7, |f| side(f))?;
    Ok(report)
}

/// |ratio(t·f)/ratio(f) − 1| for the first input.
fn homogeneity(
    f: Option<&GridDensity>,
    t: f64,
    side: impl Fn(&GridDensity) -> Result<(f64, f64)>,
) -> Result<Option<f64>> {
    let Some(f) = f else { return Ok(None) };
    let (l0, r0) = side(f)?;
    let (l1, r1) = side(&f.scaled(t))?;
    if !(l0 > 0.0 && r0 > 0.0 && r1 > 0.0) {
        return Ok(None);
    }
    Ok(Some(((l1 / r1) / (l0 / r0) - 1.0).abs()))
}

/// Checks sup_B N((Nf)^σ) against the norm bound on the unit ball, one sample per density.
pub fn verify_composite_unit_ball(fs: &[GridDensity], sigma: f64, s: f64) -> Result<EstimateReport> {
    let n = fs.first().map(|f| f.dim()).ok_or_else(|| Error::Domain("no densities given".into()))?;
    let id = composite_branch(n, sigma, s)?;
    let ball = Ball::new(Point::origin(n), 1.0)?;
    composite_report(id, fs, &ball, sigma, s, Vec::new())
}

/// Checks the composite bound on B_R(x0) with s = 1.
pub fn verify_composite_on_ball(gs: &[GridDensity], ball: &Ball, sigma: f64) -> Result<EstimateReport> {
    let id = ball_composite_branch(ball.center.dim(), sigma)?;
    composite_report(id, gs, ball, sigma, 1.0, Vec::new())
}

// ---------------------------------------------------------------------------------------------
// V against Wolff potentials
// ---------------------------------------------------------------------------------------------

/// True when J_α μ is not locally L^{1/(p-1)} near an atom, so V ≡ ∞.
fn v_is_infinite(mu: &Measure, alpha: f64, p: f64) -> bool {
    match (mu, mu.dim()) {
        (Measure::Atomic(a), Some(n)) => {
            a.masses.iter().any(|m| *m > 0.0) && (n as f64 - alpha) / (p - 1.0) >= n as f64
        }
        _ => false,
    }
}

fn v_values(mu: &Measure, alpha: f64, p: f64, xs: &[Point], grid: usize) -> Result<Vec<PotentialValue>> {
    if v_is_infinite(mu, alpha, p) {
        return Ok(vec![PotentialValue::exact(f64::INFINITY); xs.len()]);
    }
    v_potential_many(mu, alpha, p, xs, grid)
}

/// ∫_0^∞ (φ(r)/r^{n-αp})^{1/(p-1)} e^{-cr} dr/r with φ(r) the largest ball mass over `centres`.
///
/// A max over finitely many centres is a lower bound for the sup over all of R^n. Any atom makes
/// φ bounded below near zero and the integral infinite.
pub fn majorant_integral(
    mu: &Measure,
    alpha: f64,
    p: f64,
    c: f64,
    centres: &[Point],
    rings: usize,
) -> Result<PotentialValue> {
    let n = mu.dim().unwrap_or(3);
    let nf = n as f64;
    let q = 1.0 / (p - 1.0);
    let e = (nf - alpha * p) * q;
    let total = mu.total_mass();
    if total == 0.0 {
        return Ok(PotentialValue::exact(0.0));
    }
    let (head_density, reach) = match mu {
        Measure::Atomic(a) => {
            if a.masses.iter().any(|m| *m > 0.0) {
                return Ok(PotentialValue::exact(f64::INFINITY));
            }
            return Ok(PotentialValue::exact(0.0));
        }
        Measure::Grid(g) => (g.sup_norm() * ball_volume(n, 1.0), g.diameter()),
        Measure::Radial(r) => {
            let r0 = r.knot_radii.first().cloned().unwrap_or(1.0).max(1e-300);
            (r.mass_within(r0) / r0.powi(n as i32), 2.0 * r.outer_radius())
        }
    };
    let phi = |r: f64| -> Result<f64> {
        let mut best: f64 = 0.0;
        for x in centres {
            best = best.max(mu.ball_mass(x, r)?);
        }
        Ok(best)
    };
    let r_min = 1e-3 * reach / rings as f64;
    let weight = |a: f64, b: f64| power_exp_integral(e, c, a, b);
    // φ(r) ≤ sup f·|B_r| below r_min
    let head = head_density.powf(q) * r_min.powf(alpha * p * q) / (alpha * p * q);
    let ratio = (reach / r_min).powf(1.0 / rings as f64);
    let (mut lo, mut hi) = (head, head);
    let mut a = r_min;
    let mut pa = phi(a)?;
    for k in 1..=rings {
        let b = if k == rings { reach } else { r_min * ratio.powi(k as i32) };
        let pb = phi(b)?;
        let w = weight(a, b);
        lo += pa.powf(q) * w;
        hi += pb.powf(q) * w;
        a = b;
        pa = pb;
    }
    let tail = total.powf(q) * weight(reach, f64::INFINITY);
    Ok(PotentialValue { value: 0.5 * (lo + hi) + tail, error_estimate: 0.5 * (hi - lo) })
}

/// Candidate centres for the majorant: the probes plus the densest cells of a grid.
fn majorant_centres(mu: &Measure, probes: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = probes.iter().take(8).cloned().collect();
    match mu {
        Measure::Grid(g) => {
            let mut idx: Vec<usize> = (0..g.len()).collect();
            idx.sort_by(|a, b| g.values[*b].total_cmp(&g.values[*a]));
            out.extend(idx.into_iter().take(8).map(|i| Point(g.center(i))));
        }
        Measure::Radial(r) => out.push(Point::origin(r.dim)),
        Measure::Atomic(_) => {}
    }
    out
}

/// Compares V_{α,p}μ with the damped Wolff potential on the probes of each measure.
///
/// Returns the lower comparison and, depending on p, either the upper comparison or the
/// majorant form.
pub fn verify_bessel_wolff(
    mus: &[Measure],
    alpha: f64,
    p: f64,
    c: f64,
    cfg: &VerifyConfig,
) -> Result<Vec<EstimateReport>> {
    let n = mus.iter().find_map(|m| m.dim()).ok_or_else(|| Error::Domain("no nonempty measure given".into()))?;
    if !(c > 0.0) {
        return domain(format!("damping c must be positive, got {c}"));
    }
    if cfg.probes == 0 {
        return domain("the probe set is empty");
    }
    let branches = wolff_branches(n, alpha, p)?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut notes = Vec::new();
    for (i, mu) in mus.iter().enumerate() {
        let probes = default_probes(mu, cfg.probes, cfg.seed.wrapping_add(i as u64))?;
        let v = v_values(mu, alpha, p, &probes, cfg.grid)?;
        let w: Vec<PotentialValue> =
            probes.par_iter().map(|x| wolff(mu, alpha, p, c, x, cfg.rings)).collect::<Result<_>>()?;
        if v_is_infinite(mu, alpha, p) {
            notes.push(format!("measure {i}: atoms make V infinite for these exponents"));
        }
        for (k, (vk, wk)) in v.iter().zip(&w).enumerate() {
            lower.push(Sample::new(format!("measure {i} probe {k}"), *wk, *vk));
        }
        if branches.contains(&EstimateId::VBelowWolff) {
            for (k, (vk, wk)) in v.iter().zip(&w).enumerate() {
                upper.push(Sample::new(format!("measure {i} probe {k}"), *vk, *wk));
            }
        } else if branches.contains(&EstimateId::VBelowMajorant) {
            let centres = majorant_centres(mu, &probes);
            let m = majorant_integral(mu, alpha, p, c, &centres, cfg.rings.min(128))?;
            if m.value.is_infinite() {
                notes.push(format!("measure {i}: atoms make the majorant infinite"));
            }
            for (k, vk) in v.iter().enumerate() {
                upper.push(Sample::new(format!("measure {i} probe {k}"), *vk, m));
            }
        }
    }
    let mut out = vec![EstimateReport::from_samples(EstimateId::WolffBelowV, lower, true, notes.clone())];
    if let Some(id) = branches.get(1) {
        let mut notes = notes;
        if *id == EstimateId::VBelowMajorant {
            notes.push("the majorant maximizes over finitely many centres, a lower bound on the sup".into());
        }
        out.push(EstimateReport::from_samples(*id, upper, true, notes));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// Bounded V
// ---------------------------------------------------------------------------------------------

/// Log-weighted Wolff integral
/// ∫_0^∞ (μ(B_r)/r^{n-αp} · log(c2 K^{p-1} r^{n-αp}/μ(B_r)))^{1/(p-1)} e^{-cr} dr/r
/// by midpoint rings in log r. Rings with μ(B_r) = 0 contribute 0; their count is returned.
#[allow(clippy::too_many_arguments)]
pub fn log_wolff(
    mu: &Measure,
    alpha: f64,
    p: f64,
    c: f64,
    k: f64,
    c2: f64,
    x: &Point,
    rings: usize,
) -> Result<(PotentialValue, usize)> {
    let nf = x.dim() as f64;
    let q = 1.0 / (p - 1.0);
    let e0 = nf - alpha * p;
    let profile = Profile::new(mu, x)?;
    let total = profile.total();
    if total == 0.0 {
        return Ok((PotentialValue::exact(0.0), rings));
    }
    let reach = profile.reach().max(1e-300);
    let scale = c2 * k.powf(p - 1.0);
    let integrand = |r: f64, m: f64| -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        let f = m / r.powf(e0);
        (f * (scale / f).ln().max(0.0)).powf(q) * (-c * r).exp()
    };
    let r_min = 1e-9 * reach;
    let r_max = (reach * 1e4).max(60.0 / c.max(1e-12));
    let run = |m: usize| -> (f64, usize) {
        let step = (r_max / r_min).ln() / m as f64;
        let mut acc = 0.0;
        let mut empty = 0;
        for i in 0..m {
            let r = r_min * (step * (i as f64 + 0.5)).exp();
            let (lo, hi) = profile.mass(r);
            let mass = 0.5 * (lo + hi);
            if mass <= 0.0 {
                empty += 1;
            }
            acc += integrand(r, mass) * step;
        }
        (acc, empty)
    };
    let (fine, empty) = run(2 * rings);
    let (coarse, _) = run(rings);
    Ok((PotentialValue { value: fine, error_estimate: (fine - coarse).abs() }, empty))
}

/// sup over probes and radii of μ(B_r(x))/r^{n-αp}.
fn density_ratio_sup(mu: &Measure, e0: f64, probes: &[Point]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for x in probes {
        let profile = Profile::new(mu, x)?;
        let reach = profile.reach();
        if reach == 0.0 {
            continue;
        }
        for i in 0..=200 {
            let r = reach * 10f64.powf(-6.0 + 9.0 * i as f64 / 200.0);
            best = best.max(profile.mass(r).1 / r.powf(e0));
        }
    }
    Ok(best)
}

/// Checks the Wolff-type upper bounds that hold when V_{α,p}μ ≤ K everywhere.
///
/// When the measured sup of V exceeds K the hypothesis fails and the verdict is Inconclusive.
pub fn verify_bounded_v(
    mus: &[Measure],
    alpha: f64,
    p: f64,
    k: f64,
    c: f64,
    cfg: &VerifyConfig,
) -> Result<EstimateReport> {
    if !(k > 0.0) {
        return domain(format!("K must be positive, got {k}"));
    }
    if !(c > 0.0) {
        return domain(format!("damping c must be positive, got {c}"));
    }
    let n = mus.iter().find_map(|m| m.dim()).ok_or_else(|| Error::Domain("no nonempty measure given".into()))?;
    let id = bounded_v_branch(n, alpha, p)?;
    let nf = n as f64;
    let e0 = nf - alpha * p;
    let mut samples = Vec::new();
    let mut notes = Vec::new();
    let mut hypothesis_ok = true;
    for (i, mu) in mus.iter().enumerate() {
        if v_is_infinite(mu, alpha, p) {
            hypothesis_ok = false;
            notes.push(format!("measure {i}: atoms make V infinite, so no K bounds it"));
            continue;
        }
        let probes = default_probes(mu, cfg.probes, cfg.seed.wrapping_add(i as u64))?;
        let v = v_values(mu, alpha, p, &probes, cfg.grid)?;
        let v_max = v.iter().map(|t| t.value).fold(0.0, f64::max);
        if v_max > k {
            hypothesis_ok = false;
            notes.push(format!("measure {i}: measured sup V = {v_max:.6e} exceeds K = {k}"));
        }
        let rhs: Vec<PotentialValue> = match id {
            EstimateId::BoundedVPower => {
                let p2 = 1.0 + e0 / (nf - 1.0);
                let a2 = alpha * p / p2;
                let factor = k.powf(((2.0 - p) * nf - alpha) / e0);
                probes
                    .par_iter()
                    .map(|x| {
                        let w = wolff(mu, a2, p2, c, x, cfg.rings)?;
                        Ok(PotentialValue { value: factor * w.value, error_estimate: factor * w.error_estimate })
                    })
                    .collect::<Result<_>>()?
            }
            _ => {
                // c2 is the smallest constant keeping every log argument at least e
                let c2 = std::f64::consts::E * density_ratio_sup(mu, e0, &probes)? / k.powf(p - 1.0);
                notes.push(format!("measure {i}: log constant c2 = {c2:.6e}"));
                let vals: Vec<(PotentialValue, usize)> = probes
                    .par_iter()
                    .map(|x| log_wolff(mu, alpha, p, c, k, c2.max(f64::MIN_POSITIVE), x, cfg.rings))
                    .collect::<Result<_>>()?;
                let flagged: usize = vals.iter().map(|t| t.1).sum();
                if flagged > 0 {
                    notes.push(format!("measure {i}: {flagged} rings with zero ball mass counted as 0"));
                }
                vals.into_iter().map(|t| t.0).collect()
            }
        };
        for (j, (l, r)) in v.iter().zip(&rhs).enumerate() {
            samples.push(Sample::new(format!("measure {i} probe {j}"), *l, *r));
        }
    }
    Ok(EstimateReport::from_samples(id, samples, hypothesis_ok, notes))
}

// ---------------------------------------------------------------------------------------------
// Maximal-function bounds
// ---------------------------------------------------------------------------------------------

fn havin_rhs(id: EstimateId, n: f64, alpha: f64, p: f64, s: f64, local: f64, ns: f64) -> f64 {
    let q = 1.0 / (p - 1.0);
    match id {
        EstimateId::HavinMaximal | EstimateId::HavinSup => {
            local.powf((n - alpha * p * s) * q / n) * ns.powf(alpha * p * s * q / n)
        }
        _ => {
            if ns == 0.0 {
                return 0.0;
            }
            let a = local.powf(q);
            let b = ns.powf(q);
            b * (a / (a + b) + (local / ns).ln().max(0.0))
        }
    }
}

/// Checks the maximal-function and norm bounds for U (below the critical s) or V (at it).
///
/// Densities are extended by zero outside their boxes. When α·p > n the log forms are still
/// evaluated, but the verdict is Inconclusive because the hypothesis α ≤ n/p fails.
pub fn verify_havin_bounds(
    fs: &[GridDensity],
    alpha: f64,
    p: f64,
    s: f64,
    cfg: &VerifyConfig,
) -> Result<EstimateReport> {
    let n = fs.first().map(|f| f.dim()).ok_or_else(|| Error::Domain("no densities given".into()))?;
    let id = havin_branch(n, alpha, p, s)?;
    let nf = n as f64;
    let mut notes = Vec::new();
    let outside = alpha * p > nf && !on_boundary(alpha * p, nf);
    if outside {
        notes.push(format!("alpha*p = {} exceeds n = {n}: evaluated without the hypothesis", alpha * p));
    }
    let uses_maximal = matches!(id, EstimateId::HavinMaximal | EstimateId::CriticalMaximal);
    let side = |f: &GridDensity, probes: &[Point]| -> Result<Vec<(PotentialValue, f64)>> {
        let mu = Measure::Grid(f.clone());
        let lhs = match id {
            EstimateId::HavinMaximal | EstimateId::HavinSup => havin_mazya_many(&mu, alpha, p, probes, cfg.grid)?,
            _ if outside => v_potential_unrestricted(&mu, alpha, p, probes, cfg.grid)?,
            _ => v_potential_many(&mu, alpha, p, probes, cfg.grid)?,
        };
        let ns = f.lp_norm(s);
        let sup = f.sup_norm();
        probes
            .par_iter()
            .zip(lhs)
            .map(|(x, l)| {
                let local = if uses_maximal { maximal(f, x)? } else { sup };
                Ok((l, havin_rhs(id, nf, alpha, p, s, local, ns)))
            })
            .collect()
    };
    let mut samples = Vec::new();
    let mut first = None;
    for (i, f) in fs.iter().enumerate() {
        let probes = default_probes(&Measure::Grid(f.clone()), cfg.probes, cfg.seed.wrapping_add(i as u64))?;
        for (j, (l, r)) in side(f, &probes)?.into_iter().enumerate() {
            samples.push(Sample::new(format!("density {i} probe {j}"), l, PotentialValue::exact(r)));
        }
        if i == 0 {
            first = Some(probes);
        }
    }
    let mut report = EstimateReport::from_samples(id, samples, !outside, notes);
    if let (Some(f), Some(probes)) = (fs.first(), first) {
        let x = &probes[..1];
        let a = side(f, x)?[0];
        let b = side(&f.scaled(3.7), x)?[0];
        if a.0.value > 0.0 && a.1 > 0.0 && b.1 > 0.0 {
            report.homogeneity_defect = Some(((b.0.value / b.1) / (a.0.value / a.1) - 1.0).abs());
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------------------------
// Newtonian potential of a ball
// ---------------------------------------------------------------------------------------------

/// ∫_{B_R(x0)} |x − y|^{2-n} dy by layer cake over the lens volume.
pub fn ball_newtonian_potential(n: usize, big_r: f64, d: f64) -> f64 {
    let m = (n - 2) as f64;
    let vn = ball_volume(n, 1.0);
    let mut acc = 0.0;
    if d < big_r {
        acc += m * vn * (big_r - d).powi(2) / 2.0;
    }
    // middle range: Simpson in θ with r = a + (b − a)(1 − cos θ)/2 to absorb endpoint square roots
    let (a, b) = ((d - big_r).abs(), d + big_r);
    if b > a {
        let k = 4000;
        let h = std::f64::consts::PI / k as f64;
        let f = |t: f64| {
            let r = a + (b - a) * (1.0 - t.cos()) / 2.0;
            let dr = (b - a) * t.sin() / 2.0;
            if r <= 0.0 {
                0.0
            } else {
                lens_volume(n, r, big_r, d) * r.powf(1.0 - n as f64) * dr
            }
        };
        let mut s = f(0.0) + f(std::f64::consts::PI);
        for i in 1..k {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc += m * s * h / 3.0;
    }
    acc + vn * big_r.powi(n as i32) * b.powf(2.0 - n as f64)
}

/// Probes for the ball estimate: the centre, then distances R·10^u for u in [-3, 1].
pub fn ball_newtonian_probes(x0: &Point, big_r: f64, count: usize, seed: u64) -> Vec<Point> {
    let n = x0.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![x0.clone()];
    for i in 1..count {
        let u = -3.0 + 4.0 * (i - 1) as f64 / (count.max(3) - 2) as f64;
        let dir = random_unit(n, &mut rng);
        let d = big_r * 10f64.powf(u);
        out.push(Point(x0.0.iter().zip(&dir).map(|(c, e)| c + d * e).collect()));
    }
    out
}

/// Fits C in N(x) ≤ C·R^n/(|x − x0|^{n-2} + R^{n-2}) over the probes.
pub fn verify_ball_newtonian(x0: &Point, big_r: f64, probes: &[Point]) -> Result<EstimateReport> {
    let n = x0.dim();
    if n < 3 {
        return domain("the ball estimate needs n >= 3");
    }
    if !(big_r > 0.0) {
        return domain(format!("radius must be positive, got {big_r}"));
    }
    let m = (n - 2) as i32;
    let samples = probes
        .par_iter()
        .map(|x| {
            let d = x.dist(x0);
            let lhs = ball_newtonian_potential(n, big_r, d);
            let rhs = big_r.powi(n as i32) / (d.powi(m) + big_r.powi(m));
            Sample::new(format!("|x-x0| = {d:.6e}"), PotentialValue::exact(lhs), PotentialValue::exact(rhs))
        })
        .collect();
    Ok(EstimateReport::from_samples(EstimateId::BallNewtonian, samples, true, Vec::new()))
}
