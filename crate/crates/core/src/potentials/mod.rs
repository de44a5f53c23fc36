//! Linear and nonlinear potentials of measures, with singularity-aware quadrature.

pub mod kernel;
mod linear;
pub mod maximal;
mod nonlinear;
pub mod profile;
mod wolff;

use serde::{Deserialize, Serialize};

pub use linear::{bessel, kernel_sum, newtonian_ball, riesz_kernel, riesz_layercake, truncated_newtonian};
pub use maximal::maximal;
pub(crate) use nonlinear::v_potential_unrestricted;
pub use nonlinear::{composite_nn, havin_mazya, havin_mazya_many, v_potential, v_potential_many, CompositeNN};
pub use wolff::{wolff, wolff_sigma};

use crate::core_model::{Ball, Measure, Point};
use crate::error::{domain, Result};

/// Default number of log-spaced rings for radial quadrature.
pub const DEFAULT_RINGS: usize = 512;
/// Default cells per axis of the working grid for two-pass operators.
pub const DEFAULT_GRID: usize = 24;

/// A potential value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub error_estimate: f64,
}

impl PotentialValue {
    pub fn exact(value: f64) -> Self {
        PotentialValue { value, error_estimate: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    RieszLayercake,
    RieszKernel,
    NewtonianBall,
    TruncatedNewtonian,
    Bessel,
    Wolff,
    HavinMazya,
    VPotential,
    CompositeNn,
    WolffSigma,
}

/// Which operator to evaluate and with which parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub operator: Operator,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub c: f64,
    /// Ball radius for the Newtonian and composite operators.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_rings")]
    pub quad_rings: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_p() -> f64 {
    2.0
}
fn default_r_max() -> f64 {
    1.0
}
fn default_rings() -> usize {
    DEFAULT_RINGS
}
fn default_grid() -> usize {
    DEFAULT_GRID
}

impl PotentialSpec {
    pub fn new(operator: Operator) -> Self {
        PotentialSpec {
            operator,
            alpha: 1.0,
            p: 2.0,
            sigma: 1.0,
            c: 0.0,
            r_max: 1.0,
            quad_rings: DEFAULT_RINGS,
            grid: DEFAULT_GRID,
        }
    }

    /// Checks the parameter invariants for dimension `n`, naming the violated constraint.
    pub fn validate(&self, n: usize) -> Result<()> {
        use Operator::*;
        let nf = n as f64;
        if self.quad_rings < 16 {
            return domain("quad_rings must be at least 16");
        }
        if !(self.r_max > 0.0) {
            return domain("r_max must be positive");
        }
        match self.operator {
            RieszLayercake | RieszKernel | HavinMazya if !(self.alpha > 0.0 && self.alpha < nf) => {
                return domain(format!("alpha must lie in (0, n) = (0, {n})"));
            }
            Wolff | HavinMazya | VPotential if !(self.p > 1.0) => return domain("p must exceed 1"),
            Wolff | HavinMazya if self.c == 0.0 && !(self.alpha * self.p < nf) => {
                return domain("alpha*p < n is required when c = 0");
            }
            Wolff | VPotential if self.alpha * self.p > nf => return domain("alpha*p <= n is required"),
            WolffSigma if n < 3 || !(self.sigma >= 2.0 / (nf - 2.0)) => {
                return domain("wolff_sigma requires n >= 3 and sigma >= 2/(n-2)");
            }
            CompositeNn if !(self.sigma >= 0.0) => return domain("sigma must be nonnegative"),
            Bessel if !(self.alpha > 0.0) => return domain("alpha must be positive"),
            _ => {}
        }
        if self.c < 0.0 {
            return domain("c must be nonnegative");
        }
        Ok(())
    }

    /// Evaluates the operator at each probe point.
    pub fn evaluate(&self, mu: &Measure, xs: &[Point]) -> Result<Vec<PotentialValue>> {
        use Operator::*;
        let n = match (mu.dim(), xs.first()) {
            (Some(d), _) => d,
            (None, Some(x)) => x.dim(),
            (None, None) => return Ok(Vec::new()),
        };
        self.validate(n)?;
        let grid_only = || match mu {
            Measure::Grid(g) => Ok(g),
            _ => domain("this operator needs a grid density"),
        };
        match self.operator {
            HavinMazya => havin_mazya_many(mu, self.alpha, self.p, xs, self.grid),
            VPotential => v_potential_many(mu, self.alpha, self.p, xs, self.grid),
            CompositeNn => {
                let ball = Ball::new(Point::origin(n), self.r_max)?;
                let c = CompositeNN::new(grid_only()?, &ball, self.sigma)?;
                Ok(xs.iter().map(|x| c.eval(x)).collect())
            }
            _ => xs
                .iter()
                .map(|x| match self.operator {
                    RieszLayercake => riesz_layercake(mu, self.alpha, x, self.quad_rings),
                    RieszKernel => riesz_kernel(mu, self.alpha, x),
                    NewtonianBall => newtonian_ball(grid_only()?, &Ball::new(Point::origin(n), self.r_max)?, x),
                    TruncatedNewtonian => truncated_newtonian(grid_only()?, self.r_max, x),
                    Bessel => bessel(mu, self.alpha, x),
                    Wolff => wolff(mu, self.alpha, self.p, self.c, x, self.quad_rings),
                    WolffSigma => wolff_sigma(grid_only()?, self.sigma, x, self.quad_rings),
                    HavinMazya | VPotential | CompositeNn => unreachable!(),
                })
                .collect(),
        }
    }
}
