//! Robust newsvendor over integer demand bins.
//!
//! Demand lives on `{0, .., b_bar}`; for each order level `x` the cost is
//! `max(h (x - j), b (j - x))` and the inner worst case is a ball around the
//! empirical bin weights. The outer minimization simply enumerates `x`.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::dual::{solve_dual, DualSolution, WassersteinBall};
use crate::error::{Error, Result};
use crate::metric::GroundMetric;
use crate::objective::Objective;
use crate::space::PointSpace;
use crate::worst_case::{construct_worst_case, WorstCaseDistribution};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewsvendorInstance {
    /// Overage (holding) cost per unit.
    pub overage: f64,
    /// Underage (shortage) cost per unit.
    pub underage: f64,
    /// Largest demand bin; support is `{0, .., b_bar}`.
    pub b_bar: usize,
    /// Nominal bin weights, length `b_bar + 1`.
    pub weights: Vec<f64>,
    pub theta: f64,
    pub order: f64,
}

/// Outer enumeration cap on `b_bar`.
pub const B_BAR_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewsvendorSolution {
    pub x_star: usize,
    pub value: f64,
    pub dual: DualSolution,
    pub worst_case: WorstCaseDistribution,
    /// Robust cost of every order level, for plotting.
    pub per_level: Vec<f64>,
}

impl NewsvendorInstance {
    pub fn validate(&self) -> Result<()> {
        if !(self.overage > 0.0) || !(self.underage > 0.0) {
            return Err(Error::InvalidParameter("overage and underage must be > 0".into()));
        }
        if self.b_bar < 1 {
            return Err(Error::InvalidParameter("b_bar must be >= 1".into()));
        }
        if self.b_bar > B_BAR_BUDGET {
            return Err(Error::BudgetExceeded { size: self.b_bar, budget: B_BAR_BUDGET });
        }
        if self.weights.len() != self.b_bar + 1 {
            return Err(Error::LengthMismatch { left: self.weights.len(), right: self.b_bar + 1 });
        }
        crate::divergence::validate_probability(&self.weights)?;
        if !(self.theta >= 0.0) {
            return Err(Error::InvalidParameter("theta must be >= 0".into()));
        }
        Ok(())
    }

    /// The bin support as a 1-D point space `0, 1, .., b_bar`.
    pub fn bin_space(&self) -> PointSpace {
        PointSpace::new((0..=self.b_bar).map(|j| vec![j as f64]).collect())
            .expect("bin grid is valid")
    }

    /// Ball around the empirical bin weights.
    pub fn ball(&self) -> Result<WassersteinBall> {
        let nominal = DiscreteDistribution::from_weights(self.bin_space(), &self.weights)?;
        WassersteinBall::new(nominal, GroundMetric::absolute_1d(self.order)?, self.theta)
    }

    /// Piecewise-linear cost of ordering `x` against demand bin `j`.
    pub fn cost_table(&self, x: usize) -> Vec<f64> {
        let (h, b) = (self.overage, self.underage);
        (0..=self.b_bar)
            .map(|j| {
                let diff = x as f64 - j as f64;
                (h * diff).max(-b * diff)
            })
            .collect()
    }
}

/// Bins raw demand samples onto `{0, .., b_bar}` (round, then clamp) and
/// returns the empirical weights.
pub fn bin_samples(samples: &[f64], b_bar: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("demand samples"));
    }
    let mut weights = vec![0.0; b_bar + 1];
    let w = 1.0 / samples.len() as f64;
    for &s in samples {
        if !s.is_finite() {
            return Err(Error::InvalidParameter("non-finite demand sample".into()));
        }
        let j = s.round().clamp(0.0, b_bar as f64) as usize;
        weights[j] += w;
    }
    Ok(weights)
}

/// Enumerates order levels and keeps the one with the smallest robust cost.
pub fn newsvendor_solve(instance: &NewsvendorInstance) -> Result<NewsvendorSolution> {
    instance.validate()?;
    let ball = instance.ball()?;
    let mut best: Option<(usize, DualSolution)> = None;
    let mut per_level = Vec::with_capacity(instance.b_bar + 1);
    for x in 0..=instance.b_bar {
        let objective = Objective::from_table(instance.cost_table(x))?;
        let sol = solve_dual(&ball, &objective)?;
        per_level.push(sol.value);
        let better = match &best {
            None => true,
            Some((_, b)) => sol.value < b.value,
        };
        if better {
            best = Some((x, sol));
        }
    }
    let (x_star, dual) = best.expect("at least one order level");
    let objective = Objective::from_table(instance.cost_table(x_star))?;
    let worst_case = construct_worst_case(&dual, &ball, &objective)?;
    Ok(NewsvendorSolution { x_star, value: dual.value, dual, worst_case, per_level })
}
