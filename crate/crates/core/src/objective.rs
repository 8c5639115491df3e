//! Objective functions evaluated over finite candidate sets, with optional
//! declared growth and Lipschitz regularity data.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{pow_order, GroundMetric};
use crate::space::PointSpace;

/// Declared growth behaviour of the objective at infinity, relative to the
/// chosen metric and transport order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Growth {
    Finite(f64),
    Unbounded,
}

/// Built-in 1-D benchmark objectives. The wire names are part of the `drso/1`
/// schema; all declare their growth rate for order-1 absolute-metric use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum Builtin {
    /// `max(0, x - a)`: a hinge with unit slope past `a`.
    #[serde(rename = "example5a")]
    Hinge { a: f64 },
    /// `max(1 - x^2, 0)`: a bounded bump peaking at the origin.
    #[serde(rename = "example5b")]
    Bump,
    /// `1 + x + 1/(x+1)`: unit drift approached from above.
    #[serde(rename = "example5c_plus")]
    DriftPlus,
    /// `1 + x - 1/(x+1)`: unit drift approached from below.
    #[serde(rename = "example5c_minus")]
    DriftMinus,
}

impl Builtin {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Builtin::Hinge { a } => (x - a).max(0.0),
            Builtin::Bump => (1.0 - x * x).max(0.0),
            Builtin::DriftPlus => 1.0 + x + 1.0 / (x + 1.0),
            Builtin::DriftMinus => 1.0 + x - 1.0 / (x + 1.0),
        }
    }

    /// Growth rate under the 1-D absolute metric with p = 1.
    pub fn growth(&self) -> Growth {
        match self {
            Builtin::Bump => Growth::Finite(0.0),
            _ => Growth::Finite(1.0),
        }
    }
}

enum Evaluator {
    Table(Vec<f64>),
    Builtin(Builtin),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Clone for Evaluator {
    fn clone(&self) -> Self {
        match self {
            Evaluator::Table(t) => Evaluator::Table(t.clone()),
            Evaluator::Builtin(b) => Evaluator::Builtin(*b),
            Evaluator::Custom(f) => Evaluator::Custom(f.clone()),
        }
    }
}

/// An upper semi-continuous objective, evaluated only on finite candidate
/// sets. Evaluation is deterministic: the same point always yields the same
/// value.
#[derive(Clone)]
pub struct Objective {
    evaluator: Evaluator,
    growth: Option<Growth>,
    lipschitz: Option<(f64, f64)>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.evaluator {
            Evaluator::Table(t) => format!("table[{}]", t.len()),
            Evaluator::Builtin(b) => format!("{b:?}"),
            Evaluator::Custom(_) => "custom".into(),
        };
        f.debug_struct("Objective")
            .field("evaluator", &kind)
            .field("growth", &self.growth)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Objective {
    /// One value per point of the candidate space; the candidate set is then
    /// the whole domain, so the growth rate is zero by convention.
    pub fn from_table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("objective table"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite objective value".into()));
        }
        Ok(Self { evaluator: Evaluator::Table(values), growth: None, lipschitz: None })
    }

    pub fn builtin(b: Builtin) -> Self {
        Self { evaluator: Evaluator::Builtin(b), growth: Some(b.growth()), lipschitz: None }
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { evaluator: Evaluator::Custom(Arc::new(f)), growth: None, lipschitz: None }
    }

    pub fn with_growth(mut self, growth: Growth) -> Self {
        self.growth = Some(growth);
        self
    }

    /// Declares |psi(x) - psi(y)| <= L d(x,y) + M regularity data.
    pub fn with_lipschitz(mut self, l: f64, m: f64) -> Self {
        self.lipschitz = Some((l, m));
        self
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn lipschitz(&self) -> Option<(f64, f64)> {
        self.lipschitz
    }

    pub fn value_at(&self, space: &PointSpace, index: usize) -> f64 {
        match &self.evaluator {
            Evaluator::Table(t) => t[index],
            Evaluator::Builtin(b) => b.evaluate(space.point(index)[0]),
            Evaluator::Custom(f) => f(space.point(index)),
        }
    }

    /// Values over the whole candidate space, in index order.
    pub fn table(&self, space: &PointSpace) -> Result<Vec<f64>> {
        if let Evaluator::Table(t) = &self.evaluator {
            if t.len() != space.len() {
                return Err(Error::LengthMismatch { left: t.len(), right: space.len() });
            }
        }
        Ok((0..space.len()).map(|i| self.value_at(space, i)).collect())
    }

    /// Spot-checks declared Lipschitz data on index pairs; used by tests and
    /// input validation, not on the solver hot path.
    pub fn check_lipschitz_on(
        &self,
        space: &PointSpace,
        metric: &GroundMetric,
        pairs: &[(usize, usize)],
    ) -> Result<()> {
        let Some((l, m)) = self.lipschitz else {
            return Err(Error::MissingData("lipschitz data"));
        };
        for &(i, j) in pairs {
            let gap = (self.value_at(space, i) - self.value_at(space, j)).abs();
            let allowed = l * metric.distance(space, i, j) + m + 1e-9;
            if gap > allowed {
                return Err(Error::InvalidParameter(format!(
                    "lipschitz data violated on pair ({i},{j}): |gap| {gap} > {allowed}"
                )));
            }
        }
        Ok(())
    }
}

/// Growth-rate estimate from sampled radius tiers around a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    /// Still climbing by more than 10% at the outermost tier.
    pub unbounded: bool,
    pub tier_maxima: Vec<f64>,
}

/// Estimates the growth rate of `objective` around `base` by taking, per
/// radius tier, the largest ratio `(psi(x) - psi(base)) / d^p(x, base)` over
/// candidates in that tier, and reporting the outermost tier's maximum.
pub fn estimate_kappa(
    objective: &Objective,
    metric: &GroundMetric,
    space: &PointSpace,
    base: usize,
    radii: &[f64],
) -> Result<KappaEstimate> {
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("need at least two radii".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    let base_value = objective.value_at(space, base);
    let mut tier_maxima: Vec<f64> = Vec::new();
    let mut prev_radius = radii[0];
    for &radius in &radii[1..] {
        let mut best = f64::NEG_INFINITY;
        for i in 0..space.len() {
            if i == base {
                continue;
            }
            let d = metric.distance(space, base, i);
            if d > prev_radius && d <= radius {
                let ratio = (objective.value_at(space, i) - base_value) / pow_order(d, metric.order);
                best = best.max(ratio);
            }
        }
        if best.is_finite() {
            tier_maxima.push(best);
        }
        prev_radius = radius;
    }
    if tier_maxima.is_empty() {
        return Err(Error::EmptyInput("no candidate points beyond the first radius"));
    }
    let value = *tier_maxima.last().unwrap();
    // Still climbing by more than 10% at the outermost tier, with a
    // genuinely positive growth estimate; nonpositive ratios converging to
    // zero from below are bounded behaviour.
    let unbounded = if tier_maxima.len() >= 2 {
        let prev = tier_maxima[tier_maxima.len() - 2];
        value > 0.0 && value > prev && (value - prev) > 0.1 * prev.abs().max(1e-9)
    } else {
        false
    };
    Ok(KappaEstimate { value, unbounded, tier_maxima })
}

/// Geometric radius tiers spanning the candidate set as seen from `base`.
pub fn default_radii(metric: &GroundMetric, space: &PointSpace, base: usize, tiers: usize) -> Vec<f64> {
    let max_d = (0..space.len())
        .map(|i| metric.distance(space, base, i))
        .fold(0.0f64, f64::max);
    let tiers = tiers.max(2);
    (0..=tiers).map(|k| max_d * k as f64 / tiers as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(hi: f64, n: usize) -> PointSpace {
        PointSpace::new((0..=n).map(|i| vec![hi * i as f64 / n as f64]).collect()).unwrap()
    }

    #[test]
    fn bounded_objective_has_vanishing_growth() {
        let space = grid(100.0, 1000);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::builtin(Builtin::Bump);
        let radii = default_radii(&metric, &space, 0, 5);
        let est = estimate_kappa(&obj, &metric, &space, 0, &radii).unwrap();
        assert!(est.value.abs() < 0.05, "kappa_hat = {}", est.value);
        assert!(!est.unbounded);
    }

    #[test]
    fn linear_objective_has_unit_growth() {
        let space = grid(50.0, 500);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::from_fn(|x| x[0]);
        let radii = default_radii(&metric, &space, 0, 4);
        let est = estimate_kappa(&obj, &metric, &space, 0, &radii).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(!est.unbounded);
    }

    #[test]
    fn drift_plus_growth_approaches_one() {
        let space = grid(200.0, 2000);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::builtin(Builtin::DriftPlus);
        let radii = default_radii(&metric, &space, 0, 5);
        let est = estimate_kappa(&obj, &metric, &space, 0, &radii).unwrap();
        assert!((est.value - 1.0).abs() < 0.02, "kappa_hat = {}", est.value);
        assert!(!est.unbounded);
    }

    #[test]
    fn superlinear_objective_flagged_unbounded() {
        let space = grid(100.0, 1000);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::from_fn(|x| x[0] * x[0]);
        let radii = default_radii(&metric, &space, 0, 5);
        let est = estimate_kappa(&obj, &metric, &space, 0, &radii).unwrap();
        assert!(est.unbounded);
    }

    #[test]
    fn radii_must_increase() {
        let space = grid(10.0, 10);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::from_fn(|x| x[0]);
        assert!(estimate_kappa(&obj, &metric, &space, 0, &[5.0, 2.0]).is_err());
        assert!(estimate_kappa(&obj, &metric, &space, 0, &[5.0]).is_err());
    }
}
