//! The dual side of the worst-case expectation problem.
//!
//! For a ball of radius theta around a finite nominal measure, the value
//! `sup { E_mu[psi] : W_p(mu, nu) <= theta }` equals the minimum over
//! `lambda >= 0` of
//!
//! ```text
//! h(lambda) = lambda theta^p + sum_i w_i sup_xi [ psi(xi) - lambda d^p(xi, zeta_i) ]
//! ```
//!
//! On a finite candidate set h is convex piecewise linear in lambda, so the
//! solver either enumerates its breakpoints exactly (small candidate sets) or
//! runs golden-section search followed by an exact piecewise-linear
//! refinement step. The minimizer's per-atom argmin sets then decide whether
//! a worst-case distribution is attained or only approached by a sequence
//! escaping the candidate radius.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::metric::{pow_order, GroundMetric};
use crate::numeric::golden_section;
use crate::objective::{Growth, Objective};
use crate::parallel::map_indexed;
use crate::space::PointSpace;

/// Members of the argmin set must attain the minimum within this slack.
pub const ARGMIN_TOL: f64 = 1e-12;
/// `lambda_star` within this distance of the growth rate counts as sitting on
/// the existence boundary.
pub const EXISTENCE_TOL: f64 = 1e-7;
/// Slack allowed when checking the first-order existence interval.
pub const INTERVAL_TOL: f64 = 1e-9;

/// The ambiguity set: all measures within `radius` of `nominal` in the
/// order-p transport distance. The nominal's point space doubles as the
/// candidate set over which worst cases are built.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WassersteinBall {
    pub nominal: DiscreteDistribution,
    pub metric: GroundMetric,
    pub radius: f64,
}

impl WassersteinBall {
    pub fn new(nominal: DiscreteDistribution, metric: GroundMetric, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be >= 0, got {radius}")));
        }
        metric.compatible_with(nominal.space())?;
        Ok(Self { nominal, metric, radius })
    }

    pub fn space(&self) -> &PointSpace {
        self.nominal.space()
    }

    /// theta^p, the transport budget.
    pub fn budget(&self) -> f64 {
        pow_order(self.radius, self.metric.order)
    }
}

/// `Phi(lambda, zeta) = min_xi [ lambda d^p(xi, zeta) - psi(xi) ]` over the
/// candidate set, with its argmin structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedValue {
    pub lambda: f64,
    /// Candidate index of the base point zeta.
    pub zeta: usize,
    pub phi: f64,
    /// All candidates attaining the minimum within [`ARGMIN_TOL`], ascending.
    pub argmin: Vec<usize>,
    pub d_min: f64,
    pub d_max: f64,
    /// Lowest-index nearest minimizer.
    pub near: usize,
    /// Lowest-index farthest minimizer.
    pub far: usize,
}

/// Evaluates the regularization operator at one base point, exactly over the
/// finite candidate set.
pub fn phi_regularize(
    objective: &Objective,
    metric: &GroundMetric,
    space: &PointSpace,
    lambda: f64,
    zeta: usize,
) -> Result<RegularizedValue> {
    if space.is_empty() {
        return Err(Error::EmptyInput("candidate set"));
    }
    metric.compatible_with(space)?;
    let values = objective.table(space)?;
    Ok(regularize_from_table(&values, metric, space, lambda, zeta))
}

fn regularize_from_table(
    values: &[f64],
    metric: &GroundMetric,
    space: &PointSpace,
    lambda: f64,
    zeta: usize,
) -> RegularizedValue {
    let mut phi = f64::INFINITY;
    for i in 0..space.len() {
        let v = lambda * metric.cost(space, i, zeta) - values[i];
        if v < phi {
            phi = v;
        }
    }
    let mut argmin = Vec::new();
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut near, mut far) = (zeta, zeta);
    for i in 0..space.len() {
        let d = metric.distance(space, i, zeta);
        let v = lambda * pow_order(d, metric.order) - values[i];
        if v <= phi + ARGMIN_TOL {
            argmin.push(i);
            if d < d_min {
                d_min = d;
                near = i;
            }
            if d > d_max {
                d_max = d;
                far = i;
            }
        }
    }
    RegularizedValue { lambda, zeta, phi, argmin, d_min, d_max, near, far }
}

/// Whether a worst-case distribution is attained on the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Existence {
    Exists,
    /// Optimal value only approached by distributions escaping the candidate
    /// radius; see `epsilon_optimal_sequence`.
    VanishingSequence,
    /// Declared growth rate infinite with a positive radius: value is +inf.
    Unbounded,
}

/// Output of [`solve_dual`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda_star: f64,
    /// The optimal worst-case expectation (`f64::INFINITY` when unbounded).
    pub value: f64,
    /// Growth rate used by the solver: the declared rate, else 0 for a
    /// bounded candidate domain.
    pub kappa_hat: f64,
    pub existence: Existence,
    /// Per-nominal-atom regularization at `lambda_star`, in atom order.
    pub regularizations: Vec<RegularizedValue>,
    /// h'(lambda_star-), an optimality certificate when <= 0.
    pub left_slope: f64,
    /// h'(lambda_star+), an optimality certificate when >= 0.
    pub right_slope: f64,
}

impl DualSolution {
    /// Multiplier at which worst-case constructions read the argmin sets:
    /// the growth-rate boundary when the minimizer sits on it, else the
    /// minimizer itself.
    pub fn construction_lambda(&self) -> f64 {
        if self.kappa_hat > 0.0 && self.lambda_star <= self.kappa_hat + EXISTENCE_TOL {
            self.kappa_hat
        } else {
            self.lambda_star
        }
    }
}

/// Per-solve scratch: objective table and per-atom transport costs.
struct Workspace {
    values: Vec<f64>,
    /// costs[i][xi] = d^p(xi, zeta_i) for nominal atom i.
    costs: Vec<Vec<f64>>,
    weights: Vec<f64>,
    budget: f64,
}

impl Workspace {
    fn build(ball: &WassersteinBall, objective: &Objective) -> Result<Self> {
        let space = ball.space();
        let values = objective.table(space)?;
        let atoms = ball.nominal.atoms();
        let costs = map_indexed(atoms.len(), |i| {
            (0..space.len())
                .map(|x| ball.metric.cost(space, x, atoms[i].index))
                .collect::<Vec<f64>>()
        });
        let weights = atoms.iter().map(|a| a.weight).collect();
        Ok(Self { values, costs, weights, budget: ball.budget() })
    }

    /// h(lambda); per-atom suprema reduce in fixed atom order.
    fn h(&self, lambda: f64) -> f64 {
        let sups = map_indexed(self.costs.len(), |i| {
            let c = &self.costs[i];
            let mut best = f64::NEG_INFINITY;
            for (x, &v) in self.values.iter().enumerate() {
                let s = v - lambda * c[x];
                if s > best {
                    best = s;
                }
            }
            best
        });
        lambda * self.budget
            + sups.iter().zip(&self.weights).map(|(s, w)| s * w).sum::<f64>()
    }

    /// Exact argmin data of `lambda d^p - psi` for atom `i`.
    fn regularize(&self, lambda: f64, i: usize, metric_order: f64) -> RegularizedValueParts {
        let c = &self.costs[i];
        let mut phi = f64::INFINITY;
        for (x, &v) in self.values.iter().enumerate() {
            let s = lambda * c[x] - v;
            if s < phi {
                phi = s;
            }
        }
        let mut argmin = Vec::new();
        let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut near, mut far) = (0usize, 0usize);
        for (x, &v) in self.values.iter().enumerate() {
            if lambda * c[x] - v <= phi + ARGMIN_TOL {
                argmin.push(x);
                if c[x] < c_min {
                    c_min = c[x];
                    near = x;
                }
                if c[x] > c_max {
                    c_max = c[x];
                    far = x;
                }
            }
        }
        let inv = 1.0 / metric_order;
        RegularizedValueParts {
            phi,
            argmin,
            near,
            far,
            d_min: pow_order(c_min, inv),
            d_max: pow_order(c_max, inv),
            cost_min: c_min,
            cost_max: c_max,
        }
    }
}

struct RegularizedValueParts {
    phi: f64,
    argmin: Vec<usize>,
    near: usize,
    far: usize,
    d_min: f64,
    d_max: f64,
    cost_min: f64,
    cost_max: f64,
}

/// `h(lambda)` for a given ball and objective.
pub fn dual_objective(ball: &WassersteinBall, objective: &Objective, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("lambda must be >= 0".into()));
    }
    Ok(Workspace::build(ball, objective)?.h(lambda))
}

/// Pairwise crossings per atom stay exact up to this budget; larger sets use
/// golden-section search plus one exact refinement.
const CROSSING_BUDGET: usize = 2000;
const GOLDEN_WIDTH: f64 = 1e-10;

/// Minimizes the dual objective and diagnoses worst-case existence.
pub fn solve_dual(ball: &WassersteinBall, objective: &Objective) -> Result<DualSolution> {
    let space = ball.space();
    if space.is_empty() {
        return Err(Error::EmptyInput("candidate set"));
    }
    ball.metric.compatible_with(space)?;

    if let Some(Growth::Unbounded) = objective.growth() {
        if ball.radius > 0.0 {
            return Ok(DualSolution {
                lambda_star: 0.0,
                value: f64::INFINITY,
                kappa_hat: f64::INFINITY,
                existence: Existence::Unbounded,
                regularizations: Vec::new(),
                left_slope: f64::NEG_INFINITY,
                right_slope: f64::NEG_INFINITY,
            });
        }
    }

    let kappa = match objective.growth() {
        Some(Growth::Finite(k)) => k,
        Some(Growth::Unbounded) => f64::INFINITY, // radius == 0 falls through
        None => 0.0,
    };
    let ws = Workspace::build(ball, objective)?;
    let order = ball.metric.order;

    if ball.radius == 0.0 {
        return Ok(solve_theta_zero(ball, &ws, kappa.max(0.0), order));
    }

    let lo = kappa.max(0.0);
    let (v_min, v_max) = ws
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let hi = lo + (v_max - v_min) / ws.budget + 1.0;

    let lambda_star = if crossing_count(space.len()) <= CROSSING_BUDGET {
        minimize_by_breakpoints(&ws, lo, hi)
    } else {
        minimize_by_golden_section(&ws, lo, hi)
    };
    if lambda_star >= hi - 1e-9 && ws.h(hi) < ws.h(hi - 1e-6) {
        return Err(Error::BracketFailure(format!(
            "dual objective still decreasing at lambda_max = {hi}; growth rate underestimated"
        )));
    }

    let value = ws.h(lambda_star);
    let regs: Vec<RegularizedValueParts> =
        (0..ws.costs.len()).map(|i| ws.regularize(lambda_star, i, order)).collect();
    let s_min: f64 = regs.iter().zip(&ws.weights).map(|(r, w)| w * r.cost_min).sum();
    let s_max: f64 = regs.iter().zip(&ws.weights).map(|(r, w)| w * r.cost_max).sum();
    let left_slope = ws.budget - s_max;
    let right_slope = ws.budget - s_min;

    // First-order existence test, run at the growth-rate boundary when the
    // minimizer sits on it and at the minimizer itself otherwise.
    let boundary = lambda_star <= lo + EXISTENCE_TOL && lo > 0.0;
    let (t_min, t_max) = if boundary && (lambda_star - lo).abs() > 0.0 {
        let r = (0..ws.costs.len()).map(|i| ws.regularize(lo, i, order)).collect::<Vec<_>>();
        let a: f64 = r.iter().zip(&ws.weights).map(|(r, w)| w * r.cost_min).sum();
        let b: f64 = r.iter().zip(&ws.weights).map(|(r, w)| w * r.cost_max).sum();
        (a, b)
    } else {
        (s_min, s_max)
    };
    let existence = if lambda_star <= 1e-12 {
        if t_min <= ws.budget + INTERVAL_TOL {
            Existence::Exists
        } else {
            Existence::VanishingSequence
        }
    } else if t_min <= ws.budget + INTERVAL_TOL && ws.budget <= t_max + INTERVAL_TOL {
        Existence::Exists
    } else {
        Existence::VanishingSequence
    };

    let atoms = ball.nominal.atoms();
    let regularizations = regs
        .into_iter()
        .enumerate()
        .map(|(i, r)| RegularizedValue {
            lambda: lambda_star,
            zeta: atoms[i].index,
            phi: r.phi,
            argmin: r.argmin,
            d_min: r.d_min,
            d_max: r.d_max,
            near: r.near,
            far: r.far,
        })
        .collect();

    Ok(DualSolution {
        lambda_star,
        value,
        kappa_hat: kappa.max(0.0),
        existence,
        regularizations,
        left_slope,
        right_slope,
    })
}

/// theta = 0: the ball is a singleton and the value is the nominal
/// expectation; the reported minimizer is the saturation level past which
/// every atom's argmin collapses to itself.
fn solve_theta_zero(ball: &WassersteinBall, ws: &Workspace, kappa: f64, order: f64) -> DualSolution {
    let atoms = ball.nominal.atoms();
    let mut lambda_sat = kappa;
    for (i, atom) in atoms.iter().enumerate() {
        let base = ws.values[atom.index];
        for (x, &v) in ws.values.iter().enumerate() {
            let c = ws.costs[i][x];
            if c > 1e-15 && v > base {
                lambda_sat = lambda_sat.max((v - base) / c);
            }
        }
    }
    let value: f64 =
        atoms.iter().map(|a| a.weight * ws.values[a.index]).sum();
    let regs: Vec<RegularizedValue> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let r = ws.regularize(lambda_sat, i, order);
            RegularizedValue {
                lambda: lambda_sat,
                zeta: a.index,
                phi: r.phi,
                argmin: r.argmin,
                d_min: r.d_min,
                d_max: r.d_max,
                near: r.near,
                far: r.far,
            }
        })
        .collect();
    DualSolution {
        lambda_star: lambda_sat,
        value,
        kappa_hat: kappa,
        existence: Existence::Exists,
        regularizations: regs,
        left_slope: 0.0,
        right_slope: 0.0,
    }
}

fn crossing_count(candidates: usize) -> usize {
    candidates.saturating_mul(candidates.saturating_sub(1)) / 2
}

/// Exact minimization: h is piecewise linear with kinks among the pairwise
/// crossing multipliers of the per-atom affine pieces, so evaluating h on
/// all crossings (plus the bracket ends) finds the exact minimizer.
fn minimize_by_breakpoints(ws: &Workspace, lo: f64, hi: f64) -> f64 {
    let n_points = ws.values.len();
    let mut candidates: Vec<f64> = vec![lo, hi];
    for c in &ws.costs {
        for a in 0..n_points {
            for b in (a + 1)..n_points {
                let dc = c[a] - c[b];
                if dc.abs() > 1e-15 {
                    let lam = (ws.values[a] - ws.values[b]) / dc;
                    if lam > lo && lam < hi {
                        candidates.push(lam);
                    }
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    best_candidate(ws, &candidates)
}

/// Golden-section bracket followed by an exact piecewise-linear refinement:
/// the crossings of the bracket endpoints' active pieces against every other
/// piece are evaluated exactly, so the returned minimizer lands on a true
/// kink of h rather than a float approximation of one.
fn minimize_by_golden_section(ws: &Workspace, lo: f64, hi: f64) -> f64 {
    let (blo, bhi) = golden_section(&|lam| ws.h(lam), lo, hi, GOLDEN_WIDTH);
    let mut candidates = vec![lo, blo, bhi];
    for c in &ws.costs {
        for pivot_lambda in [blo, bhi] {
            // Active piece at the probe multiplier.
            let mut best = f64::INFINITY;
            let mut active = 0usize;
            for (x, &v) in ws.values.iter().enumerate() {
                let s = pivot_lambda * c[x] - v;
                if s < best {
                    best = s;
                    active = x;
                }
            }
            for x in 0..ws.values.len() {
                let dc = c[active] - c[x];
                if dc.abs() > 1e-15 {
                    let lam = (ws.values[active] - ws.values[x]) / dc;
                    if lam >= lo && lam >= blo - GOLDEN_WIDTH && lam <= bhi + GOLDEN_WIDTH {
                        candidates.push(lam);
                    }
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    best_candidate(ws, &candidates)
}

fn best_candidate(ws: &Workspace, candidates: &[f64]) -> f64 {
    let mut best_lambda = candidates[0];
    let mut best_value = f64::INFINITY;
    for &lam in candidates {
        let v = ws.h(lam);
        // Strict improvement keeps the smallest minimizer on ties.
        if v < best_value {
            best_value = v;
            best_lambda = lam;
        }
    }
    best_lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Builtin;

    fn grid(hi: f64, step: f64) -> PointSpace {
        PointSpace::grid_1d(0.0, hi, step).unwrap()
    }

    fn dirac_ball(space: PointSpace, theta: f64) -> WassersteinBall {
        let nominal = DiscreteDistribution::dirac(space, 0).unwrap();
        WassersteinBall::new(nominal, GroundMetric::absolute_1d(1.0).unwrap(), theta).unwrap()
    }

    #[test]
    fn regularize_zero_objective() {
        let space = grid(10.0, 0.5);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::from_fn(|_| 0.0);
        let r = phi_regularize(&obj, &metric, &space, 2.0, 0).unwrap();
        assert_eq!(r.phi, 0.0);
        assert_eq!(r.argmin, vec![0]);
        assert_eq!(r.d_min, 0.0);
        assert_eq!(r.d_max, 0.0);
    }

    #[test]
    fn regularize_hinge_flat_envelope() {
        // max(0, x - a) with a <= 0 ties every candidate at lambda = 1.
        let space = grid(10.0, 1e-3);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::builtin(Builtin::Hinge { a: -1.0 });
        let r = phi_regularize(&obj, &metric, &space, 1.0, 0).unwrap();
        assert!((r.phi - (-1.0)).abs() < 1e-9);
        assert_eq!(r.argmin.len(), space.len());
        assert_eq!(r.d_min, 0.0);
        assert!((r.d_max - 10.0).abs() < 1e-9);
    }

    #[test]
    fn regularize_bump_at_lambda_zero() {
        let space = grid(10.0, 1e-2);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let obj = Objective::builtin(Builtin::Bump);
        let r = phi_regularize(&obj, &metric, &space, 0.0, 0).unwrap();
        assert!((r.phi - (-1.0)).abs() < 1e-12);
        assert_eq!(r.argmin, vec![0]);
    }

    #[test]
    fn dual_objective_constant_objective() {
        let ball = dirac_ball(grid(5.0, 0.5), 0.5);
        let obj = Objective::from_fn(|_| 3.0);
        for lam in [0.0, 0.5, 2.0] {
            let h = dual_objective(&ball, &obj, lam).unwrap();
            assert!((h - (lam * 0.5 + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_objective_hinge_value() {
        let ball = dirac_ball(grid(10.0, 1e-3), 0.5);
        let obj = Objective::builtin(Builtin::Hinge { a: -1.0 });
        let h = dual_objective(&ball, &obj, 1.0).unwrap();
        assert!((h - 1.5).abs() < 1e-9);
    }

    #[test]
    fn hinge_negative_shift_attains() {
        let ball = dirac_ball(grid(10.0, 1e-3), 0.5);
        let obj = Objective::builtin(Builtin::Hinge { a: -1.0 });
        let sol = solve_dual(&ball, &obj).unwrap();
        assert!((sol.lambda_star - 1.0).abs() < 1e-9, "lambda = {}", sol.lambda_star);
        assert!((sol.value - 1.5).abs() < 1e-6, "value = {}", sol.value);
        assert_eq!(sol.existence, Existence::Exists);
    }

    #[test]
    fn hinge_positive_shift_vanishes() {
        let ball = dirac_ball(grid(10.0, 1e-3), 0.5);
        let obj = Objective::builtin(Builtin::Hinge { a: 1.0 });
        let sol = solve_dual(&ball, &obj).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-6, "value = {}", sol.value);
        assert_eq!(sol.existence, Existence::VanishingSequence);
    }

    #[test]
    fn bump_keeps_nominal() {
        let ball = dirac_ball(grid(10.0, 1e-2), 0.5);
        let obj = Objective::builtin(Builtin::Bump);
        let sol = solve_dual(&ball, &obj).unwrap();
        assert!(sol.lambda_star.abs() < 1e-9);
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert_eq!(sol.existence, Existence::Exists);
    }

    #[test]
    fn drift_minus_interior_minimizer() {
        let ball = dirac_ball(grid(50.0, 1e-4), 0.5);
        let obj = Objective::builtin(Builtin::DriftMinus);
        let sol = solve_dual(&ball, &obj).unwrap();
        let expected = 1.0 + 1.0 / (1.5 * 1.5);
        assert!(
            (sol.lambda_star - expected).abs() < 1e-3,
            "lambda = {}, want {}",
            sol.lambda_star,
            expected
        );
        assert_eq!(sol.existence, Existence::Exists);
    }

    #[test]
    fn theta_zero_returns_nominal_expectation() {
        let space = grid(4.0, 1.0);
        let nominal =
            DiscreteDistribution::new(space, vec![(0, 0.5), (2, 0.5)]).unwrap();
        let ball =
            WassersteinBall::new(nominal, GroundMetric::absolute_1d(1.0).unwrap(), 0.0).unwrap();
        let obj = Objective::from_fn(|x| x[0] * x[0]);
        let sol = solve_dual(&ball, &obj).unwrap();
        assert_eq!(sol.value, 0.5 * 0.0 + 0.5 * 4.0);
        assert_eq!(sol.existence, Existence::Exists);
    }

    #[test]
    fn declared_unbounded_growth_returns_infinite_value() {
        let ball = dirac_ball(grid(10.0, 0.1), 0.5);
        let obj = Objective::from_fn(|x| x[0] * x[0]).with_growth(Growth::Unbounded);
        let sol = solve_dual(&ball, &obj).unwrap();
        assert_eq!(sol.existence, Existence::Unbounded);
        assert!(sol.value.is_infinite());
    }

    #[test]
    fn local_optimality_certificate() {
        let space = grid(8.0, 0.25);
        let nominal = DiscreteDistribution::new(space, vec![(4, 0.3), (12, 0.7)]).unwrap();
        let ball =
            WassersteinBall::new(nominal, GroundMetric::absolute_1d(1.0).unwrap(), 0.7).unwrap();
        let obj = Objective::from_fn(|x| (x[0] - 3.0).abs().sin() + 0.3 * x[0]);
        let sol = solve_dual(&ball, &obj).unwrap();
        let h_star = dual_objective(&ball, &obj, sol.lambda_star).unwrap();
        let step = 1e-4;
        let up = dual_objective(&ball, &obj, sol.lambda_star + step).unwrap();
        assert!(h_star <= up + 1e-9);
        if sol.lambda_star > step {
            let down = dual_objective(&ball, &obj, sol.lambda_star - step).unwrap();
            assert!(h_star <= down + 1e-9);
        }
        assert!(sol.left_slope <= 1e-9);
        assert!(sol.right_slope >= -1e-9);
    }
}
