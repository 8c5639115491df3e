//! Construction of worst-case (and near-worst-case) distributions from a
//! dual solution.
//!
//! At the optimal multiplier every nominal atom may only move inside its
//! argmin set, where the objective gain is exactly `lambda_star` per unit of
//! transport cost. Spending the whole budget is therefore optimal, and a
//! single-constraint greedy over the per-atom near/far cost segments yields
//! a maximizer with at most one fractionally split atom.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::dual::{DualSolution, Existence, WassersteinBall};
use crate::error::{Error, Result};
use crate::metric::pow_order;
use crate::objective::Objective;

/// One source-atom-to-destination assignment with its share of the source
/// atom's mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportRecord {
    /// Position of the source atom in the nominal atom list.
    pub source_atom: usize,
    /// Candidate index of the source point.
    pub source_index: usize,
    /// Candidate index of the destination point.
    pub dest_index: usize,
    /// Absolute probability mass placed at the destination.
    pub mass: f64,
    /// Share of the source atom's own weight.
    pub fraction: f64,
    /// Transport cost `d^p(dest, source)` per unit mass.
    pub cost: f64,
}

/// A feasible distribution certified atom by atom against the nominal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstCaseDistribution {
    pub distribution: DiscreteDistribution,
    pub transports: Vec<TransportRecord>,
    /// Position of the at-most-one fractionally split source atom.
    pub split_atom: Option<usize>,
    /// Total `d^p` transport cost against the nominal.
    pub transport_cost: f64,
    /// Expectation of the objective under the distribution.
    pub value: f64,
}

impl WorstCaseDistribution {
    /// Number of distinct support points.
    pub fn support_size(&self) -> usize {
        self.distribution.len()
    }
}

const SNAP_TOL: f64 = 1e-12;

/// Builds an exact worst-case distribution; requires `existence == Exists`.
pub fn construct_worst_case(
    solution: &DualSolution,
    ball: &WassersteinBall,
    objective: &Objective,
) -> Result<WorstCaseDistribution> {
    if solution.existence != Existence::Exists {
        return Err(Error::WrongExistence(format!(
            "construction requires an attained worst case, got {:?}",
            solution.existence
        )));
    }
    let space = ball.space();
    let values = objective.table(space)?;
    let atoms = ball.nominal.atoms();
    let lambda = solution.construction_lambda();
    let order = ball.metric.order;
    let budget = ball.budget();

    // Argmin data at the construction multiplier. Reuse the solution's
    // regularizations when the multiplier is unchanged.
    let regs: Vec<crate::dual::RegularizedValue> =
        if lambda == solution.lambda_star && solution.regularizations.len() == atoms.len() {
            solution.regularizations.clone()
        } else {
            atoms
                .iter()
                .map(|a| {
                    crate::dual::phi_regularize(objective, &ball.metric, space, lambda, a.index)
                })
                .collect::<Result<Vec<_>>>()?
        };

    let near_cost: Vec<f64> = regs.iter().map(|r| pow_order(r.d_min, order)).collect();
    let far_cost: Vec<f64> = regs.iter().map(|r| pow_order(r.d_max, order)).collect();
    let base_cost: f64 =
        atoms.iter().zip(&near_cost).map(|(a, c)| a.weight * c).sum();
    if base_cost > budget + 1e-6 {
        return Err(Error::Infeasible(format!(
            "near-destination cost {base_cost} already exceeds budget {budget}"
        )));
    }

    // Fraction of each atom sent to its far destination. Every unit of cost
    // buys the same objective gain lambda inside an argmin set, so any
    // budget-exhausting assignment is optimal; atom order makes it unique.
    let mut far_fraction = vec![0.0; atoms.len()];
    if lambda > 1e-12 {
        let mut remaining = (budget - base_cost).max(0.0);
        let snap = SNAP_TOL * (1.0 + budget);
        for (i, atom) in atoms.iter().enumerate() {
            if remaining <= 0.0 {
                break;
            }
            let delta = atom.weight * (far_cost[i] - near_cost[i]);
            if delta <= 1e-15 {
                continue;
            }
            let q = (remaining / delta).min(1.0);
            let q = if (1.0 - q) * delta <= snap {
                1.0
            } else if q * delta <= snap {
                0.0
            } else {
                q
            };
            far_fraction[i] = q;
            remaining = (remaining - q * delta).max(0.0);
            if q < 1.0 {
                break;
            }
        }
    }

    let mut transports = Vec::new();
    let mut split_atom = None;
    for (i, atom) in atoms.iter().enumerate() {
        let q = far_fraction[i];
        let reg = &regs[i];
        if q > 0.0 && q < 1.0 {
            // Try to merge the split into a single argmin destination whose
            // cost matches the blended target exactly.
            let target = (1.0 - q) * near_cost[i] + q * far_cost[i];
            let merged = reg.argmin.iter().copied().find(|&x| {
                (ball.metric.cost(space, x, atom.index) - target).abs()
                    <= SNAP_TOL * (1.0 + target.abs())
            });
            if let Some(x) = merged {
                transports.push(record(i, atom, x, 1.0, ball, space));
                continue;
            }
            split_atom = Some(i);
            transports.push(record(i, atom, reg.near, 1.0 - q, ball, space));
            transports.push(record(i, atom, reg.far, q, ball, space));
        } else if q >= 1.0 {
            transports.push(record(i, atom, reg.far, 1.0, ball, space));
        } else {
            transports.push(record(i, atom, reg.near, 1.0, ball, space));
        }
    }

    let mut masses: Vec<(usize, f64)> = Vec::new();
    for t in &transports {
        match masses.iter_mut().find(|(x, _)| *x == t.dest_index) {
            Some((_, m)) => *m += t.mass,
            None => masses.push((t.dest_index, t.mass)),
        }
    }
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    let distribution = DiscreteDistribution::new(
        space.clone(),
        masses.into_iter().map(|(x, m)| (x, m / total)).collect(),
    )?;
    let transport_cost = transports.iter().map(|t| t.mass * t.cost).sum();
    let value = transports.iter().map(|t| t.mass * values[t.dest_index]).sum();

    Ok(WorstCaseDistribution { distribution, transports, split_atom, transport_cost, value })
}

fn record(
    i: usize,
    atom: &crate::distribution::Atom,
    dest: usize,
    fraction: f64,
    ball: &WassersteinBall,
    space: &crate::space::PointSpace,
) -> TransportRecord {
    TransportRecord {
        source_atom: i,
        source_index: atom.index,
        dest_index: dest,
        mass: atom.weight * fraction,
        fraction,
        cost: ball.metric.cost(space, dest, atom.index),
    }
}

/// Near-optimal feasible distribution for the vanishing-sequence regime: a
/// fractional-knapsack push of each atom toward its best value-per-cost
/// candidate, typically the boundary of the available candidate radius.
///
/// The achieved gap `value(dual) - value(mu)` is returned inside the result
/// via `value`; if it exceeds `epsilon` the call fails and reports the
/// minimal achievable slack.
pub fn epsilon_optimal_sequence(
    solution: &DualSolution,
    ball: &WassersteinBall,
    objective: &Objective,
    epsilon: f64,
) -> Result<WorstCaseDistribution> {
    if solution.existence != Existence::VanishingSequence {
        return Err(Error::WrongExistence(format!(
            "epsilon-optimal sequences apply only to vanishing-sequence solutions, got {:?}",
            solution.existence
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be > 0".into()));
    }
    let space = ball.space();
    let values = objective.table(space)?;
    let atoms = ball.nominal.atoms();
    let budget = ball.budget();

    // Best escape ratio per atom over all candidates.
    struct Move {
        atom: usize,
        dest: usize,
        ratio: f64,
        cost: f64,
    }
    let mut moves: Vec<Move> = Vec::new();
    for (i, atom) in atoms.iter().enumerate() {
        let base = values[atom.index];
        let mut best: Option<(f64, usize, f64)> = None;
        for x in 0..space.len() {
            let c = ball.metric.cost(space, x, atom.index);
            if c <= 1e-15 {
                continue;
            }
            let ratio = (values[x] - base) / c;
            if best.map_or(true, |(r, _, _)| ratio > r) {
                best = Some((ratio, x, c));
            }
        }
        if let Some((ratio, dest, cost)) = best {
            if ratio > 0.0 {
                moves.push(Move { atom: i, dest, ratio, cost });
            }
        }
    }
    moves.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then(a.atom.cmp(&b.atom)));

    let mut fraction = vec![0.0; atoms.len()];
    let mut dest = vec![usize::MAX; atoms.len()];
    let mut remaining = budget;
    let mut split_atom = None;
    for mv in &moves {
        if remaining <= 0.0 {
            break;
        }
        let full = atoms[mv.atom].weight * mv.cost;
        let q = (remaining / full).min(1.0);
        fraction[mv.atom] = q;
        dest[mv.atom] = mv.dest;
        remaining = (remaining - q * full).max(0.0);
        if q < 1.0 {
            split_atom = Some(mv.atom);
            break;
        }
    }

    let mut transports = Vec::new();
    for (i, atom) in atoms.iter().enumerate() {
        let q = fraction[i];
        if q > 0.0 {
            transports.push(record(i, atom, dest[i], q, ball, space));
        }
        if q < 1.0 {
            transports.push(record(i, atom, atom.index, 1.0 - q, ball, space));
        }
    }
    let mut masses: Vec<(usize, f64)> = Vec::new();
    for t in &transports {
        match masses.iter_mut().find(|(x, _)| *x == t.dest_index) {
            Some((_, m)) => *m += t.mass,
            None => masses.push((t.dest_index, t.mass)),
        }
    }
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    let distribution = DiscreteDistribution::new(
        space.clone(),
        masses.into_iter().map(|(x, m)| (x, m / total)).collect(),
    )?;
    let transport_cost: f64 = transports.iter().map(|t| t.mass * t.cost).sum();
    let value: f64 = transports.iter().map(|t| t.mass * values[t.dest_index]).sum();
    let slack = solution.value - value;
    if slack > epsilon {
        return Err(Error::TruncationRadius { requested: epsilon, minimal: slack });
    }
    Ok(WorstCaseDistribution { distribution, transports, split_atom, transport_cost, value })
}

/// Feasible lower bound from rounding the split atom's far share down to a
/// multiple of `1/K`, with the certified gap `w_split * (M + L*D) / K`.
///
/// Requires declared Lipschitz data on the objective.
pub fn robust_lower_bound_vk(
    ball: &WassersteinBall,
    objective: &Objective,
    k: u32,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be >= 1".into()));
    }
    let Some((lip_l, lip_m)) = objective.lipschitz() else {
        return Err(Error::MissingData("lipschitz data (L, M)"));
    };
    let solution = crate::dual::solve_dual(ball, objective)?;
    let wc = construct_worst_case(&solution, ball, objective)?;

    let Some(split) = wc.split_atom else {
        return Ok((solution.value, 0.0));
    };

    let values = objective.table(ball.space())?;
    let recs: Vec<&TransportRecord> =
        wc.transports.iter().filter(|t| t.source_atom == split).collect();
    debug_assert_eq!(recs.len(), 2);
    let (near, far) = if recs[0].cost <= recs[1].cost {
        (recs[0], recs[1])
    } else {
        (recs[1], recs[0])
    };
    let q = far.fraction;
    let rounded = (k as f64 * q).floor() / k as f64;
    let w = ball.nominal.atoms()[split].weight;
    let drop = w * (q - rounded) * (values[far.dest_index] - values[near.dest_index]);
    let v_k = wc.value - drop;

    let d_max = wc
        .transports
        .iter()
        .map(|t| pow_order(t.cost, 1.0 / ball.metric.order))
        .fold(0.0f64, f64::max);
    let bound = w * (lip_m + lip_l * d_max) / k as f64;
    Ok((v_k, bound))
}
