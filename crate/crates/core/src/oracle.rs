//! Brute-force primal oracle: the worst-case expectation as an explicit
//! transportation-polytope LP over all (candidate, nominal atom) pairs.
//!
//! This is the independent check for the dual solver. It shares no code
//! with it: the LP is handed to the dense two-phase simplex as-is.

use crate::distribution::DiscreteDistribution;
use crate::dual::WassersteinBall;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::simplex::{solve, DenseLp};

/// Dense LP budget on `|candidates| * |nominal atoms|`.
pub const ORACLE_BUDGET: usize = 40_000;

/// Exact maximizer of the expected objective over the ball, by LP.
///
/// Variables are the transport masses from each nominal atom to each
/// candidate; the budget row caps total `d^p` cost at `theta^p`.
pub fn primal_oracle(
    ball: &WassersteinBall,
    objective: &Objective,
) -> Result<(f64, DiscreteDistribution)> {
    let space = ball.space();
    let atoms = ball.nominal.atoms();
    let n_c = space.len();
    let n_a = atoms.len();
    let size = n_c * n_a;
    if size > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded { size, budget: ORACLE_BUDGET });
    }
    let values = objective.table(space)?;

    // gamma[x * n_a + j]: mass moved from atom j to candidate x.
    let mut objective_row = vec![0.0; size];
    for x in 0..n_c {
        for j in 0..n_a {
            objective_row[x * n_a + j] = values[x];
        }
    }
    let mut eq = Vec::with_capacity(n_a);
    for (j, atom) in atoms.iter().enumerate() {
        let mut row = vec![0.0; size];
        for x in 0..n_c {
            row[x * n_a + j] = 1.0;
        }
        eq.push((row, atom.weight));
    }
    let mut budget_row = vec![0.0; size];
    for x in 0..n_c {
        for (j, atom) in atoms.iter().enumerate() {
            budget_row[x * n_a + j] = ball.metric.cost(space, x, atom.index);
        }
    }
    let lp = DenseLp {
        objective: objective_row,
        eq,
        ub: vec![(budget_row, ball.budget())],
    };
    let sol = solve(&lp)?;

    let mut masses = vec![0.0; n_c];
    for x in 0..n_c {
        for j in 0..n_a {
            masses[x] += sol.x[x * n_a + j];
        }
    }
    let total: f64 = masses.iter().sum();
    let distribution = DiscreteDistribution::new(
        space.clone(),
        masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 1e-12)
            .map(|(x, &m)| (x, m / total))
            .collect(),
    )?;
    Ok((sol.value, distribution))
}
