//! Worst-case concave gain over densities near a discrete plan: maximize
//! `int sqrt(f) dA` over densities within transport radius theta of the
//! nominal atoms, discretized on a quadrature grid.
//!
//! The dual is a finite convex program in `(lambda, u)` with `u_i = lambda
//! v_i` the per-atom potentials:
//!
//! ```text
//! F(lambda, u) = lambda theta^p - sum_i w_i u_i + sum_c area_c / (4 a_c),
//! a_c = min_i (lambda d^p(cell_c, atom_i) - u_i) > 0,
//! ```
//!
//! minimized by exact golden-section line search in lambda alternated with
//! subgradient steps in u (diminishing steps, monotone via backtracking).
//! Stationarity in u forces the per-atom density masses to match the atom
//! weights (so the density integrates to one), and stationarity in lambda
//! spends the transport budget exactly whenever it binds. The worst-case
//! density is `f_c = 1 / (4 a_c^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::pow_order;
use crate::numeric::golden_section;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumInstance {
    /// Quadrature nodes (cell centers) in the plane.
    pub cells: Vec<Vec<f64>>,
    /// Positive quadrature weights; their sum is the base measure's total.
    pub areas: Vec<f64>,
    /// Nominal atom locations, weighted uniformly.
    pub atoms: Vec<Vec<f64>>,
    pub theta: f64,
    pub order: f64,
}

impl ContinuumInstance {
    /// Uniform nx-by-ny cell grid on the unit square, total area one.
    pub fn unit_square(nx: usize, ny: usize, atoms: Vec<Vec<f64>>, theta: f64, order: f64) -> Self {
        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                cells.push(vec![
                    (ix as f64 + 0.5) / nx as f64,
                    (iy as f64 + 0.5) / ny as f64,
                ]);
            }
        }
        let areas = vec![1.0 / (nx * ny) as f64; nx * ny];
        Self { cells, areas, atoms, theta, order }
    }

    fn validate(&self) -> Result<()> {
        if self.cells.is_empty() || self.atoms.is_empty() {
            return Err(Error::EmptyInput("cells or atoms"));
        }
        if self.cells.len() != self.areas.len() {
            return Err(Error::LengthMismatch { left: self.cells.len(), right: self.areas.len() });
        }
        if self.areas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter("cell areas must be positive".into()));
        }
        if self.cells.iter().chain(&self.atoms).any(|p| p.len() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, got: 0 });
        }
        if !(self.theta > 0.0) || !(self.order >= 1.0) {
            return Err(Error::InvalidParameter("need theta > 0 and order >= 1".into()));
        }
        let (lo_x, hi_x) = bounds(&self.cells, 0);
        let (lo_y, hi_y) = bounds(&self.cells, 1);
        for a in &self.atoms {
            if a[0] < lo_x - 0.5 || a[0] > hi_x + 0.5 || a[1] < lo_y - 0.5 || a[1] > hi_y + 0.5 {
                return Err(Error::InvalidParameter(format!(
                    "atom ({}, {}) far outside the grid hull",
                    a[0], a[1]
                )));
            }
        }
        Ok(())
    }
}

fn bounds(points: &[Vec<f64>], k: usize) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrtpSolution {
    /// Dual value (the worst-case gain).
    pub value: f64,
    pub lambda_star: f64,
    /// Per-atom potentials `v_i = u_i / lambda`, summing to zero.
    pub v_star: Vec<f64>,
    /// Worst-case density at each cell.
    pub f_star: Vec<f64>,
    /// Quadrature of the density; one at the optimum.
    pub total_mass: f64,
    /// `d^p` cost of the nearest-potential assignment of cells to atoms.
    pub transport_cost: f64,
    /// Primal gain of the reconstructed density.
    pub primal_value: f64,
    /// |primal - dual|.
    pub duality_gap: f64,
    pub iterations: usize,
}

struct Geometry {
    /// d^p from each cell to each atom.
    costs: Vec<Vec<f64>>,
    areas: Vec<f64>,
    budget: f64,
    n_atoms: usize,
}

impl Geometry {
    /// Active atom and value of `min_i (lambda c_i - u_i)` per cell.
    fn envelope(&self, lambda: f64, u: &[f64], cell: usize) -> (usize, f64) {
        let row = &self.costs[cell];
        let mut best = (0usize, lambda * row[0] - u[0]);
        for i in 1..self.n_atoms {
            let a = lambda * row[i] - u[i];
            if a < best.1 {
                best = (i, a);
            }
        }
        best
    }

    fn objective(&self, lambda: f64, u: &[f64]) -> f64 {
        let w = 1.0 / self.n_atoms as f64;
        let mut total = lambda * self.budget - w * u.iter().sum::<f64>();
        for c in 0..self.costs.len() {
            let (_, a) = self.envelope(lambda, u, c);
            if a <= 1e-12 {
                return f64::INFINITY;
            }
            total += self.areas[c] / (4.0 * a);
        }
        total
    }

    /// Density, per-atom masses, cost and primal gain at (lambda, u).
    fn reconstruct(&self, lambda: f64, u: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let mut f = vec![0.0; self.costs.len()];
        let mut masses = vec![0.0; self.n_atoms];
        let mut cost = 0.0;
        let mut gain = 0.0;
        for c in 0..self.costs.len() {
            let (i, a) = self.envelope(lambda, u, c);
            let fc = 1.0 / (4.0 * a * a);
            f[c] = fc;
            masses[i] += self.areas[c] * fc;
            cost += self.areas[c] * fc * self.costs[c][i];
            gain += self.areas[c] * fc.sqrt();
        }
        (f, masses, cost, gain)
    }
}

const MAX_ROUNDS: usize = 4000;
const BALANCE_TOL: f64 = 2e-5;

/// Solves the discretized dual and reconstructs the worst-case density.
pub fn drtp_solve(instance: &ContinuumInstance) -> Result<DrtpSolution> {
    instance.validate()?;
    let n_atoms = instance.atoms.len();
    let mut costs = Vec::with_capacity(instance.cells.len());
    for cell in &instance.cells {
        let row: Vec<f64> = instance
            .atoms
            .iter()
            .map(|a| {
                let d = ((cell[0] - a[0]).powi(2) + (cell[1] - a[1]).powi(2)).sqrt();
                pow_order(d, instance.order)
            })
            .collect();
        costs.push(row);
    }
    // A cell sitting exactly on an atom pins the envelope at zero and the
    // conjugate at infinity.
    let min_cost = costs
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    if min_cost < 1e-12 {
        return Err(Error::Infeasible(
            "a quadrature node coincides with a nominal atom; the positivity \
             constraint on the envelope is unattainable"
                .into(),
        ));
    }
    let geo = Geometry {
        costs,
        areas: instance.areas.clone(),
        budget: pow_order(instance.theta, instance.order),
        n_atoms,
    };

    // Feasible start: zero potentials, lambda from the stationarity identity.
    let mut u = vec![0.0; n_atoms];
    let mut lambda = {
        let phi_integral: f64 = (0..geo.costs.len())
            .map(|c| {
                let (_, a) = geo.envelope(1.0, &u, c);
                geo.areas[c] / (4.0 * geo.budget * a)
            })
            .sum::<f64>();
        phi_integral.sqrt().max(1e-6)
    };
    lambda = line_search_lambda(&geo, lambda, &u);

    let w = 1.0 / n_atoms as f64;
    let mut rounds = 0usize;
    for round in 0..MAX_ROUNDS {
        rounds = round + 1;
        let (_, masses, _, _) = geo.reconstruct(lambda, &u);
        // Stationarity in u_i: the density mass assigned to atom i matches
        // its weight.
        let imbalance = masses.iter().map(|m| (m - w).abs()).fold(0.0f64, f64::max);
        if imbalance <= BALANCE_TOL {
            break;
        }
        let mut dir: Vec<f64> = masses.iter().map(|m| -(m - w)).collect();
        let scale = dir.iter().map(|d| d.abs()).fold(0.0f64, f64::max);
        if scale <= 0.0 {
            break;
        }
        for d in &mut dir {
            *d /= scale;
        }
        let current = geo.objective(lambda, &u);
        // Newton-flavored step scale: mass responds to u at rate ~ f/a, so
        // an imbalance of m needs a potential move of roughly m * a. The
        // diminishing factor keeps late steps conservative.
        let mean_a: f64 = (0..geo.costs.len())
            .map(|c| geo.areas[c] * geo.envelope(lambda, &u, c).1)
            .sum();
        let mut step = (2.0 * imbalance * mean_a).max(lambda * min_cost * 0.25)
            / (1.0 + round as f64 / 500.0);
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(ui, di)| ui + step * di).collect();
            if geo.objective(lambda, &trial) < current {
                u = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        lambda = line_search_lambda(&geo, lambda, &u);
        if !accepted {
            break;
        }
    }

    let value = geo.objective(lambda, &u);
    let (f_star, masses, transport_cost, primal_value) = geo.reconstruct(lambda, &u);
    let total_mass: f64 = masses.iter().sum();
    // The mass identity is the convergence certificate; a large residual
    // means the subgradient walk stalled.
    if (total_mass - 1.0).abs() > 0.05 {
        return Err(Error::BracketFailure(format!(
            "density mass {total_mass:.3} far from 1 after {rounds} rounds; \
             potentials failed to converge"
        )));
    }
    let v_star: Vec<f64> = u.iter().map(|ui| ui / lambda).collect();
    Ok(DrtpSolution {
        value,
        lambda_star: lambda,
        v_star,
        f_star,
        total_mass,
        transport_cost,
        primal_value,
        duality_gap: (primal_value - value).abs(),
        iterations: rounds,
    })
}

/// Exact minimization over lambda for fixed potentials: expand a bracket
/// around the current multiplier, then golden-section.
fn line_search_lambda(geo: &Geometry, lambda: f64, u: &[f64]) -> f64 {
    // Floor keeps v = u / lambda representable when the budget stops
    // binding and the true multiplier heads to zero.
    const LAMBDA_FLOOR: f64 = 1e-3;
    let positive_u = u.iter().copied().fold(0.0f64, f64::max);
    // Smallest multiplier keeping every envelope term positive.
    let mut lo = if positive_u > 0.0 {
        let min_cost = geo
            .costs
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        (positive_u / min_cost * 1.0001).max(LAMBDA_FLOOR)
    } else {
        LAMBDA_FLOOR
    };
    lo = lo.min(lambda);
    let mut hi = lambda.max(lo * 2.0);
    let mut grow = 0;
    while geo.objective(hi * 2.0, u) < geo.objective(hi, u) && grow < 80 {
        hi *= 2.0;
        grow += 1;
    }
    hi *= 2.0;
    let f = |lam: f64| geo.objective(lam, u);
    let (blo, bhi) = golden_section(&f, lo, hi, 1e-9 * hi.max(1.0));
    let mid = 0.5 * (blo + bhi);
    if f(mid) <= f(lambda) {
        mid
    } else {
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_density_is_radial() {
        // 20x20 grid: cell centers at odd multiples of 1/40, so the atom at
        // the domain center never coincides with a node.
        let instance =
            ContinuumInstance::unit_square(20, 20, vec![vec![0.5, 0.5]], 0.25, 1.0);
        let sol = drtp_solve(&instance).unwrap();
        assert!((sol.total_mass - 1.0).abs() < 2e-3, "mass = {}", sol.total_mass);
        // Density decreases with distance from the atom along a row.
        let row: Vec<usize> = (0..20)
            .map(|ix| {
                instance
                    .cells
                    .iter()
                    .position(|c| {
                        (c[0] - (ix as f64 + 0.5) / 20.0).abs() < 1e-12
                            && (c[1] - 10.5 / 20.0).abs() < 1e-12
                    })
                    .unwrap()
            })
            .collect();
        for k in 10..19 {
            assert!(
                sol.f_star[row[k]] >= sol.f_star[row[k + 1]],
                "density not decreasing at column {k}"
            );
        }
        assert!(sol.f_star.iter().all(|&f| f >= 0.0));
    }

    #[test]
    fn mass_and_budget_consistency() {
        let instance = ContinuumInstance::unit_square(
            30,
            30,
            vec![vec![0.3, 0.3], vec![0.7, 0.4], vec![0.5, 0.8]],
            0.1,
            1.0,
        );
        let sol = drtp_solve(&instance).unwrap();
        assert!((sol.total_mass - 1.0).abs() < 2e-3, "mass = {}", sol.total_mass);
        assert!(
            sol.transport_cost <= instance.theta + 1e-4,
            "cost {} over budget {}",
            sol.transport_cost,
            instance.theta
        );
        assert!(sol.duality_gap < 2e-3, "gap = {}", sol.duality_gap);
    }

    #[test]
    fn slack_budget_flattens_the_density() {
        // With theta past the spread of the domain the budget stops binding
        // and the worst case approaches the uniform density (gain 1).
        let instance = ContinuumInstance::unit_square(
            30,
            30,
            vec![vec![0.3, 0.3], vec![0.7, 0.4], vec![0.5, 0.8]],
            0.6,
            1.0,
        );
        let sol = drtp_solve(&instance).unwrap();
        assert!((sol.total_mass - 1.0).abs() < 2e-3);
        assert!(sol.transport_cost < instance.theta);
        assert!((sol.primal_value - 1.0).abs() < 1e-2, "gain = {}", sol.primal_value);
    }

    #[test]
    fn coincident_atom_and_node_is_rejected() {
        let mut instance =
            ContinuumInstance::unit_square(10, 10, vec![vec![0.05, 0.05]], 0.2, 1.0);
        instance.atoms[0] = instance.cells[0].clone();
        assert!(matches!(drtp_solve(&instance), Err(Error::Infeasible(_))));
    }
}
