//! Exact Wasserstein distances between finite discrete measures.
//!
//! The general path solves the transportation problem with a dense network
//! simplex (north-west-corner start, Bland's entering rule), which returns a
//! basic optimal plan with at most `m + n - 1` positive entries. 1-D supports
//! under the absolute metric take the sorted-quantile coupling instead.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::metric::{pow_order, GroundMetric, MetricKind};

/// One entry of a transport plan, addressed by atom position (not space
/// index) on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

/// A feasible coupling between two discrete measures with its `d^p` cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    pub cost: f64,
}

impl TransportPlan {
    /// Marginal over the source atoms.
    pub fn row_sums(&self, m: usize) -> Vec<f64> {
        let mut r = vec![0.0; m];
        for e in &self.entries {
            r[e.from] += e.mass;
        }
        r
    }

    /// Marginal over the target atoms.
    pub fn col_sums(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for e in &self.entries {
            c[e.to] += e.mass;
        }
        c
    }
}

/// `W_p(mu, nu)` with an optimal plan, dispatching to the quantile coupling
/// on 1-D absolute-metric supports and to the transportation LP otherwise.
pub fn wasserstein_distance(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    metric: &GroundMetric,
) -> Result<(f64, TransportPlan)> {
    if mu.space().dim() != nu.space().dim() {
        return Err(Error::DimensionMismatch { expected: mu.space().dim(), got: nu.space().dim() });
    }
    if metric.kind == MetricKind::Absolute1d && mu.space().dim() == 1 {
        let plan = quantile_plan(mu, nu, metric.order);
        return Ok((pow_order(plan.cost, 1.0 / metric.order), plan));
    }
    wasserstein_lp(mu, nu, metric)
}

/// Always solves the transportation LP, whatever the metric kind.
pub fn wasserstein_lp(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    metric: &GroundMetric,
) -> Result<(f64, TransportPlan)> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyInput("distribution"));
    }
    let costs = atom_costs(mu, nu, metric)?;
    let a: Vec<f64> = mu.atoms().iter().map(|x| x.weight).collect();
    let b: Vec<f64> = nu.atoms().iter().map(|x| x.weight).collect();
    let plan = solve_transportation(&a, &b, &costs)?;
    Ok((pow_order(plan.cost, 1.0 / metric.order), plan))
}

/// Quantile-function formula for 1-D absolute-metric supports; agrees with
/// the LP on the cost and returns an equivalent-cost monotone plan.
pub fn wasserstein_1d_fast(mu: &DiscreteDistribution, nu: &DiscreteDistribution, p: f64) -> Result<f64> {
    if mu.space().dim() != 1 || nu.space().dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: mu.space().dim().max(nu.space().dim()) });
    }
    Ok(pow_order(quantile_plan(mu, nu, p).cost, 1.0 / p))
}

fn atom_costs(
    mu: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    metric: &GroundMetric,
) -> Result<Vec<Vec<f64>>> {
    let explicit = metric.is_explicit();
    if explicit {
        if mu.space() != nu.space() {
            return Err(Error::InvalidMetric(
                "explicit-matrix metric requires both measures on the same point space".into(),
            ));
        }
        metric.compatible_with(mu.space())?;
    }
    let mut costs = vec![vec![0.0; nu.len()]; mu.len()];
    for (i, ai) in mu.atoms().iter().enumerate() {
        for (j, bj) in nu.atoms().iter().enumerate() {
            let d = if explicit {
                metric.distance(mu.space(), ai.index, bj.index)
            } else {
                metric.distance_coords(mu.space().point(ai.index), nu.space().point(bj.index))?
            };
            costs[i][j] = pow_order(d, metric.order);
        }
    }
    Ok(costs)
}

fn quantile_plan(mu: &DiscreteDistribution, nu: &DiscreteDistribution, p: f64) -> TransportPlan {
    let mut left: Vec<(f64, usize, f64)> = mu
        .atoms()
        .iter()
        .enumerate()
        .map(|(k, a)| (mu.space().point(a.index)[0], k, a.weight))
        .collect();
    let mut right: Vec<(f64, usize, f64)> = nu
        .atoms()
        .iter()
        .enumerate()
        .map(|(k, a)| (nu.space().point(a.index)[0], k, a.weight))
        .collect();
    left.sort_by(|x, y| x.0.total_cmp(&y.0));
    right.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut entries = Vec::new();
    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = left[0].2;
    let mut rb = right[0].2;
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            cost += m * pow_order((left[i].0 - right[j].0).abs(), p);
            entries.push(PlanEntry { from: left[i].1, to: right[j].1, mass: m });
        }
        ra -= m;
        rb -= m;
        let adv_left = ra <= rb;
        if adv_left {
            i += 1;
            if i == left.len() {
                break;
            }
            ra = left[i].2;
        } else {
            j += 1;
            if j == right.len() {
                break;
            }
            rb = right[j].2;
        }
    }
    TransportPlan { entries, cost }
}

const REDUCED_COST_TOL: f64 = 1e-11;

/// Dense network simplex for `min sum c_ij x_ij` with row sums `a`, column
/// sums `b`, both probability vectors. Sized for supports up to a few
/// hundred atoms per side.
pub fn solve_transportation(a: &[f64], b: &[f64], costs: &[Vec<f64>]) -> Result<TransportPlan> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("marginal"));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if (sa - sb).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("marginals sum to {sa} vs {sb}")));
    }

    // North-west-corner start: exactly m + n - 1 basic arcs, zeros included.
    let mut arcs: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    {
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        while i < m && j < n {
            let f = ra[i].min(rb[j]);
            arcs.push((i, j));
            flow.push(f);
            ra[i] -= f;
            rb[j] -= f;
            if ra[i] <= rb[j] && i + 1 < m {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    debug_assert_eq!(arcs.len(), m + n - 1);

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let max_iters = 200 * (m + n) * (m.max(n)) + 10_000;
    for _ in 0..max_iters {
        compute_potentials(m, n, &arcs, costs, &mut u, &mut v);

        // Bland: first arc (row-major) with negative reduced cost enters.
        // Basic arcs price out to exactly zero, so no basis lookup is needed.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if costs[i][j] - u[i] - v[j] < -REDUCED_COST_TOL {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let entries = arcs
                .iter()
                .zip(&flow)
                .filter(|(_, &f)| f > 1e-15)
                .map(|(&(i, j), &f)| PlanEntry { from: i, to: j, mass: f })
                .collect::<Vec<_>>();
            let cost = entries.iter().map(|e| e.mass * costs[e.from][e.to]).sum();
            return Ok(TransportPlan { entries, cost });
        };

        // Unique tree path from source ei to sink ej; arcs at even positions
        // along the path lose flow when the entering arc gains.
        let path = tree_path(m, n, &arcs, ei, ej);
        let mut delta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (k, &arc_idx) in path.iter().enumerate() {
            if k % 2 == 0 && flow[arc_idx] < delta {
                delta = flow[arc_idx];
                leave_pos = arc_idx;
            }
        }
        for (k, &arc_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[arc_idx] -= delta;
            } else {
                flow[arc_idx] += delta;
            }
        }
        arcs[leave_pos] = (ei, ej);
        flow[leave_pos] = delta;
    }
    Err(Error::BracketFailure("transportation simplex iteration cap reached".into()))
}

/// Node potentials from the spanning tree: u_i + v_j = c_ij on basic arcs.
fn compute_potentials(
    m: usize,
    n: usize,
    arcs: &[(usize, usize)],
    costs: &[Vec<f64>],
    u: &mut [f64],
    v: &mut [f64],
) {
    // Adjacency over tree nodes: sources are 0..m, sinks m..m+n.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
    for (idx, &(i, j)) in arcs.iter().enumerate() {
        adj[i].push((m + j, idx));
        adj[m + j].push((i, idx));
    }
    let mut seen = vec![false; m + n];
    let mut stack = vec![0usize];
    u[0] = 0.0;
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &(next, idx) in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            let (i, j) = arcs[idx];
            if next >= m {
                v[next - m] = costs[i][j] - u[i];
            } else {
                u[next] = costs[i][j] - v[node - m];
            }
            stack.push(next);
        }
    }
}

/// Arc indices along the unique tree path from source `si` to sink `tj`.
fn tree_path(m: usize, n: usize, arcs: &[(usize, usize)], si: usize, tj: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
    for (idx, &(i, j)) in arcs.iter().enumerate() {
        adj[i].push((m + j, idx));
        adj[m + j].push((i, idx));
    }
    let target = m + tj;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    let mut stack = vec![si];
    seen[si] = true;
    while let Some(node) = stack.pop() {
        if node == target {
            break;
        }
        for &(next, idx) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, idx));
                stack.push(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = target;
    while node != si {
        let (prev, idx) = parent[node].expect("tree is connected");
        path.push(idx);
        node = prev;
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::PointSpace;

    fn dist(points: Vec<Vec<f64>>, weights: Vec<f64>) -> DiscreteDistribution {
        let space = PointSpace::new(points).unwrap();
        DiscreteDistribution::from_weights(space, &weights).unwrap()
    }

    #[test]
    fn dirac_to_dirac_is_ground_distance() {
        let mu = dist(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![1.0, 0.0]);
        let nu = dist(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![0.0, 1.0]);
        let metric = GroundMetric::euclidean(1.0).unwrap();
        let (w, plan) = wasserstein_distance(&mu, &nu, &metric).unwrap();
        assert!((w - 5.0).abs() < 1e-12);
        assert_eq!(plan.entries.len(), 1);
    }

    #[test]
    fn split_mass_to_midpoint() {
        let mu = dist(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.5, 0.0, 0.5]);
        let nu = dist(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 0.0]);
        let metric = GroundMetric::absolute_1d(1.0).unwrap();
        let (w, _) = wasserstein_distance(&mu, &nu, &metric).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        let (w_lp, _) = wasserstein_lp(&mu, &nu, &metric).unwrap();
        assert!((w_lp - 1.0).abs() < 1e-12);
    }

    /// Brute-force oracle: enumerate every basis (spanning subset of 5 arcs)
    /// of the 3x3 transportation polytope and keep the best feasible one.
    fn enumerate_3x3(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> f64 {
        let arcs: Vec<(usize, usize)> =
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << 9) {
            if mask.count_ones() != 5 {
                continue;
            }
            let chosen: Vec<(usize, usize)> =
                (0..9).filter(|k| mask & (1 << k) != 0).map(|k| arcs[k]).collect();
            // Solve the 6 marginal equations on the 5 chosen arcs by Gaussian
            // elimination; skip singular (non-tree) and inconsistent subsets.
            let mut mat: Vec<Vec<f64>> = Vec::new();
            for i in 0..3 {
                let mut row: Vec<f64> =
                    chosen.iter().map(|&(ii, _)| if ii == i { 1.0 } else { 0.0 }).collect();
                row.push(a[i]);
                mat.push(row);
            }
            for j in 0..3 {
                let mut row: Vec<f64> =
                    chosen.iter().map(|&(_, jj)| if jj == j { 1.0 } else { 0.0 }).collect();
                row.push(b[j]);
                mat.push(row);
            }
            let mut pivots: Vec<(usize, usize)> = Vec::new();
            let mut pivot_row = 0;
            for col in 0..5 {
                let Some(r) = (pivot_row..6).find(|&r| mat[r][col].abs() > 1e-9) else {
                    continue;
                };
                mat.swap(pivot_row, r);
                let p = mat[pivot_row][col];
                for r2 in 0..6 {
                    if r2 != pivot_row {
                        let f = mat[r2][col] / p;
                        if f != 0.0 {
                            for c2 in 0..6 {
                                mat[r2][c2] -= f * mat[pivot_row][c2];
                            }
                        }
                    }
                }
                pivots.push((pivot_row, col));
                pivot_row += 1;
            }
            if pivots.len() < 5 {
                continue; // columns dependent: not a basis
            }
            if (pivot_row..6).any(|r| mat[r][5].abs() > 1e-9) {
                continue; // inconsistent system
            }
            let mut x = vec![0.0; 5];
            for &(r, c2) in &pivots {
                x[c2] = mat[r][5] / mat[r][c2];
            }
            if x.iter().any(|&v| v < -1e-9) {
                continue;
            }
            let cost: f64 =
                chosen.iter().zip(&x).map(|(&(i, j), &f)| c[i][j] * f).sum();
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn three_by_three_matches_basis_enumeration() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.4, 0.4, 0.2];
        let c = vec![
            vec![2.0, 7.0, 4.0],
            vec![3.0, 1.0, 5.0],
            vec![6.0, 2.0, 3.0],
        ];
        let expected = enumerate_3x3(&a, &b, &c);
        let plan = solve_transportation(&a, &b, &c).unwrap();
        assert!(
            (plan.cost - expected).abs() < 1e-10,
            "simplex {} vs enumeration {}",
            plan.cost,
            expected
        );
        // Basic solution sparsity certificate.
        assert!(plan.entries.len() <= a.len() + b.len() - 1);
        for (i, r) in plan.row_sums(3).iter().enumerate() {
            assert!((r - a[i]).abs() < 1e-9);
        }
        for (j, s) in plan.col_sums(3).iter().enumerate() {
            assert!((s - b[j]).abs() < 1e-9);
        }
    }
}
