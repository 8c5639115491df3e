//! A small dense two-phase simplex for the brute-force oracle LPs.
//!
//! Kept deliberately separate from the dual solver and the transportation
//! network simplex so oracle comparisons exercise an independent code path.
//! Bland's rule on both entering and leaving variables rules out cycling.

use crate::error::{Error, Result};

/// `maximize c . x` over `x >= 0` subject to equality and <= rows.
#[derive(Debug, Clone, Default)]
pub struct DenseLp {
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ub: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

const RC_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-11;

pub fn solve(lp: &DenseLp) -> Result<LpSolution> {
    let n = lp.objective.len();
    if n == 0 {
        return Err(Error::EmptyInput("lp variables"));
    }
    let n_slack = lp.ub.len();
    let m = lp.eq.len() + lp.ub.len();
    if m == 0 {
        // Only x >= 0 remains: unbounded along any rewarding coordinate.
        if lp.objective.iter().any(|&c| c > RC_TOL) {
            return Err(Error::Unbounded("lp objective unbounded above".into()));
        }
        return Ok(LpSolution { x: vec![0.0; n], value: 0.0 });
    }

    // Rows as equalities over [x, slacks], with nonnegative right-hand sides.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (a, b) in &lp.eq {
        if a.len() != n {
            return Err(Error::LengthMismatch { left: a.len(), right: n });
        }
        let mut row = a.clone();
        row.extend(std::iter::repeat(0.0).take(n_slack));
        if *b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs.push(-b);
        } else {
            rhs.push(*b);
        }
        rows.push(row);
    }
    for (k, (a, b)) in lp.ub.iter().enumerate() {
        if a.len() != n {
            return Err(Error::LengthMismatch { left: a.len(), right: n });
        }
        let mut row = a.clone();
        row.extend(std::iter::repeat(0.0).take(n_slack));
        row[n + k] = 1.0;
        if *b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs.push(-b);
        } else {
            rhs.push(*b);
        }
        rows.push(row);
    }

    // Initial basis: slack columns where usable, artificials elsewhere.
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut tableau: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut n_art = 0usize;
    let mut art_cols: Vec<Option<usize>> = vec![None; m];
    for (r, row) in rows.iter().enumerate() {
        let slack_col = (n..n + n_slack).find(|&c| row[c] == 1.0);
        match slack_col {
            Some(c) => basis.push(c),
            None => {
                art_cols[r] = Some(n + n_slack + n_art);
                basis.push(n + n_slack + n_art);
                n_art += 1;
            }
        }
        tableau.push(row.clone());
    }
    let total = n + n_slack + n_art;
    for (r, row) in tableau.iter_mut().enumerate() {
        row.resize(total, 0.0);
        if let Some(c) = art_cols[r] {
            row[c] = 1.0;
        }
        row.push(rhs[r]);
    }

    if n_art > 0 {
        // Phase 1: drive the artificials to zero.
        let mut phase1 = vec![0.0; total];
        for r in 0..m {
            if let Some(c) = art_cols[r] {
                phase1[c] = -1.0;
            }
        }
        let value = run_simplex(&mut tableau, &mut basis, &phase1, total)?;
        if value < -1e-8 {
            return Err(Error::Infeasible(format!("phase-1 residual {:.3e}", -value)));
        }
        // Pivot surviving artificials (at zero level) out of the basis, or
        // drop their rows entirely when redundant.
        let mut r = 0;
        while r < tableau.len() {
            if basis[r] >= n + n_slack {
                if let Some(c) = (0..n + n_slack).find(|&c| tableau[r][c].abs() > PIVOT_TOL) {
                    pivot(&mut tableau, &mut basis, r, c);
                } else {
                    tableau.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    let mut obj = vec![0.0; total];
    obj[..n].copy_from_slice(&lp.objective);
    run_simplex(&mut tableau, &mut basis, &obj, n + n_slack)?;

    let mut x = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tableau[r][total];
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution { x, value })
}

/// Runs Bland-rule simplex on the tableau; returns the objective value.
fn run_simplex(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    objective: &[f64],
    enter_limit: usize,
) -> Result<f64> {
    let m = tableau.len();
    let width = tableau[0].len();
    let max_iters = 50_000 + 200 * width * m;
    for _ in 0..max_iters {
        // Reduced costs: c_j - c_B . B^-1 A_j, computed from the tableau.
        let mut entering = None;
        for j in 0..enter_limit {
            if basis.contains(&j) {
                continue;
            }
            let mut rc = objective[j];
            for r in 0..m {
                rc -= objective[basis[r]] * tableau[r][j];
            }
            if rc > RC_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            let mut value = 0.0;
            for r in 0..m {
                value += objective[basis[r]] * tableau[r][width - 1];
            }
            return Ok(value);
        };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if tableau[r][j] > PIVOT_TOL {
                let ratio = tableau[r][width - 1] / tableau[r][j];
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - 1e-12
                            || (ratio < lratio + 1e-12 && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Unbounded("lp objective unbounded above".into()));
        };
        pivot(tableau, basis, r, j);
    }
    Err(Error::BracketFailure("simplex iteration cap reached".into()))
}

fn pivot(tableau: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let width = tableau[0].len();
    let p = tableau[r][c];
    for v in tableau[r].iter_mut() {
        *v /= p;
    }
    for r2 in 0..tableau.len() {
        if r2 != r {
            let f = tableau[r2][c];
            if f != 0.0 {
                for k in 0..width {
                    tableau[r2][k] -= f * tableau[r][k];
                }
            }
        }
    }
    basis[r] = c;
}
