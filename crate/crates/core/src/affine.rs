//! Robust affine objectives: when the loss is `a.x + b` with `xi = [a; b]`
//! uncertain, the worst case over the ball collapses to the sample average
//! plus a dual-norm regularizer on the decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::lq_norm;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineSample {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineSolution {
    pub x_star: Vec<f64>,
    pub value: f64,
    /// Robust value per candidate decision, in input order.
    pub per_candidate: Vec<f64>,
}

/// Robust value of one decision: sample average plus `theta ||x||_{q*}`.
pub fn affine_objective(
    data: &[AffineSample],
    theta: f64,
    dual_order: f64,
    x: &[f64],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("affine samples"));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter("theta must be >= 0".into()));
    }
    if !(dual_order >= 1.0) && !dual_order.is_infinite() {
        return Err(Error::InvalidParameter("dual norm order must be >= 1 or inf".into()));
    }
    let mut avg = 0.0;
    for s in data {
        if s.a.len() != x.len() {
            return Err(Error::LengthMismatch { left: s.a.len(), right: x.len() });
        }
        avg += s.a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() + s.b;
    }
    avg /= data.len() as f64;
    Ok(avg + theta * lq_norm(x, dual_order))
}

/// Evaluates every candidate decision and returns the minimizer (first on
/// ties).
pub fn affine_drso(
    data: &[AffineSample],
    theta: f64,
    dual_order: f64,
    candidates: &[Vec<f64>],
) -> Result<AffineSolution> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidate decisions"));
    }
    let per_candidate: Vec<f64> = candidates
        .iter()
        .map(|x| affine_objective(data, theta, dual_order, x))
        .collect::<Result<_>>()?;
    let (best, _) = per_candidate
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    Ok(AffineSolution {
        x_star: candidates[best].clone(),
        value: per_candidate[best],
        per_candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_is_pure_sample_average() {
        let data = vec![
            AffineSample { a: vec![1.0, 0.0], b: 1.0 },
            AffineSample { a: vec![0.0, 1.0], b: -1.0 },
        ];
        let v = affine_objective(&data, 0.0, 2.0, &[2.0, 4.0]).unwrap();
        assert!((v - 0.5 * ((2.0 + 1.0) + (4.0 - 1.0))).abs() < 1e-15);
    }

    #[test]
    fn regularizer_formula() {
        let data = vec![AffineSample { a: vec![1.0, 0.0], b: 0.0 }];
        let v = affine_objective(&data, 0.1, 2.0, &[1.0, 0.0]).unwrap();
        assert!((v - 1.1).abs() < 1e-15);
    }

    #[test]
    fn picks_minimizing_candidate() {
        let data = vec![AffineSample { a: vec![1.0], b: 0.0 }];
        let sol =
            affine_drso(&data, 0.5, 1.0, &[vec![-2.0], vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        // value(x) = x + 0.5 |x|: minimized at x = -2 among candidates.
        assert_eq!(sol.x_star, vec![-2.0]);
        assert!((sol.value - (-1.0)).abs() < 1e-15);
    }
}
