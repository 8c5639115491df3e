//! The six standard phi-divergences between probability vectors, with the
//! boundary conventions `0 * phi(0/0) = 0` and `0 * phi(a/0) = a * lim
//! phi(t)/t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKind {
    Kl,
    Burg,
    Chi2,
    ModifiedChi2,
    Hellinger,
    Tv,
}

impl PhiKind {
    pub const ALL: [PhiKind; 6] = [
        PhiKind::Kl,
        PhiKind::Burg,
        PhiKind::Chi2,
        PhiKind::ModifiedChi2,
        PhiKind::Hellinger,
        PhiKind::Tv,
    ];

    /// phi(t) on t >= 0.
    pub fn phi(&self, t: f64) -> f64 {
        match self {
            PhiKind::Kl => {
                if t == 0.0 {
                    0.0
                } else {
                    t * t.ln()
                }
            }
            PhiKind::Burg => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    -t.ln()
                }
            }
            PhiKind::Chi2 => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    (t - 1.0) * (t - 1.0) / t
                }
            }
            PhiKind::ModifiedChi2 => (t - 1.0) * (t - 1.0),
            PhiKind::Hellinger => {
                let s = t.sqrt() - 1.0;
                s * s
            }
            PhiKind::Tv => (t - 1.0).abs(),
        }
    }

    /// lim_{t -> inf} phi(t)/t; infinite limits force absolute continuity.
    pub fn slope_at_infinity(&self) -> f64 {
        match self {
            PhiKind::Kl | PhiKind::ModifiedChi2 => f64::INFINITY,
            PhiKind::Burg => 0.0,
            PhiKind::Chi2 | PhiKind::Hellinger | PhiKind::Tv => 1.0,
        }
    }
}

/// `I_phi(p, q) = sum_j q_j phi(p_j / q_j)`, possibly infinite.
pub fn phi_divergence(p: &[f64], q: &[f64], kind: PhiKind) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    validate_probability(p)?;
    validate_probability(q)?;
    let mut total = 0.0;
    for (&pj, &qj) in p.iter().zip(q) {
        let term = if qj == 0.0 {
            if pj == 0.0 {
                0.0
            } else {
                pj * kind.slope_at_infinity()
            }
        } else {
            qj * kind.phi(pj / qj)
        };
        if term.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += term;
    }
    Ok(total)
}

pub(crate) fn validate_probability(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("probability vector"));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidWeights("negative or non-finite entry".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("sums to {s}, expected 1")));
    }
    Ok(())
}

/// Upper bound `L * theta^p + M` on |E_mu Psi - E_nu Psi| over a radius-theta
/// ball, valid whenever |Psi(x) - Psi(y)| <= L d^p(x, y) + M.
pub fn expectation_gap_bound(l: f64, m: f64, theta: f64, p: f64) -> f64 {
    l * crate::metric::pow_order(theta, p) + m
}
