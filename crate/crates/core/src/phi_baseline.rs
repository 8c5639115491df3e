//! Worst-case distributions over phi-divergence balls, as the comparison
//! baseline for transport-distance balls.
//!
//! The maximizer of `p . psi` over `{ I_phi(p, q) <= theta }` is recovered
//! from two multipliers: an outer one on the divergence and an inner one on
//! the simplex. Per-index masses are `q_j` times the conjugate subgradient
//! of `(psi_j - beta) / lambda`; when `lim phi(t)/t` is finite, mass may
//! "pop" onto the single best off-support index.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::divergence::{phi_divergence, validate_probability, PhiKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiWorstCase {
    pub p_star: Vec<f64>,
    pub lambda_star: f64,
    pub beta_star: f64,
    /// Off-support index receiving popped mass, with that mass.
    pub popped: Option<(usize, f64)>,
    pub objective: f64,
    pub divergence: f64,
    /// Input psi values carried exact ties that were perturbed.
    pub ties_perturbed: bool,
}

/// Derivative of the convex conjugate `phi*`, i.e. the maximizing mass ratio
/// `t(s) = argmax_t { s t - phi(t) }`, for the smooth kinds.
fn conjugate_derivative(kind: PhiKind, s: f64) -> f64 {
    match kind {
        PhiKind::Kl => (s - 1.0).exp(),
        PhiKind::Burg => {
            if s >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / s
            }
        }
        PhiKind::Chi2 => {
            if s >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - s).sqrt()
            }
        }
        PhiKind::ModifiedChi2 => (1.0 + s / 2.0).max(0.0),
        PhiKind::Hellinger => {
            if s >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / ((1.0 - s) * (1.0 - s))
            }
        }
        PhiKind::Tv => {
            // Set-valued at |s| = 1; handled by the dedicated TV route.
            if s < -1.0 {
                0.0
            } else if s <= 1.0 {
                1.0
            } else {
                f64::INFINITY
            }
        }
    }
}

/// `phi*(s) = sup_{t >= 0} (s t - phi(t))`, used by tests to cross-check the
/// closed-form subgradients numerically.
pub fn conjugate_value(kind: PhiKind, s: f64) -> f64 {
    match kind {
        PhiKind::Kl => (s - 1.0).exp(),
        PhiKind::Burg => {
            if s >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 - (-s).ln()
            }
        }
        PhiKind::Chi2 => {
            if s > 1.0 {
                f64::INFINITY
            } else {
                2.0 - 2.0 * (1.0 - s).sqrt()
            }
        }
        PhiKind::ModifiedChi2 => {
            if s < -2.0 {
                -1.0
            } else {
                s + s * s / 4.0
            }
        }
        PhiKind::Hellinger => {
            if s >= 1.0 {
                f64::INFINITY
            } else {
                s / (1.0 - s)
            }
        }
        PhiKind::Tv => {
            if s < -1.0 {
                -1.0
            } else if s <= 1.0 {
                s
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Maximizes `p . psi` over the phi-divergence ball of radius theta.
pub fn phi_worst_case(q: &[f64], psi: &[f64], theta: f64, kind: PhiKind) -> Result<PhiWorstCase> {
    if q.len() != psi.len() {
        return Err(Error::LengthMismatch { left: q.len(), right: psi.len() });
    }
    validate_probability(q)?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter("theta must be >= 0".into()));
    }

    // The multiplier equations assume distinct psi values; break exact ties
    // by a deterministic nudge and report it.
    let mut psi = psi.to_vec();
    let mut ties_perturbed = false;
    for i in 0..psi.len() {
        for j in (i + 1)..psi.len() {
            if psi[i] == psi[j] {
                psi[j] += 1e-12 * (j + 1) as f64;
                ties_perturbed = true;
            }
        }
    }

    if theta == 0.0 {
        let objective = q.iter().zip(&psi).map(|(a, b)| a * b).sum();
        return Ok(PhiWorstCase {
            p_star: q.to_vec(),
            lambda_star: 0.0,
            beta_star: psi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            popped: None,
            objective,
            divergence: 0.0,
            ties_perturbed,
        });
    }
    if kind == PhiKind::Tv {
        return tv_worst_case(q, &psi, theta, ties_perturbed);
    }

    // Outer bisection on lambda against the divergence constraint.
    let solve_at = |lambda: f64| -> Result<(Vec<f64>, f64, Option<(usize, f64)>)> {
        solve_inner(q, &psi, lambda, kind)
    };
    let mut lambda_hi = 1.0;
    let mut grow = 0;
    loop {
        let (p, _, _) = solve_at(lambda_hi)?;
        if phi_divergence(&p, q, kind)? <= theta {
            break;
        }
        lambda_hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::BracketFailure("divergence multiplier bracket failed".into()));
        }
    }
    let mut lambda_lo = 1e-12;
    {
        // If even the tiniest multiplier satisfies the constraint, the ball
        // contains the unconstrained maximizer.
        let (p, beta, popped) = solve_at(lambda_lo)?;
        let d = phi_divergence(&p, q, kind)?;
        if d <= theta {
            let objective = p.iter().zip(&psi).map(|(a, b)| a * b).sum();
            return Ok(PhiWorstCase {
                p_star: p,
                lambda_star: 0.0,
                beta_star: beta,
                popped,
                objective,
                divergence: d,
                ties_perturbed,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lambda_lo + lambda_hi);
        let (p, _, _) = solve_at(mid)?;
        if phi_divergence(&p, q, kind)? > theta {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
        }
        if lambda_hi - lambda_lo < 1e-14 * (1.0 + lambda_hi) {
            break;
        }
    }
    let (p_star, beta_star, popped) = solve_at(lambda_hi)?;
    let divergence = phi_divergence(&p_star, q, kind)?;
    let objective = p_star.iter().zip(&psi).map(|(a, b)| a * b).sum();
    Ok(PhiWorstCase {
        p_star,
        lambda_star: lambda_hi,
        beta_star,
        popped,
        objective,
        divergence,
        ties_perturbed,
    })
}

/// Fixes lambda and finds beta so the masses sum to one. Support entries use
/// the conjugate subgradient; off-support mass can pop onto the best
/// off-support index when `lim phi(t)/t` is finite and beta is pinned at
/// `psi_jm - lambda * slope_inf`.
fn solve_inner(
    q: &[f64],
    psi: &[f64],
    lambda: f64,
    kind: PhiKind,
) -> Result<(Vec<f64>, f64, Option<(usize, f64)>)> {
    let slope_inf = kind.slope_at_infinity();
    let j_m = psi
        .iter()
        .enumerate()
        .filter(|(j, _)| q[*j] == 0.0)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j);

    let support_mass = |beta: f64| -> f64 {
        q.iter()
            .zip(psi)
            .filter(|(&qj, _)| qj > 0.0)
            .map(|(&qj, &pj)| qj * conjugate_derivative(kind, (pj - beta) / lambda))
            .sum()
    };

    // Domain floor for beta: arguments must stay inside dom(phi*).
    let psi_max_support = psi
        .iter()
        .zip(q)
        .filter(|(_, &qj)| qj > 0.0)
        .map(|(&pj, _)| pj)
        .fold(f64::NEG_INFINITY, f64::max);
    let domain_floor = match kind {
        PhiKind::Burg => psi_max_support,
        PhiKind::Chi2 | PhiKind::Hellinger => psi_max_support - lambda,
        _ => f64::NEG_INFINITY,
    };
    // Popping floor: beta may not drop below the level that activates j_m.
    let pop_floor = match (j_m, slope_inf.is_finite()) {
        (Some(jm), true) => psi[jm] - lambda * slope_inf,
        _ => f64::NEG_INFINITY,
    };
    let floor = domain_floor.max(pop_floor);

    // S(beta) decreases in beta; find S = 1 or pin beta at the floor.
    let psi_min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let psi_max = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut hi = psi_max + 1.0 + lambda;
    let mut grow = 0;
    while support_mass(hi) > 1.0 {
        hi = psi_max + (hi - psi_max) * 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::BracketFailure("simplex multiplier bracket failed".into()));
        }
    }
    // Probe the floor: domain floors are poles of the conjugate derivative,
    // so shrink the offset geometrically until the support mass clears one
    // (or provably cannot, in which case the remainder pops).
    let mut eps = 1e-8 * (1.0 + floor.abs());
    let mass_at_floor = if floor.is_finite() {
        let mut m = support_mass(floor + eps);
        while m < 1.0 && eps > 1e-280 {
            eps *= 1e-3;
            m = support_mass(floor + eps);
        }
        m
    } else {
        f64::INFINITY
    };

    let mut lo = if floor.is_finite() { floor + eps } else { psi_min - 1.0 - lambda };
    if !floor.is_finite() {
        let mut grow = 0;
        while support_mass(lo) < 1.0 {
            lo = psi_min - (psi_min - lo) * 2.0;
            grow += 1;
            if grow > 200 {
                return Err(Error::BracketFailure("simplex multiplier bracket failed".into()));
            }
        }
    }
    let (beta, popped_mass) = if mass_at_floor < 1.0 {
        // Support cannot carry the whole simplex: the remainder pops onto
        // j_m (only legal when the floor is the popping level).
        if pop_floor >= domain_floor && j_m.is_some() {
            (floor + eps, 1.0 - mass_at_floor)
        } else {
            return Err(Error::BracketFailure(
                "simplex constraint unattainable within the conjugate domain".into(),
            ));
        }
    } else {
        let mut blo = lo;
        let mut bhi = hi;
        for _ in 0..200 {
            let mid = 0.5 * (blo + bhi);
            if support_mass(mid) > 1.0 {
                blo = mid;
            } else {
                bhi = mid;
            }
            if bhi - blo < 1e-15 * (1.0 + bhi.abs()) {
                break;
            }
        }
        (bhi, 0.0)
    };

    let mut p: Vec<f64> = q
        .iter()
        .zip(psi)
        .map(|(&qj, &pj)| {
            if qj > 0.0 {
                qj * conjugate_derivative(kind, (pj - beta) / lambda)
            } else {
                0.0
            }
        })
        .collect();
    let mut popped = None;
    if popped_mass > 1e-15 {
        let jm = j_m.expect("popping requires an off-support index");
        p[jm] = popped_mass;
        popped = Some((jm, popped_mass));
    }
    // Normalize the float residue so downstream divergence checks are exact.
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for v in &mut p {
            *v /= total;
        }
    }
    Ok((p, beta, popped))
}


/// Total variation is a plain LP: move mass from the lowest-psi support
/// entries to the single best index, spending theta / 2 per unit moved.
fn tv_worst_case(
    q: &[f64],
    psi: &[f64],
    theta: f64,
    ties_perturbed: bool,
) -> Result<PhiWorstCase> {
    let n = q.len();
    let best = (0..n).max_by(|&a, &b| psi[a].total_cmp(&psi[b])).expect("nonempty");
    let mut p = q.to_vec();
    let mut movable = theta / 2.0;
    let mut order: Vec<usize> = (0..n).filter(|&j| j != best).collect();
    order.sort_by(|&a, &b| psi[a].total_cmp(&psi[b]));
    let mut marginal = psi[best];
    for j in order {
        if movable <= 0.0 {
            break;
        }
        let take = p[j].min(movable);
        if take > 0.0 {
            p[j] -= take;
            p[best] += take;
            movable -= take;
            marginal = psi[j];
        }
    }
    // Leftover budget means the constraint is slack and the multiplier dies.
    let lambda_star = if movable > 1e-15 { 0.0 } else { (psi[best] - marginal) / 2.0 };
    let divergence = phi_divergence(&p, q, PhiKind::Tv)?;
    let objective = p.iter().zip(psi).map(|(a, b)| a * b).sum();
    let popped = (q[best] == 0.0 && p[best] > 0.0).then_some((best, p[best]));
    Ok(PhiWorstCase {
        p_star: p,
        lambda_star,
        beta_star: psi[best] - lambda_star,
        popped,
        objective,
        divergence,
        ties_perturbed,
    })
}

/// Seeded demand-sample generators for the baseline comparison harness.
pub mod harness {
    use super::*;

    /// Binomial(trials, 0.5) draws.
    pub fn binomial_samples(n: usize, trials: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..trials).filter(|_| rng.random::<f64>() < 0.5).count() as f64
            })
            .collect()
    }

    /// Geometric(rho) truncated to [0, cap] by rejection.
    pub fn truncated_geometric_samples(n: usize, rho: f64, cap: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let u: f64 = rng.random();
            let g = (u.ln() / (1.0 - rho).ln()).floor();
            if g <= cap as f64 {
                out.push(g);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Numerical conjugate by golden-section over the mass ratio.
    fn numeric_conjugate(kind: PhiKind, s: f64) -> f64 {
        let f = |t: f64| -(s * t - kind.phi(t));
        let (lo, hi) = crate::numeric::golden_section(&f, 0.0, 1e4, 1e-10);
        let t = 0.5 * (lo + hi);
        s * t - kind.phi(t)
    }

    #[test]
    fn conjugates_match_numeric_search() {
        for kind in PhiKind::ALL {
            for s in [-3.0, -1.5, -0.5, 0.0, 0.5, 0.9] {
                let closed = conjugate_value(kind, s);
                if !closed.is_finite() {
                    continue;
                }
                let numeric = numeric_conjugate(kind, s);
                assert!(
                    (closed - numeric).abs() < 1e-8,
                    "{kind:?} at s = {s}: closed {closed} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn zero_radius_returns_nominal() {
        for kind in PhiKind::ALL {
            let r = phi_worst_case(&[0.3, 0.7], &[1.0, 2.0], 0.0, kind).unwrap();
            assert_eq!(r.p_star, vec![0.3, 0.7]);
        }
    }

    #[test]
    fn kl_two_point_matches_exponential_tilt() {
        // Grid search over the 1-simplex as the independent oracle.
        let q = [0.5, 0.5];
        let psi = [0.0, 1.0];
        let theta = 0.1;
        let r = phi_worst_case(&q, &psi, theta, PhiKind::Kl).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut best_p1 = 0.0;
        for k in 0..=100_000 {
            let p1 = k as f64 / 100_000.0;
            let p = [1.0 - p1, p1];
            if phi_divergence(&p, &q, PhiKind::Kl).unwrap() <= theta {
                let v = p[1] * psi[1];
                if v > best {
                    best = v;
                    best_p1 = p1;
                }
            }
        }
        assert!((r.objective - best).abs() < 1e-4, "{} vs {best}", r.objective);
        assert!((r.p_star[1] - best_p1).abs() < 1e-3);
        assert!((r.divergence - theta).abs() < 1e-8);
        // KL keeps the worst case absolutely continuous.
        assert!(r.popped.is_none());
    }

    #[test]
    fn burg_pops_mass_onto_off_support_maximum() {
        // Index 2 has no nominal mass but the best value; Burg entropy lets
        // mass appear there at zero marginal divergence once beta pins.
        let q = [0.6, 0.4, 0.0];
        let psi = [0.0, 1.0, 5.0];
        let r = phi_worst_case(&q, &psi, 0.5, PhiKind::Burg).unwrap();
        let (jm, mass) = r.popped.expect("expected popped mass");
        assert_eq!(jm, 2);
        assert!(mass > 0.01, "popped mass = {mass}");
        assert!((r.divergence - 0.5).abs() < 1e-8);
    }

    #[test]
    fn kl_forbids_off_support_mass() {
        let q = [0.6, 0.4, 0.0];
        let psi = [0.0, 1.0, 5.0];
        let r = phi_worst_case(&q, &psi, 0.5, PhiKind::Kl).unwrap();
        assert_eq!(r.p_star[2], 0.0);
    }

    #[test]
    fn tv_moves_cheapest_mass_to_peak() {
        let q = [0.5, 0.3, 0.2];
        let psi = [0.0, 1.0, 2.0];
        let r = phi_worst_case(&q, &psi, 0.4, PhiKind::Tv).unwrap();
        // theta/2 = 0.2 of mass moves from psi = 0 to psi = 2.
        assert!((r.p_star[0] - 0.3).abs() < 1e-12);
        assert!((r.p_star[2] - 0.4).abs() < 1e-12);
        assert!((r.divergence - 0.4).abs() < 1e-12);
    }

    #[test]
    fn harness_samplers_are_seeded() {
        let a = harness::binomial_samples(50, 100, 7);
        let b = harness::binomial_samples(50, 100, 7);
        assert_eq!(a, b);
        let g = harness::truncated_geometric_samples(50, 0.1, 100, 7);
        assert!(g.iter().all(|&x| (0.0..=100.0).contains(&x)));
    }
}
