//! Data-driven radius selection from a transport concentration inequality.
//!
//! For samples on [0, b_bar], the probability that the empirical measure
//! drifts more than theta from the truth is at most
//!
//! ```text
//! max(8 e b_bar / delta, 1)^(b_bar / delta) * exp(-(lambda / 8) N (theta - delta)^2)
//! ```
//!
//! for any split point delta in (0, theta), where lambda is the constant of
//! the transport-entropy inequality, estimated from the data. The calibrated
//! radius is the smallest theta whose optimized bound hits the target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusCalibration {
    pub theta_star: f64,
    pub delta_star: f64,
    pub lambda: f64,
    pub achieved_bound: f64,
    /// (theta, bound) curve sampled on the search path, for plotting.
    pub curve: Vec<(f64, f64)>,
}

const DELTA_GRID: usize = 200;
const ALPHA_GRID: usize = 160;

/// Transport-entropy constant estimated from the empirical measure:
/// `lambda = [ inf_{zeta0, alpha > 0} (1/alpha) (1 + log E e^{alpha d^2(xi, zeta0)}) ]^{-1}`.
pub fn talagrand_lambda(samples: &[f64], b_bar: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let n = samples.len() as f64;
    let mut centers: Vec<f64> = samples.to_vec();
    centers.sort_by(f64::total_cmp);
    centers.dedup();

    // alpha beyond ~700 / b_bar^2 overflows exp(alpha d^2); stay below it.
    let alpha_max = 650.0 / (b_bar * b_bar).max(1e-12);
    let alpha_min = alpha_max * 1e-8;
    let ratio = (alpha_max / alpha_min).ln();
    let mut best = f64::INFINITY;
    for zeta in &centers {
        for k in 0..=ALPHA_GRID {
            let alpha = alpha_min * (ratio * k as f64 / ALPHA_GRID as f64).exp();
            let mgf: f64 =
                samples.iter().map(|x| (alpha * (x - zeta) * (x - zeta)).exp()).sum::<f64>() / n;
            let v = (1.0 + mgf.ln()) / alpha;
            if v < best {
                best = v;
            }
        }
    }
    Ok(1.0 / best)
}

/// The concentration bound at (theta, delta).
pub fn concentration_bound(theta: f64, delta: f64, b_bar: f64, n: usize, lambda: f64) -> f64 {
    let cover = (8.0 * std::f64::consts::E * b_bar / delta).max(1.0);
    let exponent = b_bar / delta;
    let tail = (-(lambda / 8.0) * n as f64 * (theta - delta) * (theta - delta)).exp();
    cover.powf(exponent) * tail
}

/// Best bound over the delta grid inside (0, theta).
fn optimized_bound(theta: f64, b_bar: f64, n: usize, lambda: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, theta * 0.5);
    for k in 1..=DELTA_GRID {
        let delta = theta * k as f64 / (DELTA_GRID + 1) as f64;
        let b = concentration_bound(theta, delta, b_bar, n, lambda);
        if b < best.0 {
            best = (b, delta);
        }
    }
    best
}

/// Smallest radius whose optimized bound equals `target`.
pub fn calibrate_radius(samples: &[f64], b_bar: f64, target: f64) -> Result<RadiusCalibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter("target must lie in (0,1)".into()));
    }
    if !(b_bar > 0.0) {
        return Err(Error::InvalidParameter("b_bar must be > 0".into()));
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > b_bar) {
        return Err(Error::InvalidParameter("samples must lie in [0, b_bar]".into()));
    }
    let n = samples.len();
    let lambda = talagrand_lambda(samples, b_bar)?;

    let mut curve = Vec::new();
    // Bracket: the bound is 1 at theta -> 0 and decreasing in theta; probe
    // geometrically, then fall back to the b_bar endpoint.
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    let mut probe = b_bar * 1e-3;
    while probe < b_bar {
        let (b, _) = optimized_bound(probe, b_bar, n, lambda);
        curve.push((probe, b));
        if b <= target {
            hi = probe;
            break;
        }
        lo = probe;
        probe = (probe * 2.0).min(b_bar);
        if probe == lo {
            break;
        }
    }
    if hi.is_nan() {
        let (b, _) = optimized_bound(b_bar, b_bar, n, lambda);
        curve.push((b_bar, b));
        if b <= target {
            hi = b_bar;
        } else {
            return Err(Error::BracketFailure(format!(
                "target {target} unreachable within theta <= b_bar = {b_bar} (best bound {b})"
            )));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (b, _) = optimized_bound(mid, b_bar, n, lambda);
        curve.push((mid, b));
        if b <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (achieved_bound, delta_star) = optimized_bound(hi, b_bar, n, lambda);
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve.dedup_by(|a, b| a.0 == b.0);
    Ok(RadiusCalibration { theta_star: hi, delta_star, lambda, achieved_bound, curve })
}
