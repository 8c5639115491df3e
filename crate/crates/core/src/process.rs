//! Robust on/off control of an exogenous point process on [0, 1].
//!
//! A control is a disjoint union of closed intervals; it pays `c` per unit
//! of on-time and earns one unit per arrival while on. Against a ball of
//! point processes around the empirical paths, the adversary deletes
//! in-interval arrivals by pushing them to the nearest interval endpoint,
//! cheapest first, under a total budget of `N theta`; the greedy matches the
//! inner linear program exactly. The outer search over interval controls is
//! a deterministic local search and is a heuristic: global optimality is not
//! claimed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{solve, DenseLp};

/// One observed path: sorted arrival times in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub arrivals: Vec<f64>,
}

impl SamplePath {
    pub fn new(mut arrivals: Vec<f64>) -> Result<Self> {
        if arrivals.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > 1.0) {
            return Err(Error::InvalidParameter("arrival times must lie in [0,1]".into()));
        }
        arrivals.sort_by(f64::total_cmp);
        Ok(Self { arrivals })
    }
}

/// On-intervals, pairwise disjoint with strict gaps, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPolicy {
    pub intervals: Vec<(f64, f64)>,
}

impl ControlPolicy {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &intervals {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "interval [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"
                )));
            }
        }
        for w in intervals.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(Error::InvalidParameter(format!(
                    "intervals [{}, {}] and [{}, {}] are not strictly disjoint",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn on_length(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Index of the interval containing `t` (closed intervals).
    pub fn containing(&self, t: f64) -> Option<usize> {
        self.intervals.iter().position(|&(lo, hi)| lo <= t && t <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    Lo,
    Hi,
}

/// One adversarial deletion: an in-interval arrival pushed to an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub path: usize,
    pub arrival: usize,
    pub interval: usize,
    pub endpoint: Endpoint,
    /// Fraction of the arrival removed, in [0, 1].
    pub fraction: f64,
    pub exit_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyTransport {
    pub removals: Vec<Removal>,
    /// Sum of fraction-weighted exit distances; at most `N theta`.
    pub total_exit_cost: f64,
    /// Probability mass removed: sum of fractions over N.
    pub removed_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlValue {
    pub value: f64,
    pub on_length: f64,
    /// Empirical in-interval arrivals per path, averaged.
    pub inside_mass: f64,
    pub transport: GreedyTransport,
}

/// Worst-case profit of a control: `-c * on_length + inside - removed`,
/// with deletions chosen greedily by exit distance.
pub fn evaluate_control(
    control: &ControlPolicy,
    paths: &[SamplePath],
    theta: f64,
    cost_rate: f64,
) -> Result<ControlValue> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("sample paths"));
    }
    if !(theta >= 0.0) || !(cost_rate >= 0.0) {
        return Err(Error::InvalidParameter("theta and cost rate must be >= 0".into()));
    }
    let n = paths.len() as f64;

    struct Hit {
        path: usize,
        arrival: usize,
        interval: usize,
        endpoint: Endpoint,
        distance: f64,
    }
    let mut hits: Vec<Hit> = Vec::new();
    for (pi, path) in paths.iter().enumerate() {
        for (ai, &t) in path.arrivals.iter().enumerate() {
            if let Some(j) = control.containing(t) {
                let (lo, hi) = control.intervals[j];
                let (endpoint, distance) = if t - lo <= hi - t {
                    (Endpoint::Lo, t - lo)
                } else {
                    (Endpoint::Hi, hi - t)
                };
                hits.push(Hit { path: pi, arrival: ai, interval: j, endpoint, distance });
            }
        }
    }
    let inside_mass = hits.len() as f64 / n;
    hits.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.path.cmp(&b.path))
            .then(a.arrival.cmp(&b.arrival))
    });

    let budget = n * theta;
    let mut spent = 0.0;
    let mut removals = Vec::new();
    for h in &hits {
        let left = budget - spent;
        if left <= 0.0 {
            break;
        }
        let fraction = if h.distance <= 1e-15 {
            1.0
        } else {
            (left / h.distance).min(1.0)
        };
        let fraction = if fraction > 1.0 - 1e-12 { 1.0 } else { fraction };
        spent += fraction * h.distance;
        removals.push(Removal {
            path: h.path,
            arrival: h.arrival,
            interval: h.interval,
            endpoint: h.endpoint,
            fraction,
            exit_distance: h.distance,
        });
        if fraction < 1.0 {
            break;
        }
    }
    let removed_mass: f64 = removals.iter().map(|r| r.fraction).sum::<f64>() / n;
    let transport =
        GreedyTransport { removals, total_exit_cost: spent, removed_mass };
    Ok(ControlValue {
        value: -cost_rate * control.on_length() + inside_mass - removed_mass,
        on_length: control.on_length(),
        inside_mass,
        transport,
    })
}

/// Cap on LP decision variables for the validation oracle.
pub const INNER_LP_BUDGET: usize = 5_000;

/// Exact removed mass by LP, for validating the greedy.
pub fn inner_lp_oracle(control: &ControlPolicy, paths: &[SamplePath], theta: f64) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("sample paths"));
    }
    let n = paths.len() as f64;
    // Two variables per in-interval arrival: push-to-lo and push-to-hi.
    let mut costs: Vec<(f64, f64)> = Vec::new();
    for path in paths {
        for &t in &path.arrivals {
            if let Some(j) = control.containing(t) {
                let (lo, hi) = control.intervals[j];
                costs.push((t - lo, hi - t));
            }
        }
    }
    let vars = 2 * costs.len();
    if vars > INNER_LP_BUDGET {
        return Err(Error::BudgetExceeded { size: vars, budget: INNER_LP_BUDGET });
    }
    if costs.is_empty() {
        return Ok(0.0);
    }
    let mut ub: Vec<(Vec<f64>, f64)> = Vec::new();
    for (k, _) in costs.iter().enumerate() {
        let mut row = vec![0.0; vars];
        row[2 * k] = 1.0;
        row[2 * k + 1] = 1.0;
        ub.push((row, 1.0));
    }
    let mut budget_row = vec![0.0; vars];
    for (k, &(dl, dh)) in costs.iter().enumerate() {
        budget_row[2 * k] = dl / n;
        budget_row[2 * k + 1] = dh / n;
    }
    ub.push((budget_row, theta));
    let objective = vec![1.0 / n; vars];
    let sol = solve(&DenseLp { objective, eq: vec![], ub })?;
    Ok(sol.value)
}

/// Knobs for the outer control search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Endpoint offsets are `k * theta` for `k = 0..=offset_multiples`.
    pub offset_multiples: usize,
    /// Bins for the density-scan starting control.
    pub scan_bins: usize,
    pub max_rounds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { offset_multiples: 3, scan_bins: 25, max_rounds: 400 }
    }
}

/// Deterministic local search over interval controls with endpoints on a
/// candidate grid built from the data. Heuristic by design.
pub fn optimize_control(
    paths: &[SamplePath],
    theta: f64,
    cost_rate: f64,
    options: &SearchOptions,
) -> Result<(ControlPolicy, ControlValue)> {
    let mut data: Vec<f64> = paths.iter().flat_map(|p| p.arrivals.iter().copied()).collect();
    if data.is_empty() {
        return Err(Error::EmptyInput("no arrivals across paths"));
    }
    data.sort_by(f64::total_cmp);
    data.dedup();

    // Candidate endpoints: data points with theta offsets, midpoints, bin
    // edges, and the horizon ends.
    let mut candidates: Vec<f64> = vec![0.0, 1.0];
    for &t in &data {
        for k in 0..=options.offset_multiples {
            let off = k as f64 * theta;
            candidates.push((t - off).clamp(0.0, 1.0));
            candidates.push((t + off).clamp(0.0, 1.0));
        }
    }
    for w in data.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    for k in 0..=options.scan_bins {
        candidates.push(k as f64 / options.scan_bins as f64);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let evaluate = |c: &ControlPolicy| -> Result<f64> {
        Ok(evaluate_control(c, paths, theta, cost_rate)?.value)
    };

    // Starting controls: empty, density scan, and data clusters.
    let mut starts: Vec<ControlPolicy> = vec![ControlPolicy::empty()];
    starts.push(density_scan_control(paths, cost_rate, options.scan_bins));
    starts.push(cluster_control(&data, theta));

    let mut best: (ControlPolicy, f64) = (ControlPolicy::empty(), 0.0);
    for start in starts {
        let tuned = local_search(start, &candidates, &data, theta, &evaluate, options.max_rounds)?;
        let v = evaluate(&tuned)?;
        if v > best.1 + 1e-12 {
            best = (tuned, v);
        }
    }
    let control = prune_empty_intervals(best.0, &data, theta);
    let value = evaluate_control(&control, paths, theta, cost_rate)?;
    Ok((control, value))
}

/// Bins the empirical rate and switches on every bin whose arrivals out-earn
/// the cost of keeping it on.
fn density_scan_control(paths: &[SamplePath], cost_rate: f64, bins: usize) -> ControlPolicy {
    let n = paths.len() as f64;
    let width = 1.0 / bins as f64;
    let mut counts = vec![0.0; bins];
    for path in paths {
        for &t in &path.arrivals {
            let b = ((t / width) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
    }
    let mut intervals = Vec::new();
    let mut open: Option<usize> = None;
    for b in 0..bins {
        let profitable = counts[b] / n > cost_rate * width;
        if profitable && open.is_none() {
            open = Some(b);
        }
        if !profitable {
            if let Some(s) = open.take() {
                intervals.push((s as f64 * width, b as f64 * width));
            }
        }
    }
    if let Some(s) = open {
        intervals.push((s as f64 * width, 1.0));
    }
    ControlPolicy::new(intervals).unwrap_or_else(|_| ControlPolicy::empty())
}

/// Micro-intervals around clusters of arrivals separated by more than 2
/// theta plus a small gap.
fn cluster_control(data: &[f64], theta: f64) -> ControlPolicy {
    let gap = 2.0 * theta + 1e-3;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut lo = data[0];
    let mut hi = data[0];
    for &t in &data[1..] {
        if t - hi > gap {
            intervals.push((lo, hi));
            lo = t;
        }
        hi = t;
    }
    intervals.push((lo, hi));
    let padded: Vec<(f64, f64)> = intervals
        .iter()
        .map(|&(a, b)| ((a - theta).max(0.0), (b + theta).min(1.0)))
        .filter(|&(a, b)| a < b)
        .collect();
    merge_overlaps(padded)
}

fn merge_overlaps(mut intervals: Vec<(f64, f64)>) -> ControlPolicy {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    ControlPolicy::new(merged).unwrap_or_else(|_| ControlPolicy::empty())
}

/// Best-improvement moves: slide an endpoint to a neighboring candidate,
/// drop an interval, or merge two adjacent ones. Ties go to the earliest
/// generated move.
fn local_search(
    start: ControlPolicy,
    candidates: &[f64],
    data: &[f64],
    theta: f64,
    evaluate: &dyn Fn(&ControlPolicy) -> Result<f64>,
    max_rounds: usize,
) -> Result<ControlPolicy> {
    let mut current = start;
    let mut current_value = evaluate(&current)?;
    for _ in 0..max_rounds {
        let mut best_move: Option<(ControlPolicy, f64)> = None;
        let consider = |c: ControlPolicy, best: &mut Option<(ControlPolicy, f64)>| {
            if let Ok(v) = evaluate(&c) {
                if best.as_ref().map_or(v > current_value + 1e-12, |(_, bv)| v > *bv + 1e-12) {
                    *best = Some((c, v));
                }
            }
        };
        let m = current.intervals.len();
        for j in 0..m {
            let (lo, hi) = current.intervals[j];
            for (side, point) in [(0, lo), (1, hi)] {
                let pos = candidates.partition_point(|&c| c < point);
                for next in [pos.saturating_sub(1), pos, pos + 1, pos.saturating_sub(2), pos + 2] {
                    if next >= candidates.len() {
                        continue;
                    }
                    let cand = candidates[next];
                    let mut ivs = current.intervals.clone();
                    if side == 0 {
                        ivs[j].0 = cand;
                    } else {
                        ivs[j].1 = cand;
                    }
                    if let Ok(c) = ControlPolicy::new(ivs) {
                        consider(c, &mut best_move);
                    }
                }
            }
        }
        for j in 0..m {
            let mut ivs = current.intervals.clone();
            ivs.remove(j);
            if let Ok(c) = ControlPolicy::new(ivs) {
                consider(c, &mut best_move);
            }
        }
        for j in 0..m.saturating_sub(1) {
            let mut ivs = current.intervals.clone();
            let merged = (ivs[j].0, ivs[j + 1].1);
            ivs.remove(j + 1);
            ivs[j] = merged;
            if let Ok(c) = ControlPolicy::new(ivs) {
                consider(c, &mut best_move);
            }
        }
        match best_move {
            Some((c, v)) => {
                current = prune_empty_intervals(c, data, theta);
                current_value = v;
            }
            None => break,
        }
    }
    Ok(current)
}

/// Intervals with no data point only burn cost when theta > 0; drop them.
fn prune_empty_intervals(control: ControlPolicy, data: &[f64], theta: f64) -> ControlPolicy {
    if theta <= 0.0 {
        return control;
    }
    let kept: Vec<(f64, f64)> = control
        .intervals
        .into_iter()
        .filter(|&(lo, hi)| data.iter().any(|&t| lo <= t && t <= hi))
        .collect();
    ControlPolicy { intervals: kept }
}

/// Sinusoidal arrival intensity: rate `lambda`, density
/// `f(t) = k (a + sin(w t + s))` normalized on [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinusoidalModel {
    pub rate: f64,
    pub w: f64,
    pub s: f64,
    pub a: f64,
}

impl SinusoidalModel {
    /// The configuration whose profitable region is three disjoint bands.
    pub fn bands_experiment() -> Self {
        Self {
            rate: 10.0,
            w: 5.0 * std::f64::consts::PI,
            s: 2.5 * std::f64::consts::PI,
            a: 1.1,
        }
    }

    fn normalizer(&self) -> f64 {
        1.0 / (self.a + (self.s.cos() - (self.w + self.s).cos()) / self.w)
    }

    pub fn density(&self, t: f64) -> f64 {
        self.normalizer() * (self.a + (self.w * t + self.s).sin())
    }

    /// CDF of the arrival-time density.
    pub fn cdf(&self, t: f64) -> f64 {
        self.normalizer() * (self.a * t + (self.s.cos() - (self.w * t + self.s).cos()) / self.w)
    }

    /// Where switching on is profitable under the true model:
    /// `{ t : rate * f(t) > cost_rate }` as a union of intervals.
    pub fn profitable_region(&self, cost_rate: f64, resolution: usize) -> Vec<(f64, f64)> {
        let mut intervals = Vec::new();
        let mut open: Option<f64> = None;
        for k in 0..=resolution {
            let t = k as f64 / resolution as f64;
            let on = self.rate * self.density(t) > cost_rate;
            match (on, open) {
                (true, None) => open = Some(t),
                (false, Some(lo)) => {
                    intervals.push((lo, (k - 1) as f64 / resolution as f64));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(lo) = open {
            intervals.push((lo, 1.0));
        }
        intervals
    }

    /// Draws `n_paths` seeded sample paths: Poisson(rate) counts, arrival
    /// times i.i.d. from the density via inverse-CDF bisection.
    pub fn sample_paths(&self, n_paths: usize, seed: u64) -> Vec<SamplePath> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n_paths)
            .map(|_| {
                let count = poisson_draw(&mut rng, self.rate);
                let mut arrivals: Vec<f64> =
                    (0..count).map(|_| self.quantile(rng.random::<f64>())).collect();
                arrivals.sort_by(f64::total_cmp);
                SamplePath { arrivals }
            })
            .collect()
    }

    fn quantile(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn poisson_draw<R: Rng>(rng: &mut R, rate: f64) -> usize {
    // Inversion by sequential search; fine for moderate rates.
    let mut k = 0usize;
    let mut p = (-rate).exp();
    let mut cum = p;
    let u = rng.random::<f64>();
    while u > cum && k < 10_000 {
        k += 1;
        p *= rate / k as f64;
        cum += p;
    }
    k
}

/// |A intersect B| / |A union B| for unions of intervals, by fine scan.
pub fn jaccard_overlap(a: &[(f64, f64)], b: &[(f64, f64)], resolution: usize) -> f64 {
    let inside = |ivs: &[(f64, f64)], t: f64| ivs.iter().any(|&(lo, hi)| lo <= t && t <= hi);
    let mut inter = 0usize;
    let mut union = 0usize;
    for k in 0..resolution {
        let t = (k as f64 + 0.5) / resolution as f64;
        let ia = inside(a, t);
        let ib = inside(b, t);
        if ia && ib {
            inter += 1;
        }
        if ia || ib {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
