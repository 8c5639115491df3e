//! Uncertainty quantification: the worst-case probability of an open region.
//!
//! The minimizing adversary moves interior atoms to the cheapest exterior
//! point, nearest exits first, until the transport budget runs out; at most
//! one atom is moved fractionally. Exit distances come from closed forms for
//! half-spaces and balls, or from an explicit exterior candidate grid.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::metric::{pow_order, GroundMetric};
use crate::numeric::lq_norm;
use crate::space::PointSpace;
use crate::worst_case::{TransportRecord, WorstCaseDistribution};

/// An open region with a boundary-distance oracle: for points inside, the
/// distance to the complement and a witness exit point.
pub trait Region {
    fn contains(&self, point: &[f64]) -> bool;
    /// Distance from an interior point to the complement (0 outside).
    fn exit_distance(&self, point: &[f64]) -> f64;
    /// A nearest attainable point of the complement.
    fn exit_point(&self, point: &[f64]) -> Vec<f64>;
}

/// Open half-space `normal . x < offset` under the Euclidean metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Region for HalfSpace {
    fn contains(&self, point: &[f64]) -> bool {
        dot(&self.normal, point) < self.offset
    }

    fn exit_distance(&self, point: &[f64]) -> f64 {
        let gap = self.offset - dot(&self.normal, point);
        if gap <= 0.0 {
            0.0
        } else {
            gap / lq_norm(&self.normal, 2.0)
        }
    }

    fn exit_point(&self, point: &[f64]) -> Vec<f64> {
        let norm2 = dot(&self.normal, &self.normal);
        let gap = self.offset - dot(&self.normal, point);
        if gap <= 0.0 {
            return point.to_vec();
        }
        // Overshoot by a relative hair so the witness is outside C even
        // after rounding.
        let t = gap * (1.0 + 1e-12) / norm2;
        point.iter().zip(&self.normal).map(|(x, n)| x + n * t).collect()
    }
}

/// Open Euclidean ball `|x - center| < radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Region for OpenBall {
    fn contains(&self, point: &[f64]) -> bool {
        dist2(point, &self.center).sqrt() < self.radius
    }

    fn exit_distance(&self, point: &[f64]) -> f64 {
        let d = dist2(point, &self.center).sqrt();
        (self.radius - d).max(0.0)
    }

    fn exit_point(&self, point: &[f64]) -> Vec<f64> {
        let d = dist2(point, &self.center).sqrt();
        if d >= self.radius {
            return point.to_vec();
        }
        // Land just past the boundary so the witness is outside C even
        // after rounding.
        let target = self.radius * (1.0 + 1e-12);
        if d < 1e-300 {
            // Center of the ball: exit along the first axis.
            let mut p = self.center.clone();
            p[0] += target;
            return p;
        }
        let scale = target / d;
        self.center
            .iter()
            .zip(point)
            .map(|(c, x)| c + (x - c) * scale)
            .collect()
    }
}

/// Arbitrary region described by an inside/outside flag per candidate point;
/// exits are the nearest outside candidates under the given metric.
#[derive(Debug, Clone)]
pub struct GridRegion<'a> {
    pub space: &'a PointSpace,
    pub inside: Vec<bool>,
    pub metric: GroundMetric,
}

impl Region for GridRegion<'_> {
    fn contains(&self, point: &[f64]) -> bool {
        self.space.find(point).map_or(false, |i| self.inside[i])
    }

    fn exit_distance(&self, point: &[f64]) -> f64 {
        let Some(i) = self.space.find(point) else { return 0.0 };
        if !self.inside[i] {
            return 0.0;
        }
        (0..self.space.len())
            .filter(|&j| !self.inside[j])
            .map(|j| self.metric.distance(self.space, i, j))
            .fold(f64::INFINITY, f64::min)
    }

    fn exit_point(&self, point: &[f64]) -> Vec<f64> {
        let Some(i) = self.space.find(point) else { return point.to_vec() };
        let mut best = (f64::INFINITY, i);
        for j in 0..self.space.len() {
            if !self.inside[j] {
                let d = self.metric.distance(self.space, i, j);
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        self.space.point(best.1).to_vec()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UqResult {
    /// `inf { mu(region) : W_p(mu, nu) <= theta }`.
    pub wc_probability: f64,
    pub worst_case: WorstCaseDistribution,
}

/// Greedy worst-case probability of an open region.
pub fn uq_solve(
    nominal: &DiscreteDistribution,
    region: &dyn Region,
    theta: f64,
    metric: &GroundMetric,
) -> Result<UqResult> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter("theta must be >= 0".into()));
    }
    if metric.is_explicit() {
        return Err(Error::InvalidMetric(
            "uncertainty quantification needs a coordinate metric".into(),
        ));
    }
    let space = nominal.space();
    let budget = pow_order(theta, metric.order);

    // Interior atoms sorted by exit distance, nearest first.
    struct Exit {
        atom: usize,
        distance: f64,
        point: Vec<f64>,
    }
    let mut exits: Vec<Exit> = Vec::new();
    let mut inside_mass = 0.0;
    for (i, atom) in nominal.atoms().iter().enumerate() {
        let p = space.point(atom.index);
        if region.contains(p) {
            inside_mass += atom.weight;
            let d = region.exit_distance(p);
            if d < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "region oracle returned negative exit distance {d}"
                )));
            }
            exits.push(Exit { atom: i, distance: d, point: region.exit_point(p) });
        }
    }
    exits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.atom.cmp(&b.atom)));

    // Join exit points into the candidate space for the output support.
    let exit_points: Vec<Vec<f64>> = exits.iter().map(|e| e.point.clone()).collect();
    let (augmented, exit_indices) = space.extend_with(&exit_points)?;

    let atoms = nominal.atoms();
    let mut moved_mass = 0.0;
    let mut remaining = budget;
    let mut moved_fraction = vec![0.0; atoms.len()];
    let mut exit_of_atom = vec![usize::MAX; atoms.len()];
    let mut split_atom = None;
    for (k, e) in exits.iter().enumerate() {
        if remaining <= 0.0 {
            break;
        }
        let w = atoms[e.atom].weight;
        // Budget accounting uses the witness point actually transported to,
        // so the plan cost adds up exactly.
        let d = metric
            .distance_coords(augmented.point(exit_indices[k]), space.point(atoms[e.atom].index))?;
        let full = w * pow_order(d, metric.order);
        exit_of_atom[e.atom] = exit_indices[k];
        let q = if full <= 1e-15 { 1.0 } else { (remaining / full).min(1.0) };
        let q = if q > 1.0 - 1e-12 { 1.0 } else { q };
        moved_fraction[e.atom] = q;
        moved_mass += q * w;
        remaining = (remaining - q * full).max(0.0);
        if q < 1.0 {
            split_atom = Some(e.atom);
            break;
        }
    }

    let mut transports: Vec<TransportRecord> = Vec::new();
    let mut masses: Vec<(usize, f64)> = Vec::new();
    let mut add_mass = |idx: usize, m: f64| {
        if m <= 0.0 {
            return;
        }
        match masses.iter_mut().find(|(x, _)| *x == idx) {
            Some((_, v)) => *v += m,
            None => masses.push((idx, m)),
        }
    };
    for (i, atom) in atoms.iter().enumerate() {
        let q = moved_fraction[i];
        if q > 0.0 {
            let dest = exit_of_atom[i];
            let cost = pow_order(
                metric.distance_coords(augmented.point(dest), space.point(atom.index))?,
                metric.order,
            );
            transports.push(TransportRecord {
                source_atom: i,
                source_index: atom.index,
                dest_index: dest,
                mass: atom.weight * q,
                fraction: q,
                cost,
            });
            add_mass(dest, atom.weight * q);
        }
        if q < 1.0 {
            transports.push(TransportRecord {
                source_atom: i,
                source_index: atom.index,
                dest_index: atom.index,
                mass: atom.weight * (1.0 - q),
                fraction: 1.0 - q,
                cost: 0.0,
            });
            add_mass(atom.index, atom.weight * (1.0 - q));
        }
    }
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    let distribution = DiscreteDistribution::new(
        augmented,
        masses.into_iter().map(|(x, m)| (x, m / total)).collect(),
    )?;
    let transport_cost: f64 = transports.iter().map(|t| t.mass * t.cost).sum();
    let wc_probability = inside_mass - moved_mass;
    Ok(UqResult {
        wc_probability,
        worst_case: WorstCaseDistribution {
            distribution,
            transports,
            split_atom,
            transport_cost,
            value: wc_probability,
        },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
