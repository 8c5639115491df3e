//! Seeded random problem instances shared by the property and acceptance
//! suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use drso_core::{
    DiscreteDistribution, GroundMetric, MetricKind, Objective, PointSpace, WassersteinBall,
};

pub struct RandomInstance {
    pub ball: WassersteinBall,
    pub objective: Objective,
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Distinct random points in [-3, 3]^dim.
pub fn random_points(rng: &mut ChaCha12Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    points
}

pub fn random_metric(rng: &mut ChaCha12Rng, points: &[Vec<f64>], order: f64) -> GroundMetric {
    let dim = points[0].len();
    let choice = rng.random_range(0..5u32);
    let kind = match choice {
        0 => MetricKind::Euclidean,
        1 => MetricKind::L1,
        2 => MetricKind::Linf,
        3 => MetricKind::Discrete,
        _ => {
            if dim == 1 && choice == 4 {
                MetricKind::Absolute1d
            } else {
                // Random metric with guaranteed triangle inequality: distances
                // of a random embedding, scaled.
                let scale = 0.5 + rng.random::<f64>();
                let n = points.len();
                let mut matrix = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d = points[i]
                            .iter()
                            .zip(&points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                            * scale;
                        matrix[i][j] = d;
                        matrix[j][i] = d;
                    }
                }
                MetricKind::ExplicitMatrix { matrix, allow_asymmetric: false }
            }
        }
    };
    GroundMetric::new(kind, order).expect("generated metric is valid")
}

/// A small solvable instance: finite candidate set, random nominal atoms,
/// random bounded objective table.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut r = rng(seed);
    let dim = 1 + (r.random_range(0..3u32) as usize % 3);
    let n_candidates = r.random_range(4..=20usize);
    let n_atoms = r.random_range(1..=5usize).min(n_candidates);
    let order = if r.random::<bool>() { 1.0 } else { 2.0 };

    let points = random_points(&mut r, n_candidates, dim);
    let metric = random_metric(&mut r, &points, order);
    let space = PointSpace::new(points).expect("distinct points");

    let mut indices: Vec<usize> = (0..n_candidates).collect();
    for i in (1..indices.len()).rev() {
        let j = r.random_range(0..=i);
        indices.swap(i, j);
    }
    indices.truncate(n_atoms);
    let uniform = r.random::<bool>();
    let raw: Vec<f64> = (0..n_atoms)
        .map(|_| if uniform { 1.0 } else { 0.05 + r.random::<f64>() })
        .collect();
    let total: f64 = raw.iter().sum();
    let atoms: Vec<(usize, f64)> =
        indices.iter().zip(&raw).map(|(&i, &w)| (i, w / total)).collect();
    let nominal = DiscreteDistribution::new(space, atoms).expect("valid weights");

    let theta = r.random::<f64>() * 1.5;
    let ball = WassersteinBall::new(nominal, metric, theta).expect("valid ball");
    let table: Vec<f64> =
        (0..n_candidates).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
    let objective = Objective::from_table(table).expect("valid table");
    RandomInstance { ball, objective }
}

/// Random small distribution pair on a shared 1-D support, for transport
/// tests.
pub fn random_pair_1d(
    seed: u64,
    max_atoms: usize,
) -> (DiscreteDistribution, DiscreteDistribution) {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_atoms);
    let points = random_points(&mut r, n, 1);
    let space = PointSpace::new(points).unwrap();
    let draw = |r: &mut ChaCha12Rng| {
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        DiscreteDistribution::from_weights(space.clone(), &weights).unwrap()
    };
    let mu = draw(&mut r);
    let nu = draw(&mut r);
    (mu, nu)
}
