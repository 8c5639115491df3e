use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::PointSpace;

/// Raises a nonnegative base to the transport order, using exact paths for
/// the common orders so repeated evaluation stays bit-reproducible.
pub fn pow_order(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

/// The metric family on support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    L1,
    Linf,
    /// |x - y| on 1-D supports.
    #[serde(rename = "absolute-1d")]
    Absolute1d,
    /// 0/1 metric; the induced order-1 transport distance is Total Variation.
    Discrete,
    /// Pairwise distances given explicitly, indexed like the point space.
    ExplicitMatrix {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        allow_asymmetric: bool,
    },
}

/// Ground metric `d` together with the transport order `p >= 1`.
///
/// Transport costs are `d^p`; distances between distributions take the final
/// `1/p` root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundMetric {
    pub kind: MetricKind,
    pub order: f64,
}

impl GroundMetric {
    pub fn new(kind: MetricKind, order: f64) -> Result<Self> {
        if !(order >= 1.0) || !order.is_finite() {
            return Err(Error::InvalidParameter(format!("order p must be >= 1, got {order}")));
        }
        if let MetricKind::ExplicitMatrix { matrix, allow_asymmetric } = &kind {
            validate_matrix(matrix, *allow_asymmetric)?;
        }
        Ok(Self { kind, order })
    }

    pub fn euclidean(order: f64) -> Result<Self> {
        Self::new(MetricKind::Euclidean, order)
    }

    pub fn absolute_1d(order: f64) -> Result<Self> {
        Self::new(MetricKind::Absolute1d, order)
    }

    pub fn discrete(order: f64) -> Result<Self> {
        Self::new(MetricKind::Discrete, order)
    }

    /// Distance between raw coordinate vectors. Explicit matrices have no
    /// coordinate form and must go through [`GroundMetric::distance`].
    pub fn distance_coords(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        match &self.kind {
            MetricKind::Euclidean => {
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            MetricKind::L1 => Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()),
            MetricKind::Linf => {
                Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            }
            MetricKind::Absolute1d => {
                if a.len() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: a.len() });
                }
                Ok((a[0] - b[0]).abs())
            }
            MetricKind::Discrete => Ok(if a == b { 0.0 } else { 1.0 }),
            MetricKind::ExplicitMatrix { .. } => Err(Error::InvalidMetric(
                "explicit-matrix metric requires point indices, not coordinates".into(),
            )),
        }
    }

    /// Distance between two indexed points of `space`.
    pub fn distance(&self, space: &PointSpace, i: usize, j: usize) -> f64 {
        match &self.kind {
            MetricKind::ExplicitMatrix { matrix, .. } => matrix[i][j],
            _ => self
                .distance_coords(space.point(i), space.point(j))
                .expect("coordinate metric on a shared space"),
        }
    }

    /// Transport cost `d(i,j)^p`.
    pub fn cost(&self, space: &PointSpace, i: usize, j: usize) -> f64 {
        pow_order(self.distance(space, i, j), self.order)
    }

    /// Checks an explicit matrix is sized for `space`.
    pub fn compatible_with(&self, space: &PointSpace) -> Result<()> {
        if let MetricKind::ExplicitMatrix { matrix, .. } = &self.kind {
            if matrix.len() != space.len() {
                return Err(Error::LengthMismatch { left: matrix.len(), right: space.len() });
            }
        }
        Ok(())
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.kind, MetricKind::ExplicitMatrix { .. })
    }
}

fn validate_matrix(matrix: &[Vec<f64>], allow_asymmetric: bool) -> Result<()> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::EmptyInput("cost matrix"));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidMetric(format!("row {i} has length {}, want {n}", row.len())));
        }
        if matrix[i][i] != 0.0 {
            return Err(Error::InvalidMetric(format!("nonzero diagonal at {i}")));
        }
        for (j, &v) in row.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidMetric(format!("negative or non-finite entry at ({i},{j})")));
            }
            if !allow_asymmetric && (v - matrix[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::InvalidMetric(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    // Triangle inequality, checked exhaustively at construction.
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if matrix[i][j] > matrix[i][k] + matrix[k][j] + 1e-9 {
                    return Err(Error::InvalidMetric(format!(
                        "triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_below_one_rejected() {
        assert!(GroundMetric::euclidean(0.5).is_err());
    }

    #[test]
    fn explicit_matrix_validation() {
        let good = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(GroundMetric::new(
            MetricKind::ExplicitMatrix { matrix: good, allow_asymmetric: false },
            1.0
        )
        .is_ok());

        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(GroundMetric::new(
            MetricKind::ExplicitMatrix { matrix: asym.clone(), allow_asymmetric: false },
            1.0
        )
        .is_err());
        // Accepted behind the flag; no metric guarantees claimed.
        assert!(GroundMetric::new(
            MetricKind::ExplicitMatrix { matrix: asym, allow_asymmetric: true },
            1.0
        )
        .is_ok());

        let no_triangle = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        assert!(GroundMetric::new(
            MetricKind::ExplicitMatrix { matrix: no_triangle, allow_asymmetric: false },
            1.0
        )
        .is_err());
    }

    #[test]
    fn coordinate_kinds() {
        let m = GroundMetric::euclidean(2.0).unwrap();
        assert!((m.distance_coords(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
        let m = GroundMetric::new(MetricKind::L1, 1.0).unwrap();
        assert!((m.distance_coords(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 7.0).abs() < 1e-15);
        let m = GroundMetric::new(MetricKind::Linf, 1.0).unwrap();
        assert!((m.distance_coords(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
        let m = GroundMetric::discrete(1.0).unwrap();
        assert_eq!(m.distance_coords(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(m.distance_coords(&[1.0], &[2.0]).unwrap(), 1.0);
    }
}
