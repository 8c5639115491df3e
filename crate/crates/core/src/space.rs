use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of support points in R^s, shared by distributions and solvers.
///
/// Points are stored in construction order and addressed by index everywhere
/// else in the crate, so a `PointSpace` doubles as the candidate set over
/// which suprema and worst-case supports are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpace {
    points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    labels: Option<Vec<String>>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

impl PointSpace {
    /// Builds a space from raw coordinates. All points must share one
    /// dimension and be pairwise distinct.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("point space"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
        }
        // Duplicate detection by lexicographic sort; large grids make the
        // quadratic scan unusable.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                let (i, j) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::InvalidParameter(format!(
                    "duplicate support point at indices {i} and {j}"
                )));
            }
        }
        Ok(Self { points, labels: None })
    }

    /// Evenly spaced 1-D grid `lo, lo+step, ..., <= hi` (hi included when it
    /// lands on the grid).
    pub fn grid_1d(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(Error::InvalidParameter("grid requires hi > lo and step > 0".into()));
        }
        let n = ((hi - lo) / step).round() as usize;
        let points = (0..=n).map(|i| vec![lo + i as f64 * step]).collect();
        Self::new(points)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.points.len() {
            return Err(Error::LengthMismatch { left: labels.len(), right: self.points.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[index].as_str())
    }

    /// Index of a point with exactly these coordinates, if present.
    pub fn find(&self, coords: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == coords)
    }

    /// Appends points, skipping exact duplicates; returns the index of each
    /// requested point in the extended space.
    pub fn extend_with(&self, extra: &[Vec<f64>]) -> Result<(Self, Vec<usize>)> {
        let mut points = self.points.clone();
        let mut indices = Vec::with_capacity(extra.len());
        for q in extra {
            if q.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), got: q.len() });
            }
            match points.iter().position(|p| p == q) {
                Some(i) => indices.push(i),
                None => {
                    points.push(q.clone());
                    indices.push(points.len() - 1);
                }
            }
        }
        Ok((Self { points, labels: None }, indices))
    }
}
