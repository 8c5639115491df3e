use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::PointSpace;

/// Absolute slack allowed between the weight sum and 1 before rejecting.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A weighted atom of a discrete distribution, indexing into a `PointSpace`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    pub weight: f64,
}

/// A finite discrete probability measure over a `PointSpace`.
///
/// The space plays the role of the full candidate set: the measure may give
/// zero weight to most of it. Weights are renormalized when their sum is
/// within [`WEIGHT_SUM_TOL`] of 1 and rejected otherwise; atoms pointing at
/// the same support point are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    space: PointSpace,
    atoms: Vec<Atom>,
}

impl DiscreteDistribution {
    pub fn new(space: PointSpace, atoms: Vec<(usize, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("distribution atoms"));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (index, weight) in atoms {
            if index >= space.len() {
                return Err(Error::InvalidParameter(format!(
                    "atom index {index} out of bounds for space of {} points",
                    space.len()
                )));
            }
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(Error::InvalidWeights(format!("weight {weight} at index {index}")));
            }
            match merged.iter_mut().find(|a| a.index == index) {
                Some(a) => a.weight += weight,
                None => merged.push(Atom { index, weight }),
            }
        }
        let sum: f64 = merged.iter().map(|a| a.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        for a in &mut merged {
            a.weight /= sum;
        }
        Ok(Self { space, atoms: merged })
    }

    /// Distribution from one weight per space point; zero weights are kept out
    /// of the atom list but the point stays available as a candidate.
    pub fn from_weights(space: PointSpace, weights: &[f64]) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::LengthMismatch { left: weights.len(), right: space.len() });
        }
        let atoms = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        Self::new(space, atoms)
    }

    /// Point mass at one support point.
    pub fn dirac(space: PointSpace, index: usize) -> Result<Self> {
        Self::new(space, vec![(index, 1.0)])
    }

    /// Empirical measure: `1/n` at each listed index (duplicates merge).
    pub fn empirical(space: PointSpace, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("empirical sample"));
        }
        let w = 1.0 / indices.len() as f64;
        Self::new(space, indices.iter().map(|&i| (i, w)).collect())
    }

    pub fn space(&self) -> &PointSpace {
        &self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight_of(&self, index: usize) -> f64 {
        self.atoms.iter().find(|a| a.index == index).map_or(0.0, |a| a.weight)
    }

    /// Expectation of a per-point table under this measure, summed in atom
    /// order for reproducibility.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.atoms.iter().map(|a| a.weight * values[a.index]).sum()
    }

    /// Dense weight vector over the whole space.
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.space.len()];
        for a in &self.atoms {
            w[a.index] = a.weight;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space3() -> PointSpace {
        PointSpace::new(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap()
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let d = DiscreteDistribution::new(space3(), vec![(0, 0.5), (1, 0.5 + 5e-13)]).unwrap();
        let sum: f64 = d.atoms().iter().map(|a| a.weight).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sum_and_negative() {
        assert!(DiscreteDistribution::new(space3(), vec![(0, 0.5), (1, 0.6)]).is_err());
        assert!(DiscreteDistribution::new(space3(), vec![(0, -0.1), (1, 1.1)]).is_err());
    }

    #[test]
    fn merges_repeated_indices() {
        let d = DiscreteDistribution::new(space3(), vec![(1, 0.25), (1, 0.25), (0, 0.5)]).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.weight_of(1) - 0.5).abs() < 1e-15);
    }
}
