//! Earth Mover's Distance between equal-size point clouds.
//!
//! `d(S1, S2) = min over bijections φ of Σ ||x − φ(x)||₂`. Two solvers find φ:
//! an exact shortest-augmenting-path assignment (used up to a size cap) and an
//! ε-scaling auction for larger clouds. [`emd_gradient`] gives the envelope
//! gradient at a fixed matching, which is what training and completion
//! back-propagate.

mod auction;
mod cloud;
mod exact;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auction::default_schedule;
pub use cloud::{CloudError, PointCloud};
pub(crate) use cloud::distance;

/// Largest cloud the exact solver accepts by default.
pub const EXACT_CAP: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("cardinality mismatch: {0} vs {1} points")]
    Cardinality(usize, usize),
    #[error("{n} points exceeds the exact solver cap of {cap}; use emd_approx")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
}

/// Bijection `assignment[i]` from points of the first cloud into the second,
/// with its total L2 cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub assignment: Vec<usize>,
    pub cost: f64,
}

impl Matching {
    fn from_assignment(a: &PointCloud, b: &PointCloud, assignment: Vec<usize>) -> Self {
        let cost = matching_cost(a, b, &assignment);
        Self { assignment, cost }
    }

    /// Checks that this is a permutation of `0..n` for clouds of size `n`.
    pub fn validate(&self, a: &PointCloud, b: &PointCloud) -> Result<(), TransportError> {
        if a.len() != b.len() {
            return Err(TransportError::Cardinality(a.len(), b.len()));
        }
        if self.assignment.len() != a.len() {
            return Err(TransportError::InvalidMatching(format!(
                "{} entries for {} points",
                self.assignment.len(),
                a.len()
            )));
        }
        let mut seen = vec![false; a.len()];
        for &j in &self.assignment {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return Err(TransportError::InvalidMatching(format!("target {j} out of range or repeated")));
            }
        }
        Ok(())
    }
}

/// `Σ_i ||a[i] − b[assignment[i]]||₂`, summed in index order.
pub fn matching_cost(a: &PointCloud, b: &PointCloud, assignment: &[usize]) -> f64 {
    a.points().iter().zip(assignment).map(|(p, &j)| distance(p, &b.points()[j])).sum()
}

/// Dense row-major matrix of pairwise L2 distances.
pub fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        cost.extend(b.points().iter().map(|q| distance(p, q)));
    }
    cost
}

fn check_sizes(a: &PointCloud, b: &PointCloud) -> Result<usize, TransportError> {
    if a.len() != b.len() {
        return Err(TransportError::Cardinality(a.len(), b.len()));
    }
    Ok(a.len())
}

/// Globally optimal matching, for clouds of at most [`EXACT_CAP`] points.
pub fn emd_exact(a: &PointCloud, b: &PointCloud) -> Result<Matching, TransportError> {
    emd_exact_with_cap(a, b, EXACT_CAP)
}

pub fn emd_exact_with_cap(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<Matching, TransportError> {
    let n = check_sizes(a, b)?;
    if n > cap {
        return Err(TransportError::TooLarge { n, cap });
    }
    let assignment = exact::solve(&cost_matrix(a, b), n);
    Ok(Matching::from_assignment(a, b, assignment))
}

/// ε values for [`emd_approx`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// See [`default_schedule`].
    #[default]
    Default,
    Explicit(Vec<f64>),
}

/// Auction-based matching; cost is within `n · ε_last` of the optimum.
pub fn emd_approx(a: &PointCloud, b: &PointCloud, schedule: &EpsilonSchedule) -> Result<Matching, TransportError> {
    let n = check_sizes(a, b)?;
    let cost = cost_matrix(a, b);
    let eps = match schedule {
        EpsilonSchedule::Default => default_schedule(&cost),
        EpsilonSchedule::Explicit(v) => v.iter().copied().filter(|e| *e > 0.0).collect(),
    };
    let assignment = auction::solve(&cost, n, &eps);
    Ok(Matching::from_assignment(a, b, assignment))
}

/// Which matching solver a caller wants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmdSolver {
    /// Exact up to [`EXACT_CAP`] points, auction above.
    #[default]
    Auto,
    Exact,
    Approx,
}

impl EmdSolver {
    pub fn solve(self, a: &PointCloud, b: &PointCloud) -> Result<Matching, TransportError> {
        match self {
            EmdSolver::Exact => emd_exact(a, b),
            EmdSolver::Approx => emd_approx(a, b, &EpsilonSchedule::Default),
            EmdSolver::Auto if a.len() <= EXACT_CAP => emd_exact(a, b),
            EmdSolver::Auto => emd_approx(a, b, &EpsilonSchedule::Default),
        }
    }

    /// True when this solver returns the global optimum for clouds of `n` points.
    pub fn is_exact_for(self, n: usize) -> bool {
        match self {
            EmdSolver::Exact => true,
            EmdSolver::Approx => false,
            EmdSolver::Auto => n <= EXACT_CAP,
        }
    }
}

/// Gradient of the matched cost with respect to each point of `b`, holding
/// the matching fixed: `(b[j] − a[φ⁻¹(j)]) / ||b[j] − a[φ⁻¹(j)]||`, or zero
/// where the matched points coincide.
pub fn emd_gradient(a: &PointCloud, b: &PointCloud, m: &Matching) -> Result<Vec<[f64; 3]>, TransportError> {
    m.validate(a, b)?;
    let mut grad = vec![[0.0f64; 3]; b.len()];
    for (p, &j) in a.points().iter().zip(&m.assignment) {
        let q = &b.points()[j];
        let d = distance(p, q);
        if d > 0.0 {
            grad[j] = [(q[0] - p[0]) / d, (q[1] - p[1]) / d, (q[2] - p[2]) / d];
        }
    }
    Ok(grad)
}
