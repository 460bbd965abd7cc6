//! The partial-permutation polytope: `m x n` correspondence matrices with row
//! and column sums at most one and total mass `n_p`, flattened row by row
//! (`p[i * n + j]`).

use nalgebra::{DMatrix, DVector};

use crate::assign::{solve_k_lap, AssignmentProblem};
use crate::error::{Error, Result};

/// Tolerance used when checking that a vector lies in the polytope.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasible {
    pub m: usize,
    pub n: usize,
    pub n_p: usize,
}

impl Feasible {
    pub fn new(m: usize, n: usize, n_p: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::input("point sets must be non-empty"));
        }
        if n_p == 0 || n_p > m.min(n) {
            return Err(Error::input(format!(
                "number of matches {n_p} out of range 1..={}",
                m.min(n)
            )));
        }
        Ok(Self { m, n, n_p })
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    /// The uniform fractional correspondence `n_p / (mn)` in every cell.
    pub fn fuzziest(&self) -> DVector<f64> {
        DVector::from_element(self.cells(), self.n_p as f64 / self.cells() as f64)
    }

    /// True when the polytope contains exactly one point.
    pub fn is_singleton(&self) -> bool {
        self.m == 1 && self.n == 1
    }

    pub fn check(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.cells() {
            return Err(Error::input(format!(
                "correspondence has {} entries, expected {}",
                p.len(),
                self.cells()
            )));
        }
        let tol = FEASIBILITY_TOL;
        if p.iter().any(|&v| !(v >= -tol && v <= 1.0 + tol)) {
            return Err(Error::input("correspondence entries must lie in [0, 1]"));
        }
        for i in 0..self.m {
            let s: f64 = (0..self.n).map(|j| p[i * self.n + j]).sum();
            if s > 1.0 + tol {
                return Err(Error::input(format!("row {i} sums to {s} > 1")));
            }
        }
        for j in 0..self.n {
            let s: f64 = (0..self.m).map(|i| p[i * self.n + j]).sum();
            if s > 1.0 + tol {
                return Err(Error::input(format!("column {j} sums to {s} > 1")));
            }
        }
        let total = p.sum();
        if (total - self.n_p as f64).abs() > tol * (1.0 + self.n_p as f64) {
            return Err(Error::input(format!("total mass {total} differs from {}", self.n_p)));
        }
        Ok(())
    }

    pub fn from_pairs(&self, pairs: &[(usize, usize)]) -> Result<DVector<f64>> {
        let mut p = DVector::zeros(self.cells());
        for &(i, j) in pairs {
            if i >= self.m || j >= self.n {
                return Err(Error::input(format!("pair ({i}, {j}) out of range")));
            }
            p[i * self.n + j] += 1.0;
        }
        self.check(&p)?;
        Ok(p)
    }

    /// Pairs of a binary correspondence (entries above one half).
    pub fn to_pairs(&self, p: &DVector<f64>) -> Vec<(usize, usize)> {
        (0..self.cells())
            .filter(|&k| p[k] > 0.5)
            .map(|k| (k / self.n, k % self.n))
            .collect()
    }

    pub fn is_binary(&self, p: &DVector<f64>) -> bool {
        p.iter().all(|&v| v.abs() <= FEASIBILITY_TOL || (v - 1.0).abs() <= FEASIBILITY_TOL)
    }

    /// Binary correspondence with maximal overlap with `p`.
    pub fn round(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let cost = DMatrix::from_fn(self.m, self.n, |i, j| -p[i * self.n + j]);
        let a = solve_k_lap(&AssignmentProblem::new(cost, self.n_p)?)?;
        self.from_pairs(&a.pairs)
    }

    /// Reshapes a per-cell vector into an `m x n` cost matrix.
    pub fn cost_matrix(&self, per_cell: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |i, j| per_cell[i * self.n + j])
    }
}
