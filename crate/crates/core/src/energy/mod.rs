//! Concave correspondence energies.
//!
//! Both energies are written as `E(p) = E_c(Q^T p) + l^T p` where the nonlinear
//! part depends on `p` only through the low-dimensional `u = Q^T p`. The
//! branch-and-bound in [`crate::bnb`] works on any [`ConcaveEnergy`].

pub mod reg;
pub mod sim;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::Feasible;
use crate::linalg::qr_reduce;
use crate::points::PointSet;

pub use reg::{ReducedEnergyReg, TransformFamilyReg};
pub use sim::{ReducedEnergySim, RotationFit, ScaleRange};

/// Relative tolerance used to classify design rows as constant or duplicate.
pub const ROW_TOL: f64 = 1e-9;

pub trait ConcaveEnergy: Sync {
    fn feasible(&self) -> Feasible;

    /// Reduced dimension `n_u`.
    fn n_u(&self) -> usize;

    /// `mn x n_u` matrix with orthonormal columns.
    fn q(&self) -> &DMatrix<f64>;

    /// Per-cell linear cost, `l[i*n + j] = |y_j|^2`.
    fn linear_cost(&self) -> &DVector<f64>;

    /// The nonlinear part of the energy in reduced coordinates.
    fn eval_ec(&self, u: &DVector<f64>) -> Result<f64>;

    /// Hook run once the enclosing simplexes are known, before any `E_c`
    /// evaluation. The regularised energy picks its weighting here.
    fn prepare(&mut self, _vertices: &[DVector<f64>]) -> Result<()> {
        Ok(())
    }

    fn estimate(&self, p: &DVector<f64>) -> Result<TransformEstimate>;

    fn reduce(&self, p: &DVector<f64>) -> DVector<f64> {
        self.q().tr_mul(p)
    }

    /// Full energy at a feasible correspondence.
    fn eval_e(&self, p: &DVector<f64>) -> Result<f64> {
        self.feasible().check(p)?;
        Ok(self.eval_ec(&self.reduce(p))? + self.linear_cost().dot(p))
    }
}

/// Where a row of an uncompressed design block comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowSource {
    /// `sign` times the given row of the stacked (kept) design.
    Kept { index: usize, sign: f64 },
    /// The row is `c * 1^T`, so its value is `c * n_p` on the polytope.
    Constant(f64),
}

/// One named block (e.g. `B`, `D`, `C`, `F`) of a stacked design.
#[derive(Debug, Clone)]
pub struct Block {
    pub name: &'static str,
    pub rows: Vec<RowSource>,
}

impl Block {
    /// Number of distinct stacked rows this block contributes.
    pub fn kept(&self) -> usize {
        let mut idx: Vec<usize> = self
            .rows
            .iter()
            .filter_map(|r| match r {
                RowSource::Kept { index, .. } => Some(*index),
                RowSource::Constant(_) => None,
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.len()
    }
}

/// Design rows with constant and duplicate rows removed, plus the map needed
/// to rebuild every original row value from the kept ones.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    /// Kept rows, one per row, `mn` columns.
    pub stacked: DMatrix<f64>,
    pub blocks: Vec<Block>,
}

impl DesignMatrices {
    /// Assembles blocks in order. `dedup` marks blocks whose rows may be
    /// merged when equal up to sign.
    pub fn assemble(parts: Vec<(&'static str, DMatrix<f64>, bool)>) -> Self {
        let mut kept: Vec<DVector<f64>> = Vec::new();
        let mut blocks = Vec::new();
        for (name, rows, dedup) in parts {
            let first = kept.len();
            let mut sources = Vec::with_capacity(rows.nrows());
            for r in 0..rows.nrows() {
                let row = rows.row(r).transpose();
                let norm = row.norm();
                let mean = row.mean();
                let residual = row.map(|v| v - mean).norm();
                if norm == 0.0 || residual <= ROW_TOL * norm {
                    sources.push(RowSource::Constant(mean));
                    continue;
                }
                let dup = if dedup {
                    kept[first..].iter().enumerate().find_map(|(idx, k)| {
                        [1.0, -1.0]
                            .into_iter()
                            .find(|s| (&row - k * *s).norm() <= ROW_TOL * norm)
                            .map(|sign| RowSource::Kept { index: first + idx, sign })
                    })
                } else {
                    None
                };
                match dup {
                    Some(src) => sources.push(src),
                    None => {
                        sources.push(RowSource::Kept { index: kept.len(), sign: 1.0 });
                        kept.push(row);
                    }
                }
            }
            blocks.push(Block { name, rows: sources });
        }
        let cols = kept.first().map_or(0, |k| k.len());
        let stacked = DMatrix::from_fn(kept.len(), cols, |r, c| kept[r][c]);
        Self { stacked, blocks }
    }

    pub fn n_u(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Rebuilds every block's full row values from the kept-row values `z`.
    pub fn expand(&self, z: &DVector<f64>, n_p: f64) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                DVector::from_iterator(
                    b.rows.len(),
                    b.rows.iter().map(|src| match *src {
                        RowSource::Kept { index, sign } => sign * z[index],
                        RowSource::Constant(c) => c * n_p,
                    }),
                )
            })
            .collect()
    }
}

/// QR-compressed design shared by both energies.
#[derive(Debug, Clone)]
pub(crate) struct Reduction {
    pub design: DesignMatrices,
    pub q: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl Reduction {
    pub fn new(design: DesignMatrices, scene: &PointSet, m: usize) -> Result<Self> {
        let n = scene.len();
        let linear = DVector::from_fn(m * n, |k, _| {
            scene.point(k % n).iter().map(|v| v * v).sum::<f64>()
        });
        let (q, gamma) = if design.n_u() == 0 {
            (DMatrix::zeros(m * n, 0), DMatrix::zeros(0, 0))
        } else {
            qr_reduce(&design.stacked.transpose())?
        };
        Ok(Self { design, q, gamma, linear })
    }

    /// Kept design row values `Γ^T u`, expanded into full blocks.
    pub fn blocks(&self, u: &DVector<f64>, n_p: f64) -> Result<Vec<DVector<f64>>> {
        if u.len() != self.q.ncols() {
            return Err(Error::input(format!(
                "reduced coordinate has length {}, expected {}",
                u.len(),
                self.q.ncols()
            )));
        }
        Ok(self.design.expand(&self.gamma.tr_mul(u), n_p))
    }
}

/// Which transformation model produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Similarity2d,
    Affine2d,
    ScaleTrans3d,
    ConstrainedSimilarity2d,
    ConstrainedSimilarity3d,
}

/// A recovered transformation `T(x) = L x + t` mapping model onto scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformEstimate {
    pub kind: TransformKind,
    /// Model parameters: `θ` for the regularised families, `[s, angle]` (2D)
    /// or `[s]` (3D) for constrained similarities.
    pub params: Vec<f64>,
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub scale: Option<f64>,
    pub rotation: Option<DMatrix<f64>>,
    /// Energy of the correspondence the estimate was recovered from.
    pub energy: f64,
}

impl TransformEstimate {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.linear * DVector::from_column_slice(x) + &self.translation;
        v.iter().copied().collect()
    }

    pub fn identity(kind: TransformKind, d: usize) -> Self {
        Self {
            kind,
            params: vec![],
            linear: DMatrix::identity(d, d),
            translation: DVector::zeros(d),
            scale: Some(1.0),
            rotation: Some(DMatrix::identity(d, d)),
            energy: 0.0,
        }
    }
}

pub(crate) fn check_sets(model: &PointSet, scene: &PointSet, d: usize) -> Result<()> {
    if model.dim() != d || scene.dim() != d {
        return Err(Error::input(format!(
            "point sets have dimensions {} and {}, transform needs {d}",
            model.dim(),
            scene.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_drops_constant_and_duplicate_rows() {
        let rows = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 2.0, 3.0, //
                2.0, 2.0, 2.0, //
                -1.0, -2.0, -3.0, //
                0.0, 0.0, 0.0,
            ],
        );
        let d = DesignMatrices::assemble(vec![("B", rows, true)]);
        assert_eq!(d.n_u(), 1);
        let b = &d.blocks[0];
        assert_eq!(b.rows[0], RowSource::Kept { index: 0, sign: 1.0 });
        assert_eq!(b.rows[1], RowSource::Constant(2.0));
        assert_eq!(b.rows[2], RowSource::Kept { index: 0, sign: -1.0 });
        assert_eq!(b.rows[3], RowSource::Constant(0.0));

        let p = DVector::from_row_slice(&[0.5, 0.25, 0.25]);
        let z = &d.stacked * &p;
        let full = d.expand(&z, 1.0);
        let direct = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 3.0, 2.0, 2.0, 2.0, -1.0, -2.0, -3.0, 0.0, 0.0, 0.0],
        ) * &p;
        assert!((&full[0] - direct).norm() < 1e-15);
    }
}
