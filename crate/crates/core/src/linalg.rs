//! Householder QR used to compress the energy design onto a low-dimensional
//! coordinate `u = Q^T p`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_kk|` below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Thin QR factorisation of a tall matrix with full column rank.
///
/// Returns `Q` with orthonormal columns and upper-triangular `Γ` with a
/// non-negative diagonal such that `Q Γ = stacked`.
pub fn qr_reduce(stacked: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (rows, cols) = stacked.shape();
    if cols > rows {
        return Err(Error::Degenerate { column: rows });
    }
    let scale = stacked.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let mut a = stacked.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let x: DVector<f64> = a.view((k, k), (rows - k, 1)).column(0).clone_owned();
        let norm = x.norm();
        if norm <= RANK_TOL * scale || scale == 0.0 {
            return Err(Error::Degenerate { column: k });
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            let mut block = a.view_mut((k, k), (rows - k, cols - k));
            let w = block.tr_mul(&v);
            block.ger(-2.0, &v, &w, 1.0);
        }
        reflectors.push(v);
    }

    let mut gamma = a.view((0, 0), (cols, cols)).upper_triangle();
    let mut q = DMatrix::<f64>::identity(rows, cols);
    for (k, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.view_mut((k, 0), (rows - k, cols));
        let w = block.tr_mul(v);
        block.ger(-2.0, v, &w, 1.0);
    }
    for k in 0..cols {
        if gamma[(k, k)] < 0.0 {
            gamma.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok((q, gamma))
}
