use nalgebra::{DMatrix, DVector};

use super::lp::{solve_dense_lp, LinearProgram, LpOutcome};
use super::simplex::Simplex;
use crate::assign::{solve_k_lap, AssignmentProblem};
use crate::energy::ConcaveEnergy;
use crate::error::{Error, Result};

/// Lower bound of `E` over `Ω ∩ S` from the convex envelope of `E_c` on `S`,
/// computed exactly with a linear program. Returns `+inf` and no witness when
/// `S` misses `Q^T Ω`.
pub fn lower_bound_lp<E: ConcaveEnergy + ?Sized>(
    s: &Simplex,
    energy: &E,
) -> Result<(f64, Option<DVector<f64>>)> {
    let omega = energy.feasible();
    let (m, n) = (omega.m, omega.n);
    let n_u = energy.n_u();
    let k = s.vertices.len();
    let cells = m * n;
    let width = k + cells;
    let q = energy.q();
    let lin = energy.linear_cost();

    let mut objective = s.ec_values.clone();
    objective.extend(lin.iter());
    let mut lp = LinearProgram::new(objective);
    for r in 0..n_u {
        let mut row = vec![0.0; width];
        for (i, v) in s.vertices.iter().enumerate() {
            row[i] = v[r];
        }
        for c in 0..cells {
            row[k + c] = -q[(c, r)];
        }
        lp.eq(row, 0.0);
    }
    let mut row = vec![0.0; width];
    row[..k].fill(1.0);
    lp.eq(row, 1.0);
    let mut row = vec![0.0; width];
    row[k..].fill(1.0);
    lp.eq(row, omega.n_p as f64);
    for i in 0..m {
        let mut row = vec![0.0; width];
        row[k + i * n..k + (i + 1) * n].fill(1.0);
        lp.le(row, 1.0);
    }
    for j in 0..n {
        let mut row = vec![0.0; width];
        for i in 0..m {
            row[k + i * n + j] = 1.0;
        }
        lp.le(row, 1.0);
    }

    match solve_dense_lp(&lp)? {
        LpOutcome::Infeasible => Ok((f64::INFINITY, None)),
        LpOutcome::Optimal { x, value } => {
            // The value stays a valid bound when the solver's cleanup stops
            // short, but the point may then violate Ω and is dropped.
            let p = DVector::from_iterator(cells, x[k..].iter().map(|v| v.clamp(0.0, 1.0)));
            Ok((value, omega.check(&p).is_ok().then_some(p)))
        }
    }
}

/// Gradient `g` of the affine function agreeing with `E_c` at the vertices.
pub fn envelope_gradient(s: &Simplex) -> Result<DVector<f64>> {
    let k = s.dim();
    let last = s.ec_values[k];
    let rhs = DVector::from_fn(k, |i, _| s.ec_values[i] - last);
    s.edge_matrix()
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::internal("simplex edge matrix is singular"))
}

/// Value at `u` of the affine function agreeing with `E_c` at the vertices.
pub fn envelope_value(s: &Simplex, u: &DVector<f64>) -> Result<f64> {
    let g = envelope_gradient(s)?;
    let k = s.dim();
    Ok(s.ec_values[k] + g.dot(&(u - &s.vertices[k])))
}

/// Cheaper bound: the affine envelope of `S` minimised over all of `Ω`, which
/// is a k-cardinality assignment problem. Valid on `Ω ∩ S` but weaker than
/// [`lower_bound_lp`].
pub fn lower_bound_fast<E: ConcaveEnergy + ?Sized>(
    s: &Simplex,
    energy: &E,
) -> Result<(f64, Option<DVector<f64>>)> {
    let omega = energy.feasible();
    let g = envelope_gradient(s)?;
    let per_cell = energy.q() * &g + energy.linear_cost();
    let cost = DMatrix::from_fn(omega.m, omega.n, |i, j| per_cell[i * omega.n + j]);
    let a = solve_k_lap(&AssignmentProblem::new(cost, omega.n_p)?)?;
    let k = s.dim();
    let bound = a.value + s.ec_values[k] - g.dot(&s.vertices[k]);
    Ok((bound, Some(omega.from_pairs(&a.pairs)?)))
}
