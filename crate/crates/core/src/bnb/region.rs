use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assign::{maximize_k_lap, AssignmentProblem};
use crate::energy::ConcaveEnergy;
use crate::error::{Error, Result};

/// Largest reduced dimension for which the `2^{n_u}` orthants are enumerated.
pub const MAX_ORTHANT_DIM: usize = 20;

/// Supporting-plane offsets at or below this are treated as an empty orthant.
const DELTA_TOL: f64 = 1e-12;

/// Vertex lists of the orthant simplexes covering `Q^T Ω`. The first vertex of
/// every simplex is the fuzziest point `v0`. Empty orthants are omitted.
pub fn initial_region<E: ConcaveEnergy + ?Sized>(energy: &E) -> Result<Vec<Vec<DVector<f64>>>> {
    let n_u = energy.n_u();
    if n_u == 0 {
        return Err(Error::input("reduced dimension is zero, nothing to branch on"));
    }
    if n_u > MAX_ORTHANT_DIM {
        return Err(Error::input(format!(
            "reduced dimension {n_u} exceeds the orthant enumeration limit {MAX_ORTHANT_DIM}"
        )));
    }
    let omega = energy.feasible();
    let q = energy.q();
    let v0 = energy.reduce(&omega.fuzziest());
    let root = (n_u as f64).sqrt();

    let orthants: Vec<Option<Vec<DVector<f64>>>> = (0..1usize << n_u)
        .into_par_iter()
        .map(|mask| {
            let sigma = orthant_signs(mask, n_u);
            let h = &sigma / root;
            let per_cell = q * &h;
            let cost = DMatrix::from_fn(omega.m, omega.n, |i, j| per_cell[i * omega.n + j]);
            let best = maximize_k_lap(&AssignmentProblem::new(cost, omega.n_p)?)?;
            let delta = best.value - h.dot(&v0);
            if delta <= DELTA_TOL {
                return Ok(None);
            }
            let mut vertices = Vec::with_capacity(n_u + 1);
            vertices.push(v0.clone());
            for j in 0..n_u {
                let mut v = v0.clone();
                v[j] += delta * root * sigma[j];
                vertices.push(v);
            }
            Ok(Some(vertices))
        })
        .collect::<Result<_>>()?;

    let simplexes: Vec<_> = orthants.into_iter().flatten().collect();
    if simplexes.is_empty() {
        return Err(Error::input("feasible set reduces to a single point"));
    }
    Ok(simplexes)
}

/// Sign vector of orthant `mask`: bit `j` set means component `j` is negative.
pub fn orthant_signs(mask: usize, n_u: usize) -> DVector<f64> {
    DVector::from_fn(n_u, |j, _| if mask >> j & 1 == 1 { -1.0 } else { 1.0 })
}
