#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Rotation2};
use pointmatch::energy::{ConcaveEnergy, ReducedEnergyReg, ReducedEnergySim, ScaleRange, TransformFamilyReg};
use pointmatch::{Feasible, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every binary correspondence with exactly `n_p` pairs.
pub fn binary_points(omega: Feasible) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    let mut used_cols = vec![false; omega.n];
    let mut pairs = Vec::new();
    fn rec(
        omega: Feasible,
        row: usize,
        used: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        out: &mut Vec<DVector<f64>>,
    ) {
        if pairs.len() == omega.n_p {
            out.push(omega.from_pairs(pairs).unwrap());
            return;
        }
        if omega.m - row < omega.n_p - pairs.len() {
            return;
        }
        rec(omega, row + 1, used, pairs, out);
        for j in 0..omega.n {
            if !used[j] {
                used[j] = true;
                pairs.push((row, j));
                rec(omega, row + 1, used, pairs, out);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    rec(omega, 0, &mut used_cols, &mut pairs, &mut out);
    out
}

/// Minimum of `E` over the binary correspondences, by enumeration.
pub fn enumerate_min<E: ConcaveEnergy>(energy: &E) -> (f64, DVector<f64>) {
    binary_points(energy.feasible())
        .into_iter()
        .map(|p| (energy.eval_e(&p).unwrap(), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

pub fn random_set(rng: &mut ChaCha8Rng, count: usize, d: usize) -> PointSet {
    let coords = (0..count * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PointSet::new(d, coords).unwrap()
}

/// A noisy similarity image of the first `shared` model points, padded with
/// uniform outliers up to `n` points.
pub fn partial_instance(seed: u64, m: usize, n: usize, shared: usize) -> (PointSet, PointSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_set(&mut rng, m, 2);
    let rot = Rotation2::new(rng.gen_range(-3.0..3.0));
    let s = rng.gen_range(0.6..1.4);
    let t = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let mut coords = Vec::with_capacity(n * 2);
    for i in 0..shared {
        let x = model.vector(i);
        let y = rot * nalgebra::Vector2::new(x[0], x[1]) * s;
        coords.push(y[0] + t[0] + rng.gen_range(-0.03..0.03));
        coords.push(y[1] + t[1] + rng.gen_range(-0.03..0.03));
    }
    for _ in shared..n {
        coords.push(rng.gen_range(-1.5..1.5));
        coords.push(rng.gen_range(-1.5..1.5));
    }
    (model, PointSet::new(2, coords).unwrap())
}

pub fn reg_sim2d(model: &PointSet, scene: &PointSet, n_p: usize) -> ReducedEnergyReg {
    ReducedEnergyReg::new(model, scene, TransformFamilyReg::Similarity2d, n_p).unwrap()
}

pub fn sim2d(model: &PointSet, scene: &PointSet, n_p: usize) -> ReducedEnergySim {
    ReducedEnergySim::new(model, scene, n_p, ScaleRange::default()).unwrap()
}

/// Random point of `Ω`: a convex combination of binary correspondences.
pub fn random_feasible(rng: &mut ChaCha8Rng, omega: Feasible, parts: usize) -> DVector<f64> {
    let mut p = DVector::zeros(omega.cells());
    let mut total = 0.0;
    for _ in 0..parts {
        let w: f64 = rng.gen_range(0.0..1.0);
        let cost = DMatrix::from_fn(omega.m, omega.n, |_, _| rng.gen_range(0.0..1.0));
        let a = pointmatch::assign::solve_k_lap(
            &pointmatch::assign::AssignmentProblem::new(cost, omega.n_p).unwrap(),
        )
        .unwrap();
        p += omega.from_pairs(&a.pairs).unwrap() * w;
        total += w;
    }
    p / total
}
