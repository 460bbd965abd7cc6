//! Similarity energy with scale restricted to an interval and a proper
//! rotation, minimised in closed form inside `E_c`.
//!
//! With `G = mat(B) - C D^T / n_p`:
//!
//! ```text
//! E_c(u) = -|D|^2 / n_p + min_{s in range} { s^2 (a - |C|^2 / n_p) - 2 s max_R tr(R G) }
//! ```
//!
//! In 2D, `max_R tr(R G) = |W vec(G)|` and only the two rows `W vec(X^T P Y)`
//! of `B` are kept, giving a 7-dimensional reduced coordinate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    check_sets, ConcaveEnergy, DesignMatrices, Reduction, TransformEstimate, TransformKind,
};
use crate::error::{Error, Result};
use crate::feasible::Feasible;
use crate::points::PointSet;

/// `tr(R H) = r^T W vec(H)` for a 2D rotation with `r = (cos β, sin β)`.
pub const W2: [[f64; 4]; 2] = [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, -1.0, 0.0]];

/// Below this Frobenius norm `G` carries no rotation information.
const G_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScaleRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::input(format!("invalid scale range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self { lo: 0.5, hi: 1.5 }
    }
}

/// Builds `B` (or `W`-compressed `B̃` in 2D), `C`, `D` and `a`.
///
/// Column `i*n + j`: `B: vec(x_i y_j^T)`, `C: x_i`, `D: y_j`, `a: |x_i|^2`.
pub fn build_design_sim(
    model: &PointSet,
    scene: &PointSet,
    d: usize,
    specialized_2d: bool,
) -> Result<DesignMatrices> {
    if !(2..=3).contains(&d) {
        return Err(Error::input(format!("dimension {d} not supported, expected 2 or 3")));
    }
    check_sets(model, scene, d)?;
    let (m, n) = (model.len(), scene.len());
    let mn = m * n;
    let reduce_b = specialized_2d && d == 2;
    let mut b = DMatrix::zeros(if reduce_b { 2 } else { d * d }, mn);
    let mut c = DMatrix::zeros(d, mn);
    let mut dd = DMatrix::zeros(d, mn);
    let mut a = DMatrix::zeros(1, mn);
    for i in 0..m {
        let x = model.point(i);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        for j in 0..n {
            let y = scene.point(j);
            let k = i * n + j;
            if reduce_b {
                let outer = [x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1]];
                for (r, w) in W2.iter().enumerate() {
                    b[(r, k)] = w.iter().zip(&outer).map(|(w, o)| w * o).sum();
                }
            } else {
                for p in 0..d {
                    for q in 0..d {
                        b[(p * d + q, k)] = x[p] * y[q];
                    }
                }
            }
            for r in 0..d {
                c[(r, k)] = x[r];
                dd[(r, k)] = y[r];
            }
            a[(0, k)] = xx;
        }
    }
    Ok(DesignMatrices::assemble(vec![
        ("B", b, false),
        ("C", c, false),
        ("D", dd, false),
        ("a", a, false),
    ]))
}

/// Result of the orthogonal Procrustes step.
#[derive(Debug, Clone)]
pub struct RotationFit {
    pub rotation: DMatrix<f64>,
    /// `tr(R* G)`, the maximised value.
    pub trace: f64,
    /// The smallest singular value is tiny relative to `|G|`, so the optimal
    /// rotation is not unique.
    pub ambiguous: bool,
}

/// Proper rotation maximising `tr(R G)`.
///
/// With `G^T = U S V^T`, `R* = U diag(1, .., det(U V^T)) V^T`. Returns the
/// identity when `G` vanishes.
pub fn optimal_rotation(g: &DMatrix<f64>) -> RotationFit {
    let d = g.nrows();
    let gnorm = g.norm();
    if gnorm <= G_ZERO {
        return RotationFit { rotation: DMatrix::identity(d, d), trace: 0.0, ambiguous: true };
    }
    let svd = g.transpose().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let (kmin, smin) = sv
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
    let det = (&u * &v_t).determinant();
    let mut diag = DVector::from_element(d, 1.0);
    diag[kmin] = det.signum();
    let rotation = &u * DMatrix::from_diagonal(&diag) * &v_t;
    let trace = (&rotation * g).trace();
    RotationFit { rotation, trace, ambiguous: smin < 1e-12 * gnorm }
}

/// Minimises `s^2 c2 - 2 s c1` over a closed interval.
///
/// Candidates are both endpoints and, when `c2 > 0` and it lies strictly
/// inside, the stationary point `c1 / c2`. Ties go to the smaller `s`.
pub fn min_scale_quadratic(c2: f64, c1: f64, range: ScaleRange) -> (f64, f64) {
    let f = |s: f64| s * s * c2 - 2.0 * s * c1;
    let mut candidates = vec![range.lo];
    if c2 > 0.0 {
        let s0 = c1 / c2;
        if s0 > range.lo && s0 < range.hi {
            candidates.push(s0);
        }
    }
    candidates.push(range.hi);
    let mut best = (range.lo, f(range.lo));
    for s in candidates.into_iter().skip(1) {
        let v = f(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct ReducedEnergySim {
    d: usize,
    specialized: bool,
    feasible: Feasible,
    range: ScaleRange,
    red: Reduction,
}

/// Inner minimisation result at one `u`.
struct Inner {
    ec: f64,
    scale: f64,
    rotation: DMatrix<f64>,
    c: DVector<f64>,
    dsum: DVector<f64>,
}

impl ReducedEnergySim {
    /// Uses the 7-dimensional specialised path in 2D.
    pub fn new(model: &PointSet, scene: &PointSet, n_p: usize, range: ScaleRange) -> Result<Self> {
        Self::with_path(model, scene, n_p, range, true)
    }

    /// `specialized = false` forces the generic `d^2 + 2d + 1` path in 2D.
    pub fn with_path(
        model: &PointSet,
        scene: &PointSet,
        n_p: usize,
        range: ScaleRange,
        specialized: bool,
    ) -> Result<Self> {
        let d = model.dim();
        let feasible = Feasible::new(model.len(), scene.len(), n_p)?;
        let design = build_design_sim(model, scene, d, specialized)?;
        let red = Reduction::new(design, scene, model.len())?;
        Ok(Self { d, specialized: specialized && d == 2, feasible, range, red })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scale_range(&self) -> ScaleRange {
        self.range
    }

    pub fn design(&self) -> &DesignMatrices {
        &self.red.design
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.red.gamma
    }

    fn inner(&self, u: &DVector<f64>) -> Result<Inner> {
        let d = self.d;
        let n_p = self.feasible.n_p as f64;
        let blocks = self.red.blocks(u, n_p)?;
        let (bv, c, dsum, a) = (&blocks[0], &blocks[1], &blocks[2], blocks[3][0]);
        let cd = c * dsum.transpose() / n_p;
        let (c1, rotation) = if self.specialized {
            let eta0 = bv[0] - (cd[(0, 0)] + cd[(1, 1)]);
            let eta1 = bv[1] - (cd[(0, 1)] - cd[(1, 0)]);
            let norm = eta0.hypot(eta1);
            let rot = if norm <= G_ZERO {
                DMatrix::identity(2, 2)
            } else {
                let (cb, sb) = (eta0 / norm, eta1 / norm);
                DMatrix::from_row_slice(2, 2, &[cb, -sb, sb, cb])
            };
            (norm, rot)
        } else {
            let g = DMatrix::from_row_slice(d, d, bv.as_slice()) - cd;
            let fit = optimal_rotation(&g);
            (fit.trace, fit.rotation)
        };
        let c2 = a - c.norm_squared() / n_p;
        let (scale, value) = min_scale_quadratic(c2, c1, self.range);
        Ok(Inner {
            ec: value - dsum.norm_squared() / n_p,
            scale,
            rotation,
            c: c.clone(),
            dsum: dsum.clone(),
        })
    }

    /// `s*`, `R*` and `t* = (Σ p_ij y_j - s* R* Σ p_ij x_i) / n_p`.
    pub fn recover_similarity(&self, p: &DVector<f64>) -> Result<TransformEstimate> {
        let energy = self.eval_e(p)?;
        let inner = self.inner(&self.reduce(p))?;
        let n_p = self.feasible.n_p as f64;
        let linear = &inner.rotation * inner.scale;
        let translation = (&inner.dsum - &linear * &inner.c) / n_p;
        let (kind, params) = if self.d == 2 {
            let angle = inner.rotation[(1, 0)].atan2(inner.rotation[(0, 0)]);
            (TransformKind::ConstrainedSimilarity2d, vec![inner.scale, angle])
        } else {
            (TransformKind::ConstrainedSimilarity3d, vec![inner.scale])
        };
        Ok(TransformEstimate {
            kind,
            params,
            linear,
            translation,
            scale: Some(inner.scale),
            rotation: Some(inner.rotation),
            energy,
        })
    }
}

impl ConcaveEnergy for ReducedEnergySim {
    fn feasible(&self) -> Feasible {
        self.feasible
    }

    fn n_u(&self) -> usize {
        self.red.q.ncols()
    }

    fn q(&self) -> &DMatrix<f64> {
        &self.red.q
    }

    fn linear_cost(&self) -> &DVector<f64> {
        &self.red.linear
    }

    fn eval_ec(&self, u: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(u)?.ec)
    }

    fn estimate(&self, p: &DVector<f64>) -> Result<TransformEstimate> {
        self.recover_similarity(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot2(beta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[beta.cos(), -beta.sin(), beta.sin(), beta.cos()])
    }

    #[test]
    fn rotation_of_identity_and_transposed_rotation() {
        let fit = optimal_rotation(&DMatrix::identity(3, 3));
        assert!((fit.rotation - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        let r0 = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let r0 = DMatrix::from_iterator(3, 3, r0.iter().copied());
        let fit = optimal_rotation(&r0.transpose());
        assert!((&fit.rotation - &r0).norm() < 1e-10);
        assert!((fit.trace - 3.0).abs() < 1e-10);
        let fit = optimal_rotation(&DMatrix::zeros(3, 3));
        assert!(fit.ambiguous);
        assert_eq!(fit.rotation, DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn rotation_beats_sampled_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let fit = optimal_rotation(&g);
        let r = &fit.rotation;
        assert!((r.transpose() * r - DMatrix::<f64>::identity(3, 3)).norm() < 1e-10);
        assert!((r.determinant() - 1.0).abs() < 1e-10);
        for _ in 0..100_000 {
            // uniform rotation from a random unit quaternion
            let q = nalgebra::Quaternion::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            );
            let rr = nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix();
            let rr = DMatrix::from_iterator(3, 3, rr.matrix().iter().copied());
            assert!((&rr * &g).trace() <= fit.trace + 1e-12);
        }
    }

    #[test]
    fn scale_quadratic_cases() {
        let range = ScaleRange::default();
        assert_eq!(min_scale_quadratic(1.0, 1.0, range), (1.0, -1.0));
        assert_eq!(min_scale_quadratic(-1.0, 0.0, range), (1.5, -2.25));
        // flat objective: tie goes to the lower end
        assert_eq!(min_scale_quadratic(0.0, 0.0, range).0, 0.5);
    }

    #[test]
    fn scale_quadratic_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let range = ScaleRange::new(0.5, 1.5).unwrap();
        for _ in 0..5 {
            let c2 = rng.gen_range(-2.0..2.0);
            let c1 = rng.gen_range(0.0..2.0);
            let (_, v) = min_scale_quadratic(c2, c1, range);
            let steps = 1_000_000;
            let grid = (0..=steps)
                .map(|k| {
                    let s = range.lo + (range.hi - range.lo) * k as f64 / steps as f64;
                    s * s * c2 - 2.0 * s * c1
                })
                .fold(f64::INFINITY, f64::min);
            assert!(v <= grid + 1e-12 && grid - v <= 1e-9 + 4e-12 * (c1.abs() + c2.abs()));
        }
    }

    #[test]
    fn design_products() {
        let x = PointSet::from_points(&[[1.0, 0.0]]).unwrap();
        let y = PointSet::from_points(&[[0.0, 1.0]]).unwrap();
        let full = build_design_sim(&x, &y, 2, false).unwrap();
        // a single cell: every row is constant, nothing is kept
        assert_eq!(full.n_u(), 0);
        let z = DVector::zeros(0);
        let blocks = full.expand(&z, 1.0);
        assert_eq!(blocks[0].as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        let spec = build_design_sim(&x, &y, 2, true).unwrap();
        let blocks = spec.expand(&z, 1.0);
        // W vec(x y^T) = (x·y, x1 y2 - x2 y1)
        assert_eq!(blocks[0].as_slice(), &[0.0, 1.0]);
        assert!(build_design_sim(&x, &y, 4, true).is_err());
    }

    #[test]
    fn design_rows_match_direct_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = PointSet::new(3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y = PointSet::new(3, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let design = build_design_sim(&x, &y, 3, true).unwrap();
        assert_eq!(design.n_u(), 16);
        let p = DVector::from_fn(20, |_, _| rng.gen_range(0.0..0.2));
        let full = design.expand(&(&design.stacked * &p), p.sum());
        let pm = DMatrix::from_fn(4, 5, |i, j| p[i * 5 + j]);
        let xm = DMatrix::from_fn(4, 3, |i, c| x.point(i)[c]);
        let ym = DMatrix::from_fn(5, 3, |j, c| y.point(j)[c]);
        let xpy = xm.transpose() * &pm * &ym;
        for a in 0..3 {
            for b in 0..3 {
                assert!((full[0][a * 3 + b] - xpy[(a, b)]).abs() < 1e-12);
            }
        }
        let cp = xm.transpose() * &pm * DVector::from_element(5, 1.0);
        assert!((&full[1] - cp).norm() < 1e-12);
        let dp = ym.transpose() * pm.transpose() * DVector::from_element(4, 1.0);
        assert!((&full[2] - dp).norm() < 1e-12);
        let ones = DVector::from_element(20, 1.0);
        let a_all = design.expand(&(&design.stacked * &ones), 20.0)[3][0];
        let direct: f64 = (0..4).map(|i| 5.0 * x.point(i).iter().map(|v| v * v).sum::<f64>()).sum();
        assert!((a_all - direct).abs() < 1e-12);
    }

    #[test]
    fn exact_similarity_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = PointSet::new(2, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (s0, beta, t0) = (1.3, 0.8, [0.4, -1.2]);
        let r0 = rot2(beta);
        let y = x.map(|p| {
            let v = &r0 * DVector::from_column_slice(p) * s0;
            vec![v[0] + t0[0], v[1] + t0[1]]
        });
        for specialized in [true, false] {
            let e = ReducedEnergySim::with_path(&x, &y, 6, ScaleRange::default(), specialized)
                .unwrap();
            let p = e.feasible().from_pairs(&(0..6).map(|i| (i, i)).collect::<Vec<_>>()).unwrap();
            assert!(e.eval_e(&p).unwrap().abs() < 1e-10);
            let est = e.recover_similarity(&p).unwrap();
            assert!((est.scale.unwrap() - s0).abs() < 1e-6);
            assert!((est.rotation.as_ref().unwrap() - &r0).norm() < 1e-6);
            assert!((est.translation[0] - t0[0]).abs() < 1e-6);
            assert!((est.translation[1] - t0[1]).abs() < 1e-6);
        }
    }
}
