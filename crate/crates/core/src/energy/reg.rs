//! Regularised energy for transforms whose non-translational part is linear
//! in its parameters, `φ(x) = J(x) θ`.
//!
//! Translation is eliminated in closed form and `θ` through the quadratic
//! penalty `(θ - θ0)^T H (θ - θ0)`, leaving
//!
//! ```text
//! E_c(u) = -(b + Hθ0)^T (A + H)^{-1} (b + Hθ0) - |F|^2 / n_p + θ0^T H θ0
//! A(u)   = mat(B) - mat(D) mat(D)^T / n_p
//! b(u)   = C - mat(D) F / n_p
//! ```
//!
//! with `B, D, C, F` read from `Γ^T u`. The energy is concave wherever
//! `A + H` is positive definite.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{
    check_sets, ConcaveEnergy, DesignMatrices, Reduction, TransformEstimate, TransformKind,
};
use crate::error::{Error, Result};
use crate::feasible::Feasible;
use crate::points::PointSet;

/// Margin added to the most negative eigenvalue when choosing `H`.
pub const H_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformFamilyReg {
    /// `[[a, -b], [b, a]]`, i.e. scale times rotation.
    Similarity2d,
    /// General 2x2 linear map, parameters row by row.
    Affine2d,
    /// Independent scaling of each of three axes.
    ScaleTrans3d,
}

impl TransformFamilyReg {
    pub fn dim(self) -> usize {
        match self {
            Self::Similarity2d | Self::Affine2d => 2,
            Self::ScaleTrans3d => 3,
        }
    }

    pub fn n_theta(self) -> usize {
        match self {
            Self::Similarity2d => 2,
            Self::Affine2d => 4,
            Self::ScaleTrans3d => 3,
        }
    }

    /// `d x n_θ` Jacobian of the non-translational part at `x`.
    pub fn jacobian(self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Self::Similarity2d => DMatrix::from_row_slice(2, 2, &[x[0], -x[1], x[1], x[0]]),
            Self::Affine2d => {
                DMatrix::from_row_slice(2, 4, &[x[0], x[1], 0.0, 0.0, 0.0, 0.0, x[0], x[1]])
            }
            Self::ScaleTrans3d => DMatrix::from_diagonal(&DVector::from_column_slice(x)),
        }
    }

    /// Parameters of the identity transform.
    pub fn identity_theta(self) -> DVector<f64> {
        match self {
            Self::Similarity2d => DVector::from_row_slice(&[1.0, 0.0]),
            Self::Affine2d => DVector::from_row_slice(&[1.0, 0.0, 0.0, 1.0]),
            Self::ScaleTrans3d => DVector::from_element(3, 1.0),
        }
    }

    /// The `d x d` matrix `L` with `J(x) θ = L x`.
    pub fn linear_part(self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut l = DMatrix::zeros(d, d);
        for c in 0..d {
            let mut e = vec![0.0; d];
            e[c] = 1.0;
            l.set_column(c, &(self.jacobian(&e) * theta));
        }
        l
    }

    fn kind(self) -> TransformKind {
        match self {
            Self::Similarity2d => TransformKind::Similarity2d,
            Self::Affine2d => TransformKind::Affine2d,
            Self::ScaleTrans3d => TransformKind::ScaleTrans3d,
        }
    }
}

/// Builds the `B`, `D`, `C`, `F` rows cell by cell and compresses them.
///
/// Column `i*n + j` of each block holds the coefficient of `p_ij`:
/// `B: vec(J_i^T J_i)`, `D: vec(J_i^T)`, `C: J_i^T y_j`, `F: y_j`.
pub fn build_design_reg(
    model: &PointSet,
    scene: &PointSet,
    family: TransformFamilyReg,
    n_p: usize,
) -> Result<DesignMatrices> {
    let d = family.dim();
    check_sets(model, scene, d)?;
    Feasible::new(model.len(), scene.len(), n_p)?;
    let (m, n) = (model.len(), scene.len());
    let nt = family.n_theta();
    let mn = m * n;

    let mut b = DMatrix::zeros(nt * nt, mn);
    let mut dd = DMatrix::zeros(nt * d, mn);
    let mut c = DMatrix::zeros(nt, mn);
    let mut f = DMatrix::zeros(d, mn);
    for i in 0..m {
        let jac = family.jacobian(model.point(i));
        let jtj = jac.tr_mul(&jac);
        for j in 0..n {
            let k = i * n + j;
            let y = scene.vector(j);
            for a in 0..nt {
                for bb in 0..nt {
                    b[(a * nt + bb, k)] = jtj[(a, bb)];
                }
                for cc in 0..d {
                    dd[(a * d + cc, k)] = jac[(cc, a)];
                }
            }
            c.set_column(k, &jac.tr_mul(&y));
            f.set_column(k, &y);
        }
    }
    Ok(DesignMatrices::assemble(vec![
        ("B", b, true),
        ("D", dd, true),
        ("C", c, false),
        ("F", f, false),
    ]))
}

#[derive(Debug, Clone)]
pub struct ReducedEnergyReg {
    family: TransformFamilyReg,
    feasible: Feasible,
    red: Reduction,
    theta0: DVector<f64>,
    h: DMatrix<f64>,
    auto_h: bool,
}

/// `A(u)`, `b(u)` and the translational pieces of one evaluation.
struct Parts {
    a: DMatrix<f64>,
    b: DVector<f64>,
    d: DMatrix<f64>,
    f: DVector<f64>,
}

impl ReducedEnergyReg {
    /// Builds the energy with `θ0` at the identity and `H = ε0 I`. When used
    /// through [`crate::bnb::minimize`], `H` is re-chosen from the enclosing
    /// simplexes unless [`Self::with_h`] fixed it.
    pub fn new(
        model: &PointSet,
        scene: &PointSet,
        family: TransformFamilyReg,
        n_p: usize,
    ) -> Result<Self> {
        let design = build_design_reg(model, scene, family, n_p)?;
        let feasible = Feasible::new(model.len(), scene.len(), n_p)?;
        let red = Reduction::new(design, scene, model.len())?;
        let nt = family.n_theta();
        Ok(Self {
            family,
            feasible,
            red,
            theta0: family.identity_theta(),
            h: DMatrix::identity(nt, nt) * H_EPSILON,
            auto_h: true,
        })
    }

    pub fn with_theta0(mut self, theta0: DVector<f64>) -> Result<Self> {
        if theta0.len() != self.family.n_theta() {
            return Err(Error::input(format!(
                "θ0 has {} entries, family needs {}",
                theta0.len(),
                self.family.n_theta()
            )));
        }
        self.theta0 = theta0;
        Ok(self)
    }

    /// Fixes `H`; automatic selection is disabled afterwards.
    pub fn with_h(mut self, h: DMatrix<f64>) -> Result<Self> {
        let nt = self.family.n_theta();
        if h.shape() != (nt, nt) {
            return Err(Error::input(format!("H must be {nt}x{nt}")));
        }
        self.h = h;
        self.auto_h = false;
        Ok(self)
    }

    pub fn family(&self) -> TransformFamilyReg {
        self.family
    }

    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn design(&self) -> &DesignMatrices {
        &self.red.design
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.red.gamma
    }

    fn parts(&self, u: &DVector<f64>) -> Result<Parts> {
        let nt = self.family.n_theta();
        let d = self.family.dim();
        let n_p = self.feasible.n_p as f64;
        let blocks = self.red.blocks(u, n_p)?;
        let bmat = DMatrix::from_row_slice(nt, nt, blocks[0].as_slice());
        let bmat = (&bmat + bmat.transpose()) * 0.5;
        let dmat = DMatrix::from_row_slice(nt, d, blocks[1].as_slice());
        let c = blocks[2].clone();
        let f = blocks[3].clone();
        let a = bmat - &dmat * dmat.transpose() / n_p;
        let b = c - &dmat * &f / n_p;
        Ok(Parts { a, b, d: dmat, f })
    }

    /// `A(u)` without the regulariser.
    pub fn a_matrix(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.parts(u)?.a)
    }

    fn factor(&self, a: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        let m = a + &self.h;
        Cholesky::new(m.clone()).ok_or_else(|| {
            let min = SymmetricEigen::new(m).eigenvalues.min();
            Error::NumericDomain {
                message: "A(u) + H is not positive definite".into(),
                min_eigenvalue: min,
            }
        })
    }

    /// `θ*` and `t*` for a feasible correspondence.
    pub fn recover_theta_t(&self, p: &DVector<f64>) -> Result<TransformEstimate> {
        let energy = self.eval_e(p)?;
        let parts = self.parts(&self.reduce(p))?;
        let chol = self.factor(&parts.a)?;
        let theta = chol.solve(&(&parts.b + &self.h * &self.theta0));
        let t = (&parts.f - parts.d.tr_mul(&theta)) / self.feasible.n_p as f64;
        let linear = self.family.linear_part(&theta);
        let (scale, rotation) = match self.family {
            TransformFamilyReg::Similarity2d => {
                let s = theta.norm();
                let rot = if s > 0.0 { &linear / s } else { DMatrix::identity(2, 2) };
                (Some(s), Some(rot))
            }
            _ => (None, None),
        };
        Ok(TransformEstimate {
            kind: self.family.kind(),
            params: theta.iter().copied().collect(),
            linear,
            translation: t,
            scale,
            rotation,
            energy,
        })
    }
}

impl ConcaveEnergy for ReducedEnergyReg {
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
        let parts = self.parts(u)?;
        let chol = self.factor(&parts.a)?;
        let rhs = &parts.b + &self.h * &self.theta0;
        let sol = chol.solve(&rhs);
        let n_p = self.feasible.n_p as f64;
        Ok(-rhs.dot(&sol) - parts.f.norm_squared() / n_p
            + self.theta0.dot(&(&self.h * &self.theta0)))
    }

    fn prepare(&mut self, vertices: &[DVector<f64>]) -> Result<()> {
        if self.auto_h {
            let tau = choose_h(vertices, self)?;
            let nt = self.family.n_theta();
            self.h = DMatrix::identity(nt, nt) * tau;
        }
        Ok(())
    }

    fn estimate(&self, p: &DVector<f64>) -> Result<TransformEstimate> {
        self.recover_theta_t(p)
    }
}

/// Weight `τ` of `H = τ I` making `A(v) + H` positive definite at every
/// vertex: `τ = -min(λ_min over vertices, 0) + ε0`.
///
/// `A(u)` is linear minus a positive semidefinite quadratic in `u`, so its
/// smallest eigenvalue is concave and attains its minimum over a simplex at a
/// vertex; checking vertices covers every enclosed `u`.
pub fn choose_h(vertices: &[DVector<f64>], energy: &ReducedEnergyReg) -> Result<f64> {
    let mut lambda0 = 0.0_f64;
    for v in vertices {
        let a = energy.a_matrix(v)?;
        lambda0 = lambda0.min(SymmetricEigen::new(a).eigenvalues.min());
    }
    Ok(-lambda0 + H_EPSILON)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PointSet {
        PointSet::from_points(&[[0.0, 0.0], [1.0, 0.2], [0.3, 1.1], [0.9, 0.8]]).unwrap()
    }

    // Affine designs need six points off any conic through the origin.
    fn seven() -> PointSet {
        PointSet::from_points(&[
            [0.1, 0.0],
            [1.0, 0.2],
            [0.3, 1.1],
            [0.9, 0.8],
            [0.5, -0.6],
            [-0.7, 0.4],
            [-0.2, -0.9],
        ])
        .unwrap()
    }

    #[test]
    fn similarity_counts_for_two_points() {
        let x = PointSet::from_points(&[[0.1, 0.7], [0.9, -0.4]]).unwrap();
        let y = PointSet::from_points(&[[0.3, 0.2], [-0.5, 0.6]]).unwrap();
        let d = build_design_reg(&x, &y, TransformFamilyReg::Similarity2d, 1).unwrap();
        assert_eq!(d.block("B").unwrap().kept(), 1);
        assert_eq!(d.block("D").unwrap().kept(), 2);
        assert_eq!(d.n_u(), 7);
    }

    #[test]
    fn single_point_compresses_to_nothing() {
        let x = PointSet::from_points(&[[0.5, 0.5]]).unwrap();
        let d = build_design_reg(&x, &x, TransformFamilyReg::Similarity2d, 1).unwrap();
        assert_eq!(d.n_u(), 0);
        let e = ReducedEnergyReg::new(&x, &x, TransformFamilyReg::Similarity2d, 1).unwrap();
        assert_eq!(e.n_u(), 0);
        let p = DVector::from_element(1, 1.0);
        assert!(e.eval_e(&p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_n_p_and_dimension() {
        let x = square();
        assert!(build_design_reg(&x, &x, TransformFamilyReg::Affine2d, 5).is_err());
        assert!(build_design_reg(&x, &x, TransformFamilyReg::ScaleTrans3d, 2).is_err());
        let x = seven();
        assert!(matches!(
            ReducedEnergyReg::new(&square(), &square(), TransformFamilyReg::Affine2d, 4),
            Err(Error::Degenerate { .. })
        ));
        let e = ReducedEnergyReg::new(&x, &x, TransformFamilyReg::Affine2d, 4).unwrap();
        assert!(e.with_theta0(DVector::zeros(2)).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_energy() {
        let x = seven();
        for family in [TransformFamilyReg::Similarity2d, TransformFamilyReg::Affine2d] {
            let e = ReducedEnergyReg::new(&x, &x, family, 7).unwrap();
            let f = e.feasible();
            let p = f.from_pairs(&(0..7).map(|i| (i, i)).collect::<Vec<_>>()).unwrap();
            assert!(e.eval_e(&p).unwrap().abs() <= 1e-10);
            let est = e.recover_theta_t(&p).unwrap();
            for (a, b) in est.params.iter().zip(family.identity_theta().iter()) {
                assert!((a - b).abs() < 1e-6);
            }
            assert!(est.translation.norm() < 1e-6);
        }
    }

    #[test]
    fn pure_translation_is_recovered() {
        let x = square();
        let y = x.map(|p| vec![p[0] + 3.0, p[1] - 2.0]);
        let e = ReducedEnergyReg::new(&x, &y, TransformFamilyReg::Similarity2d, 4).unwrap();
        let p = e.feasible().from_pairs(&[(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap();
        let est = e.recover_theta_t(&p).unwrap();
        assert!((est.translation[0] - 3.0).abs() < 1e-8);
        assert!((est.translation[1] + 2.0).abs() < 1e-8);
        assert!((est.params[0] - 1.0).abs() < 1e-6 && est.params[1].abs() < 1e-6);
    }

    #[test]
    fn choose_h_branches() {
        let x = square();
        let e = ReducedEnergyReg::new(&x, &x, TransformFamilyReg::Similarity2d, 3).unwrap();
        let f = e.feasible();
        let p = f.from_pairs(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        // a binary correspondence gives a centred scatter matrix, which is PSD
        let tau = choose_h(&[e.reduce(&p)], &e).unwrap();
        assert_eq!(tau, H_EPSILON);
        let bad = e.reduce(&p) * -3.0;
        let lam = SymmetricEigen::new(e.a_matrix(&bad).unwrap()).eigenvalues.min();
        assert!(lam < 0.0);
        let tau = choose_h(&[e.reduce(&p), bad], &e).unwrap();
        assert!((tau - (-lam + H_EPSILON)).abs() < 1e-12);
    }

    #[test]
    fn non_pd_reports_numeric_domain() {
        let x = square();
        let e = ReducedEnergyReg::new(&x, &x, TransformFamilyReg::Similarity2d, 3)
            .unwrap()
            .with_h(DMatrix::zeros(2, 2))
            .unwrap();
        let p = e.feasible().from_pairs(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        let err = e.eval_ec(&(e.reduce(&p) * -3.0)).unwrap_err();
        assert!(matches!(err, Error::NumericDomain { min_eigenvalue, .. } if min_eigenvalue < 0.0));
    }
}
