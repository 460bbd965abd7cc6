//! Dense two-phase primal simplex. Stalling on degenerate vertices is broken
//! by perturbing the right-hand side, with Bland's anti-cycling rule as the
//! last resort.
//!
//! Solves `min c^T x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots tolerated before the right-hand side is
/// perturbed.
const DEGENERATE_LIMIT: usize = 20;
/// Relative size of one perturbation step.
const PERTURBATION: f64 = 1e-8;
/// Perturbation rounds per phase before switching to Bland's rule for good.
const MAX_PERTURBATIONS: usize = 50;
/// Dual simplex pivots per row-plus-column spent restoring the true
/// right-hand side.
const CLEANUP_FACTOR: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub equalities: Vec<(Vec<f64>, f64)>,
    pub inequalities: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// A basic optimal solution.
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, ..Default::default() }
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.equalities.push((row, rhs));
    }

    pub fn le(&mut self, row: Vec<f64>, rhs: f64) {
        self.inequalities.push((row, rhs));
    }
}

struct Tableau {
    /// `rows x (cols + 2)`. The last two columns are the working right-hand
    /// side, which may be perturbed, and the true one. Row operations keep
    /// the true column equal to `B^-1 b`.
    t: Vec<f64>,
    width: usize,
    rows: usize,
    basis: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn cols(&self) -> usize {
        self.width - 2
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 2)
    }

    fn true_rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..w {
            self.t[pr * w + c] *= inv;
        }
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Reduced costs of `cost` (length `cols`) with respect to the basis.
    fn reduced(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut d: Vec<f64> = cost[..allowed].to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, dc) in d.iter_mut().enumerate() {
                    *dc -= cb * self.at(r, c);
                }
            }
        }
        d
    }

    fn update_reduced(&self, d: &mut [f64], pr: usize, pc: usize) {
        let f = d[pc];
        for (c, dc) in d.iter_mut().enumerate() {
            *dc -= f * self.at(pr, c);
        }
        d[pc] = 0.0;
    }

    /// Loosens every working right-hand side by a small random amount, which
    /// makes ties in the ratio test unlikely.
    fn perturb(&mut self) {
        let c = self.width - 2;
        for r in 0..self.rows {
            let v = self.t[r * self.width + c];
            self.t[r * self.width + c] = v + PERTURBATION * (1.0 + v.abs()) * self.rng.gen_range(1.0..2.0);
        }
    }

    /// Primal simplex on `cost`, entering only among the first `allowed`
    /// columns. Returns false if unbounded.
    ///
    /// Prices by most negative reduced cost. A long run of degenerate pivots
    /// triggers a perturbation; once those are used up, Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        let mut d = self.reduced(cost, allowed);
        let mut degenerate_run = 0;
        let mut perturbations = 0;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..allowed).find(|&c| d[c] < -PIVOT_TOL)
            } else {
                (0..allowed)
                    .filter(|&c| d[c] < -PIVOT_TOL)
                    .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
            };
            let Some(pc) = entering else {
                return true;
            };
            let ratio = |r: usize| {
                let a = self.at(r, pc);
                (a > PIVOT_TOL).then(|| self.rhs(r).max(0.0) / a)
            };
            let min_ratio = (0..self.rows).filter_map(ratio).fold(f64::INFINITY, f64::min);
            if min_ratio == f64::INFINITY {
                return false;
            }
            // among tied rows leave the lowest-index basic variable
            let pr = (0..self.rows)
                .filter(|&r| ratio(r).is_some_and(|q| q <= min_ratio + PIVOT_TOL))
                .min_by_key(|&r| self.basis[r])
                .expect("a row attains the minimum ratio");
            if min_ratio <= PIVOT_TOL {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_LIMIT && !bland {
                    degenerate_run = 0;
                    if perturbations < MAX_PERTURBATIONS {
                        perturbations += 1;
                        self.perturb();
                        continue;
                    }
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
            self.update_reduced(&mut d, pr, pc);
        }
    }

    /// Restores the true right-hand side and repairs primal feasibility with
    /// dual simplex pivots, which keep the reduced costs non-negative. Stops
    /// early after a pivot budget; the basis then stays dual feasible.
    fn restore(&mut self, cost: &[f64], allowed: usize) {
        let (work, truth) = (self.width - 2, self.width - 1);
        for r in 0..self.rows {
            self.t[r * self.width + work] = self.t[r * self.width + truth];
        }
        let mut d = self.reduced(cost, allowed);
        for _ in 0..CLEANUP_FACTOR * (self.rows + allowed) {
            let leaving = (0..self.rows)
                .filter(|&r| self.rhs(r) < -PIVOT_TOL)
                .min_by(|&a, &b| self.rhs(a).total_cmp(&self.rhs(b)).then(a.cmp(&b)));
            let Some(pr) = leaving else {
                return;
            };
            let entering = (0..allowed)
                .filter(|&c| self.at(pr, c) < -PIVOT_TOL)
                .min_by(|&a, &b| {
                    let qa = d[a].max(0.0) / -self.at(pr, a);
                    let qb = d[b].max(0.0) / -self.at(pr, b);
                    qa.total_cmp(&qb).then(a.cmp(&b))
                });
            let Some(pc) = entering else {
                return;
            };
            self.pivot(pr, pc);
            self.update_reduced(&mut d, pr, pc);
        }
    }
}

/// Returns a basic optimal solution, or `Infeasible`. An unbounded program is
/// reported as an internal error; the callers only pose bounded programs.
///
/// The value is `c_B^T B^-1 b` for the final basis with the true right-hand
/// side. That basis is dual feasible, so the value never exceeds the optimum
/// even in the rare case that the cleanup pivots run out.
pub fn solve_dense_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let nvar = lp.objective.len();
    for (row, _) in lp.equalities.iter().chain(&lp.inequalities) {
        if row.len() != nvar {
            return Err(Error::input("constraint row length differs from objective length"));
        }
    }
    let n_eq = lp.equalities.len();
    let n_le = lp.inequalities.len();
    let rows = n_eq + n_le;
    // columns: original | slacks | artificials | working rhs | true rhs
    // A `<=` row with non-negative right-hand side starts with its slack
    // basic; every other row gets an artificial.
    let n_slack = n_le;
    let needs_art: Vec<bool> =
        (0..rows).map(|r| r < n_eq || lp.inequalities[r - n_eq].1 < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let cols = nvar + n_slack + n_art;
    let width = cols + 2;
    let mut t = vec![0.0; rows * width];
    let mut basis = vec![0; rows];

    let mut art = nvar + n_slack;
    for (r, (row, rhs)) in lp.equalities.iter().chain(&lp.inequalities).enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        let base = r * width;
        for (c, &v) in row.iter().enumerate() {
            t[base + c] = sign * v;
        }
        if r >= n_eq {
            t[base + nvar + (r - n_eq)] = sign;
        }
        t[base + cols] = sign * rhs;
        t[base + cols + 1] = sign * rhs;
        if needs_art[r] {
            t[base + art] = 1.0;
            basis[r] = art;
            art += 1;
        } else {
            basis[r] = nvar + (r - n_eq);
        }
    }
    let mut tab = Tableau { t, width, rows, basis, rng: ChaCha8Rng::seed_from_u64(0x5eed) };

    // phase one: drive artificials to zero
    let mut phase1 = vec![0.0; cols];
    for c in nvar + n_slack..cols {
        phase1[c] = 1.0;
    }
    if !tab.optimize(&phase1, cols) {
        return Err(Error::internal("phase-one program reported unbounded"));
    }
    let infeas: f64 = (0..rows)
        .filter(|&r| tab.basis[r] >= nvar + n_slack)
        .map(|r| tab.rhs(r))
        .sum();
    let scale = 1.0 + lp.equalities.iter().chain(&lp.inequalities).map(|(_, b)| b.abs()).fold(0.0, f64::max);
    if infeas > FEAS_TOL * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // pivot remaining (zero-valued) artificials out of the basis
    let structural = nvar + n_slack;
    let mut keep = vec![true; rows];
    for r in 0..rows {
        if tab.basis[r] >= structural {
            match (0..structural).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                Some(c) => tab.pivot(r, c),
                None => keep[r] = false,
            }
        }
    }
    if keep.iter().any(|k| !k) {
        let mut t = Vec::with_capacity(tab.t.len());
        let mut basis = Vec::new();
        for r in 0..rows {
            if keep[r] {
                t.extend_from_slice(&tab.t[r * width..(r + 1) * width]);
                basis.push(tab.basis[r]);
            }
        }
        tab = Tableau { rows: basis.len(), t, width, basis, rng: tab.rng };
    }
    debug_assert_eq!(tab.cols(), cols);

    let mut cost = vec![0.0; cols];
    cost[..nvar].copy_from_slice(&lp.objective);
    if !tab.optimize(&cost, structural) {
        return Err(Error::internal("linear program is unbounded"));
    }
    tab.restore(&cost, structural);
    let mut x = vec![0.0; nvar];
    let mut value = 0.0;
    for r in 0..tab.rows {
        let b = tab.basis[r];
        if b < nvar {
            x[b] = tab.true_rhs(r).max(0.0);
            value += lp.objective[b] * tab.true_rhs(r);
        }
    }
    Ok(LpOutcome::Optimal { x, value })
}
