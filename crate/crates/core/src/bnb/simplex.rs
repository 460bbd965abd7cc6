use nalgebra::{DMatrix, DVector};

/// A full-dimensional simplex in reduced coordinates with cached `E_c`
/// values at its vertices.
#[derive(Debug, Clone)]
pub struct Simplex {
    pub vertices: Vec<DVector<f64>>,
    pub ec_values: Vec<f64>,
    pub lower_bound: f64,
    /// Correspondence attaining the bound problem, if it was feasible.
    pub witness: Option<DVector<f64>>,
    pub depth: usize,
}

impl Simplex {
    pub fn new(vertices: Vec<DVector<f64>>, ec_values: Vec<f64>, depth: usize) -> Self {
        debug_assert_eq!(vertices.len(), ec_values.len());
        Self { vertices, ec_values, lower_bound: f64::NEG_INFINITY, witness: None, depth }
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Columns `v_i - v_last` for `i < n_u`.
    pub fn edge_matrix(&self) -> DMatrix<f64> {
        let k = self.dim();
        let last = &self.vertices[k];
        DMatrix::from_fn(last.len(), k, |r, c| self.vertices[c][r] - last[r])
    }

    pub fn volume(&self) -> f64 {
        let k = self.dim();
        let factorial: f64 = (1..=k).map(|v| v as f64).product();
        self.edge_matrix().determinant().abs() / factorial
    }

    /// Barycentric coordinates of `u`, or `None` when the simplex is singular.
    pub fn barycentric(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        let k = self.dim();
        let rhs = u - &self.vertices[k];
        let head = self.edge_matrix().lu().solve(&rhs)?;
        let mut out = DVector::zeros(k + 1);
        out.rows_mut(0, k).copy_from(&head);
        out[k] = 1.0 - head.sum();
        Some(out)
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        self.barycentric(u).is_some_and(|b| b.iter().all(|&x| x >= -tol))
    }

    /// Index pair `(i, j)`, `i < j`, of the longest edge. Ties go to the
    /// lexicographically smallest pair.
    pub fn longest_edge(&self) -> (usize, usize) {
        let n = self.vertices.len();
        let mut lengths = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                lengths.push(((i, j), (&self.vertices[i] - &self.vertices[j]).norm_squared()));
            }
        }
        let max = lengths.iter().map(|e| e.1).fold(0.0_f64, f64::max);
        lengths
            .into_iter()
            .find(|e| e.1 >= max * (1.0 - 1e-12))
            .map(|e| e.0)
            .expect("simplex has at least one edge")
    }

    /// Splits at the midpoint of the longest edge `(i, j)`. The first child
    /// replaces `v_i` and the second `v_j`; `ec_mid` is `E_c` at the midpoint.
    pub fn bisect_with(&self, ec_mid: f64) -> (Simplex, Simplex) {
        let (i, j) = self.longest_edge();
        let mid = self.midpoint(i, j);
        let mut a = Simplex::new(self.vertices.clone(), self.ec_values.clone(), self.depth + 1);
        a.vertices[i] = mid.clone();
        a.ec_values[i] = ec_mid;
        let mut b = Simplex::new(self.vertices.clone(), self.ec_values.clone(), self.depth + 1);
        b.vertices[j] = mid;
        b.ec_values[j] = ec_mid;
        (a, b)
    }

    pub fn midpoint(&self, i: usize, j: usize) -> DVector<f64> {
        (&self.vertices[i] + &self.vertices[j]) * 0.5
    }

    /// Midpoint of the edge that [`Self::bisect_with`] will split.
    pub fn split_point(&self) -> DVector<f64> {
        let (i, j) = self.longest_edge();
        self.midpoint(i, j)
    }
}

/// Bisects a simplex, evaluating `ec` once at the shared midpoint.
pub fn bisect<F, E>(s: &Simplex, ec: F) -> Result<(Simplex, Simplex), E>
where
    F: FnOnce(&DVector<f64>) -> Result<f64, E>,
{
    let value = ec(&s.split_point())?;
    Ok(s.bisect_with(value))
}
