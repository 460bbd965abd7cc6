//! Dense linear assignment: square problems by Jonker-Volgenant and
//! k-cardinality rectangular problems by successive shortest paths.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const UNASSIGNED: usize = usize::MAX;

/// Rectangular cost matrix together with the number of pairs to select.
#[derive(Debug, Clone)]
pub struct AssignmentProblem {
    cost: DMatrix<f64>,
    k: usize,
}

impl AssignmentProblem {
    pub fn new(cost: DMatrix<f64>, k: usize) -> Result<Self> {
        let (m, n) = cost.shape();
        if m == 0 || n == 0 {
            return Err(Error::input("cost matrix is empty"));
        }
        if k == 0 || k > m.min(n) {
            return Err(Error::input(format!(
                "cardinality {k} out of range 1..={} for a {m}x{n} cost matrix",
                m.min(n)
            )));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("cost matrix contains non-finite entries"));
        }
        Ok(Self { cost, k })
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// A set of disjoint (row, col) pairs, sorted by row, and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub value: f64,
}

impl Assignment {
    /// Sum of `cost` over the pairs.
    pub fn recompute(&self, cost: &DMatrix<f64>) -> f64 {
        self.pairs.iter().map(|&(i, j)| cost[(i, j)]).sum()
    }
}

/// Minimum-cost perfect assignment of a square matrix.
pub fn solve_lap(cost: &DMatrix<f64>) -> Result<Assignment> {
    let (m, n) = cost.shape();
    if m != n {
        return Err(Error::input(format!("cost matrix is {m}x{n}, expected square")));
    }
    AssignmentProblem::new(cost.clone(), n)?;
    let row_major: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| cost[(i, j)])).collect();
    let row_to_col = JonkerVolgenant::new(&row_major, n).solve()?;
    let pairs: Vec<_> = row_to_col.into_iter().enumerate().collect();
    let value = pairs.iter().map(|&(i, j)| cost[(i, j)]).sum();
    Ok(Assignment { pairs, value })
}

/// Minimum-cost selection of exactly `k` disjoint pairs.
///
/// Full square problems go to Jonker-Volgenant. Everything else runs `k`
/// successive shortest augmenting paths on the bipartite graph, which keeps
/// the optimal `j`-pair selection after augmentation `j`.
pub fn solve_k_lap(prob: &AssignmentProblem) -> Result<Assignment> {
    let cost = &prob.cost;
    let (m, n) = cost.shape();
    let k = prob.k;
    let pairs: Vec<(usize, usize)> = if m == n && k == n {
        let row_major: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| cost[(i, j)])).collect();
        JonkerVolgenant::new(&row_major, n).solve()?.into_iter().enumerate().collect()
    } else {
        ShortestPaths::new(cost).solve(k)?
    };
    let value = pairs.iter().map(|&(i, j)| cost[(i, j)]).sum();
    Ok(Assignment { pairs, value })
}

/// Successive shortest paths from a virtual source feeding every row to a
/// virtual sink fed by every column. Potentials keep reduced costs
/// non-negative so each path is found by Dijkstra over the columns; a matched
/// row is reached only through its own column.
struct ShortestPaths {
    cost: Vec<f64>,
    m: usize,
    n: usize,
    row_pot: Vec<f64>,
    col_pot: Vec<f64>,
    sink_pot: f64,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    /// Cheapest free row of every column and its cost.
    entry: Vec<(f64, usize)>,
}

impl ShortestPaths {
    fn new(cost: &DMatrix<f64>) -> Self {
        let (m, n) = cost.shape();
        let entry: Vec<(f64, usize)> = (0..n)
            .map(|j| {
                let i = cost.column(j).argmin().0;
                (cost[(i, j)], i)
            })
            .collect();
        let col_pot: Vec<f64> = entry.iter().map(|e| e.0).collect();
        let sink_pot = col_pot.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            entry,
            cost: (0..m).flat_map(|i| (0..n).map(move |j| cost[(i, j)])).collect(),
            m,
            n,
            row_pot: vec![0.0; m],
            col_pot,
            sink_pot,
            row_to_col: vec![UNASSIGNED; m],
            col_to_row: vec![UNASSIGNED; n],
        }
    }

    fn solve(mut self, k: usize) -> Result<Vec<(usize, usize)>> {
        let mut dist = vec![0.0; self.n];
        let mut pred = vec![0; self.n];
        let mut done = vec![false; self.n];
        for _ in 0..k {
            self.augment(&mut dist, &mut pred, &mut done)?;
        }
        Ok(self.row_to_col.iter().enumerate().filter(|&(_, &j)| j != UNASSIGNED).map(|(i, &j)| (i, j)).collect())
    }

    fn augment(&mut self, dist: &mut [f64], pred: &mut [usize], done: &mut [bool]) -> Result<()> {
        let (m, n) = (self.m, self.n);
        dist.fill(f64::INFINITY);
        done.fill(false);
        // Free rows sit at distance zero: their potential never moves.
        for j in 0..n {
            let (c, i) = self.entry[j];
            dist[j] = c - self.col_pot[j];
            pred[j] = i;
        }
        let mut row_dist = vec![f64::NAN; m];
        let mut sink = (f64::INFINITY, UNASSIGNED);
        loop {
            let next = (0..n).filter(|&j| !done[j]).min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let Some(j) = next.filter(|&j| dist[j] < sink.0) else { break };
            done[j] = true;
            let i = self.col_to_row[j];
            if i == UNASSIGNED {
                let d = dist[j] + self.col_pot[j] - self.sink_pot;
                if d < sink.0 {
                    sink = (d, j);
                }
                continue;
            }
            let d_row = dist[j] - self.cost[i * n + j] + self.col_pot[j] - self.row_pot[i];
            row_dist[i] = d_row;
            let row = &self.cost[i * n..(i + 1) * n];
            for jj in 0..n {
                if !done[jj] {
                    let d = d_row + row[jj] + self.row_pot[i] - self.col_pot[jj];
                    if d < dist[jj] {
                        dist[jj] = d;
                        pred[jj] = i;
                    }
                }
            }
        }
        let (d_sink, mut j) = sink;
        if j == UNASSIGNED {
            return Err(Error::internal("no augmenting path in a dense assignment problem"));
        }
        for c in 0..n {
            self.col_pot[c] += if done[c] { dist[c] } else { d_sink };
        }
        for r in 0..m {
            if self.row_to_col[r] != UNASSIGNED {
                self.row_pot[r] += if row_dist[r].is_nan() { d_sink } else { row_dist[r] };
            }
        }
        self.sink_pot += d_sink;
        loop {
            let i = pred[j];
            let previous = self.row_to_col[i];
            self.row_to_col[i] = j;
            self.col_to_row[j] = i;
            if previous == UNASSIGNED {
                self.refresh_entries(i);
                return Ok(());
            }
            j = previous;
        }
    }

    /// Row `taken` just left the free set.
    fn refresh_entries(&mut self, taken: usize) {
        let n = self.n;
        for j in 0..n {
            if self.entry[j].1 == taken {
                self.entry[j] = (0..self.m)
                    .filter(|&i| self.row_to_col[i] == UNASSIGNED)
                    .map(|i| (self.cost[i * n + j], i))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap_or((f64::INFINITY, UNASSIGNED));
            }
        }
    }
}

/// Maximum-value selection of exactly `k` disjoint pairs.
pub fn maximize_k_lap(prob: &AssignmentProblem) -> Result<Assignment> {
    let negated = AssignmentProblem { cost: -prob.cost.clone(), k: prob.k };
    let mut best = solve_k_lap(&negated)?;
    best.value = best.recompute(&prob.cost);
    Ok(best)
}

/// Jonker-Volgenant shortest augmenting path solver on a dense row-major
/// square matrix. Column duals are explicit; row duals are implied by the
/// current assignment.
struct JonkerVolgenant<'a> {
    cost: &'a [f64],
    n: usize,
    v: Vec<f64>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    free_rows: Vec<usize>,
}

impl<'a> JonkerVolgenant<'a> {
    fn new(cost: &'a [f64], n: usize) -> Self {
        Self {
            cost,
            n,
            v: vec![0.0; n],
            row_to_col: vec![UNASSIGNED; n],
            col_to_row: vec![UNASSIGNED; n],
            free_rows: Vec::with_capacity(n),
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    fn solve(mut self) -> Result<Vec<usize>> {
        self.column_reduction();
        for _ in 0..2 {
            if self.free_rows.is_empty() {
                break;
            }
            self.augmenting_row_reduction();
        }
        let free = std::mem::take(&mut self.free_rows);
        let mut dist = vec![0.0; self.n];
        let mut pred = vec![0; self.n];
        let mut ready = vec![false; self.n];
        for row in free {
            self.augment(row, &mut dist, &mut pred, &mut ready)?;
        }
        Ok(self.row_to_col)
    }

    /// Column reduction followed by reduction transfer from uniquely
    /// assigned rows.
    fn column_reduction(&mut self) {
        let n = self.n;
        let mut matches = vec![0usize; n];
        for j in (0..n).rev() {
            let mut imin = 0;
            let mut min = self.c(0, j);
            for i in 1..n {
                let c = self.c(i, j);
                if c < min {
                    min = c;
                    imin = i;
                }
            }
            self.v[j] = min;
            matches[imin] += 1;
            if matches[imin] == 1 {
                self.row_to_col[imin] = j;
                self.col_to_row[j] = imin;
            }
        }
        for i in 0..n {
            match matches[i] {
                0 => self.free_rows.push(i),
                1 => {
                    let j1 = self.row_to_col[i];
                    let mut min = f64::INFINITY;
                    for j in (0..n).filter(|&j| j != j1) {
                        min = min.min(self.c(i, j) - self.v[j]);
                    }
                    if min.is_finite() {
                        self.v[j1] -= min;
                    }
                }
                _ => {}
            }
        }
    }

    fn augmenting_row_reduction(&mut self) {
        let n = self.n;
        let num_free = self.free_rows.len();
        let mut current = 0;
        let mut still_free = 0;
        let mut scans = 0usize;
        while current < num_free {
            scans += 1;
            let i = self.free_rows[current];
            current += 1;

            // lowest and second-lowest reduced cost in row i
            let (mut u1, mut u2) = (f64::INFINITY, f64::INFINITY);
            let (mut j1, mut j2) = (0, UNASSIGNED);
            for j in 0..n {
                let h = self.c(i, j) - self.v[j];
                if h < u2 {
                    if h < u1 {
                        u2 = u1;
                        j2 = j1;
                        u1 = h;
                        j1 = j;
                    } else {
                        u2 = h;
                        j2 = j;
                    }
                }
            }
            if n == 1 {
                j2 = UNASSIGNED;
                u2 = u1;
            }

            let mut i0 = self.col_to_row[j1];
            let lowered = self.v[j1] - (u2 - u1);
            let lowers = lowered < self.v[j1];
            if scans < current * n {
                if lowers {
                    self.v[j1] = lowered;
                } else if i0 != UNASSIGNED && j2 != UNASSIGNED {
                    j1 = j2;
                    i0 = self.col_to_row[j1];
                }
                if i0 != UNASSIGNED {
                    if lowers {
                        current -= 1;
                        self.free_rows[current] = i0;
                    } else {
                        self.free_rows[still_free] = i0;
                        still_free += 1;
                    }
                }
            } else if i0 != UNASSIGNED {
                self.free_rows[still_free] = i0;
                still_free += 1;
            }
            if i0 != UNASSIGNED {
                self.row_to_col[i0] = UNASSIGNED;
            }
            self.row_to_col[i] = j1;
            self.col_to_row[j1] = i;
        }
        self.free_rows.truncate(still_free);
    }

    /// Dijkstra over reduced costs from a free row to the nearest free
    /// column; ties go to the lowest column index.
    fn augment(
        &mut self,
        start: usize,
        dist: &mut [f64],
        pred: &mut [usize],
        ready: &mut [bool],
    ) -> Result<()> {
        let n = self.n;
        for j in 0..n {
            dist[j] = self.c(start, j) - self.v[j];
            pred[j] = start;
            ready[j] = false;
        }
        let mut scanned = Vec::with_capacity(n);
        let end = loop {
            let mut jmin = UNASSIGNED;
            let mut dmin = f64::INFINITY;
            for j in 0..n {
                if !ready[j] && (jmin == UNASSIGNED || dist[j] < dmin) {
                    dmin = dist[j];
                    jmin = j;
                }
            }
            if jmin == UNASSIGNED {
                return Err(Error::internal("no augmenting path found"));
            }
            if self.col_to_row[jmin] == UNASSIGNED {
                break jmin;
            }
            ready[jmin] = true;
            scanned.push(jmin);
            let i = self.col_to_row[jmin];
            let h = self.c(i, jmin) - self.v[jmin] - dmin;
            for j in 0..n {
                if ready[j] {
                    continue;
                }
                let cand = self.c(i, j) - self.v[j] - h;
                if cand < dist[j] {
                    dist[j] = cand;
                    pred[j] = i;
                }
            }
        };
        let dend = dist[end];
        for &j in &scanned {
            self.v[j] += dist[j] - dend;
        }
        let mut j = end;
        for _ in 0..=n {
            let i = pred[j];
            self.col_to_row[j] = i;
            let next = std::mem::replace(&mut self.row_to_col[i], j);
            if i == start {
                return Ok(());
            }
            j = next;
        }
        Err(Error::internal("augmenting path did not terminate"))
    }
}
