//! Normal simplicial branch-and-bound for concave minimisation over the
//! partial-permutation polytope.

pub mod bounds;
pub mod lp;
pub mod region;
pub mod simplex;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{solve_k_lap, AssignmentProblem};
use crate::energy::ConcaveEnergy;
use crate::error::{Error, Result};

pub use bounds::{envelope_gradient, envelope_value, lower_bound_fast, lower_bound_lp};
pub use crate::energy::reg::choose_h;
pub use lp::{solve_dense_lp, LinearProgram, LpOutcome};
pub use region::initial_region;
pub use simplex::{bisect, Simplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundScheme {
    /// Exact convex-envelope bound via linear programming.
    Lp,
    /// Envelope minimised over the whole polytope by one assignment problem.
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// Frontier exhausted; `best_e` is within `epsilon` of the global minimum.
    EpsOptimal,
    /// Some simplexes were dropped at the depth limit; no optimality claim.
    DepthTerminated,
    /// Stopped by the iteration cap.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct BnBConfig {
    pub scheme: BoundScheme,
    pub epsilon: f64,
    /// Fast scheme only: simplexes deeper than this are not bisected.
    pub max_depth: usize,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Also try the assignment rounding of fractional witnesses as incumbents.
    pub round_witnesses: bool,
    /// Lp scheme: also try the assignment minimising each simplex's affine
    /// envelope (the fast-scheme witness) as an incumbent.
    pub envelope_candidates: bool,
    /// Refine incumbent candidates by successive linearisation of `E_c`.
    pub polish_incumbents: bool,
    pub max_iterations: Option<usize>,
    /// Simplexes bisected per iteration. 1 follows the textbook algorithm.
    pub expansions_per_wave: usize,
}

impl Default for BnBConfig {
    fn default() -> Self {
        Self {
            scheme: BoundScheme::Lp,
            epsilon: 1e-6,
            max_depth: 15,
            workers: 0,
            round_witnesses: true,
            envelope_candidates: true,
            polish_incumbents: true,
            max_iterations: None,
            expansions_per_wave: 1,
        }
    }
}

impl BnBConfig {
    pub fn fast() -> Self {
        Self { scheme: BoundScheme::Fast, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::input("epsilon must be non-negative"));
        }
        if self.expansions_per_wave == 0 {
            return Err(Error::input("expansions per wave must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BnBResult {
    pub best_p: DVector<f64>,
    pub best_pairs: Vec<(usize, usize)>,
    pub best_e: f64,
    /// `(global lower bound, global upper bound)` after setup and after every
    /// iteration.
    pub history: Vec<(f64, f64)>,
    pub iterations: usize,
    pub simplexes_expanded: usize,
    pub wall_time: Duration,
    pub certificate: Certificate,
}

struct Node {
    bound: f64,
    id: u64,
    simplex: Simplex,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that `BinaryHeap` pops the lowest bound, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

struct Incumbent {
    p: DVector<f64>,
    e: f64,
}

impl Incumbent {
    fn offer(&mut self, e: f64, p: DVector<f64>) {
        if e < self.e {
            self.e = e;
            self.p = p;
        }
    }

    /// Offers every candidate, polishing the assignments not polished before.
    fn offer_all<E: ConcaveEnergy + ?Sized>(
        &mut self,
        candidates: Vec<(f64, DVector<f64>)>,
        polished: &mut HashSet<Vec<(usize, usize)>>,
        energy: &E,
        config: &BnBConfig,
    ) -> Result<()> {
        let omega = energy.feasible();
        let mut fresh = Vec::new();
        for (e, p) in candidates {
            if config.polish_incumbents && polished.insert(omega.to_pairs(&p)) {
                fresh.push((e, p));
            } else {
                self.offer(e, p);
            }
        }
        let refined: Vec<_> =
            fresh.into_par_iter().map(|(e, p)| polish(energy, e, p)).collect::<Result<_>>()?;
        for (e, p) in refined {
            self.offer(e, p);
        }
        Ok(())
    }
}

/// Bounds one simplex and scores the incumbent candidate its witness yields.
fn evaluate<E: ConcaveEnergy + ?Sized>(
    mut s: Simplex,
    energy: &E,
    config: &BnBConfig,
) -> Result<(Simplex, Option<(f64, DVector<f64>)>)> {
    let (bound, witness) = match config.scheme {
        BoundScheme::Lp => lower_bound_lp(&s, energy)?,
        BoundScheme::Fast => lower_bound_fast(&s, energy)?,
    };
    s.lower_bound = bound;
    let omega = energy.feasible();
    let candidate = match &witness {
        Some(w) if omega.is_binary(w) => Some(omega.from_pairs(&omega.to_pairs(w))?),
        Some(w) if config.round_witnesses => Some(omega.round(w)?),
        _ => None,
    };
    s.witness = witness;
    let mut scored = candidate.map(|p| energy.eval_e(&p).map(|e| (e, p))).transpose()?;
    if config.scheme == BoundScheme::Lp && config.envelope_candidates && bound.is_finite() {
        if let (_, Some(p)) = lower_bound_fast(&s, energy)? {
            let e = energy.eval_e(&p)?;
            if scored.as_ref().map_or(true, |(best, _)| e < *best) {
                scored = Some((e, p));
            }
        }
    }
    Ok((s, scored))
}

/// Minimises `energy` over its feasible set.
pub fn minimize<E: ConcaveEnergy + Send>(energy: &mut E, config: &BnBConfig) -> Result<BnBResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::internal(format!("thread pool: {e}")))?;
    pool.install(|| run(energy, config))
}

fn linear_only<E: ConcaveEnergy>(energy: &E) -> Result<DVector<f64>> {
    let omega = energy.feasible();
    let cost = DMatrix::from_fn(omega.m, omega.n, |i, j| energy.linear_cost()[i * omega.n + j]);
    let a = solve_k_lap(&AssignmentProblem::new(cost, omega.n_p)?)?;
    omega.from_pairs(&a.pairs)
}

fn finish<E: ConcaveEnergy>(
    energy: &E,
    p: DVector<f64>,
    history: Vec<(f64, f64)>,
    iterations: usize,
    simplexes_expanded: usize,
    start: Instant,
    certificate: Certificate,
) -> Result<BnBResult> {
    let best_e = energy.eval_e(&p)?;
    Ok(BnBResult {
        best_pairs: energy.feasible().to_pairs(&p),
        best_p: p,
        best_e,
        history,
        iterations,
        simplexes_expanded,
        wall_time: start.elapsed(),
        certificate,
    })
}

fn run<E: ConcaveEnergy>(energy: &mut E, config: &BnBConfig) -> Result<BnBResult> {
    let start = Instant::now();
    let omega = energy.feasible();

    // With one feasible point, or with E_c constant on Ω, there is nothing to
    // branch on: the linear part alone decides.
    if omega.is_singleton() || energy.n_u() == 0 {
        let p = linear_only(energy)?;
        let e = energy.eval_e(&p)?;
        return finish(energy, p, vec![(e, e)], 0, 0, start, Certificate::EpsOptimal);
    }

    let regions = initial_region(energy)?;
    let all_vertices: Vec<DVector<f64>> = regions.iter().flatten().cloned().collect();
    energy.prepare(&all_vertices)?;
    let energy: &E = energy;

    // v0 is shared by every orthant; evaluate it once.
    let ec_v0 = energy.eval_ec(&regions[0][0])?;
    let initial: Vec<Simplex> = regions
        .into_par_iter()
        .map(|vertices| {
            let mut ec = Vec::with_capacity(vertices.len());
            ec.push(ec_v0);
            for v in &vertices[1..] {
                ec.push(energy.eval_ec(v)?);
            }
            Ok(Simplex::new(vertices, ec, 0))
        })
        .collect::<Result<_>>()?;

    let seed = linear_only(energy)?;
    let seed_e = energy.eval_e(&seed)?;
    let mut best = Incumbent { e: f64::INFINITY, p: seed.clone() };
    let mut polished = HashSet::new();
    let mut frontier = BinaryHeap::new();
    let mut next_id = 0u64;
    let mut push = |frontier: &mut BinaryHeap<Node>, s: Simplex| {
        frontier.push(Node { bound: s.lower_bound, id: next_id, simplex: s });
        next_id += 1;
    };

    let evaluated: Vec<_> =
        initial.into_par_iter().map(|s| evaluate(s, energy, config)).collect::<Result<_>>()?;
    let mut candidates = vec![(seed_e, seed)];
    for (s, candidate) in evaluated {
        candidates.extend(candidate);
        push(&mut frontier, s);
    }
    best.offer_all(candidates, &mut polished, energy, config)?;

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut expanded = 0;
    let mut dropped = false;
    let record = |frontier: &mut BinaryHeap<Node>, best: &Incumbent, history: &mut Vec<_>| {
        prune(frontier, best.e - config.epsilon);
        let lower = frontier.peek().map_or(best.e, |n| n.bound.min(best.e));
        history.push((lower, best.e));
    };
    record(&mut frontier, &best, &mut history);

    loop {
        if frontier.is_empty() {
            break;
        }
        if config.max_iterations.is_some_and(|cap| iterations >= cap) {
            let p = best.p;
            return finish(energy, p, history, iterations, expanded, start, Certificate::IterationLimit);
        }
        let mut selected = Vec::with_capacity(config.expansions_per_wave);
        while selected.len() < config.expansions_per_wave {
            let Some(node) = frontier.pop() else { break };
            if node.bound >= best.e - config.epsilon {
                frontier.clear();
                break;
            }
            if config.scheme == BoundScheme::Fast && node.simplex.depth >= config.max_depth {
                dropped = true;
                continue;
            }
            selected.push(node.simplex);
        }
        if selected.is_empty() {
            continue;
        }
        expanded += selected.len();
        let children: Vec<Simplex> = selected
            .par_iter()
            .map(|s| bisect(s, |u| energy.eval_ec(u)).map(|(a, b)| [a, b]))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let evaluated: Vec<_> =
            children.into_par_iter().map(|s| evaluate(s, energy, config)).collect::<Result<_>>()?;
        let mut candidates = Vec::new();
        let mut kept = Vec::new();
        for (s, candidate) in evaluated {
            candidates.extend(candidate);
            kept.push(s);
        }
        best.offer_all(candidates, &mut polished, energy, config)?;
        for s in kept {
            if s.lower_bound < best.e - config.epsilon {
                push(&mut frontier, s);
            }
        }
        iterations += 1;
        record(&mut frontier, &best, &mut history);
    }

    let certificate = if dropped { Certificate::DepthTerminated } else { Certificate::EpsOptimal };
    finish(energy, best.p, history, iterations, expanded, start, certificate)
}

/// Relative step of the central differences in [`polish`].
const POLISH_STEP: f64 = 1e-6;
const POLISH_ROUNDS: usize = 50;

/// Successive linearisation: `E_c` lies below its tangent plane at `Q^T p`,
/// so the assignment minimising the linearised energy never raises `E`.
/// Each round takes a central-difference gradient and stops as soon as the
/// energy fails to drop.
fn polish<E: ConcaveEnergy + ?Sized>(energy: &E, mut e: f64, mut p: DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let omega = energy.feasible();
    for _ in 0..POLISH_ROUNDS {
        let u = energy.reduce(&p);
        let mut g = DVector::zeros(u.len());
        for k in 0..u.len() {
            let h = POLISH_STEP * u[k].abs().max(1.0);
            let (mut hi, mut lo) = (u.clone(), u.clone());
            hi[k] += h;
            lo[k] -= h;
            match (energy.eval_ec(&hi), energy.eval_ec(&lo)) {
                (Ok(a), Ok(b)) => g[k] = (a - b) / (2.0 * h),
                _ => return Ok((e, p)),
            }
        }
        let cost = energy.q() * g + energy.linear_cost();
        let cost = DMatrix::from_fn(omega.m, omega.n, |i, j| cost[i * omega.n + j]);
        let next = omega.from_pairs(&solve_k_lap(&AssignmentProblem::new(cost, omega.n_p)?)?.pairs)?;
        let next_e = energy.eval_e(&next)?;
        if !(next_e < e) {
            break;
        }
        e = next_e;
        p = next;
    }
    Ok((e, p))
}

/// Discards the frontier once its best bound cannot beat `cutoff`.
fn prune(frontier: &mut BinaryHeap<Node>, cutoff: f64) {
    // The top holds the smallest bound, so either everything goes or nothing.
    if frontier.peek().is_some_and(|n| n.bound >= cutoff) {
        frontier.clear();
    }
}
