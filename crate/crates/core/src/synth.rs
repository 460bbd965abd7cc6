//! Synthetic matching experiments: prototype shapes, disturbances, ground
//! truth and batch trials.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Rotation3, Unit, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bnb::{BnBConfig, BoundScheme};
use crate::energy::{ScaleRange, TransformEstimate};
use crate::error::{Error, Result};
use crate::matcher::{match_point_sets, MatchOptions, Mode, PairCount};
use crate::points::{distance, PointSet};

/// Cap on improving 2-opt moves when building an occlusion tour.
pub const MAX_TWO_OPT_SWAPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Closed planar curve with a crossing tail.
    Fish,
    /// Planar polyline shaped like a capital R.
    Glyph,
    /// Surface samples of a four-legged body built from superellipsoids.
    Quadruped,
    /// Points read from a file; `count` is ignored.
    File(String),
}

impl Shape {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Shape::Fish | Shape::Glyph => Some(2),
            Shape::Quadruped => Some(3),
            Shape::File(_) => None,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Fish => f.write_str("fish"),
            Shape::Glyph => f.write_str("glyph"),
            Shape::Quadruped => f.write_str("quadruped"),
            Shape::File(path) => write!(f, "file:{path}"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fish" => Ok(Shape::Fish),
            "glyph" => Ok(Shape::Glyph),
            "quadruped" => Ok(Shape::Quadruped),
            _ => match s.strip_prefix("file:") {
                Some(path) => Ok(Shape::File(path.to_string())),
                None => Err(Error::input(format!("unknown shape '{s}'"))),
            },
        }
    }
}

/// Samples a prototype shape, centred on its centroid with unit diameter.
pub fn make_prototype(shape: &Shape, count: usize) -> Result<PointSet> {
    if !matches!(shape, Shape::File(_)) && count < 10 {
        return Err(Error::input(format!("prototype needs at least 10 points, got {count}")));
    }
    let raw = match shape {
        Shape::Fish => fish(count),
        Shape::Glyph => glyph(count),
        Shape::Quadruped => quadruped(count),
        Shape::File(path) => PointSet::read(path)?,
    };
    normalize(&raw)
}

/// Translates the centroid to the origin and scales to unit diameter.
pub fn normalize(points: &PointSet) -> Result<PointSet> {
    let c = points.centroid();
    let diam = points.diameter();
    if !(diam > 0.0) {
        return Err(Error::input("shape has zero diameter"));
    }
    Ok(points.map(|x| x.iter().zip(&c).map(|(v, m)| (v - m) / diam).collect()))
}

fn fish(count: usize) -> PointSet {
    let coords = (0..count)
        .flat_map(|k| {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            let (s, c) = t.sin_cos();
            [c - s * s / std::f64::consts::SQRT_2, c * s]
        })
        .collect();
    PointSet::new(2, coords).expect("fish coordinates are finite")
}

fn glyph(count: usize) -> PointSet {
    // stem, bowl (half circle), leg
    let bowl = |t: f64| {
        let a = std::f64::consts::FRAC_PI_2 - t * std::f64::consts::PI;
        [0.0 + 0.6 * a.cos(), 1.5 + 0.5 * a.sin()]
    };
    let strokes: Vec<Box<dyn Fn(f64) -> [f64; 2]>> = vec![
        Box::new(|t| [0.0, 2.0 * t]),
        Box::new(bowl),
        Box::new(|t| [0.15 + 0.65 * t, 1.0 - t]),
    ];
    let lengths: Vec<f64> = strokes
        .iter()
        .map(|s| (0..200).map(|k| dist2(s(k as f64 / 200.0), s((k + 1) as f64 / 200.0))).sum())
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut coords = Vec::with_capacity(2 * count);
    for k in 0..count {
        let mut at = total * (k as f64 + 0.5) / count as f64;
        for (stroke, &len) in strokes.iter().zip(&lengths) {
            if at <= len {
                coords.extend(stroke(at / len));
                break;
            }
            at -= len;
        }
    }
    PointSet::new(2, coords).expect("glyph coordinates are finite")
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn quadruped(count: usize) -> PointSet {
    // (centre, half-axes) of body, head and legs
    let parts: [([f64; 3], [f64; 3]); 6] = [
        ([0.0, 0.0, 0.0], [1.0, 0.35, 0.3]),
        ([1.15, 0.0, 0.35], [0.3, 0.2, 0.2]),
        ([0.7, 0.2, -0.55], [0.09, 0.09, 0.35]),
        ([0.7, -0.2, -0.55], [0.09, 0.09, 0.35]),
        ([-0.7, 0.2, -0.55], [0.09, 0.09, 0.35]),
        ([-0.7, -0.2, -0.55], [0.09, 0.09, 0.35]),
    ];
    // allocate samples by approximate ellipsoid surface area
    let area = |a: [f64; 3]| {
        let p = 1.6075;
        ((a[0] * a[1]).powf(p) + (a[0] * a[2]).powf(p) + (a[1] * a[2]).powf(p)).powf(1.0 / p)
    };
    let areas: Vec<f64> = parts.iter().map(|(_, a)| area(*a)).collect();
    let total: f64 = areas.iter().sum();
    let mut counts: Vec<usize> = areas.iter().map(|a| (a / total * count as f64) as usize).collect();
    let short = count - counts.iter().sum::<usize>();
    for c in counts.iter_mut().take(short) {
        *c += 1;
    }
    let mut coords = Vec::with_capacity(3 * count);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for ((centre, axes), &k) in parts.iter().zip(&counts) {
        for s in 0..k {
            let z = 1.0 - 2.0 * (s as f64 + 0.5) / k as f64;
            let r = (1.0 - z * z).sqrt();
            let (sin, cos) = (golden * s as f64).sin_cos();
            let dir = [r * cos, r * sin, z];
            // radial projection onto |x/a|^4 + |y/b|^4 + |z/c|^4 = 1
            let level: f64 = (0..3).map(|i| (dir[i] / axes[i]).abs().powi(4)).sum();
            let t = level.powf(-0.25);
            coords.extend((0..3).map(|i| centre[i] + t * dir[i]));
        }
    }
    PointSet::new(3, coords).expect("quadruped coordinates are finite")
}

/// Smooth warp by a Gaussian radial-basis displacement field with five random
/// centres. The field is scaled so the mean displacement is
/// `magnitude * diameter`.
pub fn deform(points: &PointSet, magnitude: f64, seed: u64) -> PointSet {
    if magnitude == 0.0 || points.is_empty() {
        return points.clone();
    }
    let field = RbfField::random(points, magnitude, seed);
    points.map(|x| x.iter().zip(field.displacement(x)).map(|(a, b)| a + b).collect())
}

/// Gaussian radial-basis displacement field.
#[derive(Debug, Clone)]
pub struct RbfField {
    pub centres: Vec<Vec<f64>>,
    pub coefficients: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

impl RbfField {
    pub const CENTRES: usize = 5;

    pub fn random(points: &PointSet, magnitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = points.dim();
        let diam = points.diameter();
        let (lo, hi) = bounding_box(points);
        let centres: Vec<Vec<f64>> = (0..Self::CENTRES)
            .map(|_| (0..d).map(|c| lo[c] + (hi[c] - lo[c]) * rng.gen::<f64>()).collect())
            .collect();
        let coefficients: Vec<Vec<f64>> = (0..Self::CENTRES)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut field = Self { centres, coefficients, bandwidth: 0.5 * diam };
        let mean = points.iter().map(|x| norm(&field.displacement(x))).sum::<f64>()
            / points.len() as f64;
        if mean > 0.0 {
            let k = magnitude * diam / mean;
            for c in &mut field.coefficients {
                c.iter_mut().for_each(|v| *v *= k);
            }
        }
        field
    }

    pub fn displacement(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let denom = 2.0 * self.bandwidth * self.bandwidth;
        for (z, c) in self.centres.iter().zip(&self.coefficients) {
            let w = (-distance(x, z).powi(2) / denom).exp();
            out.iter_mut().zip(c).for_each(|(o, v)| *o += w * v);
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn bounding_box(points: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let d = points.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in points.iter() {
        for c in 0..d {
            lo[c] = lo[c].min(x[c]);
            hi[c] = hi[c].max(x[c]);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// Parameters of the outlier cloud, both relative to the shape diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierModel {
    pub std: f64,
    pub offset: f64,
}

impl Default for OutlierModel {
    fn default() -> Self {
        Self { std: 0.3, offset: 1.0 }
    }
}

/// Appends `ceil(ratio * N)` Gaussian outliers centred one offset to the
/// given side of the shape, then shuffles. Returns the new set and, for each
/// original point, its index in the new set.
pub fn add_outliers(
    points: &PointSet,
    ratio: f64,
    side: Side,
    outliers: OutlierModel,
    seed: u64,
) -> Result<(PointSet, Vec<usize>)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::input(format!("outlier ratio {ratio} not in [0, 1)")));
    }
    let n = points.len();
    let extra = (ratio * n as f64).ceil() as usize;
    if extra == 0 {
        return Ok((points.clone(), (0..n).collect()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = points.dim();
    let diam = points.diameter();
    let mut centre = points.centroid();
    centre[0] += match side {
        Side::Left => -outliers.offset * diam,
        Side::Right => outliers.offset * diam,
    };
    let normal = Normal::new(0.0, outliers.std * diam)
        .map_err(|e| Error::input(format!("outlier spread: {e}")))?;
    let mut all: Vec<Vec<f64>> = points.iter().map(|x| x.to_vec()).collect();
    for _ in 0..extra {
        all.push((0..d).map(|c| centre[c] + normal.sample(&mut rng)).collect());
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0; all.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let coords = order.iter().flat_map(|&i| all[i].iter().copied()).collect();
    position.truncate(n);
    Ok((PointSet::new(d, coords)?, position))
}

/// Closed tour by nearest neighbour from point 0, improved by 2-opt.
pub fn tour(points: &PointSet) -> Vec<usize> {
    let n = points.len();
    if n < 3 {
        return (0..n).collect();
    }
    let dist = |a: usize, b: usize| distance(points.point(a), points.point(b));
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut cur = 0;
    used[0] = true;
    order.push(0);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| dist(cur, a).total_cmp(&dist(cur, b)))
            .expect("an unvisited point remains");
        used[next] = true;
        order.push(next);
        cur = next;
    }
    let mut swaps = 0;
    'improve: while swaps < MAX_TWO_OPT_SWAPS {
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, d) = (order[j], order[(j + 1) % n]);
                if dist(a, c) + dist(b, d) < dist(a, b) + dist(c, d) - 1e-12 {
                    order[i + 1..=j].reverse();
                    swaps += 1;
                    continue 'improve;
                }
            }
        }
        break;
    }
    order
}

pub fn tour_length(points: &PointSet, order: &[usize]) -> f64 {
    (0..order.len())
        .map(|k| distance(points.point(order[k]), points.point(order[(k + 1) % order.len()])))
        .sum()
}

/// Keeps a contiguous tour segment of `ceil((1 - fraction) N)` points starting
/// at a seeded position. Returns the subset and the retained original indices
/// in ascending order.
pub fn occlude(points: &PointSet, fraction: f64, seed: u64) -> Result<(PointSet, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::input(format!("occlusion fraction {fraction} not in [0, 1)")));
    }
    let n = points.len();
    let keep = ((1.0 - fraction) * n as f64).ceil() as usize;
    if keep >= n {
        return Ok((points.clone(), (0..n).collect()));
    }
    let order = tour(points);
    let start = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n);
    let mut kept: Vec<usize> = (0..keep).map(|k| order[(start + k) % n]).collect();
    kept.sort_unstable();
    Ok((points.select(&kept), kept))
}

/// A random proper rotation, uniform over angles in 2D and Haar-distributed
/// in 3D.
pub fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    match d {
        2 => {
            let a: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
        }
        _ => {
            let axis = Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            // uniform on SO(3): angle density proportional to 1 - cos
            let angle = loop {
                let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                if rng.gen::<f64>() * 2.0 <= 1.0 - a.cos() {
                    break a;
                }
            };
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
            DMatrix::from_iterator(3, 3, r.matrix().iter().copied())
        }
    }
}

/// Everything that defines one synthetic trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSpec {
    pub shape: Shape,
    /// Prototype sample count.
    pub count: usize,
    pub mode: Mode,
    pub outlier_ratio: f64,
    pub occlusion_fraction: f64,
    /// Range of the scale applied to the model.
    pub scale_range: [f64; 2],
    pub rotate: bool,
    pub deformation: f64,
    pub outliers: OutlierModel,
    /// Matched pairs as a fraction of the ground-truth inlier count.
    pub np_fraction: f64,
    pub scheme: BoundScheme,
    pub max_depth: usize,
    pub max_iterations: Option<usize>,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Fish,
            count: 100,
            mode: Mode::Sim2d,
            outlier_ratio: 0.5,
            occlusion_fraction: 0.0,
            scale_range: [0.5, 1.5],
            rotate: true,
            deformation: 0.0,
            outliers: OutlierModel::default(),
            np_fraction: 1.0,
            scheme: BoundScheme::Fast,
            max_depth: 15,
            max_iterations: Some(2000),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `(model index, scene index)` of every inlier present in both sets.
    pub pairs: Vec<(usize, usize)>,
    /// Model-to-scene map `x -> scale * rotation * x + translation`.
    pub scale: f64,
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub model: PointSet,
    pub scene: PointSet,
    pub truth: GroundTruth,
}

/// Per-stage seeds derived from the trial seed.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15)).gen()
}

/// Generates the model and scene for a trial. The model receives the random
/// similarity and left outliers; the scene receives deformation, occlusion
/// and right outliers.
pub fn generate(spec: &TrialSpec) -> Result<Trial> {
    let proto = make_prototype(&spec.shape, spec.count)?;
    let d = proto.dim();
    if d != spec.mode.dim() {
        return Err(Error::input(format!(
            "shape '{}' is {d}-dimensional but mode {} needs {}",
            spec.shape,
            spec.mode,
            spec.mode.dim()
        )));
    }
    let [lo, hi] = spec.scale_range;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::input(format!("scale range [{lo}, {hi}] is not positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(spec.seed, 0));
    let s0 = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let r0 = if spec.rotate { random_rotation(d, &mut rng) } else { DMatrix::identity(d, d) };
    let t0 = DVector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
    let model_base = proto.map(|x| {
        let v = &r0 * DVector::from_column_slice(x) * s0 + &t0;
        v.iter().copied().collect()
    });

    let warped = deform(&proto, spec.deformation, stage_seed(spec.seed, 1));
    let (visible, kept) = occlude(&warped, spec.occlusion_fraction, stage_seed(spec.seed, 2))?;
    let (model, model_pos) =
        add_outliers(&model_base, spec.outlier_ratio, Side::Left, spec.outliers, stage_seed(spec.seed, 3))?;
    let (scene, scene_pos) =
        add_outliers(&visible, spec.outlier_ratio, Side::Right, spec.outliers, stage_seed(spec.seed, 4))?;

    let mut pairs: Vec<(usize, usize)> =
        kept.iter().enumerate().map(|(k, &orig)| (model_pos[orig], scene_pos[k])).collect();
    pairs.sort_unstable();
    let rotation = r0.transpose();
    let translation = -(&rotation * &t0) / s0;
    Ok(Trial {
        model,
        scene,
        truth: GroundTruth { pairs, scale: 1.0 / s0, rotation, translation, diameter: proto.diameter() },
    })
}

/// Mean distance between transformed ground-truth model inliers and their
/// scene partners.
pub fn match_error(
    estimate: &TransformEstimate,
    truth: &GroundTruth,
    model: &PointSet,
    scene: &PointSet,
) -> f64 {
    if truth.pairs.is_empty() {
        return 0.0;
    }
    truth
        .pairs
        .iter()
        .map(|&(i, j)| distance(&estimate.apply(model.point(i)), scene.point(j)))
        .sum::<f64>()
        / truth.pairs.len() as f64
}

/// One row of the trial CSV plus the bound trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub shape: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub n_p: usize,
    pub ratio: f64,
    pub fraction: f64,
    pub scheme: BoundScheme,
    pub error: f64,
    pub energy: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    #[serde(skip)]
    pub history: Vec<(f64, f64)>,
}

pub const CSV_HEADER: &str =
    "seed,shape,d,m,n,n_p,ratio,fraction,scheme,error,energy,iterations,wall_ms";

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        let scheme = match self.scheme {
            BoundScheme::Lp => "lp",
            BoundScheme::Fast => "fast",
        };
        format!(
            "{},{},{},{},{},{},{:?},{:?},{},{:?},{:?},{},{:.3}",
            self.seed,
            self.shape,
            self.d,
            self.m,
            self.n,
            self.n_p,
            self.ratio,
            self.fraction,
            scheme,
            self.error,
            self.energy,
            self.iterations,
            self.wall_ms
        )
    }
}

/// Generates and solves one trial. Bound evaluation inside the search runs
/// on `workers` threads (0 for the default).
pub fn run_trial(spec: &TrialSpec, workers: usize) -> Result<TrialRecord> {
    let trial = generate(spec)?;
    let inliers = trial.truth.pairs.len();
    let n_p = ((spec.np_fraction * inliers as f64).round() as usize).max(1);
    // the model carries scale s0, so the model-to-scene scale is 1 / s0
    let [lo, hi] = spec.scale_range;
    let options = MatchOptions {
        scale_range: ScaleRange::new(1.0 / hi, 1.0 / lo)?,
        bnb: BnBConfig {
            scheme: spec.scheme,
            max_depth: spec.max_depth,
            max_iterations: spec.max_iterations,
            workers,
            ..BnBConfig::default()
        },
        ..MatchOptions::new(spec.mode, PairCount::Absolute(n_p))
    };
    let outcome = match_point_sets(&trial.model, &trial.scene, &options)?;
    Ok(TrialRecord {
        seed: spec.seed,
        shape: spec.shape.to_string(),
        d: trial.model.dim(),
        m: trial.model.len(),
        n: trial.scene.len(),
        n_p,
        ratio: spec.outlier_ratio,
        fraction: spec.occlusion_fraction,
        scheme: spec.scheme,
        error: match_error(&outcome.transform, &trial.truth, &trial.model, &trial.scene),
        energy: outcome.search.best_e,
        iterations: outcome.search.iterations,
        wall_ms: outcome.timings.total_ms,
        history: outcome.search.history,
    })
}

/// Runs trials in parallel, one single-threaded search per trial. Output
/// order follows `specs`.
pub fn run_trials(specs: &[TrialSpec], workers: usize) -> Result<Vec<TrialRecord>> {
    // A worker waiting on a search's own pool steals the next trial, which
    // would interleave trials and inflate their wall times.
    if workers == 1 {
        return specs.iter().map(|s| run_trial(s, 1)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::internal(format!("thread pool: {e}")))?;
    pool.install(|| specs.par_iter().map(|s| run_trial(s, 1)).collect())
}

/// Writes the CSV. With `timing = false` the wall-clock column is zeroed so
/// reruns are byte-identical.
pub fn write_csv<W: Write>(records: &[TrialRecord], timing: bool, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        if timing {
            writeln!(out, "{}", r.csv_row())?;
        } else {
            writeln!(out, "{}", TrialRecord { wall_ms: 0.0, ..r.clone() }.csv_row())?;
        }
    }
    Ok(())
}

/// Mean and median error of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub shape: String,
    pub scheme: BoundScheme,
    pub ratio: f64,
    pub fraction: f64,
    pub np_fraction: f64,
    pub trials: usize,
    pub mean_error: f64,
    pub median_error: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Groups records by configuration, keeping first-seen order.
pub fn aggregate(specs: &[TrialSpec], records: &[TrialRecord]) -> Vec<Summary> {
    let mut out: Vec<(Summary, Vec<f64>)> = Vec::new();
    for (spec, rec) in specs.iter().zip(records) {
        let key = (rec.shape.as_str(), rec.scheme, rec.ratio, rec.fraction, spec.np_fraction);
        let found = out.iter_mut().find(|(s, _)| {
            (s.shape.as_str(), s.scheme, s.ratio, s.fraction, s.np_fraction) == key
        });
        match found {
            Some((_, errs)) => errs.push(rec.error),
            None => out.push((
                Summary {
                    shape: rec.shape.clone(),
                    scheme: rec.scheme,
                    ratio: rec.ratio,
                    fraction: rec.fraction,
                    np_fraction: spec.np_fraction,
                    trials: 0,
                    mean_error: 0.0,
                    median_error: 0.0,
                },
                vec![rec.error],
            )),
        }
    }
    out.into_iter()
        .map(|(mut s, errs)| {
            s.trials = errs.len();
            s.mean_error = errs.iter().sum::<f64>() / errs.len() as f64;
            s.median_error = median(&errs);
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototypes_are_normalised_and_deterministic() {
        for shape in [Shape::Fish, Shape::Glyph, Shape::Quadruped] {
            let p = make_prototype(&shape, 100).unwrap();
            assert_eq!(p.len(), 100);
            assert!((p.diameter() - 1.0).abs() < 1e-9);
            assert!(p.centroid().iter().all(|c| c.abs() < 1e-12));
            assert_eq!(p, make_prototype(&shape, 100).unwrap());
        }
        assert!(make_prototype(&Shape::Fish, 9).is_err());
        assert!("blob".parse::<Shape>().is_err());
    }

    #[test]
    fn outlier_counts() {
        let p = make_prototype(&Shape::Fish, 100).unwrap();
        let (same, map) = add_outliers(&p, 0.0, Side::Left, OutlierModel::default(), 1).unwrap();
        assert_eq!(same, p);
        assert_eq!(map, (0..100).collect::<Vec<_>>());
        let (more, map) = add_outliers(&p, 0.5, Side::Right, OutlierModel::default(), 1).unwrap();
        assert_eq!(more.len(), 150);
        for (i, &k) in map.iter().enumerate() {
            assert_eq!(more.point(k), p.point(i));
        }
    }

    #[test]
    fn square_tour_and_occlusion() {
        // corners listed so nearest neighbour alone gives a crossing tour
        let sq = PointSet::from_points(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let order = tour(&sq);
        assert!((tour_length(&sq, &order) - 4.0).abs() < 1e-12);
        for seed in 0..8 {
            let (sub, kept) = occlude(&sq, 0.5, seed).unwrap();
            assert_eq!(sub.len(), 2);
            assert!((distance(sub.point(0), sub.point(1)) - 1.0).abs() < 1e-12, "{kept:?}");
        }
        let (all, kept) = occlude(&sq, 0.0, 3).unwrap();
        assert_eq!(all, sq);
        assert_eq!(kept, vec![0, 1, 2, 3]);
        assert!(occlude(&sq, 1.0, 0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
