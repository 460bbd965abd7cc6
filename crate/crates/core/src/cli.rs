//! Command-line driver: `match`, `bench` and `bounds-compare`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bnb::{BnBConfig, BoundScheme, Certificate};
use crate::energy::{ScaleRange, TransformEstimate, TransformKind};
use crate::error::{Error, Result};
use crate::matcher::{compare_schemes, match_point_sets, MatchOptions, Mode, PairCount, Timings};
use crate::plot::{panels, LineChart, Series};
use crate::points::PointSet;
use crate::synth::{aggregate, generate, run_trials, write_csv, TrialSpec};

#[derive(Debug, Parser)]
#[command(name = "pointmatch", version, about = "Globally optimal matching of partially overlapping point sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match a model point file against a scene point file.
    Match(MatchArgs),
    /// Run a synthetic benchmark suite described by a JSON file.
    Bench(BenchArgs),
    /// Run one synthetic instance under both bounding schemes.
    BoundsCompare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value = "sim2d")]
    pub mode: Mode,
    /// Number of pairs to match.
    #[arg(long = "np", group = "pairs")]
    pub n_p: Option<usize>,
    /// Number of pairs as a fraction of min(m, n).
    #[arg(long = "np-frac", group = "pairs")]
    pub np_frac: Option<f64>,
    /// Prior transformation parameters for the regularised modes, comma separated.
    #[arg(long)]
    pub theta0: Option<String>,
    /// Admissible scale for the constrained-similarity modes, as lo:hi.
    #[arg(long = "scale-range")]
    pub scale_range: Option<String>,
    #[arg(long = "bound", default_value = "lp", value_parser = parse_scheme)]
    pub bound: BoundScheme,
    #[arg(long = "max-depth", default_value_t = 15)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long = "max-iterations")]
    pub max_iterations: Option<usize>,
    /// Recorded in the output; matching itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub model: PathBuf,
    pub scene: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long = "out-json")]
    pub out_json: Option<PathBuf>,
    #[arg(long = "out-svg")]
    pub out_svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub suite: PathBuf,
    /// Overrides the suite's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long = "out-csv")]
    pub out_csv: Option<PathBuf>,
    #[arg(long = "out-svg")]
    pub out_svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Trial description (JSON); defaults describe a 2D fish instance.
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Iterations run by each scheme.
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long = "out-csv")]
    pub out_csv: Option<PathBuf>,
    #[arg(long = "out-svg")]
    pub out_svg: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<BoundScheme, String> {
    match s {
        "lp" => Ok(BoundScheme::Lp),
        "fast" => Ok(BoundScheme::Fast),
        _ => Err(format!("unknown bound scheme '{s}', expected lp or fast")),
    }
}

pub fn parse_scale_range(s: &str) -> Result<ScaleRange> {
    let (lo, hi) =
        s.split_once(':').ok_or_else(|| Error::input(format!("scale range '{s}' is not lo:hi")))?;
    let num = |v: &str| {
        v.trim().parse::<f64>().map_err(|_| Error::input(format!("bad scale bound '{v}'")))
    };
    ScaleRange::new(num(lo)?, num(hi)?)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::input(format!("bad number '{v}'"))))
        .collect()
}

impl SearchArgs {
    pub fn options(&self) -> Result<MatchOptions> {
        let pairs = match (self.n_p, self.np_frac) {
            (Some(k), None) => PairCount::Absolute(k),
            (None, Some(f)) => PairCount::Fraction(f),
            _ => return Err(Error::input("give exactly one of --np and --np-frac")),
        };
        let mut options = MatchOptions::new(self.mode, pairs);
        options.theta0 = self.theta0.as_deref().map(parse_list).transpose()?;
        if let Some(range) = &self.scale_range {
            options.scale_range = parse_scale_range(range)?;
        }
        options.bnb = BnBConfig {
            scheme: self.bound,
            epsilon: self.epsilon,
            max_depth: self.max_depth,
            max_iterations: self.max_iterations,
            workers: self.workers,
            ..BnBConfig::default()
        };
        Ok(options)
    }
}

/// Serialised transformation. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDoc {
    pub kind: TransformKind,
    pub params: Vec<f64>,
    pub rotation: Option<Vec<Vec<f64>>>,
    pub scale: Option<f64>,
    pub translation: Vec<f64>,
    pub linear: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&TransformEstimate> for TransformDoc {
    fn from(t: &TransformEstimate) -> Self {
        Self {
            kind: t.kind,
            params: t.params.clone(),
            rotation: t.rotation.as_ref().map(rows),
            scale: t.scale,
            translation: t.translation.iter().copied().collect(),
            linear: rows(&t.linear),
        }
    }
}

impl TransformDoc {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.translation)
            .map(|(row, t)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + t)
            .collect()
    }
}

/// JSON written by `match`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDocument {
    pub mode: Mode,
    pub n_p: usize,
    pub energy: f64,
    pub pairs: Vec<(usize, usize)>,
    pub transform: TransformDoc,
    pub certificate: Certificate,
    pub bounds_history: Vec<(f64, f64)>,
    pub iterations: usize,
    pub simplexes_expanded: usize,
    pub timings: Timings,
    pub seed: u64,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_match(args: &MatchArgs) -> Result<MatchDocument> {
    let model = PointSet::read(&args.model)?;
    let scene = PointSet::read(&args.scene)?;
    let options = args.search.options()?;
    let outcome = match_point_sets(&model, &scene, &options)?;
    let doc = MatchDocument {
        mode: options.mode,
        n_p: outcome.n_p,
        energy: outcome.search.best_e,
        pairs: outcome.search.best_pairs.clone(),
        transform: TransformDoc::from(&outcome.transform),
        certificate: outcome.search.certificate,
        bounds_history: outcome.search.history.clone(),
        iterations: outcome.search.iterations,
        simplexes_expanded: outcome.search.simplexes_expanded,
        timings: outcome.timings,
        seed: args.search.seed,
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::internal(format!("serialising result: {e}")))?;
    write_or_print(args.out_json.as_deref(), &(json + "\n"))?;
    if let Some(path) = &args.out_svg {
        let moved: Vec<Vec<f64>> = model.iter().map(|x| doc.transform.apply(x)).collect();
        let scene_pts: Vec<Vec<f64>> = scene.iter().map(|x| x.to_vec()).collect();
        fs::write(path, crate::plot::overlay(&moved, &scene_pts, &doc.pairs))?;
    }
    Ok(doc)
}

/// Benchmark description: a base trial swept over disturbance levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default)]
    pub base: TrialSpec,
    /// Trials per configuration; trial `t` uses seed `base.seed + t`.
    pub trials: usize,
    #[serde(default)]
    pub outlier_ratios: Vec<f64>,
    #[serde(default)]
    pub occlusion_fractions: Vec<f64>,
    #[serde(default)]
    pub np_fractions: Vec<f64>,
    /// Write measured wall times; off keeps reruns byte-identical.
    #[serde(default)]
    pub record_timing: bool,
}

impl Suite {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn expand(&self) -> Vec<TrialSpec> {
        let or_base = |v: &[f64], base: f64| if v.is_empty() { vec![base] } else { v.to_vec() };
        let ratios = or_base(&self.outlier_ratios, self.base.outlier_ratio);
        let fractions = or_base(&self.occlusion_fractions, self.base.occlusion_fraction);
        let nps = or_base(&self.np_fractions, self.base.np_fraction);
        let mut specs = Vec::new();
        for &outlier_ratio in &ratios {
            for &occlusion_fraction in &fractions {
                for &np_fraction in &nps {
                    for t in 0..self.trials {
                        specs.push(TrialSpec {
                            outlier_ratio,
                            occlusion_fraction,
                            np_fraction,
                            seed: self.base.seed + t as u64,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        specs
    }

    /// The swept quantity plotted on the x axis.
    fn axis(&self) -> (&'static str, fn(&TrialSpec) -> f64) {
        if self.occlusion_fractions.len() > 1 && self.outlier_ratios.len() <= 1 {
            ("occlusion fraction", |s| s.occlusion_fraction)
        } else if self.np_fractions.len() > 1 && self.outlier_ratios.len() <= 1 {
            ("n_p fraction", |s| s.np_fraction)
        } else {
            ("outlier ratio", |s| s.outlier_ratio)
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<crate::synth::Summary>> {
    let mut suite = Suite::read(&args.suite)?;
    if suite.trials == 0 {
        return Err(Error::input("suite needs at least one trial"));
    }
    if let Some(seed) = args.seed {
        suite.base.seed = seed;
    }
    let specs = suite.expand();
    let records = run_trials(&specs, args.workers)?;
    let mut csv = Vec::new();
    write_csv(&records, suite.record_timing, &mut csv)?;
    write_or_print(args.out_csv.as_deref(), &String::from_utf8_lossy(&csv))?;
    let summaries = aggregate(&specs, &records);
    for s in &summaries {
        eprintln!(
            "{} {:?} ratio {} fraction {} np {}: mean {:.6} median {:.6} over {}",
            s.shape, s.scheme, s.ratio, s.fraction, s.np_fraction, s.mean_error, s.median_error, s.trials
        );
    }
    if let Some(path) = &args.out_svg {
        let (label, key) = suite.axis();
        let mut series: Vec<Series> = Vec::new();
        for (spec, s) in summaries.iter().map(|s| (representative(&specs, s), s)) {
            let name = match label {
                "outlier ratio" => format!("fraction {} np {}", s.fraction, s.np_fraction),
                "occlusion fraction" => format!("ratio {} np {}", s.ratio, s.np_fraction),
                _ => format!("ratio {} fraction {}", s.ratio, s.fraction),
            };
            let point = (key(spec), s.mean_error);
            match series.iter_mut().find(|x| x.label == name) {
                Some(x) => x.points.push(point),
                None => series.push(Series { label: name, points: vec![point] }),
            }
        }
        let chart = LineChart {
            title: "Mean matching error".into(),
            x_label: label.into(),
            y_label: "mean error".into(),
            series,
        };
        fs::write(path, panels(&[chart]))?;
    }
    Ok(summaries)
}

fn representative<'a>(specs: &'a [TrialSpec], s: &crate::synth::Summary) -> &'a TrialSpec {
    specs
        .iter()
        .find(|t| {
            t.outlier_ratio == s.ratio
                && t.occlusion_fraction == s.fraction
                && t.np_fraction == s.np_fraction
        })
        .expect("summary comes from a spec")
}

pub fn cmd_bounds_compare(args: &CompareArgs) -> Result<crate::matcher::SchemeComparison> {
    let mut spec = match &args.instance {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<TrialSpec>(&text)
                .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?
        }
        None => TrialSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(mode) = args.mode {
        spec.mode = mode;
    }
    let trial = generate(&spec)?;
    let n_p = ((spec.np_fraction * trial.truth.pairs.len() as f64).round() as usize).max(1);
    let mut options = MatchOptions::new(spec.mode, PairCount::Absolute(n_p));
    let [lo, hi] = spec.scale_range;
    options.scale_range = ScaleRange::new(1.0 / hi, 1.0 / lo)?;
    options.bnb.workers = args.workers;
    let cmp = compare_schemes(&trial.model, &trial.scene, &options, args.iterations)?;

    let mut csv = String::from("iteration,lp_lower,lp_upper,fast_lower,fast_upper\n");
    let len = cmp.lp.history.len().max(cmp.fast.history.len());
    let cell = |h: &[(f64, f64)], k: usize, upper: bool| {
        h.get(k).map_or(String::new(), |b| format!("{:?}", if upper { b.1 } else { b.0 }))
    };
    for k in 0..len {
        csv.push_str(&format!(
            "{k},{},{},{},{}\n",
            cell(&cmp.lp.history, k, false),
            cell(&cmp.lp.history, k, true),
            cell(&cmp.fast.history, k, false),
            cell(&cmp.fast.history, k, true)
        ));
    }
    write_or_print(args.out_csv.as_deref(), &csv)?;
    if let Some(path) = &args.out_svg {
        let series = |h: &[(f64, f64)], upper: bool, label: &str| Series {
            label: label.into(),
            points: h.iter().enumerate().map(|(k, b)| (k as f64, if upper { b.1 } else { b.0 })).collect(),
        };
        let lower = LineChart {
            title: "Global lower bound".into(),
            x_label: "iteration".into(),
            y_label: "bound".into(),
            series: vec![series(&cmp.lp.history, false, "lp"), series(&cmp.fast.history, false, "fast")],
        };
        let upper = LineChart {
            title: "Global upper bound".into(),
            x_label: "iteration".into(),
            y_label: "bound".into(),
            series: vec![series(&cmp.lp.history, true, "lp"), series(&cmp.fast.history, true, "fast")],
        };
        fs::write(path, panels(&[lower, upper]))?;
    }
    eprintln!(
        "runtime ratio lp/fast = {:.2} (lp {:.1} ms, fast {:.1} ms, {} iterations each)",
        cmp.ratio(),
        cmp.lp.wall_time.as_secs_f64() * 1e3,
        cmp.fast.wall_time.as_secs_f64() * 1e3,
        cmp.lp.iterations
    );
    Ok(cmp)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a).map(|_| ()),
        Command::Bench(a) => cmd_bench(a).map(|_| ()),
        Command::BoundsCompare(a) => cmd_bounds_compare(a).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
