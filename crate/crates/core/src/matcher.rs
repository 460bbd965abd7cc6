//! One-call matching: pick an energy, run the branch-and-bound, recover the
//! transformation.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bnb::{minimize, BnBConfig, BnBResult, BoundScheme};
use crate::energy::{
    ConcaveEnergy, ReducedEnergyReg, ReducedEnergySim, ScaleRange, TransformEstimate,
    TransformFamilyReg,
};
use crate::error::{Error, Result};
use crate::feasible::Feasible;
use crate::points::PointSet;

/// Energy and transformation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RegSim2d,
    RegAff2d,
    RegScale3d,
    Sim2d,
    Sim3d,
}

impl Mode {
    pub const ALL: [Mode; 5] =
        [Mode::RegSim2d, Mode::RegAff2d, Mode::RegScale3d, Mode::Sim2d, Mode::Sim3d];

    pub fn dim(self) -> usize {
        match self {
            Mode::RegSim2d | Mode::RegAff2d | Mode::Sim2d => 2,
            Mode::RegScale3d | Mode::Sim3d => 3,
        }
    }

    pub fn family(self) -> Option<TransformFamilyReg> {
        match self {
            Mode::RegSim2d => Some(TransformFamilyReg::Similarity2d),
            Mode::RegAff2d => Some(TransformFamilyReg::Affine2d),
            Mode::RegScale3d => Some(TransformFamilyReg::ScaleTrans3d),
            Mode::Sim2d | Mode::Sim3d => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RegSim2d => "reg-sim2d",
            Mode::RegAff2d => "reg-aff2d",
            Mode::RegScale3d => "reg-scale3d",
            Mode::Sim2d => "sim2d",
            Mode::Sim3d => "sim3d",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown mode '{s}'")))
    }
}

/// Either energy behind one type, so callers can stay generic-free.
#[derive(Debug, Clone)]
pub enum AnyEnergy {
    Reg(ReducedEnergyReg),
    Sim(ReducedEnergySim),
}

impl ConcaveEnergy for AnyEnergy {
    fn feasible(&self) -> Feasible {
        match self {
            AnyEnergy::Reg(e) => e.feasible(),
            AnyEnergy::Sim(e) => e.feasible(),
        }
    }

    fn n_u(&self) -> usize {
        match self {
            AnyEnergy::Reg(e) => e.n_u(),
            AnyEnergy::Sim(e) => e.n_u(),
        }
    }

    fn q(&self) -> &DMatrix<f64> {
        match self {
            AnyEnergy::Reg(e) => e.q(),
            AnyEnergy::Sim(e) => e.q(),
        }
    }

    fn linear_cost(&self) -> &DVector<f64> {
        match self {
            AnyEnergy::Reg(e) => e.linear_cost(),
            AnyEnergy::Sim(e) => e.linear_cost(),
        }
    }

    fn eval_ec(&self, u: &DVector<f64>) -> Result<f64> {
        match self {
            AnyEnergy::Reg(e) => e.eval_ec(u),
            AnyEnergy::Sim(e) => e.eval_ec(u),
        }
    }

    fn prepare(&mut self, vertices: &[DVector<f64>]) -> Result<()> {
        match self {
            AnyEnergy::Reg(e) => e.prepare(vertices),
            AnyEnergy::Sim(e) => e.prepare(vertices),
        }
    }

    fn estimate(&self, p: &DVector<f64>) -> Result<TransformEstimate> {
        match self {
            AnyEnergy::Reg(e) => e.estimate(p),
            AnyEnergy::Sim(e) => e.estimate(p),
        }
    }
}

/// How many pairs to match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCount {
    Absolute(usize),
    /// Fraction of `min(m, n)`, rounded, at least one.
    Fraction(f64),
}

impl PairCount {
    pub fn resolve(self, m: usize, n: usize) -> Result<usize> {
        match self {
            PairCount::Absolute(k) => Ok(k),
            PairCount::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(((f * m.min(n) as f64).round() as usize).max(1))
            }
            PairCount::Fraction(f) => Err(Error::input(format!("pair fraction {f} not in (0, 1]"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchOptions {
    pub mode: Mode,
    pub pairs: PairCount,
    /// Regularised modes: prior parameters; identity when absent.
    pub theta0: Option<Vec<f64>>,
    /// Constrained-similarity modes: admissible scale interval.
    pub scale_range: ScaleRange,
    pub bnb: BnBConfig,
}

impl MatchOptions {
    pub fn new(mode: Mode, pairs: PairCount) -> Self {
        Self { mode, pairs, theta0: None, scale_range: ScaleRange::default(), bnb: BnBConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_ms: f64,
    pub search_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub n_p: usize,
    pub search: BnBResult,
    pub transform: TransformEstimate,
    pub timings: Timings,
}

pub fn build_energy(model: &PointSet, scene: &PointSet, options: &MatchOptions) -> Result<AnyEnergy> {
    let d = options.mode.dim();
    if model.dim() != d || scene.dim() != d {
        return Err(Error::input(format!(
            "mode {} needs {d}-dimensional points, got {} and {}",
            options.mode,
            model.dim(),
            scene.dim()
        )));
    }
    let n_p = options.pairs.resolve(model.len(), scene.len())?;
    match options.mode.family() {
        Some(family) => {
            let mut e = ReducedEnergyReg::new(model, scene, family, n_p)?;
            if let Some(theta0) = &options.theta0 {
                e = e.with_theta0(DVector::from_column_slice(theta0))?;
            }
            Ok(AnyEnergy::Reg(e))
        }
        None => {
            if options.theta0.is_some() {
                return Err(Error::input("θ0 only applies to the regularised modes"));
            }
            Ok(AnyEnergy::Sim(ReducedEnergySim::new(model, scene, n_p, options.scale_range)?))
        }
    }
}

pub fn match_point_sets(
    model: &PointSet,
    scene: &PointSet,
    options: &MatchOptions,
) -> Result<MatchOutcome> {
    let start = Instant::now();
    let mut energy = build_energy(model, scene, options)?;
    let setup = start.elapsed();
    let search = minimize(&mut energy, &options.bnb)?;
    let transform = energy.estimate(&search.best_p)?;
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let timings = Timings {
        setup_ms: ms(setup),
        search_ms: ms(search.wall_time),
        total_ms: ms(start.elapsed()),
    };
    Ok(MatchOutcome { n_p: energy.feasible().n_p, search, transform, timings })
}

/// The same instance searched by both bounding schemes for the same number
/// of iterations.
#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub lp: BnBResult,
    pub fast: BnBResult,
}

impl SchemeComparison {
    /// Lp wall time over fast wall time.
    pub fn ratio(&self) -> f64 {
        self.lp.wall_time.as_secs_f64() / self.fast.wall_time.as_secs_f64().max(1e-12)
    }
}

pub fn compare_schemes(
    model: &PointSet,
    scene: &PointSet,
    options: &MatchOptions,
    iterations: usize,
) -> Result<SchemeComparison> {
    let run = |scheme| {
        let mut energy = build_energy(model, scene, options)?;
        let config = BnBConfig {
            scheme,
            max_iterations: Some(iterations),
            // the depth limit would end the fast run early and skew the ratio
            max_depth: usize::MAX,
            ..options.bnb.clone()
        };
        minimize(&mut energy, &config)
    };
    Ok(SchemeComparison { lp: run(BoundScheme::Lp)?, fast: run(BoundScheme::Fast)? })
}
