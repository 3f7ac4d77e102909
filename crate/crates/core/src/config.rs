//! Experiment configuration files (TOML, versioned).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{parse_vector, read_matrix_market, read_vector, symmetrize, CompositeProblem, SpdProblem, Univariate};
use crate::markets::{load_market, MarketFile, LAMBDA_MAX};
use crate::objective::Point;
use crate::schedule::SchedulePolicy;
use crate::staleness::StalenessPolicy;

/// The only schema version this build reads.
pub const CONFIG_SCHEMA: u32 = 1;

fn default_tolerance() -> f64 {
    1e-8
}

fn default_alpha() -> f64 {
    2.0
}

fn default_market_tolerance() -> f64 {
    1e-6
}

fn default_true() -> bool {
    true
}

fn default_staleness() -> StalenessPolicy {
    StalenessPolicy::Fresh
}

/// A vector given inline or as a path to a whitespace-separated text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    File(PathBuf),
}

impl VectorSource {
    pub fn load(&self, base: &Path) -> Result<Vec<f64>> {
        match self {
            VectorSource::Inline(v) => Ok(v.clone()),
            VectorSource::File(p) => read_vector(&base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdSection {
    /// Matrix Market file.
    pub matrix: PathBuf,
    pub rhs: VectorSource,
    #[serde(default)]
    pub initial: Option<VectorSource>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Explicit step parameters; overrides the safe bound.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    /// Multiplies whichever step parameters are in force.
    #[serde(default)]
    pub gamma_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSection {
    pub matrix: PathBuf,
    pub rhs: VectorSource,
    /// One separable term per column.
    pub terms: Vec<Univariate>,
    #[serde(default)]
    pub initial: Option<VectorSource>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    /// Market JSON file.
    pub file: PathBuf,
    /// Tatonnement constant for non-ongoing runs.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub initial: Option<VectorSource>,
    /// Convergence target for `max_j |z_j|`.
    #[serde(default = "default_market_tolerance")]
    pub tolerance: f64,
    /// Compute reference prices with the equilibrium oracle.
    #[serde(default = "default_true")]
    pub equilibrium: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    pub schedule: SchedulePolicy,
    #[serde(default = "default_staleness")]
    pub staleness: StalenessPolicy,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub spd: Option<SpdSection>,
    #[serde(default)]
    pub composite: Option<CompositeSection>,
    #[serde(default)]
    pub market: Option<MarketSection>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::parse(origin, format!("schema {} is not supported (expected {CONFIG_SCHEMA})", cfg.schema)));
        }
        if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
            return Err(Error::parse(origin, format!("horizon {} must be positive", cfg.horizon)));
        }
        let sections = [cfg.spd.is_some(), cfg.composite.is_some(), cfg.market.is_some()];
        if sections.iter().filter(|s| **s).count() != 1 {
            return Err(Error::parse(origin, "exactly one of [spd], [composite], [market] is required"));
        }
        cfg.base = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn out_dir(&self) -> Option<PathBuf> {
        self.out.as_ref().map(|o| self.resolve(o))
    }
}

fn initial_or(src: &Option<VectorSource>, base: &Path, n: usize, fill: f64) -> Result<Point> {
    let v = match src {
        Some(s) => s.load(base)?,
        None => vec![fill; n],
    };
    if v.len() != n {
        return Err(Error::Dimension { expected: n, got: v.len() });
    }
    Point::new(v)
}

/// Step parameters requested by a section, scaled when asked.
pub fn requested_gammas(explicit: &Option<Vec<f64>>, scale: Option<f64>, safe: &[f64]) -> Result<Option<Vec<f64>>> {
    if let Some(s) = scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma_scale {s} must be positive")));
        }
    }
    Ok(match (explicit, scale) {
        (None, None) => None,
        (Some(g), s) => Some(g.iter().map(|x| x * s.unwrap_or(1.0)).collect()),
        (None, Some(s)) => Some(safe.iter().map(|x| x * s).collect()),
    })
}

impl SpdSection {
    pub fn load(&self, base: &Path) -> Result<(SpdProblem, Point)> {
        let a = symmetrize(read_matrix_market(&base.join(&self.matrix))?)?;
        let b = self.rhs.load(base)?;
        let n = a.nrows();
        if b.len() != n {
            return Err(Error::Dimension { expected: n, got: b.len() });
        }
        let prob = SpdProblem::new(a, nalgebra::DVector::from_vec(b))?;
        let p0 = initial_or(&self.initial, base, n, 0.0)?;
        Ok((prob, p0))
    }
}

impl CompositeSection {
    pub fn load(&self, base: &Path) -> Result<(CompositeProblem, Point)> {
        let a = read_matrix_market(&base.join(&self.matrix))?;
        let b = self.rhs.load(base)?;
        let n = a.ncols();
        let prob = CompositeProblem::new(a, nalgebra::DVector::from_vec(b), self.terms.clone())?;
        let p0 = initial_or(&self.initial, base, n, 0.0)?;
        Ok((prob, p0))
    }
}

impl MarketSection {
    pub fn load(&self, base: &Path) -> Result<MarketFile> {
        load_market(&base.join(&self.file))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(LAMBDA_MAX)
    }

    /// Starting prices; defaults to total money spread evenly.
    pub fn initial(&self, base: &Path, goods: usize, budget: f64) -> Result<Point> {
        initial_or(&self.initial, base, goods, budget / goods as f64)
    }
}

/// Parses a whitespace-separated vector given on the command line or in a file.
pub fn parse_inline_vector(text: &str) -> Result<Vec<f64>> {
    parse_vector(text, "<inline>")
}
