//! Reproducible experiments: the bound-shape sweep comparing `S_n` with
//! its approximant over a λ grid, and the Kolmogorov–Rogozin sanity check.
//!
//! Reports carry no timestamps, so identical configs give identical bytes.

mod bound;
mod rogozin;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bound::{
    fit_shape, run_bound_experiment, BoundFlags, BoundRow, ExperimentReport, Fit, MC_Z, SAMPLER_MIN_DRAWS,
};
pub use rogozin::{run_rogozin_experiment, Form, RogozinConfig, RogozinFlags, RogozinReport, RogozinRow};

use crate::distributions::{mixture, DiscreteDistribution, DistributionJson, Point};
use crate::error::{Error, Result};

/// Summand catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SummandSpec {
    /// `(1 − p)·base + p·δ_offset`.
    LatticeWithContamination { base: DistributionJson, p: f64, offset: Vec<f64> },
    /// 1-D Gaussian restricted to `step·Z ∩ [−width·std, width·std]`.
    DiscretizedGaussian {
        step: f64,
        std: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// Laws read from JSON files, cycled to reach `n` summands.
    Files { paths: Vec<PathBuf> },
}

fn default_width() -> f64 {
    4.0
}

impl SummandSpec {
    /// The `n` summand laws.
    pub fn build(&self, n: usize) -> Result<Vec<DiscreteDistribution>> {
        let laws = match self {
            SummandSpec::LatticeWithContamination { base, p, offset } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidConfig(format!("p must lie in [0, 1], got {p}")));
                }
                let base = base.clone().into_distribution()?;
                if offset.len() != base.dim() {
                    return Err(Error::InvalidConfig(format!(
                        "offset has {} coordinates, base law has dimension {}",
                        offset.len(),
                        base.dim()
                    )));
                }
                let outlier = DiscreteDistribution::point_mass(Point::new(offset.clone())?);
                vec![mixture(&[(1.0 - p, &base), (*p, &outlier)])?]
            }
            SummandSpec::DiscretizedGaussian { step, std, width } => {
                vec![discretized_gaussian(*step, *std, *width)?]
            }
            SummandSpec::Files { paths } => {
                if paths.is_empty() {
                    return Err(Error::InvalidConfig("files: empty path list".into()));
                }
                paths.iter().map(DiscreteDistribution::load).collect::<Result<Vec<_>>>()?
            }
        };
        let dim = laws[0].dim();
        if let Some(l) = laws.iter().find(|l| l.dim() != dim) {
            return Err(Error::dim(dim, l.dim()));
        }
        Ok((0..n).map(|i| laws[i % laws.len()].clone()).collect())
    }

    fn resolve(&mut self, dir: &Path) {
        if let SummandSpec::Files { paths } = self {
            for p in paths.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
    }
}

pub fn discretized_gaussian(step: f64, std: f64, width: f64) -> Result<DiscreteDistribution> {
    if !(step > 0.0 && std > 0.0 && width > 0.0) {
        return Err(Error::InvalidConfig("step, std and width must be positive".into()));
    }
    let k = (width * std / step).floor() as i64;
    let atoms = (-k..=k)
        .map(|i| {
            let x = i as f64 * step;
            (x, (-0.5 * (x / std).powi(2)).exp())
        })
        .collect::<Vec<_>>();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteDistribution::new(1, atoms.into_iter().map(|(x, w)| (Point::from_vec(vec![x]), w / total)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Orthant,
    Slab,
    Neighborhood,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    /// Exact laws when supports fit under the cap, sampling otherwise.
    Auto,
    Exact,
    Sampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    /// Anchors are draws of `S_n`.
    Random {
        m: usize,
        count: usize,
        scale: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub summands: SummandSpec,
    pub n: usize,
    pub tau: f64,
    pub lambdas: Vec<f64>,
    pub metric: MetricKind,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    /// Draws per law in sampler mode.
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: ModeChoice,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_cap")]
    pub support_cap: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_mode() -> ModeChoice {
    ModeChoice::Auto
}

fn default_truncation() -> usize {
    crate::compound_poisson::DEFAULT_TRUNCATION
}

fn default_cap() -> usize {
    crate::distributions::DEFAULT_SUPPORT_CAP
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be ≥ 1".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        validate_grid(&self.lambdas)?;
        if self.mode != ModeChoice::Exact && self.samples < SAMPLER_MIN_DRAWS {
            return bad(format!("samples must be ≥ {SAMPLER_MIN_DRAWS}, got {}", self.samples));
        }
        if self.truncation == 0 {
            return bad("truncation must be ≥ 1".into());
        }
        match (&self.family, self.metric) {
            (None, MetricKind::Slab | MetricKind::Neighborhood | MetricKind::Rho) => {
                bad("metric needs a family".into())
            }
            (Some(FamilySpec::Random { m, count, scale, .. }), _)
                if *m == 0 || *count == 0 || scale.is_nan() || *scale < 0.0 =>
            {
                bad("family: m and count must be ≥ 1 and scale ≥ 0".into())
            }
            _ => Ok(()),
        }
    }

    pub fn from_json_str(s: &str, source_name: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Json { source_name: source_name.to_string(), source: e })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; relative file paths resolve against the config's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = read(path)?;
        let mut cfg = Self::from_json_str(&s, &path.display().to_string())?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.summands.resolve(dir);
        if let Some(FamilySpec::File { path: p }) = &mut cfg.family {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}

pub(crate) fn validate_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig("lambda grid must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `csv` for a `.csv` extension, JSON otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Reports with a fixed CSV layout.
pub trait Tabular {
    const CSV_HEADER: &'static str;
    fn csv_rows(&self) -> Vec<String>;
}

pub fn render_report<R: Serialize + Tabular>(report: &R, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| Error::Json { source_name: "report".into(), source: e })?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from(R::CSV_HEADER);
            s.push('\n');
            for row in report.csv_rows() {
                s.push_str(&row);
                s.push('\n');
            }
            s
        }
    })
}

pub fn emit_report<R: Serialize + Tabular>(report: &R, format: Format, path: &Path) -> Result<()> {
    let s = render_report(report, format)?;
    std::fs::write(path, s).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

/// Shortest round-trip formatting for CSV cells.
pub(crate) fn cell(x: f64) -> String {
    format!("{x:?}")
}
