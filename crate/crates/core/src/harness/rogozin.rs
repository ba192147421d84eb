use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cell, read, SummandSpec, Tabular, MC_Z, SAMPLER_MIN_DRAWS};
use crate::concentration::{concentration_ball, concentration_interval_1d, decompose};
use crate::distributions::{convolve_capped, empirical_flat, DiscreteDistribution, InverseCdf, DEFAULT_SUPPORT_CAP};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Intervals of length `τ` (1-D only).
    Interval,
    /// Closed balls of radius `τ`.
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RogozinConfig {
    pub summands: SummandSpec,
    pub tau: f64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_form")]
    pub form: Form,
    pub seed: u64,
    /// Draws per law once exact convolution overflows.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_cap")]
    pub support_cap: usize,
}

fn default_form() -> Form {
    Form::Interval
}

fn default_samples() -> usize {
    100_000
}

fn default_cap() -> usize {
    DEFAULT_SUPPORT_CAP
}

impl RogozinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be ≥ 0, got {}", self.tau)));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("n_grid must be nonempty, positive and strictly ascending".into()));
        }
        if self.samples < SAMPLER_MIN_DRAWS {
            return Err(Error::InvalidConfig(format!("samples must be ≥ {SAMPLER_MIN_DRAWS}")));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str, source_name: &str) -> Result<Self> {
        let cfg: RogozinConfig =
            serde_json::from_str(s).map_err(|e| Error::Json { source_name: source_name.to_string(), source: e })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json_str(&read(path)?, &path.display().to_string())?;
        cfg.summands.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogozinRow {
    pub n: usize,
    /// `Q(S_n; τ)`.
    pub q: f64,
    /// `p₁ + ⋯ + p_n`.
    pub sum_p: f64,
    /// `Q·√(Σ pᵢ)`.
    pub product: f64,
    /// Computed from draws rather than the exact law.
    pub empirical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogozinFlags {
    /// Every product is at most 3 times the product at the smallest `n`.
    pub bounded: bool,
    /// `Q` nonincreasing in `n` (within sampling error on empirical rows).
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RogozinReport {
    pub experiment: String,
    pub version: String,
    pub config: RogozinConfig,
    pub rows: Vec<RogozinRow>,
    pub flags: RogozinFlags,
    pub passed: bool,
}

impl Tabular for RogozinReport {
    const CSV_HEADER: &'static str = "n,q,sum_p,product,empirical";

    fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("{},{},{},{},{}", r.n, cell(r.q), cell(r.sum_p), cell(r.product), r.empirical))
            .collect()
    }
}

fn concentration(law: &DiscreteDistribution, tau: f64, form: Form) -> Result<f64> {
    Ok(match form {
        Form::Interval => concentration_interval_1d(law, tau)?.value,
        Form::Ball => concentration_ball(law, tau)?.value,
    })
}

/// `Q(S_n; τ)` over the `n` grid, by exact convolution while the support
/// fits under the cap and from `samples` draws afterwards.
pub fn run_rogozin_experiment(cfg: &RogozinConfig) -> Result<RogozinReport> {
    cfg.validate()?;
    let n_max = *cfg.n_grid.last().expect("validated nonempty");
    let summands = cfg.summands.build(n_max)?;
    if cfg.form == Form::Interval && summands[0].dim() != 1 {
        return Err(Error::InvalidConfig("interval form needs 1-D summands".into()));
    }
    let p: Vec<f64> =
        summands.par_iter().map(|s| decompose(s, cfg.tau).map(|d| d.contamination)).collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    let mut acc: Option<DiscreteDistribution> = None;
    let mut exact = true;
    let mut grid = cfg.n_grid.iter().peekable();
    for k in 1..=n_max {
        if exact {
            let next = match &acc {
                None => Ok(summands[0].clone()),
                Some(a) => convolve_capped(a, &summands[k - 1], cfg.support_cap),
            };
            match next {
                Ok(l) => acc = Some(l),
                Err(Error::SupportOverflow { .. }) => {
                    log::info!("support overflow at n = {k}; switching to draws");
                    exact = false;
                    acc = None;
                }
                Err(e) => return Err(e),
            }
        }
        if grid.peek() != Some(&&k) {
            continue;
        }
        grid.next();
        let q = match &acc {
            Some(l) => concentration(l, cfg.tau, cfg.form)?,
            None => {
                let law = sampled_sum(&summands[..k], cfg.seed, k as u64, cfg.samples)?;
                concentration(&law, cfg.tau, cfg.form)?
            }
        };
        let sum_p: f64 = p[..k].iter().sum();
        rows.push(RogozinRow { n: k, q, sum_p, product: q * sum_p.sqrt(), empirical: acc.is_none() });
    }

    let first = rows[0].product;
    let bounded = rows.iter().all(|r| r.product <= 3.0 * first);
    let mc = 2.0 * MC_Z * (0.25 / cfg.samples as f64).sqrt();
    let nonincreasing = rows.windows(2).all(|w| {
        let slack = if w[0].empirical || w[1].empirical { mc } else { 1e-12 };
        w[1].q <= w[0].q + slack
    });
    let flags = RogozinFlags { bounded, nonincreasing };
    Ok(RogozinReport {
        experiment: "rogozin".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        rows,
        passed: flags.bounded && flags.nonincreasing,
        flags,
    })
}

fn sampled_sum(summands: &[DiscreteDistribution], seed: u64, stream_id: u64, n: usize) -> Result<DiscreteDistribution> {
    let dim = summands[0].dim();
    let samplers: Vec<InverseCdf> = summands.iter().map(DiscreteDistribution::sampler).collect();
    let mut r = rng::stream(seed, stream_id);
    let mut out = vec![0.0; n * dim];
    for draw in out.chunks_mut(dim) {
        for (s, smp) in summands.iter().zip(&samplers) {
            for (o, v) in draw.iter_mut().zip(s.point(smp.draw(&mut r))) {
                *o += v;
            }
        }
    }
    empirical_flat(dim, out)
}
