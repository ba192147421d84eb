use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cell, ExperimentConfig, FamilySpec, MetricKind, ModeChoice, Tabular};
use crate::compound_poisson::{build_eta0_capped, Mode};
use crate::concentration::decompose;
use crate::distributions::{convolve_capped, empirical_flat, AtomicLaw, DiscreteDistribution, InverseCdf};
use crate::error::{Error, Result};
use crate::metrics::{
    levy_orthant_lambda, neighborhood_metric_grid, random_family, rho_m, slab_metric_grid, MetricEstimate,
    PolyhedronFamily, Provenance,
};
use crate::rng::{self, Rng};

/// Smallest sample size accepted for sampler mode.
pub const SAMPLER_MIN_DRAWS: usize = 1000;
/// Normal quantile for the binomial half-width `z·√(0.25/N)`.
pub const MC_Z: f64 = 1.96;
const ANCHORS: usize = 256;
const FIT_FLOOR: f64 = 1e-6;
const FIT_GRID: usize = 400;
/// Slack for floating-point noise in the exact-mode monotonicity flag.
const MONOTONE_SLACK: f64 = 1e-12;
const PROTOCOL: &str = "Estimates are lower bounds over an explicit polyhedron family. \
c_hat and e_hat are fitted surrogates for the unspecified absolute constants.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub lambda: f64,
    pub lambda_over_tau: f64,
    pub estimate: f64,
    pub raw: f64,
    pub mc_error: f64,
    /// `c_hat·(p_hat + exp(−e_hat·λ/τ))`, absent for a degenerate fit.
    pub fitted: Option<f64>,
    pub argmax: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub c_hat: f64,
    pub e_hat: Option<f64>,
    /// Number of leading grid points used.
    pub segment: usize,
    /// All estimates sit at the floor; nothing to fit.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFlags {
    /// Estimates nonincreasing in λ within `2·mc_error`.
    pub monotone: bool,
    /// `e_hat > 0`, or a degenerate fit.
    pub decay_rate_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub protocol: String,
    pub config: ExperimentConfig,
    pub mode: Mode,
    pub fallback: Option<String>,
    pub p_hat: f64,
    pub contamination: Vec<f64>,
    pub deficiency_bound: f64,
    pub family_size: usize,
    pub family_provenance: Option<Provenance>,
    pub fit: Fit,
    pub rows: Vec<BoundRow>,
    pub flags: BoundFlags,
    pub passed: bool,
}

impl Tabular for ExperimentReport {
    const CSV_HEADER: &'static str = "lambda,lambda_over_tau,estimate,mc_error,fitted";

    fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let fitted = r.fitted.map(cell).unwrap_or_default();
                format!(
                    "{},{},{},{},{}",
                    cell(r.lambda),
                    cell(r.lambda_over_tau),
                    cell(r.estimate),
                    cell(r.mc_error),
                    fitted
                )
            })
            .collect()
    }
}

enum Laws {
    Exact { sn: DiscreteDistribution, eta: crate::SubProbabilityDistribution },
    Sampled { sn: DiscreteDistribution, eta: DiscreteDistribution },
}

/// Build `S_n` and `η₀`, estimate the configured distance over the λ grid,
/// and fit the shape `c·(p + exp(−e·λ/τ))`.
pub fn run_bound_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let summands = cfg.summands.build(cfg.n)?;
    let dim = summands[0].dim();
    let contamination =
        summands.par_iter().map(|s| decompose(s, cfg.tau).map(|d| d.contamination)).collect::<Result<Vec<_>>>()?;
    let p_hat = contamination.iter().copied().fold(0.0, f64::max);

    let mut fallback = None;
    let exact = match cfg.mode {
        ModeChoice::Sampler => None,
        ModeChoice::Exact => Some(exact_laws(&summands, cfg)?),
        ModeChoice::Auto => match exact_laws(&summands, cfg) {
            Ok(l) => Some(l),
            Err(e @ Error::SupportOverflow { .. }) => {
                log::info!("exact mode unavailable ({e}); sampling");
                fallback = Some(e.to_string());
                None
            }
            Err(e) => return Err(e),
        },
    };
    let (laws, deficiency_bound) = match exact {
        Some((sn, eta, bound)) => (Laws::Exact { sn, eta }, bound),
        None => (sampled_laws(&summands, cfg)?, 0.0),
    };
    let mc_error = match laws {
        Laws::Exact { .. } => 0.0,
        Laws::Sampled { .. } => 2.0 * MC_Z * (0.25 / cfg.samples as f64).sqrt(),
    };

    let family = match &cfg.family {
        None => None,
        Some(FamilySpec::File { path }) => Some(PolyhedronFamily::load(path)?),
        Some(FamilySpec::Random { m, count, scale, seed }) => {
            let anchors = anchor_points(&summands, cfg.seed);
            let refs: Vec<&[f64]> = anchors.chunks(dim).collect();
            Some(random_family(*m, dim, *count, *scale, *seed, &refs)?)
        }
    };

    let estimates = match &laws {
        Laws::Exact { sn, eta } => distances(sn, eta, cfg, family.as_ref())?,
        Laws::Sampled { sn, eta } => distances(sn, eta, cfg, family.as_ref())?,
    };

    let xs: Vec<f64> = cfg.lambdas.iter().map(|l| l / cfg.tau).collect();
    let ests: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let fit = fit_shape(&xs, &ests, p_hat);
    let rows: Vec<BoundRow> = estimates
        .iter()
        .zip(&xs)
        .map(|(e, &x)| BoundRow {
            lambda: e.lambda.unwrap_or(f64::NAN),
            lambda_over_tau: x,
            estimate: e.value,
            raw: e.raw,
            mc_error,
            fitted: fit.e_hat.map(|eh| fit.c_hat * (p_hat + (-eh * x).exp())),
            argmax: e.argmax,
        })
        .collect();
    let monotone = ests.windows(2).all(|w| w[1] <= w[0] + 2.0 * mc_error + MONOTONE_SLACK);
    let decay_rate_positive = fit.degenerate || fit.e_hat.is_some_and(|e| e > 0.0);
    let flags = BoundFlags { monotone, decay_rate_positive };
    let mode = match laws {
        Laws::Exact { .. } => Mode::Exact,
        Laws::Sampled { .. } => Mode::Sampler,
    };
    Ok(ExperimentReport {
        experiment: "bound".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        protocol: PROTOCOL.into(),
        config: cfg.clone(),
        mode,
        fallback,
        p_hat,
        contamination,
        deficiency_bound,
        family_size: family.as_ref().map_or(0, PolyhedronFamily::len),
        family_provenance: family.as_ref().map(|f| f.provenance().clone()),
        fit,
        rows,
        passed: flags.monotone && flags.decay_rate_positive,
        flags,
    })
}

type ExactLaws = (DiscreteDistribution, crate::SubProbabilityDistribution, f64);

fn exact_laws(summands: &[DiscreteDistribution], cfg: &ExperimentConfig) -> Result<ExactLaws> {
    let mut sn = summands[0].clone();
    for s in &summands[1..] {
        sn = convolve_capped(&sn, s, cfg.support_cap)?;
    }
    let approx = build_eta0_capped(summands, cfg.tau, Mode::Exact, cfg.truncation, cfg.support_cap)?;
    let bound = approx.deficiency_bound;
    let eta = approx.exact_law.expect("exact mode builds the law");
    Ok((sn, eta, bound))
}

/// Flat coordinates of `n` draws of `S_n` on stream `stream_id`.
fn draw_sums(summands: &[DiscreteDistribution], samplers: &[InverseCdf], rng: &mut Rng, n: usize) -> Vec<f64> {
    let dim = summands[0].dim();
    let mut out = vec![0.0; n * dim];
    for draw in out.chunks_mut(dim) {
        for (s, smp) in summands.iter().zip(samplers) {
            let x = s.point(smp.draw(rng));
            for (o, v) in draw.iter_mut().zip(x) {
                *o += v;
            }
        }
    }
    out
}

fn sampled_laws(summands: &[DiscreteDistribution], cfg: &ExperimentConfig) -> Result<Laws> {
    let dim = summands[0].dim();
    let samplers: Vec<InverseCdf> = summands.iter().map(DiscreteDistribution::sampler).collect();
    let mut r = rng::stream(cfg.seed, 1);
    let sn = empirical_flat(dim, draw_sums(summands, &samplers, &mut r, cfg.samples))?;
    let approx = build_eta0_capped(summands, cfg.tau, Mode::Sampler, cfg.truncation, cfg.support_cap)?;
    let eta = empirical_flat(dim, approx.sample_flat(cfg.seed, 2, cfg.samples))?;
    Ok(Laws::Sampled { sn, eta })
}

fn anchor_points(summands: &[DiscreteDistribution], seed: u64) -> Vec<f64> {
    let samplers: Vec<InverseCdf> = summands.iter().map(DiscreteDistribution::sampler).collect();
    let mut r = rng::stream(seed, 3);
    draw_sums(summands, &samplers, &mut r, ANCHORS)
}

fn distances(
    a: &impl AtomicLaw,
    b: &impl AtomicLaw,
    cfg: &ExperimentConfig,
    family: Option<&PolyhedronFamily>,
) -> Result<Vec<MetricEstimate>> {
    let fam = || family.ok_or_else(|| Error::InvalidConfig("metric needs a family".into()));
    match cfg.metric {
        MetricKind::Slab => slab_metric_grid(a, b, &cfg.lambdas, fam()?),
        MetricKind::Neighborhood => neighborhood_metric_grid(a, b, &cfg.lambdas, fam()?),
        MetricKind::Orthant => cfg.lambdas.par_iter().map(|&l| levy_orthant_lambda(a, b, l)).collect(),
        MetricKind::Rho => {
            let r = rho_m(a, b, fam()?)?;
            Ok(cfg.lambdas.iter().map(|&l| MetricEstimate { lambda: Some(l), ..r.clone() }).collect())
        }
    }
}

/// Fit `est ≈ c·(p + exp(−e·x))`.
///
/// The segment runs from the first point up to and including the first
/// estimate at or below the floor `1e-6`. For `p > 0`, `c` is scanned over
/// `(0, min_est / p]` and, for each `c`, `e` is the least-squares slope of
/// `log(max(est − c·p, 1e-6))` with intercept `log c`; the pair with the
/// smallest residual wins. For `p = 0` this reduces to a log-linear
/// regression.
pub fn fit_shape(xs: &[f64], ests: &[f64], p: f64) -> Fit {
    let seg = ests.iter().position(|&e| e <= FIT_FLOOR).map_or(ests.len(), |i| i + 1);
    let degenerate = Fit { c_hat: 0.0, e_hat: None, segment: seg, degenerate: true };
    if ests.iter().all(|&e| e <= FIT_FLOOR) {
        return degenerate;
    }
    if seg < 2 {
        return Fit { degenerate: false, ..degenerate };
    }
    let (xs, ests) = (&xs[..seg], &ests[..seg]);
    if p <= 0.0 {
        let ys: Vec<f64> = ests.iter().map(|e| e.max(FIT_FLOOR).ln()).collect();
        let n = seg as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        return Fit { c_hat: (my - slope * mx).exp(), e_hat: Some(-slope), segment: seg, degenerate: false };
    }
    let positive_min = ests.iter().copied().filter(|&e| e > FIT_FLOOR).fold(f64::INFINITY, f64::min);
    let c_max = positive_min / p;
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let mut best: Option<(f64, f64, f64)> = None;
    for k in 1..=FIT_GRID {
        let c = c_max * k as f64 / FIT_GRID as f64;
        let lc = c.ln();
        let ys: Vec<f64> = ests.iter().map(|e| (e - c * p).max(FIT_FLOOR).ln()).collect();
        let e_hat = xs.iter().zip(&ys).map(|(x, y)| x * (lc - y)).sum::<f64>() / sxx;
        let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - lc + e_hat * x).powi(2)).sum();
        if best.is_none_or(|b| sse < b.2) {
            best = Some((c, e_hat, sse));
        }
    }
    let (c_hat, e_hat, _) = best.expect("grid is nonempty");
    Fit { c_hat, e_hat: Some(e_hat), segment: seg, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_pure_exponential() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ests: Vec<f64> = xs.iter().map(|x: &f64| 0.8 * (-0.7 * x).exp()).collect();
        let f = fit_shape(&xs, &ests, 0.0);
        assert!((f.e_hat.unwrap() - 0.7).abs() < 1e-12);
        assert!((f.c_hat - 0.8).abs() < 1e-12);
    }

    #[test]
    fn fit_with_contamination_has_positive_rate() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ests: Vec<f64> = xs.iter().map(|x: &f64| 0.5 * (0.05 + (-0.3 * x).exp())).collect();
        let f = fit_shape(&xs, &ests, 0.05);
        assert!(f.e_hat.unwrap() > 0.0);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let f = fit_shape(&[1.0, 2.0], &[0.0, 0.0], 0.1);
        assert!(f.degenerate && f.e_hat.is_none());
    }
}
