use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use idla::compound_poisson::{build_eta0, Mode};
use idla::concentration::{concentration_ball, concentration_interval_1d};
use idla::harness::{
    emit_report, render_report, run_bound_experiment, run_rogozin_experiment, ExperimentConfig, Format, RogozinConfig,
    Tabular,
};
use idla::metrics::{
    levy_orthant_lambda, neighborhood_metric_lambda, random_family, rho_m, slab_metric_lambda, PolyhedronFamily,
};
use idla::polyhedra::{augment, certify_augmentation, PolyhedronJson};
use idla::{DiscreteDistribution, Error, Polyhedron};

#[derive(Parser)]
#[command(name = "idla", version, about = "Infinitely divisible approximation and polyhedral distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concentration function of a discrete law.
    Concentration {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, value_enum, default_value_t = Form::Ball)]
        form: Form,
    },
    /// Accompanying compound-Poisson approximant of a sum.
    Approximate {
        #[arg(long, num_args = 1.., required = true)]
        dists: Vec<PathBuf>,
        #[arg(long)]
        tau: f64,
        #[arg(long, value_enum, default_value_t = CliMode::Exact)]
        mode: CliMode,
        /// Truncation order of the Poisson series.
        #[arg(long = "K", default_value_t = idla::compound_poisson::DEFAULT_TRUNCATION)]
        k: usize,
    },
    /// Add net constraints so that slab expansions fit in neighborhoods.
    Augment {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check the result on this many sampled points per λ.
        #[arg(long)]
        certify: Option<usize>,
    },
    /// Distance between two laws.
    Metric {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, conflicts_with = "random")]
        family: Option<PathBuf>,
        /// Random family `m,count,scale,seed` anchored at the atoms.
        #[arg(long)]
        random: Option<String>,
    },
    /// Run a configured experiment.
    Experiment {
        #[arg(value_enum)]
        which: Which,
        #[arg(long)]
        config: PathBuf,
        /// Output file; `.csv` selects CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Interval,
    Ball,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Exact,
    Sampler,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Orthant,
    Slab,
    Neighborhood,
    Rho,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Bound,
    Rogozin,
}

#[derive(Serialize)]
struct AugmentOutput {
    polyhedron: PolyhedronJson,
    m0: usize,
    m: usize,
    bound: u128,
    faces: usize,
    max_net: usize,
    certificate: Option<idla::polyhedra::AugmentCertificate>,
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Json { source_name: "stdout".into(), source: e })?;
    println!("{s}");
    Ok(())
}

fn parse_random(spec: &str) -> Result<(usize, usize, f64, u64), Error> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || Error::InvalidArgument(format!("--random expects m,count,scale,seed, got {spec:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
        parts[3].parse().map_err(|_| bad())?,
    ))
}

fn finish<R: Serialize + Tabular>(report: &R, out: Option<PathBuf>, passed: bool) -> Result<ExitCode, Error> {
    match out {
        Some(path) => emit_report(report, Format::from_path(&path), &path)?,
        None => print!("{}", render_report(report, Format::Json)?),
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Concentration { dist, tau, form } => {
            let law = DiscreteDistribution::load(&dist)?;
            let r = match form {
                Form::Interval => concentration_interval_1d(&law, tau)?,
                Form::Ball => concentration_ball(&law, tau)?,
            };
            print_json(&r)?;
        }
        Command::Approximate { dists, tau, mode, k } => {
            let laws = dists.iter().map(DiscreteDistribution::load).collect::<Result<Vec<_>, _>>()?;
            let mode = match mode {
                CliMode::Exact => Mode::Exact,
                CliMode::Sampler => Mode::Sampler,
            };
            print_json(&build_eta0(&laws, tau, mode, k)?.to_json())?;
        }
        Command::Augment { poly, eps, seed, certify } => {
            let p = Polyhedron::load(&poly)?;
            let a = augment(&p, eps, seed)?;
            let certificate = match certify {
                Some(n) => {
                    let (lo, hi) = p.bounding_box()?;
                    let scale = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max).max(1e-3);
                    let lambdas: Vec<f64> = [0.01, 0.1, 1.0, 10.0].iter().map(|f| f * scale).collect();
                    Some(certify_augmentation(&p, &a.polyhedron, eps, &lambdas, n, seed)?)
                }
                None => None,
            };
            let failed = certificate.as_ref().is_some_and(|c| !c.passed);
            print_json(&AugmentOutput {
                polyhedron: a.polyhedron.to_json(),
                m0: a.m0,
                m: a.m,
                bound: a.bound,
                faces: a.faces,
                max_net: a.max_net,
                certificate,
            })?;
            if failed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Metric { a, b, kind, lambda, family, random } => {
            let la = DiscreteDistribution::load(&a)?;
            let lb = DiscreteDistribution::load(&b)?;
            let fam = match (family, random) {
                (Some(path), _) => Some(PolyhedronFamily::load(path)?),
                (None, Some(spec)) => {
                    let (m, count, scale, seed) = parse_random(&spec)?;
                    let anchors: Vec<&[f64]> =
                        (0..la.len()).map(|i| la.point(i)).chain((0..lb.len()).map(|i| lb.point(i))).collect();
                    Some(random_family(m, la.dim(), count, scale, seed, &anchors)?)
                }
                (None, None) => None,
            };
            let need = || fam.as_ref().ok_or_else(|| Error::InvalidArgument("--family or --random required".into()));
            let e = match kind {
                Kind::Orthant => levy_orthant_lambda(&la, &lb, lambda)?,
                Kind::Slab => slab_metric_lambda(&la, &lb, lambda, need()?)?,
                Kind::Neighborhood => neighborhood_metric_lambda(&la, &lb, lambda, need()?)?,
                Kind::Rho => rho_m(&la, &lb, need()?)?,
            };
            print_json(&e)?;
        }
        Command::Experiment { which, config, out } => {
            return match which {
                Which::Bound => {
                    let cfg = ExperimentConfig::load(&config)?;
                    let out = out.or_else(|| cfg.output.clone());
                    let r = run_bound_experiment(&cfg)?;
                    finish(&r, out, r.passed)
                }
                Which::Rogozin => {
                    let r = run_rogozin_experiment(&RogozinConfig::load(&config)?)?;
                    finish(&r, out, r.passed)
                }
            };
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
