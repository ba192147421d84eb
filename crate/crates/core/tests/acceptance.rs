//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one pass/fail line; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use idla::compound_poisson::{build_eta0, compound_poisson_exact, Mode};
use idla::concentration::{concentration_ball, concentration_interval_1d};
use idla::distributions::{characteristic_function, pushforward};
use idla::harness::{
    render_report, run_bound_experiment, run_rogozin_experiment, ExperimentConfig, Format, ModeChoice, RogozinConfig,
};
use idla::metrics::{
    bisect_inf, levy_orthant_lambda, neighborhood_metric_grid, neighborhood_terms, random_family, rho_m,
    slab_metric_grid, slab_term,
};
use idla::polyhedra::{augment, certify_augmentation, distance, embed_operator, ProjectOptions};
use idla::rng::{self, Rng};
use idla::{DiscreteDistribution, Point, Polyhedron};

const CF_TOL: f64 = 1e-8;
const CF_BUDGET: Duration = Duration::from_secs(10);
const EXACT_TOL: f64 = 1e-9;
const AUGMENT_SLACK: f64 = 1e-6;
const AUGMENT_BUDGET: Duration = Duration::from_secs(60);
const NORM_SLACK: f64 = 1e-6;
/// Probabilities of the same atoms summed in a different order.
const REORDER_TOL: f64 = 1e-14;
/// Closed-inequality orthant vs slab membership slack.
const ORTHANT_TOL: f64 = 1e-12;
const MONO_TOL: f64 = 1e-12;
const INF_TOL: f64 = 1e-4;
const GRID_STEP: f64 = 1e-3;
const BOUND_BUDGET: Duration = Duration::from_secs(300);

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("compound Poisson characteristic function", cf_identity),
        ("exact small-instance values", exact_values),
        ("augmented slabs inside neighborhoods", augmentation),
        ("orthant embedding", embedding),
        ("metric sandwich and monotonicity", sandwich),
        ("inf-form metrics", inf_forms),
        ("concentration oracles", concentration_oracles),
        ("bound-shape experiment", bound_shape),
        ("concentration of coin sums", coin_sums),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: pass  {name} ({detail}; {secs:.2} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({detail}; {secs:.2} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn law(dim: usize, atoms: &[(Vec<f64>, f64)]) -> DiscreteDistribution {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteDistribution::new(dim, atoms.iter().map(|(x, w)| (Point::new(x.clone()).unwrap(), w / total)).collect())
        .unwrap()
}

fn delta(x: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::point_mass(Point::new(x.to_vec()).unwrap())
}

/// Up to `max_atoms` atoms uniform in `[lo, hi]^dim`, random weights.
fn random_law(r: &mut Rng, dim: usize, max_atoms: usize, lo: f64, hi: f64) -> DiscreteDistribution {
    let k = r.random_range(1..=max_atoms);
    let atoms: Vec<(Vec<f64>, f64)> =
        (0..k).map(|_| ((0..dim).map(|_| r.random_range(lo..hi)).collect(), r.random_range(0.05..1.0))).collect();
    law(dim, &atoms)
}

fn gaussian(r: &mut Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(r);
            scale * g
        })
        .collect()
}

/// `m` random unit normals with offsets in `[0.5, 1.5]`, so the origin is
/// interior.
fn random_polyhedron(r: &mut Rng, dim: usize, m: usize) -> Polyhedron {
    let rows = (0..m)
        .map(|_| {
            let t = loop {
                let g = gaussian(r, dim, 1.0);
                if g.iter().map(|v| v * v).sum::<f64>() > 1e-6 {
                    break g;
                }
            };
            (t, r.random_range(0.5..1.5))
        })
        .collect();
    Polyhedron::from_unnormalized(dim, rows).unwrap()
}

fn cf_identity() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng::stream(101, 0);
    let laws: Vec<DiscreteDistribution> = (0..100).map(|i| random_law(&mut r, 1 + i % 3, 4, -2.0, 2.0)).collect();
    let ts: Vec<Vec<Vec<f64>>> =
        laws.iter().map(|l| (0..100).map(|_| gaussian(&mut r, l.dim(), 2.0)).collect()).collect();
    let worst = laws
        .par_iter()
        .zip(&ts)
        .map(|(xi, ts)| -> Result<f64, String> {
            let cp = compound_poisson_exact(xi, 40).map_err(e)?;
            let mut worst = f64::NEG_INFINITY;
            for t in ts {
                let t = Point::new(t.clone()).map_err(e)?;
                let lhs = cp.characteristic_function(&t).map_err(e)?;
                let rhs = (characteristic_function(xi, &t).map_err(e)? - 1.0).exp();
                worst = worst.max((lhs - rhs).norm() - (CF_TOL + cp.deficiency()));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    ensure(worst <= 0.0, || format!("|cf gap| exceeds bound by {worst:e}"))?;
    ensure(elapsed <= CF_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("largest gap minus bound {worst:.3e}"))
}

fn exact_values() -> Result<String, String> {
    let coin = law(1, &[(vec![0.0], 0.5), (vec![1.0], 0.5)]);
    let p0 = compound_poisson_exact(&coin, 40).map_err(e)?.mass_at(&[0.0]);
    ensure((p0 - (-0.5f64).exp()).abs() <= EXACT_TOL, || format!("P[e(coin) = 0] = {p0}"))?;
    let xi = law(1, &[(vec![0.0], 0.9), (vec![10.0], 0.1)]);
    let eta = build_eta0(&[xi], 1.0, Mode::Exact, 40).map_err(e)?;
    let q0 = eta.exact_law.as_ref().ok_or("no exact law")?.mass_at(&[0.0]);
    ensure((q0 - (-0.1f64).exp()).abs() <= EXACT_TOL, || format!("P[eta0 = 0] = {q0}"))?;
    Ok(format!("P[e(coin)=0]={p0:.12}, P[eta0=0]={q0:.12}"))
}

fn augmentation() -> Result<String, String> {
    let start = Instant::now();
    let opts = ProjectOptions::default();
    let eps = 0.25;
    let square = Polyhedron::axis_box(&[0.0, 0.0], &[1.0, 1.0]).map_err(e)?;
    let witness = [2.0, 2.0];
    ensure(square.slab_expand(1.0).map_err(e)?.contains(&witness).map_err(e)?, || "witness not in P_1".into())?;
    let dw = distance(&square, &witness, &opts).map_err(e)?;
    ensure(dw > (1.0 + eps) * 1.0, || format!("witness distance {dw}"))?;
    let sq_aug = augment(&square, eps, 0).map_err(e)?.polyhedron;
    ensure(!sq_aug.slab_expand(1.0).map_err(e)?.contains(&witness).map_err(e)?, || {
        "witness inside augmented slab".into()
    })?;

    let mut r = rng::stream(303, 0);
    let polys: Vec<Polyhedron> = (0..20)
        .map(|i| {
            let d = 1 + i % 3;
            let m = r.random_range(d + 1..=6);
            random_polyhedron(&mut r, d, m)
        })
        .collect();
    let lambdas = [0.1, 1.0, 10.0];
    let results = polys
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<(f64, usize), String> {
            let aug = augment(p, eps, i as u64).map_err(e)?.polyhedron;
            let cert = certify_augmentation(p, &aug, eps, &lambdas, 10_000, i as u64).map_err(e)?;
            for c in &cert.per_lambda {
                ensure(c.samples == 10_000, || format!("polyhedron {i}: {} samples at λ={}", c.samples, c.lambda))?;
                ensure(c.max_ratio * c.lambda <= (1.0 + eps) * c.lambda + AUGMENT_SLACK, || {
                    format!("polyhedron {i}: ratio {} at λ={}", c.max_ratio, c.lambda)
                })?;
            }
            ensure(cert.passed, || format!("polyhedron {i}: certificate failed"))?;
            let mut pr = rng::stream(304, i as u64);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..p.dim()).map(|_| pr.random_range(-3.0..3.0)).collect();
                ensure(p.contains(&x).map_err(e)? == aug.contains(&x).map_err(e)?, || {
                    format!("polyhedron {i}: membership differs at {x:?}")
                })?;
            }
            Ok((cert.max_ratio, aug.m()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let elapsed = start.elapsed();
    ensure(elapsed <= AUGMENT_BUDGET, || format!("took {elapsed:?}"))?;
    let ratio = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let m_max = results.iter().map(|r| r.1).max().unwrap_or(0);
    Ok(format!("witness distance {dw:.4}; max dist/λ {ratio:.4}; up to {m_max} constraints"))
}

fn embedding() -> Result<String, String> {
    let mut r = rng::stream(404, 0);
    let mut worst_norm = f64::NEG_INFINITY;
    for i in 0..50 {
        let d = 1 + i % 3;
        let m = r.random_range(1..=6);
        let p = random_polyhedron(&mut r, d, m);
        let xi = random_law(&mut r, d, 6, -2.0, 2.0);
        let zeta = random_law(&mut r, d, 6, -2.0, 2.0);
        let lambda = r.random_range(0.05..2.0);
        let emb = embed_operator(&p).map_err(e)?;
        let a = &emb.matrix;
        let svd_norm = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j)).singular_values().max();
        let bound = (m as f64).sqrt() + NORM_SLACK;
        ensure(emb.norm <= bound && svd_norm <= bound, || {
            format!("triple {i}: norm {} (svd {svd_norm}) > sqrt({m})", emb.norm)
        })?;
        worst_norm = worst_norm.max(svd_norm - (m as f64).sqrt());

        let slab = p.slab_expand(lambda).map_err(e)?;
        let orth_slab = emb.orthant.slab_expand(lambda).map_err(e)?;
        for (x, _) in xi.atoms() {
            let y = a.mul_vec(x);
            ensure(p.contains(x).map_err(e)? == emb.orthant.contains(&y).map_err(e)?, || {
                format!("triple {i}: membership of {x:?} differs")
            })?;
            ensure(slab.contains(x).map_err(e)? == orth_slab.contains(&y).map_err(e)?, || {
                format!("triple {i}: slab membership of {x:?} differs")
            })?;
        }
        let pushed = pushforward(&xi, a).map_err(e)?;
        let pairs = [
            (xi.probability(|x| p.contains(x).unwrap()), pushed.probability(|y| emb.orthant.contains(y).unwrap())),
            (xi.probability(|x| slab.contains(x).unwrap()), pushed.probability(|y| orth_slab.contains(y).unwrap())),
        ];
        for (u, v) in pairs {
            ensure((u - v).abs() <= REORDER_TOL, || format!("triple {i}: probabilities {u} vs {v}"))?;
        }
        let pushed_zeta = pushforward(&zeta, a).map_err(e)?;
        let term = slab_term(&xi, &zeta, &p, lambda);
        let orth = levy_orthant_lambda(&pushed, &pushed_zeta, lambda).map_err(e)?;
        ensure(term <= orth.raw + ORTHANT_TOL, || format!("triple {i}: slab term {term} > orthant {}", orth.raw))?;
    }
    Ok(format!("max ||A|| - sqrt(m) = {worst_norm:.3e}"))
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + MONO_TOL)
}

fn sandwich() -> Result<String, String> {
    let lambdas = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0];
    let opts = ProjectOptions::default();
    let mut r = rng::stream(505, 0);
    let mut comparisons = 0usize;
    for i in 0..50 {
        let d = 1 + i % 2;
        let a = random_law(&mut r, d, 5, -1.0, 1.0);
        let b = random_law(&mut r, d, 5, -1.0, 1.0);
        let anchors: Vec<&[f64]> = a.atoms().chain(b.atoms()).map(|(x, _)| x).collect();
        let fam = random_family(3, d, 30, 0.5, 1000 + i as u64, &anchors).map_err(e)?;
        for (k, p) in fam.members().iter().enumerate() {
            let nb = neighborhood_terms(&a, &b, p, &lambdas, &opts).map_err(e)?;
            for (&l, &n) in lambdas.iter().zip(&nb) {
                let s = slab_term(&a, &b, p, l);
                comparisons += 1;
                ensure(s <= n + MONO_TOL, || format!("pair {i}, member {k}, λ={l}: slab {s} > neighborhood {n}"))?;
            }
        }
        let slab: Vec<f64> = slab_metric_grid(&a, &b, &lambdas, &fam).map_err(e)?.iter().map(|m| m.value).collect();
        let nbhd: Vec<f64> =
            neighborhood_metric_grid(&a, &b, &lambdas, &fam).map_err(e)?.iter().map(|m| m.value).collect();
        let orth: Vec<f64> = lambdas
            .iter()
            .map(|&l| levy_orthant_lambda(&a, &b, l).map(|m| m.value))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        for (name, v) in [("slab", &slab), ("neighborhood", &nbhd), ("orthant", &orth)] {
            ensure(nonincreasing(v), || format!("pair {i}: {name} not nonincreasing: {v:?}"))?;
        }
        let small = fam.prefix(10).map_err(e)?;
        let slab_small = slab_metric_grid(&a, &b, &lambdas, &small).map_err(e)?;
        let nbhd_small = neighborhood_metric_grid(&a, &b, &lambdas, &small).map_err(e)?;
        for k in 0..lambdas.len() {
            ensure(slab_small[k].value <= slab[k] && nbhd_small[k].value <= nbhd[k], || {
                format!("pair {i}: estimate dropped when the family grew")
            })?;
        }
        let rho_small = rho_m(&a, &b, &small).map_err(e)?.value;
        let rho = rho_m(&a, &b, &fam).map_err(e)?.value;
        ensure(rho_small <= rho, || format!("pair {i}: rho {rho_small} > {rho}"))?;
    }
    Ok(format!("{comparisons} per-polyhedron comparisons"))
}

/// Smallest `k·step ≤ λ_max` with `f(k·step) < k·step`.
fn grid_scan(f: impl Fn(f64) -> f64, lambda_max: f64, step: f64) -> Option<f64> {
    let n = (lambda_max / step).round() as usize;
    (1..=n).map(|k| k as f64 * step).find(|&l| f(l) < l)
}

fn inf_forms() -> Result<String, String> {
    let orth = |a: DiscreteDistribution, b: DiscreteDistribution| {
        move |l: f64| levy_orthant_lambda(&a, &b, l).map(|m| m.value)
    };
    let half = orth(delta(&[0.0]), delta(&[0.5]));
    let r = bisect_inf(&half, 4.0).map_err(e)?;
    ensure(!r.saturated && (r.value - 0.5).abs() <= INF_TOL, || format!("L(δ0, δ0.5) = {r:?}"))?;

    let two = orth(delta(&[0.0]), delta(&[2.0]));
    let mut out = vec![format!("L(δ0,δ0.5)={:.6}", r.value)];
    for lambda_max in [4.0, 0.8] {
        let got = bisect_inf(&two, lambda_max).map_err(e)?;
        match grid_scan(|l| two(l).unwrap(), lambda_max, INF_TOL) {
            Some(oracle) => ensure(!got.saturated && (got.value - oracle).abs() <= INF_TOL, || {
                format!("δ0/δ2 on (0, {lambda_max}]: {got:?} vs oracle {oracle}")
            })?,
            None => ensure(got.saturated && got.value == lambda_max, || {
                format!("δ0/δ2 on (0, {lambda_max}]: {got:?}, oracle saturates")
            })?,
        }
        out.push(format!(
            "δ0/δ2 on (0,{lambda_max}]: {:.6}{}",
            got.value,
            if got.saturated { " saturated" } else { "" }
        ));
    }
    Ok(out.join(", "))
}

fn concentration_oracles() -> Result<String, String> {
    let mut r = rng::stream(707, 0);
    for i in 0..100 {
        // Dyadic coordinates and radii keep window boundaries exact.
        let k = r.random_range(1..=12);
        let atoms: Vec<(Vec<f64>, f64)> =
            (0..k).map(|_| (vec![r.random_range(-16..=16) as f64 * 0.25], r.random_range(1..=8) as f64)).collect();
        let l = law(1, &atoms);
        let tau = r.random_range(0..=12) as f64 * 0.25;
        let got = concentration_interval_1d(&l, tau).map_err(e)?.value;
        let brute = l.atoms().map(|(x, _)| l.probability(|y| x[0] <= y[0] && y[0] <= x[0] + tau)).fold(0.0, f64::max);
        ensure((got - brute).abs() <= 1e-15, || format!("instance {i}: window {got} vs brute force {brute}"))?;
    }
    let instances: Vec<(DiscreteDistribution, f64)> =
        (0..20).map(|_| (random_law(&mut r, 2, 8, 0.0, 1.0), r.random_range(0.05..0.5))).collect();
    instances
        .par_iter()
        .enumerate()
        .map(|(i, (l, tau))| -> Result<(), String> {
            let got = concentration_ball(l, *tau).map_err(e)?.value;
            let (lo, hi) = (-tau, 1.0 + tau);
            let n = ((hi - lo) / GRID_STEP).ceil() as usize;
            let inflated = tau + GRID_STEP / std::f64::consts::SQRT_2;
            let (mut grid, mut grid_inflated) = (0.0f64, 0.0f64);
            for gx in 0..=n {
                for gy in 0..=n {
                    let c = [lo + gx as f64 * GRID_STEP, lo + gy as f64 * GRID_STEP];
                    let d2 = |x: &[f64]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                    grid = grid.max(l.probability(|x| d2(x) <= tau * tau));
                    grid_inflated = grid_inflated.max(l.probability(|x| d2(x) <= inflated * inflated));
                }
            }
            ensure(grid <= got + 1e-12 && got <= grid_inflated + 1e-12, || {
                format!("instance {i}: ball {got} outside grid bracket [{grid}, {grid_inflated}]")
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok("100 interval and 20 ball instances".into())
}

fn bound_config(mode: &str) -> ExperimentConfig {
    ExperimentConfig::from_json_str(
        &format!(
            r#"{{"summands": {{"kind": "lattice-with-contamination",
                 "base": {{"dim": 1, "atoms": [{{"x": [0], "w": 0.5}}, {{"x": [1], "w": 0.5}}]}},
                 "p": 0.05, "offset": [25]}},
                "n": 20, "tau": 1.0, "lambdas": [2, 4, 8, 16, 32], "metric": "slab",
                "family": {{"kind": "random", "m": 2, "count": 200, "scale": 5.0, "seed": 11}},
                "samples": 100000, "seed": 7, "mode": "{mode}"}}"#
        ),
        "acceptance",
    )
    .unwrap()
}

fn bound_shape() -> Result<String, String> {
    let start = Instant::now();
    let mut out = Vec::new();
    for mode in ["auto", "sampler"] {
        let cfg = bound_config(mode);
        assert!(mode != "sampler" || cfg.mode == ModeChoice::Sampler);
        let first = run_bound_experiment(&cfg).map_err(e)?;
        let again = run_bound_experiment(&cfg).map_err(e)?;
        for format in [Format::Json, Format::Csv] {
            let (x, y) = (render_report(&first, format).map_err(e)?, render_report(&again, format).map_err(e)?);
            ensure(x == y, || format!("{mode}: {format:?} report differs between runs"))?;
        }
        let e_hat = first.fit.e_hat.ok_or_else(|| format!("{mode}: no decay rate fitted"))?;
        ensure(first.flags.monotone, || format!("{mode}: monotone-decay flag failed"))?;
        ensure(e_hat > 0.0, || format!("{mode}: e_hat = {e_hat}"))?;
        out.push(format!("{mode} ({:?}): e_hat {e_hat:.4}", first.mode));
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= BOUND_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(out.join(", "))
}

fn coin_sums() -> Result<String, String> {
    let cfg = RogozinConfig::from_json_str(
        r#"{"summands": {"kind": "lattice-with-contamination",
             "base": {"dim": 1, "atoms": [{"x": [0], "w": 0.5}, {"x": [1], "w": 0.5}]},
             "p": 0.0, "offset": [0]},
            "tau": 0.0, "n_grid": [1, 4, 16, 64], "seed": 9}"#,
        "acceptance",
    )
    .map_err(e)?;
    let report = run_rogozin_experiment(&cfg).map_err(e)?;
    let q: Vec<f64> = report.rows.iter().map(|r| r.q).collect();
    ensure(report.rows.iter().all(|r| !r.empirical), || "fell back to sampling".into())?;
    ensure(q[1] == 0.375, || format!("Q(S4; 0) = {}", q[1]))?;
    ensure(q.windows(2).all(|w| w[1] <= w[0]), || format!("Q not nonincreasing: {q:?}"))?;
    Ok(format!("Q = {q:?}"))
}
