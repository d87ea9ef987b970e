//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use lentpart::chaos::{
    chaos_gamma_closed, exp_series_check, mehler_apply, orthogonality_grid, product_formula_check, pt_apply,
    second_quantization_check, MarkFn, MultipleIntegral, ProductKernel, ResamplingSemigroup,
};
use lentpart::configuration::sample_configuration;
use lentpart::diagnostics::{
    laplace_check, lemma8_check, mark_identities_check, marked_moment_check, rajchman_demo, statistical_suite,
    MarkedIntegrand,
};
use lentpart::functionals::{
    area, doleans, generalized_ou, jump_sde, pair_doleans, path_eval, time_integral, Composite, FnFunctional, Functional,
    ScalarMap, SdeCoefficients, Stack,
};
use lentpart::lent_particle::{
    carre_du_champ, chain_rule_check, det_positivity_survey, relative_frobenius, sharp_factors, sharp_from_factors,
    GammaSpec, Mode,
};
use lentpart::rng::{derive_seed, par_map, stream, Jobs};
use lentpart::runner::{self, example1_fixture, RunOptions};
use lentpart::stats::mean_se;
use lentpart::{Configuration, IntensityModel, Result};
use nalgebra::DMatrix;
use rand::Rng;

const JOBS: Jobs = Jobs(0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn configs(model: &IntensityModel, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    par_map(n, JOBS, |i| sample_configuration(model, derive_seed(seed, i as u64)))
}

fn scalar_model(rate: f64) -> IntensityModel {
    IntensityModel::uniform(1.0, rate, -0.9, 0.9, 1).unwrap()
}

fn planar_model(rate: f64) -> IntensityModel {
    IntensityModel::uniform(1.0, rate, -0.9, 0.9, 2).unwrap()
}

fn closed_vs_fd() -> Result<Outcome> {
    let m1 = scalar_model(10.0);
    let m2 = planar_model(10.0);
    let cases: Vec<(Arc<dyn Functional>, &IntensityModel, f64)> = vec![
        (Arc::new(path_eval(&m1, 1.0)?), &m1, 1e-6),
        (Arc::new(doleans(&m1, 1.0)?), &m1, 1e-6),
        (Arc::new(pair_doleans(&m1, 1.0)?), &m1, 1e-6),
        (Arc::new(area(&m2, 1.0)?), &m2, 1e-4),
        (Arc::new(time_integral(&m1, ScalarMap::square(), 1.0)?), &m1, 1e-6),
        (Arc::new(generalized_ou(&m2, 1.0, 1.0)?), &m2, 1e-6),
        (Arc::new(jump_sde(&m2, SdeCoefficients::example9(&m2)?, vec![0.1, 0.2, 0.3], 1.0, 0.01)?), &m2, 1e-4),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (f, model, tol) in cases {
        let spec = GammaSpec::diag_x2(model.dim());
        let cfgs = configs(model, 100, 101)?;
        let errs = par_map(cfgs.len(), JOBS, |i| {
            let closed = carre_du_champ(f.as_ref(), &cfgs[i], &spec, Mode::Closed)?;
            let fd = carre_du_champ(f.as_ref(), &cfgs[i], &spec, Mode::Fd)?;
            Ok(relative_frobenius(&closed.matrix, &fd.matrix))
        })?;
        let worst = errs.into_iter().fold(0.0, f64::max);
        pass &= worst <= tol;
        parts.push(format!("{}={worst:.1e}", f.label()));
    }
    outcome(pass, parts.join(" "))
}

fn example_one() -> Result<Outcome> {
    let model = IntensityModel::uniform(1.0, 2.0, -0.9, 0.9, 1)?;
    let cfg = example1_fixture();
    let spec = GammaSpec::diag_x2(1);
    let e = carre_du_champ(&doleans(&model, 1.0)?, &cfg, &spec, Mode::Closed)?.matrix[(0, 0)];
    let pair = carre_du_champ(&pair_doleans(&model, 1.0)?, &cfg, &spec, Mode::Closed)?;
    let expected = DMatrix::from_row_slice(2, 2, &[0.29, 0.26, 0.26, 0.25]);
    let err = (e - 0.25).abs().max((&pair.matrix - &expected).abs().max()).max((pair.det() - 0.0049).abs());
    outcome(err <= 1e-12, format!("Gamma[E]={e:.15} det={:.15} max error {err:.1e}", pair.det()))
}

fn sharp_second_moment() -> Result<Outcome> {
    let model = scalar_model(5.0);
    let f = doleans(&model, 1.0)?;
    let spec = GammaSpec::diag_x2(1);
    let cfgs = configs(&model, 20, 303)?;
    let mut good = 0;
    for (c, cfg) in cfgs.iter().enumerate() {
        let gamma = carre_du_champ(&f, cfg, &spec, Mode::Closed)?.matrix[(0, 0)];
        let factors = sharp_factors(&f, cfg, &spec)?;
        let key = derive_seed(404, c as u64);
        let squares = par_map(100_000, JOBS, |k| {
            let mut rng = stream(key, k as u64);
            let aux: Vec<f64> = (0..cfg.len()).map(|_| rng.random::<f64>()).collect();
            Ok(sharp_from_factors(&factors, &spec, &aux).first().map_or(0.0, |v| v * v))
        })?;
        let m = mean_se(&squares);
        if (m.mean - gamma).abs() <= 4.0 * m.se || (cfg.is_empty() && gamma == 0.0) {
            good += 1;
        }
    }
    outcome(good >= 19, format!("{good}/20 configurations within 4 SE"))
}

fn chain_rule() -> Result<Outcome> {
    let model = scalar_model(10.0);
    let spec = GammaSpec::diag_x2(1);
    let pairs: Vec<Arc<dyn Functional>> = vec![
        Arc::new(Stack::new(vec![Arc::new(path_eval(&model, 1.0)?), Arc::new(doleans(&model, 1.0)?)])?),
        Arc::new(Stack::new(vec![
            Arc::new(doleans(&model, 1.0)?),
            Arc::new(time_integral(&model, ScalarMap::square(), 1.0)?),
        ])?),
        Arc::new(Stack::new(vec![
            Arc::new(time_integral(&model, ScalarMap::sine(), 1.0)?),
            Arc::new(path_eval(&model, 0.5)?),
        ])?),
    ];
    let phis: Vec<Box<dyn Fn(Arc<dyn Functional>) -> Composite>> = vec![
        Box::new(|inner| Composite::new("sum", inner, |v| v[0] + v[1], |_| vec![1.0, 1.0])),
        Box::new(|inner| Composite::new("product", inner, |v| v[0] * v[1], |v| vec![v[1], v[0]])),
        Box::new(|inner| {
            Composite::new(
                "rational",
                inner,
                |v| (1.0 + v[0]) / (1.0 + v[0] * v[0] + v[1] * v[1]),
                |v| {
                    let q = 1.0 + v[0] * v[0] + v[1] * v[1];
                    vec![(q - 2.0 * v[0] * (1.0 + v[0])) / (q * q), -2.0 * v[1] * (1.0 + v[0]) / (q * q)]
                },
            )
        }),
    ];
    let cfgs = configs(&model, 100, 505)?;
    let mut worst: f64 = 0.0;
    for (i, cfg) in cfgs.iter().enumerate() {
        let phi = phis[i % 3](pairs[(i / 3) % 3].clone());
        let r = chain_rule_check(&phi, cfg, &spec)?;
        worst = worst.max(r.residual / r.rhs.abs().max(1.0));
    }
    outcome(worst <= 1e-8, format!("max scaled residual {worst:.1e} over 100 probes"))
}

fn pathwise_identities() -> Result<Outcome> {
    let model = IntensityModel::uniform(1.0, 10.0, -1.0, 1.0, 1)?;
    let u = MarkFn::linear(1.0, 1.0, 1);
    let v = MarkFn::new("cos x", 1.0, |x| x[0].cos());
    let cfgs = configs(&model, 100, 606)?;
    let mut series: f64 = 0.0;
    let mut product: f64 = 0.0;
    for cfg in &cfgs {
        series = series.max(exp_series_check(cfg, &model, &u, 0.06, 12)?.residual);
        product = product.max(product_formula_check(cfg, &model, &u, &v, 0.06, 0.06)?);
    }
    outcome(series <= 1e-8 && product <= 1e-10, format!("exp series {series:.1e}, product formula {product:.1e}"))
}

fn orthogonality() -> Result<Outcome> {
    let model = IntensityModel::uniform(1.0, 5.0, -0.5, 1.0, 1)?;
    let u = MarkFn::linear(1.0, 1.0, 1);
    let v = MarkFn::new("cos x", 1.0, |x| x[0].cos());
    let grid = orthogonality_grid(&model, &u, &v, &[1, 2, 3], 1_000_000, 707, JOBS)?;
    let good = grid.iter().filter(|r| r.pass).count();
    outcome(good >= 8, format!("{good}/9 cells within 4 SE"))
}

fn chaos_gamma() -> Result<Outcome> {
    let model = IntensityModel::uniform(1.0, 5.0, -0.5, 1.0, 1)?;
    let u = MarkFn::linear(1.0, 1.0, 1);
    let spec = GammaSpec::diag_x2(1);
    let cfgs = configs(&model, 50, 808)?;
    let mut worst: f64 = 0.0;
    for i in 1..=3 {
        for j in 1..=3 {
            let stack = Stack::new(vec![
                Arc::new(MultipleIntegral::new(&model, ProductKernel::power(&u, i)?)?),
                Arc::new(MultipleIntegral::new(&model, ProductKernel::power(&u, j)?)?),
            ])?;
            for cfg in &cfgs {
                let fd = carre_du_champ(&stack, cfg, &spec, Mode::Fd)?.matrix;
                let closed = DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        chaos_gamma_closed(cfg, &model, &u, &u, i, i, &spec)?,
                        chaos_gamma_closed(cfg, &model, &u, &u, i, j, &spec)?,
                        chaos_gamma_closed(cfg, &model, &u, &u, j, i, &spec)?,
                        chaos_gamma_closed(cfg, &model, &u, &u, j, j, &spec)?,
                    ],
                );
                worst = worst.max(relative_frobenius(&closed, &fd));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max relative Frobenius error {worst:.1e}"))
}

fn measure_identities() -> Result<Outcome> {
    let model = IntensityModel::power(1.0, 1.0, 0.5, 0.1)?;
    let n = 100_000;
    let mut reports = vec![laplace_check(&model, &MarkFn::new("0.3x", 0.3, |x| 0.3 * x[0]), n, 11, JOBS)?];
    let g = FnFunctional::new("exp(-N(x^2))", 1, 1, |c: &Configuration| {
        Ok(vec![(-c.integrate(|a| a.mark[0] * a.mark[0])).exp()])
    });
    let (plus, minus) = lemma8_check(&model, &g, &MarkFn::new("x^2", 1.0, |x| x[0] * x[0]), n, 12, JOBS)?;
    reports.extend([plus, minus]);
    let lin = MarkedIntegrand::new("x(r-1/2)", |_, x, r| x[0] * (r - 0.5), |_, _| 0.0, |_, x| x[0] * x[0] / 12.0);
    reports.push(marked_moment_check(&model, &lin, n, 13, JOBS)?);
    let rho = |s: f64| if s == 0.0 { 1.0 } else { -(-s).exp_m1() / s };
    let expo = MarkedIntegrand::new(
        "exp(-x^2 r)",
        |_, x, r| (-x[0] * x[0] * r).exp(),
        move |_, x| rho(x[0] * x[0]),
        move |_, x| rho(2.0 * x[0] * x[0]),
    );
    let (a, b) = mark_identities_check(&model, &expo, n, 16, 14, JOBS)?;
    reports.extend([a, b]);
    let singles = reports.iter().filter(|r| r.pass).count();
    let suite = statistical_suite(n, 16, 15, JOBS)?;
    let suite_pass = suite.iter().filter(|r| r.pass).count();
    for r in reports.iter().chain(&suite).filter(|r| !r.pass) {
        println!("    {}", r.summary());
    }
    outcome(
        singles == reports.len() && suite_pass * 100 >= 95 * suite.len(),
        format!("{singles}/{} single checks, suite {suite_pass}/{}", reports.len(), suite.len()),
    )
}

fn second_quantization() -> Result<Outcome> {
    let model = IntensityModel::uniform(1.0, 5.0, -0.5, 1.0, 1)?;
    let sg = ResamplingSemigroup::new(&model);
    let u = MarkFn::linear(1.0, 1.0, 1);
    let mut good = 0;
    let mut total = 0;
    for n in [1, 2] {
        for t in [0.2, 1.0] {
            total += 1;
            let r = second_quantization_check(&sg, &u, n, t, 100_000, 64, derive_seed(909, (10 * n) as u64 + (t * 10.0) as u64), JOBS)?;
            if r.pass {
                good += 1;
            } else {
                println!("    {}", r.summary());
            }
        }
    }
    let g = MarkFn::new("0.5x", 0.5, |x| 0.5 * x[0]);
    let g_inner = g.clone();
    let f = FnFunctional::new("exp(N log(1+g))", 1, 1, move |c: &Configuration| {
        Ok(vec![c.atoms().iter().map(|a| 1.0 + g_inner.eval(&a.mark)).product()])
    });
    let cfgs = configs(&model, 5, 910)?;
    for t in [0.2, 1.0] {
        let ptg = pt_apply(&sg, &g, t)?;
        for (i, cfg) in cfgs.iter().enumerate() {
            total += 1;
            let m = mehler_apply(&sg, &f, cfg, t, 100_000, derive_seed(911, i as u64))?;
            let target: f64 = cfg.atoms().iter().map(|a| 1.0 + ptg.eval(&a.mark)).product();
            if (m.mean - target).abs() <= 4.0 * m.se || (m.se == 0.0 && (m.mean - target).abs() < 1e-12) {
                good += 1;
            }
        }
    }
    outcome(good == total, format!("{good}/{total} checks within 4 SE"))
}

fn density_diagnostics() -> Result<Outcome> {
    let model = scalar_model(20.0);
    let f = pair_doleans(&model, 1.0)?;
    let survey = det_positivity_survey(&f, &GammaSpec::diag_x2(1), &model, 10_000, 1e-12, 1001, JOBS)?;
    let threshold = 1.0 - 2.0 * (-20f64).exp() - 1e-3;
    let demo = rajchman_demo(30, &(0..=8).collect::<Vec<_>>(), 20_000, 1002, JOBS)?;
    let spread = demo.rows.iter().map(|r| (r.closed - demo.limit).abs()).fold(0.0, f64::max);
    let mc: Vec<String> = demo.rows.iter().map(|r| format!("{:.3}", r.mc)).collect();
    outcome(
        survey.frequency >= threshold && spread <= 0.002 && (demo.limit - 0.0335).abs() < 0.002,
        format!(
            "det-positivity {:.4} (need {threshold:.4}); |phi(2^k pi)| limit {:.5}, max deviation {spread:.1e}, MC [{}]",
            survey.frequency,
            demo.limit,
            mc.join(", ")
        ),
    )
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lentpart-acceptance-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), fs::read(&p).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn reproducibility() -> Result<Outcome> {
    let configs = [
        "[model]\nfamily = \"uniform\"\nrate = 20.0\nlo = -0.9\nhi = 0.9\n[functional]\nlabel = \"pair_doleans\"\n[experiment]\nkind = \"survey\"\nnsamples = 500\nseed = 3\n",
        "[model]\nfamily = \"power\"\nc = 1.0\na = 0.5\nepsilon = 0.1\n[functional]\nlabel = \"doleans\"\n[experiment]\nkind = \"identity\"\nchecks = [\"laplace\", \"lemma8\", \"mark_identities\"]\nnsamples = 2000\nseed = 4\n",
        "[model]\nfamily = \"symmetric_power\"\nc = 1.0\na = 0.5\nepsilon = 0.05\n[functional]\nlabel = \"path_eval\"\n[experiment]\nkind = \"density\"\nnsamples = 2000\nnpoints = 64\n",
    ];
    let mut identical = 0;
    for (k, text) in configs.iter().enumerate() {
        let runs: Vec<Vec<(String, Vec<u8>)>> = [1, 4]
            .iter()
            .map(|&jobs| {
                let dir = scratch(&format!("{k}-{jobs}"));
                runner::run(text, Path::new("."), &RunOptions { seed: None, jobs: Jobs(jobs), out_dir: dir.clone() })
                    .map(|_| artifacts(&dir))
                    .map_err(|e| lentpart::Error::InvalidArgument(e.to_string()))
            })
            .collect::<Result<_>>()?;
        if !runs[0].is_empty() && runs[0] == runs[1] {
            identical += 1;
        }
    }
    outcome(identical == configs.len(), format!("{identical}/{} experiments byte-identical across --jobs 1 and 4", configs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("closed vs finite-difference carre du champ", closed_vs_fd),
        ("two-atom fixture values", example_one),
        ("gradient second moment E(F#)^2 = Gamma", sharp_second_moment),
        ("chain rule", chain_rule),
        ("exponential series and product formula", pathwise_identities),
        ("chaos orthogonality", orthogonality),
        ("chaos carre du champ vs finite differences", chaos_gamma),
        ("measure identities and statistical suite", measure_identities),
        ("second quantization and Mehler sampler", second_quantization),
        ("density diagnostics", density_diagnostics),
        ("reproducibility across worker counts", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
