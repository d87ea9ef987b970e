//! Monte Carlo checks of measure-level identities and density diagnostics.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::chaos::MarkFn;
use crate::configuration::{sample_configuration, Atom, Configuration, IntensityModel, MarkLaw1};
use crate::error::{Error, Result};
use crate::functionals::{FnFunctional, Functional};
use crate::report::EstimatorReport;
use crate::rng::{derive_seed, par_map, stream, Jobs};
use crate::stats::mean_se;

const EXTRA_TAG: u64 = 0x6c65_6e74;

/// exp(−∫(1 − e^{iuf} + iuf) dν), the characteristic function of Ñ(f) at u.
pub fn characteristic_function(model: &IntensityModel, f: &MarkFn, u: f64) -> Result<Complex64> {
    let re = model.nu_integrate(&|x: &[f64]| 1.0 - (u * f.eval(x)).cos())?;
    let im = model.nu_integrate(&|x: &[f64]| {
        let v = u * f.eval(x);
        v - v.sin()
    })?;
    Ok((-Complex64::new(re, im)).exp())
}

/// E[e^{iÑ(f)}] by Monte Carlo against the closed Laplace functional.
pub fn laplace_check(model: &IntensityModel, f: &MarkFn, nsamples: usize, seed: u64, jobs: Jobs) -> Result<EstimatorReport> {
    let nu_f = model.nu_integrate(&|x: &[f64]| f.eval(x))?;
    let samples = par_map(nsamples, jobs, |i| {
        let cfg = sample_configuration(model, derive_seed(seed, i as u64))?;
        let n_tilde = cfg.integrate(|a| f.eval(&a.mark)) - nu_f;
        Ok(Complex64::new(0.0, n_tilde).exp())
    })?;
    let reference = characteristic_function(model, f, 1.0)?;
    Ok(EstimatorReport::from_complex_samples(format!("laplace[{}]", f.label()), &samples, reference))
}

/// The two directions of the Mecke-type duality for H(ω, x) = G(ω)g(x):
/// E∫ε⁺H dν = E∫H dN and E∫ε⁻H dN = E∫H dν.
pub fn lemma8_check(
    model: &IntensityModel,
    g_fun: &dyn Functional,
    g: &MarkFn,
    nsamples: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<(EstimatorReport, EstimatorReport)> {
    let nu_total = model.rate() * model.horizon();
    let nu_g = model.nu_integrate(&|x: &[f64]| g.eval(x))?;
    let rows = par_map(nsamples, jobs, |i| {
        let sample_seed = derive_seed(seed, i as u64);
        let cfg = sample_configuration(model, sample_seed)?;
        let g_omega = g_fun.value(&cfg)?[0];
        let n_g = cfg.integrate(|a| g.eval(&a.mark));
        // one draw from ν/ν(X) estimates ∫ G(ω + δ_x) g(x) ν(dx)
        let mut rng = stream(derive_seed(sample_seed, EXTRA_TAG), 0);
        let time = model.horizon() * rng.random::<f64>();
        let mark = model.sample_mark(&mut rng);
        let lifted = cfg.add_particle(&Atom::new(time, mark.clone())?)?;
        let plus = nu_total * g_fun.value(&lifted)?[0] * g.eval(&mark);
        let mut minus = 0.0;
        for (k, a) in cfg.atoms().iter().enumerate() {
            minus += g_fun.value(&cfg.without(k))?[0] * g.eval(&a.mark);
        }
        Ok([plus, g_omega * n_g, minus, g_omega * nu_g])
    })?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let label = format!("{},{}", g_fun.label(), g.label());
    Ok((
        EstimatorReport::paired(format!("lemma8_plus[{label}]"), &col(0), &col(1)),
        EstimatorReport::paired(format!("lemma8_minus[{label}]"), &col(2), &col(3)),
    ))
}

type MarkedFn = dyn Fn(&Configuration, &[f64], f64) -> f64 + Send + Sync;
type RhoMoment = dyn Fn(&Configuration, &[f64]) -> f64 + Send + Sync;

/// F(ω, x, r) on the marked space with closed ρ-moments ∫F dρ and ∫F² dρ.
#[derive(Clone)]
pub struct MarkedIntegrand {
    pub label: String,
    pub f: Arc<MarkedFn>,
    pub rho_mean: Arc<RhoMoment>,
    pub rho_second: Arc<RhoMoment>,
}

impl MarkedIntegrand {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&Configuration, &[f64], f64) -> f64 + Send + Sync + 'static,
        rho_mean: impl Fn(&Configuration, &[f64]) -> f64 + Send + Sync + 'static,
        rho_second: impl Fn(&Configuration, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> MarkedIntegrand {
        MarkedIntegrand { label: label.into(), f: Arc::new(f), rho_mean: Arc::new(rho_mean), rho_second: Arc::new(rho_second) }
    }
}

/// E(∫F dN⊙ρ)² against E[(∫∫F dρ dN)² − ∫(∫F dρ)² dN + ∫∫F² dρ dN].
pub fn marked_moment_check(
    model: &IntensityModel,
    f: &MarkedIntegrand,
    nsamples: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<EstimatorReport> {
    let rows = par_map(nsamples, jobs, |i| {
        let sample_seed = derive_seed(seed, i as u64);
        let cfg = sample_configuration(model, sample_seed)?;
        let marked = cfg.attach_marks(sample_seed);
        let lhs: f64 = marked.pairs().map(|(a, r)| (f.f)(&cfg, &a.mark, r)).sum::<f64>().powi(2);
        let (mut first, mut square, mut second) = (0.0, 0.0, 0.0);
        for a in cfg.atoms() {
            let m = (f.rho_mean)(&cfg, &a.mark);
            first += m;
            square += m * m;
            second += (f.rho_second)(&cfg, &a.mark);
        }
        Ok((lhs, first * first - square + second))
    })?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(EstimatorReport::paired(format!("marked_moment[{}]", f.label), &lhs, &rhs))
}

/// Inner mark-MC of exp∫log F dN⊙ρ and ∫F dN⊙ρ per configuration, against
/// exp∫log(∫F dρ) dN and ∫(∫F dρ) dN.
pub fn mark_identities_check(
    model: &IntensityModel,
    f: &MarkedIntegrand,
    nsamples: usize,
    n_inner: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<(EstimatorReport, EstimatorReport)> {
    if n_inner == 0 {
        return Err(Error::InvalidArgument("n_inner must be at least 1".into()));
    }
    let rows = par_map(nsamples, jobs, |i| {
        let sample_seed = derive_seed(seed, i as u64);
        let cfg = sample_configuration(model, sample_seed)?;
        let key = derive_seed(sample_seed, EXTRA_TAG);
        let (mut prod_acc, mut sum_acc) = (0.0, 0.0);
        for k in 0..n_inner {
            let marked = cfg.attach_marks_with(&mut stream(key, k as u64));
            let (mut prod, mut sum) = (1.0, 0.0);
            for (a, r) in marked.pairs() {
                let v = (f.f)(&cfg, &a.mark, r);
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Domain(format!("F must lie in (0, 1], got {v}")));
                }
                prod *= v;
                sum += v;
            }
            prod_acc += prod;
            sum_acc += sum;
        }
        let (mut closed_prod, mut closed_sum) = (1.0, 0.0);
        for a in cfg.atoms() {
            let m = (f.rho_mean)(&cfg, &a.mark);
            closed_prod *= m;
            closed_sum += m;
        }
        Ok([prod_acc / n_inner as f64, closed_prod, sum_acc / n_inner as f64, closed_sum])
    })?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    Ok((
        EstimatorReport::paired(format!("mark_exp_log[{}]", f.label), &col(0), &col(1)),
        EstimatorReport::paired(format!("mark_sum[{}]", f.label), &col(2), &col(3)),
    ))
}

/// Values of F on `nsamples` independent configurations, in sample order.
pub fn sample_functional(
    f: &dyn Functional,
    model: &IntensityModel,
    nsamples: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<Vec<Vec<f64>>> {
    par_map(nsamples, jobs, |i| f.value(&sample_configuration(model, derive_seed(seed, i as u64))?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

/// 0.9·min(sd, IQR/1.34)·n^{−1/5}, falling back to sd when the IQR vanishes.
pub fn silverman(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sd = mean_se(xs).se * n.sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// At least `requested` points, and never coarser than half a bandwidth.
fn grid_points(span: f64, h: f64, requested: usize) -> usize {
    let fine = ((span + 10.0 * h) / (0.5 * h)).ceil() as usize + 1;
    requested.max(fine).max(2)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Gaussian kernel density estimate of a scalar sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde1 {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Zero-variance sample: the law is an atom at `atom` and no density is estimated.
    pub degenerate: bool,
    pub atom: Option<f64>,
    /// Trapezoid integral of the estimate over the grid.
    pub mass: f64,
    /// Non-finite samples left out.
    pub dropped: usize,
}

pub fn kde_1d(samples: &[f64], npoints: usize, bandwidth: Bandwidth) -> Kde1 {
    let xs: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    let dropped = samples.len() - xs.len();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() || lo == hi {
        return Kde1 {
            grid: Vec::new(),
            density: Vec::new(),
            bandwidth: 0.0,
            degenerate: true,
            atom: xs.first().copied(),
            mass: 0.0,
            dropped,
        };
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman(&xs),
        Bandwidth::Fixed(h) => h,
    };
    let grid = linspace(lo - 5.0 * h, hi + 5.0 * h, grid_points(hi - lo, h, npoints));
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * PI).sqrt());
    let density: Vec<f64> = grid
        .par_iter()
        .map(|&g| xs.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    let mass = trapezoid(&grid, &density);
    Kde1 { grid, density, bandwidth: h, degenerate: false, atom: None, mass, dropped }
}

/// Product-Gaussian density estimate of a planar sample; `density[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde2 {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: [f64; 2],
    pub degenerate: bool,
    pub mass: f64,
    pub dropped: usize,
}

impl Kde2 {
    /// Trapezoid mass of the estimate over the rows with y > `level`.
    pub fn mass_above(&self, level: f64) -> f64 {
        let nx = self.xs.len();
        let rows: Vec<(f64, f64)> = self
            .ys
            .iter()
            .enumerate()
            .map(|(iy, &y)| (y, trapezoid(&self.xs, &self.density[iy * nx..(iy + 1) * nx])))
            .filter(|(y, _)| *y > level)
            .collect();
        let (ys, ms): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        trapezoid(&ys, &ms)
    }
}

pub fn kde_2d(samples: &[[f64; 2]], nx: usize, ny: usize, bandwidth: Bandwidth) -> Kde2 {
    let pts: Vec<[f64; 2]> = samples.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    let dropped = samples.len() - pts.len();
    let coord = |k: usize| pts.iter().map(|p| p[k]).collect::<Vec<_>>();
    let (cx, cy) = (coord(0), coord(1));
    let spread = |c: &[f64]| c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - c.iter().copied().fold(f64::INFINITY, f64::min);
    if pts.len() < 2 || spread(&cx) == 0.0 || spread(&cy) == 0.0 {
        return Kde2 { xs: Vec::new(), ys: Vec::new(), density: Vec::new(), bandwidth: [0.0; 2], degenerate: true, mass: 0.0, dropped };
    }
    let h = match bandwidth {
        Bandwidth::Silverman => [silverman(&cx), silverman(&cy)],
        Bandwidth::Fixed(b) => [b, b],
    };
    let axis = |c: &[f64], h: f64, n: usize| {
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        linspace(lo - 5.0 * h, hi + 5.0 * h, grid_points(hi - lo, h, n))
    };
    let (xs, ys) = (axis(&cx, h[0], nx), axis(&cy, h[1], ny));
    let norm = 1.0 / (pts.len() as f64 * h[0] * h[1] * 2.0 * PI);
    let density: Vec<f64> = (0..xs.len() * ys.len())
        .into_par_iter()
        .map(|idx| {
            let (gx, gy) = (xs[idx % xs.len()], ys[idx / xs.len()]);
            pts.iter()
                .map(|p| (-0.5 * (((gx - p[0]) / h[0]).powi(2) + ((gy - p[1]) / h[1]).powi(2))).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    let mut out = Kde2 { xs, ys, density, bandwidth: h, degenerate: false, mass: 0.0, dropped };
    out.mass = out.mass_above(f64::NEG_INFINITY);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kde {
    One(Kde1),
    Two(Kde2),
}

/// Density estimate of the law of F (m ≤ 2) from `nsamples` configurations.
pub fn kde(
    f: &dyn Functional,
    model: &IntensityModel,
    nsamples: usize,
    bandwidth: Bandwidth,
    npoints: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<Kde> {
    let values = sample_functional(f, model, nsamples, seed, jobs)?;
    match f.out_dim() {
        1 => Ok(Kde::One(kde_1d(&values.iter().map(|v| v[0]).collect::<Vec<_>>(), npoints, bandwidth))),
        2 => {
            let pts: Vec<[f64; 2]> = values.iter().map(|v| [v[0], v[1]]).collect();
            Ok(Kde::Two(kde_2d(&pts, npoints, npoints, bandwidth)))
        }
        m => Err(Error::Unsupported(format!("density estimates need m ≤ 2, got {m}"))),
    }
}

/// |φ̂(u)| of a scalar functional with the 1/√n band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcfPoint {
    pub u: f64,
    pub modulus: f64,
    pub se: f64,
}

pub fn ecf_of_samples(values: &[f64], u_grid: &[f64]) -> Vec<EcfPoint> {
    let n = values.len() as f64;
    u_grid
        .iter()
        .map(|&u| {
            let s: Complex64 = values.iter().map(|&v| Complex64::new(0.0, u * v).exp()).sum();
            EcfPoint { u, modulus: (s / n).norm(), se: 1.0 / n.sqrt() }
        })
        .collect()
}

pub fn ecf(
    f: &dyn Functional,
    model: &IntensityModel,
    nsamples: usize,
    u_grid: &[f64],
    seed: u64,
    jobs: Jobs,
) -> Result<Vec<EcfPoint>> {
    let values = sample_functional(f, model, nsamples, seed, jobs)?;
    Ok(ecf_of_samples(&values.iter().map(|v| v[0]).collect::<Vec<_>>(), u_grid))
}

/// One frequency of the Rajchman demonstration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RajchmanRow {
    pub k: u32,
    pub u: f64,
    /// exp(−T Σ_n (1 − cos(u 2^{−n}))) from the atomic measure.
    pub closed: f64,
    pub mc: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RajchmanDemo {
    /// exp(−Σ_{j≥0}(1 − cos(π/2^j))).
    pub limit: f64,
    pub rows: Vec<RajchmanRow>,
}

/// exp(−Σ_{j≥0}(1 − cos(π/2^j))), summed until the terms vanish.
pub fn rajchman_limit() -> f64 {
    let mut s = 0.0;
    for j in 0..200 {
        let term = 1.0 - (PI / 2f64.powi(j)).cos();
        if term == 0.0 {
            break;
        }
        s += term;
    }
    (-s).exp()
}

/// |φ(2^k π)| of Ñ(id) under Σ_{n=0}^{n_max} δ_{2^{−n}} on [0, 1], closed form and MC.
pub fn rajchman_demo(n_max: i32, ks: &[u32], nsamples: usize, seed: u64, jobs: Jobs) -> Result<RajchmanDemo> {
    let model = IntensityModel::atomic_dyadic(1.0, 0, n_max)?;
    let id = MarkFn::new("x", 1.0, |x| x[0]);
    let mean = model.mean()[0];
    let values = par_map(nsamples, jobs, |i| {
        let cfg = sample_configuration(&model, derive_seed(seed, i as u64))?;
        Ok(cfg.integrate(|a| a.mark[0]) - mean)
    })?;
    let freqs: Vec<f64> = ks.iter().map(|&k| 2f64.powi(k as i32) * PI).collect();
    let mc = ecf_of_samples(&values, &freqs);
    let rows = ks
        .iter()
        .zip(mc)
        .map(|(&k, p)| {
            Ok(RajchmanRow { k, u: p.u, closed: characteristic_function(&model, &id, p.u)?.norm(), mc: p.modulus, mc_se: p.se })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RajchmanDemo { limit: rajchman_limit(), rows })
}

/// |φ(u)| of Y_T under the symmetric power model as the truncation ε decreases (reported, not asserted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub epsilon: f64,
    pub u: f64,
    pub modulus: f64,
}

pub fn truncation_ladder(horizon: f64, c: f64, a: f64, epsilons: &[f64], u_grid: &[f64]) -> Result<Vec<LadderRow>> {
    let id = MarkFn::new("x", 1.0, |x| x[0]);
    let mut rows = Vec::new();
    for &eps in epsilons {
        let model = IntensityModel::symmetric_power(horizon, c, a, eps)?;
        for &u in u_grid {
            rows.push(LadderRow { epsilon: eps, u, modulus: characteristic_function(&model, &id, u)?.norm() });
        }
    }
    Ok(rows)
}

/// The fixed battery of 40 statistical checks over five intensity models.
pub fn statistical_suite(nsamples: usize, n_inner: usize, seed: u64, jobs: Jobs) -> Result<Vec<EstimatorReport>> {
    let scalar_models = [
        IntensityModel::uniform(1.0, 5.0, -0.5, 1.0, 1)?.with_label("uniform"),
        IntensityModel::symmetric_power(1.0, 1.0, 0.5, 0.05)?.with_label("symmetric-power"),
        IntensityModel::power(1.0, 1.0, 0.5, 0.1)?.with_label("power"),
    ];
    let polar = IntensityModel::polar(1.0, 1.0 / (2.0 * PI) * 3.0, 0.1)?.with_label("polar");
    let gaussian = IntensityModel::compound_poisson(
        1.0,
        4.0,
        vec![MarkLaw1::Normal { mean: 0.2, sd: 0.5 }, MarkLaw1::Uniform { lo: -1.0, hi: 1.0 }],
    )?
    .with_label("gaussian-uniform");

    let mut reports = Vec::new();
    let mut next = 0u64;
    let mut key = || {
        next += 1;
        derive_seed(seed, next)
    };
    let tag = |r: EstimatorReport, model: &IntensityModel| EstimatorReport { identity: format!("{}@{}", r.identity, model.label()), ..r };

    let expo = |label: &str, dim: usize, h: fn(&[f64]) -> f64| {
        FnFunctional::new(label, 1, dim, move |c: &Configuration| Ok(vec![(-c.integrate(|a| h(&a.mark))).exp()]))
    };
    let lin_r = MarkedIntegrand::new("x(r-1/2)", |_, x, r| x[0] * (r - 0.5), |_, _| 0.0, |_, x| x[0] * x[0] / 12.0);
    let cos_r = MarkedIntegrand::new(
        "r cos x",
        |_, x, r| r * x[0].cos(),
        |_, x| 0.5 * x[0].cos(),
        |_, x| x[0].cos().powi(2) / 3.0,
    );
    let exp_r = MarkedIntegrand::new(
        "exp(-x^2 r)",
        |_, x, r| (-x[0] * x[0] * r).exp(),
        |_, x| {
            let s = x[0] * x[0];
            if s == 0.0 { 1.0 } else { -(-s).exp_m1() / s }
        },
        |_, x| {
            let s = 2.0 * x[0] * x[0];
            if s == 0.0 { 1.0 } else { -(-s).exp_m1() / s }
        },
    );

    for model in &scalar_models {
        for f in [
            MarkFn::new("0.3x", 0.3, |x| 0.3 * x[0]),
            MarkFn::new("cos x", 1.0, |x| x[0].cos()),
            MarkFn::new("0.7*1{x>0}", 0.7, |x| if x[0] > 0.0 { 0.7 } else { 0.0 }),
        ] {
            reports.push(tag(laplace_check(model, &f, nsamples, key(), jobs)?, model));
        }
        let g = expo("exp(-N(x^2))", 1, |x| x[0] * x[0]);
        let (plus, minus) = lemma8_check(model, &g, &MarkFn::new("x^2", 1.0, |x| x[0] * x[0]), nsamples, key(), jobs)?;
        reports.push(tag(plus, model));
        reports.push(tag(minus, model));
        reports.push(tag(marked_moment_check(model, &lin_r, nsamples, key(), jobs)?, model));
        reports.push(tag(marked_moment_check(model, &cos_r, nsamples, key(), jobs)?, model));
        let (prod, sum) = mark_identities_check(model, &exp_r, nsamples, n_inner, key(), jobs)?;
        reports.push(tag(prod, model));
        reports.push(tag(sum, model));
        let (centered, isometry) = centering_check(model, nsamples, key(), jobs)?;
        reports.push(tag(centered, model));
        reports.push(tag(isometry, model));
    }

    for model in [&polar, &gaussian] {
        let f = MarkFn::new("0.5(x1+x2)", 1.0, |x| 0.5 * (x[0] + x[1]));
        reports.push(tag(laplace_check(model, &f, nsamples, key(), jobs)?, model));
    }
    let g = expo("exp(-N(|x|^2))", 2, |x| x[0] * x[0] + x[1] * x[1]);
    let (plus, minus) = lemma8_check(&polar, &g, &MarkFn::new("x1^2", 1.0, |x| x[0] * x[0]), nsamples, key(), jobs)?;
    reports.push(tag(plus, &polar));
    reports.push(tag(minus, &polar));
    reports.push(tag(marked_moment_check(&gaussian, &lin_r, nsamples, key(), jobs)?, &gaussian));
    let (prod, sum) = mark_identities_check(&gaussian, &exp_r, nsamples, n_inner, key(), jobs)?;
    reports.push(tag(prod, &gaussian));
    reports.push(tag(sum, &gaussian));
    Ok(reports)
}

/// E[Ñ(sin x)] = 0 and E[Ñ(sin x)²] = ν(sin² x).
pub fn centering_check(model: &IntensityModel, nsamples: usize, seed: u64, jobs: Jobs) -> Result<(EstimatorReport, EstimatorReport)> {
    let f = |x: &[f64]| x[0].sin();
    let nu_f = model.nu_integrate(&f)?;
    let nu_f2 = model.nu_integrate(&|x: &[f64]| f(x).powi(2))?;
    let values = par_map(nsamples, jobs, |i| {
        let cfg = sample_configuration(model, derive_seed(seed, i as u64))?;
        Ok(cfg.integrate(|a| f(&a.mark)) - nu_f)
    })?;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    Ok((
        EstimatorReport::from_samples("centering[sin x]", &values, 0.0),
        EstimatorReport::from_samples("isometry[sin x]", &squares, nu_f2),
    ))
}
