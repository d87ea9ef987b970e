//! Multiple Poisson integrals, their generating-function identities, chaos
//! gradients, and the keep-or-resample semigroup with its Mehler sampler.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::configuration::{sample_configuration, Configuration, IntensityModel};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::lent_particle::{gamma_quadratic, GammaSpec};
use crate::report::EstimatorReport;
use crate::rng::{derive_seed, par_map, stream, Jobs};
use crate::stats::{mean_se, MeanSe};

/// Largest supported chaos degree.
pub const MAX_DEGREE: usize = 8;

const MEHLER_TAG: u64 = 0x6d65_686c;

type MarkScalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MarkGradient = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A bounded function of the mark, with optional gradient.
#[derive(Clone)]
pub struct MarkFn {
    label: String,
    f: MarkScalar,
    grad: Option<MarkGradient>,
    sup: f64,
}

impl fmt::Debug for MarkFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MarkFn({}, sup {})", self.label, self.sup)
    }
}

impl MarkFn {
    /// `sup` is a bound on |u| over the support of the intensity.
    pub fn new(label: impl Into<String>, sup: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> MarkFn {
        MarkFn { label: label.into(), f: Arc::new(f), grad: None, sup }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> MarkFn {
        self.grad = Some(Arc::new(g));
        self
    }

    /// u(x) = c·x₁.
    pub fn linear(c: f64, sup: f64, dim: usize) -> MarkFn {
        MarkFn::new(format!("{c}*x1"), sup, move |x| c * x[0]).with_gradient(move |_| {
            let mut g = vec![0.0; dim];
            g[0] = c;
            g
        })
    }

    /// Replaces the declared bound on |u| over the mark support.
    pub fn with_sup(mut self, sup: f64) -> MarkFn {
        self.sup = sup;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn sup(&self) -> f64 {
        self.sup
    }
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.grad {
            Some(g) => Ok(g(x)),
            None => Err(Error::Unsupported(format!("{} has no gradient", self.label))),
        }
    }
    fn same_as(&self, other: &MarkFn) -> bool {
        Arc::ptr_eq(&self.f, &other.f)
    }
}

/// e_0..e_k of the values, by the one-pass recurrence e_j ← e_j + v·e_{j−1}.
pub fn elementary_symmetric(values: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for j in (1..=k.min(i + 1)).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// k!·e_k(u(x₁), …, u(x_N)): the sum over ordered k-tuples of distinct atoms of Π u.
pub fn factorial_measure(cfg: &Configuration, u: &MarkFn, k: usize) -> f64 {
    let values: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
    factorial(k) * elementary_symmetric(&values, k)[k]
}

/// I_n(u^⊗n) = Σ_k C(n,k) (−ν(u))^{n−k} k! e_k from the values u(x_i).
fn power_integral(values: &[f64], nu: f64, n: usize) -> f64 {
    let e = elementary_symmetric(values, n);
    (0..=n).map(|k| binomial(n, k) * (-nu).powi((n - k) as i32) * factorial(k) * e[k]).sum()
}

/// I_0..I_n of u^⊗k from the same values.
fn power_integrals(values: &[f64], nu: f64, n: usize) -> Vec<f64> {
    let e = elementary_symmetric(values, n);
    (0..=n)
        .map(|m| (0..=m).map(|k| binomial(m, k) * (-nu).powi((m - k) as i32) * factorial(k) * e[k]).sum())
        .collect()
}

/// The symmetrized product kernel u₁ ⊗ … ⊗ u_n.
#[derive(Debug, Clone)]
pub struct ProductKernel {
    factors: Vec<MarkFn>,
}

impl ProductKernel {
    pub fn new(factors: Vec<MarkFn>) -> Result<ProductKernel> {
        if factors.len() > MAX_DEGREE {
            return Err(Error::Unsupported(format!("degree {} exceeds {MAX_DEGREE}", factors.len())));
        }
        Ok(ProductKernel { factors })
    }

    pub fn power(u: &MarkFn, n: usize) -> Result<ProductKernel> {
        ProductKernel::new(vec![u.clone(); n])
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[MarkFn] {
        &self.factors
    }

    fn is_power(&self) -> bool {
        self.factors.windows(2).all(|w| w[0].same_as(&w[1]))
    }
}

/// A product kernel with its compensators ν(u_j) precomputed.
#[derive(Debug, Clone)]
pub struct MultipleIntegral {
    kernel: ProductKernel,
    nus: Vec<f64>,
    dim: usize,
    label: String,
}

impl MultipleIntegral {
    pub fn new(model: &IntensityModel, kernel: ProductKernel) -> Result<MultipleIntegral> {
        let nus = kernel.factors.iter().map(|u| model.nu_integrate(&*u.f)).collect::<Result<Vec<_>>>()?;
        let names: Vec<&str> = kernel.factors.iter().map(|u| u.label()).collect();
        let label = format!("I_{}({})", kernel.degree(), names.join("⊗"));
        Ok(MultipleIntegral { kernel, nus, dim: model.dim(), label })
    }

    pub fn eval(&self, cfg: &Configuration) -> f64 {
        let n = self.kernel.degree();
        if n == 0 {
            return 1.0;
        }
        if self.kernel.is_power() {
            let u = &self.kernel.factors[0];
            let values: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
            return power_integral(&values, self.nus[0], n);
        }
        // dp[S] = Σ over injective S → atoms of Π_{j∈S} u_j, built one atom at a time
        let full = 1usize << n;
        let mut dp = vec![0.0; full];
        dp[0] = 1.0;
        for a in cfg.atoms() {
            let u: Vec<f64> = self.kernel.factors.iter().map(|f| f.eval(&a.mark)).collect();
            for s in (1..full).rev() {
                let mut add = 0.0;
                for (j, uj) in u.iter().enumerate() {
                    if s & (1 << j) != 0 {
                        add += uj * dp[s & !(1 << j)];
                    }
                }
                dp[s] += add;
            }
        }
        (0..full)
            .map(|s| {
                let missing = n - s.count_ones() as usize;
                let comp: f64 = (0..n).filter(|j| s & (1 << j) == 0).map(|j| self.nus[j]).product();
                let sign = if missing % 2 == 0 { 1.0 } else { -1.0 };
                sign * comp * dp[s]
            })
            .sum()
    }
}

/// Scalar functional ω ↦ I_n(ω); its add-one derivative is taken by finite differences.
impl Functional for MultipleIntegral {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        Ok(vec![self.eval(cfg)])
    }
}

/// I_n of the symmetrized product kernel.
pub fn multiple_integral(cfg: &Configuration, model: &IntensityModel, kernel: &ProductKernel) -> Result<f64> {
    Ok(MultipleIntegral::new(model, kernel.clone())?.eval(cfg))
}

/// Residual of a pathwise identity with its a-priori bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Σ_{k+m > n_max} t^k e_k(|u|) |tν(u)|^m / m!, which dominates the residual.
    pub tail_bound: f64,
    /// tail_bound / ((t·sup|u|)^{n_max+1} e^{|t|ν(|u|)}).
    pub constant: f64,
}

fn check_radius(t: f64, u: &MarkFn) -> Result<()> {
    if (t * u.sup()).abs() < 0.5 {
        Ok(())
    } else {
        Err(Error::Radius(format!("|t|·sup|u| = {} must stay below 1/2", (t * u.sup()).abs())))
    }
}

/// Compares Π(1 + t u(x_i)) e^{−tν(u)} with Σ_{n ≤ n_max} tⁿ/n! I_n(u^⊗n).
pub fn exp_series_check(cfg: &Configuration, model: &IntensityModel, u: &MarkFn, t: f64, n_max: usize) -> Result<SeriesCheck> {
    check_radius(t, u)?;
    let nu = model.nu_integrate(&*u.f)?;
    let nu_abs = model.nu_integrate(&|x: &[f64]| u.eval(x).abs())?;
    let values: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
    let lhs = values.iter().map(|v| 1.0 + t * v).product::<f64>() * (-t * nu).exp();
    let integrals = power_integrals(&values, nu, n_max);
    let rhs: f64 = integrals.iter().enumerate().map(|(n, i)| t.powi(n as i32) / factorial(n) * i).sum();

    let abs_values: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let e_abs = elementary_symmetric(&abs_values, abs_values.len());
    let z = (t * nu).abs();
    let exp_tail = |from: usize| -> f64 {
        let mut term = z.powi(from as i32) / factorial(from);
        let mut sum = 0.0;
        let mut m = from;
        while term > 0.0 && (term > 1e-300 && term > sum * 1e-18) {
            sum += term;
            m += 1;
            term *= z / m as f64;
        }
        sum
    };
    let tail_bound: f64 = e_abs
        .iter()
        .enumerate()
        .map(|(k, ek)| t.abs().powi(k as i32) * ek * if k > n_max { z.exp() } else { exp_tail(n_max + 1 - k) })
        .sum();
    let scale = (t * u.sup()).abs().powi(n_max as i32 + 1) * (t.abs() * nu_abs).exp();
    Ok(SeriesCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        tail_bound,
        constant: if scale > 0.0 { tail_bound / scale } else { 0.0 },
    })
}

/// Relative residual of the generating-function product formula.
pub fn product_formula_check(
    cfg: &Configuration,
    model: &IntensityModel,
    u: &MarkFn,
    v: &MarkFn,
    s: f64,
    t: f64,
) -> Result<f64> {
    check_radius(s, u)?;
    check_radius(t, v)?;
    let nu_u = model.nu_integrate(&*u.f)?;
    let nu_v = model.nu_integrate(&*v.f)?;
    let nu_uv = model.nu_integrate(&|x: &[f64]| u.eval(x) * v.eval(x))?;
    let joint = |x: &[f64]| {
        let (a, b) = (u.eval(x), v.eval(x));
        s * a + t * b + s * t * a * b
    };
    let nu_joint = model.nu_integrate(&joint)?;
    let (mut log_u, mut log_v, mut log_joint) = (0.0, 0.0, 0.0);
    for a in cfg.atoms() {
        log_u += (s * u.eval(&a.mark)).ln_1p();
        log_v += (t * v.eval(&a.mark)).ln_1p();
        log_joint += joint(&a.mark).ln_1p();
    }
    let lhs = (log_u - s * nu_u).exp() * (log_v - t * nu_v).exp();
    let rhs = (log_joint - nu_joint).exp() * (s * t * nu_uv).exp();
    Ok((lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE))
}

/// Monte Carlo of E[I_m(u^⊗m) I_n(v^⊗n)] for every (m, n) in `degrees`², one report per cell.
pub fn orthogonality_grid(
    model: &IntensityModel,
    u: &MarkFn,
    v: &MarkFn,
    degrees: &[usize],
    nsamples: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<Vec<EstimatorReport>> {
    let top = degrees.iter().copied().max().unwrap_or(0);
    if top > MAX_DEGREE {
        return Err(Error::Unsupported(format!("degree {top} exceeds {MAX_DEGREE}")));
    }
    let nu_u = model.nu_integrate(&*u.f)?;
    let nu_v = model.nu_integrate(&*v.f)?;
    let inner = model.nu_integrate(&|x: &[f64]| u.eval(x) * v.eval(x))?;
    let samples = par_map(nsamples, jobs, |i| {
        let cfg = sample_configuration(model, derive_seed(seed, i as u64))?;
        let uv: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
        let vv: Vec<f64> = cfg.atoms().iter().map(|a| v.eval(&a.mark)).collect();
        Ok((power_integrals(&uv, nu_u, top), power_integrals(&vv, nu_v, top)))
    })?;
    let mut reports = Vec::new();
    for &m in degrees {
        for &n in degrees {
            let products: Vec<f64> = samples.iter().map(|(iu, iv)| iu[m] * iv[n]).collect();
            let reference = if m == n { factorial(n) * inner.powi(n as i32) } else { 0.0 };
            reports.push(EstimatorReport::from_samples(format!("orthogonality[{m},{n}]"), &products, reference));
        }
    }
    Ok(reports)
}

/// E[I_m(u^⊗m) I_n(v^⊗n)] against δ_{mn} n! ⟨u, v⟩ⁿ.
pub fn orthogonality_mc(
    model: &IntensityModel,
    u: &MarkFn,
    v: &MarkFn,
    m: usize,
    n: usize,
    nsamples: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<EstimatorReport> {
    let degrees = if m == n { vec![m] } else { vec![m, n] };
    let grid = orthogonality_grid(model, u, v, &degrees, nsamples, seed, jobs)?;
    let name = format!("orthogonality[{m},{n}]");
    Ok(grid.into_iter().find(|r| r.identity == name).expect("requested cell is in the grid"))
}

/// I_{n−1}(u^⊗(n−1)) on ω ∖ a written through full-ω integrals:
/// Σ_k (−u(x_a))^k (n−1)!/(n−1−k)! I_{n−1−k}(ω).
fn reduced_integral(full: &[f64], ua: f64, n: usize) -> f64 {
    (0..n).map(|k| (-ua).powi(k as i32) * factorial(n - 1) / factorial(n - 1 - k) * full[n - 1 - k]).sum()
}

/// Γ[I_i(u^⊗i), I_j(v^⊗j)] = Σ_a i·j·I_{i−1}(ω∖a)·I_{j−1}(ω∖a)·γ[u, v](x_a).
pub fn chaos_gamma_closed(
    cfg: &Configuration,
    model: &IntensityModel,
    u: &MarkFn,
    v: &MarkFn,
    i: usize,
    j: usize,
    spec: &GammaSpec,
) -> Result<f64> {
    if i.max(j) > MAX_DEGREE {
        return Err(Error::Unsupported(format!("degree {} exceeds {MAX_DEGREE}", i.max(j))));
    }
    if i == 0 || j == 0 || cfg.is_empty() {
        return Ok(0.0);
    }
    let uv: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
    let vv: Vec<f64> = cfg.atoms().iter().map(|a| v.eval(&a.mark)).collect();
    let full_u = power_integrals(&uv, model.nu_integrate(&*u.f)?, i);
    let full_v = power_integrals(&vv, model.nu_integrate(&*v.f)?, j);
    let mut total = 0.0;
    for (k, a) in cfg.atoms().iter().enumerate() {
        let gamma = gamma_quadratic(spec, &a.mark, &u.gradient(&a.mark)?, &v.gradient(&a.mark)?)?;
        let di = i as f64 * reduced_integral(&full_u, uv[k], i);
        let dj = j as f64 * reduced_integral(&full_v, vv[k], j);
        total += di * dj * gamma;
    }
    Ok(total)
}

/// p_t u = e^{−t}u + (1 − e^{−t})σ_ε(u)/λ: keep the mark with probability e^{−t}, else resample it.
#[derive(Debug, Clone)]
pub struct ResamplingSemigroup {
    model: IntensityModel,
}

impl ResamplingSemigroup {
    pub fn new(model: &IntensityModel) -> ResamplingSemigroup {
        ResamplingSemigroup { model: model.clone() }
    }

    pub fn model(&self) -> &IntensityModel {
        &self.model
    }

    pub fn keep_prob(t: f64) -> f64 {
        (-t).exp()
    }

    /// Moves every atom of `cfg` independently by the kernel p_t (times are kept).
    pub fn resample(&self, cfg: &Configuration, t: f64, rng: &mut dyn RngCore) -> Result<Configuration> {
        let keep = Self::keep_prob(t);
        cfg.map_marks(|_, a| {
            if rng.random::<f64>() < keep {
                a.mark.clone()
            } else {
                self.model.sample_mark(rng)
            }
        })
    }
}

/// The function p_t u.
pub fn pt_apply(sg: &ResamplingSemigroup, u: &MarkFn, t: f64) -> Result<MarkFn> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("semigroup time must be nonnegative, got {t}")));
    }
    let keep = ResamplingSemigroup::keep_prob(t);
    let average = sg.model.sigma_integrate(&*u.f)? / sg.model.rate();
    let inner = u.f.clone();
    let mut out = MarkFn::new(format!("p_{t}({})", u.label), u.sup, move |x| keep * inner(x) + (1.0 - keep) * average);
    if let Some(g) = u.grad.clone() {
        out = out.with_gradient(move |x| g(x).into_iter().map(|v| keep * v).collect());
    }
    Ok(out)
}

/// Inner Monte Carlo of F over independent per-atom moves; returns the inner mean and SE.
pub fn mehler_apply(
    sg: &ResamplingSemigroup,
    f: &dyn Functional,
    cfg: &Configuration,
    t: f64,
    n_inner: usize,
    seed: u64,
) -> Result<MeanSe> {
    if n_inner == 0 {
        return Err(Error::InvalidArgument("n_inner must be at least 1".into()));
    }
    let key = derive_seed(seed, MEHLER_TAG);
    let values = (0..n_inner)
        .map(|k| {
            let moved = sg.resample(cfg, t, &mut stream(key, k as u64))?;
            Ok(f.value(&moved)?[0])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_se(&values))
}

/// For each outer ω: R = (inner mean of I_n(u^⊗n)(moved ω) − I_n((p_t u)^⊗n)(ω))² − s²/n_inner.
/// E[R] = 0 exactly when the second-quantization identity holds.
pub fn second_quantization_check(
    sg: &ResamplingSemigroup,
    u: &MarkFn,
    n: usize,
    t: f64,
    nsamples: usize,
    n_inner: usize,
    seed: u64,
    jobs: Jobs,
) -> Result<EstimatorReport> {
    if n > 6 {
        return Err(Error::Unsupported(format!("second quantization check supports n ≤ 6, got {n}")));
    }
    if n_inner < 2 {
        return Err(Error::InvalidArgument("n_inner must be at least 2".into()));
    }
    let model = &sg.model;
    let ptu = pt_apply(sg, u, t)?;
    let nu = model.nu_integrate(&*u.f)?;
    let nu_pt = model.nu_integrate(&*ptu.f)?;
    let keep = ResamplingSemigroup::keep_prob(t);
    let stats = par_map(nsamples, jobs, |i| {
        let sample_seed = derive_seed(seed, i as u64);
        let cfg = sample_configuration(model, sample_seed)?;
        let base: Vec<f64> = cfg.atoms().iter().map(|a| u.eval(&a.mark)).collect();
        let target = power_integral(&cfg.atoms().iter().map(|a| ptu.eval(&a.mark)).collect::<Vec<_>>(), nu_pt, n);
        let key = derive_seed(sample_seed, MEHLER_TAG);
        let mut inner = Vec::with_capacity(n_inner);
        let mut moved = base.clone();
        for k in 0..n_inner {
            let mut rng = stream(key, k as u64);
            for (m, &b) in moved.iter_mut().zip(&base) {
                *m = if rng.random::<f64>() < keep { b } else { u.eval(&model.sample_mark(&mut rng)) };
            }
            inner.push(power_integral(&moved, nu, n));
        }
        let ms = mean_se(&inner);
        let var_of_mean = ms.se * ms.se;
        Ok((ms.mean - target).powi(2) - var_of_mean)
    })?;
    Ok(EstimatorReport::from_samples(format!("second_quantization[n={n},t={t}]"), &stats, 0.0))
}
