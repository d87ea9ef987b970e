//! Truncated Lévy intensities ν = dt × σ_ε with samplers and deterministic quadrature.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, Poisson};

use super::{Atom, Configuration};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A finite jump measure σ_ε on the mark space.
pub trait JumpLaw: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Total mass λ = σ_ε(ℝ^d ∖ {0}).
    fn rate(&self) -> f64;
    /// One draw from σ_ε / λ.
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// ∫ f dσ_ε.
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64>;
    fn diffuse(&self) -> bool {
        true
    }
}

/// Runs a 1-d quadrature whose integrand may itself fail.
fn integrate_fallible(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let value = integrate(&g, a, b, Tolerance::default());
    match failure.into_inner() {
        Some(e) => Err(e),
        None => value,
    }
}

/// One-dimensional probability law used as a marginal of a compound Poisson model.
#[derive(Clone)]
pub enum MarkLaw1 {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// Normalized version of a user density on `[lo, hi]` bounded by `bound`.
    Density { density: ScalarFn, lo: f64, hi: f64, bound: f64, mass: f64 },
}

impl fmt::Debug for MarkLaw1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkLaw1::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            MarkLaw1::Normal { mean, sd } => write!(f, "Normal({mean}, {sd})"),
            MarkLaw1::Density { lo, hi, mass, .. } => write!(f, "Density([{lo}, {hi}], mass {mass})"),
        }
    }
}

impl MarkLaw1 {
    /// Wraps an unnormalized density; returns the law and its total mass.
    pub fn density(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        bound: f64,
    ) -> Result<MarkLaw1> {
        if !(lo < hi && bound > 0.0) {
            return Err(Error::InvalidModel("density needs lo < hi and a positive bound".into()));
        }
        let mass = integrate(&|x| density(x), lo, hi, Tolerance::default())?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidModel(format!("density mass must be positive, got {mass}")));
        }
        Ok(MarkLaw1::Density { density: Arc::new(density), lo, hi, bound, mass })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            MarkLaw1::Uniform { lo, hi } => lo < hi,
            MarkLaw1::Normal { sd, .. } => *sd > 0.0,
            MarkLaw1::Density { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("degenerate marginal {self:?}")))
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            MarkLaw1::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MarkLaw1::Normal { mean, sd } => Normal::new(*mean, *sd).expect("validated").sample(rng),
            MarkLaw1::Density { density, lo, hi, bound, .. } => loop {
                let x = lo + (hi - lo) * rng.random::<f64>();
                if rng.random::<f64>() * bound <= density(x) {
                    break x;
                }
            },
        }
    }

    /// Expectation of `g` under the law.
    fn expect(&self, g: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
        match self {
            MarkLaw1::Uniform { lo, hi } => Ok(integrate_fallible(g, *lo, *hi)? / (hi - lo)),
            MarkLaw1::Normal { mean, sd } => {
                let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                integrate_fallible(&|z| Ok(g(mean + sd * z)? * phi(z)), f64::NEG_INFINITY, f64::INFINITY)
            }
            MarkLaw1::Density { density, lo, hi, mass, .. } => {
                Ok(integrate_fallible(&|x| Ok(g(x)? * density(x)), *lo, *hi)? / mass)
            }
        }
    }
}

/// Compound Poisson: rate λ and independent marginals per coordinate.
#[derive(Debug, Clone)]
struct CompoundPoisson {
    rate: f64,
    marginals: Vec<MarkLaw1>,
}

impl CompoundPoisson {
    fn nested(&self, k: usize, prefix: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        if k == self.marginals.len() {
            return Ok(f(prefix));
        }
        self.marginals[k].expect(&|x| {
            let mut p = prefix.to_vec();
            p.push(x);
            self.nested(k + 1, &p, f)
        })
    }
}

impl JumpLaw for CompoundPoisson {
    fn dim(&self) -> usize {
        self.marginals.len()
    }
    fn rate(&self) -> f64 {
        self.rate
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        Ok(self.rate * self.nested(0, &[], f)?)
    }
}

/// σ(dx) = c·x^(−1−a) on (ε, 1), optionally mirrored onto (−1, −ε).
#[derive(Debug, Clone)]
struct PowerTruncated {
    c: f64,
    a: f64,
    eps: f64,
    two_sided: bool,
}

impl PowerTruncated {
    fn one_sided_mass(&self) -> f64 {
        if self.a == 0.0 {
            self.c * (1.0 / self.eps).ln()
        } else {
            self.c * (self.eps.powf(-self.a) - 1.0) / self.a
        }
    }
}

impl JumpLaw for PowerTruncated {
    fn dim(&self) -> usize {
        1
    }
    fn rate(&self) -> f64 {
        let m = self.one_sided_mass();
        if self.two_sided {
            2.0 * m
        } else {
            m
        }
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u: f64 = rng.random();
        let x = if self.a == 0.0 {
            self.eps.powf(1.0 - u)
        } else {
            let top = self.eps.powf(-self.a);
            (top - u * (top - 1.0)).powf(-1.0 / self.a)
        };
        if self.two_sided && rng.random::<bool>() {
            vec![-x]
        } else {
            vec![x]
        }
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        // x = e^s turns c x^(-1-a) dx into c e^(-a s) ds
        let g = |s: f64| {
            let x = s.exp();
            let mut v = f(&[x]);
            if self.two_sided {
                v += f(&[-x]);
            }
            v * self.c * (-self.a * s).exp()
        };
        integrate(&g, self.eps.ln(), 0.0, Tolerance::default())
    }
}

/// σ(dρ, dθ) = g(θ) dθ · 1_(ε,1)(ρ) dρ/ρ on ℝ² (polar coordinates).
#[derive(Clone)]
struct Polar {
    eps: f64,
    angular: ScalarFn,
    bound: f64,
    angular_mass: f64,
}

impl fmt::Debug for Polar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polar(eps {}, angular mass {})", self.eps, self.angular_mass)
    }
}

impl JumpLaw for Polar {
    fn dim(&self) -> usize {
        2
    }
    fn rate(&self) -> f64 {
        self.angular_mass * (1.0 / self.eps).ln()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let rho = self.eps.powf(1.0 - rng.random::<f64>());
        let theta = loop {
            let th = 2.0 * PI * rng.random::<f64>();
            if rng.random::<f64>() * self.bound <= (self.angular)(th) {
                break th;
            }
        };
        vec![rho * theta.cos(), rho * theta.sin()]
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        let ln_eps = self.eps.ln();
        integrate_fallible(
            &|th: f64| {
                let (s, c) = th.sin_cos();
                let radial = integrate(&|r: f64| f(&[r.exp() * c, r.exp() * s]), ln_eps, 0.0, Tolerance::default())?;
                Ok((self.angular)(th) * radial)
            },
            0.0,
            2.0 * PI,
        )
    }
}

/// A parametrized curve u ↦ (f(u), g(u)) with derivatives and a left inverse.
#[derive(Clone)]
pub struct CurveMap {
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub df: ScalarFn,
    pub dg: ScalarFn,
    pub inverse: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for CurveMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CurveMap")
    }
}

impl CurveMap {
    /// u ↦ (u, u²), the support of the pair (X, [X]).
    pub fn parabola() -> CurveMap {
        CurveMap {
            f: Arc::new(|u| u),
            g: Arc::new(|u| u * u),
            df: Arc::new(|_| 1.0),
            dg: Arc::new(|u| 2.0 * u),
            inverse: Arc::new(|x| x[0]),
        }
    }

    pub fn point(&self, u: f64) -> Vec<f64> {
        vec![(self.f)(u), (self.g)(u)]
    }
}

#[derive(Debug, Clone)]
struct CurveImage {
    base: Arc<dyn JumpLaw>,
    curve: CurveMap,
}

impl JumpLaw for CurveImage {
    fn dim(&self) -> usize {
        2
    }
    fn rate(&self) -> f64 {
        self.base.rate()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u = self.base.sample(rng)[0];
        self.curve.point(u)
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        self.base.integrate(&|u: &[f64]| f(&self.curve.point(u[0])))
    }
}

/// σ = Σ_{n=start}^{n_max} δ_{2^(−n)}.
#[derive(Debug, Clone)]
struct AtomicDyadic {
    start: i32,
    n_max: i32,
}

impl AtomicDyadic {
    fn points(&self) -> impl Iterator<Item = f64> {
        (self.start..=self.n_max).map(|n| 2f64.powi(-n))
    }
}

impl JumpLaw for AtomicDyadic {
    fn dim(&self) -> usize {
        1
    }
    fn rate(&self) -> f64 {
        (self.n_max - self.start + 1) as f64
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let n = rng.random_range(self.start..=self.n_max);
        vec![2f64.powi(-n)]
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        Ok(self.points().map(|x| f(&[x])).sum())
    }
    fn diffuse(&self) -> bool {
        false
    }
}

type Sampler = Arc<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;
type Integrator = Arc<dyn Fn(&dyn Fn(&[f64]) -> f64) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
struct Custom {
    dim: usize,
    rate: f64,
    sampler: Sampler,
    integrator: Integrator,
    diffuse: bool,
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Custom(dim {}, rate {})", self.dim, self.rate)
    }
}

impl JumpLaw for Custom {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rate(&self) -> f64 {
        self.rate
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (self.sampler)(rng)
    }
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        (self.integrator)(f)
    }
    fn diffuse(&self) -> bool {
        self.diffuse
    }
}

/// Family tag of an intensity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    CompoundPoisson,
    PowerTruncated,
    Polar,
    CurveImage,
    AtomicDyadic,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::CompoundPoisson => "compound-poisson",
            Family::PowerTruncated => "power-truncated",
            Family::Polar => "polar",
            Family::CurveImage => "curve-image",
            Family::AtomicDyadic => "atomic-dyadic",
            Family::Custom => "custom",
        })
    }
}

/// The truncated intensity ν = dt × σ_ε on [0, T] × ℝ^d.
#[derive(Debug, Clone)]
pub struct IntensityModel {
    horizon: f64,
    family: Family,
    epsilon: f64,
    label: String,
    law: Arc<dyn JumpLaw>,
    mean: Vec<f64>,
}

impl IntensityModel {
    fn build(horizon: f64, family: Family, epsilon: f64, law: Arc<dyn JumpLaw>) -> Result<IntensityModel> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
        }
        let rate = law.rate();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!("rate must be positive and finite, got {rate}")));
        }
        let mean = (0..law.dim())
            .map(|k| law.integrate(&|x: &[f64]| x[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntensityModel { horizon, family, epsilon, label: family.to_string(), law, mean })
    }

    /// Compound Poisson with independent marginals, one per mark coordinate.
    pub fn compound_poisson(horizon: f64, rate: f64, marginals: Vec<MarkLaw1>) -> Result<IntensityModel> {
        if marginals.is_empty() {
            return Err(Error::InvalidModel("at least one marginal is required".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        IntensityModel::build(horizon, Family::CompoundPoisson, 0.0, Arc::new(CompoundPoisson { rate, marginals }))
    }

    /// Compound Poisson with uniform marks on `[lo, hi]^d`.
    pub fn uniform(horizon: f64, rate: f64, lo: f64, hi: f64, dim: usize) -> Result<IntensityModel> {
        IntensityModel::compound_poisson(horizon, rate, vec![MarkLaw1::Uniform { lo, hi }; dim])
    }

    /// Compound Poisson whose jump measure has the given density on `[lo, hi]` (d = 1).
    pub fn from_density(
        horizon: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        bound: f64,
    ) -> Result<IntensityModel> {
        let law = MarkLaw1::density(density, lo, hi, bound)?;
        let mass = match &law {
            MarkLaw1::Density { mass, .. } => *mass,
            _ => unreachable!(),
        };
        IntensityModel::compound_poisson(horizon, mass, vec![law])
    }

    /// One-sided power density c·x^(−1−a) on (ε, 1).
    pub fn power(horizon: f64, c: f64, a: f64, eps: f64) -> Result<IntensityModel> {
        Self::power_impl(horizon, c, a, eps, false)
    }

    /// Two-sided variant: c·|x|^(−1−a) on (−1, −ε) ∪ (ε, 1); zero compensator mean.
    pub fn symmetric_power(horizon: f64, c: f64, a: f64, eps: f64) -> Result<IntensityModel> {
        Self::power_impl(horizon, c, a, eps, true)
    }

    fn power_impl(horizon: f64, c: f64, a: f64, eps: f64, two_sided: bool) -> Result<IntensityModel> {
        if !(c > 0.0 && eps > 0.0 && eps < 1.0 && a.is_finite()) {
            return Err(Error::InvalidModel(format!("power family needs c > 0, 0 < eps < 1 (c={c}, eps={eps})")));
        }
        IntensityModel::build(horizon, Family::PowerTruncated, eps, Arc::new(PowerTruncated { c, a, eps, two_sided }))
    }

    /// Polar model g(θ)dθ·1_(ε,1)(ρ)dρ/ρ in d = 2 with a constant angular density.
    pub fn polar(horizon: f64, angular_density: f64, eps: f64) -> Result<IntensityModel> {
        IntensityModel::polar_with(horizon, move |_| angular_density, angular_density, eps)
    }

    /// Polar model with angular density `g` on [0, 2π) bounded by `bound`.
    pub fn polar_with(
        horizon: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound: f64,
        eps: f64,
    ) -> Result<IntensityModel> {
        if !(eps > 0.0 && eps < 1.0 && bound > 0.0) {
            return Err(Error::InvalidModel("polar family needs 0 < eps < 1 and bound > 0".into()));
        }
        let angular_mass = integrate(&|t| g(t), 0.0, 2.0 * PI, Tolerance::default())?;
        IntensityModel::build(
            horizon,
            Family::Polar,
            eps,
            Arc::new(Polar { eps, angular: Arc::new(g), bound, angular_mass }),
        )
    }

    /// Image of a one-dimensional model under the curve `curve`.
    pub fn curve_image(base: &IntensityModel, curve: CurveMap) -> Result<IntensityModel> {
        if base.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: base.dim() });
        }
        IntensityModel::build(
            base.horizon,
            Family::CurveImage,
            base.epsilon,
            Arc::new(CurveImage { base: base.law.clone(), curve }),
        )
    }

    /// Σ_{n=start}^{n_max} δ_{2^(−n)}; not diffuse.
    pub fn atomic_dyadic(horizon: f64, start: i32, n_max: i32) -> Result<IntensityModel> {
        if n_max < start {
            return Err(Error::InvalidModel("dyadic family needs n_max >= start".into()));
        }
        IntensityModel::build(horizon, Family::AtomicDyadic, 0.0, Arc::new(AtomicDyadic { start, n_max }))
    }

    /// A user-supplied law: sampler from σ/λ and integrator f ↦ ∫f dσ.
    pub fn custom(
        horizon: f64,
        dim: usize,
        rate: f64,
        sampler: impl Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
        integrator: impl Fn(&dyn Fn(&[f64]) -> f64) -> Result<f64> + Send + Sync + 'static,
        diffuse: bool,
    ) -> Result<IntensityModel> {
        IntensityModel::build(
            horizon,
            Family::Custom,
            0.0,
            Arc::new(Custom { dim, rate, sampler: Arc::new(sampler), integrator: Arc::new(integrator), diffuse }),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> IntensityModel {
        self.label = label.into();
        self
    }

    /// Same jump law on a different window.
    pub fn with_horizon(&self, horizon: f64) -> Result<IntensityModel> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
        }
        Ok(IntensityModel { horizon, ..self.clone() })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dim(&self) -> usize {
        self.law.dim()
    }
    pub fn family(&self) -> Family {
        self.family
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    /// λ = σ_ε(ℝ^d ∖ {0}).
    pub fn rate(&self) -> f64 {
        self.law.rate()
    }
    /// Compensator vector μ_ε = ∫ x dσ_ε.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn is_diffuse(&self) -> bool {
        self.law.diffuse()
    }

    pub fn sample_mark(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.law.sample(rng)
    }

    /// ∫ f dσ_ε by deterministic quadrature.
    pub fn sigma_integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        self.law.integrate(f)
    }

    /// ∫ f dν = T·∫ f dσ_ε for a time-homogeneous integrand.
    pub fn nu_integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        Ok(self.horizon * self.sigma_integrate(f)?)
    }

    /// ∫∫ f(t, x) dt σ_ε(dx) over [0, T] by product quadrature.
    pub fn nu_integrate_general(&self, f: &dyn Fn(f64, &[f64]) -> f64) -> Result<f64> {
        integrate_fallible(&|t| self.sigma_integrate(&|x: &[f64]| f(t, x)), 0.0, self.horizon)
    }

    /// Draws a configuration: Poisson(λT) atoms, uniform times, marks from σ_ε/λ.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Configuration> {
        let mean_count = self.rate() * self.horizon;
        let count = Poisson::new(mean_count)
            .map_err(|e| Error::InvalidModel(format!("Poisson({mean_count}): {e}")))?
            .sample(rng) as usize;
        let mut times: Vec<f64> = (0..count).map(|_| self.horizon * rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        while let Some(i) = times.windows(2).position(|w| w[0] == w[1]) {
            times[i + 1] = self.horizon * rng.random::<f64>();
            times.sort_by(f64::total_cmp);
        }
        let atoms = times
            .into_iter()
            .map(|t| Atom::new(t, self.sample_mark(rng)))
            .collect::<Result<Vec<_>>>()?;
        Configuration::new(self.horizon, self.dim(), atoms, self.label.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::mean_se;

    fn probes(d: usize) -> Vec<(&'static str, Box<dyn Fn(&[f64]) -> f64>)> {
        let _ = d;
        vec![
            ("one", Box::new(|_x: &[f64]| 1.0)),
            ("x1", Box::new(|x: &[f64]| x[0])),
            ("norm2", Box::new(|x: &[f64]| x.iter().map(|v| v * v).sum())),
            ("cos x1", Box::new(|x: &[f64]| x[0].cos())),
        ]
    }

    fn check_sampler_against_quadrature(model: &IntensityModel, draws: usize) {
        let mut rng = stream(2024, 0);
        let marks: Vec<Vec<f64>> = (0..draws).map(|_| model.sample_mark(&mut rng)).collect();
        for (name, f) in probes(model.dim()) {
            let values: Vec<f64> = marks.iter().map(|x| f(x)).collect();
            let mc = mean_se(&values);
            let exact = model.sigma_integrate(&*f).unwrap() / model.rate();
            let tol = 5.0 * mc.se.max(1e-15);
            assert!(
                (mc.mean - exact).abs() <= tol,
                "{} probe {name}: MC {} vs quadrature {exact} (5 SE = {tol})",
                model.family(),
                mc.mean
            );
        }
    }

    fn all_families() -> Vec<IntensityModel> {
        vec![
            IntensityModel::uniform(1.0, 3.0, -0.5, 0.8, 1).unwrap(),
            IntensityModel::compound_poisson(
                1.0,
                2.0,
                vec![MarkLaw1::Normal { mean: 0.1, sd: 0.4 }, MarkLaw1::Uniform { lo: -1.0, hi: 1.0 }],
            )
            .unwrap(),
            IntensityModel::from_density(1.0, |x| 1.0 + x, 0.0, 1.0, 2.0).unwrap(),
            IntensityModel::power(1.0, 1.0, 0.5, 0.01).unwrap(),
            IntensityModel::symmetric_power(1.0, 0.7, 1.2, 0.05).unwrap(),
            IntensityModel::power(1.0, 1.0, 0.0, 0.1).unwrap(),
            IntensityModel::polar(1.0, 1.0, 0.05).unwrap(),
            IntensityModel::polar_with(1.0, |t: f64| 1.0 + 0.5 * t.cos(), 1.5, 0.1).unwrap(),
            IntensityModel::curve_image(&IntensityModel::power(1.0, 1.0, 0.5, 0.05).unwrap(), CurveMap::parabola())
                .unwrap(),
            IntensityModel::atomic_dyadic(1.0, 0, 30).unwrap(),
        ]
    }

    #[test]
    fn samplers_match_quadrature_within_five_se() {
        for model in all_families() {
            check_sampler_against_quadrature(&model, 1_000_000);
        }
    }

    #[test]
    fn mean_matches_coordinate_quadrature() {
        for model in all_families() {
            for k in 0..model.dim() {
                let q = model.sigma_integrate(&|x: &[f64]| x[k]).unwrap();
                assert!((model.mean()[k] - q).abs() <= 1e-10 * q.abs().max(1e-300) || model.mean()[k] == q);
            }
        }
    }

    #[test]
    fn closed_form_rates() {
        let m = IntensityModel::power(1.0, 2.0, 0.5, 0.04).unwrap();
        assert!((m.rate() - 2.0 * (5.0 - 1.0) / 0.5).abs() < 1e-12);
        let q = m.sigma_integrate(&|_| 1.0).unwrap();
        assert!((q - m.rate()).abs() < 1e-9);
        let s = IntensityModel::symmetric_power(1.0, 1.0, 0.5, 0.01).unwrap();
        assert_eq!(s.mean()[0], 0.0);
        let p = IntensityModel::polar(1.0, 1.0, 0.1).unwrap();
        assert!((p.rate() - 2.0 * PI * 10f64.ln()).abs() < 1e-9);
        let dy = IntensityModel::atomic_dyadic(1.0, 0, 30).unwrap();
        assert_eq!(dy.rate(), 31.0);
        assert!(!dy.is_diffuse());
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(IntensityModel::uniform(0.0, 1.0, 0.0, 1.0, 1).is_err());
        assert!(IntensityModel::uniform(1.0, 0.0, 0.0, 1.0, 1).is_err());
        assert!(IntensityModel::power(1.0, 1.0, 0.5, 1.5).is_err());
        assert!(IntensityModel::atomic_dyadic(1.0, 3, 2).is_err());
    }

    #[test]
    fn general_compensator_uses_time_quadrature() {
        let m = IntensityModel::uniform(2.0, 3.0, 0.0, 1.0, 1).unwrap();
        // ∫_0^2 ∫ t x · 3 dx dt = 3 · 2 · 1/2 = 3
        let v = m.nu_integrate_general(&|t, x| t * x[0]).unwrap();
        assert!((v - 3.0).abs() < 1e-10);
    }
}
