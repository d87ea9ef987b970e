//! Functionals of the compensated Lévy path Y_t = Σ_{t_i ≤ t} x_i − t·μ_ε.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_cfg, check_mark, check_time, Functional};
use crate::configuration::{Atom, Configuration, IntensityModel};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre8;

/// Coordinate `k` of the compensated path at `s` (`left` gives the left limit).
fn comp(atoms: &[Atom], mean: &[f64], k: usize, s: f64, left: bool) -> f64 {
    let jumps: f64 = atoms
        .iter()
        .take_while(|a| if left { a.time < s } else { a.time <= s })
        .map(|a| a.mark[k])
        .sum();
    jumps - s * mean[k]
}

fn require_dim(model: &IntensityModel, d: usize) -> Result<()> {
    if model.dim() == d {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: d, got: model.dim() })
    }
}

/// Y_t.
#[derive(Debug, Clone)]
pub struct PathEval {
    t: f64,
    mean: Vec<f64>,
}

pub fn path_eval(model: &IntensityModel, t: f64) -> Result<PathEval> {
    check_time(t, model.horizon())?;
    Ok(PathEval { t, mean: model.mean().to_vec() })
}

impl Functional for PathEval {
    fn out_dim(&self) -> usize {
        self.mean.len()
    }
    fn mark_dim(&self) -> usize {
        self.mean.len()
    }
    fn label(&self) -> &str {
        "path_eval"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(self.mark_dim(), cfg)?;
        Ok((0..self.mean.len()).map(|k| comp(cfg.atoms(), &self.mean, k, self.t, false)).collect())
    }
    fn add_derivative(&self, _cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(self.mark_dim(), x)?;
        let d = self.mean.len();
        Ok(if alpha <= self.t { DMatrix::identity(d, d) } else { DMatrix::zeros(d, d) })
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// Doléans exponential Exp(Y)_t = e^{Y_t} Π_{s≤t}(1+ΔY_s)e^{−ΔY_s} (d = 1).
#[derive(Debug, Clone)]
pub struct Doleans {
    t: f64,
    mean: f64,
}

pub fn doleans(model: &IntensityModel, t: f64) -> Result<Doleans> {
    require_dim(model, 1)?;
    check_time(t, model.horizon())?;
    Ok(Doleans { t, mean: model.mean()[0] })
}

impl Doleans {
    fn eval(&self, cfg: &Configuration) -> Result<f64> {
        check_cfg(1, cfg)?;
        if let Some(a) = cfg.atoms().iter().find(|a| a.mark[0] <= -1.0) {
            return Err(Error::Domain(format!("jump {} at time {} is not above -1", a.mark[0], a.time)));
        }
        let product: f64 = cfg.atoms().iter().take_while(|a| a.time <= self.t).map(|a| 1.0 + a.mark[0]).product();
        Ok((-self.t * self.mean).exp() * product)
    }
}

impl Functional for Doleans {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        1
    }
    fn label(&self) -> &str {
        "doleans"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        Ok(vec![self.eval(cfg)?])
    }
    /// ε⁺ multiplies the value by (1 + y), so the y-derivative is the value itself.
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(1, x)?;
        let v = if alpha <= self.t { self.eval(cfg)? } else { 0.0 };
        Ok(DMatrix::from_element(1, 1, v))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// The pair (Y_t, Exp(Y)_t).
#[derive(Debug, Clone)]
pub struct PairDoleans {
    path: PathEval,
    exp: Doleans,
}

pub fn pair_doleans(model: &IntensityModel, t: f64) -> Result<PairDoleans> {
    Ok(PairDoleans { exp: doleans(model, t)?, path: path_eval(model, t)? })
}

impl Functional for PairDoleans {
    fn out_dim(&self) -> usize {
        2
    }
    fn mark_dim(&self) -> usize {
        1
    }
    fn label(&self) -> &str {
        "pair_doleans"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        Ok(vec![self.path.value(cfg)?[0], self.exp.eval(cfg)?])
    }
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let a = self.path.add_derivative(cfg, alpha, x)?;
        let b = self.exp.add_derivative(cfg, alpha, x)?;
        Ok(DMatrix::from_column_slice(2, 1, &[a[(0, 0)], b[(0, 0)]]))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// (X₁(t), X₂(t), ∫₀ᵗ X₁(s−)dX₂ − ∫₀ᵗ X₂(s−)dX₁) for a planar compensated path.
#[derive(Debug, Clone)]
pub struct Area {
    t: f64,
    mean: [f64; 2],
}

pub fn area(model: &IntensityModel, t: f64) -> Result<Area> {
    require_dim(model, 2)?;
    check_time(t, model.horizon())?;
    Ok(Area { t, mean: [model.mean()[0], model.mean()[1]] })
}

impl Functional for Area {
    fn out_dim(&self) -> usize {
        3
    }
    fn mark_dim(&self) -> usize {
        2
    }
    fn label(&self) -> &str {
        "area"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(2, cfg)?;
        let [m1, m2] = self.mean;
        let (mut s1, mut s2, mut jumps, mut drift) = (0.0, 0.0, 0.0, 0.0);
        for a in cfg.atoms().iter().take_while(|a| a.time <= self.t) {
            let (x1, x2) = (a.mark[0], a.mark[1]);
            let (left1, left2) = (s1 - a.time * m1, s2 - a.time * m2);
            jumps += left1 * x2 - left2 * x1;
            let rest = self.t - a.time;
            drift += m1 * x2 * rest - m2 * x1 * rest;
            s1 += x1;
            s2 += x2;
        }
        Ok(vec![s1 - self.t * m1, s2 - self.t * m2, jumps + drift])
    }
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(2, x)?;
        if alpha > self.t {
            return Ok(DMatrix::zeros(3, 2));
        }
        let at = |k, s, left| comp(cfg.atoms(), &self.mean, k, s, left);
        let (x1t, x2t) = (at(0, self.t, false), at(1, self.t, false));
        let (x1a, x2a) = (at(0, alpha, true), at(1, alpha, true));
        Ok(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, x2t - 2.0 * x2a, -(x1t - 2.0 * x1a)]))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// A C¹ scalar function with its derivative.
#[derive(Clone)]
pub struct ScalarMap {
    pub label: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarMap({})", self.label)
    }
}

impl ScalarMap {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> ScalarMap {
        ScalarMap { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }
    pub fn identity() -> ScalarMap {
        ScalarMap::new("id", |x| x, |_| 1.0)
    }
    pub fn square() -> ScalarMap {
        ScalarMap::new("square", |x| x * x, |x| 2.0 * x)
    }
    pub fn sine() -> ScalarMap {
        ScalarMap::new("sin", f64::sin, f64::cos)
    }
    pub fn by_name(name: &str) -> Option<ScalarMap> {
        match name {
            "id" => Some(ScalarMap::identity()),
            "square" => Some(ScalarMap::square()),
            "sin" => Some(ScalarMap::sine()),
            _ => None,
        }
    }
}

/// H = ∫₀ᵗ g(Y_s) ds (d = 1), 8-point Gauss–Legendre on each inter-jump segment.
#[derive(Debug, Clone)]
pub struct TimeIntegral {
    t: f64,
    mean: f64,
    g: ScalarMap,
}

pub fn time_integral(model: &IntensityModel, g: ScalarMap, t: f64) -> Result<TimeIntegral> {
    require_dim(model, 1)?;
    check_time(t, model.horizon())?;
    Ok(TimeIntegral { t, mean: model.mean()[0], g })
}

impl TimeIntegral {
    /// ∫_from^to h(Y_s + shift) ds along the step-plus-drift path.
    fn along(&self, atoms: &[Atom], from: f64, shift: f64, h: &dyn Fn(f64) -> f64) -> f64 {
        let mut level: f64 = atoms.iter().take_while(|a| a.time <= from).map(|a| a.mark[0]).sum();
        let mut start = from;
        let mut total = 0.0;
        for a in atoms.iter().skip_while(|a| a.time <= from).take_while(|a| a.time < self.t) {
            total += gauss_legendre8(|s| h(level - self.mean * s + shift), start, a.time);
            level += a.mark[0];
            start = a.time;
        }
        total + gauss_legendre8(|s| h(level - self.mean * s + shift), start, self.t)
    }
}

impl Functional for TimeIntegral {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        1
    }
    fn label(&self) -> &str {
        "time_integral"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(1, cfg)?;
        Ok(vec![self.along(cfg.atoms(), 0.0, 0.0, &*self.g.f)])
    }
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(1, x)?;
        let v = if alpha < self.t { self.along(cfg.atoms(), alpha, x[0], &*self.g.df) } else { 0.0 };
        Ok(DMatrix::from_element(1, 1, v))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// Generalized Ornstein–Uhlenbeck X_t = e^{ξ_t}(x₀ + ∫₀ᵗ e^{−ξ_{s−}} dη_s), marks (Δξ, Δη).
#[derive(Debug, Clone)]
pub struct GeneralizedOu {
    x0: f64,
    t: f64,
    mean: [f64; 2],
}

pub fn generalized_ou(model: &IntensityModel, x0: f64, t: f64) -> Result<GeneralizedOu> {
    require_dim(model, 2)?;
    check_time(t, model.horizon())?;
    Ok(GeneralizedOu { x0, t, mean: [model.mean()[0], model.mean()[1]] })
}

/// (e^z − 1)/z with the removable singularity filled in.
fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

impl GeneralizedOu {
    /// Returns (∫ e^{−ξ_{s−}} dη over [0, upto) or [0, upto], ξ jump sum over the same set).
    fn integral(&self, atoms: &[Atom], upto: f64, inclusive: bool) -> (f64, f64) {
        let [m1, m2] = self.mean;
        let (mut jump_xi, mut acc, mut prev) = (0.0, 0.0, 0.0);
        let segment = |jump_xi: f64, a: f64, b: f64| {
            let len = b - a;
            // ∫_a^b e^{−(J − m1 s)} ds
            (-(jump_xi - m1 * a)).exp() * len * exprel(m1 * len)
        };
        for a in atoms.iter().take_while(|a| if inclusive { a.time <= upto } else { a.time < upto }) {
            acc -= m2 * segment(jump_xi, prev, a.time);
            acc += (-(jump_xi - m1 * a.time)).exp() * a.mark[1];
            jump_xi += a.mark[0];
            prev = a.time;
        }
        acc -= m2 * segment(jump_xi, prev, upto);
        (acc, jump_xi)
    }
}

impl Functional for GeneralizedOu {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        2
    }
    fn label(&self) -> &str {
        "gou"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(2, cfg)?;
        let (acc, jump_xi) = self.integral(cfg.atoms(), self.t, true);
        Ok(vec![(jump_xi - self.mean[0] * self.t).exp() * (self.x0 + acc)])
    }
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(2, x)?;
        if alpha > self.t {
            return Ok(DMatrix::zeros(1, 2));
        }
        let xi_t = comp(cfg.atoms(), &self.mean, 0, self.t, false);
        let (before, jump_before) = self.integral(cfg.atoms(), alpha, false);
        let discount = (-(jump_before - self.mean[0] * alpha)).exp();
        let scale = (xi_t + x[0]).exp();
        Ok(DMatrix::from_row_slice(1, 2, &[scale * (self.x0 + before + discount * x[1]), scale * discount]))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// Right-continuous piecewise constant function: `values[j]` on `[breaks[j-1], breaks[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn zero() -> StepFunction {
        StepFunction { breaks: Vec::new(), values: vec![0.0] }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<StepFunction> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::InvalidArgument("a step function needs one more value than breakpoints".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("breakpoints must increase strictly".into()));
        }
        Ok(StepFunction { breaks, values })
    }

    pub fn at(&self, s: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b <= s)]
    }

    pub fn left(&self, s: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b < s)]
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

/// sup_{s ≤ t} (Y_s + K_s) for a step function K (d = 1).
#[derive(Debug, Clone)]
pub struct RunningSup {
    t: f64,
    mean: f64,
    k: StepFunction,
}

pub fn running_sup(model: &IntensityModel, t: f64, k: StepFunction) -> Result<RunningSup> {
    require_dim(model, 1)?;
    check_time(t, model.horizon())?;
    Ok(RunningSup { t, mean: model.mean()[0], k })
}

impl RunningSup {
    /// Sup of H over [0, α) and over [α, t]; H is linear between consecutive events.
    fn split_sup(&self, atoms: &[Atom], alpha: f64) -> (f64, f64) {
        let mean = [self.mean];
        let right = |s: f64| comp(atoms, &mean, 0, s, false) + self.k.at(s);
        let left = |s: f64| comp(atoms, &mean, 0, s, true) + self.k.left(s);
        let mut events: Vec<f64> = vec![0.0, self.t];
        events.extend(atoms.iter().map(|a| a.time).filter(|&s| s > 0.0 && s < self.t));
        events.extend(self.k.breaks().iter().copied().filter(|&s| s > 0.0 && s < self.t));
        if alpha > 0.0 && alpha < self.t {
            events.push(alpha);
        }
        events.sort_by(f64::total_cmp);
        events.dedup();
        let (mut pre, mut post) = (f64::NEG_INFINITY, right(self.t));
        for w in events.windows(2) {
            let piece = right(w[0]).max(left(w[1]));
            if w[1] <= alpha {
                pre = pre.max(piece);
            } else if w[0] >= alpha {
                post = post.max(piece);
            }
        }
        (pre, post)
    }
}

impl Functional for RunningSup {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        1
    }
    fn label(&self) -> &str {
        "sup"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(1, cfg)?;
        let (_, all) = self.split_sup(cfg.atoms(), 0.0);
        Ok(vec![all])
    }
    /// 1 when the maximum after the lent jump wins (ties resolve to 1).
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(1, x)?;
        if alpha > self.t {
            return Ok(DMatrix::zeros(1, 1));
        }
        let (pre, post) = self.split_sup(cfg.atoms(), alpha);
        Ok(DMatrix::from_element(1, 1, if post + x[0] >= pre { 1.0 } else { 0.0 }))
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}

/// Distance from the origin to the nearest mark; +∞ on the empty configuration.
#[derive(Debug, Clone)]
pub struct NearestPoint {
    dim: usize,
}

pub fn nearest_point(model: &IntensityModel) -> NearestPoint {
    NearestPoint { dim: model.dim() }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl NearestPoint {
    fn nearest(cfg: &Configuration) -> f64 {
        cfg.atoms().iter().map(|a| norm(&a.mark)).fold(f64::INFINITY, f64::min)
    }
}

impl Functional for NearestPoint {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        self.dim
    }
    fn label(&self) -> &str {
        "nearest"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(self.dim, cfg)?;
        Ok(vec![NearestPoint::nearest(cfg)])
    }
    fn add_derivative(&self, cfg: &Configuration, _alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(self.dim, x)?;
        let r = norm(x);
        if r <= NearestPoint::nearest(cfg) {
            Ok(DMatrix::from_row_slice(1, self.dim, &x.iter().map(|v| v / r).collect::<Vec<_>>()))
        } else {
            Ok(DMatrix::zeros(1, self.dim))
        }
    }
    fn has_closed_derivative(&self) -> bool {
        true
    }
}
