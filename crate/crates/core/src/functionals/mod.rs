//! Functionals of a configuration together with their added-particle derivative
//! `x ↦ ∂/∂x F(ε⁺_(t,x) ω)`, the quantity the lent-particle engine consumes.

mod path;
mod sde;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::configuration::{Atom, Configuration};
use crate::error::{Error, Result};

pub use path::{
    area, doleans, generalized_ou, nearest_point, pair_doleans, path_eval, running_sup, time_integral, Area,
    Doleans, GeneralizedOu, NearestPoint, PairDoleans, PathEval, RunningSup, ScalarMap, StepFunction,
    TimeIntegral,
};
pub use sde::{jump_sde, JumpSde, SdeCoefficients, SdeJacobians};

/// A vector functional F: Configuration → ℝ^m of marks in ℝ^d.
pub trait Functional: Send + Sync {
    fn out_dim(&self) -> usize;
    fn mark_dim(&self) -> usize;
    fn label(&self) -> &str;
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>>;

    /// m×d matrix of ∂/∂x F(ε⁺_(t,x) cfg).
    fn add_derivative(&self, cfg: &Configuration, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        fd_add_derivative(self, cfg, t, x)
    }

    fn has_closed_derivative(&self) -> bool {
        false
    }
}

impl fmt::Debug for dyn Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Functional({}, m={}, d={})", self.label(), self.out_dim(), self.mark_dim())
    }
}

/// Central-difference step for a mark coordinate.
pub fn fd_step(x: f64) -> f64 {
    (1e-7 * x.abs()).max(1e-5)
}

/// Central finite differences of `F(ε⁺_(t,x) cfg)` in each mark coordinate.
pub fn fd_add_derivative<F: Functional + ?Sized>(
    f: &F,
    cfg: &Configuration,
    t: f64,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    check_mark(f.mark_dim(), x)?;
    let m = f.out_dim();
    let mut out = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let h = fd_step(x[k]);
        let eval = |delta: f64| -> Result<Vec<f64>> {
            let mut y = x.to_vec();
            y[k] += delta;
            f.value(&cfg.add_particle(&Atom::new(t, y)?)?)
        };
        let plus = eval(h)?;
        let minus = eval(-h)?;
        for i in 0..m {
            out[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

pub(crate) fn check_mark(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() == dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: dim, got: x.len() })
    }
}

pub(crate) fn check_cfg(dim: usize, cfg: &Configuration) -> Result<()> {
    if cfg.dim() == dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: dim, got: cfg.dim() })
    }
}

pub(crate) fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t > 0.0 && t <= horizon {
        Ok(())
    } else {
        Err(Error::TimeOutsideWindow { time: t, horizon })
    }
}

type ValueFn = dyn Fn(&Configuration) -> Result<Vec<f64>> + Send + Sync;
type DerivFn = dyn Fn(&Configuration, f64, &[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A functional assembled from closures; the derivative falls back to finite differences.
#[derive(Clone)]
pub struct FnFunctional {
    label: String,
    out_dim: usize,
    mark_dim: usize,
    value: Arc<ValueFn>,
    derivative: Option<Arc<DerivFn>>,
}

impl FnFunctional {
    pub fn new(
        label: impl Into<String>,
        out_dim: usize,
        mark_dim: usize,
        value: impl Fn(&Configuration) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> FnFunctional {
        FnFunctional { label: label.into(), out_dim, mark_dim, value: Arc::new(value), derivative: None }
    }

    pub fn with_derivative(
        mut self,
        d: impl Fn(&Configuration, f64, &[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> FnFunctional {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// The constant functional `c`.
    pub fn constant(c: Vec<f64>, mark_dim: usize) -> FnFunctional {
        let m = c.len();
        FnFunctional::new("constant", m, mark_dim, move |_| Ok(c.clone()))
            .with_derivative(move |_, _, x| Ok(DMatrix::zeros(m, x.len())))
    }
}

impl Functional for FnFunctional {
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn mark_dim(&self) -> usize {
        self.mark_dim
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        (self.value)(cfg)
    }
    fn add_derivative(&self, cfg: &Configuration, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        match &self.derivative {
            Some(d) => {
                check_mark(self.mark_dim, x)?;
                d(cfg, t, x)
            }
            None => fd_add_derivative(self, cfg, t, x),
        }
    }
    fn has_closed_derivative(&self) -> bool {
        self.derivative.is_some()
    }
}

/// Several functionals of the same marks stacked into one vector.
#[derive(Clone)]
pub struct Stack {
    label: String,
    parts: Vec<Arc<dyn Functional>>,
}

impl Stack {
    pub fn new(parts: Vec<Arc<dyn Functional>>) -> Result<Stack> {
        let d = parts.first().map(|p| p.mark_dim()).ok_or_else(|| Error::InvalidArgument("empty stack".into()))?;
        if let Some(p) = parts.iter().find(|p| p.mark_dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.mark_dim() });
        }
        let label = parts.iter().map(|p| p.label()).collect::<Vec<_>>().join("+");
        Ok(Stack { label, parts })
    }
}

impl Functional for Stack {
    fn out_dim(&self) -> usize {
        self.parts.iter().map(|p| p.out_dim()).sum()
    }
    fn mark_dim(&self) -> usize {
        self.parts[0].mark_dim()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.out_dim());
        for p in &self.parts {
            out.extend(p.value(cfg)?);
        }
        Ok(out)
    }
    fn add_derivative(&self, cfg: &Configuration, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let blocks = self.parts.iter().map(|p| p.add_derivative(cfg, t, x)).collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(self.out_dim(), x.len());
        let mut row = 0;
        for b in blocks {
            out.view_mut((row, 0), (b.nrows(), b.ncols())).copy_from(&b);
            row += b.nrows();
        }
        Ok(out)
    }
    fn has_closed_derivative(&self) -> bool {
        self.parts.iter().all(|p| p.has_closed_derivative())
    }
}

type PhiFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Φ ∘ F for a C¹ map Φ: ℝⁿ → ℝ with known gradient.
#[derive(Clone)]
pub struct Composite {
    label: String,
    inner: Arc<dyn Functional>,
    phi: Arc<PhiFn>,
    grad: Arc<GradFn>,
}

impl Composite {
    pub fn new(
        label: impl Into<String>,
        inner: Arc<dyn Functional>,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Composite {
        Composite { label: label.into(), inner, phi: Arc::new(phi), grad: Arc::new(grad) }
    }

    pub fn phi(&self, v: &[f64]) -> f64 {
        (self.phi)(v)
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        (self.grad)(v)
    }

    pub fn inner(&self) -> &Arc<dyn Functional> {
        &self.inner
    }
}

impl Functional for Composite {
    fn out_dim(&self) -> usize {
        1
    }
    fn mark_dim(&self) -> usize {
        self.inner.mark_dim()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        Ok(vec![(self.phi)(&self.inner.value(cfg)?)])
    }
    fn add_derivative(&self, cfg: &Configuration, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(self.mark_dim(), x)?;
        let lifted = self.inner.value(&cfg.add_particle(&Atom::new(t, x.to_vec())?)?)?;
        let g = DMatrix::from_row_slice(1, lifted.len(), &(self.grad)(&lifted));
        Ok(g * self.inner.add_derivative(cfg, t, x)?)
    }
    fn has_closed_derivative(&self) -> bool {
        self.inner.has_closed_derivative()
    }
}
