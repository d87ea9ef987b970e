//! Pure-jump SDEs X_t = x₀ + ∫₀ᵗ∫ c(s, X_{s−}, u) Ñ(ds, du), Euler between jumps.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_cfg, check_mark, check_time, fd_add_derivative, Functional};
use crate::configuration::{Atom, Configuration, IntensityModel};
use crate::error::{Error, Result};

type CoefFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type DriftFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
type JumpJacobian = Arc<dyn Fn(f64, &[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;
type DriftJacobian = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Jacobians of the jump coefficient and of the compensator drift.
#[derive(Clone)]
pub struct SdeJacobians {
    /// ∂c/∂state (state × state).
    pub c_state: JumpJacobian,
    /// ∂c/∂mark (state × mark).
    pub c_mark: JumpJacobian,
    /// ∂b/∂state for b(s, X) = ∫ c(s, X, u) σ_ε(du).
    pub drift_state: DriftJacobian,
}

/// Jump coefficient c(s, X, u), optionally with a closed compensator drift and Jacobians.
#[derive(Clone)]
pub struct SdeCoefficients {
    pub label: String,
    pub state_dim: usize,
    pub mark_dim: usize,
    pub c: CoefFn,
    pub drift: Option<DriftFn>,
    pub jacobians: Option<SdeJacobians>,
}

impl fmt::Debug for SdeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SdeCoefficients({}, state {}, mark {})", self.label, self.state_dim, self.mark_dim)
    }
}

impl SdeCoefficients {
    pub fn new(
        label: impl Into<String>,
        state_dim: usize,
        mark_dim: usize,
        c: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> SdeCoefficients {
        SdeCoefficients { label: label.into(), state_dim, mark_dim, c: Arc::new(c), drift: None, jacobians: None }
    }

    /// Supplies b(s, X) = ∫ c(s, X, u) σ_ε(du) in closed form instead of by quadrature.
    pub fn with_drift(mut self, b: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> SdeCoefficients {
        self.drift = Some(Arc::new(b));
        self
    }

    pub fn with_jacobians(mut self, j: SdeJacobians) -> SdeCoefficients {
        self.jacobians = Some(j);
        self
    }

    /// c(s, X, u) = u: the solution is x₀ + Y_t.
    pub fn additive(model: &IntensityModel) -> SdeCoefficients {
        let d = model.dim();
        let mu = model.mean().to_vec();
        SdeCoefficients::new("additive", d, d, |_, _, u| u.to_vec())
            .with_drift(move |_, _| mu.clone())
            .with_jacobians(SdeJacobians {
                c_state: Arc::new(move |_, _, _| DMatrix::zeros(d, d)),
                c_mark: Arc::new(move |_, _, _| DMatrix::identity(d, d)),
                drift_state: Arc::new(move |_, _| DMatrix::zeros(d, d)),
            })
    }

    /// c(s, Z, u) = (u₁, 2Z₁u₁ + u₂, Z₁u₁ + 2u₂): the triangular system driven by a planar Lévy process.
    pub fn example9(model: &IntensityModel) -> Result<SdeCoefficients> {
        if model.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: model.dim() });
        }
        let [m1, m2] = [model.mean()[0], model.mean()[1]];
        Ok(SdeCoefficients::new("example9", 3, 2, |_, z, u| {
            vec![u[0], 2.0 * z[0] * u[0] + u[1], z[0] * u[0] + 2.0 * u[1]]
        })
        .with_drift(move |_, z| vec![m1, 2.0 * z[0] * m1 + m2, z[0] * m1 + 2.0 * m2])
        .with_jacobians(SdeJacobians {
            c_state: Arc::new(|_, _, u| {
                DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 2.0 * u[0], 0.0, 0.0, u[0], 0.0, 0.0])
            }),
            c_mark: Arc::new(|_, z, _| DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0 * z[0], 1.0, z[0], 2.0])),
            drift_state: Arc::new(move |_, _| {
                DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 2.0 * m1, 0.0, 0.0, m1, 0.0, 0.0])
            }),
        }))
    }
}

/// Value at time t of the Euler-discretized jump SDE.
#[derive(Debug, Clone)]
pub struct JumpSde {
    coef: SdeCoefficients,
    model: IntensityModel,
    x0: Vec<f64>,
    t: f64,
    delta: f64,
}

pub fn jump_sde(model: &IntensityModel, coef: SdeCoefficients, x0: Vec<f64>, t: f64, delta: f64) -> Result<JumpSde> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("Euler step must be positive, got {delta}")));
    }
    check_time(t, model.horizon())?;
    if coef.mark_dim != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: coef.mark_dim });
    }
    if x0.len() != coef.state_dim {
        return Err(Error::DimensionMismatch { expected: coef.state_dim, got: x0.len() });
    }
    Ok(JumpSde { coef, model: model.clone(), x0, t, delta })
}

impl JumpSde {
    fn drift(&self, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        match &self.coef.drift {
            Some(b) => Ok(b(s, x)),
            None => (0..self.coef.state_dim)
                .map(|k| self.model.sigma_integrate(&|u: &[f64]| (self.coef.c)(s, x, u)[k]))
                .collect(),
        }
    }

    /// Runs the scheme; with `lent = Some(α)` also carries the tangent ∂X/∂(mark of the atom at α).
    fn run(&self, cfg: &Configuration, lent: Option<f64>) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
        let n = self.coef.state_dim;
        let jac = self.coef.jacobians.as_ref();
        let mut x = self.x0.clone();
        let mut tangent: Option<DMatrix<f64>> = None;
        let mut start = 0.0;
        let euler = |x: &mut Vec<f64>, tangent: &mut Option<DMatrix<f64>>, a: f64, b: f64| -> Result<()> {
            if b <= a {
                return Ok(());
            }
            let steps = ((b - a) / self.delta).ceil().max(1.0);
            let h = (b - a) / steps;
            for k in 0..steps as usize {
                let s = a + k as f64 * h;
                if let (Some(j), Some(jm)) = (tangent.as_mut(), jac) {
                    let propagator = DMatrix::identity(n, n) - (jm.drift_state)(s, x) * h;
                    *j = propagator * &*j;
                }
                let b = self.drift(s, x)?;
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi -= h * bi;
                }
            }
            Ok(())
        };
        for a in cfg.atoms().iter().take_while(|a| a.time <= self.t) {
            euler(&mut x, &mut tangent, start, a.time)?;
            if let (Some(j), Some(jm)) = (tangent.as_mut(), jac) {
                *j = (DMatrix::identity(n, n) + (jm.c_state)(a.time, &x, &a.mark)) * &*j;
            }
            if let (Some(alpha), Some(jm)) = (lent, jac) {
                if a.time == alpha {
                    tangent = Some((jm.c_mark)(a.time, &x, &a.mark));
                }
            }
            let jump = (self.coef.c)(a.time, &x, &a.mark);
            for (xi, ji) in x.iter_mut().zip(jump) {
                *xi += ji;
            }
            start = a.time;
        }
        euler(&mut x, &mut tangent, start, self.t)?;
        Ok((x, tangent))
    }
}

impl Functional for JumpSde {
    fn out_dim(&self) -> usize {
        self.coef.state_dim
    }
    fn mark_dim(&self) -> usize {
        self.coef.mark_dim
    }
    fn label(&self) -> &str {
        "jump_sde"
    }
    fn value(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        check_cfg(self.coef.mark_dim, cfg)?;
        Ok(self.run(cfg, None)?.0)
    }
    /// Tangent propagation through the same Euler scheme when Jacobians are supplied, else finite differences.
    fn add_derivative(&self, cfg: &Configuration, alpha: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        check_mark(self.coef.mark_dim, x)?;
        if self.coef.jacobians.is_none() {
            return fd_add_derivative(self, cfg, alpha, x);
        }
        if alpha > self.t {
            return Ok(DMatrix::zeros(self.coef.state_dim, x.len()));
        }
        let lifted = cfg.add_particle(&Atom::new(alpha, x.to_vec())?)?;
        let (_, tangent) = self.run(&lifted, Some(alpha))?;
        tangent.ok_or_else(|| Error::Domain(format!("lent atom at {alpha} not reached")))
    }
    fn has_closed_derivative(&self) -> bool {
        self.coef.jacobians.is_some()
    }
}
