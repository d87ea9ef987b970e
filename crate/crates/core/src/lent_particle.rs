//! The lent-particle formula Γ[F, Fᵗ] = ∫ ε⁻ γ[ε⁺F] dN and the gradient F♯.
//!
//! For each atom a of ω the particle is lent back to the background `ω ∖ a`,
//! the functional is differentiated in the lent mark, and the bottom carré du
//! champ α(x_a) is applied to that derivative.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::configuration::{CurveMap, IntensityModel, MarkedConfiguration};
use crate::configuration::{sample_configuration, Configuration};
use crate::error::{Error, Result};
use crate::functionals::{fd_add_derivative, Composite, Functional};
use crate::rng::{derive_seed, par_map, Jobs};

type AlphaFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Bottom carré du champ x ↦ α(x) and the mark basis realizing the gradient ♭.
#[derive(Clone)]
pub struct GammaSpec {
    label: String,
    dim: usize,
    basis: usize,
    alpha: Arc<AlphaFn>,
}

impl fmt::Debug for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GammaSpec({}, d={}, k={})", self.label, self.dim, self.basis)
    }
}

impl GammaSpec {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        alpha: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> GammaSpec {
        GammaSpec { label: label.into(), dim, basis: dim, alpha: Arc::new(alpha) }
    }

    /// α(x) = diag(x_i²).
    pub fn diag_x2(dim: usize) -> GammaSpec {
        GammaSpec::new("diag_x2", dim, |x| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(x.len(), x.iter().map(|v| v * v))))
    }

    pub fn identity(dim: usize) -> GammaSpec {
        GammaSpec::new("identity", dim, move |_| DMatrix::identity(dim, dim))
    }

    /// Planar α = |x|²·I (no cross term).
    pub fn polar() -> GammaSpec {
        GammaSpec::new("polar", 2, |x| DMatrix::identity(2, 2) * (x[0] * x[0] + x[1] * x[1]))
    }

    /// Pull-back of γ̃[f] = u²f′(u)² along a curve: α = u²(f′, g′)(f′, g′)ᵗ, rank one.
    pub fn curve(curve: CurveMap) -> GammaSpec {
        GammaSpec::new("curve", 2, move |x| {
            let u = (curve.inverse)(x);
            let tangent = nalgebra::DVector::from_vec(vec![(curve.df)(u), (curve.dg)(u)]);
            &tangent * tangent.transpose() * (u * u)
        })
    }

    pub fn by_name(name: &str, dim: usize) -> Option<GammaSpec> {
        match name {
            "diag_x2" => Some(GammaSpec::diag_x2(dim)),
            "identity" => Some(GammaSpec::identity(dim)),
            "polar" if dim == 2 => Some(GammaSpec::polar()),
            "curve" if dim == 2 => Some(GammaSpec::curve(CurveMap::parabola())),
            _ => None,
        }
    }

    /// Uses `k ≥ d` basis functions η₁..η_k.
    pub fn with_basis(mut self, k: usize) -> Result<GammaSpec> {
        if k < self.dim {
            return Err(Error::InvalidArgument(format!("basis size {k} below mark dimension {}", self.dim)));
        }
        self.basis = k;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn basis_size(&self) -> usize {
        self.basis
    }

    pub fn alpha(&self, x: &[f64]) -> DMatrix<f64> {
        (self.alpha)(x)
    }

    /// A factor L with L·Lᵗ = α(x): Cholesky, with diagonal jitter 10⁻¹⁴·trace when α is singular.
    pub fn chol(&self, x: &[f64]) -> DMatrix<f64> {
        let a = self.alpha(x);
        if let Some(c) = a.clone().cholesky() {
            return c.l();
        }
        let jitter = 1e-14 * a.trace().abs().max(f64::MIN_POSITIVE);
        let shifted = &a + DMatrix::identity(a.nrows(), a.nrows()) * jitter;
        if let Some(c) = shifted.cholesky() {
            return c.l();
        }
        let eig = SymmetricEigen::new(a);
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&roots)
    }

    /// η_j(r) = √2 cos(2π j r), j = 1..k: orthonormal, zero mean on [0, 1].
    pub fn eta(&self, r: f64) -> Vec<f64> {
        (1..=self.basis)
            .map(|j| std::f64::consts::SQRT_2 * (2.0 * std::f64::consts::PI * j as f64 * r).cos())
            .collect()
    }
}

/// uᵗ α(x) v.
pub fn gamma_quadratic(spec: &GammaSpec, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    for len in [x.len(), u.len(), v.len()] {
        if len != spec.dim {
            return Err(Error::DimensionMismatch { expected: spec.dim, got: len });
        }
    }
    let a = spec.alpha(x);
    let mut s = 0.0;
    for i in 0..spec.dim {
        for j in 0..spec.dim {
            s += u[i] * a[(i, j)] * v[j];
        }
    }
    Ok(s)
}

/// Which added-particle derivative to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Closed,
    Fd,
}

/// Γ[F, Fᵗ] with its per-atom summands.
#[derive(Debug, Clone, PartialEq)]
pub struct CarreDuChamp {
    pub matrix: DMatrix<f64>,
    pub contributions: Vec<DMatrix<f64>>,
}

impl CarreDuChamp {
    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.min()
    }
}

/// D(a) = ∂/∂x F(ε⁺_(t_a, x) (ω ∖ a)) at x = x_a, one m×d matrix per atom.
pub fn lent_derivatives(f: &dyn Functional, cfg: &Configuration, mode: Mode) -> Result<Vec<DMatrix<f64>>> {
    if f.mark_dim() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: f.mark_dim(), got: cfg.dim() });
    }
    let mut out = Vec::with_capacity(cfg.len());
    let mut bad = Vec::new();
    for (i, a) in cfg.atoms().iter().enumerate() {
        let background = cfg.without(i);
        let d = match mode {
            Mode::Closed => f.add_derivative(&background, a.time, &a.mark)?,
            Mode::Fd => fd_add_derivative(f, &background, a.time, &a.mark)?,
        };
        if d.iter().any(|v| !v.is_finite()) {
            bad.push(i);
        }
        out.push(d);
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::NonFinite { atoms: bad })
    }
}

/// The lent-particle carré du champ Σ_a D(a) α(x_a) D(a)ᵗ.
pub fn carre_du_champ(f: &dyn Functional, cfg: &Configuration, spec: &GammaSpec, mode: Mode) -> Result<CarreDuChamp> {
    if spec.dim() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: cfg.dim() });
    }
    let derivatives = lent_derivatives(f, cfg, mode)?;
    let m = f.out_dim();
    let mut matrix = DMatrix::zeros(m, m);
    let mut contributions = Vec::with_capacity(cfg.len());
    for (a, d) in cfg.atoms().iter().zip(&derivatives) {
        let c = d * spec.alpha(&a.mark) * d.transpose();
        matrix += &c;
        contributions.push(c);
    }
    Ok(CarreDuChamp { matrix, contributions })
}

/// Per-atom factors D(a)·L(x_a) (m×d); F♯ is their sum against η(r_a).
pub fn sharp_factors(f: &dyn Functional, cfg: &Configuration, spec: &GammaSpec) -> Result<Vec<DMatrix<f64>>> {
    let derivatives = lent_derivatives(f, cfg, Mode::Closed)?;
    Ok(cfg.atoms().iter().zip(derivatives).map(|(a, d)| d * spec.chol(&a.mark)).collect())
}

/// Σ_a factor_a · η(r_a)[..d].
pub fn sharp_from_factors(factors: &[DMatrix<f64>], spec: &GammaSpec, aux: &[f64]) -> Vec<f64> {
    let m = factors.first().map_or(0, |f| f.nrows());
    let mut out = vec![0.0; m];
    for (fac, &r) in factors.iter().zip(aux) {
        let eta = spec.eta(r);
        for i in 0..m {
            for k in 0..fac.ncols() {
                out[i] += fac[(i, k)] * eta[k];
            }
        }
    }
    out
}

/// F♯ = Σ_a D(a) L(x_a) η(r_a).
pub fn sharp_sample(f: &dyn Functional, mcfg: &MarkedConfiguration, spec: &GammaSpec) -> Result<Vec<f64>> {
    let factors = sharp_factors(f, &mcfg.base, spec)?;
    if factors.is_empty() {
        return Ok(vec![0.0; f.out_dim()]);
    }
    Ok(sharp_from_factors(&factors, spec, &mcfg.aux))
}

/// Both sides of the chain rule Γ[Φ(F)] = ∇Φᵗ Γ[F] ∇Φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRule {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

pub fn chain_rule_check(phi: &Composite, cfg: &Configuration, spec: &GammaSpec) -> Result<ChainRule> {
    let lhs = carre_du_champ(phi, cfg, spec, Mode::Closed)?.matrix[(0, 0)];
    let inner = carre_du_champ(phi.inner().as_ref(), cfg, spec, Mode::Closed)?.matrix;
    let g = nalgebra::DVector::from_vec(phi.gradient(&phi.inner().value(cfg)?));
    let rhs = (g.transpose() * inner * &g)[(0, 0)];
    Ok(ChainRule { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// ‖a − b‖_F / ‖b‖_F (absolute when b vanishes).
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// One sampled configuration of a determinant-positivity survey.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyRow {
    pub seed: u64,
    pub n_atoms: usize,
    /// det Γ > tol·Π Γ_ii.
    pub nondegenerate: bool,
    pub det: f64,
    pub trace: f64,
    pub min_eig: f64,
    /// Fraction of atoms whose own contribution γ[ε⁺F] has positive determinant.
    pub simplified_criterion_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    pub rows: Vec<SurveyRow>,
    /// Fraction of nondegenerate configurations.
    pub frequency: f64,
    pub tol: f64,
}

/// det Γ > tol·Π Γ_ii with every Γ_ii > 0. The ratio det/Π Γ_ii lies in [0, 1] and
/// does not change when the components of F are rescaled separately.
fn nondegenerate(det: f64, diagonal: impl Iterator<Item = f64>, tol: f64) -> bool {
    let mut product = 1.0;
    for d in diagonal {
        if !(d > 0.0) {
            return false;
        }
        product *= d;
    }
    det > tol * product
}

fn positive_det(matrix: &DMatrix<f64>, tol: f64) -> (bool, f64) {
    let det = matrix.determinant();
    (nondegenerate(det, matrix.diagonal().iter().copied(), tol), det)
}

/// Samples `nsamples` configurations and records how often Γ[F] is nondegenerate.
pub fn det_positivity_survey(
    f: &dyn Functional,
    spec: &GammaSpec,
    model: &IntensityModel,
    nsamples: usize,
    tol: f64,
    seed: u64,
    jobs: Jobs,
) -> Result<Survey> {
    if nsamples == 0 {
        return Err(Error::InvalidArgument("nsamples must be at least 1".into()));
    }
    let rows = par_map(nsamples, jobs, |i| {
        let sample_seed = derive_seed(seed, i as u64);
        let cfg = sample_configuration(model, sample_seed)?;
        let g = carre_du_champ(f, &cfg, spec, Mode::Closed)?;
        let (nondegenerate, det) = positive_det(&g.matrix, tol);
        let good = g.contributions.iter().filter(|c| positive_det(c, tol).0).count();
        Ok(SurveyRow {
            seed: sample_seed,
            n_atoms: cfg.len(),
            nondegenerate,
            det,
            trace: g.trace(),
            min_eig: g.min_eigenvalue(),
            simplified_criterion_fraction: if cfg.is_empty() { 0.0 } else { good as f64 / cfg.len() as f64 },
        })
    })?;
    let positive = rows.iter().filter(|r| r.nondegenerate).count();
    Ok(Survey { frequency: positive as f64 / nsamples as f64, rows, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::Atom;
    use crate::functionals::{doleans, nearest_point, pair_doleans, path_eval, FnFunctional};
    use crate::quadrature::{integrate, Tolerance};

    fn sym1() -> IntensityModel {
        IntensityModel::uniform(1.0, 2.0, -0.9, 0.9, 1).unwrap()
    }

    fn cfg2() -> Configuration {
        Configuration::from_pairs(1.0, &[(0.2, 0.5), (0.6, -0.2)]).unwrap()
    }

    #[test]
    fn gamma_quadratic_examples() {
        assert!((gamma_quadratic(&GammaSpec::diag_x2(1), &[0.5], &[1.0], &[1.0]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(gamma_quadratic(&GammaSpec::diag_x2(1), &[0.5], &[0.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(gamma_quadratic(&GammaSpec::identity(2), &[0.1, 0.2], &[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
        assert!(gamma_quadratic(&GammaSpec::identity(2), &[0.1], &[1.0, 2.0], &[3.0, -1.0]).is_err());
    }

    #[test]
    fn doleans_example_one() {
        let g = carre_du_champ(&doleans(&sym1(), 1.0).unwrap(), &cfg2(), &GammaSpec::diag_x2(1), Mode::Closed).unwrap();
        assert!((g.matrix[(0, 0)] - 0.25).abs() < 1e-12);
        let sum: DMatrix<f64> = g.contributions.iter().sum();
        assert_eq!(sum, g.matrix);
    }

    #[test]
    fn path_eval_and_pair_examples() {
        let spec = GammaSpec::diag_x2(1);
        let y = carre_du_champ(&path_eval(&sym1(), 1.0).unwrap(), &cfg2(), &spec, Mode::Closed).unwrap();
        assert!((y.matrix[(0, 0)] - 0.29).abs() < 1e-12);
        let pair = carre_du_champ(&pair_doleans(&sym1(), 1.0).unwrap(), &cfg2(), &spec, Mode::Closed).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.29, 0.26, 0.26, 0.25]);
        assert!((&pair.matrix - expect).abs().max() < 1e-12);
        assert!((pair.det() - 0.0049).abs() < 1e-12);
        let fd = carre_du_champ(&pair_doleans(&sym1(), 1.0).unwrap(), &cfg2(), &spec, Mode::Fd).unwrap();
        assert!(relative_frobenius(&fd.matrix, &pair.matrix) < 1e-8);
    }

    #[test]
    fn nearest_point_gamma_examples() {
        let m = IntensityModel::uniform(1.0, 2.0, -1.0, 1.0, 2).unwrap();
        let cfg = Configuration::new(1.0, 2, vec![Atom::new(0.4, vec![1.0, 0.0]).unwrap()], "manual").unwrap();
        let f = nearest_point(&m);
        let id = carre_du_champ(&f, &cfg, &GammaSpec::identity(2), Mode::Closed).unwrap();
        assert!((id.matrix[(0, 0)] - 1.0).abs() < 1e-15);
        let dx = carre_du_champ(&f, &cfg, &GammaSpec::diag_x2(2), Mode::Closed).unwrap();
        assert!((dx.matrix[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spec_invariants() {
        let specs = [GammaSpec::diag_x2(2), GammaSpec::identity(2), GammaSpec::polar(), GammaSpec::curve(CurveMap::parabola())];
        let mut rng = crate::rng::stream(5, 0);
        for spec in &specs {
            for _ in 0..10_000 {
                use rand::Rng;
                let u: f64 = rng.random_range(-1.0..1.0);
                let x = if spec.label() == "curve" { vec![u, u * u] } else { vec![u, rng.random_range(-1.0..1.0)] };
                let a = spec.alpha(&x);
                assert_eq!(a, a.transpose());
                let eig = SymmetricEigen::new(a.clone()).eigenvalues;
                assert!(eig.min() >= -1e-12 * a.trace().abs().max(1.0));
                let l = spec.chol(&x);
                assert!((&l * l.transpose() - &a).abs().max() <= 1e-10 * a.abs().max().max(1.0));
            }
        }
    }

    #[test]
    fn mark_basis_is_orthonormal_and_centered() {
        let spec = GammaSpec::identity(2).with_basis(4).unwrap();
        let tol = Tolerance::default();
        for i in 0..4 {
            let mean = integrate(&|r| spec.eta(r)[i], 0.0, 1.0, tol).unwrap();
            assert!(mean.abs() < 1e-8);
            for j in 0..4 {
                let ip = integrate(&|r| spec.eta(r)[i] * spec.eta(r)[j], 0.0, 1.0, tol).unwrap();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(GammaSpec::identity(2).with_basis(1).is_err());
    }

    #[test]
    fn sharp_examples() {
        let spec = GammaSpec::diag_x2(1);
        let f = doleans(&sym1(), 1.0).unwrap();
        let empty = Configuration::empty(1.0, 1).unwrap().attach_marks(3);
        assert_eq!(sharp_sample(&f, &empty, &spec).unwrap(), vec![0.0]);
        let one = Configuration::from_pairs(1.0, &[(0.3, 0.4)]).unwrap();
        let marked = MarkedConfiguration::new(one, vec![0.25]).unwrap();
        assert!(sharp_sample(&f, &marked, &spec).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn constant_functional_is_never_nondegenerate() {
        let m = IntensityModel::uniform(1.0, 20.0, -0.5, 0.5, 1).unwrap();
        let s = det_positivity_survey(&FnFunctional::constant(vec![1.0], 1), &GammaSpec::diag_x2(1), &m, 50, 1e-12, 1, Jobs(0))
            .unwrap();
        assert_eq!(s.frequency, 0.0);
    }

    #[test]
    fn survey_frequency_of_path_eval_tracks_nonempty_configurations() {
        let m = IntensityModel::uniform(1.0, 1.0, -0.5, 0.5, 1).unwrap();
        let s = det_positivity_survey(&path_eval(&m, 1.0).unwrap(), &GammaSpec::diag_x2(1), &m, 400, 1e-12, 9, Jobs(2))
            .unwrap();
        let nonempty = s.rows.iter().filter(|r| r.n_atoms > 0).count() as f64 / 400.0;
        assert_eq!(s.frequency, nonempty);
    }

    #[test]
    fn scaling_and_locality() {
        let spec = GammaSpec::diag_x2(1);
        let base = doleans(&sym1(), 0.7).unwrap();
        let scaled = FnFunctional::new("3F", 1, 1, move |c: &Configuration| Ok(vec![3.0 * base.value(c)?[0]]));
        let base = doleans(&sym1(), 0.7).unwrap();
        let g = carre_du_champ(&base, &cfg2(), &spec, Mode::Fd).unwrap().matrix[(0, 0)];
        let g3 = carre_du_champ(&scaled, &cfg2(), &spec, Mode::Fd).unwrap().matrix[(0, 0)];
        assert!((g3 / g - 9.0).abs() < 1e-6);
        // atoms after t do not move the value, so they add nothing
        let later = cfg2().add_particle(&Atom::scalar(0.9, 0.3).unwrap()).unwrap();
        let g_later = carre_du_champ(&base, &later, &spec, Mode::Closed).unwrap().matrix[(0, 0)];
        assert!((g_later - carre_du_champ(&base, &cfg2(), &spec, Mode::Closed).unwrap().matrix[(0, 0)]).abs() < 1e-15);
    }
}
