//! Finite Poisson configurations on a time window, their marked versions,
//! and the creation/annihilation operators ε⁺ / ε⁻.

mod intensity;
mod text;

pub use intensity::{
    CurveMap, Family, IntensityModel, JumpLaw, MarkLaw1,
};
pub use text::{read_configuration, write_configuration};

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

/// A jump atom: a time in the window and a nonzero mark (jump size).
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub mark: Vec<f64>,
}

impl Atom {
    pub fn new(time: f64, mark: Vec<f64>) -> Result<Atom> {
        if !time.is_finite() || mark.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("atom coordinates must be finite".into()));
        }
        if mark.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroMark);
        }
        Ok(Atom { time, mark })
    }

    /// One-dimensional shorthand.
    pub fn scalar(time: f64, mark: f64) -> Result<Atom> {
        Atom::new(time, vec![mark])
    }
}

/// A realization of the Poisson measure: atoms sorted by strictly increasing time.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    horizon: f64,
    dim: usize,
    atoms: Vec<Atom>,
    source: String,
}

impl Configuration {
    pub fn empty(horizon: f64, dim: usize) -> Result<Configuration> {
        Configuration::new(horizon, dim, Vec::new(), "manual")
    }

    /// Builds a configuration, sorting the atoms by time. Repeated times are rejected.
    pub fn new(
        horizon: f64,
        dim: usize,
        mut atoms: Vec<Atom>,
        source: impl Into<String>,
    ) -> Result<Configuration> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 {
            return Err(Error::InvalidModel("mark dimension must be at least 1".into()));
        }
        for a in &atoms {
            check_atom(horizon, dim, a)?;
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        if let Some(w) = atoms.windows(2).find(|w| w[0].time == w[1].time) {
            return Err(Error::DuplicateTime(w[0].time));
        }
        Ok(Configuration { horizon, dim, atoms, source: source.into() })
    }

    /// One-dimensional configuration from `(time, mark)` pairs.
    pub fn from_pairs(horizon: f64, pairs: &[(f64, f64)]) -> Result<Configuration> {
        let atoms = pairs.iter().map(|&(t, x)| Atom::scalar(t, x)).collect::<Result<Vec<_>>>()?;
        Configuration::new(horizon, 1, atoms, "manual")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Label of the model that produced this configuration, or `"manual"`.
    pub fn source(&self) -> &str {
        &self.source
    }

    fn position(&self, a: &Atom) -> std::result::Result<usize, usize> {
        self.atoms.binary_search_by(|b| b.time.total_cmp(&a.time))
    }

    /// ε⁺: adds `a` unless an identical atom is already present.
    pub fn add_particle(&self, a: &Atom) -> Result<Configuration> {
        check_atom(self.horizon, self.dim, a)?;
        match self.position(a) {
            Ok(i) if self.atoms[i].mark == a.mark => Ok(self.clone()),
            Ok(_) => Err(Error::DuplicateTime(a.time)),
            Err(i) => {
                let mut atoms = Vec::with_capacity(self.atoms.len() + 1);
                atoms.extend_from_slice(&self.atoms[..i]);
                atoms.push(a.clone());
                atoms.extend_from_slice(&self.atoms[i..]);
                Ok(Configuration { atoms, ..self.shallow() })
            }
        }
    }

    /// ε⁻: removes the atom equal to `a` if present.
    pub fn remove_particle(&self, a: &Atom) -> Configuration {
        match self.position(a) {
            Ok(i) if self.atoms[i] == *a => self.without(i),
            _ => self.clone(),
        }
    }

    /// The configuration with the `i`-th atom taken out.
    pub fn without(&self, i: usize) -> Configuration {
        let mut atoms = self.atoms.clone();
        atoms.remove(i);
        Configuration { atoms, ..self.shallow() }
    }

    fn shallow(&self) -> Configuration {
        Configuration {
            horizon: self.horizon,
            dim: self.dim,
            atoms: Vec::new(),
            source: self.source.clone(),
        }
    }

    /// Returns a copy with every atom transformed by `f` (times and order are kept).
    pub fn map_marks(&self, mut f: impl FnMut(usize, &Atom) -> Vec<f64>) -> Result<Configuration> {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| Atom::new(a.time, f(i, a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { atoms, ..self.shallow() })
    }

    /// Union of two configurations on the same window.
    pub fn superpose(&self, other: &Configuration) -> Result<Configuration> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Configuration::new(self.horizon, self.dim, atoms, "superposed")
    }

    /// N(f): sum of `f` over the atoms.
    pub fn integrate(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        self.atoms.iter().map(f).sum()
    }

    /// Ñ(f) = N(f) − T·σ_ε(f) for a time-homogeneous integrand of the mark.
    pub fn compensated_integrate(&self, model: &IntensityModel, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        let compensator = model.nu_integrate(f)?;
        Ok(self.integrate(|a| f(&a.mark)) - compensator)
    }

    /// Ñ(f) for a general integrand f(t, x), compensated by product quadrature over [0, T].
    pub fn compensated_integrate_general(
        &self,
        model: &IntensityModel,
        f: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
    ) -> Result<f64> {
        let compensator = model.nu_integrate_general(f)?;
        Ok(self.integrate(|a| f(a.time, &a.mark)) - compensator)
    }

    /// Attaches one i.i.d. uniform auxiliary mark per atom.
    pub fn attach_marks(&self, seed: u64) -> MarkedConfiguration {
        let mut rng = stream(derive_seed(seed, MARK_TAG), 0);
        self.attach_marks_with(&mut rng)
    }

    pub fn attach_marks_with(&self, rng: &mut dyn RngCore) -> MarkedConfiguration {
        let aux = (0..self.atoms.len()).map(|_| rng.random::<f64>()).collect();
        MarkedConfiguration { base: self.clone(), aux }
    }
}

const MARK_TAG: u64 = 0x6d61_726b;

fn check_atom(horizon: f64, dim: usize, a: &Atom) -> Result<()> {
    if a.mark.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: a.mark.len() });
    }
    if !(0.0..=horizon).contains(&a.time) {
        return Err(Error::TimeOutsideWindow { time: a.time, horizon });
    }
    if a.mark.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroMark);
    }
    Ok(())
}

/// A configuration whose atoms carry auxiliary uniform marks r ∈ [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedConfiguration {
    pub base: Configuration,
    pub aux: Vec<f64>,
}

impl MarkedConfiguration {
    pub fn new(base: Configuration, aux: Vec<f64>) -> Result<MarkedConfiguration> {
        if aux.len() != base.len() {
            return Err(Error::DimensionMismatch { expected: base.len(), got: aux.len() });
        }
        Ok(MarkedConfiguration { base, aux })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.base.atoms().iter().zip(self.aux.iter().copied())
    }
}

/// Draws a configuration from `model` on stream `(seed, 0)`.
pub fn sample_configuration(model: &IntensityModel, seed: u64) -> Result<Configuration> {
    model.sample(&mut stream(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg2() -> Configuration {
        Configuration::from_pairs(1.0, &[(0.3, 0.5), (0.7, -0.2)]).unwrap()
    }

    #[test]
    fn add_particle_inserts_in_time_order() {
        let cfg = Configuration::from_pairs(1.0, &[(0.3, 0.5)]).unwrap();
        let out = cfg.add_particle(&Atom::scalar(0.7, -0.2).unwrap()).unwrap();
        assert_eq!(out, cfg2());
        let out = cfg2().add_particle(&Atom::scalar(0.1, 2.0).unwrap()).unwrap();
        assert_eq!(out.atoms()[0].time, 0.1);
    }

    #[test]
    fn add_particle_on_support_is_identity() {
        let cfg = Configuration::from_pairs(1.0, &[(0.3, 0.5)]).unwrap();
        assert_eq!(cfg.add_particle(&Atom::scalar(0.3, 0.5).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn add_particle_to_empty() {
        let cfg = Configuration::empty(1.0, 1).unwrap();
        let out = cfg.add_particle(&Atom::scalar(0.1, 1.0).unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(cfg.is_empty(), "input must not be mutated");
    }

    #[test]
    fn add_particle_errors() {
        let cfg = cfg2();
        assert!(matches!(
            cfg.add_particle(&Atom::new(0.5, vec![1.0, 1.0]).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cfg.add_particle(&Atom::scalar(1.5, 1.0).unwrap()),
            Err(Error::TimeOutsideWindow { .. })
        ));
        assert!(matches!(cfg.add_particle(&Atom::scalar(0.3, 1.0).unwrap()), Err(Error::DuplicateTime(_))));
    }

    #[test]
    fn remove_particle_cases() {
        let cfg = cfg2();
        let out = cfg.remove_particle(&Atom::scalar(0.7, -0.2).unwrap());
        assert_eq!(out, Configuration::from_pairs(1.0, &[(0.3, 0.5)]).unwrap());
        let single = Configuration::from_pairs(1.0, &[(0.3, 0.5)]).unwrap();
        assert_eq!(single.remove_particle(&Atom::scalar(0.9, 1.0).unwrap()), single);
        // same time, different mark: not on the support
        assert_eq!(single.remove_particle(&Atom::scalar(0.3, 0.4).unwrap()), single);
    }

    #[test]
    fn remove_after_add_is_bit_exact() {
        let cfg = cfg2();
        let a = Atom::scalar(0.45, 0.123456789).unwrap();
        assert_eq!(cfg.add_particle(&a).unwrap().remove_particle(&a), cfg);
        let b = cfg.atoms()[1].clone();
        assert_eq!(cfg.remove_particle(&b).add_particle(&b).unwrap(), cfg);
    }

    #[test]
    fn integrate_examples() {
        let cfg = cfg2();
        assert!((cfg.integrate(|a| a.mark[0]) - 0.3).abs() < 1e-15);
        assert_eq!(cfg.integrate(|_| 1.0), 2.0);
        assert_eq!(Configuration::empty(1.0, 1).unwrap().integrate(|a| a.mark[0]), 0.0);
    }

    #[test]
    fn marks_are_deterministic_and_preserve_base() {
        let cfg = cfg2();
        let m1 = cfg.attach_marks(3);
        let m2 = cfg.attach_marks(3);
        assert_eq!(m1, m2);
        assert_eq!(m1.base, cfg);
        assert!(m1.aux.iter().all(|r| (0.0..1.0).contains(r)));
        assert!(Configuration::empty(1.0, 1).unwrap().attach_marks(1).aux.is_empty());
    }

    #[test]
    fn rejects_zero_marks_and_repeated_times() {
        assert!(matches!(Atom::scalar(0.1, 0.0), Err(Error::ZeroMark)));
        assert!(matches!(
            Configuration::from_pairs(1.0, &[(0.2, 1.0), (0.2, 2.0)]),
            Err(Error::DuplicateTime(_))
        ));
    }
}
