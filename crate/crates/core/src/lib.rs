//! Pathwise Malliavin calculus on Poisson space: configurations, functionals,
//! lent-particle carré du champ, chaos expansions and Monte Carlo diagnostics.

pub mod chaos;
pub mod configuration;
pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod lent_particle;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod runner;
pub mod stats;

pub use configuration::{Atom, Configuration, IntensityModel, MarkedConfiguration};
pub use error::{Error, Result};
