//! Mountain-pass critical points, Gamma-limits and geometric diagnostics for
//! the anisotropic Allen-Cahn energy on periodic tori.

pub mod critical;
pub mod domain;
pub mod energy;
pub mod error;
pub mod gamma;
pub mod geomlimits;
pub mod integrand;
pub mod linalg;
pub mod minmax;
pub mod potential;
pub mod precond;
pub mod quadrature;
pub mod scalar;

pub use domain::{ConformalMetric, Domain, Grid, ScalarField, VectorField};
pub use energy::EnergyParams;
pub use error::{Error, Result};
pub use integrand::{IntegrandSpec, MollifiedIntegrand};
pub use potential::PotentialSpec;
pub use scalar::Real;

pub type Field64 = ScalarField<f64>;
pub type Field32 = ScalarField<f32>;
pub type Domain64 = Domain<f64>;
pub type Domain32 = Domain<f32>;
pub type Energy64 = EnergyParams<f64>;
pub type Energy32 = EnergyParams<f32>;
