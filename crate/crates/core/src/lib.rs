//! Numerical laboratory for one-dimensional parabolic equations with a
//! singular drift: kernels, a-priori bound calculators, a finite-volume
//! solver, stochastic-flow Monte Carlo and the verification harness.

pub mod error;
pub mod experiments;
pub mod feynman_kac;
pub mod io;
pub mod pde;
pub mod quadrature;
pub mod bound_calculus;
pub mod series;
pub mod special_functions;
pub mod verifier;

pub use bound_calculus::{BoundParams, BoundReport};
pub use error::{Error, Result};
pub use series::{CoefficientSeries, Interpolation};
pub use special_functions::{Drift, DriftFamily, DriftSign, DriftSpec, KernelParams, Modulus};
