//! Outer-power Archimedean copulas and their hierarchical extensions.

pub mod data;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod generator;
pub mod optim;
mod quadrature;
pub mod risk;
pub mod rng;
pub mod sampling;
pub mod simstudy;
pub mod tree;

pub use data::{PseudoSample, SampleMatrix};
pub use error::{HopacError, Result};
pub use generator::{kendall_tau_inverse, solve_tau_lambda_u, Family, Generator, TailCoefficients};
pub use rng::RngStream;
pub use tree::{HacTree, SncReport, Structure};
