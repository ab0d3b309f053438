//! Pseudo-spectral solver for charged densities drifting in a
//! wave-propagated potential on the periodic box,
//!
//! ```text
//! d_t u_j - Lap u_j = div(beta_j u_j grad V),    d_tt V - Lap V = sum_k alpha_k u_k,
//! ```
//!
//! together with the solution operators and norms used to study its mild
//! formulation.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f64` and `f32`). The aliases below fix `f64`, with `*32` variants for
//! single precision.

pub mod error;
pub mod grid;
pub mod heat;
pub mod io;
pub mod lp;
pub mod mild;
pub mod scalar;
pub mod sim;
pub mod wave;

pub use error::{ConfigError, Error, Result};
pub use grid::{time_levels, step_count};
pub use lp::TimeExponent;
pub use mild::{IterationConfig, NormSpec};
pub use scalar::Real;
pub use sim::{Species, WrapPolicy};

pub type Grid64 = grid::Grid<f64>;
pub type ScalarField64 = grid::ScalarField<f64>;
pub type SpectralField64 = grid::SpectralField<f64>;
pub type SpaceTimeField64 = grid::SpaceTimeField<f64>;
pub type DyadicFilterBank64 = lp::DyadicFilterBank<f64>;
pub type BesovProfile64 = lp::BesovProfile<f64>;
pub type HeatMultiplier64 = heat::HeatMultiplier<f64>;
pub type WaveState64 = wave::WaveState<f64>;
pub type SolverConfig64 = sim::SolverConfig<f64>;
pub type DiagnosticsRow64 = sim::DiagnosticsRow<f64>;
pub type RunOutput64 = sim::RunOutput<f64>;
pub type MildProblem64 = mild::MildProblem<f64>;
pub type ContractionReport64 = mild::ContractionReport<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type ScalarField32 = grid::ScalarField<f32>;
pub type SpaceTimeField32 = grid::SpaceTimeField<f32>;
pub type SolverConfig32 = sim::SolverConfig<f32>;
