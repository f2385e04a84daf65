//! Simulation and verification suite for a mean-field system of spatially
//! interacting integrate-and-fire neurons with voltages on the torus
//! `R / 2Z`.
//!
//! * [`particle`] simulates the N-neuron SDE system with Euler-Maruyama.
//! * [`fokker_planck`] solves the limiting nonlinear Fokker-Planck equation.
//! * [`mckean_vlasov`] samples the decoupled single-neuron SDE driven by the
//!   PDE solution.
//! * [`measures`] compares the two: Wasserstein distances, mollified
//!   densities, Sobolev norms and the martingale part of the empirical
//!   dynamics.
//! * [`study`] orchestrates the experiments and writes CSV/SVG reports.

pub mod config;
pub mod error;
pub mod fokker_planck;
pub mod mckean_vlasov;
pub mod measures;
pub mod model;
pub mod particle;
mod quad;
pub mod rng;
pub mod study;
pub mod torus;

pub use config::{preset, ExperimentConfig, StudyKind};
pub use error::{Error, Result};
pub use fokker_planck::{
    discretize_initial, fp_solve, fp_step, mild_residual, semigroup_apply, weak_residual_phi, ConditionalGridDensity,
    FluxScheme, FpOptions, FpSolution, TestFunction,
};
pub use mckean_vlasov::{mkv_simulate, MkvSample};
pub use measures::{
    empirical_measure, h_minus2_norm, h_minus2_norm_sq, l2_energy, martingale_functional, mollified_density,
    w1_holder_modulus, wasserstein1_joint, wasserstein1_v, CircleMeasure, EmpiricalDensity, PhaseMeasure,
    WeightedAtomMeasure,
};
pub use model::{
    g2, lambda2, sigma2, Domain, InitialLaws, LambdaMode, MeanFieldCoefficients, ModelCoefficients, Position,
    PositionLaw, SigmaProfile, ThetaKernel, VoltageDensity,
};
pub use particle::{
    euler_refinement_error, euler_step, init_system, simulate, InteractionMode, ParticleSystemState, SimConfig, Spike,
    Trajectory,
};
pub use torus::{mod2, mollifier_scale_for, torus_dist, MollifierFamily, TorusPoint};
