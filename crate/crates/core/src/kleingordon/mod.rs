//! The nonlinear Klein-Gordon field `phi_tt = lap phi - m^2 phi - V'(phi)`.
//!
//! [`generators`] builds the Poincare generators in vector-field form
//! (formal series) and in Hamiltonian form (functionals); [`flow`] integrates
//! the interacting dynamics in mode space; [`scattering`] assembles numerical
//! wave and scattering operators from the two flows.

pub mod flow;
pub mod generators;
pub mod potential;
pub mod scattering;

pub use flow::{free_flow, Propagator};
pub use generators::{build_free_rep, build_interaction, GeneratorSet};
pub use potential::{Potential, PotentialSpec};
pub use scattering::{Direction, SmallDataBall, WaveOperatorEstimate};
