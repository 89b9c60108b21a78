//! Deformation quantization of a truncated real scalar field.
//!
//! The crate works on the finite phase space of Fourier amplitudes
//! `(abar_i, a_i)` of a scalar field in a periodic box. On top of it sit
//!
//! * [`functional`]: polynomial functionals, the Poisson bracket and the normal
//!   star-product with its cochains, brackets and star-exponentials;
//! * [`formal`]: formal series of symmetric multilinear maps, their
//!   composition, vector-field bracket and inversion, nonlinear Lie-algebra
//!   representations and order-by-order linearization;
//! * [`kleingordon`]: the Poincare generators of the (nonlinear) Klein-Gordon
//!   field, a spectral split-step integrator and numerical wave operators;
//! * [`pushforward`]: star-products transported by a linearizing map and the
//!   star-power identity for the interacting Hamiltonian.

pub mod error;
mod fft;
pub mod formal;
pub mod functional;
pub mod kleingordon;
pub mod modes;
pub mod poly;
pub mod pushforward;

pub use error::{Error, Result};
pub use formal::{FormalSeries, GeneratorLabel, NonlinearRep};
pub use functional::{FormalSeriesInHbar, LaurentSeries, PolyFunctional, Slot};
pub use modes::{decompose, from_pm, reconstruct, to_pm, CauchyData, GridSpec, ModeGrid, ModeVector};
pub use poly::{Monomial, Poly};
