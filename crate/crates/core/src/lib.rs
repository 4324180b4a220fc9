//! Simulation and duality certification for systems of nonlocal
//! aggregation-diffusion equations
//!
//! ```text
//! d_t mu^i = div(mu^i K^i[mu]) + D^i Lap mu^i,   K^i[mu] = grad sum_j W_ij * mu^j
//! ```
//!
//! A computed trajectory is paired with solutions of the backward linear
//! problem `d_s psi = E_{T-s} . grad psi + D Lap psi` (with `E = -K[mu]`), and
//! the pairing `int psi_0 dmu_T = int psi_T dmu_0` is checked for a bank of
//! Lipschitz probes.

pub mod error;
pub mod fixed_point;
pub mod io;
pub mod dual_solver;
pub mod measures;
pub mod primal_solver;
pub mod scenarios;
pub mod trajectory;
pub mod velocity;

pub use error::{Error, Result};
pub use trajectory::Trajectory;
