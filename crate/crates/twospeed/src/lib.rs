//! Forward simulation, slow-wave filtering and linearized inversion for the
//! 1D two-speed hyperbolic system C U_tt - U_xx - A U_x - B U = 0 with an
//! impulsive boundary condition U(0, t) = delta(t) I.
//!
//! The forward problem is solved through a progressing-wave expansion: the
//! singular parts travel along t = lambda x and t = mu x with known weights,
//! and the smooth remainders satisfy a characteristic-transmission Goursat
//! problem solved by Picard iteration on an integral equation. On top of the
//! forward map sit the slow-wave filter (a second-kind Volterra equation)
//! and the Born inversion of boundary traces into coefficient perturbations.

pub mod chardata;
pub mod error;
mod field;
pub mod forward;
pub mod goursat;
pub mod inversion;
pub mod model;
pub mod numerics;
pub mod slowwave;

pub mod acceptance;
pub mod config;
pub mod output;

pub use error::{Result, TwoSpeedError};
