//! Rigid bodies moving in a planar ideal fluid with circulation.
//!
//! The crate covers boundary-element potential flow around a rigid body,
//! the Lie-Poisson picture on se(2)* and its oscillator extension, and
//! integrators for the reduced equations of motion.

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod potential;
pub mod verify;

pub use error::{Error, Result};
