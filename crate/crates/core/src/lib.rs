//! Dual residual detection for networked control loops.
//!
//! The controller side runs an observer-based residual generator that flags
//! faults; the plant side runs a twin of the controller that flags integrity
//! attacks hiding in the plant's kernel. Together they separate faults from
//! attacks. The crate also covers coprime factorization and Youla
//! parameterization of the loop, the attack and fault generators used in
//! simulation, and gain optimization for attack detectability.

pub mod adversary;
pub mod detectors;
pub mod error;
pub mod linalg;
pub mod lti;
pub mod noise;
pub mod optimizer;
pub mod synthesis;

pub use error::{Error, Result};
pub use lti::{spectral_radius, zero_direction, SimState, StateSpaceModel};
pub use noise::{draw_gaussian, NoiseChannel, NoiseGenerator, NoiseSpec};
