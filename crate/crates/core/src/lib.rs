//! Fully coupled elastoplastic ductile-damage model whose flow stress and
//! damage growth are corrected by stress triaxiality and the Lode angle.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensors`]: symmetric tensor algebra, invariants, Lode geometry and the
//!   stress gradients used by the flow rule.
//! - [`material`]: hardening, corrected yield stress, the stress-state damage
//!   parameter `h`, free-energy derived stress and energy release rate, and
//!   the analytic derivatives of the yield function.
//! - [`integrator`]: strain-driven update of one material point (elastic
//!   predictor, implicit return mapping, consistent tangent).
//! - [`drivers`]: mixed-control load paths, yield-surface and damage-locus
//!   sweeps, curve fitting.

pub mod drivers;
pub mod error;
pub mod integrator;
pub mod material;
pub mod tensors;

pub use error::{Error, Result};
pub use integrator::{MaterialState, StepResult, Tangent};
pub use material::{LodeWeight, MaterialParams};
pub use tensors::{StressState, SymTensor};
