//! Stroke-averaged flight dynamics and LQR control of an insect-scale
//! flapping-wing robot.
//!
//! The crate is `no_std` (with `alloc`) so the model, the gain synthesis and the
//! controller can run on a microcontroller as well as on the desktop. File
//! formats, configuration and the command-line front end live in the `flapper`
//! crate.
//!
//! Module map:
//!
//! * [`kinematics`]: 321 Euler angles, quaternions, rotation matrices.
//! * [`vehicle`]: measured parameters, actuator-to-wrench maps, drive signal.
//! * [`dynamics`]: body-frame equations of motion and an RK4 integrator.
//! * [`lqr`] and [`riccati`]: hover linearization and the CARE-based gain.
//! * [`control`]: state assembly, the control step and reference generators.
//! * [`sim`]: closed-loop scenario runner and run metrics.
//! * [`pipeline`]: motion-capture reconstruction, model validation,
//!   body-offset estimation and flight-envelope statistics.

#![no_std]
// `!(x > y)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod control;
pub mod dynamics;
mod error;
pub mod kinematics;
pub mod linalg;
pub mod lqr;
pub mod pipeline;
pub mod riccati;
pub mod sim;
pub mod vehicle;

pub use error::{Error, Result};

pub use nalgebra::{Matrix3, Vector3};
