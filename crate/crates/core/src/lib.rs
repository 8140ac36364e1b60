//! Kinematics and quasi-static locomotion for a sprawling quadruped with a
//! five-joint spine and a cable-driven tail.
//!
//! Frames follow the modified (proximal) Denavit-Hartenberg convention.
//! All lengths are millimeters and all angles radians; conversions to
//! degrees only happen at the command-line boundary.
//!
//! Kinematic base frames of the legs and the spine point z *down*
//! (x forward or outward, y to the right or forward). The body/world frame
//! used by the simulator is x forward, y left, z up with the ground at z = 0.

// `!(a <= b)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod body;
pub mod config;
pub mod dh;
pub mod error;
pub mod gait;
pub mod leg;
pub mod sim;
pub mod spine;
pub mod tail;

pub use error::{Error, Result};
