//! Minimum-energy control of linear network dynamics `ẋ = Ax + Bu`.
//!
//! The crate computes controllability Gramians, optimal inputs and trajectories,
//! measures each trajectory by its length `L = ∫‖ẋ‖dt` and radius
//! `R = max‖x(t) − x₀‖`, and runs the ensemble experiments that relate these to
//! the control distance, the initial-state norm, the control horizon, the number
//! of driver nodes and the stability class of the network.

pub mod error;
pub mod gramian;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod trajectory;

pub use error::{Error, Result};
