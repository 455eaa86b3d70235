//! Simulation and analysis toolkit for an electromagnetic-suspension (EMS)
//! maglev levitation loop.
//!
//! The crate is organised bottom-up:
//!
//! - [`numcore`]: polynomials, transfer functions, state-space realizations
//!   and root finding.
//! - [`plant`]: the nonlinear EMS plant, its equilibrium and linearization.
//! - [`controllers`]: PID, Mamdani fuzzy and normalized-MIT-rule MRAS
//!   control laws behind a uniform step-wise interface.
//! - [`sim`]: the fixed-step closed-loop simulation engine.
//! - [`analysis`]: pole/stability checks, root locus, step-response metrics
//!   and the force-current curve.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controllers;
mod error;
pub mod numcore;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
