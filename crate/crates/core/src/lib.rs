//! Deployment optimization for a base station served through two cascaded
//! active (amplifying) reflecting surfaces.
//!
//! The crate builds the line-of-sight channels of the double-reflection link,
//! synthesizes the optimal beam and reflections, and then alternates between
//! the element split and the horizontal placement of the two surfaces to
//! maximize the minimum user rate. Every closed form is checked against a
//! literal matrix evaluation of the received SNR.

pub mod allocation;
pub mod ao;
pub mod cli;
pub mod closed_form;
pub mod error;
pub mod model;
pub mod placement;
pub mod scaling;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
