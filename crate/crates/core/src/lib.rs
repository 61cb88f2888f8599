//! Majority-rule opinion dynamics: expectation polynomials and their
//! fixed points, Monte Carlo samplers, exact finite-n Markov chains and
//! desk-scale experiment drivers.

pub mod error;
pub mod exact;
pub mod experiments;
pub mod model;
pub mod output;
pub mod process;
pub mod rng;
pub mod rooms;

pub use error::{GalamError, Result};
pub use rooms::{RoomConfig, VariantSpec};
