//! Numerical laboratory for magnetic geodesic flows on a closed genus-2 surface.

pub mod cli;
pub mod config;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod jet;
pub mod orbit;
pub mod report;
pub mod xray;

pub use error::{MaglabError, Result};
