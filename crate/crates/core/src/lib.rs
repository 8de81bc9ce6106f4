//! Contact-guided generation of multi-finger hand poses for nonprehensile
//! pushing and pulling: energy-based pose optimization, quasi-static push
//! validation, basis-point-set object encoding, a conditional diffusion
//! generator over pose vectors, and analytical ranking with multi-step
//! push planning.

pub mod error;
pub mod geometry;
pub mod energy;
pub mod hand;
pub mod object;
pub mod optimizer;
pub mod push_sim;
pub mod bps;
pub mod generator;
pub mod planner;

pub use error::{Error, Result};
