//! Zero-delay lossy coding of finite-state Markov sources over discrete
//! memoryless channels: belief filtering, two finite approximations of the
//! belief-state control problem, Q-learning over them, and evaluation.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod belief;
pub mod dobrushin;
pub mod error;
pub mod eval;
pub mod lattice;
pub mod matrix;
pub mod model;
pub mod policy;
pub mod presets;
pub mod qlearn;
pub mod quantizer;
pub mod rng;
pub mod stats;
pub mod window;

pub use error::{Error, Result};
