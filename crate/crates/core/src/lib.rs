//! Exact and numerical tools for FAMED ordered triangulations: face/edge data,
//! Neumann-Zagier reduction, the state-integral potential and its asymptotics.

pub mod asymptotics;
pub mod error;
pub mod exact_linalg;
pub mod face_kernel;
pub mod famed_check;
pub mod fixtures;
pub mod geometry;
pub mod nz_data;
pub mod one_loop;
pub mod potential;
pub mod special_fn;
pub mod triangulation;

pub use error::{FamedError, Result};
