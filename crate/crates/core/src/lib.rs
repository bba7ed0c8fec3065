//! Weighted floating bodies and floating functions with their affine surface
//! area limits.

pub mod asa;
pub mod config;
pub mod convergence;
pub mod error;
pub mod floating_body;
pub mod floating_function;
pub mod function;
pub mod geometry;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod sconcave;
pub mod weights;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/floating-bodies.md")]
    pub struct FloatingBodies;
    #[doc = include_str!("../../../book/src/floating-functions.md")]
    pub struct FloatingFunctions;
    #[doc = include_str!("../../../book/src/s-concave.md")]
    pub struct SConcave;
    #[doc = include_str!("../../../book/src/affine-surface-area.md")]
    pub struct AffineSurfaceArea;
    #[doc = include_str!("../../../book/src/convergence.md")]
    pub struct Convergence;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
