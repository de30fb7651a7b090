//! Simulated quantum computing benchmarks: quantum volume, mirror circuits,
//! CLOPS, application circuits, and the optimizations that may or may not
//! be applied to them.

pub mod apps;
pub mod circuit;
pub mod clops;
pub mod error;
pub(crate) mod fit;
pub mod linalg;
pub mod mirror;
pub mod opt;
pub mod qv;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/circuits.md")]
    mod circuits {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/quantum-volume.md")]
    mod quantum_volume {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/mirror.md")]
    mod mirror {}
    #[doc = include_str!("../../../book/src/clops.md")]
    mod clops {}
    #[doc = include_str!("../../../book/src/applications.md")]
    mod applications {}
    #[doc = include_str!("../../../book/src/optimizations.md")]
    mod optimizations {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
