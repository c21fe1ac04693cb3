//! Probabilistic simulation of quantum channels from coherent resources.
//!
//! The crate computes how well a target channel can be realized, with some
//! success probability, by a free operation (MIO or DIO) that consumes a
//! coherent resource state. The optimizations are semidefinite programs,
//! solved by the built-in interior-point solver in [`sdp`], and many of
//! them are cross-checked against closed forms.

pub mod dio;
pub mod error;
pub mod io;
pub mod mio;
pub mod quantum;
pub mod robustness;
pub mod sdp;

pub use error::{Error, Result};

/// The book's chapters, compiled so that their snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states-and-channels.md")]
    mod states_and_channels {}
    #[doc = include_str!("../../../book/src/sdp.md")]
    mod sdp {}
    #[doc = include_str!("../../../book/src/robustness.md")]
    mod robustness {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/dio.md")]
    mod dio {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
