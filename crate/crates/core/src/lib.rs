//! Adoption paths: fitting cumulative adoption curves, scoring entities
//! against their region with the Adoption over Time Index, and grouping them
//! into eight adoption paths.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so NaN fails
// the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archetypes;
pub mod ati;
pub mod curvefit;
pub mod dataset;
pub mod error;
pub mod features;
pub mod format;
pub mod pipeline;
pub mod quad;
pub mod stats;
pub mod transitions;
pub mod typology;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/input.md")]
    mod input {}
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/index.md")]
    mod index {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/typology.md")]
    mod typology {}
    #[doc = include_str!("../../../book/src/transitions.md")]
    mod transitions {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
