//! Compiles the guide's Rust snippets as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/variance-bound.md")]
pub mod variance_bound {}

#[doc = include_str!("../../../book/src/rigidity.md")]
pub mod rigidity {}

#[doc = include_str!("../../../book/src/corridor.md")]
pub mod corridor {}

#[doc = include_str!("../../../book/src/magnetic.md")]
pub mod magnetic {}

#[doc = include_str!("../../../book/src/numerics.md")]
pub mod numerics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
