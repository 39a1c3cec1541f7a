//! The guide's chapters, included so that `cargo test` runs their listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/ball.md")]
pub mod ball {}
#[doc = include_str!("../../../book/src/eigensolver.md")]
pub mod eigensolver {}
#[doc = include_str!("../../../book/src/asymmetry.md")]
pub mod asymmetry {}
#[doc = include_str!("../../../book/src/surgery.md")]
pub mod surgery {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
