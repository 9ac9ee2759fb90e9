//! The guide chapters from `book/`, included here so `cargo test --doc`
//! compiles and runs every code snippet in the book. Each chapter becomes
//! one empty module carrying the chapter text as its documentation.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/bubbles.md")]
pub mod bubbles {}

#[doc = include_str!("../../../book/src/curvature.md")]
pub mod curvature_chapter {}

#[doc = include_str!("../../../book/src/corrector.md")]
pub mod corrector_chapter {}

#[doc = include_str!("../../../book/src/energy.md")]
pub mod energy_chapter {}

#[doc = include_str!("../../../book/src/scaling.md")]
pub mod scaling_chapter {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli_chapter {}

#[doc = include_str!("../../../book/src/conventions.md")]
pub mod conventions {}
