//! Bubbles, curvature correctors and reduced-energy landscapes for a
//! linear-interior / nonlinear-Neumann boundary problem on the half-space.
//!
//! The crate evaluates, at desk scale, every explicit quantity a blow-up
//! construction for the slightly supercritical boundary problem rests on:
//!
//! * the closed-form standard bubble, its rescalings and the kernel of the
//!   linearized boundary equation ([`bubble`]);
//! * curvature data with the full Riemann symmetry set, the polynomial
//!   inverse-metric expansion in boundary-adapted coordinates and the
//!   corrector right-hand side with its sector reduction ([`curvature`]);
//! * a deterministic finite-difference solver for the corrector equation on
//!   the half-space, reduced to 2D radial problems with a Robin boundary row
//!   ([`corrector`]);
//! * the expansion constants of the reduced energy, the curvature functional
//!   and the λ-landscape with its closed-form maximizer ([`energy`]);
//! * remainder-norm scaling studies with exponent fits and log-correction
//!   detection ([`asymptotics`]);
//! * a CLI with reproducible, content-hashed outputs ([`cli`]).
//!
//! See the guide under `book/` for worked examples; its code snippets are
//! compiled and run as doc-tests through [`guide`].

pub mod asymptotics;
pub mod bubble;
pub mod cache;
pub mod cli;
pub mod config;
pub mod corrector;
pub mod curvature;
pub mod energy;
pub mod error;
pub mod fit;
pub mod guide;
pub mod hash;
pub mod quad;
pub mod report;
pub mod special;

pub use bubble::{Dimension, HalfSpacePoint};
pub use curvature::CurvatureData;
pub use error::{Error, Result};

/// Version string embedded in every emitted file.
pub const TOOL_VERSION: &str = concat!("halfbubble ", env!("CARGO_PKG_VERSION"));
