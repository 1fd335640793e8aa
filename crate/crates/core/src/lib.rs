//! Preference-guided score distillation over analytic diffusion oracles.
//!
//! The building blocks, bottom-up:
//!
//! * [`schedule`]: variance-preserving noise schedule and `w(t)`.
//! * [`oracle`]: closed-form noise prediction for a labeled Gaussian
//!   mixture, with classifier-free guidance.
//! * [`representation`]: direct vectors and 2D splat fields with exact
//!   render adjoints.
//! * [`ranker`]: reward functions, the LMM yes/no protocol and the
//!   pairwise verdict.
//! * [`engine`]: pair construction, the piecewise preference gradient,
//!   the SDS baseline and the optimization loop.

pub mod engine;
pub mod error;
pub mod imaging;
pub mod optim;
pub mod oracle;
pub mod ranker;
pub mod representation;
pub mod schedule;

pub use error::{AnnotationError, Error, Result};
