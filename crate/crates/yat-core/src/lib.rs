//! Kernel algebra for the rational alignment ("Yat") kernel
//! `k_{b,eps}(w, x) = (w'x + b)^2 / (||x - w||^2 + eps)` and its radial
//! companions: pointwise evaluation and gradients, Gram/RKHS-norm machinery,
//! exact bias finite-difference identities, the spherical spectral
//! decomposition, learning-theoretic bound calculators, deep stacks with
//! pullback bookkeeping, and Monte-Carlo NTK estimation.

// `!(x > 0.0)`-style guards deliberately reject NaN along with the
// nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod farfield;
pub mod gram;
pub mod kernel;
pub mod ntk;
pub mod rng;
pub mod special;
pub mod spectrum;
pub mod stack;

pub use error::{Result, YatError};
pub use gram::{Expansion, GramMatrix, PsdReport};
pub use kernel::{AtomRef, KernelFamily, KernelParams};
pub use ntk::NtkConfig;
pub use spectrum::{SpectrumResult, ZonalKernel};
pub use stack::{LayerSpec, StackSpec};
