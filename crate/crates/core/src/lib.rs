//! Physics-informed neural network solver for the viscous Burgers equation
//!
//! ```text
//! u_t - nu * Δu + u * Σ_i ∂u/∂x_i = f    in Ω × (0, T)
//! ```
//!
//! together with its stationary counterpart. The crate is organised bottom-up:
//!
//! - [`net`]: dense tanh/sigmoid perceptrons with an exact derivative engine that
//!   propagates values, input Jacobians and the diagonal of the input Hessian, and
//!   differentiates any loss built from those quantities back to the weights.
//! - [`pde`]: Burgers residuals, manufactured forcings, the two benchmark problems
//!   and the composite collocation loss.
//! - [`sample`]: collocation sets and residual-based adaptive refinement.
//! - [`optim`]: Adam, L-BFGS with a strong-Wolfe line search, and the two-stage
//!   training pipeline.
//! - [`metrics`]: midpoint quadrature grids and L², H¹ and residual error norms.

pub mod error;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod pde;
pub mod sample;

pub use error::{Error, Result};
pub use metrics::{ErrorReport, QuadratureGrid};
pub use net::{Activation, DerivativeBundle, InputLayout, MlpParams, ParamGradient};
pub use optim::{AdamState, LbfgsConfig, LbfgsState, Schedule};
pub use pde::{BoundaryKind, LossBreakdown, LossWeights, ProblemSpec};
pub use sample::{CollocationSet, RarConfig};

/// Deterministic seed derivation for independent random streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
