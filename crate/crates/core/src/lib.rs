//! Certified restoration of damaged and noisy images.
//!
//! The restoration minimizes
//!
//! ```text
//! I[u] = Σ Φ_μ(|∇u|) + (λ/ζ) Σ_{pixels ∉ D} |u - f|^ζ
//! ```
//!
//! where `Φ_μ` is a smooth convex integrand with linear growth and `D` is the
//! set of damaged pixels. The minimizer is approached through the strictly
//! convex problems obtained by adding `δ/2 |∇u|²` and letting `δ ↓ 0`, and
//! every result carries a duality-gap certificate built from the dual field
//! `τ = DΦ(∇u)`.
//!
//! All numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the oracle, the CLI and the
//! certificates at tight tolerances use.

pub mod cli;
pub mod density;
pub mod dual;
pub mod energy;
mod error;
pub mod grid;
pub mod netpbm;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use density::DensityParams;
pub use dual::{certify, dual_from_primal, dual_value, known_data_bound, DualCertificate};
pub use energy::{euler_residual, fidelity, primal_energy, ModelParams};
pub use error::{Error, Result};
pub use grid::{clamp_to_ball, divergence, gradient, DamageMask, DualField, GradientField, ImageField};
pub use scalar::Scalar;
pub use solver::{
    check_max_principle, continuation, minimize_smooth, ConvergenceRecord, InnerStatus,
    MaxPrincipleCheck, Restoration, SolverConfig,
};

pub type Image = ImageField<f64>;
pub type Image32 = ImageField<f32>;
pub type Gradient = GradientField<f64>;
pub type Gradient32 = GradientField<f32>;
pub type Density = DensityParams<f64>;
pub type Density32 = DensityParams<f32>;
pub type Model = ModelParams<f64>;
pub type Model32 = ModelParams<f32>;
pub type Config = SolverConfig<f64>;
pub type Config32 = SolverConfig<f32>;
pub type Certificate = DualCertificate<f64>;
