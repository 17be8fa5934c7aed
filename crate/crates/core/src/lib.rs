//! Extrema of integral functionals on generalized spheres of H¹(Ω).
//!
//! For an integrand `f` with Lipschitz gradient (constant `L`) and a
//! non-negative integrand `g` with `g(0) = 0` and gradient-Lipschitz constant
//! `ν < 2`, the functional `J(u) = ∫ f(u, ∇u)` restricted to the level set
//!
//! ```text
//! C_r = { u ∈ V : ‖u‖² + I(u) = r },   I(u) = ∫ g(u, ∇u)
//! ```
//!
//! has a unique global minimum (and maximum) for every `r` below a computable
//! threshold `δ`. This crate discretizes H¹(a, b) with P1 finite elements and
//!
//! - computes `δ` and `δ₁` from the minimizers of the convexified functionals
//!   `Φ + I ± ((2−ν)/L) J`, where `Φ = ‖·‖²`,
//! - solves the constrained problem through the Lagrangian
//!   `Ψ(u, λ) = J(u) + λ(‖u‖² + I(u) − r)` by bisection on the multiplier,
//! - certifies uniqueness a posteriori via `λ* > L/(2−ν)`.
//!
//! The [`verify`] module checks the inequalities behind those statements
//! numerically, and [`cli`] wires everything to a JSON-configured front end.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod functionals;
pub mod galerkin;
pub mod integrand;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use functionals::{assemble_derivative, eval_functional, fd_gradient_check, DualVector};
pub use galerkin::{Field, GalerkinSpace, QuadSample, Subspace};
pub use integrand::{Integrand, IntegrandKind, IntegrandSpec, Role};
pub use solvers::{
    Problem, SaddleResult, Sense, SolverSettings, InnerSolveResult, InnerStatus, DeltaReport,
    DeltaStatus, V0Report,
};
