//! Normal-form engine and periodic-orbit continuation for near-resonant
//! Hamiltonian systems.
//!
//! The crate normalizes a perturbed Hamiltonian around a completely resonant
//! maximal torus to finite order in the perturbation parameter, extracts the
//! candidate phase shifts that can survive as periodic orbits (including
//! degenerate one-parameter families), and continues them to true orbits of
//! the original system with a certified Newton–Kantorovich shooting method.
//!
//! The layers, bottom to top:
//!
//! * [`series`] — sparse Fourier–Taylor algebra: homogeneous polynomials in
//!   the actions times trigonometric polynomials in dynamic and parameter
//!   angles, with Poisson brackets, weighted norms and averaging.
//! * [`lie`] — Lie-series transforms built on the bracket, plus the exact
//!   action-translation operator.
//! * [`chart`] — resonant action-angle charts (unimodular angle changes) and
//!   lattice model expansion around the resonant torus.
//! * [`normal_form`] — the two-stage normalization step, its iteration, and
//!   the candidate system.
//! * [`candidates`] — roots and one-parameter families of the candidate
//!   system on the torus, with kernel diagnostics.
//! * [`flow`] / [`shooting`] — numeric integration of the flow with
//!   variational equations, the period map and its Jacobian blocks, the
//!   bifurcation γ criterion, and certified continuation.
//! * [`estimates`] — the combinatorial sequences and norm inequalities that
//!   bound the normalization, runnable as checks against actual runs.
//!
//! Series arithmetic is generic over the scalar (anything satisfying
//! [`Scalar`], in practice `f32` or `f64`); the crate-root aliases fix the
//! common `f64` instantiation used by the numeric layers.

pub mod candidates;
pub mod chart;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod shooting;
pub mod expansion;
pub mod lie;
pub mod normal_form;
pub mod scalar;
pub mod series;

pub use error::CoreError;
pub use scalar::Scalar;

/// `f64` Fourier–Taylor series, the instantiation used by the numeric layers.
pub type Series = series::FtSeries<f64>;

/// `f64` Hamiltonian expansion keyed by (grade, ε-order).
pub type Expansion = expansion::EpsExpansion<f64>;
