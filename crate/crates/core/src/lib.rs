//! Computational toolkit for symplectic spinors on almost hermitian surfaces
//! and manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`] – truncated Hermite/Fock realization of one fiber of the
//!   symplectic spinor bundle (Clifford multiplication, `H^J`, ladders).
//! * [`unrep`] – the `u(n)` defining representation, its image `r_Q` on the
//!   fiber and the closed-form trace identities.
//! * [`geometry`] – unitary frames, hermitian connections, torsion and
//!   curvature invariants on built-in models.
//! * [`heat`] – Gilkey heat coefficients and the canonical-form assembly for
//!   the restricted Laplacians `P_l`.
//! * [`spectrum`] – exact CP¹ spectrum, certified heat-trace sums and an exact
//!   rational Euler–Maclaurin engine.
//! * [`distance`] – discretized Dirac operators on surface meshes and the
//!   spectral-distance solvers.

pub mod distance;
pub mod error;
pub mod fock;
pub mod geometry;
pub mod heat;
pub mod rational;
pub mod spectrum;
pub mod unrep;

pub use error::{Error, Result};
