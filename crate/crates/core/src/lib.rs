//! Verification laboratory for overdetermined infinity-Laplacian problems on
//! convex planar domains.
//!
//! The library is organized around the characterization chain
//!
//! > stadium-like domain ⇔ overdetermined (Serrin) problem solvable
//! > ⇔ constant P-function ⇔ C^{1,1} regularity of the solution
//!
//! for the equations −Δ∞u = 1 and −Δ∞ᴺu = 1 with zero Dirichlet data:
//!
//! * [`geometry`] — exact convex domains, signed distance, inradius, cut
//!   locus, high ridge, parallel bodies, level-set domains.
//! * [`infinity_ops`] — the four infinity-Laplace operators on second-order
//!   jets and a deterministic viscosity-solution falsifier.
//! * [`webfuncs`] — closed-form web functions `g ∘ d_∂Ω` (the exact-solution
//!   oracles), Serrin constants, and supersolution certification.
//! * [`solver`] — a wide-stencil monotone finite-difference solver for both
//!   Dirichlet problems.
//! * [`diagnostics`] — P-functions and their bounds, gradient flows,
//!   sup-convolutions, level-set Serrin scans, and a C^{1,1} proxy.
//! * [`harness`] — scenario JSON, CSV/JSON reports, derived-threshold
//!   fixtures, and the statement-to-diagnostic map.
//!
//! Sign convention: distance oracles are signed, **positive inside** the
//! domain, so the inradius is the maximum of the distance field.

pub mod diagnostics;
pub mod geometry;
pub mod harness;
pub mod infinity_ops;
pub mod solver;
pub mod webfuncs;

/// The profile constant c₀ = 3^{4/3}/4 of the non-normalized web function.
pub const C0: f64 = 1.0816871777305562; // 3^(4/3) / 4
