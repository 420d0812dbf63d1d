//! Numerical workbench for Morse complexes of Lagrange-multiplier gradient
//! flows on the flat 2-torus.
//!
//! Given two trigonometric-polynomial fields f and mu on T^2, the crate
//! studies the negative gradient flow of F(x, eta) = f(x) + eta * mu(x) on
//! T^2 x R under the metric that rescales the eta direction by 1/lambda^2:
//!
//! ```text
//! x'   = -(grad f + eta * grad mu)
//! eta' = -lambda^2 * mu(x)
//! ```
//!
//! It locates the critical points of F, traces the slow manifold
//! {grad f + eta grad mu = 0} with its folds, counts connecting orbits mod 2
//! across lambda, enumerates the fast-slow orbit sequences of the lambda -> 0
//! degeneration, and assembles the GF(2) chain complexes whose comparison
//! (small lambda vs. singular, large lambda vs. level-set-restricted, Betti
//! invariance in between) the verification suite exercises.

pub mod critical;
pub mod field;
pub mod flow;
pub mod foldtest;
pub mod homology;
pub mod linalg;
pub mod orbits;
pub mod pipeline;
pub mod slow;

pub use critical::{AssumptionReport, CritPointF, SlowType};
pub use field::{ExtendedPoint, FieldTerm, Problem, Tolerances, TorusField};
pub use flow::{Budget, Terminal, Trajectory};
pub use homology::{LevelSetGeometry, Z2ChainComplex, Z2Matrix};
pub use orbits::{Catalog, ConnectingOrbit, FastSlowOrbitSeq};
pub use pipeline::Workspace;
pub use slow::{FoldPoint, SlowBranch};
