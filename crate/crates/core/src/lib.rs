//! Finite-difference solvers for fully nonlinear elliptic equations `f(λ(A)) = h`
//! whose operator is a symmetric function of the eigenvalues of a Hermitian matrix,
//! with the supporting geometry: defining-function metrics, `(n−1,n−1)` forms and
//! the real Monge-Ampère equations of Hessian geometry.

pub mod bounds;
pub mod discretize;
pub mod eigen_ops;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod grid;
pub mod hessian_affine;
pub mod linalg;
pub mod par;
pub mod scenario;
pub mod solver;
pub mod sparse;
pub mod suites;

pub use eigen_ops::{Cone, Family, OperatorSpec};
pub use error::{Category, Error, Result};
pub use grid::{GridDomain, HermitianField, PointClass, ScalarField};
pub use solver::{HuSpec, Problem, Rhs, SolveReport, SolverConfig};
