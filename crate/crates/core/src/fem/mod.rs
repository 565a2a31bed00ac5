//! Lagrange finite elements on triangle meshes.

pub mod element;
pub mod field;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod system;

pub use field::{boundary_dof_values, BoxRegion, Field, NormKind, TraceFunction, TraceSegment};
pub use space::FeSpace;
pub use sparse::CsrMatrix;
pub use system::{
    apply_bcs, assemble_laplace, solve, solve_with, BcSpec, BoundaryCondition, LinearSolver, ScalarFn,
    SolveMethod, SparseSystem,
};
