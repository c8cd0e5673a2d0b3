//! Finite element spaces, quadrature and assembly.

pub mod assembly;
pub mod dirichlet;
pub mod operators;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_convection, assemble_divergence, convection_action, assemble_load, assemble_mass, assemble_stiffness, error_norms,
    h1_seminorm, l2_norm, pressure_mean_weights, trilinear_b, ScalarPattern,
};
pub use dirichlet::{apply_dirichlet, DirichletMap};
pub use operators::DiscreteOperators;
pub use quadrature::TriangleRule;
pub use space::{Basis, ElementGeometry, ElementKind, PressureSpace, VelocitySpace};
pub use sparse::CsrMatrix;
