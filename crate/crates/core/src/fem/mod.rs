//! Finite element spaces, functions, transfer between nested meshes, and
//! assembly of the forms used by the scheme.

mod assembly;
mod function;
mod space;
mod transfer;

pub use assembly::{assemble_matrix, assemble_vector, FormAssembler, MatrixKind, VectorKind};
pub use function::{analytic, Analytic, FeFunction, NormKind, ScalarField, VectorField};
pub use space::{basis_gradients, basis_values, FeSpace, Family, Geometry};
pub use transfer::prolongate;
