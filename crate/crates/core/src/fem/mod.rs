//! Triangulated surface meshes and the constrained Neumann
//! Laplace–Beltrami solver. The meshes live in the global isothermal
//! coordinates of the surface, so the P1 stiffness matrix is the plain
//! Euclidean one (conformal invariance of the Dirichlet form) and the
//! metric enters only through the `e^{phi}` weight in the mass forms.

mod assemble;
mod band;
mod field;
mod mesh;

pub use assemble::{assemble, woodbury_solve, Csr, LoadQuadrature, NeumannSystem};
pub use band::{BandFactor, BandLayout};
pub use field::DiscreteField;
pub use mesh::{build_mesh, build_mesh_graded, GradingSpec, TriMesh};
