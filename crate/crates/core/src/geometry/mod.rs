//! Reference cell description, voxel mesh and topology checks.

pub mod mesh;
pub mod spec;
pub mod validate;

pub use mesh::{build_cell_mesh, CellMesh, DofMap, InterfaceFacet};
pub use spec::{Material, MicrostructureSpec, VoxelGrid};
pub use validate::{validate_geometry, ValidationReport};
