//! ε-resolved reference model: bulk Stokes flow, a thin perforated layer
//! with scaled fluid and elastic solid, coupled monolithically.

mod config;
mod mesh;
mod report;
mod system;

pub use config::{InitialForcing, MicroConfig};
pub use mesh::{build_micro_mesh, MeshFacet, MicroMesh, Region};
pub use report::{apriori_report, AprioriReport, StateNorms};
pub use system::{run_micro, MicroLayout, MicroRun, MicroSeriesRow, MicroState, MicroStepReport, MicroSystem};
