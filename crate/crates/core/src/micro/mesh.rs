//! Conforming quadrilateral mesh of the ε-resolved slice
//! `(0,L) × (−H−ε, H+ε)`.

use serde::Serialize;

use super::config::MicroConfig;
use crate::error::Result;
use crate::fem::slice::{graded, SliceGrid};
use crate::geometry::MicrostructureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    BulkMinus,
    LayerFluid,
    LayerSolid,
    BulkPlus,
}

impl Region {
    pub fn is_layer(self) -> bool {
        matches!(self, Region::LayerFluid | Region::LayerSolid)
    }

    pub fn is_fluid(self) -> bool {
        self != Region::LayerSolid
    }
}

/// An element edge shared by two elements; `normal_axis` 0 for vertical
/// edges, 1 for horizontal ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshFacet {
    pub elements: [usize; 2],
    pub normal_axis: usize,
}

#[derive(Debug, Clone)]
pub struct MicroMesh {
    pub grid: SliceGrid,
    pub epsilon: f64,
    pub n_cells: usize,
    /// Layer cell at mesh resolution.
    pub cell: MicrostructureSpec,
    /// Element rows `[bulk_nz, bulk_nz + layer_nz)` form the layer.
    pub bulk_nz: usize,
    pub layer_nz: usize,
    pub regions: Vec<Region>,
    /// Cell voxel of every layer element.
    pub voxel: Vec<Option<usize>>,
    pub gamma: Vec<MeshFacet>,
    pub s_plus: Vec<MeshFacet>,
    pub s_minus: Vec<MeshFacet>,
}

pub fn build_micro_mesh(cfg: &MicroConfig) -> Result<MicroMesh> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let eps = cfg.epsilon();
    let cell = cfg.mesh_cell()?;
    let [rx, rz] = cfg.cell_resolution;
    let n_cells = cfg.n_cells();
    let nx = n_cells * rx;
    let xs: Vec<f64> = (0..=nx).map(|i| cfg.l * i as f64 / nx as f64).collect();

    let h_layer = 2.0 * eps / rz as f64;
    let upper = graded(eps, cfg.h + eps, cfg.nz, h_layer);
    let mut zs: Vec<f64> = upper.iter().rev().map(|z| -z).collect();
    zs.pop();
    zs.extend((0..rz).map(|j| -eps + h_layer * j as f64));
    zs.extend(upper);
    let grid = SliceGrid::new(xs, zs);

    let bulk_nz = cfg.nz;
    let mut regions = Vec::with_capacity(grid.n_elements());
    let mut voxel = Vec::with_capacity(grid.n_elements());
    for ex in 0..grid.nx() {
        for ez in 0..grid.nz() {
            if ez < bulk_nz {
                regions.push(Region::BulkMinus);
                voxel.push(None);
            } else if ez >= bulk_nz + rz {
                regions.push(Region::BulkPlus);
                voxel.push(None);
            } else {
                let v = (ex % rx) * rz + (ez - bulk_nz);
                regions.push(if cell.indicator[v] { Region::LayerSolid } else { Region::LayerFluid });
                voxel.push(Some(v));
            }
        }
    }

    let (mut gamma, mut s_plus, mut s_minus) = (Vec::new(), Vec::new(), Vec::new());
    for ex in 0..grid.nx() {
        for ez in 0..grid.nz() {
            let e = grid.element(ex, ez);
            let mut neighbours = Vec::new();
            if ex + 1 < grid.nx() {
                neighbours.push((grid.element(ex + 1, ez), 0));
            }
            if ez + 1 < grid.nz() {
                neighbours.push((grid.element(ex, ez + 1), 1));
            }
            for (f, axis) in neighbours {
                let facet = MeshFacet {
                    elements: [e, f],
                    normal_axis: axis,
                };
                match (regions[e], regions[f]) {
                    (Region::BulkMinus, r) if r.is_layer() => s_minus.push(facet),
                    (r, Region::BulkPlus) if r.is_layer() => s_plus.push(facet),
                    (Region::LayerFluid, Region::LayerSolid) | (Region::LayerSolid, Region::LayerFluid) => {
                        gamma.push(facet)
                    }
                    _ => {}
                }
            }
        }
    }

    Ok(MicroMesh {
        grid,
        epsilon: eps,
        n_cells,
        cell,
        bulk_nz,
        layer_nz: rz,
        regions,
        voxel,
        gamma,
        s_plus,
        s_minus,
    })
}

impl MicroMesh {
    pub fn region(&self, ex: usize, ez: usize) -> Region {
        self.regions[self.grid.element(ex, ez)]
    }

    pub fn count(&self, r: Region) -> usize {
        self.regions.iter().filter(|&&q| q == r).count()
    }

    /// Macro coordinate of a bulk point: `z ∓ ε`.
    pub fn macro_z(&self, z: f64) -> f64 {
        if z >= 0.0 {
            z - self.epsilon
        } else {
            z + self.epsilon
        }
    }
}
