//! Structured voxel mesh of the reference cell with lateral periodic pairing.

use super::spec::{MicrostructureSpec, VoxelGrid};
use crate::error::{Error, Result};
use crate::fem::constraints::{ConstraintMap, MeanZeroFunctional};
use crate::fem::element::LagrangeBox;

/// A face shared by a solid and a fluid voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceFacet {
    pub solid: usize,
    pub fluid: usize,
    /// Axis of the facet normal.
    pub axis: usize,
    /// The two voxels touch only through a periodic lateral face.
    pub periodic: bool,
}

/// A face of voxel `element` on the top or bottom of the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub element: usize,
    pub nodes: Vec<usize>,
}

/// Nodes of the lateral face `y_axis = side` (side 0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LateralFace {
    pub axis: usize,
    pub side: usize,
    pub nodes: Vec<usize>,
}

/// Vector degrees of freedom on the nodes of an element subset.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub dim: usize,
    /// Mesh node of each local node.
    pub nodes: Vec<usize>,
    /// Local node of each mesh node, `usize::MAX` when absent.
    pub local: Vec<usize>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.dim
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        match self.local[node] {
            usize::MAX => None,
            l => Some(l * self.dim + component),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellMesh {
    pub spec: MicrostructureSpec,
    pub dim: usize,
    pub voxels: VoxelGrid,
    pub node_grid: VoxelGrid,
    pub nodes: Vec<[f64; 3]>,
    /// Corner nodes, axis 0 fastest (matches [`LagrangeBox`] local order).
    pub elements: Vec<Vec<usize>>,
    pub solid_elements: Vec<usize>,
    pub fluid_elements: Vec<usize>,
    pub gamma: Vec<InterfaceFacet>,
    pub s_plus: Vec<BoundaryFacet>,
    pub s_minus: Vec<BoundaryFacet>,
    pub lateral_faces: Vec<LateralFace>,
    /// Periodic representative of every node (itself off the lateral faces).
    pub periodic_master: Vec<usize>,
    pub solid_dofs: DofMap,
    pub fluid_dofs: DofMap,
}

pub fn build_cell_mesh(spec: &MicrostructureSpec) -> CellMesh {
    let dim = spec.dimension;
    let voxels = spec.grid();
    let node_grid = VoxelGrid::new(&spec.resolution.iter().map(|n| n + 1).collect::<Vec<_>>());
    let h = voxels.h();
    let last = dim - 1;

    let nodes: Vec<[f64; 3]> = (0..node_grid.n_voxels())
        .map(|p| {
            let c = node_grid.coords(p);
            let mut x = [0.0; 3];
            for k in 0..dim {
                x[k] = c[k] as f64 * h[k] - if k == last { 1.0 } else { 0.0 };
            }
            x
        })
        .collect();

    let corners = 1usize << dim;
    let elements: Vec<Vec<usize>> = (0..voxels.n_voxels())
        .map(|v| {
            let c = voxels.coords(v);
            (0..corners)
                .map(|a| {
                    let nc: Vec<usize> = (0..dim).map(|k| c[k] + ((a >> k) & 1)).collect();
                    node_grid.index(&nc)
                })
                .collect()
        })
        .collect();

    let solid_elements: Vec<usize> = (0..voxels.n_voxels()).filter(|&v| spec.indicator[v]).collect();
    let fluid_elements: Vec<usize> = (0..voxels.n_voxels()).filter(|&v| !spec.indicator[v]).collect();

    let mut gamma = Vec::new();
    for v in 0..voxels.n_voxels() {
        let c = voxels.coords(v);
        for axis in 0..dim {
            let n = spec.resolution[axis];
            let (next, periodic) = if c[axis] + 1 < n {
                (c[axis] + 1, false)
            } else if axis != last {
                (0, true)
            } else {
                continue;
            };
            let mut cn = c.clone();
            cn[axis] = next;
            let w = voxels.index(&cn);
            if w == v {
                continue;
            }
            match (spec.indicator[v], spec.indicator[w]) {
                (true, false) => gamma.push(InterfaceFacet {
                    solid: v,
                    fluid: w,
                    axis,
                    periodic,
                }),
                (false, true) => gamma.push(InterfaceFacet {
                    solid: w,
                    fluid: v,
                    axis,
                    periodic,
                }),
                _ => {}
            }
        }
    }

    let face_nodes = |v: usize, axis: usize, side: usize| -> Vec<usize> {
        (0..corners)
            .filter(|a| (a >> axis) & 1 == side)
            .map(|a| elements[v][a])
            .collect()
    };
    let mut s_plus = Vec::new();
    let mut s_minus = Vec::new();
    for v in 0..voxels.n_voxels() {
        let cz = voxels.coords(v)[last];
        if cz == 0 {
            s_minus.push(BoundaryFacet {
                element: v,
                nodes: face_nodes(v, last, 0),
            });
        }
        if cz + 1 == spec.resolution[last] {
            s_plus.push(BoundaryFacet {
                element: v,
                nodes: face_nodes(v, last, 1),
            });
        }
    }

    let mut lateral_faces = Vec::new();
    for axis in 0..last {
        for side in 0..2 {
            let target = side * spec.resolution[axis];
            let nodes = (0..node_grid.n_voxels())
                .filter(|&p| node_grid.coords(p)[axis] == target)
                .collect();
            lateral_faces.push(LateralFace { axis, side, nodes });
        }
    }

    let periodic_master: Vec<usize> = (0..node_grid.n_voxels())
        .map(|p| {
            let mut c = node_grid.coords(p);
            for k in 0..last {
                if c[k] == spec.resolution[k] {
                    c[k] = 0;
                }
            }
            node_grid.index(&c)
        })
        .collect();

    let dof_map = |subset: &[usize]| {
        let mut local = vec![usize::MAX; nodes.len()];
        for &e in subset {
            for &p in &elements[e] {
                local[p] = 0;
            }
        }
        let mut list = Vec::new();
        for (p, l) in local.iter_mut().enumerate() {
            if *l == 0 {
                *l = list.len();
                list.push(p);
            }
        }
        DofMap { dim, nodes: list, local }
    };
    let solid_dofs = dof_map(&solid_elements);
    let fluid_dofs = dof_map(&fluid_elements);

    CellMesh {
        spec: spec.clone(),
        dim,
        voxels,
        node_grid,
        nodes,
        elements,
        solid_elements,
        fluid_elements,
        gamma,
        s_plus,
        s_minus,
        lateral_faces,
        periodic_master,
        solid_dofs,
        fluid_dofs,
    }
}

impl CellMesh {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_box(&self) -> LagrangeBox {
        LagrangeBox::new(self.dim, 1, &self.voxels.h())
    }

    /// Lower corner of element `e`.
    pub fn element_origin(&self, e: usize) -> [f64; 3] {
        self.nodes[self.elements[e][0]]
    }

    pub fn total_volume(&self) -> f64 {
        self.n_elements() as f64 * self.voxels.voxel_volume()
    }

    pub fn solid_volume(&self) -> f64 {
        self.solid_elements.len() as f64 * self.voxels.voxel_volume()
    }

    pub fn fluid_volume(&self) -> f64 {
        self.fluid_elements.len() as f64 * self.voxels.voxel_volume()
    }

    /// `(master, slave)` node pairs across lateral faces.
    pub fn periodic_pairs(&self) -> Vec<(usize, usize)> {
        self.periodic_master
            .iter()
            .enumerate()
            .filter(|(p, m)| p != *m)
            .map(|(p, &m)| (m, p))
            .collect()
    }

    /// Periodic identification of the solid dofs plus one mean-zero
    /// functional per component, weighted by `∫_{Z^s} N_a`.
    pub fn solid_constraints(&self) -> Result<ConstraintMap> {
        let dm = &self.solid_dofs;
        let mut map = ConstraintMap::new(dm.n_dofs());
        for (m, s) in self.periodic_pairs() {
            if dm.local[s] == usize::MAX {
                continue;
            }
            if dm.local[m] == usize::MAX {
                return Err(Error::Geometry(format!(
                    "solid node {s} has no solid periodic partner (indicator not periodic)"
                )));
            }
            for c in 0..self.dim {
                map.pairs.push((dm.dof(m, c).unwrap(), dm.dof(s, c).unwrap()));
            }
        }
        let lumped = self.voxels.voxel_volume() / (1usize << self.dim) as f64;
        let mut weight = vec![0.0; dm.nodes.len()];
        for &e in &self.solid_elements {
            for &p in &self.elements[e] {
                weight[dm.local[p]] += lumped;
            }
        }
        for c in 0..self.dim {
            map.mean_zero.push(MeanZeroFunctional {
                dofs: (0..dm.nodes.len()).map(|l| l * self.dim + c).collect(),
                weights: weight.clone(),
            });
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::elasticity::Lame;
    use crate::geometry::spec::Material;

    fn lame() -> Material {
        Material::Lame(Lame::new(1.0, 1.0))
    }

    #[test]
    fn all_solid_2x2x2_counts() {
        let s = MicrostructureSpec::full_solid(3, vec![2, 2, 2], Lame::new(1.0, 1.0)).unwrap();
        let m = build_cell_mesh(&s);
        assert_eq!(m.n_elements(), 8);
        assert!(m.gamma.is_empty());
        assert_eq!(m.s_plus.len(), 4);
        assert_eq!(m.s_minus.len(), 4);
        assert!((m.total_volume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn central_fluid_voxel_has_six_gamma_facets() {
        let s = MicrostructureSpec::new(
            3,
            vec![4, 4, 4],
            (0..64).map(|v| v != (1 * 4 + 1) * 4 + 1).collect(),
            lame(),
        )
        .unwrap();
        let m = build_cell_mesh(&s);
        assert_eq!(m.gamma.len(), 6);
        assert!(m.gamma.iter().all(|f| f.fluid == 21 && !f.periodic));
    }

    #[test]
    fn two_d_pairs_only_left_right() {
        let s = MicrostructureSpec::from_fn(2, vec![4, 4], lame(), |y| y[1].abs() < 0.5).unwrap();
        let m = build_cell_mesh(&s);
        assert_eq!(m.lateral_faces.len(), 2);
        let pairs = m.periodic_pairs();
        assert_eq!(pairs.len(), 5);
        for (a, b) in pairs {
            assert_eq!(m.nodes[a][1], m.nodes[b][1]);
            assert_eq!(m.nodes[b][0] - m.nodes[a][0], 1.0);
        }
    }

    #[test]
    fn solid_constraints_have_no_chains_in_3d() {
        let s = MicrostructureSpec::full_solid(3, vec![2, 3, 2], Lame::new(1.0, 1.0)).unwrap();
        let m = build_cell_mesh(&s);
        let map = m.solid_constraints().unwrap();
        map.validate().unwrap();
        let total: f64 = map.mean_zero[0].weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
