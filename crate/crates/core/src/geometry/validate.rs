//! Topological checks on a voxel cell.

use std::collections::VecDeque;

use serde::Serialize;

use super::mesh::CellMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub solid_connected: bool,
    pub fluid_connected: bool,
    pub s_clearance: bool,
    pub indicator_periodic: bool,
    pub layer_solid_connected: bool,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Geometry(self.errors.join("; ")))
        }
    }
}

/// Face neighbours of a voxel. Lateral axes wrap; the returned offset
/// records which period the neighbour lives in.
fn neighbours(mesh: &CellMesh, v: usize) -> Vec<(usize, [i64; 2])> {
    let g = &mesh.voxels;
    let dim = mesh.dim;
    let last = dim - 1;
    let c = g.coords(v);
    let mut out = Vec::with_capacity(2 * dim);
    for axis in 0..dim {
        let n = g.n[axis];
        for step in [-1i64, 1] {
            let mut cn = c.clone();
            let mut shift = [0i64; 2];
            let raw = c[axis] as i64 + step;
            if raw < 0 || raw >= n as i64 {
                if axis == last {
                    continue;
                }
                cn[axis] = raw.rem_euclid(n as i64) as usize;
                shift[axis] = step;
            } else {
                cn[axis] = raw as usize;
            }
            out.push((g.index(&cn), shift));
        }
    }
    out
}

/// Connected components of voxels with label `solid`. Each entry maps a
/// voxel to its component id (or `usize::MAX`).
fn components(mesh: &CellMesh, solid: bool) -> (Vec<usize>, usize) {
    let ind = &mesh.spec.indicator;
    let mut comp = vec![usize::MAX; ind.len()];
    let mut count = 0;
    for start in 0..ind.len() {
        if ind[start] != solid || comp[start] != usize::MAX {
            continue;
        }
        comp[start] = count;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for (w, _) in neighbours(mesh, v) {
                if ind[w] == solid && comp[w] == usize::MAX {
                    comp[w] = count;
                    queue.push_back(w);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

/// Period vectors realized by closed paths through the solid, collected by
/// a BFS that tracks the lift of each voxel into the unrolled layer.
fn winding_generators(mesh: &CellMesh) -> Vec<[i64; 2]> {
    let ind = &mesh.spec.indicator;
    let Some(start) = ind.iter().position(|&s| s) else {
        return Vec::new();
    };
    let mut lift: Vec<Option<[i64; 2]>> = vec![None; ind.len()];
    lift[start] = Some([0, 0]);
    let mut queue = VecDeque::from([start]);
    let mut gens = Vec::new();
    while let Some(v) = queue.pop_front() {
        let lv = lift[v].unwrap();
        for (w, s) in neighbours(mesh, v) {
            if !ind[w] {
                continue;
            }
            let lw = [lv[0] + s[0], lv[1] + s[1]];
            match lift[w] {
                None => {
                    lift[w] = Some(lw);
                    queue.push_back(w);
                }
                Some(prev) => {
                    let d = [lw[0] - prev[0], lw[1] - prev[1]];
                    if d != [0, 0] && !gens.contains(&d) {
                        gens.push(d);
                    }
                }
            }
        }
    }
    gens
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Whether the integer vectors generate the full lattice `Z^{lateral}`.
fn generates_lattice(gens: &[[i64; 2]], lateral: usize) -> bool {
    if lateral == 1 {
        gens.iter().fold(0, |g, v| gcd(g, v[0])) == 1
    } else {
        let mut g = 0;
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                g = gcd(g, a[0] * b[1] - a[1] * b[0]);
            }
        }
        g == 1
    }
}

pub fn validate_geometry(mesh: &CellMesh) -> ValidationReport {
    let spec = &mesh.spec;
    let dim = mesh.dim;
    let last = dim - 1;
    let g = &mesh.voxels;
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    let (_, n_solid) = components(mesh, true);
    let solid_connected = n_solid == 1;
    if !solid_connected {
        errors.push(format!("solid has {n_solid} periodic components"));
    }

    let (fcomp, n_fluid) = components(mesh, false);
    let fluid_connected = if dim == 3 {
        n_fluid <= 1
    } else {
        // In 2D a laterally spanning layer always separates the fluid above
        // from the fluid below; only pockets sealed off from S± are rejected.
        let mut touches = vec![false; n_fluid];
        for f in mesh.s_plus.iter().chain(&mesh.s_minus) {
            if fcomp[f.element] != usize::MAX {
                touches[fcomp[f.element]] = true;
            }
        }
        touches.iter().all(|&t| t)
    };
    if !fluid_connected {
        errors.push(if dim == 3 {
            format!("fluid has {n_fluid} periodic components")
        } else {
            "fluid pocket enclosed by solid".to_string()
        });
    }

    let s_clearance = mesh
        .s_plus
        .iter()
        .chain(&mesh.s_minus)
        .all(|f| !spec.indicator[f.element]);
    if !s_clearance {
        warnings.push("solid touches the top or bottom face S±".to_string());
    }

    let mut indicator_periodic = true;
    for axis in 0..last {
        let n = g.n[axis];
        for v in 0..g.n_voxels() {
            let c = g.coords(v);
            if c[axis] != 0 {
                continue;
            }
            let mut opp = c.clone();
            opp[axis] = n - 1;
            if spec.indicator[v] != spec.indicator[g.index(&opp)] {
                indicator_periodic = false;
            }
        }
    }
    if !indicator_periodic {
        errors.push("indicator differs between opposite lateral faces".to_string());
    }

    let layer_solid_connected = solid_connected && generates_lattice(&winding_generators(mesh), last);
    if !layer_solid_connected {
        errors.push("layer solid disconnected: solid does not span every lateral period".to_string());
    }

    ValidationReport {
        solid_connected,
        fluid_connected,
        s_clearance,
        indicator_periodic,
        layer_solid_connected,
        errors,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::elasticity::Lame;
    use crate::geometry::mesh::build_cell_mesh;
    use crate::geometry::spec::{Material, MicrostructureSpec};

    fn lame() -> Material {
        Material::Lame(Lame::new(1.0, 1.0))
    }

    #[test]
    fn full_solid_only_warns() {
        let s = MicrostructureSpec::full_solid(3, vec![4, 4, 4], Lame::new(1.0, 1.0)).unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(r.is_ok());
        assert!(!r.s_clearance);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn channel_slab_passes() {
        let s = MicrostructureSpec::from_fn(3, vec![4, 4, 4], lame(), |y| {
            let channel = (y[0] - 0.5).abs() < 0.25 && (y[1] - 0.5).abs() < 0.25;
            y[2].abs() <= 0.5 && !channel
        })
        .unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(r.is_ok() && r.s_clearance && r.fluid_connected, "{r:?}");
    }

    #[test]
    fn island_is_rejected() {
        let s = MicrostructureSpec::from_fn(3, vec![4, 4, 4], lame(), |y| {
            (y[0] - 0.375).abs() < 0.1 && (y[1] - 0.375).abs() < 0.1 && (y[2] - 0.25).abs() < 0.1
        })
        .unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(r.solid_connected);
        assert!(!r.layer_solid_connected);
        assert!(r.check().unwrap_err().to_string().contains("layer solid disconnected"));
    }

    #[test]
    fn straight_beam_spans_only_one_direction() {
        // solid bar along y1 only: connected, but not a 2D layer
        let s = MicrostructureSpec::from_fn(3, vec![4, 4, 4], lame(), |y| (y[1] - 0.5).abs() < 0.25 && y[2].abs() < 0.5)
            .unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(r.solid_connected && !r.layer_solid_connected);
    }

    #[test]
    fn two_d_layer_with_notches_passes() {
        let s = MicrostructureSpec::from_fn(2, vec![4, 8], lame(), |y| {
            y[1].abs() < 0.5 && !((y[0] - 0.5).abs() < 0.25 && y[1].abs() > 0.25)
        })
        .unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(r.is_ok() && r.s_clearance, "{r:?}");
    }

    #[test]
    fn non_periodic_indicator_rejected() {
        let s = MicrostructureSpec::from_fn(2, vec![4, 4], lame(), |y| y[1].abs() < 0.5 || (y[0] < 0.25 && y[1] > 0.5))
            .unwrap();
        let r = validate_geometry(&build_cell_mesh(&s));
        assert!(!r.indicator_periodic);
    }
}
