//! Periodic elasticity cell problems on the solid part of the cell.
//!
//! For an in-plane index pair `(α, β)` the standard problem has strain load
//! `G = M_αβ` and the bending problem `G = −y_last M_αβ`; both look for a
//! periodic, mean-zero `χ` on `Z^s` with `∫ A (D(χ) + G) : D(v) = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::constraints::{apply_constraints, ConstraintMap, ReducedSystem};
use crate::fem::elasticity::{element_stiffness_elasticity, element_strain_load, ElasticTensor};
use crate::fem::element::{sym_grad, QuadPoint};
use crate::fem::solve::SolveConfig;
use crate::fem::sparse::{norm2, SparseOperator, TripletBuilder};
use crate::geometry::{validate_geometry, CellMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    Standard,
    Bending,
}

/// In-plane index pair (0-based, `alpha <= beta`) and load kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellLoadCase {
    pub alpha: usize,
    pub beta: usize,
    pub kind: LoadKind,
}

impl CellLoadCase {
    /// Normalizes the pair so that `(β, α)` and `(α, β)` coincide.
    pub fn new(alpha: usize, beta: usize, kind: LoadKind) -> Self {
        Self {
            alpha: alpha.min(beta),
            beta: alpha.max(beta),
            kind,
        }
    }

    /// In-plane pairs `(0,0), (1,1), (0,1)` in 3D; `(0,0)` in 2D.
    pub fn pairs(dim: usize) -> Vec<(usize, usize)> {
        if dim == 3 {
            vec![(0, 0), (1, 1), (0, 1)]
        } else {
            vec![(0, 0)]
        }
    }

    /// Every case needed by the effective tensors, standard first.
    pub fn all(dim: usize) -> Vec<Self> {
        let mut out: Vec<Self> = Self::pairs(dim)
            .into_iter()
            .map(|(a, b)| Self::new(a, b, LoadKind::Standard))
            .collect();
        out.extend(Self::pairs(dim).into_iter().map(|(a, b)| Self::new(a, b, LoadKind::Bending)));
        out
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.beta >= dim - 1 {
            return Err(Error::Dimension(format!(
                "load pair ({}, {}) is not in-plane for a {dim}-D cell",
                self.alpha + 1,
                self.beta + 1
            )));
        }
        Ok(())
    }

    /// `M_αβ = (e_α⊗e_β + e_β⊗e_α)/2`
    pub fn unit_strain(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        m[self.alpha][self.beta] += 0.5;
        m[self.beta][self.alpha] += 0.5;
        m
    }

    /// The load strain `G` at transverse coordinate `y_last`.
    pub fn strain(&self, y_last: f64) -> [[f64; 3]; 3] {
        let s = match self.kind {
            LoadKind::Standard => 1.0,
            LoadKind::Bending => -y_last,
        };
        let mut m = self.unit_strain();
        m.iter_mut().flatten().for_each(|v| *v *= s);
        m
    }

    pub fn label(&self) -> String {
        let k = match self.kind {
            LoadKind::Standard => "chi",
            LoadKind::Bending => "chiB",
        };
        format!("{k}_{}{}", self.alpha + 1, self.beta + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub case: CellLoadCase,
    /// Nodal displacement on the solid dofs of the mesh.
    pub displacement: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub geometry_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDiagnostics {
    /// `‖f − Kχ‖` over dofs away from `Γ ∪ S±` (reduced, absolute).
    pub interior_residual: f64,
    /// `‖f − Kχ‖` over dofs on `Γ ∪ S±`: the weak traction residual.
    pub traction_residual: f64,
    pub periodicity_mismatch: f64,
    pub component_means: Vec<f64>,
    /// `‖f‖` of the reduced load, for scale.
    pub load_norm: f64,
}

/// Assembled, periodic-reduced stiffness of `Z^s`, shared by all load cases.
#[derive(Debug, Clone)]
pub struct CellOperator {
    pub mesh: CellMesh,
    pub stiffness: SparseOperator,
    pub constraints: ConstraintMap,
    pub reduced: ReducedSystem,
    tensors: Vec<ElasticTensor>,
    quad: Vec<QuadPoint>,
    hash: String,
}

impl CellOperator {
    /// Assembles after the geometry checks (a disconnected or non-spanning
    /// solid has a kernel larger than the constants).
    pub fn new(mesh: &CellMesh) -> Result<Self> {
        validate_geometry(mesh).check()?;
        Self::assemble_unchecked(mesh)
    }

    pub fn assemble_unchecked(mesh: &CellMesh) -> Result<Self> {
        let dim = mesh.dim;
        let el = mesh.element_box();
        let quad = el.quadrature(2);
        let tensors: Vec<ElasticTensor> = mesh.solid_elements.iter().map(|&e| mesh.spec.tensor_at(e)).collect();
        let dm = &mesh.solid_dofs;
        let locals: Vec<Vec<f64>> = tensors
            .par_iter()
            .map(|a| element_stiffness_elasticity(&el, &quad, a))
            .collect();
        let nd = el.n_nodes() * dim;
        let mut t = TripletBuilder::with_capacity(dm.n_dofs(), dm.n_dofs(), locals.len() * nd * nd);
        for (k, &e) in mesh.solid_elements.iter().enumerate() {
            let dofs = element_dofs(mesh, e);
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    t.push(gi, gj, locals[k][i * nd + j]);
                }
            }
        }
        let stiffness = t.build();
        let constraints = mesh.solid_constraints()?;
        let reduced = apply_constraints(&stiffness, &vec![0.0; dm.n_dofs()], &constraints)?;
        Ok(Self {
            mesh: mesh.clone(),
            stiffness,
            constraints,
            reduced,
            tensors,
            quad,
            hash: mesh.spec.hash(),
        })
    }

    pub fn geometry_hash(&self) -> &str {
        &self.hash
    }

    fn y_last(&self, e: usize, q: &QuadPoint) -> f64 {
        let last = self.mesh.dim - 1;
        self.mesh.element_origin(e)[last] + q.reference[last] * self.mesh.voxels.h()[last]
    }

    /// `f_v = −∫_{Z^s} A G : D(v)` on the (unreduced) solid dofs.
    pub fn assemble_load(&self, case: &CellLoadCase) -> Result<Vec<f64>> {
        case.check(self.mesh.dim)?;
        let el = self.mesh.element_box();
        let mut f = vec![0.0; self.mesh.solid_dofs.n_dofs()];
        for (k, &e) in self.mesh.solid_elements.iter().enumerate() {
            let fe = element_strain_load(&el, &self.quad, &self.tensors[k], |q| case.strain(self.y_last(e, q)));
            for (i, g) in element_dofs(&self.mesh, e).into_iter().enumerate() {
                f[g] += fe[i];
            }
        }
        Ok(f)
    }

    pub fn solve(&self, case: &CellLoadCase, cfg: &SolveConfig) -> Result<CellSolution> {
        let f = self.assemble_load(case)?;
        let (displacement, rep) = self.reduced.solve_rhs(&f, cfg)?;
        Ok(CellSolution {
            case: *case,
            displacement,
            residual: rep.residual,
            iterations: rep.iterations,
            tolerance: cfg.tolerance,
            geometry_hash: self.hash.clone(),
        })
    }

    /// Solves every case of [`CellLoadCase::all`], at most `jobs` at a time.
    pub fn solve_all(&self, cfg: &SolveConfig, jobs: usize) -> Result<Vec<CellSolution>> {
        let cases = CellLoadCase::all(self.mesh.dim);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cases.par_iter().map(|c| self.solve(c, cfg)).collect())
    }

    /// Symmetric gradient of a solid-dof field at a quadrature point of element `e`.
    pub fn strain_at(&self, u: &[f64], e: usize, q: &QuadPoint) -> [[f64; 3]; 3] {
        let local: Vec<f64> = element_dofs(&self.mesh, e).iter().map(|&g| u[g]).collect();
        sym_grad(self.mesh.dim, &q.grads, &local)
    }

    /// `∫_{Z^s} A E(χ) : E(ψ)` with `E(χ) = D(χ) + G_case`; the building
    /// block of every effective tensor entry.
    pub fn cross_energy(&self, chi: &[f64], case: &CellLoadCase, psi: &[f64], other: &CellLoadCase) -> f64 {
        let mut s = 0.0;
        for (k, &e) in self.mesh.solid_elements.iter().enumerate() {
            for q in &self.quad {
                let y = self.y_last(e, q);
                let mut ea = self.strain_at(chi, e, q);
                let mut eb = self.strain_at(psi, e, q);
                let ga = case.strain(y);
                let gb = other.strain(y);
                for i in 0..3 {
                    for j in 0..3 {
                        ea[i][j] += ga[i][j];
                        eb[i][j] += gb[i][j];
                    }
                }
                let sa = self.tensors[k].apply(&ea);
                s += q.weight * crate::fem::elasticity::ddot(&sa, &eb);
            }
        }
        s
    }

    pub fn energy(&self, chi: &[f64], case: &CellLoadCase) -> f64 {
        self.cross_energy(chi, case, chi, case)
    }

    pub fn residual_check(&self, sol: &CellSolution) -> Result<CellDiagnostics> {
        let f = self.assemble_load(&sol.case)?;
        let ku = self.stiffness.mul_vec(&sol.displacement);
        let r: Vec<f64> = f.iter().zip(&ku).map(|(a, b)| a - b).collect();
        let on_boundary = self.boundary_dofs();
        let mut interior = 0.0;
        let mut traction = 0.0;
        // Sum slave rows into masters: that is the residual against periodic tests.
        let rr = self.reduced.restrict(&r);
        let boundary_red = self.reduced.restrict(&on_boundary.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<_>>());
        for (v, b) in rr.iter().zip(&boundary_red) {
            if *b > 0.0 {
                traction += v * v;
            } else {
                interior += v * v;
            }
        }
        let mut mismatch: f64 = 0.0;
        for &(m, s) in &self.constraints.pairs {
            mismatch = mismatch.max((sol.displacement[m] - sol.displacement[s]).abs());
        }
        Ok(CellDiagnostics {
            interior_residual: interior.sqrt(),
            traction_residual: traction.sqrt(),
            periodicity_mismatch: mismatch,
            component_means: self.reduced.component_means(&sol.displacement),
            load_norm: norm2(&self.reduced.restrict(&f)),
        })
    }

    /// Solid dofs on `Γ` or `S±`.
    fn boundary_dofs(&self) -> Vec<bool> {
        let mesh = &self.mesh;
        let corners = 1usize << mesh.dim;
        let mut on = vec![false; mesh.solid_dofs.n_dofs()];
        let mut mark = |node: usize| {
            for c in 0..mesh.dim {
                if let Some(d) = mesh.solid_dofs.dof(node, c) {
                    on[d] = true;
                }
            }
        };
        for f in &mesh.gamma {
            let s = &mesh.elements[f.solid];
            let fl = &mesh.elements[f.fluid];
            // shared nodes of the two voxels (up to periodic identification)
            for a in 0..corners {
                let p = mesh.periodic_master[s[a]];
                if fl.iter().any(|&q| mesh.periodic_master[q] == p) {
                    mark(s[a]);
                }
            }
        }
        for f in mesh.s_plus.iter().chain(&mesh.s_minus) {
            if mesh.spec.indicator[f.element] {
                f.nodes.iter().for_each(|&p| mark(p));
            }
        }
        on
    }

    /// Value of a solid-dof field at point `y` of element `e` (Q1 interpolation).
    pub fn evaluate(&self, u: &[f64], e: usize, y: &[f64]) -> [f64; 3] {
        self.evaluate_with_gradient(u, e, y).0
    }

    /// Value and gradient `g[c][k] = ∂_k u_c` at point `y` of solid element `e`.
    pub fn evaluate_with_gradient(&self, u: &[f64], e: usize, y: &[f64]) -> ([f64; 3], [[f64; 3]; 3]) {
        let mesh = &self.mesh;
        let el = mesh.element_box();
        let o = mesh.element_origin(e);
        let h = mesh.voxels.h();
        let r: Vec<f64> = (0..mesh.dim).map(|k| (y[k] - o[k]) / h[k]).collect();
        let (vals, grads) = el.eval(&r);
        let mut out = [0.0; 3];
        let mut g = [[0.0; 3]; 3];
        for (a, &n) in vals.iter().enumerate() {
            for c in 0..mesh.dim {
                let d = u[mesh.solid_dofs.dof(mesh.elements[e][a], c).unwrap()];
                out[c] += n * d;
                for k in 0..mesh.dim {
                    g[c][k] += grads[a][k] * d;
                }
            }
        }
        (out, g)
    }

    /// Element containing `y` (lateral coordinates reduced modulo 1).
    pub fn locate(&self, y: &[f64]) -> usize {
        let mesh = &self.mesh;
        let dim = mesh.dim;
        let h = mesh.voxels.h();
        let c: Vec<usize> = (0..dim)
            .map(|k| {
                let n = mesh.spec.resolution[k];
                let t = if k + 1 == dim { y[k] + 1.0 } else { y[k].rem_euclid(1.0) };
                ((t / h[k]).floor().max(0.0) as usize).min(n - 1)
            })
            .collect();
        mesh.voxels.index(&c)
    }
}

/// Solid dof indices of element `e` in local (node, component) order.
pub fn element_dofs(mesh: &CellMesh, e: usize) -> Vec<usize> {
    let dim = mesh.dim;
    mesh.elements[e]
        .iter()
        .flat_map(|&p| (0..dim).map(move |c| mesh.solid_dofs.dof(p, c).expect("node of a solid element")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::elasticity::Lame;
    use crate::geometry::{build_cell_mesh, MicrostructureSpec};

    fn full_solid(res: Vec<usize>, lame: Lame) -> CellOperator {
        let s = MicrostructureSpec::full_solid(res.len(), res, lame).unwrap();
        CellOperator::new(&build_cell_mesh(&s)).unwrap()
    }

    #[test]
    fn case_normalization() {
        assert_eq!(CellLoadCase::new(1, 0, LoadKind::Standard), CellLoadCase::new(0, 1, LoadKind::Standard));
        assert_eq!(CellLoadCase::all(3).len(), 6);
        assert_eq!(CellLoadCase::all(2).len(), 2);
        assert!(CellLoadCase::new(1, 1, LoadKind::Standard).check(2).is_err());
    }

    #[test]
    fn lambda_zero_standard_load_vanishes() {
        let op = full_solid(vec![2, 2, 4], Lame::new(0.0, 0.8));
        let f = op.assemble_load(&CellLoadCase::new(0, 0, LoadKind::Standard)).unwrap();
        let fr = op.reduced.restrict(&f);
        assert!(norm2(&fr) < 1e-14, "{}", norm2(&fr));
    }

    #[test]
    fn full_solid_standard_is_linear_in_y3() {
        let op = full_solid(vec![2, 2, 4], Lame::new(1.0, 1.0));
        let sol = op
            .solve(&CellLoadCase::new(0, 0, LoadKind::Standard), &SolveConfig::default().with_tolerance(1e-13))
            .unwrap();
        let dm = &op.mesh.solid_dofs;
        for (l, &p) in dm.nodes.iter().enumerate() {
            let y3 = op.mesh.nodes[p][2];
            assert!(sol.displacement[l * 3].abs() < 1e-10);
            assert!(sol.displacement[l * 3 + 1].abs() < 1e-10);
            assert!((sol.displacement[l * 3 + 2] + y3 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn diagnostics_of_exact_case() {
        let op = full_solid(vec![2, 2, 4], Lame::new(1.0, 1.0));
        let sol = op
            .solve(&CellLoadCase::new(0, 0, LoadKind::Standard), &SolveConfig::default().with_tolerance(1e-13))
            .unwrap();
        let d = op.residual_check(&sol).unwrap();
        assert!(d.interior_residual < 1e-9 && d.traction_residual < 1e-9, "{d:?}");
        assert_eq!(d.periodicity_mismatch, 0.0);
        assert!(d.component_means.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn disconnected_solid_is_rejected() {
        let s = MicrostructureSpec::from_fn(2, vec![4, 4], crate::geometry::Material::Lame(Lame::new(1.0, 1.0)), |y| {
            (y[0] - 0.375).abs() < 0.1 && y[1].abs() < 0.5
        })
        .unwrap();
        assert!(CellOperator::new(&build_cell_mesh(&s)).is_err());
    }
}
