//! Monolithic ε-resolved fluid-structure system on the slice.
//!
//! One continuous biquadratic velocity field lives on every node; in solid
//! elements it is the solid velocity, so the kinematic condition on Γ_ε is
//! dof sharing. Pressures are bilinear and continuous within each region
//! (Ω⁺, layer fluid, Ω⁻). The layer pressure unknown is `p̂ = p^M / ε`,
//! which keeps the divergence block unscaled and the system symmetric.

use serde::Serialize;

use super::config::MicroConfig;
use super::mesh::{build_micro_mesh, MicroMesh, Region};
use crate::error::{Error, Result};
use crate::fem::slice::{elastic_element, StokesCache, VDOFS};
use crate::fem::solve::{OrderedSolver, SolveConfig};
use crate::fem::sparse::{norm2, SparseOperator, TripletBuilder};
use crate::forcing::VectorField;

#[derive(Debug, Clone)]
pub struct MicroLayout {
    /// Velocity unknowns come first.
    pub n_v: usize,
    pub n: usize,
    /// Unknown of velocity dof `2 node + c` (`None` on the lateral walls).
    pub vmap: Vec<Option<usize>>,
    pub p_plus: Vec<Option<usize>>,
    pub p_layer: Vec<Option<usize>>,
    pub p_minus: Vec<Option<usize>>,
    /// Velocity unknowns carried by solid elements.
    pub solid: Vec<bool>,
    pub keys: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub t: f64,
    /// `[v, p⁺, p̂, p⁻]`
    pub x: Vec<f64>,
    /// Displacement on the velocity unknowns, zero off the solid.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroStepReport {
    pub residual: f64,
    pub divergence: f64,
}

#[derive(Debug)]
pub struct MicroSystem {
    pub cfg: MicroConfig,
    pub mesh: MicroMesh,
    pub layout: MicroLayout,
    /// Density-weighted mass (1 in the bulk, 1/ε in the layer).
    pub mass: SparseOperator,
    /// Viscous form (ν in the bulk, ν/ε in the layer fluid).
    pub viscous: SparseOperator,
    /// `−∫ q div v` with pressure rows.
    pub divergence: SparseOperator,
    /// `ε⁻³ ∫ A_ε D(u) : D(φ)` on the solid.
    pub stiffness: SparseOperator,
    pub step_matrix: Option<SparseOperator>,
    solver: Option<OrderedSolver>,
}

fn solve_config(cfg: &MicroConfig) -> SolveConfig {
    SolveConfig {
        saddle_method: cfg.saddle_method,
        ..SolveConfig::default()
    }
}

impl MicroSystem {
    pub fn assemble(cfg: &MicroConfig) -> Result<Self> {
        let mut sys = Self::operators(cfg)?;
        let step = sys.build_step_matrix();
        sys.solver = Some(OrderedSolver::factor(&step, &sys.layout.keys, &solve_config(cfg))?);
        sys.step_matrix = Some(step);
        Ok(sys)
    }

    pub fn operators(cfg: &MicroConfig) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.validate()?;
        let mesh = build_micro_mesh(&cfg)?;
        let layout = Self::layout(&mesh);
        let g = &mesh.grid;
        let eps = mesh.epsilon;
        let n = layout.n;
        let mut mass = TripletBuilder::new(n, n);
        let mut visc = TripletBuilder::new(n, n);
        let mut div = TripletBuilder::new(n, n);
        let mut stiff = TripletBuilder::new(n, n);
        let mut cache = StokesCache::default();
        let tensors: Vec<_> = (0..mesh.cell.n_voxels())
            .map(|v| mesh.cell.tensor_at(v).scaled(eps.powi(-3)))
            .collect();
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let region = mesh.region(ex, ez);
                let size = g.element_size(ex, ez);
                let el = cache.get(size);
                let vn = g.element_vnodes(ex, ez);
                let dofs: Vec<Option<usize>> = (0..VDOFS).map(|k| layout.vmap[2 * vn[k / 2] + k % 2]).collect();
                let (rho, nu) = match region {
                    Region::BulkMinus | Region::BulkPlus => (1.0, cfg.viscosity),
                    Region::LayerFluid => (1.0 / eps, cfg.viscosity / eps),
                    Region::LayerSolid => (1.0 / eps, 0.0),
                };
                for i in 0..VDOFS {
                    let Some(ui) = dofs[i] else { continue };
                    for j in 0..VDOFS {
                        let Some(uj) = dofs[j] else { continue };
                        mass.push(ui, uj, rho * el.mass[i * VDOFS + j]);
                        if nu != 0.0 {
                            visc.push(ui, uj, nu * el.viscous[i * VDOFS + j]);
                        }
                    }
                }
                let pidx = match region {
                    Region::BulkMinus => &layout.p_minus,
                    Region::BulkPlus => &layout.p_plus,
                    Region::LayerFluid => &layout.p_layer,
                    Region::LayerSolid => {
                        let v = mesh.voxel[g.element(ex, ez)].expect("layer element has a voxel");
                        let k = elastic_element(size, &tensors[v]);
                        for i in 0..VDOFS {
                            let Some(ui) = dofs[i] else { continue };
                            for j in 0..VDOFS {
                                let Some(uj) = dofs[j] else { continue };
                                stiff.push(ui, uj, k[i * VDOFS + j]);
                            }
                        }
                        continue;
                    }
                };
                for (a, &pn) in g.element_pnodes(ex, ez).iter().enumerate() {
                    let row = pidx[pn].expect("pressure vertex of a fluid element");
                    for j in 0..VDOFS {
                        if let Some(uj) = dofs[j] {
                            div.push(row, uj, el.div[a * VDOFS + j]);
                        }
                    }
                }
            }
        }
        Ok(Self {
            cfg,
            mesh,
            layout,
            mass: mass.build(),
            viscous: visc.build(),
            divergence: div.build(),
            stiffness: stiff.build(),
            step_matrix: None,
            solver: None,
        })
    }

    fn layout(mesh: &MicroMesh) -> MicroLayout {
        let g = &mesh.grid;
        let nv = g.n_vnodes();
        let last_i = 2 * g.nx();
        let mut vmap = vec![None; 2 * nv];
        let mut keys = Vec::new();
        let mut next = 0;
        for node in 0..nv {
            let (i, _) = g.vnode_ij(node);
            if i == 0 || i == last_i {
                continue;
            }
            let x = g.vnode_xz(node)[0];
            for c in 0..2 {
                vmap[2 * node + c] = Some(next);
                keys.push(x);
                next += 1;
            }
        }
        let n_v = next;
        let mut solid = vec![false; n_v];
        let np = g.n_pnodes();
        let mut flags = [vec![false; np], vec![false; np], vec![false; np]];
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let slot = match mesh.region(ex, ez) {
                    Region::BulkPlus => 0,
                    Region::LayerFluid => 1,
                    Region::BulkMinus => 2,
                    Region::LayerSolid => {
                        for n in g.element_vnodes(ex, ez) {
                            for c in 0..2 {
                                if let Some(u) = vmap[2 * n + c] {
                                    solid[u] = true;
                                }
                            }
                        }
                        continue;
                    }
                };
                for pn in g.element_pnodes(ex, ez) {
                    flags[slot][pn] = true;
                }
            }
        }
        let mut pressure = |flags: &[bool]| -> Vec<Option<usize>> {
            flags
                .iter()
                .enumerate()
                .map(|(pn, &f)| {
                    f.then(|| {
                        keys.push(g.pnode_xz(pn)[0]);
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let p_plus = pressure(&flags[0]);
        let p_layer = pressure(&flags[1]);
        let p_minus = pressure(&flags[2]);
        MicroLayout {
            n_v,
            n: next,
            vmap,
            p_plus,
            p_layer,
            p_minus,
            solid,
            keys,
        }
    }

    fn theta_dt(&self) -> f64 {
        self.cfg.theta * self.cfg.dt
    }

    fn build_step_matrix(&self) -> SparseOperator {
        let n = self.layout.n;
        let dt = self.cfg.dt;
        let td = self.theta_dt();
        let mut t = TripletBuilder::new(n, n);
        for (op, s) in [(&self.mass, 1.0 / dt), (&self.viscous, 1.0), (&self.stiffness, td)] {
            for i in 0..n {
                for (j, v) in op.row(i) {
                    t.push(i, j, s * v);
                }
            }
        }
        for i in 0..n {
            for (j, v) in self.divergence.row(i) {
                t.push(i, j, v);
                t.push(j, i, v);
            }
        }
        t.build()
    }

    pub fn zero_state(&self) -> MicroState {
        MicroState {
            t: 0.0,
            x: vec![0.0; self.layout.n],
            u: vec![0.0; self.layout.n_v],
        }
    }

    /// Nodal field `f[2 node + c]` from unknown-space values.
    pub fn nodal(&self, vals: &[f64]) -> Vec<f64> {
        self.layout.vmap.iter().map(|m| m.map_or(0.0, |u| vals[u])).collect()
    }

    pub fn velocity(&self, s: &MicroState) -> Vec<f64> {
        self.nodal(&s.x)
    }

    pub fn displacement(&self, s: &MicroState) -> Vec<f64> {
        self.nodal(&s.u)
    }

    /// Physical pressure per Q1 vertex in one region (`p^M = ε p̂` in the
    /// layer); vertices outside the region read 0.
    pub fn pressure(&self, s: &MicroState, region: Region) -> Vec<f64> {
        let (idx, scale) = match region {
            Region::BulkPlus => (&self.layout.p_plus, 1.0),
            Region::BulkMinus => (&self.layout.p_minus, 1.0),
            Region::LayerFluid => (&self.layout.p_layer, self.mesh.epsilon),
            Region::LayerSolid => return vec![0.0; self.mesh.grid.n_pnodes()],
        };
        idx.iter().map(|o| o.map_or(0.0, |k| scale * s.x[k])).collect()
    }

    /// `∫ f·φ` over the bulk (data in macro coordinates) plus
    /// `ε⁻¹ ∫ (0, q)·φ` over the layer fluid.
    fn load(&self, t: f64, bulk: [&VectorField; 2], layer: Option<&VectorField>, rhs: &mut [f64]) {
        let cfg = &self.cfg;
        let m = &self.mesh;
        let g = &m.grid;
        let eps = m.epsilon;
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let region = m.region(ex, ez);
                let (scale, shift) = match region {
                    Region::BulkPlus => (1.0, -eps),
                    Region::BulkMinus => (1.0, eps),
                    Region::LayerFluid => (1.0 / eps, 0.0),
                    Region::LayerSolid => continue,
                };
                let f = |x: f64, z: f64| -> [f64; 2] {
                    match region {
                        Region::BulkPlus => bulk[0].eval(t, x, z),
                        Region::BulkMinus => bulk[1].eval(t, x, z),
                        _ => match layer {
                            Some(v) => v.eval(t, x, z),
                            None => [0.0, cfg.layer_load.eval(t, x, z)],
                        },
                    }
                };
                let zero = match region {
                    Region::BulkPlus => bulk[0].is_zero(),
                    Region::BulkMinus => bulk[1].is_zero(),
                    _ => layer.map_or(cfg.layer_load.is_zero(), VectorField::is_zero),
                };
                if zero {
                    continue;
                }
                let el = g.vbox(ex, ez);
                let vn = g.element_vnodes(ex, ez);
                let (x0, z0) = (g.xs[ex], g.zs[ez]);
                for q in el.quadrature(3) {
                    let x = x0 + q.reference[0] * el.size[0];
                    let z = z0 + q.reference[1] * el.size[1];
                    let fv = f(x, z + shift);
                    for (a, &na) in q.values.iter().enumerate() {
                        for c in 0..2 {
                            if let Some(u) = self.layout.vmap[2 * vn[a] + c] {
                                rhs[u] += scale * q.weight * na * fv[c];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Predicted displacement `uⁿ + (1−θ) dt vⁿ` on the solid.
    fn predictor(&self, s: &MicroState) -> Vec<f64> {
        let l = &self.layout;
        let c = self.cfg.dt * (1.0 - self.cfg.theta);
        (0..l.n_v)
            .map(|k| if l.solid[k] { s.u[k] + c * s.x[k] } else { 0.0 })
            .collect()
    }

    /// Right-hand side of the step from `s`.
    pub fn step_rhs(&self, s: &MicroState) -> Vec<f64> {
        let l = &self.layout;
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let mut rhs: Vec<f64> = self.mass.mul_vec(&s.x).iter().map(|v| v / dt).collect();
        let mut us = self.predictor(s);
        us.resize(l.n, 0.0);
        let ku = self.stiffness.mul_vec(&us);
        for k in 0..l.n_v {
            rhs[k] -= ku[k];
        }
        self.load(s.t + dt, [&cfg.f_plus, &cfg.f_minus], None, &mut rhs);
        rhs
    }

    /// One implicit step of size `cfg.dt`.
    pub fn advance(&self, s: &MicroState) -> Result<(MicroState, MicroStepReport)> {
        let solver = self
            .solver
            .as_ref()
            .ok_or_else(|| Error::Config("micro system assembled without a factorization".into()))?;
        let l = &self.layout;
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let t1 = s.t + dt;
        let ustar = self.predictor(s);
        let rhs = self.step_rhs(s);
        let rep = solver.solve(&rhs);
        let x = rep.x;
        let u = (0..l.n_v)
            .map(|k| if l.solid[k] { ustar[k] + cfg.theta * dt * x[k] } else { 0.0 })
            .collect();
        let next = MicroState { t: t1, x, u };
        let divergence = self.divergence_residual(&next);
        Ok((
            next,
            MicroStepReport {
                residual: rep.residual,
                divergence,
            },
        ))
    }

    pub fn divergence_residual(&self, s: &MicroState) -> f64 {
        norm2(&self.divergence.mul_vec(&s.x))
    }

    /// Bulk kinetic + ε⁻¹ layer kinetic + ε⁻³ elastic energy.
    pub fn energy(&self, s: &MicroState) -> f64 {
        let mut u = s.u.clone();
        u.resize(self.layout.n, 0.0);
        0.5 * self.mass.quadratic_form(&s.x) + 0.5 * self.stiffness.quadratic_form(&u)
    }

    /// Initial state: zero solid velocity and displacement; fluid velocity
    /// from the stationary Stokes problem when `initial_forcing` is given,
    /// otherwise the divergence-free projection of `v⁰±` (zero in the
    /// layer).
    pub fn initial_state(&self) -> Result<MicroState> {
        let cfg = &self.cfg;
        if let Some(f) = &cfg.initial_forcing {
            if !(cfg.v0_plus.is_zero() && cfg.v0_minus.is_zero()) {
                return Err(Error::Config("give either initial_forcing or v0_plus/v0_minus, not both".into()));
            }
            return self.stationary_initial(f);
        }
        if cfg.v0_plus.is_zero() && cfg.v0_minus.is_zero() {
            return Ok(self.zero_state());
        }
        self.projected_initial()
    }

    /// Fluid block `[K_ff, Bᵀ; B, 0]` with solid velocity pinned to zero.
    fn fluid_saddle(&self, k: &SparseOperator) -> SparseOperator {
        let l = &self.layout;
        let mut t = TripletBuilder::new(l.n, l.n);
        for i in 0..l.n_v {
            if l.solid[i] {
                t.push(i, i, 1.0);
                continue;
            }
            for (j, v) in k.row(i) {
                if !l.solid[j] {
                    t.push(i, j, v);
                }
            }
        }
        for i in l.n_v..l.n {
            for (j, v) in self.divergence.row(i) {
                if !l.solid[j] {
                    t.push(i, j, v);
                    t.push(j, i, v);
                }
            }
        }
        t.build()
    }

    fn stationary_initial(&self, f: &super::config::InitialForcing) -> Result<MicroState> {
        let l = &self.layout;
        let mut rhs = vec![0.0; l.n];
        self.load(0.0, [&f.plus, &f.minus], Some(&f.layer), &mut rhs);
        for k in 0..l.n_v {
            if l.solid[k] {
                rhs[k] = 0.0;
            }
        }
        let op = self.fluid_saddle(&self.viscous);
        let rep = OrderedSolver::factor(&op, &l.keys, &solve_config(&self.cfg))?.solve(&rhs);
        let mut s = self.zero_state();
        s.x[..l.n_v].copy_from_slice(&rep.x[..l.n_v]);
        Ok(s)
    }

    fn projected_initial(&self) -> Result<MicroState> {
        let cfg = &self.cfg;
        let m = &self.mesh;
        let g = &m.grid;
        let l = &self.layout;
        let eps = m.epsilon;
        let nv = g.n_vnodes();
        let j_minus = 2 * m.bulk_nz;
        let j_plus = 2 * (m.bulk_nz + m.layer_nz);
        let mut v0 = vec![0.0; 2 * nv];
        let (mut wall, mut trace, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        for node in 0..nv {
            let (i, j) = g.vnode_ij(node);
            let [x, z] = g.vnode_xz(node);
            let v = if j >= j_plus {
                cfg.v0_plus.eval(0.0, x, z - eps)
            } else if j <= j_minus {
                cfg.v0_minus.eval(0.0, x, z + eps)
            } else {
                continue;
            };
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::Config(format!("initial velocity is not finite at ({x}, {z})")));
            }
            let mag = v[0].abs().max(v[1].abs());
            scale = scale.max(mag);
            if i == 0 || i == 2 * g.nx() {
                wall = wall.max(mag);
            } else if j == j_plus || j == j_minus {
                trace = trace.max(mag);
            }
            v0[2 * node] = v[0];
            v0[2 * node + 1] = v[1];
        }
        let tol = 1e-12 * scale.max(1.0);
        for (name, mag) in [
            ("no-slip on the lateral walls", wall),
            ("zero trace on the layer boundary (layer at rest)", trace),
        ] {
            if mag > tol {
                return Err(Error::Projection {
                    constraint: name.to_string(),
                    magnitude: mag,
                });
            }
        }
        // the full nodal field also has wall values; those are zero here
        let target: Vec<f64> = {
            let mut t = vec![0.0; l.n];
            for (d, m) in l.vmap.iter().enumerate() {
                if let Some(u) = m {
                    t[*u] = v0[d];
                }
            }
            t
        };
        let mut rhs = self.mass.mul_vec(&target);
        rhs.truncate(l.n_v);
        rhs.resize(l.n, 0.0);
        for k in 0..l.n_v {
            if l.solid[k] {
                rhs[k] = 0.0;
            }
        }
        let op = self.fluid_saddle(&self.mass);
        let rep = OrderedSolver::factor(&op, &l.keys, &solve_config(cfg))?.solve(&rhs);
        let mut s = self.zero_state();
        s.x[..l.n_v].copy_from_slice(&rep.x[..l.n_v]);
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroSeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub divergence: f64,
    pub residual: f64,
}

#[derive(Debug)]
pub struct MicroRun {
    pub system: MicroSystem,
    pub states: Vec<MicroState>,
    pub series: Vec<MicroSeriesRow>,
}

pub fn run_micro(cfg: &MicroConfig) -> Result<MicroRun> {
    let sys = MicroSystem::assemble(cfg)?;
    let mut state = sys.initial_state()?;
    let row = |step: usize, s: &MicroState, residual: f64| MicroSeriesRow {
        step,
        t: s.t,
        energy: sys.energy(s),
        divergence: sys.divergence_residual(s),
        residual,
    };
    let mut series = vec![row(0, &state, 0.0)];
    let mut states = vec![state.clone()];
    for step in 1..=cfg.n_steps() {
        let (next, rep) = sys.advance(&state)?;
        state = next;
        series.push(row(step, &state, rep.residual));
        states.push(state.clone());
    }
    Ok(MicroRun {
        system: sys,
        states,
        series,
    })
}
