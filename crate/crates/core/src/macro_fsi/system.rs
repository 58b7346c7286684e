//! Assembly and time stepping of the monolithic macro slice system.
//!
//! Unknowns per step: free bulk velocity dofs, plate velocity `w` (Hermite),
//! in-plane displacement `ũ` (P1), and one bilinear pressure per bulk side.
//! On Σ the horizontal velocity is zero and the vertical velocity at each
//! Q2 node is the Hermite plate velocity evaluated there.

use serde::Serialize;

use super::config::MacroConfig;
use crate::error::{Error, Result};
use crate::fem::hermite::BeamMesh;
use crate::fem::slice::{SliceGrid, StokesCache, VDOFS};
use crate::fem::solve::{OrderedSolver, SolveConfig};
use crate::fem::sparse::{dot, norm2, SparseOperator, TripletBuilder};
use crate::tensors::{audit_tensors, AuditReport};

/// Position of each unknown block in the global vector.
#[derive(Debug, Clone)]
pub struct MacroLayout {
    pub n_vfree: usize,
    pub w_off: usize,
    pub n_w: usize,
    pub ut_off: usize,
    pub n_ut: usize,
    pub pp_off: usize,
    pub n_pp: usize,
    pub pm_off: usize,
    pub n_pm: usize,
    pub n: usize,
    /// Full velocity dof `2 node + c` as a combination of unknowns.
    pub vmap: Vec<Vec<(usize, f64)>>,
    pub p_plus: Vec<Option<usize>>,
    pub p_minus: Vec<Option<usize>>,
    /// Ordering keys (x coordinate of each unknown).
    pub keys: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    /// Step unknowns `[v_free, w, ũ, p⁺, p⁻]`.
    pub x: Vec<f64>,
    /// Plate displacement (Hermite dofs).
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    pub residual: f64,
    pub divergence: f64,
}

/// Plate fields at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatePoint {
    pub u: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub w: f64,
    pub w_x: f64,
    pub ut: f64,
    pub ut_x: f64,
}

#[derive(Debug)]
pub struct MacroSystem {
    pub cfg: MacroConfig,
    pub grid: SliceGrid,
    pub beam: BeamMesh,
    pub layout: MacroLayout,
    pub audit: Option<AuditReport>,
    /// Fluid velocity mass on the unknown space.
    pub fluid_mass: SparseOperator,
    /// `ν ∫ D(v):D(V)` on the unknown space.
    pub viscous: SparseOperator,
    /// `−∫ q div v`, pressure rows.
    pub divergence: SparseOperator,
    /// Beam-local operators (Hermite / P1 numbering).
    pub plate_mass: SparseOperator,
    pub bending: SparseOperator,
    pub membrane: SparseOperator,
    /// `∫ ũ' w''`, rows on ũ, columns on Hermite dofs.
    pub coupling: SparseOperator,
    pub step_matrix: Option<SparseOperator>,
    solver: Option<OrderedSolver>,
}

fn embed(t: &mut TripletBuilder, op: &SparseOperator, scale: f64, roff: usize, coff: usize) {
    if scale == 0.0 {
        return;
    }
    for i in 0..op.n_rows() {
        for (j, v) in op.row(i) {
            t.push(roff + i, coff + j, scale * v);
        }
    }
}

impl MacroSystem {
    /// Assembles all operators and factors the step matrix.
    pub fn assemble(cfg: &MacroConfig) -> Result<Self> {
        let mut sys = Self::operators(cfg)?;
        let step = sys.build_step_matrix();
        let solve_cfg = SolveConfig {
            saddle_method: cfg.saddle_method,
            ..SolveConfig::default()
        };
        sys.solver = Some(OrderedSolver::factor(&step, &sys.layout.keys, &solve_cfg)?);
        sys.step_matrix = Some(step);
        Ok(sys)
    }

    /// Assembles operators without factoring (enough for evaluation and
    /// energies).
    pub fn operators(cfg: &MacroConfig) -> Result<Self> {
        cfg.validate()?;
        let (a, b, c) = cfg.tensors.slice_coefficients();
        let plate_free = a == 0.0 && b == 0.0 && c == 0.0;
        let audit = if plate_free {
            None
        } else {
            let r = audit_tensors(&cfg.tensors);
            if !r.passed {
                return Err(Error::Audit(format!(
                    "refusing to assemble: symmetry defect {:.3e}, minimum eigenvalue {:.3e}",
                    r.relative_symmetry_defect, r.min_eigenvalue
                )));
            }
            Some(r)
        };
        let grid = SliceGrid::uniform(0.0, cfg.l, cfg.nx, -cfg.h, cfg.h, 2 * cfg.nz);
        let beam = BeamMesh::uniform(cfg.l, cfg.n_plate);
        let layout = Self::layout(&grid, &beam, cfg.nz, !plate_free);

        let n = layout.n;
        let nz = cfg.nz;
        let mut mass = TripletBuilder::new(n, n);
        let mut visc = TripletBuilder::new(n, n);
        let mut div = TripletBuilder::new(n, n);
        let mut cache = StokesCache::default();
        for ex in 0..grid.nx() {
            for ez in 0..grid.nz() {
                let el = cache.get(grid.element_size(ex, ez));
                let vn = grid.element_vnodes(ex, ez);
                let maps: Vec<&Vec<(usize, f64)>> =
                    (0..VDOFS).map(|k| &layout.vmap[2 * vn[k / 2] + k % 2]).collect();
                for i in 0..VDOFS {
                    for j in 0..VDOFS {
                        let (m, v) = (el.mass[i * VDOFS + j], el.viscous[i * VDOFS + j]);
                        for &(ui, ci) in maps[i] {
                            for &(uj, cj) in maps[j] {
                                mass.push(ui, uj, ci * cj * m);
                                visc.push(ui, uj, cfg.viscosity * ci * cj * v);
                            }
                        }
                    }
                }
                let pidx = if ez >= nz { &layout.p_plus } else { &layout.p_minus };
                for (a, &pn) in grid.element_pnodes(ex, ez).iter().enumerate() {
                    let row = pidx[pn].expect("pressure vertex of a bulk element");
                    for j in 0..VDOFS {
                        let d = el.div[a * VDOFS + j];
                        for &(uj, cj) in maps[j] {
                            div.push(row, uj, cj * d);
                        }
                    }
                }
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            plate_mass: beam.hermite_mass(),
            bending: beam.hermite_bending(),
            membrane: beam.linear_stiffness(),
            coupling: beam.linear_hermite_coupling(),
            grid,
            beam,
            layout,
            audit,
            fluid_mass: mass.build(),
            viscous: visc.build(),
            divergence: div.build(),
            step_matrix: None,
            solver: None,
        })
    }

    fn layout(grid: &SliceGrid, beam: &BeamMesh, nz: usize, with_ut: bool) -> MacroLayout {
        let nv = grid.n_vnodes();
        let sigma_j = 2 * nz;
        let last_i = 2 * grid.nx();
        let mut vmap = vec![Vec::new(); 2 * nv];
        let mut keys = Vec::new();
        let mut next = 0;
        for node in 0..nv {
            let (i, j) = grid.vnode_ij(node);
            if i == 0 || i == last_i || j == sigma_j {
                continue;
            }
            let x = grid.vnode_xz(node)[0];
            for c in 0..2 {
                vmap[2 * node + c].push((next, 1.0));
                keys.push(x);
                next += 1;
            }
        }
        let n_vfree = next;
        let w_off = next;
        let n_w = beam.n_hermite();
        for k in 0..n_w {
            keys.push(beam.nodes[k / 2 + 1]);
        }
        for i in 1..last_i {
            let node = grid.vnode(i, sigma_j);
            let x = grid.vnode_xz(node)[0];
            vmap[2 * node + 1] = beam
                .hermite_extraction(x)
                .into_iter()
                .filter(|(_, c)| c[0] != 0.0)
                .map(|(d, c)| (w_off + d, c[0]))
                .collect();
        }
        let ut_off = w_off + n_w;
        let n_ut = if with_ut { beam.n_linear() } else { 0 };
        for k in 0..n_ut {
            keys.push(beam.nodes[k + 1]);
        }
        let pp_off = ut_off + n_ut;
        let np = grid.n_pnodes();
        let mut p_plus = vec![None; np];
        let mut p_minus = vec![None; np];
        let mut next = pp_off;
        for (pn, slot) in p_plus.iter_mut().enumerate() {
            let j = pn % (grid.nz() + 1);
            if j >= nz {
                *slot = Some(next);
                keys.push(grid.pnode_xz(pn)[0]);
                next += 1;
            }
        }
        let pm_off = next;
        for (pn, slot) in p_minus.iter_mut().enumerate() {
            let j = pn % (grid.nz() + 1);
            if j <= nz {
                *slot = Some(next);
                keys.push(grid.pnode_xz(pn)[0]);
                next += 1;
            }
        }
        MacroLayout {
            n_vfree,
            w_off,
            n_w,
            ut_off,
            n_ut,
            pp_off,
            n_pp: pm_off - pp_off,
            pm_off,
            n_pm: next - pm_off,
            n: next,
            vmap,
            p_plus,
            p_minus,
            keys,
        }
    }

    fn theta_dt(&self) -> f64 {
        self.cfg.theta * self.cfg.dt
    }

    fn build_step_matrix(&self) -> SparseOperator {
        let l = &self.layout;
        let cfg = &self.cfg;
        let (a, b, c) = cfg.tensors.slice_coefficients();
        let ms = cfg.m_stiffness;
        let td = self.theta_dt();
        let mut t = TripletBuilder::new(l.n, l.n);
        embed(&mut t, &self.fluid_mass, 1.0 / cfg.dt, 0, 0);
        embed(&mut t, &self.viscous, 1.0, 0, 0);
        embed(&mut t, &self.plate_mass, cfg.m_inertia / cfg.dt, l.w_off, l.w_off);
        embed(&mut t, &self.bending, ms * c * td, l.w_off, l.w_off);
        if l.n_ut > 0 {
            embed(&mut t, &self.membrane, ms * a / td, l.ut_off, l.ut_off);
            if b != 0.0 {
                embed(&mut t, &self.coupling, ms * b, l.ut_off, l.w_off);
                embed(&mut t, &self.coupling.transpose(), ms * b, l.w_off, l.ut_off);
            }
        }
        let div = &self.divergence;
        for i in 0..div.n_rows() {
            for (j, v) in div.row(i) {
                t.push(i, j, v);
                t.push(j, i, v);
            }
        }
        t.build()
    }

    pub fn plate_velocity<'a>(&self, s: &'a MacroState) -> &'a [f64] {
        &s.x[self.layout.w_off..self.layout.w_off + self.layout.n_w]
    }

    /// In-plane displacement (zero vector when the plate carries no tensors).
    pub fn u_tilde(&self, s: &MacroState) -> Vec<f64> {
        if self.layout.n_ut == 0 {
            vec![0.0; self.beam.n_linear()]
        } else {
            s.x[self.layout.ut_off..self.layout.ut_off + self.layout.n_ut].to_vec()
        }
    }

    /// Velocity at every Q2 node, `v[2 node + c]`.
    pub fn velocity(&self, s: &MacroState) -> Vec<f64> {
        self.layout
            .vmap
            .iter()
            .map(|m| m.iter().map(|&(u, c)| c * s.x[u]).sum())
            .collect()
    }

    /// Pressures per vertex for one side (`plus = true` for Ω⁺); vertices
    /// of the other side read 0.
    pub fn pressure(&self, s: &MacroState, plus: bool) -> Vec<f64> {
        let idx = if plus { &self.layout.p_plus } else { &self.layout.p_minus };
        idx.iter().map(|o| o.map_or(0.0, |k| s.x[k])).collect()
    }

    pub fn zero_state(&self) -> MacroState {
        MacroState {
            t: 0.0,
            x: vec![0.0; self.layout.n],
            u: vec![0.0; self.layout.n_w],
        }
    }

    fn bulk_load(&self, t: f64, tr: &mut [f64]) {
        let cfg = &self.cfg;
        if cfg.f_plus.is_zero() && cfg.f_minus.is_zero() {
            return;
        }
        let g = &self.grid;
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let plus = ez >= cfg.nz;
                let f = if plus { &cfg.f_plus } else { &cfg.f_minus };
                if f.is_zero() {
                    continue;
                }
                let el = g.vbox(ex, ez);
                let vn = g.element_vnodes(ex, ez);
                let (x0, z0) = (g.xs[ex], g.zs[ez]);
                for q in el.quadrature(3) {
                    let x = x0 + q.reference[0] * el.size[0];
                    let z = z0 + q.reference[1] * el.size[1];
                    let fv = f.eval(t, x, z);
                    for (a, &na) in q.values.iter().enumerate() {
                        for c in 0..2 {
                            let v = q.weight * na * fv[c];
                            for &(u, coef) in &self.layout.vmap[2 * vn[a] + c] {
                                tr[u] += coef * v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// One implicit step of size `cfg.dt`.
    pub fn advance(&self, s: &MacroState) -> Result<(MacroState, StepReport)> {
        let solver = self
            .solver
            .as_ref()
            .ok_or_else(|| Error::Config("macro system assembled without a factorization".into()))?;
        let l = &self.layout;
        let cfg = &self.cfg;
        let (_, b, c) = cfg.tensors.slice_coefficients();
        let ms = cfg.m_stiffness;
        let dt = cfg.dt;
        let t1 = s.t + dt;
        let w = self.plate_velocity(s);
        let ustar: Vec<f64> = s.u.iter().zip(w).map(|(u, w)| u + dt * (1.0 - cfg.theta) * w).collect();

        let mut rhs: Vec<f64> = self.fluid_mass.mul_vec(&s.x).iter().map(|v| v / dt).collect();
        let mw = self.plate_mass.mul_vec(w);
        let kc = self.bending.mul_vec(&ustar);
        let gl = self.beam.hermite_load(|x| cfg.g.eval(t1, x, 0.0));
        for k in 0..l.n_w {
            rhs[l.w_off + k] += cfg.m_inertia * mw[k] / dt - ms * c * kc[k] + gl[k];
        }
        if l.n_ut > 0 && b != 0.0 {
            let kb = self.coupling.mul_vec(&ustar);
            for k in 0..l.n_ut {
                rhs[l.ut_off + k] -= ms * b * kb[k] / self.theta_dt();
            }
        }
        self.bulk_load(t1, &mut rhs);

        let rep = solver.solve(&rhs);
        let x = rep.x;
        let wn = &x[l.w_off..l.w_off + l.n_w];
        let u = ustar.iter().zip(wn).map(|(u, w)| u + cfg.theta * dt * w).collect();
        let next = MacroState { t: t1, x, u };
        let divergence = self.divergence_residual(&next);
        Ok((
            next,
            StepReport {
                residual: rep.residual,
                divergence,
            },
        ))
    }

    /// `‖B v‖₂`
    pub fn divergence_residual(&self, s: &MacroState) -> f64 {
        norm2(&self.divergence.mul_vec(&s.x))
    }

    pub fn energy(&self, s: &MacroState) -> f64 {
        let cfg = &self.cfg;
        let (a, b, c) = cfg.tensors.slice_coefficients();
        let w = self.plate_velocity(s);
        let ut = self.u_tilde(s);
        let kinetic = 0.5 * self.fluid_mass.quadratic_form(&s.x) + 0.5 * cfg.m_inertia * self.plate_mass.quadratic_form(w);
        let mut elastic = c * self.bending.quadratic_form(&s.u);
        if self.layout.n_ut > 0 {
            elastic += a * self.membrane.quadratic_form(&ut) + 2.0 * b * dot(&ut, &self.coupling.mul_vec(&s.u));
        }
        kinetic + 0.5 * cfg.m_stiffness * elastic
    }

    /// Interpolates `v⁰±` at the nodes, checks the trace constraints, and
    /// projects onto the discretely divergence-free space with the plate at
    /// rest.
    pub fn initial_state(&self) -> Result<MacroState> {
        let cfg = &self.cfg;
        let g = &self.grid;
        let l = &self.layout;
        let mut s = self.zero_state();
        if cfg.v0_plus.is_zero() && cfg.v0_minus.is_zero() {
            return Ok(s);
        }
        let nv = g.n_vnodes();
        let mut v0 = vec![0.0; 2 * nv];
        let (mut wall, mut tangential, mut normal, mut scale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for node in 0..nv {
            let (i, j) = g.vnode_ij(node);
            let [x, z] = g.vnode_xz(node);
            let vals: Vec<[f64; 2]> = if j == 2 * cfg.nz {
                vec![cfg.v0_plus.eval(0.0, x, z), cfg.v0_minus.eval(0.0, x, z)]
            } else if j > 2 * cfg.nz {
                vec![cfg.v0_plus.eval(0.0, x, z)]
            } else {
                vec![cfg.v0_minus.eval(0.0, x, z)]
            };
            for v in &vals {
                if !(v[0].is_finite() && v[1].is_finite()) {
                    return Err(Error::Config(format!("initial velocity is not finite at ({x}, {z})")));
                }
                scale = scale.max(v[0].abs()).max(v[1].abs());
                if i == 0 || i == 2 * g.nx() {
                    wall = wall.max(v[0].abs()).max(v[1].abs());
                } else if j == 2 * cfg.nz {
                    tangential = tangential.max(v[0].abs());
                    normal = normal.max(v[1].abs());
                }
            }
            v0[2 * node] = vals[0][0];
            v0[2 * node + 1] = vals[0][1];
        }
        let tol = 1e-12 * scale.max(1.0);
        for (name, mag) in [
            ("no-slip on the lateral walls", wall),
            ("zero tangential trace on Σ", tangential),
            ("vertical trace on Σ equal to the plate velocity (plate at rest)", normal),
        ] {
            if mag > tol {
                return Err(Error::Projection {
                    constraint: name.to_string(),
                    magnitude: mag,
                });
            }
        }

        // full-space mass applied to v0, restricted to the free rows
        let mut mv = vec![0.0; l.n_vfree];
        let mut cache = StokesCache::default();
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let el = cache.get(g.element_size(ex, ez));
                let vn = g.element_vnodes(ex, ez);
                for i in 0..VDOFS {
                    for &(u, c) in &l.vmap[2 * vn[i / 2] + i % 2] {
                        if u < l.n_vfree {
                            let s: f64 = (0..VDOFS).map(|j| el.mass[i * VDOFS + j] * v0[2 * vn[j / 2] + j % 2]).sum();
                            mv[u] += c * s;
                        }
                    }
                }
            }
        }
        let n = l.n;
        let mut t = TripletBuilder::new(n, n);
        for i in 0..l.n_vfree {
            for (j, v) in self.fluid_mass.row(i) {
                if j < l.n_vfree {
                    t.push(i, j, v);
                }
            }
        }
        for i in l.n_vfree..l.pp_off {
            t.push(i, i, 1.0);
        }
        for i in l.pp_off..n {
            for (j, v) in self.divergence.row(i) {
                if j < l.n_vfree {
                    t.push(i, j, v);
                    t.push(j, i, v);
                }
            }
        }
        let op = t.build();
        let mut rhs = vec![0.0; n];
        rhs[..l.n_vfree].copy_from_slice(&mv);
        let solve_cfg = SolveConfig {
            saddle_method: cfg.saddle_method,
            ..SolveConfig::default()
        };
        let rep = OrderedSolver::factor(&op, &l.keys, &solve_cfg)?.solve(&rhs);
        s.x[..l.n_vfree].copy_from_slice(&rep.x[..l.n_vfree]);
        Ok(s)
    }

    /// Bulk velocity, its gradient and pressure at `(x, z)`; the side is
    /// chosen by the sign of `z` (Σ itself counts as Ω⁺).
    pub fn eval_bulk(&self, s: &MacroState, v_full: &[f64], x: f64, z: f64) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let (v, g) = self.grid.eval_velocity(v_full, x, z);
        let (ex, ez, r) = self.grid.locate(x, z);
        let plus = z >= 0.0;
        // keep the element on the requested side
        let ez = if plus { ez.max(self.cfg.nz) } else { ez.min(self.cfg.nz - 1) };
        let r1 = if plus && ez == self.cfg.nz && z <= 0.0 { 0.0 } else { r[1] };
        let idx = if plus { &self.layout.p_plus } else { &self.layout.p_minus };
        let (vals, _) = self.grid.pbox(ex, ez).eval(&[r[0], r1]);
        let p = self
            .grid
            .element_pnodes(ex, ez)
            .iter()
            .zip(&vals)
            .map(|(&n, v)| v * idx[n].map_or(0.0, |k| s.x[k]))
            .sum();
        (v, g, p)
    }

    pub fn eval_plate(&self, s: &MacroState, x: f64) -> PlatePoint {
        let (u, u_x, u_xx) = self.beam.eval_hermite(&s.u, x);
        let (w, w_x, _) = self.beam.eval_hermite(self.plate_velocity(s), x);
        let (ut, ut_x) = self.beam.eval_linear(&self.u_tilde(s), x);
        PlatePoint {
            u,
            u_x,
            u_xx,
            w,
            w_x,
            ut,
            ut_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroSeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub midpoint_displacement: f64,
    pub divergence: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct MacroRun {
    pub config: MacroConfig,
    pub states: Vec<MacroState>,
    pub series: Vec<MacroSeriesRow>,
}

pub fn assemble_macro_system(cfg: &MacroConfig) -> Result<MacroSystem> {
    MacroSystem::assemble(cfg)
}

/// Runs from the projected initial data to `T`, keeping every state.
pub fn run_macro(cfg: &MacroConfig) -> Result<MacroRun> {
    let sys = MacroSystem::assemble(cfg)?;
    let mut state = sys.initial_state()?;
    let mid = cfg.l / 2.0;
    let row = |step: usize, s: &MacroState, residual: f64| MacroSeriesRow {
        step,
        t: s.t,
        energy: sys.energy(s),
        midpoint_displacement: sys.beam.eval_hermite(&s.u, mid).0,
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
    Ok(MacroRun {
        config: cfg.clone(),
        states,
        series,
    })
}
