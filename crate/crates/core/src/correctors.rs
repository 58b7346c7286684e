//! Approximation fields built from the effective solution and the cell
//! correctors, and their comparison with the ε-resolved solution.

use serde::Serialize;

use crate::cell::{CellLoadCase, CellOperator, CellSolution, LoadKind};
use crate::error::{Error, Result};
use crate::macro_fsi::{MacroRun, MacroState, MacroSystem, PlatePoint};
use crate::micro::{MicroMesh, MicroRun, Region};

/// Cell solutions together with the operator they were computed on.
#[derive(Debug, Clone)]
pub struct CellCorrectors {
    pub op: CellOperator,
    pub solutions: Vec<CellSolution>,
}

impl CellCorrectors {
    pub fn new(op: CellOperator, solutions: Vec<CellSolution>) -> Result<Self> {
        if let Some(s) = solutions.iter().find(|s| s.geometry_hash != op.geometry_hash()) {
            return Err(Error::Mismatch(format!(
                "cell solution {} was computed on geometry {}, not {}",
                s.case.label(),
                s.geometry_hash,
                op.geometry_hash()
            )));
        }
        Ok(Self { op, solutions })
    }

    pub fn solution(&self, case: &CellLoadCase) -> Option<&CellSolution> {
        self.solutions.iter().find(|s| s.case == *case)
    }

    fn in_plane(&self) -> usize {
        self.op.mesh.dim - 1
    }

    /// `(weight, solution)` pairs of `Σ_ij D_ij χ_ij + H_ij χ^B_ij`; zero
    /// coefficients need no solution.
    fn terms(&self, d: &[[f64; 2]; 2], h: &[[f64; 2]; 2]) -> Result<Vec<(f64, &CellSolution)>> {
        let m = self.in_plane();
        let mut out = Vec::new();
        for (coef, kind) in [(d, LoadKind::Standard), (h, LoadKind::Bending)] {
            for i in 0..m {
                for j in 0..m {
                    if coef[i][j] == 0.0 {
                        continue;
                    }
                    let case = CellLoadCase::new(i, j, kind);
                    let s = self
                        .solution(&case)
                        .ok_or_else(|| Error::Mismatch(format!("missing cell solution {}", case.label())))?;
                    out.push((coef[i][j], s));
                }
            }
        }
        Ok(out)
    }

    /// Value and `y`-gradient of `u₂` at cell point `y`.
    pub fn u2_at(&self, d: &[[f64; 2]; 2], h: &[[f64; 2]; 2], y: &[f64]) -> Result<([f64; 3], [[f64; 3]; 3])> {
        let e = self.op.locate(y);
        let mut val = [0.0; 3];
        let mut grad = [[0.0; 3]; 3];
        if !self.op.mesh.spec.indicator[e] {
            return Err(Error::Mismatch(format!("cell point {y:?} is not in the solid")));
        }
        for (c, s) in self.terms(d, h)? {
            let (v, g) = self.op.evaluate_with_gradient(&s.displacement, e, y);
            for a in 0..3 {
                val[a] += c * v[a];
                for k in 0..3 {
                    grad[a][k] += c * g[a][k];
                }
            }
        }
        Ok((val, grad))
    }
}

/// `u₂ = Σ D_ij(ũ) χ_ij + ∂_ij u₀ χ^B_ij` on the solid dofs of the cell
/// mesh, for in-plane strain `d` and Hessian `h`.
pub fn reconstruct_u2(cor: &CellCorrectors, d: &[[f64; 2]; 2], h: &[[f64; 2]; 2]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; cor.op.mesh.solid_dofs.n_dofs()];
    for (c, s) in cor.terms(d, h)? {
        for (o, v) in out.iter_mut().zip(&s.displacement) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Plate data at one abscissa and step, with `∂_t ũ` by backward difference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlateSample {
    pub p: PlatePoint,
    pub dut: f64,
}

/// `(ε ũ − x₃ ∂ₓu₀, u₀)`: the first two orders of the layer displacement.
pub fn first_orders(eps: f64, z: f64, ut: f64, u_x: f64, u: f64) -> [f64; 2] {
    [eps * ut - z * u_x, u]
}

/// Approximate layer fluid velocity `(ε[∂ₜũ − (x₃/ε) ∂ₓ∂ₜu₀], ∂ₜu₀)`.
pub fn layer_fluid_velocity(eps: f64, z: f64, s: &PlateSample) -> [f64; 2] {
    let y3 = z / eps;
    [eps * (s.dut - y3 * s.p.w_x), s.p.w]
}

/// Time derivative of [`first_orders`] from the plate rates.
pub fn first_orders_rate(eps: f64, z: f64, s: &PlateSample) -> [f64; 2] {
    first_orders(eps, z, s.dut, s.p.w_x, s.p.w)
}

/// The effective solution lifted to the ε-geometry.
pub struct Reconstruction<'a> {
    pub epsilon: f64,
    pub system: &'a MacroSystem,
    pub states: &'a [MacroState],
    pub correctors: Option<&'a CellCorrectors>,
}

impl<'a> Reconstruction<'a> {
    pub fn new(system: &'a MacroSystem, run: &'a MacroRun, correctors: Option<&'a CellCorrectors>, eps: f64) -> Self {
        Self {
            epsilon: eps,
            system,
            states: &run.states,
            correctors,
        }
    }

    pub fn plate(&self, n: usize, x: f64) -> PlateSample {
        let sys = self.system;
        let p = sys.eval_plate(&self.states[n], x);
        let dut = if n == 0 {
            0.0
        } else {
            let prev = sys.eval_plate(&self.states[n - 1], x);
            (p.ut - prev.ut) / sys.cfg.dt
        };
        PlateSample { p, dut }
    }

    /// `u_app` in the solid at `(x, z)`.
    pub fn solid_displacement(&self, s: &PlateSample, x: f64, z: f64) -> Result<[f64; 2]> {
        let eps = self.epsilon;
        let mut u = first_orders(eps, z, s.p.ut, s.p.u_x, s.p.u);
        if let Some(c) = self.correctors {
            let (v, _) = c.u2_at(&[[s.p.ut_x, 0.0], [0.0, 0.0]], &[[s.p.u_xx, 0.0], [0.0, 0.0]], &cell_point(eps, x, z))?;
            u[0] += eps * eps * v[0];
            u[1] += eps * eps * v[1];
        }
        Ok(u)
    }

    /// Leading-order `ε⁻¹ D(u_app)`: `(∂ₓũ − y₃ ∂ₓₓu₀) e₁⊗e₁ + D_y(u₂)`.
    pub fn scaled_strain(&self, s: &PlateSample, x: f64, z: f64) -> Result<[[f64; 2]; 2]> {
        let eps = self.epsilon;
        let mut e = [[s.p.ut_x - z / eps * s.p.u_xx, 0.0], [0.0, 0.0]];
        if let Some(c) = self.correctors {
            let (_, g) = c.u2_at(&[[s.p.ut_x, 0.0], [0.0, 0.0]], &[[s.p.u_xx, 0.0], [0.0, 0.0]], &cell_point(eps, x, z))?;
            for i in 0..2 {
                for j in 0..2 {
                    e[i][j] += 0.5 * (g[i][j] + g[j][i]);
                }
            }
        }
        Ok(e)
    }
}

fn cell_point(eps: f64, x: f64, z: f64) -> [f64; 2] {
    [(x / eps).rem_euclid(1.0), z / eps]
}

/// Quadrature point of the micro mesh used for space integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub z: f64,
    pub weight: f64,
    pub region: Region,
}

/// Fields at one sample. In the solid `v` is the solid velocity, `u` the
/// displacement and `strain` is `ε⁻¹ D(u)`; elsewhere `u`, `strain` are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub v: [f64; 2],
    pub p: f64,
    pub u: [f64; 2],
    pub strain: [[f64; 2]; 2],
}

/// Something that can be sampled on the ε-geometry step by step.
pub trait SampledFields {
    fn epsilon(&self) -> f64;
    fn times(&self) -> Vec<f64>;
    fn sample_step(&self, n: usize, points: &[SamplePoint]) -> Result<Vec<Sample>>;
}

pub fn sample_points(mesh: &MicroMesh) -> Vec<SamplePoint> {
    let g = &mesh.grid;
    let mut out = Vec::with_capacity(9 * g.n_elements());
    for ex in 0..g.nx() {
        for ez in 0..g.nz() {
            let el = g.vbox(ex, ez);
            for q in el.quadrature(3) {
                out.push(SamplePoint {
                    x: g.xs[ex] + q.reference[0] * el.size[0],
                    z: g.zs[ez] + q.reference[1] * el.size[1],
                    weight: q.weight,
                    region: mesh.region(ex, ez),
                });
            }
        }
    }
    out
}

impl SampledFields for MicroRun {
    fn epsilon(&self) -> f64 {
        self.system.mesh.epsilon
    }

    fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    fn sample_step(&self, n: usize, points: &[SamplePoint]) -> Result<Vec<Sample>> {
        let sys = &self.system;
        let s = &self.states[n];
        let g = &sys.mesh.grid;
        let eps = sys.mesh.epsilon;
        let v = sys.velocity(s);
        let u = sys.displacement(s);
        let pressures = [
            sys.pressure(s, Region::BulkPlus),
            sys.pressure(s, Region::LayerFluid),
            sys.pressure(s, Region::BulkMinus),
        ];
        Ok(points
            .iter()
            .map(|pt| {
                let (vv, _) = g.eval_velocity(&v, pt.x, pt.z);
                let mut out = Sample {
                    v: vv,
                    ..Sample::default()
                };
                match pt.region {
                    Region::LayerSolid => {
                        let (uu, ug) = g.eval_velocity(&u, pt.x, pt.z);
                        out.u = uu;
                        for i in 0..2 {
                            for j in 0..2 {
                                out.strain[i][j] = 0.5 * (ug[i][j] + ug[j][i]) / eps;
                            }
                        }
                    }
                    r => {
                        let k = match r {
                            Region::BulkPlus => 0,
                            Region::LayerFluid => 1,
                            _ => 2,
                        };
                        out.p = g.eval_pressure(&pressures[k], pt.x, pt.z);
                    }
                }
                out
            })
            .collect())
    }
}

impl SampledFields for Reconstruction<'_> {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    fn sample_step(&self, n: usize, points: &[SamplePoint]) -> Result<Vec<Sample>> {
        let sys = self.system;
        let s = &self.states[n];
        let eps = self.epsilon;
        let v_full = sys.velocity(s);
        let mut out = Vec::with_capacity(points.len());
        let mut cached: Option<(f64, PlateSample)> = None;
        for pt in points {
            let sample = match pt.region {
                Region::BulkPlus | Region::BulkMinus => {
                    let zm = if pt.region == Region::BulkPlus { pt.z - eps } else { pt.z + eps };
                    let (v, _, p) = sys.eval_bulk(s, &v_full, pt.x, zm);
                    Sample {
                        v,
                        p,
                        ..Sample::default()
                    }
                }
                r => {
                    let plate = match cached {
                        Some((x, ps)) if x == pt.x => ps,
                        _ => {
                            let ps = self.plate(n, pt.x);
                            cached = Some((pt.x, ps));
                            ps
                        }
                    };
                    let v = layer_fluid_velocity(eps, pt.z, &plate);
                    if r == Region::LayerFluid {
                        Sample {
                            v,
                            ..Sample::default()
                        }
                    } else {
                        Sample {
                            v,
                            p: 0.0,
                            u: self.solid_displacement(&plate, pt.x, pt.z)?,
                            strain: self.scaled_strain(&plate, pt.x, pt.z)?,
                        }
                    }
                }
            };
            out.push(sample);
        }
        Ok(out)
    }
}

/// Whether a row measures a discrepancy that should shrink with ε or a
/// pre-scaled quantity that should only stay bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Error,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub quantity: String,
    pub kind: RowKind,
    /// Relative space-time L² error, or an absolute norm when the reference
    /// vanishes identically (layer pressure).
    pub value: f64,
    /// Space-time L² norm of the reference.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub quantity: String,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ErrorRow>,
    pub slopes: Vec<SlopeRow>,
    pub notice: Option<String>,
}

pub const QUANTITIES: [&str; 8] = [
    "bulk_velocity_plus",
    "bulk_velocity_minus",
    "layer_vertical_displacement",
    "layer_inplane_displacement",
    "layer_scaled_strain",
    "layer_fluid_velocity",
    "layer_pressure",
    "layer_pressure_scaled",
];

/// Space-time L² discrepancies of `a` against the reference `b` on the
/// sample points (rectangle rule over steps 1..N).
pub fn compare_fields(a: &dyn SampledFields, b: &dyn SampledFields, points: &[SamplePoint]) -> Result<Vec<ErrorRow>> {
    let eps = a.epsilon();
    if (eps - b.epsilon()).abs() > 1e-14 {
        return Err(Error::Mismatch(format!("ε differs: {} vs {}", eps, b.epsilon())));
    }
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| (x - y).abs() > 1e-9 * (1.0 + x.abs())) {
        return Err(Error::Mismatch(format!(
            "time grids differ ({} vs {} levels)",
            ta.len(),
            tb.len()
        )));
    }
    let q = QUANTITIES.len();
    let (mut num, mut den) = (vec![0.0; q], vec![0.0; q]);
    for n in 1..ta.len() {
        let dt = ta[n] - ta[n - 1];
        let (sa, sb) = (a.sample_step(n, points)?, b.sample_step(n, points)?);
        for ((pt, x), y) in points.iter().zip(&sa).zip(&sb) {
            let w = dt * pt.weight;
            let mut add = |k: usize, d: f64, r: f64| {
                num[k] += w * d * d;
                den[k] += w * r * r;
            };
            match pt.region {
                Region::BulkPlus | Region::BulkMinus => {
                    let k = usize::from(pt.region == Region::BulkMinus);
                    for c in 0..2 {
                        add(k, x.v[c] - y.v[c], y.v[c]);
                    }
                }
                Region::LayerSolid => {
                    add(2, x.u[1] - y.u[1], y.u[1]);
                    add(3, (x.u[0] - y.u[0]) / eps, y.u[0] / eps);
                    for i in 0..2 {
                        for j in 0..2 {
                            add(4, x.strain[i][j] - y.strain[i][j], y.strain[i][j]);
                        }
                    }
                }
                Region::LayerFluid => {
                    for c in 0..2 {
                        add(5, x.v[c] - y.v[c], y.v[c]);
                    }
                    add(6, x.p - y.p, y.p);
                    add(7, (x.p - y.p) / eps.sqrt(), y.p / eps.sqrt());
                }
            }
        }
    }
    Ok(QUANTITIES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (e, r) = (num[k].sqrt(), den[k].sqrt());
            let absolute = k >= 6 || r == 0.0;
            ErrorRow {
                epsilon: eps,
                quantity: name.to_string(),
                kind: if k == 7 { RowKind::Bounded } else { RowKind::Error },
                value: if absolute { e } else { e / r },
                reference: r,
            }
        })
        .collect())
}

/// Error table across ε with least-squares log-log slopes.
pub fn compare_runs(pairs: &[(&MicroRun, &Reconstruction)]) -> Result<ComparisonTable> {
    let mut rows = Vec::new();
    for (micro, rec) in pairs {
        let mesh = &micro.system.mesh;
        let (lm, hm) = (micro.system.cfg.l, micro.system.cfg.h);
        let mc = &rec.system.cfg;
        if (lm - mc.l).abs() > 1e-12 || (hm - mc.h).abs() > 1e-12 {
            return Err(Error::Mismatch(format!(
                "micro extent L={lm}, H={hm} differs from macro L={}, H={}",
                mc.l, mc.h
            )));
        }
        rows.extend(compare_fields(*micro, *rec, &sample_points(mesh))?);
    }
    Ok(with_slopes(rows))
}

pub fn with_slopes(rows: Vec<ErrorRow>) -> ComparisonTable {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 2 {
        return ComparisonTable {
            rows,
            slopes: Vec::new(),
            notice: Some(format!(
                "slopes omitted: {} ε value(s), at least 2 are needed",
                eps.len()
            )),
        };
    }
    let slopes = QUANTITIES
        .iter()
        .filter_map(|q| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.quantity == *q && r.value > 0.0)
                .map(|r| (r.epsilon.ln(), r.value.ln()))
                .collect();
            (pts.len() >= 2).then(|| SlopeRow {
                quantity: q.to_string(),
                slope: fit_slope(&pts),
                points: pts.len(),
            })
        })
        .collect();
    ComparisonTable {
        rows,
        slopes,
        notice: None,
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellOperator;
    use crate::fem::elasticity::Lame;
    use crate::fem::solve::SolveConfig;
    use crate::geometry::{build_cell_mesh, Material, MicrostructureSpec};

    fn layer() -> MicrostructureSpec {
        MicrostructureSpec::from_fn(2, vec![4, 8], Material::Lame(Lame::new(1.0, 1.0)), |y| {
            y[1].abs() < 0.5 && !(y[0] > 0.25 && y[0] < 0.75 && y[1].abs() > 0.25)
        })
        .unwrap()
    }

    fn correctors() -> CellCorrectors {
        let op = CellOperator::new(&build_cell_mesh(&layer())).unwrap();
        let sols = op.solve_all(&SolveConfig::default(), 1).unwrap();
        CellCorrectors::new(op, sols).unwrap()
    }

    #[test]
    fn u2_is_linear_in_the_macro_derivatives() {
        let c = correctors();
        let z = [[0.0; 2]; 2];
        let one = [[1.0, 0.0], [0.0, 0.0]];
        let two = [[2.0, 0.0], [0.0, 0.0]];
        assert!(reconstruct_u2(&c, &z, &z).unwrap().iter().all(|&v| v == 0.0));
        let chi = &c.solution(&CellLoadCase::new(0, 0, LoadKind::Standard)).unwrap().displacement;
        let chib = &c.solution(&CellLoadCase::new(0, 0, LoadKind::Bending)).unwrap().displacement;
        assert_eq!(&reconstruct_u2(&c, &one, &z).unwrap(), chi);
        let mixed = reconstruct_u2(&c, &one, &two).unwrap();
        for ((m, a), b) in mixed.iter().zip(chi).zip(chib) {
            assert_eq!(*m, a + 2.0 * b);
        }
    }

    #[test]
    fn missing_solution_is_an_error() {
        let mut c = correctors();
        c.solutions.retain(|s| s.case.kind == LoadKind::Standard);
        let z = [[0.0; 2]; 2];
        assert!(reconstruct_u2(&c, &z, &z).is_ok());
        assert!(reconstruct_u2(&c, &z, &[[1.0, 0.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn fluid_velocity_is_the_rate_of_the_first_orders() {
        let s = PlateSample {
            p: PlatePoint {
                u: 0.3,
                u_x: -1.7,
                u_xx: 2.0,
                w: 0.123456789,
                w_x: -3.3,
                ut: 0.5,
                ut_x: 0.1,
            },
            dut: 0.77,
        };
        for eps in [0.5, 0.125, 1.0 / 32.0] {
            for z in [-0.9 * eps, 0.0, 0.31 * eps] {
                let a = layer_fluid_velocity(eps, z, &s);
                let b = first_orders_rate(eps, z, &s);
                assert!((a[0] - b[0]).abs() <= 1e-14 && (a[1] - b[1]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn slope_fit_and_notice() {
        assert!((fit_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]) - 2.0).abs() < 1e-14);
        let row = |e: f64, v: f64| ErrorRow {
            epsilon: e,
            quantity: QUANTITIES[0].into(),
            kind: RowKind::Error,
            value: v,
            reference: 1.0,
        };
        let t = with_slopes(vec![row(0.25, 0.1)]);
        assert!(t.slopes.is_empty() && t.notice.is_some());
        let t = with_slopes(vec![row(0.25, 0.1), row(0.125, 0.025)]);
        assert!((t.slopes[0].slope - 2.0).abs() < 1e-12);
    }
}
