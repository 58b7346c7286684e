//! Stage artifacts: what each pipeline stage writes and how the next one
//! reads it back.

use std::path::Path;

use serde_json::{json, Value};

use super::{json_bytes, read_blob, read_json, ArtifactWriter, Blob, CsvTable, CsvValue, VtkField, VtkGrid};
use crate::cell::{CellDiagnostics, CellLoadCase, CellOperator, CellSolution};
use crate::correctors::{CellCorrectors, ComparisonTable};
use crate::error::{Error, Result};
use crate::geometry::spec::sha256_hex;
use crate::geometry::{build_cell_mesh, CellMesh, MicrostructureSpec};
use crate::macro_fsi::{MacroConfig, MacroRun, MacroSeriesRow, MacroState, MacroSystem};
use crate::micro::{AprioriReport, MicroConfig, MicroRun, MicroSeriesRow, MicroState, MicroSystem, Region};
use crate::tensors::{AuditReport, EffectivePlateTensors};

pub const MICROSTRUCTURE_FILE: &str = "microstructure.json";
pub const CELL_SOLUTIONS_FILE: &str = "cell_solutions.bin";
pub const TENSORS_FILE: &str = "tensors.json";
pub const CONFIG_FILE: &str = "config.json";
pub const STATES_FILE: &str = "states.bin";
pub const SERIES_FILE: &str = "series.csv";

/// SHA-256 of the canonical JSON of a config.
pub fn config_hash(v: &Value) -> String {
    sha256_hex(&json_bytes(v))
}

fn node_grid_order(mesh: &CellMesh) -> ([usize; 3], Vec<usize>) {
    let n = &mesh.node_grid.n;
    let mut dims = [1; 3];
    dims[..n.len()].copy_from_slice(n);
    let mut order = Vec::with_capacity(mesh.nodes.len());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = [i, j, k];
                order.push(mesh.node_grid.index(&c[..n.len()]));
            }
        }
    }
    (dims, order)
}

fn voxel_order(spec: &MicrostructureSpec) -> Vec<usize> {
    let g = spec.grid();
    let mut dims = [1; 3];
    dims[..spec.dimension].copy_from_slice(&spec.resolution);
    let mut order = Vec::with_capacity(g.n_voxels());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = [i, j, k];
                order.push(g.index(&c[..spec.dimension]));
            }
        }
    }
    order
}

/// One cell solution on the voxel node grid, zero on fluid-only nodes.
pub fn cell_solution_vtk(mesh: &CellMesh, sol: &CellSolution) -> VtkGrid {
    let (dims, order) = node_grid_order(mesh);
    let points = order.iter().map(|&p| mesh.nodes[p]).collect();
    let disp = order
        .iter()
        .map(|&p| {
            let mut u = [0.0; 3];
            for (c, uc) in u.iter_mut().enumerate().take(mesh.dim) {
                if let Some(d) = mesh.solid_dofs.dof(p, c) {
                    *uc = sol.displacement[d];
                }
            }
            u
        })
        .collect();
    let solid = voxel_order(&mesh.spec)
        .iter()
        .map(|&v| if mesh.spec.indicator[v] { 1.0 } else { 0.0 })
        .collect();
    VtkGrid::new(&sol.case.label(), dims, points)
        .point_field("displacement", VtkField::Vector(disp))
        .cell_field("solid", VtkField::Scalar(solid))
}

pub fn save_cell(
    w: &mut ArtifactWriter,
    spec: &MicrostructureSpec,
    mesh: &CellMesh,
    solutions: &[CellSolution],
    diagnostics: &[CellDiagnostics],
) -> Result<()> {
    w.json(MICROSTRUCTURE_FILE, &spec.to_json())?;
    let cases: Vec<Value> = solutions
        .iter()
        .map(|s| {
            json!({
                "case": s.case,
                "label": s.case.label(),
                "residual": s.residual,
                "iterations": s.iterations,
                "tolerance": s.tolerance,
                "geometry_hash": s.geometry_hash,
            })
        })
        .collect();
    let mut blob = Blob::new(json!({ "cases": cases }));
    for s in solutions {
        blob.push(s.case.label(), s.displacement.clone());
    }
    w.blob(CELL_SOLUTIONS_FILE, &blob)?;
    let diag: Vec<Value> = solutions
        .iter()
        .zip(diagnostics)
        .map(|(s, d)| json!({"case": s.case.label(), "diagnostics": d}))
        .collect();
    w.json("cell_diagnostics.json", &Value::Array(diag))?;
    for s in solutions {
        w.vtk(&format!("{}.vtk", s.case.label()), &cell_solution_vtk(mesh, s))?;
    }
    Ok(())
}

/// Reads the microstructure and cell solutions a `cell` stage wrote.
pub fn load_cell(dir: &Path) -> Result<(MicrostructureSpec, Vec<CellSolution>)> {
    let spec = MicrostructureSpec::read(&dir.join(MICROSTRUCTURE_FILE))?;
    let path = dir.join(CELL_SOLUTIONS_FILE);
    let blob = read_blob(&path)?;
    let what = path.display().to_string();
    let cases = blob.meta["cases"]
        .as_array()
        .ok_or_else(|| Error::parse(&what, "missing case list"))?;
    let mut out = Vec::with_capacity(cases.len());
    for c in cases {
        let case: CellLoadCase =
            serde_json::from_value(c["case"].clone()).map_err(|e| Error::parse(&what, e.to_string()))?;
        let label = case.label();
        let displacement = blob
            .get(&label)
            .ok_or_else(|| Error::parse(&what, format!("no data for {label}")))?
            .to_vec();
        out.push(CellSolution {
            case,
            displacement,
            residual: c["residual"].as_f64().unwrap_or(f64::NAN),
            iterations: c["iterations"].as_u64().unwrap_or(0) as usize,
            tolerance: c["tolerance"].as_f64().unwrap_or(f64::NAN),
            geometry_hash: c["geometry_hash"].as_str().unwrap_or_default().to_string(),
        });
    }
    Ok((spec, out))
}

/// Rebuilds the cell operator and checks the stored solutions against it.
pub fn load_correctors(dir: &Path) -> Result<CellCorrectors> {
    let (spec, sols) = load_cell(dir)?;
    let op = CellOperator::new(&build_cell_mesh(&spec))?;
    CellCorrectors::new(op, sols)
}

pub fn save_tensors(w: &mut ArtifactWriter, t: &EffectivePlateTensors, audit: &AuditReport) -> Result<()> {
    w.json(TENSORS_FILE, &t.to_json())?;
    w.json("audit.json", &serde_json::to_value(audit).expect("serializable"))?;
    Ok(())
}

fn states_blob(kind: &str, states: impl Iterator<Item = (f64, Vec<f64>, Vec<f64>)>) -> Blob {
    let mut blob = Blob::new(Value::Null);
    let mut times = Vec::new();
    for (n, (t, x, u)) in states.enumerate() {
        times.push(t);
        blob.push(format!("x{n}"), x);
        blob.push(format!("u{n}"), u);
    }
    blob.meta = json!({"kind": kind, "times": times});
    blob
}

fn read_states(dir: &Path, kind: &str) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
    let path = dir.join(STATES_FILE);
    let blob = read_blob(&path)?;
    let what = path.display().to_string();
    if blob.meta["kind"] != json!(kind) {
        return Err(Error::Mismatch(format!("{what} does not hold {kind} states")));
    }
    let times = blob.meta["times"]
        .as_array()
        .ok_or_else(|| Error::parse(&what, "missing times"))?;
    times
        .iter()
        .enumerate()
        .map(|(n, t)| {
            let get = |name: String| {
                blob.get(&name)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::parse(&what, format!("missing array {name}")))
            };
            Ok((t.as_f64().unwrap_or(f64::NAN), get(format!("x{n}"))?, get(format!("u{n}"))?))
        })
        .collect()
}

fn f64_cell(v: &CsvValue) -> f64 {
    match v {
        CsvValue::Float(x) => *x,
        CsvValue::Int(i) => *i as f64,
        CsvValue::Text(_) => f64::NAN,
    }
}

fn read_series(dir: &Path) -> Result<CsvTable> {
    let path = dir.join(SERIES_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    CsvTable::parse(&bytes)
}

pub fn macro_series_table(rows: &[MacroSeriesRow]) -> CsvTable {
    let mut t = CsvTable::new(&["step", "t", "energy", "midpoint_displacement", "divergence", "residual"]);
    for r in rows {
        t.push(vec![
            r.step.into(),
            r.t.into(),
            r.energy.into(),
            r.midpoint_displacement.into(),
            r.divergence.into(),
            r.residual.into(),
        ]);
    }
    t
}

/// Bulk velocity on the Q2 node grid; the rows `z = ±H` and the interface
/// are included.
pub fn macro_snapshot_vtk(sys: &MacroSystem, s: &MacroState) -> VtkGrid {
    let g = &sys.grid;
    let v = sys.velocity(s);
    let (ni, nj) = (2 * g.nx() + 1, g.vcol());
    let mut points = Vec::with_capacity(ni * nj);
    let mut vel = Vec::with_capacity(ni * nj);
    for j in 0..nj {
        for i in 0..ni {
            let n = g.vnode(i, j);
            let [x, z] = g.vnode_xz(n);
            points.push([x, z, 0.0]);
            vel.push([v[2 * n], v[2 * n + 1], 0.0]);
        }
    }
    VtkGrid::new(&format!("macro t={:.6}", s.t), [ni, nj, 1], points).point_field("velocity", VtkField::Vector(vel))
}

pub fn save_macro_run(w: &mut ArtifactWriter, sys: &MacroSystem, run: &MacroRun) -> Result<()> {
    w.json(CONFIG_FILE, &run.config.to_json())?;
    w.csv(SERIES_FILE, &macro_series_table(&run.series))?;
    w.blob(
        STATES_FILE,
        &states_blob("macro", run.states.iter().map(|s| (s.t, s.x.clone(), s.u.clone()))),
    )?;
    let stride = run.config.snapshot_stride;
    if stride > 0 {
        for (n, s) in run.states.iter().enumerate().step_by(stride) {
            w.vtk(&format!("snapshots/macro_{n:05}.vtk"), &macro_snapshot_vtk(sys, s))?;
        }
    }
    Ok(())
}

/// A stored macro run together with its (unfactored) operators.
pub fn load_macro_run(dir: &Path) -> Result<(MacroSystem, MacroRun)> {
    let config = MacroConfig::read(&dir.join(CONFIG_FILE))?;
    let sys = MacroSystem::operators(&config)?;
    let states: Vec<MacroState> = read_states(dir, "macro")?
        .into_iter()
        .map(|(t, x, u)| MacroState { t, x, u })
        .collect();
    if states.iter().any(|s| s.x.len() != sys.layout.n) {
        return Err(Error::Mismatch(format!("{}: state length does not match the config", dir.display())));
    }
    let series = read_series(dir)?
        .rows
        .iter()
        .map(|r| MacroSeriesRow {
            step: f64_cell(&r[0]) as usize,
            t: f64_cell(&r[1]),
            energy: f64_cell(&r[2]),
            midpoint_displacement: f64_cell(&r[3]),
            divergence: f64_cell(&r[4]),
            residual: f64_cell(&r[5]),
        })
        .collect();
    Ok((sys, MacroRun { config, states, series }))
}

pub fn micro_series_table(rows: &[MicroSeriesRow]) -> CsvTable {
    let mut t = CsvTable::new(&["step", "t", "energy", "divergence", "residual"]);
    for r in rows {
        t.push(vec![r.step.into(), r.t.into(), r.energy.into(), r.divergence.into(), r.residual.into()]);
    }
    t
}

pub fn apriori_table(r: &AprioriReport) -> CsvTable {
    let mut t = CsvTable::new(&["epsilon", "quantity", "value"]);
    for (k, v) in &r.scaled {
        t.push(vec![r.epsilon.into(), k.as_str().into(), (*v).into()]);
    }
    t.push(vec![r.epsilon.into(), "strain_unscaled".into(), r.strain_unscaled.into()]);
    t
}

fn region_code(r: Region) -> f64 {
    match r {
        Region::BulkMinus => 0.0,
        Region::LayerFluid => 1.0,
        Region::LayerSolid => 2.0,
        Region::BulkPlus => 3.0,
    }
}

/// Velocity and displacement on the Q2 node grid, region code per
/// sub-cell (0 bulk below, 1 layer fluid, 2 layer solid, 3 bulk above).
pub fn micro_snapshot_vtk(sys: &MicroSystem, s: &MicroState) -> VtkGrid {
    let g = &sys.mesh.grid;
    let v = sys.velocity(s);
    let u = sys.displacement(s);
    let (ni, nj) = (2 * g.nx() + 1, g.vcol());
    let mut points = Vec::with_capacity(ni * nj);
    let (mut vel, mut disp) = (Vec::with_capacity(ni * nj), Vec::with_capacity(ni * nj));
    for j in 0..nj {
        for i in 0..ni {
            let n = g.vnode(i, j);
            let [x, z] = g.vnode_xz(n);
            points.push([x, z, 0.0]);
            vel.push([v[2 * n], v[2 * n + 1], 0.0]);
            disp.push([u[2 * n], u[2 * n + 1], 0.0]);
        }
    }
    let mut region = Vec::with_capacity((ni - 1) * (nj - 1));
    for j in 0..nj - 1 {
        for i in 0..ni - 1 {
            region.push(region_code(sys.mesh.region(i / 2, j / 2)));
        }
    }
    VtkGrid::new(&format!("micro eps={} t={:.6}", sys.mesh.epsilon, s.t), [ni, nj, 1], points)
        .point_field("velocity", VtkField::Vector(vel))
        .point_field("displacement", VtkField::Vector(disp))
        .cell_field("region", VtkField::Scalar(region))
}

pub fn save_micro_run(w: &mut ArtifactWriter, run: &MicroRun, apriori: &AprioriReport) -> Result<()> {
    let sys = &run.system;
    w.json(CONFIG_FILE, &sys.cfg.to_json())?;
    w.csv(SERIES_FILE, &micro_series_table(&run.series))?;
    w.csv("apriori.csv", &apriori_table(apriori))?;
    w.blob(
        STATES_FILE,
        &states_blob("micro", run.states.iter().map(|s| (s.t, s.x.clone(), s.u.clone()))),
    )?;
    let stride = sys.cfg.snapshot_stride;
    if stride > 0 {
        for (n, s) in run.states.iter().enumerate().step_by(stride) {
            w.vtk(&format!("snapshots/micro_{n:05}.vtk"), &micro_snapshot_vtk(sys, s))?;
        }
    }
    Ok(())
}

pub fn load_micro_run(dir: &Path) -> Result<MicroRun> {
    let cfg = MicroConfig::read(&dir.join(CONFIG_FILE))?;
    let system = MicroSystem::operators(&cfg)?;
    let states: Vec<MicroState> = read_states(dir, "micro")?
        .into_iter()
        .map(|(t, x, u)| MicroState { t, x, u })
        .collect();
    if states
        .iter()
        .any(|s| s.x.len() != system.layout.n || s.u.len() != system.layout.n_v)
    {
        return Err(Error::Mismatch(format!("{}: state length does not match the config", dir.display())));
    }
    let series = read_series(dir)?
        .rows
        .iter()
        .map(|r| MicroSeriesRow {
            step: f64_cell(&r[0]) as usize,
            t: f64_cell(&r[1]),
            energy: f64_cell(&r[2]),
            divergence: f64_cell(&r[3]),
            residual: f64_cell(&r[4]),
        })
        .collect();
    Ok(MicroRun { system, states, series })
}

/// Error rows, then slope rows, then the notice when slopes are omitted.
pub fn comparison_table_csv(t: &ComparisonTable) -> CsvTable {
    let mut out = CsvTable::new(&["section", "epsilon", "quantity", "kind", "value", "reference"]);
    for r in &t.rows {
        let kind = serde_json::to_value(r.kind).expect("serializable");
        out.push(vec![
            "error".into(),
            r.epsilon.into(),
            r.quantity.as_str().into(),
            kind.as_str().unwrap_or_default().into(),
            r.value.into(),
            r.reference.into(),
        ]);
    }
    for s in &t.slopes {
        out.push(vec![
            "slope".into(),
            "".into(),
            s.quantity.as_str().into(),
            format!("points={}", s.points).into(),
            s.slope.into(),
            "".into(),
        ]);
    }
    if let Some(n) = &t.notice {
        out.push(vec!["notice".into(), "".into(), n.as_str().into(), "".into(), "".into(), "".into()]);
    }
    out
}

/// `config.json` of a run directory, for hashing.
pub fn stored_config(dir: &Path) -> Result<Value> {
    read_json(&dir.join(CONFIG_FILE))
}
