//! Configuration of the ε-resolved slice.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fem::solve::SaddleMethod;
use crate::forcing::{ScalarField, VectorField};
use crate::geometry::{build_cell_mesh, validate_geometry, MicrostructureSpec};
use crate::macro_fsi::{get_f64, get_usize, parse_saddle_method, MacroConfig, MACRO_KEYS};
use crate::tensors::EffectivePlateTensors;

/// Data of the stationary Stokes problem that produces compatible initial
/// velocities: bulk forcings `F±` and the layer forcing `F^M`.
#[derive(Debug, Clone)]
pub struct InitialForcing {
    pub plus: VectorField,
    pub minus: VectorField,
    pub layer: VectorField,
}

#[derive(Debug, Clone)]
pub struct MicroConfig {
    /// `k = 1/ε`
    pub epsilon_inverse: usize,
    /// Layer cell on `(0,1) × (−1,1)`; may be all fluid.
    pub layer: MicrostructureSpec,
    pub layer_cell_file: Option<PathBuf>,
    /// Elements per cell `[n_x, n_z]`, integer multiples of the cell voxels.
    pub cell_resolution: [usize; 2],
    pub h: f64,
    pub l: f64,
    /// Bulk elements per side in z (graded away from the layer).
    pub nz: usize,
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub viscosity: f64,
    /// Bulk forcing in macro coordinates; the micro solver evaluates it at
    /// `x ∓ ε e_z`.
    pub f_plus: VectorField,
    pub f_minus: VectorField,
    /// Vertical layer-fluid load `q(t, x)`: `f^M = (0, q)`.
    pub layer_load: ScalarField,
    /// Initial bulk velocity in macro coordinates (projected).
    pub v0_plus: VectorField,
    pub v0_minus: VectorField,
    pub initial_forcing: Option<InitialForcing>,
    pub snapshot_stride: usize,
    pub saddle_method: SaddleMethod,
    pub warnings: Vec<String>,
}

const MICRO_KEYS: &[&str] = &[
    "epsilon_inverse",
    "cell_resolution",
    "layer_cell_file",
    "layer_cell",
    "layer_load",
    "initial_forcing",
];

impl MicroConfig {
    pub fn new(epsilon_inverse: usize, layer: MicrostructureSpec, h: f64, l: f64, nz: usize) -> Result<Self> {
        let cell_resolution = [layer.resolution[0], layer.resolution[1]];
        let mut cfg = Self {
            epsilon_inverse,
            layer,
            layer_cell_file: None,
            cell_resolution,
            h,
            l,
            nz,
            dt: 0.01,
            t_final: 0.1,
            theta: 1.0,
            viscosity: 1.0,
            f_plus: VectorField::zero(),
            f_minus: VectorField::zero(),
            layer_load: ScalarField::Zero,
            v0_plus: VectorField::zero(),
            v0_minus: VectorField::zero(),
            initial_forcing: None,
            snapshot_stride: 0,
            saddle_method: SaddleMethod::Auto,
            warnings: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.epsilon_inverse as f64
    }

    /// Number of ε-cells along Σ.
    pub fn n_cells(&self) -> usize {
        (self.l * self.epsilon_inverse as f64).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// `|Z^f|` of the layer cell (the cell has measure 2).
    pub fn fluid_volume(&self) -> f64 {
        2.0 - self.layer.solid_volume()
    }

    pub fn has_solid(&self) -> bool {
        self.layer.indicator.iter().any(|&s| s)
    }

    /// Resets `warnings` and checks every invariant.
    pub fn validate(&mut self) -> Result<()> {
        self.warnings.clear();
        if self.layer.dimension != 2 {
            return Err(Error::Dimension("the micro solver needs a 2D layer cell".into()));
        }
        if self.epsilon_inverse < 2 {
            return Err(Error::Config(format!("epsilon_inverse must be ≥ 2, got {}", self.epsilon_inverse)));
        }
        let cells = self.l * self.epsilon_inverse as f64;
        if !(self.l > 0.0) || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
            return Err(Error::Config(format!("L / ε = {cells} is not a positive integer")));
        }
        for (name, v) in [("H", self.h), ("dt", self.dt), ("viscosity", self.viscosity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::Config("T must be non-negative".into()));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!("T / dt = {steps} is not an integer")));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        if self.nz < 1 {
            return Err(Error::Config("nz ≥ 1 required".into()));
        }
        for k in 0..2 {
            let (r, n) = (self.cell_resolution[k], self.layer.resolution[k]);
            if r == 0 || r % n != 0 {
                return Err(Error::Config(format!(
                    "cell_resolution {:?} is not a multiple of the cell voxels {:?}",
                    self.cell_resolution, self.layer.resolution
                )));
            }
        }
        if self.has_solid() {
            let report = validate_geometry(&build_cell_mesh(&self.layer));
            report.check()?;
            self.warnings.extend(report.warnings);
        } else {
            self.warnings
                .push("layer cell has no solid: the run is pure Stokes flow in the fluid domain".to_string());
        }
        Ok(())
    }

    /// Layer cell at the mesh resolution.
    pub fn mesh_cell(&self) -> Result<MicrostructureSpec> {
        let f = [
            self.cell_resolution[0] / self.layer.resolution[0],
            self.cell_resolution[1] / self.layer.resolution[1],
        ];
        self.layer.refined_axes(&f)
    }

    pub fn from_json(v: &Value, base: &Path) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::parse("config", "expected a JSON object"))?;
        for k in obj.keys() {
            if !MACRO_KEYS.contains(&k.as_str()) && !MICRO_KEYS.contains(&k.as_str()) {
                return Err(Error::parse(k, "unknown key"));
            }
        }
        Self::from_object(obj, base)
    }

    fn from_object(obj: &Map<String, Value>, base: &Path) -> Result<Self> {
        let (layer, file) = match (obj.get("layer_cell_file"), obj.get("layer_cell")) {
            (Some(Value::String(p)), None) => (read_layer(&base.join(p))?, Some(PathBuf::from(p))),
            (None, Some(v)) => (layer_from_json(v)?, None),
            (None, None) => return Err(Error::parse("layer_cell_file", "missing required key")),
            _ => return Err(Error::parse("layer_cell", "give exactly one of layer_cell_file / layer_cell")),
        };
        let mut cfg = Self::new(
            get_usize(obj, "epsilon_inverse", None)?,
            layer,
            get_f64(obj, "H", None)?,
            get_f64(obj, "L", None)?,
            get_usize(obj, "nz", None)?,
        )?;
        cfg.layer_cell_file = file;
        if let Some(r) = obj.get("cell_resolution") {
            let arr = r
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::parse("cell_resolution", "expected [n_x, n_z]"))?;
            for (k, v) in arr.iter().enumerate() {
                cfg.cell_resolution[k] =
                    v.as_u64().ok_or_else(|| Error::parse("cell_resolution", "expected integers"))? as usize;
            }
        }
        cfg.dt = get_f64(obj, "dt", None)?;
        cfg.t_final = get_f64(obj, "T", None)?;
        cfg.theta = get_f64(obj, "theta", Some(1.0))?;
        cfg.viscosity = get_f64(obj, "viscosity", Some(1.0))?;
        cfg.f_plus = VectorField::from_json(obj.get("f_plus"), "f_plus")?;
        cfg.f_minus = VectorField::from_json(obj.get("f_minus"), "f_minus")?;
        cfg.layer_load = ScalarField::from_json(obj.get("layer_load").unwrap_or(&Value::Null), "layer_load")?;
        cfg.v0_plus = VectorField::from_json(obj.get("v0_plus"), "v0_plus")?;
        cfg.v0_minus = VectorField::from_json(obj.get("v0_minus"), "v0_minus")?;
        if let Some(f) = obj.get("initial_forcing") {
            let fo = f
                .as_object()
                .ok_or_else(|| Error::parse("initial_forcing", "expected an object with plus/minus/layer"))?;
            cfg.initial_forcing = Some(InitialForcing {
                plus: VectorField::from_json(fo.get("plus"), "initial_forcing.plus")?,
                minus: VectorField::from_json(fo.get("minus"), "initial_forcing.minus")?,
                layer: VectorField::from_json(fo.get("layer"), "initial_forcing.layer")?,
            });
        }
        cfg.snapshot_stride = get_usize(obj, "snapshot_stride", Some(0))?;
        cfg.saddle_method = parse_saddle_method(obj)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{} line {} column {}", path.display(), e.line(), e.column()), e.to_string()))?;
        Self::from_json(&v, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "epsilon_inverse": self.epsilon_inverse,
            "layer_cell": self.layer.to_json(),
            "cell_resolution": self.cell_resolution,
            "H": self.h,
            "L": self.l,
            "nz": self.nz,
            "dt": self.dt,
            "T": self.t_final,
            "theta": self.theta,
            "viscosity": self.viscosity,
            "f_plus": self.f_plus.to_json(),
            "f_minus": self.f_minus.to_json(),
            "layer_load": self.layer_load.to_json(),
            "v0_plus": self.v0_plus.to_json(),
            "v0_minus": self.v0_minus.to_json(),
            "snapshot_stride": self.snapshot_stride,
        });
        v["solver"] = serde_json::to_value(self.saddle_method).unwrap();
        if let Some(f) = &self.initial_forcing {
            v["initial_forcing"] = json!({
                "plus": f.plus.to_json(),
                "minus": f.minus.to_json(),
                "layer": f.layer.to_json(),
            });
        }
        v
    }

    /// The matching effective problem: same bulk data, plate load
    /// `g = |Z^f| q`, and the volume-consistent coefficients.
    pub fn macro_config(&self, tensors: EffectivePlateTensors, nx: usize, n_plate: usize) -> Result<MacroConfig> {
        let mut m = MacroConfig::new(self.h, self.l, nx, self.nz, n_plate, tensors).volume_consistent();
        m.dt = self.dt;
        m.t_final = self.t_final;
        m.theta = self.theta;
        m.viscosity = self.viscosity;
        m.f_plus = self.f_plus.clone();
        m.f_minus = self.f_minus.clone();
        m.g = self.layer_load.scaled(self.fluid_volume())?;
        m.v0_plus = self.v0_plus.clone();
        m.v0_minus = self.v0_minus.clone();
        m.saddle_method = self.saddle_method;
        m.validate()?;
        Ok(m)
    }
}

/// Layer cells may be all fluid, which the general cell parser rejects.
fn layer_from_json(v: &Value) -> Result<MicrostructureSpec> {
    match MicrostructureSpec::from_json(v) {
        Ok(s) => Ok(s),
        Err(e) => {
            let all_fluid = v
                .get("indicator")
                .and_then(Value::as_array)
                .is_some_and(|a| !a.is_empty() && a.iter().all(|x| x.as_u64() == Some(0)));
            if !all_fluid {
                return Err(e);
            }
            let mut patched = v.clone();
            patched["indicator"][0] = json!(1);
            let mut s = MicrostructureSpec::from_json(&patched)?;
            s.indicator[0] = false;
            Ok(s)
        }
    }
}

fn read_layer(path: &Path) -> Result<MicrostructureSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::parse(format!("{} line {} column {}", path.display(), e.line(), e.column()), e.to_string()))?;
    layer_from_json(&v)
}
