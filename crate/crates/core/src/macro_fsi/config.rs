//! Configuration of the effective (macro) slice model.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fem::solve::SaddleMethod;
use crate::forcing::{ScalarField, VectorField};
use crate::tensors::EffectivePlateTensors;

/// How the inertia and stiffness coefficients of the plate are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientPreset {
    /// `m_I`, `m_S` as given (default 1, 1).
    Printed,
    /// `m_I = |Z| = 2`, `m_S = |Z^s|` from the tensor file.
    VolumeConsistent,
}

#[derive(Debug, Clone)]
pub struct MacroConfig {
    /// Bulk half-height: the bulk is `(0, L) × (−H, H)`.
    pub h: f64,
    pub l: f64,
    pub nx: usize,
    /// Elements per bulk side in z.
    pub nz: usize,
    pub n_plate: usize,
    pub dt: f64,
    pub t_final: f64,
    pub theta: f64,
    pub tensors: EffectivePlateTensors,
    pub tensors_file: Option<PathBuf>,
    pub viscosity: f64,
    pub m_inertia: f64,
    pub m_stiffness: f64,
    pub preset: CoefficientPreset,
    pub f_plus: VectorField,
    pub f_minus: VectorField,
    /// Plate load `g(t, x)`.
    pub g: ScalarField,
    pub v0_plus: VectorField,
    pub v0_minus: VectorField,
    /// Write a field snapshot every `snapshot_stride` steps (0 = none).
    pub snapshot_stride: usize,
    pub saddle_method: SaddleMethod,
}

pub(crate) const MACRO_KEYS: &[&str] = &[
    "H",
    "L",
    "nx",
    "nz",
    "n_plate",
    "dt",
    "T",
    "theta",
    "tensors_file",
    "tensors",
    "viscosity",
    "m_inertia",
    "m_stiffness",
    "coefficients",
    "f_plus",
    "f_minus",
    "g",
    "v0_plus",
    "v0_minus",
    "snapshot_stride",
    "solver",
];

pub(crate) fn get_f64(obj: &Map<String, Value>, key: &str, default: Option<f64>) -> Result<f64> {
    match obj.get(key) {
        Some(v) => v.as_f64().ok_or_else(|| Error::parse(key, "expected a number")),
        None => default.ok_or_else(|| Error::parse(key, "missing required key")),
    }
}

pub(crate) fn get_usize(obj: &Map<String, Value>, key: &str, default: Option<usize>) -> Result<usize> {
    match obj.get(key) {
        Some(v) => v
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| Error::parse(key, "expected a non-negative integer")),
        None => default.ok_or_else(|| Error::parse(key, "missing required key")),
    }
}

pub(crate) fn parse_saddle_method(obj: &Map<String, Value>) -> Result<SaddleMethod> {
    match obj.get("solver") {
        None => Ok(SaddleMethod::Auto),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::parse("solver", e.to_string())),
    }
}

impl MacroConfig {
    /// Minimal configuration with zero data and the given scalar tensors.
    pub fn new(h: f64, l: f64, nx: usize, nz: usize, n_plate: usize, tensors: EffectivePlateTensors) -> Self {
        Self {
            h,
            l,
            nx,
            nz,
            n_plate,
            dt: 0.01,
            t_final: 0.1,
            theta: 1.0,
            tensors,
            tensors_file: None,
            viscosity: 1.0,
            m_inertia: 1.0,
            m_stiffness: 1.0,
            preset: CoefficientPreset::Printed,
            f_plus: VectorField::zero(),
            f_minus: VectorField::zero(),
            g: ScalarField::Zero,
            v0_plus: VectorField::zero(),
            v0_minus: VectorField::zero(),
            snapshot_stride: 0,
            saddle_method: SaddleMethod::Auto,
        }
    }

    /// Number of time steps, `round(T / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Switches to `m_I = 2`, `m_S = |Z^s|`.
    pub fn volume_consistent(mut self) -> Self {
        self.preset = CoefficientPreset::VolumeConsistent;
        self.m_inertia = 2.0;
        self.m_stiffness = self.tensors.solid_volume;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("H", self.h)?;
        pos("L", self.l)?;
        pos("dt", self.dt)?;
        pos("viscosity", self.viscosity)?;
        pos("m_inertia", self.m_inertia)?;
        pos("m_stiffness", self.m_stiffness)?;
        if !(self.t_final >= 0.0) {
            return Err(Error::Config(format!("T must be non-negative, got {}", self.t_final)));
        }
        if self.nx < 1 || self.nz < 1 || self.n_plate < 2 {
            return Err(Error::Config("nx, nz ≥ 1 and n_plate ≥ 2 required".into()));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        if self.tensors.m != 1 {
            return Err(Error::Dimension(format!(
                "slice model needs 2D-cell tensors (m = 1), got m = {}",
                self.tensors.m
            )));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!("T / dt = {steps} is not an integer")));
        }
        Ok(())
    }

    /// Parses a config document; relative `tensors_file` paths resolve
    /// against `base`.
    pub fn from_json(v: &Value, base: &Path) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::parse("config", "expected a JSON object"))?;
        for k in obj.keys() {
            if !MACRO_KEYS.contains(&k.as_str()) {
                return Err(Error::parse(k, "unknown key"));
            }
        }
        Self::from_object(obj, base)
    }

    pub(crate) fn from_object(obj: &Map<String, Value>, base: &Path) -> Result<Self> {
        let (tensors, tensors_file) = match (obj.get("tensors_file"), obj.get("tensors")) {
            (Some(Value::String(p)), None) => {
                let path = base.join(p);
                (EffectivePlateTensors::read(&path)?, Some(PathBuf::from(p)))
            }
            (None, Some(t)) => (parse_inline_tensors(t)?, None),
            (None, None) => return Err(Error::parse("tensors_file", "missing required key")),
            _ => return Err(Error::parse("tensors", "give exactly one of tensors_file / tensors")),
        };
        let mut cfg = Self::new(
            get_f64(obj, "H", None)?,
            get_f64(obj, "L", None)?,
            get_usize(obj, "nx", None)?,
            get_usize(obj, "nz", None)?,
            get_usize(obj, "n_plate", None)?,
            tensors,
        );
        cfg.tensors_file = tensors_file;
        cfg.dt = get_f64(obj, "dt", None)?;
        cfg.t_final = get_f64(obj, "T", None)?;
        cfg.theta = get_f64(obj, "theta", Some(1.0))?;
        cfg.viscosity = get_f64(obj, "viscosity", Some(1.0))?;
        cfg.m_inertia = get_f64(obj, "m_inertia", Some(1.0))?;
        cfg.m_stiffness = get_f64(obj, "m_stiffness", Some(1.0))?;
        cfg.f_plus = VectorField::from_json(obj.get("f_plus"), "f_plus")?;
        cfg.f_minus = VectorField::from_json(obj.get("f_minus"), "f_minus")?;
        cfg.g = ScalarField::from_json(obj.get("g").unwrap_or(&Value::Null), "g")?;
        cfg.v0_plus = VectorField::from_json(obj.get("v0_plus"), "v0_plus")?;
        cfg.v0_minus = VectorField::from_json(obj.get("v0_minus"), "v0_minus")?;
        cfg.snapshot_stride = get_usize(obj, "snapshot_stride", Some(0))?;
        cfg.saddle_method = parse_saddle_method(obj)?;
        match obj.get("coefficients").and_then(Value::as_str) {
            None | Some("printed") => {}
            Some("volume_consistent") => {
                if obj.contains_key("m_inertia") || obj.contains_key("m_stiffness") {
                    return Err(Error::parse(
                        "coefficients",
                        "volume_consistent fixes m_inertia and m_stiffness; do not give them",
                    ));
                }
                cfg = cfg.volume_consistent();
            }
            Some(other) => return Err(Error::parse("coefficients", format!("unknown preset `{other}`"))),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{} line {} column {}", path.display(), e.line(), e.column()), e.to_string()))?;
        Self::from_json(&v, path.parent().unwrap_or(Path::new(".")))
    }

    /// Canonical JSON (tensors inlined), used for hashing and provenance.
    pub fn to_json(&self) -> Value {
        let (a, b, c) = self.tensors.slice_coefficients();
        let mut v = json!({
            "H": self.h,
            "L": self.l,
            "nx": self.nx,
            "nz": self.nz,
            "n_plate": self.n_plate,
            "dt": self.dt,
            "T": self.t_final,
            "theta": self.theta,
            "tensors": {"a": a, "b": b, "c": c, "solid_volume": self.tensors.solid_volume},
            "viscosity": self.viscosity,
            "m_inertia": self.m_inertia,
            "m_stiffness": self.m_stiffness,
            "f_plus": self.f_plus.to_json(),
            "f_minus": self.f_minus.to_json(),
            "g": self.g.to_json(),
            "v0_plus": self.v0_plus.to_json(),
            "v0_minus": self.v0_minus.to_json(),
            "snapshot_stride": self.snapshot_stride,
        });
        if self.preset == CoefficientPreset::VolumeConsistent {
            let o = v.as_object_mut().unwrap();
            o.remove("m_inertia");
            o.remove("m_stiffness");
            o.insert("coefficients".into(), json!("volume_consistent"));
        }
        v["solver"] = serde_json::to_value(self.saddle_method).unwrap();
        v
    }
}

/// Inline tensors: either the tensor-file schema or scalar slice
/// coefficients `{"a", "b", "c", "solid_volume"}`.
fn parse_inline_tensors(v: &Value) -> Result<EffectivePlateTensors> {
    if v.get("a_star").is_some() {
        return EffectivePlateTensors::from_json(v);
    }
    let obj = v.as_object().ok_or_else(|| Error::parse("tensors", "expected an object"))?;
    Ok(EffectivePlateTensors::from_scalars(
        get_f64(obj, "a", None)?,
        get_f64(obj, "b", Some(0.0))?,
        get_f64(obj, "c", None)?,
        get_f64(obj, "solid_volume", Some(1.0))?,
    ))
}
