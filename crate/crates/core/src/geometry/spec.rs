//! Voxel microstructure description and its JSON file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::elasticity::{ElasticTensor, Lame};

#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    /// One Lamé pair everywhere.
    Lame(Lame),
    /// One Lamé pair per voxel (values on fluid voxels are carried but unused).
    PerVoxel { lambda: Vec<f64>, mu: Vec<f64> },
    /// One anisotropic tensor everywhere.
    Tensor(ElasticTensor),
}

/// Reference cell `Y × (−1, 1)` cut into voxels. The last axis is the
/// transverse one; the others span `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrostructureSpec {
    pub dimension: usize,
    pub resolution: Vec<usize>,
    /// Row-major, last axis fastest. `true` = solid.
    pub indicator: Vec<bool>,
    pub material: Material,
    pub full_solid_override: bool,
}

impl MicrostructureSpec {
    pub fn new(dimension: usize, resolution: Vec<usize>, indicator: Vec<bool>, material: Material) -> Result<Self> {
        let full = !indicator.is_empty() && indicator.iter().all(|&s| s);
        let spec = Self {
            dimension,
            resolution,
            indicator,
            material,
            full_solid_override: full,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn full_solid(dimension: usize, resolution: Vec<usize>, lame: Lame) -> Result<Self> {
        let n = resolution.iter().product();
        Self::new(dimension, resolution, vec![true; n], Material::Lame(lame))
    }

    /// Labels voxels by their center `y` (lateral in (0,1), last in (−1,1)).
    pub fn from_fn(
        dimension: usize,
        resolution: Vec<usize>,
        material: Material,
        solid: impl Fn(&[f64]) -> bool,
    ) -> Result<Self> {
        let n: usize = resolution.iter().product();
        let mut indicator = Vec::with_capacity(n);
        let grid = VoxelGrid::new(&resolution);
        for v in 0..n {
            indicator.push(solid(&grid.center(v)[..dimension]));
        }
        Self::new(dimension, resolution, indicator, material)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(Error::Dimension(format!("dimension must be 2 or 3, got {}", self.dimension)));
        }
        if self.resolution.len() != self.dimension {
            return Err(Error::Dimension(format!(
                "resolution has {} axes for dimension {}",
                self.resolution.len(),
                self.dimension
            )));
        }
        if let Some(&n) = self.resolution.iter().find(|&&n| n < 2) {
            return Err(Error::Dimension(format!("every axis needs at least 2 voxels, got {n}")));
        }
        let n = self.n_voxels();
        if self.indicator.len() != n {
            return Err(Error::Dimension(format!(
                "indicator has {} entries, resolution needs {n}",
                self.indicator.len()
            )));
        }
        let n_solid = self.indicator.iter().filter(|&&s| s).count();
        if n_solid == 0 {
            return Err(Error::InvalidSpec("no solid voxel".into()));
        }
        if n_solid == n && !self.full_solid_override {
            return Err(Error::InvalidSpec("no fluid voxel (set full_solid_override for an all-solid cell)".into()));
        }
        match &self.material {
            Material::Lame(l) => check_lame(*l, "material")?,
            Material::PerVoxel { lambda, mu } => {
                if lambda.len() != n || mu.len() != n {
                    return Err(Error::Dimension(format!(
                        "per-voxel material has {}/{} entries, expected {n}",
                        lambda.len(),
                        mu.len()
                    )));
                }
                for v in (0..n).filter(|&v| self.indicator[v]) {
                    check_lame(Lame::new(lambda[v], mu[v]), &format!("voxel {v}"))?;
                }
            }
            Material::Tensor(t) => {
                if t.dim() != self.dimension {
                    return Err(Error::Dimension(format!(
                        "tensor dimension {} in a {}-D cell",
                        t.dim(),
                        self.dimension
                    )));
                }
                t.validate()?;
            }
        }
        Ok(())
    }

    pub fn n_voxels(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn grid(&self) -> VoxelGrid {
        VoxelGrid::new(&self.resolution)
    }

    pub fn n_solid(&self) -> usize {
        self.indicator.iter().filter(|&&s| s).count()
    }

    /// Voxel volume (lateral extent 1, transverse extent 2).
    pub fn voxel_volume(&self) -> f64 {
        self.grid().voxel_volume()
    }

    pub fn solid_volume(&self) -> f64 {
        self.n_solid() as f64 * self.voxel_volume()
    }

    pub fn tensor_at(&self, voxel: usize) -> ElasticTensor {
        match &self.material {
            Material::Lame(l) => ElasticTensor::isotropic(self.dimension, *l),
            Material::PerVoxel { lambda, mu } => {
                ElasticTensor::isotropic(self.dimension, Lame::new(lambda[voxel], mu[voxel]))
            }
            Material::Tensor(t) => t.clone(),
        }
    }

    /// Voxel-wise mirror image under `y_last → −y_last`.
    pub fn mirror_voxel(&self, voxel: usize) -> usize {
        let g = self.grid();
        let mut c = g.coords(voxel);
        let last = self.dimension - 1;
        c[last] = self.resolution[last] - 1 - c[last];
        g.index(&c)
    }

    /// Indicator and material are even in the transverse coordinate.
    pub fn is_transverse_symmetric(&self) -> bool {
        (0..self.n_voxels()).all(|v| {
            let m = self.mirror_voxel(v);
            self.indicator[v] == self.indicator[m]
                && match &self.material {
                    Material::PerVoxel { lambda, mu } => {
                        !self.indicator[v] || (lambda[v] == lambda[m] && mu[v] == mu[m])
                    }
                    _ => true,
                }
        })
    }

    /// Splits every voxel into `factors[k]` pieces along axis `k`.
    pub fn refined_axes(&self, factors: &[usize]) -> Result<Self> {
        if factors.len() != self.dimension || factors.contains(&0) {
            return Err(Error::Dimension(format!("bad refinement factors {factors:?}")));
        }
        let resolution: Vec<usize> = self.resolution.iter().zip(factors).map(|(n, f)| n * f).collect();
        let fine = VoxelGrid::new(&resolution);
        let coarse = self.grid();
        let n: usize = resolution.iter().product();
        let parent: Vec<usize> = (0..n)
            .map(|v| {
                let mut c = fine.coords(v);
                for (k, f) in factors.iter().enumerate() {
                    c[k] /= f;
                }
                coarse.index(&c)
            })
            .collect();
        let material = match &self.material {
            Material::PerVoxel { lambda, mu } => Material::PerVoxel {
                lambda: parent.iter().map(|&p| lambda[p]).collect(),
                mu: parent.iter().map(|&p| mu[p]).collect(),
            },
            m => m.clone(),
        };
        Ok(Self {
            dimension: self.dimension,
            resolution,
            indicator: parent.iter().map(|&p| self.indicator[p]).collect(),
            material,
            full_solid_override: self.full_solid_override,
        })
    }

    pub fn refined(&self, r: usize) -> Result<Self> {
        self.refined_axes(&vec![r; self.dimension])
    }

    pub fn to_json(&self) -> Value {
        let material = match &self.material {
            Material::Lame(l) => json!({ "lame": [l.lambda, l.mu] }),
            Material::PerVoxel { lambda, mu } => json!({ "lambda": lambda, "mu": mu }),
            Material::Tensor(t) => json!({ "tensor": t.components() }),
        };
        let mut m = Map::new();
        m.insert("dimension".into(), json!(self.dimension));
        m.insert("resolution".into(), json!(self.resolution));
        m.insert(
            "indicator".into(),
            json!(self.indicator.iter().map(|&s| u8::from(s)).collect::<Vec<_>>()),
        );
        m.insert("material".into(), material);
        if self.full_solid_override {
            m.insert("full_solid_override".into(), json!(true));
        }
        Value::Object(m)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
        let dimension = field(obj, "dimension")?
            .as_u64()
            .ok_or_else(|| Error::parse("dimension", "expected a positive integer"))? as usize;
        let resolution = usize_array(field(obj, "resolution")?, "resolution")?;
        let indicator = field(obj, "indicator")?
            .as_array()
            .ok_or_else(|| Error::parse("indicator", "expected an array of 0/1"))?
            .iter()
            .enumerate()
            .map(|(i, x)| match x.as_u64() {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                _ => Err(Error::parse(format!("indicator[{i}]"), "expected 0 or 1")),
            })
            .collect::<Result<Vec<_>>>()?;
        let full_solid_override = match obj.get("full_solid_override") {
            None => false,
            Some(b) => b
                .as_bool()
                .ok_or_else(|| Error::parse("full_solid_override", "expected a boolean"))?,
        };
        let mobj = field(obj, "material")?
            .as_object()
            .ok_or_else(|| Error::parse("material", "expected an object"))?;
        let material = if let Some(l) = mobj.get("lame") {
            let l = f64_array(l, "material.lame")?;
            if l.len() != 2 {
                return Err(Error::parse("material.lame", "expected [lambda, mu]"));
            }
            Material::Lame(Lame::new(l[0], l[1]))
        } else if let Some(t) = mobj.get("tensor") {
            let c = f64_array(t, "material.tensor")?;
            if c.len() != dimension.pow(4) {
                return Err(Error::Dimension(format!(
                    "material.tensor has {} entries, expected {}",
                    c.len(),
                    dimension.pow(4)
                )));
            }
            Material::Tensor(ElasticTensor::from_components(dimension, c)?)
        } else if let (Some(l), Some(m)) = (mobj.get("lambda"), mobj.get("mu")) {
            Material::PerVoxel {
                lambda: f64_array(l, "material.lambda")?,
                mu: f64_array(m, "material.mu")?,
            }
        } else {
            return Err(Error::parse(
                "material",
                "expected one of {\"lame\"}, {\"lambda\", \"mu\"}, {\"tensor\"}",
            ));
        };
        let spec = Self {
            dimension,
            resolution,
            indicator,
            material,
            full_solid_override,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json_string().as_bytes())
    }

    /// Random cell with fluid rows at `S±`, a solid band that spans the
    /// lateral period, and random perforations. Boundary voxels on opposite
    /// lateral faces carry equal labels. Caller validates (and retries).
    pub fn random_layer(dimension: usize, resolution: Vec<usize>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = VoxelGrid::new(&resolution);
        let n = grid.n_voxels();
        let last = dimension - 1;
        let nz = resolution[last];
        let mut indicator = vec![false; n];
        for (v, s) in indicator.iter_mut().enumerate() {
            let c = grid.coords(v);
            let zc = c[last];
            if zc == 0 || zc == nz - 1 {
                continue;
            }
            // a guaranteed solid spine through the middle keeps the layer connected:
            // a full row in 2D, lateral grid lines in 3D so the fluid can still pass
            let spine = zc == nz / 2 && (dimension == 2 || c[..last].contains(&0));
            *s = spine || rng.gen_bool(0.55);
        }
        // match the labels on opposite lateral faces
        for v in 0..n {
            let mut c = grid.coords(v);
            for k in 0..last {
                if c[k] == resolution[k] - 1 {
                    c[k] = 0;
                }
            }
            indicator[v] = indicator[grid.index(&c)];
        }
        let lambda = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mu = (0..n).map(|_| rng.gen_range(0.3..2.0)).collect();
        Self::new(dimension, resolution, indicator, Material::PerVoxel { lambda, mu })
    }
}

fn check_lame(l: Lame, what: &str) -> Result<()> {
    if !(l.lambda >= 0.0 && l.mu > 0.0 && l.lambda.is_finite() && l.mu.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "{what}: need lambda >= 0 and mu > 0, got ({}, {})",
            l.lambda, l.mu
        )));
    }
    Ok(())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::parse(key, "missing field"))
}

fn usize_array(v: &Value, what: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::parse(what, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::parse(format!("{what}[{i}]"), "expected a non-negative integer"))
        })
        .collect()
}

fn f64_array(v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::parse(what, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .ok_or_else(|| Error::parse(format!("{what}[{i}]"), "expected a number"))
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Index arithmetic for a voxel grid, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub n: Vec<usize>,
}

impl VoxelGrid {
    pub fn new(n: &[usize]) -> Self {
        Self { n: n.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n_voxels(&self) -> usize {
        self.n.iter().product()
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.n).fold(0, |acc, (ci, ni)| acc * ni + ci)
    }

    pub fn coords(&self, mut v: usize) -> Vec<usize> {
        let mut c = vec![0; self.n.len()];
        for k in (0..self.n.len()).rev() {
            c[k] = v % self.n[k];
            v /= self.n[k];
        }
        c
    }

    /// Voxel edge lengths.
    pub fn h(&self) -> Vec<f64> {
        let d = self.n.len();
        self.n
            .iter()
            .enumerate()
            .map(|(k, &n)| if k + 1 == d { 2.0 / n as f64 } else { 1.0 / n as f64 })
            .collect()
    }

    pub fn voxel_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// Lower corner of voxel `v`.
    pub fn origin(&self, v: usize) -> Vec<f64> {
        let h = self.h();
        let d = self.dim();
        self.coords(v)
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * h[k] - if k + 1 == d { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn center(&self, v: usize) -> Vec<f64> {
        let h = self.h();
        self.origin(v).iter().zip(&h).map(|(o, h)| o + 0.5 * h).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_index_roundtrip() {
        let g = VoxelGrid::new(&[3, 4, 5]);
        for v in 0..g.n_voxels() {
            assert_eq!(g.index(&g.coords(v)), v);
        }
        assert_eq!(g.coords(1), vec![0, 0, 1]);
    }

    #[test]
    fn all_solid_needs_override() {
        let s = MicrostructureSpec {
            dimension: 2,
            resolution: vec![2, 2],
            indicator: vec![true; 4],
            material: Material::Lame(Lame::new(1.0, 1.0)),
            full_solid_override: false,
        };
        assert!(s.validate().is_err());
        assert!(MicrostructureSpec::full_solid(2, vec![2, 2], Lame::new(1.0, 1.0)).is_ok());
    }

    #[test]
    fn negative_mu_rejected() {
        let err = MicrostructureSpec::full_solid(2, vec![2, 2], Lame::new(1.0, -1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn refinement_preserves_volume_fractions() {
        let s = MicrostructureSpec::from_fn(2, vec![4, 4], Material::Lame(Lame::new(1.0, 1.0)), |y| y[1].abs() < 0.5)
            .unwrap();
        let r = s.refined_axes(&[2, 3]).unwrap();
        assert_eq!(r.resolution, vec![8, 12]);
        assert!((r.solid_volume() - s.solid_volume()).abs() < 1e-14);
        assert!(r.is_transverse_symmetric());
    }

    #[test]
    fn json_field_errors_name_the_field() {
        let err = MicrostructureSpec::from_json_str(r#"{"dimension": 2, "resolution": [2, 2], "material": {"lame": [1, 1]}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("indicator"), "{err}");
        let err = MicrostructureSpec::from_json_str("{\"dimension\": 2,\n \"resolution\": [2, 2,]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
