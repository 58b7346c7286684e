//! Effective plate tensors from cell solutions, and their audit.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cell::{CellLoadCase, CellOperator, CellSolution, LoadKind};
use crate::error::{Error, Result};
use crate::fem::solve::min_eigenvalue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub geometry_hash: String,
    pub resolution: Vec<usize>,
    pub tolerance: f64,
}

/// In-plane fourth-order tensors, flat with index `((a*m + b)*m + c)*m + d`
/// where `m` is the number of in-plane directions.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePlateTensors {
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub solid_volume: f64,
    pub provenance: Provenance,
}

fn idx(m: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * m + j) * m + k) * m + l
}

impl EffectivePlateTensors {
    pub fn zero(m: usize) -> Self {
        let n = m.pow(4);
        Self {
            m,
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            solid_volume: 0.0,
            provenance: Provenance {
                geometry_hash: String::new(),
                resolution: vec![],
                tolerance: 0.0,
            },
        }
    }

    /// Scalar tensors of the vertical-slice reduction.
    pub fn from_scalars(a: f64, b: f64, c: f64, solid_volume: f64) -> Self {
        let mut t = Self::zero(1);
        t.a[0] = a;
        t.b[0] = b;
        t.c[0] = c;
        t.solid_volume = solid_volume;
        t
    }

    pub fn a(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.a[idx(self.m, i, j, k, l)]
    }

    pub fn b(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.b[idx(self.m, i, j, k, l)]
    }

    pub fn c(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[idx(self.m, i, j, k, l)]
    }

    /// `(a*₁₁₁₁, b*₁₁₁₁, c*₁₁₁₁)`, the beam coefficients of the slice model.
    pub fn slice_coefficients(&self) -> (f64, f64, f64) {
        (self.a[0], self.b[0], self.c[0])
    }

    pub fn to_json(&self) -> Value {
        let nest = |t: &[f64]| -> Value {
            let m = self.m;
            Value::Array(
                (0..m)
                    .map(|i| {
                        Value::Array(
                            (0..m)
                                .map(|j| {
                                    Value::Array(
                                        (0..m)
                                            .map(|k| json!((0..m).map(|l| t[idx(m, i, j, k, l)]).collect::<Vec<_>>()))
                                            .collect(),
                                    )
                                })
                                .collect(),
                        )
                    })
                    .collect(),
            )
        };
        json!({
            "a_star": nest(&self.a),
            "b_star": nest(&self.b),
            "c_star": nest(&self.c),
            "solid_volume": self.solid_volume,
            "provenance": {
                "geometry_hash": self.provenance.geometry_hash,
                "resolution": self.provenance.resolution,
                "tolerance": self.provenance.tolerance,
            },
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let flat = |key: &str| -> Result<(usize, Vec<f64>)> {
            let mut out = Vec::new();
            let top = v
                .get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse(key, "missing nested array"))?;
            let m = top.len();
            fn walk(v: &Value, depth: usize, m: usize, out: &mut Vec<f64>, key: &str) -> Result<()> {
                if depth == 4 {
                    out.push(v.as_f64().ok_or_else(|| Error::parse(key, "expected a number"))?);
                    return Ok(());
                }
                let arr = v.as_array().ok_or_else(|| Error::parse(key, "expected an array"))?;
                if arr.len() != m {
                    return Err(Error::parse(key, format!("expected {m} entries per level")));
                }
                arr.iter().try_for_each(|x| walk(x, depth + 1, m, out, key))
            }
            walk(&v[key], 0, m, &mut out, key)?;
            Ok((m, out))
        };
        let (m, a) = flat("a_star")?;
        let (mb, b) = flat("b_star")?;
        let (mc, c) = flat("c_star")?;
        if m != mb || m != mc || m == 0 {
            return Err(Error::Dimension("a_star, b_star, c_star sizes differ".into()));
        }
        let solid_volume = v
            .get("solid_volume")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::parse("solid_volume", "expected a number"))?;
        let provenance = match v.get("provenance") {
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| Error::parse("provenance", e.to_string()))?,
            None => Provenance {
                geometry_hash: String::new(),
                resolution: vec![],
                tolerance: 0.0,
            },
        };
        Ok(Self {
            m,
            a,
            b,
            c,
            solid_volume,
            provenance,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{} line {}", path.display(), e.line()), e.to_string()))?;
        Self::from_json(&v)
    }
}

/// Evaluates the three tensor formulas by quadrature over `Z^s`.
pub fn compute_tensors(op: &CellOperator, solutions: &[CellSolution]) -> Result<EffectivePlateTensors> {
    let dim = op.mesh.dim;
    let m = dim - 1;
    let n_dofs = op.mesh.solid_dofs.n_dofs();
    let mut tolerance: f64 = 0.0;
    for s in solutions {
        if s.geometry_hash != op.geometry_hash() || s.displacement.len() != n_dofs {
            return Err(Error::Mismatch(format!(
                "cell solution {} was computed on a different mesh or material",
                s.case.label()
            )));
        }
        tolerance = tolerance.max(s.tolerance);
    }
    let find = |a: usize, b: usize, kind: LoadKind| -> Result<&CellSolution> {
        let case = CellLoadCase::new(a, b, kind);
        solutions
            .iter()
            .find(|s| s.case == case)
            .ok_or_else(|| Error::Mismatch(format!("missing cell solution {}", case.label())))
    };
    let vol = op.mesh.solid_volume();
    let n = m.pow(4);
    let mut t = EffectivePlateTensors {
        m,
        a: vec![0.0; n],
        b: vec![0.0; n],
        c: vec![0.0; n],
        solid_volume: vol,
        provenance: Provenance {
            geometry_hash: op.geometry_hash().to_string(),
            resolution: op.mesh.spec.resolution.clone(),
            tolerance,
        },
    };
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    for &(i, j) in &pairs {
        let s_ij = find(i, j, LoadKind::Standard)?;
        let b_ij = find(i, j, LoadKind::Bending)?;
        for &(k, l) in &pairs {
            let s_kl = find(k, l, LoadKind::Standard)?;
            let b_kl = find(k, l, LoadKind::Bending)?;
            let e = |x: &CellSolution, y: &CellSolution| {
                op.cross_energy(&x.displacement, &x.case, &y.displacement, &y.case) / vol
            };
            let p = idx(m, i, j, k, l);
            t.a[p] = e(s_ij, s_kl);
            t.b[p] = e(b_ij, s_kl);
            t.c[p] = e(b_ij, b_kl);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// Largest absolute violation of minor and major symmetry.
    pub a_symmetry_defect: f64,
    /// Minor symmetries only.
    pub b_symmetry_defect: f64,
    pub c_symmetry_defect: f64,
    /// Defects divided by the largest tensor entry.
    pub relative_symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub symmetry_ok: bool,
    pub coercive: bool,
    pub passed: bool,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

fn defect(t: &[f64], m: usize, major: bool) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let v = t[idx(m, i, j, k, l)];
                    w = w
                        .max((v - t[idx(m, j, i, k, l)]).abs())
                        .max((v - t[idx(m, i, j, l, k)]).abs());
                    if major {
                        w = w.max((v - t[idx(m, k, l, i, j)]).abs());
                    }
                }
            }
        }
    }
    w
}

/// Voigt pairs `(11, 22, 12)` (or `(11)` in the slice) with weights `1, 1, √2`.
fn voigt(m: usize) -> Vec<(usize, usize, f64)> {
    if m == 1 {
        vec![(0, 0, 1.0)]
    } else {
        vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, std::f64::consts::SQRT_2)]
    }
}

/// Matrix of `(E, H) ↦ a E:E + 2 b H:E + c H:H` in orthonormal Voigt coordinates.
pub fn gram_matrix(t: &EffectivePlateTensors) -> DMatrix<f64> {
    let v = voigt(t.m);
    let n = v.len();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for (p, &(i, j, wp)) in v.iter().enumerate() {
        for (q, &(k, l, wq)) in v.iter().enumerate() {
            let w = wp * wq;
            g[(p, q)] = w * t.a(i, j, k, l);
            g[(n + p, n + q)] = w * t.c(i, j, k, l);
            // b pairs the bending index (first) with the membrane index (second)
            g[(n + p, q)] = w * t.b(i, j, k, l);
            g[(q, n + p)] = w * t.b(i, j, k, l);
        }
    }
    g
}

pub fn audit_tensors(t: &EffectivePlateTensors) -> AuditReport {
    let a_d = defect(&t.a, t.m, true);
    let b_d = defect(&t.b, t.m, false);
    let c_d = defect(&t.c, t.m, true);
    let scale = t
        .a
        .iter()
        .chain(&t.b)
        .chain(&t.c)
        .fold(0.0f64, |s, v| s.max(v.abs()));
    let rel = if scale > 0.0 { a_d.max(b_d).max(c_d) / scale } else { 0.0 };
    let min_eigenvalue = min_eigenvalue(&gram_matrix(t));
    let symmetry_ok = rel <= SYMMETRY_TOLERANCE;
    let coercive = min_eigenvalue > 0.0;
    AuditReport {
        a_symmetry_defect: a_d,
        b_symmetry_defect: b_d,
        c_symmetry_defect: c_d,
        relative_symmetry_defect: rel,
        min_eigenvalue,
        symmetry_ok,
        coercive,
        passed: symmetry_ok && coercive,
    }
}
