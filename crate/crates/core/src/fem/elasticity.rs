//! Fourth-order elasticity tensors and element stiffness matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::element::{LagrangeBox, QuadPoint};
use super::solve::min_eigenvalue;
use crate::error::{Error, Result};

/// Lamé pair `(λ, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

impl Lame {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self { lambda, mu }
    }
}

/// Elasticity tensor `A_ijkl` in `dim` dimensions, row-major flat storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticTensor {
    dim: usize,
    c: Vec<f64>,
}

impl ElasticTensor {
    /// `A = λ I⊗I + 2μ I_sym`
    pub fn isotropic(dim: usize, lame: Lame) -> Self {
        let mut c = vec![0.0; dim.pow(4)];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        c[((i * dim + j) * dim + k) * dim + l] =
                            lame.lambda * d(i, j) * d(k, l) + lame.mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                    }
                }
            }
        }
        Self { dim, c }
    }

    /// Builds from flat components and checks the symmetries
    /// `A_ijkl = A_jikl = A_klij` and coercivity on symmetric matrices.
    pub fn from_components(dim: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != dim.pow(4) {
            return Err(Error::Tensor(format!("expected {} components, got {}", dim.pow(4), c.len())));
        }
        let t = Self { dim, c };
        t.validate()?;
        Ok(t)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            c: vec![0.0; dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.c[((i * d + j) * d + k) * d + l]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest violation of minor and major symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let a = self.get(i, j, k, l);
                        worst = worst
                            .max((a - self.get(j, i, k, l)).abs())
                            .max((a - self.get(i, j, l, k)).abs())
                            .max((a - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Mandel matrix (orthonormal basis of symmetric matrices).
    pub fn mandel(&self) -> DMatrix<f64> {
        let basis = sym_basis(self.dim);
        let n = basis.len();
        DMatrix::from_fn(n, n, |p, q| {
            let (bp, bq) = (&basis[p], &basis[q]);
            let mut s = 0.0;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    for k in 0..self.dim {
                        for l in 0..self.dim {
                            s += bp[i][j] * self.get(i, j, k, l) * bq[k][l];
                        }
                    }
                }
            }
            s
        })
    }

    /// Coercivity constant on symmetric matrices.
    pub fn coercivity(&self) -> f64 {
        min_eigenvalue(&self.mandel())
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let defect = self.symmetry_defect();
        if defect > 1e-12 * scale {
            return Err(Error::Tensor(format!("symmetry defect {defect:.3e}")));
        }
        let c0 = self.coercivity();
        if c0 <= 0.0 {
            return Err(Error::Tensor(format!("not coercive on symmetric matrices (min eigenvalue {c0:.3e})")));
        }
        Ok(())
    }

    /// `σ = A ε`
    pub fn apply(&self, e: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let d = self.dim;
        let mut s = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        acc += self.get(i, j, k, l) * e[k][l];
                    }
                }
                s[i][j] = acc;
            }
        }
        s
    }
}

/// Orthonormal basis of symmetric `dim × dim` matrices, diagonal first.
pub fn sym_basis(dim: usize) -> Vec<[[f64; 3]; 3]> {
    let mut out = Vec::new();
    for i in 0..dim {
        let mut m = [[0.0; 3]; 3];
        m[i][i] = 1.0;
        out.push(m);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut m = [[0.0; 3]; 3];
            m[i][j] = r;
            m[j][i] = r;
            out.push(m);
        }
    }
    out
}

pub fn ddot(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// `K[(a,i),(b,k)] = ∫ A_ijkl ∂_j N_a ∂_l N_b`.
pub fn element_stiffness_elasticity(el: &LagrangeBox, quad: &[QuadPoint], a: &ElasticTensor) -> Vec<f64> {
    let d = el.dim;
    assert_eq!(a.dim(), d);
    let nd = el.n_nodes() * d;
    let mut k = vec![0.0; nd * nd];
    for q in quad {
        for (na, ga) in q.grads.iter().enumerate() {
            for (nb, gb) in q.grads.iter().enumerate() {
                for i in 0..d {
                    for kk in 0..d {
                        let mut v = 0.0;
                        for j in 0..d {
                            for l in 0..d {
                                v += a.get(i, j, kk, l) * ga[j] * gb[l];
                            }
                        }
                        k[(na * d + i) * nd + nb * d + kk] += q.weight * v;
                    }
                }
            }
        }
    }
    k
}

/// Load `-∫ A G : D(v)` for a strain field `G` given per quadrature point.
pub fn element_strain_load(
    el: &LagrangeBox,
    quad: &[QuadPoint],
    a: &ElasticTensor,
    strain_at: impl Fn(&QuadPoint) -> [[f64; 3]; 3],
) -> Vec<f64> {
    let d = el.dim;
    let mut f = vec![0.0; el.n_nodes() * d];
    for q in quad {
        let s = a.apply(&strain_at(q));
        for (na, ga) in q.grads.iter().enumerate() {
            for i in 0..d {
                let mut v = 0.0;
                for j in 0..d {
                    v += s[i][j] * ga[j];
                }
                f[na * d + i] -= q.weight * v;
            }
        }
    }
    f
}
