//! Tensor-product Lagrange elements on axis-aligned boxes and Gauss rules.

/// Gauss–Legendre points and weights on (0, 1).
pub fn gauss_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (pts, wts): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => {
            const A: f64 = 0.577_350_269_189_625_8;
            (&[-A, A], &[1.0, 1.0])
        }
        3 => {
            const A: f64 = 0.774_596_669_241_483_4;
            (&[-A, 0.0, A], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            const A: f64 = 0.339_981_043_584_856_3;
            const B: f64 = 0.861_136_311_594_052_6;
            const WA: f64 = 0.652_145_154_862_546_1;
            const WB: f64 = 0.347_854_845_137_453_9;
            (&[-B, -A, A, B], &[WB, WA, WA, WB])
        }
        _ => panic!("gauss rule with {n} points not tabulated"),
    };
    (
        pts.iter().map(|p| 0.5 * (p + 1.0)).collect(),
        wts.iter().map(|w| 0.5 * w).collect(),
    )
}

/// 1D Lagrange basis of degree `order` on equispaced nodes of (0, 1):
/// values and derivatives at `s`.
pub fn lagrange_1d(order: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![1.0 - s, s], vec![-1.0, 1.0]),
        2 => (
            vec![2.0 * (s - 0.5) * (s - 1.0), 4.0 * s * (1.0 - s), 2.0 * s * (s - 0.5)],
            vec![4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0],
        ),
        _ => panic!("lagrange order {order} unsupported"),
    }
}

/// A box element `[origin, origin + size]` with degree-`order` Lagrange
/// shape functions. Local node `a` has per-axis indices
/// `c_k = (a / (order+1)^k) % (order+1)`, axis 0 fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeBox {
    pub dim: usize,
    pub order: usize,
    pub size: [f64; 3],
}

/// Shape data at one quadrature point.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Reference coordinates in (0, 1)^dim.
    pub reference: [f64; 3],
    /// Physical weight (includes the Jacobian).
    pub weight: f64,
    pub values: Vec<f64>,
    /// `grads[a][k] = ∂N_a/∂x_k`.
    pub grads: Vec<[f64; 3]>,
}

impl LagrangeBox {
    pub fn new(dim: usize, order: usize, size: &[f64]) -> Self {
        assert!(dim == 2 || dim == 3);
        let mut s = [1.0; 3];
        s[..dim].copy_from_slice(&size[..dim]);
        Self { dim, order, size: s }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.order + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn local_index(&self, a: usize) -> [usize; 3] {
        let m = self.nodes_per_axis();
        let mut c = [0; 3];
        for (k, ck) in c.iter_mut().enumerate().take(self.dim) {
            *ck = (a / m.pow(k as u32)) % m;
        }
        c
    }

    pub fn volume(&self) -> f64 {
        self.size[..self.dim].iter().product()
    }

    /// Values and physical gradients at reference point `r`.
    pub fn eval(&self, r: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let per_axis: Vec<(Vec<f64>, Vec<f64>)> = (0..self.dim).map(|k| lagrange_1d(self.order, r[k])).collect();
        let n = self.n_nodes();
        let mut vals = vec![1.0; n];
        let mut grads = vec![[0.0; 3]; n];
        for a in 0..n {
            let c = self.local_index(a);
            for k in 0..self.dim {
                vals[a] *= per_axis[k].0[c[k]];
            }
            for k in 0..self.dim {
                let mut g = per_axis[k].1[c[k]] / self.size[k];
                for l in 0..self.dim {
                    if l != k {
                        g *= per_axis[l].0[c[l]];
                    }
                }
                grads[a][k] = g;
            }
        }
        (vals, grads)
    }

    /// Tensor Gauss rule with `points` per axis.
    pub fn quadrature(&self, points: usize) -> Vec<QuadPoint> {
        let (p, w) = gauss_unit(points);
        let total = points.pow(self.dim as u32);
        let vol = self.volume();
        (0..total)
            .map(|q| {
                let mut r = [0.0; 3];
                let mut weight = vol;
                for k in 0..self.dim {
                    let idx = (q / points.pow(k as u32)) % points;
                    r[k] = p[idx];
                    weight *= w[idx];
                }
                let (values, grads) = self.eval(&r);
                QuadPoint {
                    reference: r,
                    weight,
                    values,
                    grads,
                }
            })
            .collect()
    }

    /// Default rule: exact for the mass matrix of this element.
    pub fn default_quadrature(&self) -> Vec<QuadPoint> {
        self.quadrature(self.order + 1)
    }
}

/// Symmetric gradient of a vector field at a quadrature point, from nodal
/// values `u[a*dim + i]`.
pub fn sym_grad(dim: usize, grads: &[[f64; 3]], u: &[f64]) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for (a, ga) in grads.iter().enumerate() {
        for i in 0..dim {
            let ui = u[a * dim + i];
            for j in 0..dim {
                g[i][j] += ui * ga[j];
            }
        }
    }
    let mut e = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            e[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    e
}

/// Consistent vector mass matrix `∫ N_a N_b δ_ij`.
pub fn vector_mass(el: &LagrangeBox, quad: &[QuadPoint]) -> Vec<f64> {
    let d = el.dim;
    let nd = el.n_nodes() * d;
    let mut m = vec![0.0; nd * nd];
    for q in quad {
        for (a, &na) in q.values.iter().enumerate() {
            for (b, &nb) in q.values.iter().enumerate() {
                let v = q.weight * na * nb;
                for i in 0..d {
                    m[(a * d + i) * nd + b * d + i] += v;
                }
            }
        }
    }
    m
}

/// Viscous form `∫ D(u) : D(v)` (unit viscosity, no factor 2).
pub fn sym_grad_stiffness(el: &LagrangeBox, quad: &[QuadPoint]) -> Vec<f64> {
    let d = el.dim;
    let nd = el.n_nodes() * d;
    let mut k = vec![0.0; nd * nd];
    for q in quad {
        for (a, ga) in q.grads.iter().enumerate() {
            for (b, gb) in q.grads.iter().enumerate() {
                for i in 0..d {
                    for j in 0..d {
                        // D(N_a e_i) : D(N_b e_j) = ½ (δ_ij ∇N_a·∇N_b + ∂_j N_a ∂_i N_b)
                        let mut v = 0.5 * ga[j] * gb[i];
                        if i == j {
                            v += 0.5 * (0..d).map(|l| ga[l] * gb[l]).sum::<f64>();
                        }
                        k[(a * d + i) * nd + b * d + j] += q.weight * v;
                    }
                }
            }
        }
    }
    k
}
