//! Tensor-product quadrilateral grids for the 2D vertical slice with
//! biquadratic velocity / bilinear pressure elements.
//!
//! Velocity nodes are numbered column-major in `x` (z fastest), so that a
//! natural numbering of unknowns is already narrow-banded.

use std::collections::HashMap;

use super::elasticity::{element_stiffness_elasticity, ElasticTensor};
use super::element::{sym_grad_stiffness, vector_mass, LagrangeBox};

#[derive(Debug, Clone, PartialEq)]
pub struct SliceGrid {
    /// Element breakpoints in x (strictly increasing).
    pub xs: Vec<f64>,
    /// Element breakpoints in z (strictly increasing).
    pub zs: Vec<f64>,
}

/// Breakpoints of a geometric grading on `[a, b]` with `n` elements whose
/// first element (at `a`) has length `h0` when possible. Falls back to
/// uniform when `h0 ≥ (b−a)/n`.
pub fn graded(a: f64, b: f64, n: usize, h0: f64) -> Vec<f64> {
    let len = b - a;
    if h0 * n as f64 >= len {
        return (0..=n).map(|i| a + len * i as f64 / n as f64).collect();
    }
    // solve h0 (r^n − 1)/(r − 1) = len for r > 1 by bisection
    let total = |r: f64| h0 * (r.powi(n as i32) - 1.0) / (r - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
    while total(hi) < len {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < len {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut out = vec![a];
    let mut h = h0;
    for _ in 0..n {
        let next = out.last().unwrap() + h;
        out.push(next);
        h *= r;
    }
    *out.last_mut().unwrap() = b;
    out
}

impl SliceGrid {
    pub fn new(xs: Vec<f64>, zs: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && zs.len() >= 2);
        assert!(xs.windows(2).all(|w| w[1] > w[0]) && zs.windows(2).all(|w| w[1] > w[0]));
        Self { xs, zs }
    }

    pub fn uniform(x0: f64, x1: f64, nx: usize, z0: f64, z1: f64, nz: usize) -> Self {
        Self::new(
            (0..=nx).map(|i| x0 + (x1 - x0) * i as f64 / nx as f64).collect(),
            (0..=nz).map(|j| z0 + (z1 - z0) * j as f64 / nz as f64).collect(),
        )
    }

    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn nz(&self) -> usize {
        self.zs.len() - 1
    }

    pub fn n_elements(&self) -> usize {
        self.nx() * self.nz()
    }

    /// Element index, z fastest.
    pub fn element(&self, ex: usize, ez: usize) -> usize {
        ex * self.nz() + ez
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e / self.nz(), e % self.nz())
    }

    pub fn element_size(&self, ex: usize, ez: usize) -> [f64; 2] {
        [self.xs[ex + 1] - self.xs[ex], self.zs[ez + 1] - self.zs[ez]]
    }

    /// Number of Q2 nodes per column (`2 nz + 1`).
    pub fn vcol(&self) -> usize {
        2 * self.nz() + 1
    }

    pub fn n_vnodes(&self) -> usize {
        (2 * self.nx() + 1) * self.vcol()
    }

    pub fn vnode(&self, i: usize, j: usize) -> usize {
        i * self.vcol() + j
    }

    /// Half-index coordinates `(i, j)` of a Q2 node.
    pub fn vnode_ij(&self, n: usize) -> (usize, usize) {
        (n / self.vcol(), n % self.vcol())
    }

    fn half_coord(b: &[f64], i: usize) -> f64 {
        if i % 2 == 0 {
            b[i / 2]
        } else {
            0.5 * (b[i / 2] + b[i / 2 + 1])
        }
    }

    pub fn vnode_xz(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.vnode_ij(n);
        [Self::half_coord(&self.xs, i), Self::half_coord(&self.zs, j)]
    }

    /// The nine Q2 nodes in local `LagrangeBox` order (x fastest).
    pub fn element_vnodes(&self, ex: usize, ez: usize) -> [usize; 9] {
        let mut out = [0; 9];
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.vnode(2 * ex + a % 3, 2 * ez + a / 3);
        }
        out
    }

    pub fn n_pnodes(&self) -> usize {
        (self.nx() + 1) * (self.nz() + 1)
    }

    pub fn pnode(&self, i: usize, j: usize) -> usize {
        i * (self.nz() + 1) + j
    }

    pub fn pnode_xz(&self, n: usize) -> [f64; 2] {
        let c = self.nz() + 1;
        [self.xs[n / c], self.zs[n % c]]
    }

    /// The four Q1 vertices in local order (x fastest).
    pub fn element_pnodes(&self, ex: usize, ez: usize) -> [usize; 4] {
        [
            self.pnode(ex, ez),
            self.pnode(ex + 1, ez),
            self.pnode(ex, ez + 1),
            self.pnode(ex + 1, ez + 1),
        ]
    }

    fn locate_axis(b: &[f64], x: f64) -> (usize, f64) {
        let n = b.len() - 1;
        let e = match b.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        (e, ((x - b[e]) / (b[e + 1] - b[e])).clamp(0.0, 1.0))
    }

    /// Element `(ex, ez)` containing the point, and reference coordinates.
    pub fn locate(&self, x: f64, z: f64) -> (usize, usize, [f64; 2]) {
        let (ex, rx) = Self::locate_axis(&self.xs, x);
        let (ez, rz) = Self::locate_axis(&self.zs, z);
        (ex, ez, [rx, rz])
    }

    /// Q2 velocity box for an element.
    pub fn vbox(&self, ex: usize, ez: usize) -> LagrangeBox {
        LagrangeBox::new(2, 2, &self.element_size(ex, ez))
    }

    pub fn pbox(&self, ex: usize, ez: usize) -> LagrangeBox {
        LagrangeBox::new(2, 1, &self.element_size(ex, ez))
    }

    /// Value and gradient of a Q2 vector field `v[2 node + c]` at a point.
    pub fn eval_velocity(&self, v: &[f64], x: f64, z: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let (ex, ez, r) = self.locate(x, z);
        let (vals, grads) = self.vbox(ex, ez).eval(&r);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (a, &n) in self.element_vnodes(ex, ez).iter().enumerate() {
            for c in 0..2 {
                u[c] += vals[a] * v[2 * n + c];
                for k in 0..2 {
                    g[c][k] += grads[a][k] * v[2 * n + c];
                }
            }
        }
        (u, g)
    }

    /// Value of a Q1 field `p[pnode]` at a point.
    pub fn eval_pressure(&self, p: &[f64], x: f64, z: f64) -> f64 {
        let (ex, ez, r) = self.locate(x, z);
        let (vals, _) = self.pbox(ex, ez).eval(&r);
        self.element_pnodes(ex, ez).iter().zip(&vals).map(|(&n, v)| v * p[n]).sum()
    }
}

/// Element matrices of the Q2/Q1 pair, dense row-major. Velocity local
/// dofs are `2a + c`.
#[derive(Debug, Clone)]
pub struct StokesElement {
    pub mass: Vec<f64>,
    /// `∫ D(u) : D(v)`
    pub viscous: Vec<f64>,
    /// `div[(a, 2b+c)] = −∫ q_a ∂_c N_b`
    pub div: Vec<f64>,
}

pub const VDOFS: usize = 18;

impl StokesElement {
    pub fn new(size: [f64; 2]) -> Self {
        let v = LagrangeBox::new(2, 2, &size);
        let p = LagrangeBox::new(2, 1, &size);
        let quad = v.quadrature(3);
        let mut div = vec![0.0; 4 * VDOFS];
        for q in &quad {
            let (pv, _) = p.eval(&q.reference);
            for (a, qa) in pv.iter().enumerate() {
                for (b, gb) in q.grads.iter().enumerate() {
                    for c in 0..2 {
                        div[a * VDOFS + 2 * b + c] -= q.weight * qa * gb[c];
                    }
                }
            }
        }
        Self {
            mass: vector_mass(&v, &quad),
            viscous: sym_grad_stiffness(&v, &quad),
            div,
        }
    }
}

/// Q2 elasticity stiffness for an element size.
pub fn elastic_element(size: [f64; 2], a: &ElasticTensor) -> Vec<f64> {
    let v = LagrangeBox::new(2, 2, &size);
    element_stiffness_elasticity(&v, &v.quadrature(3), a)
}

/// Caches Stokes element matrices by element size.
#[derive(Debug, Default)]
pub struct StokesCache {
    map: HashMap<[u64; 2], StokesElement>,
}

impl StokesCache {
    pub fn get(&mut self, size: [f64; 2]) -> &StokesElement {
        self.map
            .entry([size[0].to_bits(), size[1].to_bits()])
            .or_insert_with(|| StokesElement::new(size))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grading_hits_both_ends() {
        let g = graded(0.1, 2.0, 8, 0.02);
        assert_eq!(g.len(), 9);
        assert!((g[1] - g[0] - 0.02).abs() < 1e-9);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(3).all(|w| w[2] - w[1] >= w[1] - w[0] - 1e-12));
        assert_eq!(graded(0.0, 1.0, 4, 0.5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn node_numbering_is_consistent() {
        let g = SliceGrid::uniform(0.0, 2.0, 3, -1.0, 1.0, 2);
        assert_eq!(g.n_vnodes(), 7 * 5);
        let nodes = g.element_vnodes(1, 1);
        assert_eq!(g.vnode_xz(nodes[0]), [2.0 / 3.0, 0.0]);
        assert_eq!(g.vnode_xz(nodes[8]), [4.0 / 3.0, 1.0]);
        let [x, z] = g.vnode_xz(nodes[4]);
        assert!((x - 1.0).abs() < 1e-15 && (z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn divergence_of_affine_field() {
        // v = (x, 0): ∫_K q_a div v = ∫ q_a = area/4 per vertex, so div·v = −area/4
        let size = [0.5, 0.25];
        let el = StokesElement::new(size);
        let b = LagrangeBox::new(2, 2, &size);
        let mut v = vec![0.0; VDOFS];
        for a in 0..9 {
            v[2 * a] = b.local_index(a)[0] as f64 * 0.5 * size[0];
        }
        for a in 0..4 {
            let s: f64 = (0..VDOFS).map(|j| el.div[a * VDOFS + j] * v[j]).sum();
            assert!((s + size[0] * size[1] / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rigid_motions_have_no_viscous_energy() {
        let size = [0.3, 0.7];
        let el = StokesElement::new(size);
        let b = LagrangeBox::new(2, 2, &size);
        let mut v = vec![0.0; VDOFS];
        for a in 0..9 {
            let c = b.local_index(a);
            let (x, z) = (c[0] as f64 * 0.15, c[1] as f64 * 0.35);
            v[2 * a] = 1.0 - z;
            v[2 * a + 1] = 2.0 + x;
        }
        let e: f64 = (0..VDOFS)
            .flat_map(|i| (0..VDOFS).map(move |j| (i, j)))
            .map(|(i, j)| v[i] * el.viscous[i * VDOFS + j] * v[j])
            .sum();
        assert!(e.abs() < 1e-13);
    }

    #[test]
    fn evaluation_reproduces_quadratics() {
        let g = SliceGrid::new(vec![0.0, 0.3, 1.0], vec![-1.0, -0.2, 0.5]);
        let f = |x: f64, z: f64| [x * x - z, x * z + 2.0];
        let mut v = vec![0.0; 2 * g.n_vnodes()];
        for n in 0..g.n_vnodes() {
            let [x, z] = g.vnode_xz(n);
            let u = f(x, z);
            v[2 * n] = u[0];
            v[2 * n + 1] = u[1];
        }
        let (u, grad) = g.eval_velocity(&v, 0.77, 0.1);
        let e = f(0.77, 0.1);
        assert!((u[0] - e[0]).abs() < 1e-13 && (u[1] - e[1]).abs() < 1e-13);
        assert!((grad[0][0] - 1.54).abs() < 1e-12 && (grad[1][1] - 0.77).abs() < 1e-12);
    }
}
