//! Clamped 1D beam: cubic Hermite transverse field and piecewise-linear
//! in-plane field on a shared node set.

use super::element::gauss_unit;
use super::sparse::{SparseOperator, TripletBuilder};

/// Cubic Hermite basis on an element of length `h` at `s ∈ [0,1]`:
/// values, first and second `x`-derivatives. Local dofs are
/// `[w_0, w'_0, w_1, w'_1]`.
pub fn hermite_basis(h: f64, s: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [1.0 - 3.0 * s2 + 2.0 * s3, h * (s - 2.0 * s2 + s3), 3.0 * s2 - 2.0 * s3, h * (s3 - s2)],
        [
            (6.0 * s2 - 6.0 * s) / h,
            1.0 - 4.0 * s + 3.0 * s2,
            (6.0 * s - 6.0 * s2) / h,
            3.0 * s2 - 2.0 * s,
        ],
        [
            (12.0 * s - 6.0) / (h * h),
            (6.0 * s - 4.0) / h,
            (6.0 - 12.0 * s) / (h * h),
            (6.0 * s - 2.0) / h,
        ],
    )
}

/// Node set on `[0, L]` with both ends clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMesh {
    pub nodes: Vec<f64>,
}

impl BeamMesh {
    pub fn uniform(length: f64, n_elements: usize) -> Self {
        assert!(n_elements >= 1);
        Self {
            nodes: (0..=n_elements).map(|i| length * i as f64 / n_elements as f64).collect(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap() - self.nodes[0]
    }

    /// Free Hermite dofs: value and slope at interior nodes.
    pub fn n_hermite(&self) -> usize {
        2 * (self.nodes.len() - 2)
    }

    /// Free P1 dofs: interior nodes.
    pub fn n_linear(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Free index of Hermite dof `kind` (0 value, 1 slope) at `node`.
    pub fn hermite_dof(&self, node: usize, kind: usize) -> Option<usize> {
        (node > 0 && node + 1 < self.nodes.len()).then(|| 2 * (node - 1) + kind)
    }

    pub fn linear_dof(&self, node: usize) -> Option<usize> {
        (node > 0 && node + 1 < self.nodes.len()).then(|| node - 1)
    }

    fn element_hermite_dofs(&self, e: usize) -> [Option<usize>; 4] {
        [
            self.hermite_dof(e, 0),
            self.hermite_dof(e, 1),
            self.hermite_dof(e + 1, 0),
            self.hermite_dof(e + 1, 1),
        ]
    }

    /// Element containing `x` and the local coordinate.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.n_elements();
        let e = match self.nodes.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let h = self.nodes[e + 1] - self.nodes[e];
        (e, ((x - self.nodes[e]) / h).clamp(0.0, 1.0))
    }

    /// `(w, w', w'')` of a free Hermite vector at `x`.
    pub fn eval_hermite(&self, w: &[f64], x: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for (d, c) in self.hermite_extraction(x) {
            out.0 += c[0] * w[d];
            out.1 += c[1] * w[d];
            out.2 += c[2] * w[d];
        }
        out
    }

    /// Free dofs touching `x` with the basis value and derivatives there.
    pub fn hermite_extraction(&self, x: f64) -> Vec<(usize, [f64; 3])> {
        let (e, s) = self.locate(x);
        let h = self.nodes[e + 1] - self.nodes[e];
        let (v, d1, d2) = hermite_basis(h, s);
        self.element_hermite_dofs(e)
            .iter()
            .enumerate()
            .filter_map(|(a, d)| d.map(|d| (d, [v[a], d1[a], d2[a]])))
            .collect()
    }

    /// `(u, u')` of a free P1 vector at `x`.
    pub fn eval_linear(&self, u: &[f64], x: f64) -> (f64, f64) {
        let (e, s) = self.locate(x);
        let h = self.nodes[e + 1] - self.nodes[e];
        let at = |n: usize| self.linear_dof(n).map_or(0.0, |d| u[d]);
        let (u0, u1) = (at(e), at(e + 1));
        (u0 * (1.0 - s) + u1 * s, (u1 - u0) / h)
    }

    fn assemble_hermite(&self, points: usize, f: impl Fn(&[f64; 4], &[f64; 4], &[f64; 4], usize, usize) -> f64) -> SparseOperator {
        let n = self.n_hermite();
        let mut t = TripletBuilder::new(n, n);
        let (gp, gw) = gauss_unit(points);
        for e in 0..self.n_elements() {
            let h = self.nodes[e + 1] - self.nodes[e];
            let dofs = self.element_hermite_dofs(e);
            for (s, w) in gp.iter().zip(&gw) {
                let (v, d1, d2) = hermite_basis(h, *s);
                for a in 0..4 {
                    for b in 0..4 {
                        if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                            t.push(i, j, w * h * f(&v, &d1, &d2, a, b));
                        }
                    }
                }
            }
        }
        t.build()
    }

    /// `∫ w v`
    pub fn hermite_mass(&self) -> SparseOperator {
        self.assemble_hermite(4, |v, _, _, a, b| v[a] * v[b])
    }

    /// `∫ w'' v''`
    pub fn hermite_bending(&self) -> SparseOperator {
        self.assemble_hermite(2, |_, _, d2, a, b| d2[a] * d2[b])
    }

    /// `∫ u' v'` on the P1 space.
    pub fn linear_stiffness(&self) -> SparseOperator {
        let n = self.n_linear();
        let mut t = TripletBuilder::new(n, n);
        for e in 0..self.n_elements() {
            let h = self.nodes[e + 1] - self.nodes[e];
            let d = [self.linear_dof(e), self.linear_dof(e + 1)];
            let k = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (d[a], d[b]) {
                        t.push(i, j, k[a][b]);
                    }
                }
            }
        }
        t.build()
    }

    /// `∫ u' w''` with rows on the P1 space and columns on the Hermite space.
    pub fn linear_hermite_coupling(&self) -> SparseOperator {
        let mut t = TripletBuilder::new(self.n_linear(), self.n_hermite());
        let (gp, gw) = gauss_unit(2);
        for e in 0..self.n_elements() {
            let h = self.nodes[e + 1] - self.nodes[e];
            let hd = self.element_hermite_dofs(e);
            let ld = [self.linear_dof(e), self.linear_dof(e + 1)];
            let dl = [-1.0 / h, 1.0 / h];
            for (s, w) in gp.iter().zip(&gw) {
                let (_, _, d2) = hermite_basis(h, *s);
                for a in 0..2 {
                    for b in 0..4 {
                        if let (Some(i), Some(j)) = (ld[a], hd[b]) {
                            t.push(i, j, w * h * dl[a] * d2[b]);
                        }
                    }
                }
            }
        }
        t.build()
    }

    /// `∫ g(x) v` for a load density `g`.
    pub fn hermite_load(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut f = vec![0.0; self.n_hermite()];
        let (gp, gw) = gauss_unit(4);
        for e in 0..self.n_elements() {
            let h = self.nodes[e + 1] - self.nodes[e];
            let dofs = self.element_hermite_dofs(e);
            for (s, w) in gp.iter().zip(&gw) {
                let (v, _, _) = hermite_basis(h, *s);
                let gx = g(self.nodes[e] + s * h);
                for a in 0..4 {
                    if let Some(i) = dofs[a] {
                        f[i] += w * h * gx * v[a];
                    }
                }
            }
        }
        f
    }
}
