//! Master/slave elimination for periodic identification, plus mean-zero
//! functionals that are handled by projection inside the solver.

use std::collections::HashMap;

use super::solve::{solve_spd_projected, SolveConfig, SolveReport};
use super::sparse::{dot, SparseOperator, TripletBuilder};
use crate::error::{Error, Result};

/// `∫ u_c = Σ weights[k] · u[dofs[k]]` for one vector component `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanZeroFunctional {
    pub dofs: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintMap {
    pub n_full: usize,
    /// `(master, slave)`: the slave dof takes the master's value.
    pub pairs: Vec<(usize, usize)>,
    pub mean_zero: Vec<MeanZeroFunctional>,
}

impl ConstraintMap {
    pub fn new(n_full: usize) -> Self {
        Self {
            n_full,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut slaves = HashMap::new();
        for &(m, s) in &self.pairs {
            if m >= self.n_full || s >= self.n_full {
                return Err(Error::Constraint(format!("pair ({m}, {s}) out of range {}", self.n_full)));
            }
            if m == s {
                return Err(Error::Constraint(format!("dof {m} paired with itself")));
            }
            if slaves.insert(s, m).is_some() {
                return Err(Error::Constraint(format!("dof {s} is a slave twice")));
            }
        }
        for &(m, _) in &self.pairs {
            if slaves.contains_key(&m) {
                return Err(Error::Constraint(format!("constraint chain: master {m} is itself a slave")));
            }
        }
        for f in &self.mean_zero {
            if f.dofs.len() != f.weights.len() {
                return Err(Error::Constraint("mean-zero functional length mismatch".into()));
            }
            if f.weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Constraint("mean-zero functional has non-positive total weight".into()));
            }
        }
        Ok(())
    }

    /// Full dof -> reduced dof.
    fn reduced_numbering(&self) -> (Vec<usize>, usize) {
        let slave_of: HashMap<usize, usize> = self.pairs.iter().map(|&(m, s)| (s, m)).collect();
        let mut map = vec![usize::MAX; self.n_full];
        let mut next = 0;
        for (i, slot) in map.iter_mut().enumerate() {
            if !slave_of.contains_key(&i) {
                *slot = next;
                next += 1;
            }
        }
        for (&s, &m) in &slave_of {
            map[s] = map[m];
        }
        (map, next)
    }
}

/// The constrained system on the reduced space.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub op: SparseOperator,
    pub rhs: Vec<f64>,
    full_to_reduced: Vec<usize>,
    /// Kernel directions removed by projection (one per mean-zero functional).
    pub nullspace: Vec<Vec<f64>>,
    mean_zero: Vec<MeanZeroFunctional>,
}

impl ReducedSystem {
    pub fn dimension(&self) -> usize {
        self.op.n_rows()
    }

    /// Prolongation `P` with `u_full = P u_reduced`.
    pub fn prolongation(&self) -> SparseOperator {
        let mut t = TripletBuilder::new(self.full_to_reduced.len(), self.dimension());
        for (i, &r) in self.full_to_reduced.iter().enumerate() {
            t.push(i, r, 1.0);
        }
        t.build()
    }

    /// Copies reduced values back to every full dof, then removes the
    /// weighted mean of each constrained component.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.full_to_reduced.iter().map(|&r| reduced[r]).collect();
        for f in &self.mean_zero {
            let total: f64 = f.weights.iter().sum();
            let mean = f.dofs.iter().zip(&f.weights).map(|(&d, w)| w * full[d]).sum::<f64>() / total;
            for &d in &f.dofs {
                full[d] -= mean;
            }
        }
        full
    }

    /// Restriction of a full vector by summing slave contributions into masters.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dimension()];
        for (i, &k) in self.full_to_reduced.iter().enumerate() {
            r[k] += full[i];
        }
        r
    }

    /// Injection of a full vector (takes master values).
    pub fn inject(&self, full: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dimension()];
        for (i, &k) in self.full_to_reduced.iter().enumerate() {
            r[k] = full[i];
        }
        r
    }

    pub fn solve(&self, cfg: &SolveConfig) -> Result<(Vec<f64>, SolveReport)> {
        let rep = solve_spd_projected(&self.op, &self.rhs, cfg, &self.nullspace)?;
        Ok((self.expand(&rep.x), rep))
    }

    /// Solves with the reduced operator for another full right-hand side.
    pub fn solve_rhs(&self, full_rhs: &[f64], cfg: &SolveConfig) -> Result<(Vec<f64>, SolveReport)> {
        let rep = solve_spd_projected(&self.op, &self.restrict(full_rhs), cfg, &self.nullspace)?;
        Ok((self.expand(&rep.x), rep))
    }

    /// Weighted means of each constrained component of a full vector.
    pub fn component_means(&self, full: &[f64]) -> Vec<f64> {
        self.mean_zero
            .iter()
            .map(|f| {
                let total: f64 = f.weights.iter().sum();
                f.dofs.iter().zip(&f.weights).map(|(&d, w)| w * full[d]).sum::<f64>() / total
            })
            .collect()
    }
}

/// Eliminates slave dofs: `K_r = Pᵀ K P`, `f_r = Pᵀ f`.
pub fn apply_constraints(op: &SparseOperator, rhs: &[f64], map: &ConstraintMap) -> Result<ReducedSystem> {
    if op.n_rows() != map.n_full || op.n_cols() != map.n_full || rhs.len() != map.n_full {
        return Err(Error::Constraint(format!(
            "operator {}x{} / rhs {} inconsistent with map size {}",
            op.n_rows(),
            op.n_cols(),
            rhs.len(),
            map.n_full
        )));
    }
    map.validate()?;
    let (full_to_reduced, n_red) = map.reduced_numbering();
    let mut t = TripletBuilder::with_capacity(n_red, n_red, op.nnz());
    for i in 0..op.n_rows() {
        let ri = full_to_reduced[i];
        for (j, v) in op.row(i) {
            t.push(ri, full_to_reduced[j], v);
        }
    }
    let mut rhs_r = vec![0.0; n_red];
    for (i, &v) in rhs.iter().enumerate() {
        rhs_r[full_to_reduced[i]] += v;
    }
    let nullspace = map
        .mean_zero
        .iter()
        .map(|f| {
            let mut z = vec![0.0; n_red];
            for &d in &f.dofs {
                z[full_to_reduced[d]] = 1.0;
            }
            z
        })
        .collect();
    Ok(ReducedSystem {
        op: t.build(),
        rhs: rhs_r,
        full_to_reduced,
        nullspace,
        mean_zero: map.mean_zero.clone(),
    })
}

/// `‖Pᵀ(b − K u)‖` for a full vector `u`, useful for checking expanded
/// solutions against the unreduced operator.
pub fn constrained_residual(op: &SparseOperator, rhs: &[f64], sys: &ReducedSystem, full: &[f64]) -> f64 {
    let ku = op.mul_vec(full);
    let r: Vec<f64> = rhs.iter().zip(&ku).map(|(b, k)| b - k).collect();
    let rr = sys.restrict(&r);
    dot(&rr, &rr).sqrt()
}
