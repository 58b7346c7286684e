//! Dense direct solves, used as ground truth in tests.

use nalgebra::{DMatrix, DVector};

use super::solve::SolveError;
use super::sparse::SparseOperator;

pub const DEFAULT_DENSE_CAP: usize = 5000;

/// LU factorization with partial pivoting, kept for repeated solves.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.lu
            .solve(&b)
            .expect("factorization was checked for zero pivots")
            .as_slice()
            .to_vec()
    }
}

pub(crate) fn dense_lu(m: &DMatrix<f64>, cap: usize) -> Result<DenseLu, SolveError> {
    let n = m.nrows();
    if n > cap {
        return Err(SolveError::DimensionCap { dimension: n, cap });
    }
    let scale = m.amax();
    let lu = m.clone().lu();
    let u = lu.u();
    for i in 0..n {
        if u[(i, i)].abs() <= 1e-14 * scale {
            return Err(SolveError::RankDeficient { index: i });
        }
    }
    Ok(DenseLu { lu })
}

/// Direct solve of `op x = rhs` with one pass of iterative refinement.
pub fn dense_oracle_solve(op: &SparseOperator, rhs: &[f64], cap: usize) -> Result<Vec<f64>, SolveError> {
    if op.n_rows() != op.n_cols() || op.n_rows() != rhs.len() {
        return Err(SolveError::DimensionMismatch(format!(
            "operator {}x{}, rhs {}",
            op.n_rows(),
            op.n_cols(),
            rhs.len()
        )));
    }
    if op.n_rows() > cap {
        return Err(SolveError::DimensionCap {
            dimension: op.n_rows(),
            cap,
        });
    }
    let a = op.to_dense();
    dense_matrix_solve(&a, rhs, cap)
}

pub fn dense_matrix_solve(a: &DMatrix<f64>, rhs: &[f64], cap: usize) -> Result<Vec<f64>, SolveError> {
    let lu = dense_lu(a, cap)?;
    let b = DVector::from_column_slice(rhs);
    let mut x = DVector::from_vec(lu.solve(rhs));
    let r = &b - a * &x;
    x += DVector::from_vec(lu.solve(r.as_slice()));
    Ok(x.as_slice().to_vec())
}
