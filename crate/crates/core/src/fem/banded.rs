//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column-major with
//! `ldab = 2 kl + ku + 1` rows, element `(i, j)` at row `kl + ku + i - j`.
//! Pivoting widens the upper band of `U` to `kl + ku`.

use super::solve::SolveError;
use super::sparse::SparseOperator;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(op: &SparseOperator) -> Result<Self, SolveError> {
        let n = op.n_rows();
        if op.n_cols() != n {
            return Err(SolveError::DimensionMismatch(format!(
                "banded LU needs a square operator, got {}x{}",
                n,
                op.n_cols()
            )));
        }
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..n {
            for (j, _) in op.row(i) {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in op.row(i) {
                ab[j * ldab + kv + i - j] += v;
            }
        }
        let threshold = 1e-14 * op.max_abs();
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        lu.factorize(threshold)?;
        Ok(lu)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Bytes held by the factor.
    pub fn storage_bytes(&self) -> usize {
        self.ab.len() * std::mem::size_of::<f64>()
    }

    fn factorize(&mut self, threshold: f64) -> Result<(), SolveError> {
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        let ab = &mut self.ab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut pmax = ab[col + kv].abs();
            for t in 1..=km {
                let v = ab[col + kv + t].abs();
                if v > pmax {
                    pmax = v;
                    jp = t;
                }
            }
            self.ipiv[j] = j + jp;
            if pmax <= threshold {
                return Err(SolveError::RankDeficient { index: j });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv;
                    // rows j and j + jp of column c
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[col + kv];
                for t in 1..=km {
                    ab[col + kv + t] *= inv;
                }
                for c in (j + 1)..=ju {
                    let cbase = c * ldab + kv + j - c;
                    let ujc = ab[cbase];
                    if ujc != 0.0 {
                        for t in 1..=km {
                            ab[cbase + t] -= ab[col + kv + t] * ujc;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        let ab = &self.ab;
        let mut b = rhs.to_vec();
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let lm = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=lm {
                    b[j + t] -= ab[j * ldab + kv + t] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            b[j] /= ab[col + kv];
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= ab[col + kv + i - j] * bj;
                }
            }
        }
        b
    }
}
