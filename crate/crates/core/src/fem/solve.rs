//! Linear solvers: preconditioned CG (with optional null-space projection),
//! MINRES for symmetric indefinite systems, and direct factorizations used
//! for saddle-point systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::banded::BandedLu;
use super::dense::{dense_lu, DenseLu, DEFAULT_DENSE_CAP};
use super::sparse::{axpy, block_saddle, dot, norm2, SparseOperator, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    #[default]
    Diagonal,
}

/// How a saddle-point system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SaddleMethod {
    /// Dense LU below `dense_threshold`, banded LU above.
    #[default]
    Auto,
    Minres,
    Dense,
    Banded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
    pub saddle_method: SaddleMethod,
    pub dense_threshold: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
            preconditioner: Preconditioner::Diagonal,
            saddle_method: SaddleMethod::Auto,
            dense_threshold: 600,
        }
    }
}

impl SolveConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(SolveError::InvalidConfig(format!(
                "tolerance {} not in (0, 1)",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
        history: Vec<f64>,
    },
    #[error("negative curvature {curvature:.3e} along search direction {direction}")]
    Indefinite { direction: usize, curvature: f64 },
    #[error("operator is singular: vanishing curvature along search direction {direction}")]
    Singular { direction: usize },
    #[error("zero pivot at row {index}: constraint block is rank deficient")]
    RankDeficient { index: usize },
    #[error("dimension {dimension} exceeds the dense oracle cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`.
    pub residual: f64,
    pub history: Vec<f64>,
    /// Smallest Ritz value of the (preconditioned) operator seen by CG.
    pub min_ritz: Option<f64>,
}

fn check_square(op: &SparseOperator, rhs: &[f64]) -> Result<(), SolveError> {
    if op.n_rows() != op.n_cols() || op.n_rows() != rhs.len() {
        return Err(SolveError::DimensionMismatch(format!(
            "operator {}x{}, rhs {}",
            op.n_rows(),
            op.n_cols(),
            rhs.len()
        )));
    }
    Ok(())
}

/// Conjugate gradients for symmetric positive (semi)definite operators.
pub fn solve_spd(op: &SparseOperator, rhs: &[f64], cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    solve_spd_projected(op, rhs, cfg, &[])
}

/// CG restricted to the orthogonal complement of `nullspace`.
///
/// The right-hand side is projected first, and every preconditioned residual
/// is projected again, so iterates never pick up a kernel component. With the
/// kernel of a singular SPSD operator supplied here the iteration behaves as
/// on an SPD system.
pub fn solve_spd_projected(
    op: &SparseOperator,
    rhs: &[f64],
    cfg: &SolveConfig,
    nullspace: &[Vec<f64>],
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    check_square(op, rhs)?;
    let n = rhs.len();
    let basis = orthonormalize(nullspace);
    let project = |v: &mut [f64]| {
        for z in &basis {
            let c = dot(z, v);
            axpy(-c, z, v);
        }
    };

    let mut b = rhs.to_vec();
    project(&mut b);
    let bnorm = norm2(&b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            history: vec![],
            min_ritz: None,
        });
    }

    let inv_diag: Vec<f64> = match cfg.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Diagonal => op
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
    };
    let scale = op.max_abs().max(f64::MIN_POSITIVE);

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, m)| a * m).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut best = (f64::INFINITY, x.clone());

    for it in 0..cfg.max_iterations {
        op.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        let pp = dot(&p, &p);
        if curvature < -1e-12 * scale * pp {
            return Err(SolveError::Indefinite {
                direction: it,
                curvature: curvature / pp,
            });
        }
        if curvature <= 1e-13 * scale * pp {
            return Err(SolveError::Singular { direction: it });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        alphas.push(alpha);
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= cfg.tolerance {
            // Confirm with the true residual; recursive residuals drift.
            let mut true_r = b.clone();
            axpy(-1.0, &op.mul_vec(&x), &mut true_r);
            project(&mut true_r);
            let true_rel = norm2(&true_r) / bnorm;
            if true_rel <= cfg.tolerance {
                project(&mut x);
                return Ok(SolveReport {
                    x,
                    iterations: it + 1,
                    residual: true_rel,
                    min_ritz: lanczos_min_ritz(&alphas, &betas),
                    history,
                });
            }
            r = true_r;
        }
        for ((zi, ri), m) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * m;
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(SolveError::NotConverged {
        iterations: cfg.max_iterations,
        residual: best.0,
        best: best.1,
        history,
    })
}

/// Smallest eigenvalue of the Lanczos tridiagonal implied by the CG
/// coefficients.
fn lanczos_min_ritz(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let k = alphas.len();
    if k == 0 || k > 1500 {
        return None;
    }
    let mut t = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut d = 1.0 / alphas[j];
        if j > 0 {
            d += betas[j - 1] / alphas[j - 1];
        }
        t[(j, j)] = d;
        if j + 1 < k && j < betas.len() {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::new(t);
    eig.eigenvalues.iter().copied().reduce(f64::min)
}

fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
        let nrm = norm2(&w);
        if nrm > 1e-12 * norm2(v).max(f64::MIN_POSITIVE) {
            w.iter_mut().for_each(|x| *x /= nrm);
            out.push(w);
        }
    }
    out
}

/// Preconditioned MINRES for symmetric (possibly indefinite) operators.
///
/// The preconditioner is the diagonal `|a_ii|` (1 on zero diagonal entries)
/// when `cfg.preconditioner` is `Diagonal`.
pub fn minres(op: &SparseOperator, rhs: &[f64], cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    check_square(op, rhs)?;
    let n = rhs.len();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            history: vec![],
            min_ritz: None,
        });
    }
    let minv: Vec<f64> = match cfg.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Diagonal => op
            .diagonal()
            .iter()
            .map(|d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
            .collect(),
    };
    let apply_m = |v: &[f64]| -> Vec<f64> { v.iter().zip(&minv).map(|(a, m)| a * m).collect() };

    let mut x = vec![0.0; n];
    let mut r1 = rhs.to_vec();
    let mut y = apply_m(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, x.clone());

    for itn in 1..=cfg.max_iterations {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = op.mul_vec(&v);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = apply_m(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);

        let est = phibar / beta1;
        history.push(est);
        if est <= cfg.tolerance || beta == 0.0 {
            let mut r = rhs.to_vec();
            axpy(-1.0, &op.mul_vec(&x), &mut r);
            let rel = norm2(&r) / bnorm;
            if rel < best.0 {
                best = (rel, x.clone());
            }
            if rel <= cfg.tolerance {
                return Ok(SolveReport {
                    x,
                    iterations: itn,
                    residual: rel,
                    history,
                    min_ritz: None,
                });
            }
            if beta == 0.0 {
                break;
            }
        }
    }
    if best.0.is_infinite() {
        let mut r = rhs.to_vec();
        axpy(-1.0, &op.mul_vec(&x), &mut r);
        best = (norm2(&r) / bnorm, x);
    }
    Err(SolveError::NotConverged {
        iterations: history.len(),
        residual: best.0,
        best: best.1,
        history,
    })
}

/// `[[K, Bᵀ], [B, 0]]` with an optional pressure gauge row.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub k: SparseOperator,
    pub b: SparseOperator,
    /// Each entry adds one multiplier enforcing `gᵀ p = 0`.
    pub gauges: Vec<Vec<f64>>,
}

impl SaddleSystem {
    pub fn new(k: SparseOperator, b: SparseOperator) -> Self {
        Self { k, b, gauges: vec![] }
    }

    pub fn with_gauge(mut self, weights: Vec<f64>) -> Self {
        self.gauges.push(weights);
        self
    }

    pub fn n_primal(&self) -> usize {
        self.k.n_rows()
    }

    pub fn n_multipliers(&self) -> usize {
        self.b.n_rows()
    }

    pub fn dimension(&self) -> usize {
        self.n_primal() + self.n_multipliers() + self.gauges.len()
    }

    /// The full symmetric indefinite operator.
    pub fn assemble(&self) -> SparseOperator {
        let base = block_saddle(&self.k, &self.b, None);
        if self.gauges.is_empty() {
            return base;
        }
        let n = self.n_primal();
        let m = self.n_multipliers();
        let dim = self.dimension();
        let mut t = TripletBuilder::with_capacity(dim, dim, base.nnz() + 2 * m * self.gauges.len());
        t.extend_shifted(&base.to_triplets(), 0, 0);
        for (g, weights) in self.gauges.iter().enumerate() {
            assert_eq!(weights.len(), m, "gauge length must match multiplier count");
            for (j, &wj) in weights.iter().enumerate() {
                t.push(n + m + g, n + j, wj);
                t.push(n + j, n + m + g, wj);
            }
        }
        t.build()
    }

    /// Extends `(f, g)` with zeros for the gauge rows.
    pub fn full_rhs(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let mut rhs = Vec::with_capacity(self.dimension());
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        rhs.resize(self.dimension(), 0.0);
        rhs
    }

    /// Splits a full solution into `(primal, multipliers)`.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_primal();
        let m = self.n_multipliers();
        (x[..n].to_vec(), x[n..n + m].to_vec())
    }
}

/// Solves a saddle-point system; the returned vector covers primal,
/// multiplier and gauge unknowns.
pub fn solve_saddle(sys: &SaddleSystem, rhs: &[f64], cfg: &SolveConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    if rhs.len() != sys.dimension() {
        return Err(SolveError::DimensionMismatch(format!(
            "saddle system {} vs rhs {}",
            sys.dimension(),
            rhs.len()
        )));
    }
    let op = sys.assemble();
    match cfg.saddle_method {
        SaddleMethod::Minres => minres(&op, rhs, cfg),
        _ => {
            let factor = DirectSolver::factor(&op, cfg)?;
            Ok(factor.solve_refined(&op, rhs))
        }
    }
}

/// A reusable direct factorization of a square operator.
#[derive(Debug, Clone)]
pub enum DirectSolver {
    Dense(DenseLu),
    Banded(BandedLu),
}

impl DirectSolver {
    pub fn factor(op: &SparseOperator, cfg: &SolveConfig) -> Result<Self, SolveError> {
        let n = op.n_rows();
        let use_dense = match cfg.saddle_method {
            SaddleMethod::Dense => true,
            SaddleMethod::Banded => false,
            SaddleMethod::Auto | SaddleMethod::Minres => n <= cfg.dense_threshold,
        };
        if use_dense {
            Ok(DirectSolver::Dense(dense_lu(&op.to_dense(), DEFAULT_DENSE_CAP.max(n))?))
        } else {
            Ok(DirectSolver::Banded(BandedLu::factor(op)?))
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            DirectSolver::Dense(lu) => lu.solve(rhs),
            DirectSolver::Banded(lu) => lu.solve(rhs),
        }
    }

    /// Solve plus one step of iterative refinement against `op`.
    pub fn solve_refined(&self, op: &SparseOperator, rhs: &[f64]) -> SolveReport {
        let mut x = self.solve(rhs);
        let bnorm = norm2(rhs);
        let residual = |x: &[f64]| {
            let mut r = rhs.to_vec();
            axpy(-1.0, &op.mul_vec(x), &mut r);
            r
        };
        let r = residual(&x);
        let dx = self.solve(&r);
        axpy(1.0, &dx, &mut x);
        let rel = if bnorm > 0.0 { norm2(&residual(&x)) / bnorm } else { 0.0 };
        SolveReport {
            x,
            iterations: 1,
            residual: rel,
            history: vec![rel],
            min_ritz: None,
        }
    }
}

/// Direct factorization after a symmetric permutation that sorts unknowns
/// by a scalar key (typically the x coordinate), which keeps slice systems
/// narrow-banded.
#[derive(Debug, Clone)]
pub struct OrderedSolver {
    /// `perm[new] = old`
    perm: Vec<usize>,
    op: SparseOperator,
    solver: DirectSolver,
}

impl OrderedSolver {
    pub fn factor(op: &SparseOperator, keys: &[f64], cfg: &SolveConfig) -> Result<Self, SolveError> {
        let n = op.n_rows();
        if keys.len() != n || op.n_cols() != n {
            return Err(SolveError::DimensionMismatch(format!(
                "operator {}x{}, {} ordering keys",
                n,
                op.n_cols(),
                keys.len()
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut t = TripletBuilder::with_capacity(n, n, op.nnz());
        for i in 0..n {
            for (j, v) in op.row(i) {
                t.push(inv[i], inv[j], v);
            }
        }
        let permuted = t.build();
        let solver = DirectSolver::factor(&permuted, cfg)?;
        Ok(Self {
            perm,
            op: op.clone(),
            solver,
        })
    }

    pub fn dimension(&self) -> usize {
        self.perm.len()
    }

    pub fn solver(&self) -> &DirectSolver {
        &self.solver
    }

    fn solve_once(&self, rhs: &[f64]) -> Vec<f64> {
        let b: Vec<f64> = self.perm.iter().map(|&o| rhs[o]).collect();
        let y = self.solver.solve(&b);
        let mut x = vec![0.0; y.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve plus one step of iterative refinement; reports the relative
    /// residual against the unpermuted operator.
    pub fn solve(&self, rhs: &[f64]) -> SolveReport {
        let mut x = self.solve_once(rhs);
        let residual = |x: &[f64]| {
            let mut r = rhs.to_vec();
            axpy(-1.0, &self.op.mul_vec(x), &mut r);
            r
        };
        let dx = self.solve_once(&residual(&x));
        axpy(1.0, &dx, &mut x);
        let bnorm = norm2(rhs);
        let rel = if bnorm > 0.0 { norm2(&residual(&x)) / bnorm } else { 0.0 };
        SolveReport {
            x,
            iterations: 1,
            residual: rel,
            history: vec![rel],
            min_ritz: None,
        }
    }
}

/// Smallest eigenvalue of a small dense symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn residual_norm(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = DVector::from_vec(op.mul_vec(x));
    (DVector::from_column_slice(rhs) - ax).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::dense::dense_oracle_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let op = SparseOperator::identity(4);
        let rep = solve_spd(&op, &[0.0; 4], &SolveConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.x, vec![0.0; 4]);
    }

    #[test]
    fn ordered_solver_matches_dense() {
        let n = 40;
        let a = random_spd(n, 7);
        let op = SparseOperator::from_dense(&a);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let keys: Vec<f64> = (0..n).map(|i| ((i * 17) % n) as f64).collect();
        let cfg = SolveConfig {
            saddle_method: SaddleMethod::Banded,
            ..Default::default()
        };
        let rep = OrderedSolver::factor(&op, &keys, &cfg).unwrap().solve(&rhs);
        let x = dense_oracle_solve(&op, &rhs, 100).unwrap();
        for (p, q) in rep.x.iter().zip(&x) {
            assert!((p - q).abs() < 1e-10 * (1.0 + q.abs()));
        }
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn diagonal_two_by_two() {
        let op = SparseOperator::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        let cfg = SolveConfig {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let rep = solve_spd(&op, &[2.0, 1.0], &cfg).unwrap();
        assert!((rep.x[0] - 1.0).abs() < 1e-12 && (rep.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_dense_oracle_on_random_spd() {
        let m = random_spd(50, 7);
        let op = SparseOperator::from_dense(&m);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let cfg = SolveConfig::default().with_tolerance(1e-13);
        let rep = solve_spd(&op, &b, &cfg).unwrap();
        let oracle = dense_oracle_solve(&op, &b, 5000).unwrap();
        let err = rep.x.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max deviation {err}");
        assert!(rep.min_ritz.unwrap() > 0.0);
    }

    #[test]
    fn indefinite_operator_is_reported() {
        let op = SparseOperator::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        let cfg = SolveConfig {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        match solve_spd(&op, &[0.0, 1.0], &cfg) {
            Err(SolveError::Indefinite { direction, .. }) => assert_eq!(direction, 0),
            other => panic!("expected indefiniteness, got {other:?}"),
        }
    }

    #[test]
    fn nonconvergence_carries_history() {
        let m = random_spd(30, 3);
        let op = SparseOperator::from_dense(&m);
        let cfg = SolveConfig {
            max_iterations: 2,
            ..Default::default()
        };
        match solve_spd(&op, &vec![1.0; 30], &cfg) {
            Err(SolveError::NotConverged { history, best, .. }) => {
                assert_eq!(history.len(), 2);
                assert_eq!(best.len(), 30);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kkt_three_by_three() {
        // K = I, B = [1 1], rhs = ((0, 0), 1): x = (0.5, 0.5), multiplier -0.5
        // with the [[K, Bᵀ], [B, 0]] sign convention.
        let sys = SaddleSystem::new(
            SparseOperator::identity(2),
            SparseOperator::from_dense(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])),
        );
        for method in [SaddleMethod::Dense, SaddleMethod::Banded, SaddleMethod::Minres] {
            let cfg = SolveConfig {
                saddle_method: method,
                ..Default::default()
            };
            let rep = solve_saddle(&sys, &[0.0, 0.0, 1.0], &cfg).unwrap();
            assert!((rep.x[0] - 0.5).abs() < 1e-10, "{method:?}");
            assert!((rep.x[1] - 0.5).abs() < 1e-10);
            assert!((rep.x[2] + 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn saddle_zero_rhs_gives_zero() {
        let sys = SaddleSystem::new(
            SparseOperator::identity(2),
            SparseOperator::from_dense(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0])),
        );
        let rep = solve_saddle(&sys, &[0.0; 3], &SolveConfig::default()).unwrap();
        assert!(rep.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_gauge_is_rank_deficient() {
        let sys = SaddleSystem::new(
            SparseOperator::identity(2),
            SparseOperator::from_dense(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])),
        )
        .with_gauge(vec![1.0])
        .with_gauge(vec![1.0]);
        for method in [SaddleMethod::Dense, SaddleMethod::Banded] {
            let cfg = SolveConfig {
                saddle_method: method,
                ..Default::default()
            };
            assert!(matches!(
                solve_saddle(&sys, &[0.0, 0.0, 1.0, 0.0, 0.0], &cfg),
                Err(SolveError::RankDeficient { .. })
            ));
        }
    }

    #[test]
    fn minres_solves_random_symmetric_indefinite() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_spd(n, 5);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = if i % 3 == 0 { -1.0 - rng.gen::<f64>() } else { 1.0 + rng.gen::<f64>() };
        }
        let a = q.transpose() * d * &q;
        let op = SparseOperator::from_dense(&a);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let rep = minres(&op, &b, &SolveConfig::default().with_tolerance(1e-11)).unwrap();
        let oracle = dense_oracle_solve(&op, &b, 5000).unwrap();
        let err = rep.x.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default().with_tolerance(1.5).validate().is_err());
        assert!(SolveConfig {
            max_iterations: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
