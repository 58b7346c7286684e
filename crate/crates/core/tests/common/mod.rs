#![allow(dead_code)]

use lamina_core::cell::{CellOperator, CellSolution};
use lamina_core::fem::dense::dense_matrix_solve;
use lamina_core::fem::elasticity::Lame;
use lamina_core::fem::solve::SolveConfig;
use lamina_core::forcing::{Expr, ScalarField, VectorField};
use lamina_core::geometry::{build_cell_mesh, validate_geometry, Material, MicrostructureSpec};

pub fn expr(s: &str) -> ScalarField {
    ScalarField::Expression(Expr::compile(s).unwrap())
}

/// Slab `|y₂| < 1/2` with a centered hole cut from both faces.
pub fn notched_layer() -> MicrostructureSpec {
    MicrostructureSpec::from_fn(2, vec![4, 8], Material::Lame(Lame::new(1.0, 1.0)), |y| {
        y[1].abs() < 0.5 && !(y[0] > 0.25 && y[0] < 0.75 && y[1].abs() > 0.25)
    })
    .unwrap()
}

pub fn full_solid_op(res: Vec<usize>, lame: Lame) -> CellOperator {
    let s = MicrostructureSpec::full_solid(res.len(), res, lame).unwrap();
    CellOperator::new(&build_cell_mesh(&s)).unwrap()
}

pub fn cell_op(spec: &MicrostructureSpec) -> CellOperator {
    CellOperator::new(&build_cell_mesh(spec)).unwrap()
}

pub fn tight() -> SolveConfig {
    SolveConfig::default().with_tolerance(1e-12)
}

/// First `count` seeds from `start` whose random layer passes validation.
pub fn valid_random_layers(dim: usize, res: &[usize], start: u64, count: usize) -> Vec<(u64, MicrostructureSpec)> {
    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < count {
        if let Ok(s) = MicrostructureSpec::random_layer(dim, res.to_vec(), seed) {
            if validate_geometry(&build_cell_mesh(&s)).is_ok() {
                out.push((seed, s));
            }
        }
        seed += 1;
        assert!(seed < start + 1000, "no valid random layers near seed {start}");
    }
    out
}

/// Stream function sin²(πx) sin²(πz) on the unit square.
pub fn swirl() -> VectorField {
    VectorField([
        expr("2 * pi * pow(sin(pi * x), 2) * sin(pi * z) * cos(pi * z)"),
        expr("-2 * pi * sin(pi * x) * cos(pi * x) * pow(sin(pi * z), 2)"),
    ])
}

/// Dense solve of the reduced cell system with the translation kernel
/// pinned by `K + Z Zᵀ`; returns the full mean-zero displacement.
pub fn dense_cell_solution(op: &CellOperator, sol: &CellSolution) -> Vec<f64> {
    let r = &op.reduced;
    let mut k = r.op.to_dense();
    for z in &r.nullspace {
        for i in 0..z.len() {
            for j in 0..z.len() {
                k[(i, j)] += z[i] * z[j];
            }
        }
    }
    let f = r.restrict(&op.assemble_load(&sol.case).unwrap());
    let x = dense_matrix_solve(&k, &f, 5000).unwrap();
    r.expand(&x)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
