//! Fixtures shared by the criterion benches in `benches/`.

use lamina_core::cell::CellOperator;
use lamina_core::fem::elasticity::Lame;
use lamina_core::fem::solve::SolveConfig;
use lamina_core::forcing::{Expr, ScalarField};
use lamina_core::geometry::{build_cell_mesh, Material, MicrostructureSpec};
use lamina_core::macro_fsi::{MacroConfig, MacroSystem};
use lamina_core::micro::{MicroConfig, MicroSystem};
use lamina_core::tensors::{compute_tensors, EffectivePlateTensors};

pub fn notched_layer() -> MicrostructureSpec {
    MicrostructureSpec::from_fn(2, vec![4, 8], Material::Lame(Lame::new(1.0, 1.0)), |y| {
        y[1].abs() < 0.5 && !(y[0] > 0.25 && y[0] < 0.75 && y[1].abs() > 0.25)
    })
    .unwrap()
}

/// Operator of the full-solid cube at `n³`.
pub fn full_solid_cell(n: usize) -> CellOperator {
    let spec = MicrostructureSpec::full_solid(3, vec![n; 3], Lame::new(1.0, 1.0)).unwrap();
    CellOperator::new(&build_cell_mesh(&spec)).unwrap()
}

pub fn notched_tensors() -> EffectivePlateTensors {
    let op = CellOperator::new(&build_cell_mesh(&notched_layer())).unwrap();
    let sols = op.solve_all(&SolveConfig::default(), 1).unwrap();
    compute_tensors(&op, &sols).unwrap()
}

pub fn micro_config(k: usize) -> MicroConfig {
    let mut cfg = MicroConfig::new(k, notched_layer(), 1.0, 1.0, 4).unwrap();
    cfg.dt = 0.02;
    cfg.t_final = 0.02;
    cfg.layer_load = ScalarField::Expression(Expr::compile("t * sin(pi * x)").unwrap());
    cfg
}

pub fn micro_system(k: usize) -> MicroSystem {
    MicroSystem::assemble(&micro_config(k)).unwrap()
}

pub fn macro_system(n_plate: usize) -> MacroSystem {
    let cfg: MacroConfig = micro_config(4).macro_config(notched_tensors(), 16, n_plate).unwrap();
    MacroSystem::assemble(&cfg).unwrap()
}
