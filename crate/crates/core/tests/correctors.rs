mod common;

use common::*;
use lamina_core::cell::{CellLoadCase, LoadKind};
use lamina_core::correctors::{
    compare_fields, first_orders, first_orders_rate, layer_fluid_velocity, reconstruct_u2, sample_points,
    CellCorrectors, PlateSample, Reconstruction, QUANTITIES,
};
use lamina_core::macro_fsi::{run_macro, MacroRun, MacroSystem};
use lamina_core::micro::{run_micro, MicroConfig, MicroRun, Region};
use lamina_core::tensors::compute_tensors;
use lamina_core::Error;
use proptest::prelude::*;

fn correctors() -> CellCorrectors {
    let op = cell_op(&notched_layer());
    let sols = op.solve_all(&tight(), 2).unwrap();
    CellCorrectors::new(op, sols).unwrap()
}

fn micro(k: usize) -> MicroConfig {
    let mut cfg = MicroConfig::new(k, notched_layer(), 1.0, 1.0, 2).unwrap();
    cfg.dt = 0.05;
    cfg.t_final = 0.2;
    cfg.layer_load = expr("t * sin(pi * x)");
    cfg
}

fn pair(k: usize, cor: &CellCorrectors) -> (MicroRun, MacroSystem, MacroRun) {
    let cfg = micro(k);
    let t = compute_tensors(&cor.op, &cor.solutions).unwrap();
    let mcfg = cfg.macro_config(t, 8, 16).unwrap();
    (run_micro(&cfg).unwrap(), MacroSystem::operators(&mcfg).unwrap(), run_macro(&mcfg).unwrap())
}

#[test]
fn fluid_velocity_is_the_rate_of_the_displacement_orders_at_every_sample() {
    let cor = correctors();
    let (run, sys, mrun) = pair(2, &cor);
    let eps = 0.5;
    let rec = Reconstruction::new(&sys, &mrun, Some(&cor), eps);
    let pts: Vec<_> = sample_points(&run.system.mesh).into_iter().filter(|p| p.region.is_layer()).collect();
    let dt = sys.cfg.dt;
    let mut checked = 0;
    for n in 1..mrun.states.len() {
        for pt in &pts {
            let (s, prev) = (rec.plate(n, pt.x), rec.plate(n - 1, pt.x));
            let v = layer_fluid_velocity(eps, pt.z, &s);
            let r = first_orders_rate(eps, pt.z, &s);
            assert!((v[0] - r[0]).abs() <= 1e-14 && (v[1] - r[1]).abs() <= 1e-14);
            // against the backward difference of the stored displacements
            let (a, b) = (
                first_orders(eps, pt.z, s.p.ut, s.p.u_x, s.p.u),
                first_orders(eps, pt.z, prev.p.ut, prev.p.u_x, prev.p.u),
            );
            let scale = a[0].abs().max(a[1].abs()) / dt + v[0].abs().max(v[1].abs());
            for c in 0..2 {
                assert!(((a[c] - b[c]) / dt - v[c]).abs() <= 1e-10 * scale, "n={n} {pt:?}");
            }
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn u2_for_a_unit_membrane_strain_is_the_standard_corrector() {
    let cor = correctors();
    let z = [[0.0; 2]; 2];
    let chi = &cor.solution(&CellLoadCase::new(0, 0, LoadKind::Standard)).unwrap().displacement;
    assert_eq!(&reconstruct_u2(&cor, &[[1.0, 0.0], [0.0, 0.0]], &z).unwrap(), chi);
    let chib = &cor.solution(&CellLoadCase::new(0, 0, LoadKind::Bending)).unwrap().displacement;
    assert_eq!(&reconstruct_u2(&cor, &z, &[[1.0, 0.0], [0.0, 0.0]]).unwrap(), chib);
}

#[test]
fn self_comparison_is_exactly_zero() {
    let cor = correctors();
    let (run, sys, mrun) = pair(2, &cor);
    let pts = sample_points(&run.system.mesh);
    let rows = compare_fields(&run, &run, &pts).unwrap();
    assert_eq!(rows.len(), QUANTITIES.len());
    assert!(rows.iter().all(|r| r.value == 0.0), "{rows:?}");
    let rec = Reconstruction::new(&sys, &mrun, Some(&cor), 0.5);
    assert!(compare_fields(&rec, &rec, &pts).unwrap().iter().all(|r| r.value == 0.0));
    let nonzero = compare_fields(&run, &rec, &pts).unwrap();
    assert!(nonzero.iter().filter(|r| r.quantity != "bulk_velocity_minus").all(|r| r.value > 0.0));
}

#[test]
fn comparison_refuses_mismatched_epsilon() {
    let cor = correctors();
    let (run, sys, mrun) = pair(2, &cor);
    let rec = Reconstruction::new(&sys, &mrun, Some(&cor), 0.25);
    let err = compare_fields(&run, &rec, &sample_points(&run.system.mesh)).unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)));
}

#[test]
fn sample_weights_integrate_the_regions() {
    let run = run_micro(&{
        let mut c = micro(4);
        c.t_final = 0.0;
        c
    })
    .unwrap();
    let pts = sample_points(&run.system.mesh);
    let vol = |r: Region| pts.iter().filter(|p| p.region == r).map(|p| p.weight).sum::<f64>();
    let eps = 0.25;
    assert!((vol(Region::BulkPlus) - 1.0).abs() < 1e-12);
    assert!((vol(Region::BulkMinus) - 1.0).abs() < 1e-12);
    // the notched cell is 12 of 32 voxels solid on a (0,1)x(-1,1) cell
    let cell = eps * eps * 2.0;
    assert!((vol(Region::LayerSolid) - 4.0 * cell * 12.0 / 32.0).abs() < 1e-12);
    assert!((vol(Region::LayerFluid) - 4.0 * cell * 20.0 / 32.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn fluid_velocity_identity_holds_for_any_plate_state(
        vals in proptest::collection::vec(-10.0f64..10.0, 8),
        k in 1u32..7,
        y3 in -1.0f64..1.0,
    ) {
        let eps = 0.5f64.powi(k as i32);
        let mut s = PlateSample::default();
        s.p.u = vals[0];
        s.p.u_x = vals[1];
        s.p.u_xx = vals[2];
        s.p.w = vals[3];
        s.p.w_x = vals[4];
        s.p.ut = vals[5];
        s.p.ut_x = vals[6];
        s.dut = vals[7];
        let (a, b) = (layer_fluid_velocity(eps, y3 * eps, &s), first_orders_rate(eps, y3 * eps, &s));
        prop_assert!((a[0] - b[0]).abs() <= 1e-14 * (1.0 + a[0].abs()));
        prop_assert!((a[1] - b[1]).abs() <= 1e-14 * (1.0 + a[1].abs()));
    }

    #[test]
    fn u2_is_linear(d1 in -5.0f64..5.0, h1 in -5.0f64..5.0, d2 in -5.0f64..5.0, h2 in -5.0f64..5.0, s in -3.0f64..3.0) {
        let cor = correctors();
        let m = |v: f64| [[v, 0.0], [0.0, 0.0]];
        let a = reconstruct_u2(&cor, &m(d1), &m(h1)).unwrap();
        let b = reconstruct_u2(&cor, &m(d2), &m(h2)).unwrap();
        let c = reconstruct_u2(&cor, &m(d1 + s * d2), &m(h1 + s * h2)).unwrap();
        let scale = 1.0 + max_abs(&a) + s.abs() * max_abs(&b);
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            prop_assert!((x + s * y - z).abs() <= 1e-13 * scale);
        }
    }
}
