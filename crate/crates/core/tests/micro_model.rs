mod common;

use common::*;
use lamina_core::forcing::{ScalarField, VectorField};
use lamina_core::micro::{apriori_report, run_micro, MicroConfig, MicroRun};
use proptest::prelude::*;

fn small(k: usize) -> MicroConfig {
    let mut cfg = MicroConfig::new(k, notched_layer(), 1.0, 1.0, 2).unwrap();
    cfg.dt = 0.05;
    cfg.t_final = 0.15;
    cfg
}

fn last(run: &MicroRun) -> Vec<f64> {
    let s = run.states.last().unwrap();
    s.x.iter().chain(&s.u).copied().collect()
}

#[test]
fn superposition_of_bulk_and_layer_loads() {
    let mut a = small(2);
    a.layer_load = expr("sin(pi * x)");
    let mut b = small(2);
    b.f_plus = VectorField([ScalarField::Zero, expr("-t * x")]);
    let mut ab = a.clone();
    ab.f_plus = b.f_plus.clone();
    let (ra, rb, rab) = (run_micro(&a).unwrap(), run_micro(&b).unwrap(), run_micro(&ab).unwrap());
    let sum: Vec<f64> = last(&ra).iter().zip(last(&rb)).map(|(p, q)| p + q).collect();
    assert!(max_diff(&sum, &last(&rab)) < 1e-9 * max_abs(&sum));
}

#[test]
fn apriori_report_scales_with_the_data() {
    let mut cfg = small(2);
    cfg.layer_load = ScalarField::Constant(1.0);
    let run = run_micro(&cfg).unwrap();
    let r1 = apriori_report(&run.system, &run.states);
    cfg.layer_load = ScalarField::Constant(3.0);
    let run = run_micro(&cfg).unwrap();
    let r3 = apriori_report(&run.system, &run.states);
    for ((name, x), (_, y)) in r1.scaled.iter().zip(&r3.scaled) {
        assert!((3.0 * x - y).abs() <= 1e-9 * y.abs().max(1e-300), "{name}");
    }
    assert!(r1.scaled.iter().any(|(_, v)| *v > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn evolution_is_linear_in_the_load(s in -4.0f64..4.0) {
        let mut cfg = small(2);
        cfg.layer_load = ScalarField::Constant(1.0);
        let a = last(&run_micro(&cfg).unwrap());
        cfg.layer_load = ScalarField::Constant(s);
        let b = last(&run_micro(&cfg).unwrap());
        let tol = 1e-9 * max_abs(&a) * s.abs().max(1.0);
        prop_assert!(a.iter().zip(&b).all(|(p, q)| (s * p - q).abs() <= tol));
    }

    #[test]
    fn energy_never_grows_without_forcing(amp in 0.1f64..3.0, dt in 0.01f64..0.1, k in 2usize..4) {
        let mut cfg = small(k);
        cfg.dt = dt;
        cfg.t_final = 8.0 * dt;
        let s = swirl();
        cfg.v0_plus = VectorField([s.0[0].scaled(amp).unwrap(), s.0[1].scaled(amp).unwrap()]);
        let run = run_micro(&cfg).unwrap();
        prop_assert!(run.series[0].energy > 0.0);
        for w in run.series.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy * (1.0 + 1e-10));
        }
        prop_assert!(run.series.iter().all(|r| r.divergence < 1e-9));
    }
}
