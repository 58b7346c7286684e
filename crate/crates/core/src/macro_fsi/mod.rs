//! Effective model on the vertical slice: Stokes in `Ω± = (0,L) × (0,±H)`
//! coupled to a clamped plate on Σ through the velocity trace.

mod config;
mod system;

pub use config::{CoefficientPreset, MacroConfig};
#[allow(unused_imports)]
pub(crate) use config::{get_f64, get_usize, parse_saddle_method, MACRO_KEYS};
pub use system::{
    assemble_macro_system, run_macro, MacroLayout, MacroRun, MacroSeriesRow, MacroState, MacroSystem, PlatePoint,
    StepReport,
};


#[cfg(test)]
mod static_tests {
    use super::*;
    use crate::forcing::ScalarField;
    use crate::tensors::EffectivePlateTensors;

    #[test]
    fn steady_plate_matches_clamped_beam() {
        let (q, c, l) = (1.0, 0.5, 1.0);
        let mut cfg = MacroConfig::new(0.5, l, 8, 2, 128, EffectivePlateTensors::from_scalars(2.0, 0.0, c, 1.0));
        cfg.g = ScalarField::Constant(q);
        cfg.dt = 1.0;
        cfg.t_final = 30.0;
        let run = run_macro(&cfg).unwrap();
        let sys = MacroSystem::operators(&cfg).unwrap();
        let s = run.states.last().unwrap();
        let mut worst = 0.0f64;
        for k in 1..20 {
            let x = l * k as f64 / 20.0;
            let exact = q * x * x * (l - x) * (l - x) / (24.0 * c);
            worst = worst.max((sys.beam.eval_hermite(&s.u, x).0 - exact).abs() / exact);
        }
        assert!(worst < 1e-3);
    }
}
