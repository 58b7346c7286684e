//! Time-sup L² norms of the micro solution with the ε-weights of the a
//! priori bounds.

use serde::Serialize;

use super::mesh::Region;
use super::system::{MicroState, MicroSystem};

/// Spatial L² norms of one state, unscaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StateNorms {
    pub v_plus: f64,
    pub dv_plus: f64,
    pub p_plus: f64,
    pub v_minus: f64,
    pub dv_minus: f64,
    pub p_minus: f64,
    pub v_layer: f64,
    pub dv_layer: f64,
    pub p_layer: f64,
    pub solid_velocity: f64,
    pub u_inplane: f64,
    pub u_vertical: f64,
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub epsilon: f64,
    /// `(name, sup_t of the ε-weighted norm)`
    pub scaled: Vec<(String, f64)>,
    /// `sup_t ‖D(u_ε)‖`, unweighted.
    pub strain_unscaled: f64,
}

fn sym(g: &[[f64; 2]; 2]) -> f64 {
    let off = 0.5 * (g[0][1] + g[1][0]);
    g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off
}

impl MicroSystem {
    pub fn state_norms(&self, s: &MicroState) -> StateNorms {
        let g = &self.mesh.grid;
        let v = self.velocity(s);
        let u = self.displacement(s);
        let pp = self.pressure(s, Region::BulkPlus);
        let pm = self.pressure(s, Region::BulkMinus);
        let pl = self.pressure(s, Region::LayerFluid);
        let mut acc = StateNorms::default();
        for ex in 0..g.nx() {
            for ez in 0..g.nz() {
                let region = self.mesh.region(ex, ez);
                let el = g.vbox(ex, ez);
                let pb = g.pbox(ex, ez);
                let vn = g.element_vnodes(ex, ez);
                let pn = g.element_pnodes(ex, ez);
                for q in el.quadrature(3) {
                    let field = |f: &[f64]| {
                        let mut val = [0.0; 2];
                        let mut grad = [[0.0; 2]; 2];
                        for (a, &n) in vn.iter().enumerate() {
                            for c in 0..2 {
                                val[c] += q.values[a] * f[2 * n + c];
                                for k in 0..2 {
                                    grad[c][k] += q.grads[a][k] * f[2 * n + c];
                                }
                            }
                        }
                        (val, grad)
                    };
                    let (vv, vg) = field(&v);
                    let v2 = vv[0] * vv[0] + vv[1] * vv[1];
                    let w = q.weight;
                    let pressure = |p: &[f64]| {
                        let (vals, _) = pb.eval(&q.reference);
                        pn.iter().zip(&vals).map(|(&n, b)| b * p[n]).sum::<f64>()
                    };
                    match region {
                        Region::BulkPlus => {
                            acc.v_plus += w * v2;
                            acc.dv_plus += w * sym(&vg);
                            acc.p_plus += w * pressure(&pp).powi(2);
                        }
                        Region::BulkMinus => {
                            acc.v_minus += w * v2;
                            acc.dv_minus += w * sym(&vg);
                            acc.p_minus += w * pressure(&pm).powi(2);
                        }
                        Region::LayerFluid => {
                            acc.v_layer += w * v2;
                            acc.dv_layer += w * sym(&vg);
                            acc.p_layer += w * pressure(&pl).powi(2);
                        }
                        Region::LayerSolid => {
                            let (uu, ug) = field(&u);
                            acc.solid_velocity += w * v2;
                            acc.u_inplane += w * uu[0] * uu[0];
                            acc.u_vertical += w * uu[1] * uu[1];
                            acc.du += w * sym(&ug);
                        }
                    }
                }
            }
        }
        StateNorms {
            v_plus: acc.v_plus.sqrt(),
            dv_plus: acc.dv_plus.sqrt(),
            p_plus: acc.p_plus.sqrt(),
            v_minus: acc.v_minus.sqrt(),
            dv_minus: acc.dv_minus.sqrt(),
            p_minus: acc.p_minus.sqrt(),
            v_layer: acc.v_layer.sqrt(),
            dv_layer: acc.dv_layer.sqrt(),
            p_layer: acc.p_layer.sqrt(),
            solid_velocity: acc.solid_velocity.sqrt(),
            u_inplane: acc.u_inplane.sqrt(),
            u_vertical: acc.u_vertical.sqrt(),
            du: acc.du.sqrt(),
        }
    }
}

/// Sup over the stored states of each weighted norm.
pub fn apriori_report(sys: &MicroSystem, states: &[MicroState]) -> AprioriReport {
    let eps = sys.mesh.epsilon;
    let (h, t) = (eps.powf(-0.5), eps.powf(-1.5));
    let weighted = |n: &StateNorms| -> Vec<(&'static str, f64)> {
        vec![
            ("v_plus", n.v_plus),
            ("dv_plus", n.dv_plus),
            ("p_plus", n.p_plus),
            ("v_minus", n.v_minus),
            ("dv_minus", n.dv_minus),
            ("p_minus", n.p_minus),
            ("v_layer", h * n.v_layer),
            ("dv_layer", h * n.dv_layer),
            ("p_layer", h * n.p_layer),
            ("solid_velocity", h * n.solid_velocity),
            ("u_inplane", t * n.u_inplane),
            ("strain", t * n.du),
        ]
    };
    let mut sup: Vec<(String, f64)> = weighted(&StateNorms::default())
        .into_iter()
        .map(|(k, _)| (k.to_string(), 0.0))
        .collect();
    let mut strain = 0.0f64;
    for s in states {
        let n = sys.state_norms(s);
        for (slot, (_, v)) in sup.iter_mut().zip(weighted(&n)) {
            slot.1 = slot.1.max(v);
        }
        strain = strain.max(n.du);
    }
    AprioriReport {
        epsilon: eps,
        scaled: sup,
        strain_unscaled: strain,
    }
}
