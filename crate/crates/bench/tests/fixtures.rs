use lamina_bench::{full_solid_cell, macro_system, micro_system, notched_tensors};

#[test]
fn fixtures_build() {
    assert_eq!(full_solid_cell(2).mesh.dim, 3);
    let (a, b, c) = notched_tensors().slice_coefficients();
    assert!(a > 0.0 && c > 0.0 && b.abs() < 1e-10);
    assert!(micro_system(2).step_matrix.is_some());
    let m = macro_system(8);
    let (s1, _) = m.advance(&m.zero_state()).unwrap();
    assert!(s1.x.iter().any(|&v| v != 0.0));
}
