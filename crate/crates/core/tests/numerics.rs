mod common;

use common::*;

#[test]
fn matrix_exponential_matches_scaling_and_squaring() {
    let e = expm_error();
    assert!(e < 1e-10, "relative error {e:e}");
}

#[test]
fn double_integrator_sets_match_closed_form() {
    let e = lti_error();
    assert!(e < 1e-8, "bound error {e:e}");
}

#[test]
fn delay_step_response_matches_transfer_function() {
    let e = pade_error();
    assert!(e < 1e-9, "response error {e:e}");
}

#[test]
fn constrained_hull_matches_vertex_images() {
    let e = cz_hull_error();
    assert!(e < 1e-6, "hull error {e:e}");
}

#[test]
fn lp_matches_vertex_enumeration() {
    let e = lp_error();
    assert!(e < 1e-7, "optimum error {e:e}");
}

#[test]
fn oracle_vertices_of_a_square_slice() {
    // x + y = 0 over [−1, 1]²: the two corners of the anti-diagonal.
    use nalgebra::{DMatrix, DVector};
    let v = box_polytope_vertices(
        &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        &DVector::zeros(1),
        &DVector::from_element(2, -1.0),
        &DVector::from_element(2, 1.0),
    );
    let mut pts: Vec<(i64, i64)> = v.iter().map(|x| (x[0].round() as i64, x[1].round() as i64)).collect();
    pts.sort();
    pts.dedup();
    assert_eq!(pts, vec![(-1, 1), (1, -1)]);
}
