mod common;

use common::{small_zoo, xy};
use floquet_kato::drives::{xy_bloch, xy_exact_propagator};
use floquet_kato::numkernel::{dagger, max_diff, mul, singular_values, unitarity_defect};
use floquet_kato::propagator::{monodromy, propagate, refinement_error};
use proptest::prelude::*;

#[test]
fn fourth_order_convergence_on_smooth_drive() {
    // the Gauss-node Magnus step is fourth order: halving the step cuts the error ~16x
    let d = xy_bloch(&xy(0.5, 0.4)).unwrap();
    let e1 = refinement_error(&d, 0.0, 8).unwrap();
    let e2 = refinement_error(&d, 0.0, 16).unwrap();
    let e3 = refinement_error(&d, 0.0, 32).unwrap();
    assert!(e1 / e2 > 10.0 && e2 / e3 > 10.0, "{e1:e} {e2:e} {e3:e}");
}

#[test]
fn kicked_drives_are_exact_at_one_step() {
    let d = &small_zoo()[1];
    let a = monodromy(d, 0.0, 1).unwrap();
    let b = monodromy(d, 0.0, 64).unwrap();
    assert!(max_diff(a.as_ref(), b.as_ref()) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn xy_monodromy_matches_closed_form(k in -3.0f64..3.0, j in 0.1f64..8.0) {
        let p = xy(j, k);
        let d = xy_bloch(&p).unwrap();
        let u = monodromy(&d, 0.0, 256).unwrap();
        let exact = xy_exact_propagator(&p, d.period()).unwrap();
        prop_assert!(max_diff(u.as_ref(), exact.as_ref()) < 1e-9);
    }

    #[test]
    fn determinant_has_unit_modulus(t1 in 0.05f64..3.0) {
        for d in small_zoo() {
            let u = propagate(&d, 0.0, t1, 64).unwrap();
            let det: f64 = singular_values(u.as_ref()).unwrap().iter().product();
            prop_assert!((det - 1.0).abs() < 1e-10, "{}", d.name());
            prop_assert!(unitarity_defect(u.as_ref()) < 1e-10);
        }
    }

    #[test]
    fn floquet_gauge_covariance(frac in 0.0f64..1.0) {
        for d in small_zoo() {
            let t0 = frac * d.period();
            let shifted = monodromy(&d, t0, 256).unwrap();
            let u0 = propagate(&d, 0.0, t0, 256).unwrap();
            let ut = monodromy(&d, 0.0, 256).unwrap();
            let b = mul(mul(u0.as_ref(), ut.as_ref()).as_ref(), dagger(u0.as_ref()).as_ref());
            prop_assert!(max_diff(shifted.as_ref(), b.as_ref()) < 1e-8, "{}", d.name());
        }
    }
}
