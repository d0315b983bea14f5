mod common;

use common::{small_zoo, sorted, xy};
use floquet_kato::drives::{tau, xy_bloch, xy_closed_forms, DriveProtocol};
use floquet_kato::floquet::{
    classify_drive, floquet_states_at, micromotion, refold, solve_floquet, FloquetOptions, UnfoldingGauge,
};
use floquet_kato::kato::{kato_decompose, KatoOptions};
use floquet_kato::numkernel::{mul, mul_adj_left, max_diff, scale_real, wrap_phase, HermitianMatrix};
use floquet_kato::propagator::propagate_grid;
use proptest::prelude::*;

fn opts() -> FloquetOptions {
    FloquetOptions::default()
}

#[test]
fn static_drive_is_equilibrium_and_flat() {
    let h = HermitianMatrix::new(scale_real(tau('x').as_ref(), 0.8) + tau('z')).unwrap();
    let d = DriveProtocol::constant("static", h, 1.3).unwrap();
    let sol = solve_floquet(&d, 0.0, &opts()).unwrap();
    let k = kato_decompose(&d, &sol, &KatoOptions::default()).unwrap();
    let f = classify_drive(&d, &sol, &k, 1e-8).unwrap();
    assert!(f.equilibrium && f.flat);
    assert!(!f.pure_micromotion && !f.pure_geometric);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn xy_floquet_phases_match_closed_form(k in -3.0f64..3.0, j in 0.1f64..8.0) {
        let p = xy(j, k);
        let d = xy_bloch(&p).unwrap();
        let sol = solve_floquet(&d, 0.0, &opts()).unwrap();
        let q = xy_closed_forms(&p, 0.0).unwrap().quasienergies(p.omega);
        let exact = sorted(&q.iter().map(|e| wrap_phase(e * d.period())).collect::<Vec<_>>());
        let got = sorted(&sol.folded_theta());
        for (a, b) in got.iter().zip(&exact) {
            prop_assert!(wrap_phase(a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn refolding_keeps_the_stroboscopic_propagator(shifts in prop::collection::vec(-3i64..=3, 8)) {
        for d in small_zoo() {
            let sol = solve_floquet(&d, 0.0, &opts()).unwrap();
            let g: Vec<i64> = (0..sol.dim()).map(|n| shifts[n % shifts.len()]).collect();
            let r = refold(&sol, &UnfoldingGauge(g)).unwrap();
            prop_assert!(max_diff(r.stroboscopic().as_ref(), sol.monodromy.as_ref()) < 1e-10, "{}", d.name());
        }
    }

    #[test]
    fn states_are_transported_by_micromotion(frac in 0.01f64..0.99) {
        // the kicked chain has translation-degenerate levels; skip it here
        for (i, d) in small_zoo().into_iter().enumerate().filter(|(i, _)| *i != 1) {
            let t0 = frac * d.period();
            let s0 = solve_floquet(&d, 0.0, &opts()).unwrap();
            let s1 = solve_floquet(&d, t0, &opts()).unwrap();
            let p = micromotion(&s0, &d, t0).unwrap();
            let moved = mul(p.as_ref(), s0.states.as_ref());
            let o = mul_adj_left(s1.states.as_ref(), moved.as_ref());
            for r in 0..o.nrows() {
                let best = (0..o.ncols()).map(|c| o[(r, c)].norm()).fold(0.0, f64::max);
                prop_assert!((best - 1.0).abs() < 1e-8, "model {i} row {r}: {best}");
            }
        }
    }

    #[test]
    fn floquet_states_stay_in_their_eigenspace(frac in 0.0f64..1.0) {
        for d in small_zoo() {
            let sol = solve_floquet(&d, 0.0, &opts()).unwrap();
            let t = frac * d.period();
            let u = propagate_grid(&d, 0.0, t, sol.steps).unwrap();
            let evolved = mul(u.as_ref(), sol.states.as_ref());
            let inst = floquet_states_at(&sol, &d, t).unwrap();
            let o = mul_adj_left(inst.as_ref(), evolved.as_ref());
            for n in 0..sol.dim() {
                prop_assert!((o[(n, n)].norm() - 1.0).abs() < 1e-7, "{} level {n}", d.name());
            }
        }
    }
}
