//! Invariant checks on small built-in systems. Each check reports an observed
//! defect and the bound it must stay strictly below.

use std::f64::consts::PI;

use floquet_kato::agpsolve::{apply_l_exact, solve_drive, FourierOperator};
use floquet_kato::drives::{spin, xy_bloch, xy_closed_forms, xy_exact_propagator, DTCChain, KickedMFI, XYBlochParams};
use floquet_kato::floquet::{micromotion, refold, solve_floquet, FloquetOptions, FloquetSolution, UnfoldingGauge};
use floquet_kato::kato::{kato_decompose, KatoOptions};
use floquet_kato::numkernel::{
    commutator, cplx, dagger, scale, eigh, expm_antihermitian, identity, max_abs, max_diff, mul, pinv, rebuild,
    ComplexMatrix, HermitianMatrix,
};
use floquet_kato::propagator::{monodromy, propagate, propagate_grid};
use floquet_kato::spectralflow::{track, BandPoint, TrackOptions};
use floquet_kato::{c64, Result};

pub const MODULES: [&str; 7] = ["numkernel", "drives", "propagator", "floquet", "kato", "agpsolve", "spectralflow"];

pub struct Check {
    pub module: &'static str,
    pub invariant: &'static str,
    pub bound: f64,
    run: fn() -> Result<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub module: &'static str,
    pub invariant: &'static str,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
    pub error: Option<String>,
}

pub fn checks() -> Vec<Check> {
    let c = |module, invariant, bound, run| Check { module, invariant, bound, run };
    vec![
        c("numkernel", "exp(-isH) is unitary", 1e-12, expm_unitary),
        c("numkernel", "eigendecomposition reconstructs H", 1e-12, eigh_rebuild),
        c("numkernel", "pseudoinverse satisfies A A+ A = A", 1e-10, pinv_identity),
        c("drives", "H(t + T) = H(t)", 1e-12, drives_periodic),
        c("drives", "kick at pi commutes with the global flip", 1e-13, dtc_flip),
        c("propagator", "monodromy matches closed-form propagator", 1e-9, xy_propagator),
        c("propagator", "U(T + t0, t0) = U(t0, 0) U(T, 0) U(t0, 0)^dagger", 1e-9, gauge_covariance),
        c("floquet", "quasienergies match closed form", 1e-9, xy_quasienergies),
        c("floquet", "micromotion is periodic", 1e-9, micromotion_periodic),
        c("kato", "U(T) = W exp(-iT Xi)", 1e-9, factorization),
        c("kato", "Kato energies match closed form", 1e-8, xy_kato),
        c("kato", "xi independent of t0", 1e-8, xi_t0),
        c("kato", "refolding shifts gamma by 2 pi l and leaves xi", 1e-9, refold_shift),
        c("agpsolve", "Fourier solution matches the projector potential", 1e-6, agp_match),
        c("agpsolve", "superoperator agrees with time-domain evaluation", 1e-10, l_time_domain),
        c("spectralflow", "1 - min overlap along a smooth k sweep", 0.5, tracking_overlap),
    ]
}

/// Run the checks whose module matches `filter`; a check passes if `observed < bound * tol_scale`.
pub fn run(filter: Option<&str>, tol_scale: f64) -> Vec<Outcome> {
    checks()
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.module == f))
        .map(|c| {
            let (observed, error) = match (c.run)() {
                Ok(v) if v.is_finite() => (v, None),
                Ok(v) => (v, Some("non-finite result".to_string())),
                Err(e) => (f64::INFINITY, Some(e.to_string())),
            };
            let pass = error.is_none() && observed < c.bound * tol_scale;
            Outcome { module: c.module, invariant: c.invariant, observed, bound: c.bound * tol_scale, pass, error }
        })
        .collect()
}

fn herm(n: usize, seed: f64) -> HermitianMatrix {
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i as f64, j as f64);
        cplx((1.3 * a + 0.7 * b + seed).sin() + (a * b + seed).cos(), (0.9 * a - 1.1 * b + 2.0 * seed).sin())
    });
    HermitianMatrix::symmetrized(m)
}

fn xy(j: f64, k: f64) -> XYBlochParams {
    XYBlochParams { g: 1.0, j, a: 2.5, omega: 10.0, k }
}

fn solve(d: &floquet_kato::drives::DriveProtocol, t0: f64) -> Result<FloquetSolution> {
    solve_floquet(d, t0, &FloquetOptions::default())
}

fn expm_unitary() -> Result<f64> {
    let u = expm_antihermitian(&herm(6, 0.3), 1.7)?;
    Ok(max_diff(mul(dagger(u.as_ref()).as_ref(), u.as_ref()).as_ref(), identity(6).as_ref()))
}

fn eigh_rebuild() -> Result<f64> {
    let h = herm(7, 1.1);
    let e = eigh(&h)?;
    let d: Vec<c64> = e.values.iter().map(|&x| cplx(x, 0.0)).collect();
    Ok(max_diff(rebuild(e.vectors.as_ref(), &d).as_ref(), h.as_ref()))
}

fn pinv_identity() -> Result<f64> {
    // rank-deficient: third column is a combination of the first two
    let a = ComplexMatrix::from_fn(5, 3, |i, j| {
        let col = |c: usize| cplx((i as f64 + 0.5 * c as f64).sin(), (i * c) as f64 * 0.1);
        if j < 2 {
            col(j)
        } else {
            col(0) + col(1)
        }
    });
    let p = pinv(a.as_ref(), 1e-10)?;
    Ok(max_diff((&a * &p * &a).as_ref(), a.as_ref()))
}

fn drives_periodic() -> Result<f64> {
    let d = xy_bloch(&xy(0.5, 0.4))?;
    let mut worst: f64 = 0.0;
    for j in 0..16 {
        let t = 0.07 * j as f64;
        worst = worst.max(max_diff(d.hamiltonian_matrix(t).as_ref(), d.hamiltonian_matrix(t + d.period()).as_ref()));
    }
    Ok(worst)
}

fn dtc_flip() -> Result<f64> {
    let ch = DTCChain::new(4, 1.0, 0.5, 3)?;
    let d = ch.protocol(PI, 0.05)?;
    let u = monodromy(&d, 0.0, 1)?;
    let f = spin::global_flip(4);
    Ok(max_abs(commutator(u.as_ref(), f.as_ref()).as_ref()))
}

fn xy_propagator() -> Result<f64> {
    let p = xy(0.5, 0.4);
    let d = xy_bloch(&p)?;
    let sol = solve(&d, 0.0)?;
    Ok(max_diff(sol.monodromy.as_ref(), xy_exact_propagator(&p, d.period())?.as_ref()))
}

fn gauge_covariance() -> Result<f64> {
    let d = KickedMFI::new(3, 1.0, 0.9, 0.4)?.protocol(0.7)?;
    let t0 = 0.23;
    let a = propagate(&d, t0, t0 + d.period(), 1)?;
    let u0 = propagate(&d, 0.0, t0, 1)?;
    let ut = propagate(&d, 0.0, d.period(), 1)?;
    let b = u0.as_ref() * ut.as_ref() * dagger(u0.as_ref());
    Ok(max_diff(a.as_ref(), b.as_ref()))
}

fn xy_quasienergies() -> Result<f64> {
    let p = xy(0.5, 0.4);
    let d = xy_bloch(&p)?;
    let sol = solve(&d, 0.0)?;
    let cf = xy_closed_forms(&p, 0.0)?;
    let mut e = sol.folded_theta().iter().map(|th| th / d.period()).collect::<Vec<_>>();
    e.sort_by(f64::total_cmp);
    let exact = cf.quasienergies(p.omega);
    Ok(e.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn micromotion_periodic() -> Result<f64> {
    // P(T) = U(T, 0) exp(iT H_F) built directly rather than through the periodic lookup
    let d = xy_bloch(&xy(0.5, 0.4))?;
    let sol = solve(&d, 0.0)?;
    let u = propagate_grid(&d, 0.0, d.period(), sol.steps)?;
    let p = u.as_ref() * sol.exp_floquet(d.period());
    let start = micromotion(&sol, &d, 0.0)?;
    Ok(max_diff(p.as_ref(), identity(2).as_ref()).max(max_diff(start.as_ref(), identity(2).as_ref())))
}

fn factorization() -> Result<f64> {
    let d = KickedMFI::new(4, 1.0, 0.9, 0.4)?.protocol(0.7)?;
    let sol = solve(&d, 0.0)?;
    let k = kato_decompose(&d, &sol, &KatoOptions::default())?;
    Ok(max_diff(k.reconstruct()?.as_ref(), sol.monodromy.as_ref()))
}

fn xy_kato() -> Result<f64> {
    let p = xy(0.5, 0.4);
    let d = xy_bloch(&p)?;
    let k = kato_decompose(&d, &solve(&d, 0.0)?, &KatoOptions::default())?;
    let mut xi = k.xi.clone();
    xi.sort_by(f64::total_cmp);
    let exact = xy_closed_forms(&p, 0.0)?.kato_energies();
    Ok(xi.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn sorted_xi(d: &floquet_kato::drives::DriveProtocol, t0: f64) -> Result<Vec<f64>> {
    let mut xi = kato_decompose(d, &solve(d, t0)?, &KatoOptions::default())?.xi;
    xi.sort_by(f64::total_cmp);
    Ok(xi)
}

fn xi_t0() -> Result<f64> {
    let d = KickedMFI::new(3, 1.0, 0.9, 0.4)?.protocol(0.7)?;
    let a = sorted_xi(&d, 0.0)?;
    let b = sorted_xi(&d, 0.37 * d.period())?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn refold_shift() -> Result<f64> {
    let d = KickedMFI::new(3, 1.0, 0.9, 0.4)?.protocol(0.7)?;
    let sol = solve(&d, 0.0)?;
    let ell: Vec<i64> = (0..sol.dim()).map(|n| n as i64 % 3 - 1).collect();
    let r = refold(&sol, &UnfoldingGauge(ell.clone()))?;
    let a = kato_decompose(&d, &sol, &KatoOptions::default())?;
    let b = kato_decompose(&d, &r, &KatoOptions::default())?;
    let mut worst: f64 = 0.0;
    for n in 0..sol.dim() {
        worst = worst.max((a.xi[n] - b.xi[n]).abs());
        worst = worst.max((b.gamma[n] - a.gamma[n] - 2.0 * PI * ell[n] as f64).abs());
    }
    Ok(worst)
}

fn agp_match() -> Result<f64> {
    let d = xy_bloch(&xy(0.5, 0.4))?;
    let k = kato_decompose(&d, &solve(&d, 0.0)?, &KatoOptions { samples: Some(8), ..Default::default() })?;
    let a = solve_drive(&d, Some(8), 1e-10)?;
    let mut worst: f64 = 0.0;
    for s in &k.samples {
        worst = worst.max(max_diff(a.kato_agp_at(s.t)?.as_ref(), s.a_k.as_ref()));
    }
    Ok(worst)
}

fn l_time_domain() -> Result<f64> {
    let d = xy_bloch(&xy(0.5, 0.4))?;
    let h = FourierOperator::from_drive(&d, 1)?;
    let pairs: Vec<(i32, ComplexMatrix)> = (-2..=2).map(|l| (l, herm(2, l as f64).into_inner())).collect();
    let x = FourierOperator::from_pairs(2, 2, h.omega, &pairs)?;
    let lx = apply_l_exact(&h, &x)?;
    let dx = x.derivative();
    let mut worst: f64 = 0.0;
    for j in 0..12 {
        let t = d.period() * j as f64 / 12.0;
        let ht = h.evaluate(t);
        let xt = x.evaluate(t);
        let direct = scale(commutator(ht.as_ref(), xt.as_ref()).as_ref(), c64::new(0.0, -1.0)) - dx.evaluate(t);
        worst = worst.max(max_diff(lx.evaluate(t).as_ref(), direct.as_ref()));
    }
    Ok(worst)
}

fn tracking_overlap() -> Result<f64> {
    let mut pts = Vec::new();
    for j in 0..24 {
        let k = 0.1 + 0.05 * j as f64;
        let d = xy_bloch(&xy(0.5, k))?;
        let sol = solve(&d, 0.0)?;
        let kr = kato_decompose(&d, &sol, &KatoOptions { samples: Some(0), ..Default::default() })?;
        pts.push(BandPoint::new(k, &sol, &kr));
    }
    Ok(1.0 - track(&pts, &TrackOptions::default())?.min_overlap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_at_default_scale() {
        for o in run(None, 1.0) {
            assert!(o.pass, "{}: {} observed {:e} bound {:e} {:?}", o.module, o.invariant, o.observed, o.bound, o.error);
        }
    }

    #[test]
    fn zero_scale_fails_everything() {
        assert!(run(Some("numkernel"), 0.0).iter().all(|o| !o.pass));
    }
}
