//! Stroboscopic decomposition: Floquet phases and states, micromotion,
//! Floquet Hamiltonian and gauge potential, and zone refolding.

use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::drives::DriveProtocol;
use crate::error::{Error, Result};
use crate::numkernel::{
    cis, cplx, eigu_raw, max_abs, rebuild, ComplexMatrix, HermitianMatrix, UnitaryMatrix,
};
use crate::propagator::{evolve_sampled, monodromy_with, propagate_grid, Integrator};

/// Floquet phases closer than this are treated as one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetOptions {
    pub integrator: Integrator,
    /// Micromotion samples per period kept in memory (0 disables storage).
    pub micromotion_samples: usize,
    /// Micromotion is only stored for dimensions up to this size.
    pub store_dim_limit: usize,
    pub degeneracy_tol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions { integrator: Integrator::default(), micromotion_samples: 256, store_dim_limit: 64, degeneracy_tol: DEGENERACY_TOL }
    }
}

/// Per-level integer shifts `ε_n ↦ ε_n + ℓ_n ω`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnfoldingGauge(pub Vec<i64>);

#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub period: f64,
    /// Time origin (Floquet gauge) of the monodromy.
    pub t0: f64,
    /// Floquet phases `θ_n`, `U(t0+T, t0)|ψ_n⟩ = e^{-iθ_n}|ψ_n⟩`; principal branch shifted by `2π ℓ_n`.
    pub theta: Vec<f64>,
    pub gauge: UnfoldingGauge,
    /// Floquet states `|ψ_n[t0]⟩` as columns.
    pub states: ComplexMatrix,
    pub monodromy: UnitaryMatrix,
    /// Steps per period used by the integrator (1 for kicked drives).
    pub steps: usize,
    /// Stored micromotion `P(t)` on a uniform grid over one period, if small enough.
    pub micromotion: Vec<(f64, ComplexMatrix)>,
    /// A degenerate cluster was found and no declared symmetry fixed its basis.
    pub unresolved_degeneracy: bool,
}

impl FloquetSolution {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `ε_n = θ_n / T`
    pub fn quasienergies(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t / self.period).collect()
    }

    /// Principal-branch phases in (-π, π].
    pub fn folded_theta(&self) -> Vec<f64> {
        self.theta.iter().map(|&t| crate::numkernel::wrap_phase(t)).collect()
    }

    /// `Σ e^{-iθ_n} |ψ_n⟩⟨ψ_n|`
    pub fn stroboscopic(&self) -> ComplexMatrix {
        let d: Vec<c64> = self.theta.iter().map(|&t| cis(-t)).collect();
        rebuild(self.states.as_ref(), &d)
    }

    /// `exp(+i s H_F)`
    pub fn exp_floquet(&self, s: f64) -> ComplexMatrix {
        let d: Vec<c64> = self.theta.iter().map(|&t| cis(s * t / self.period)).collect();
        rebuild(self.states.as_ref(), &d)
    }
}

/// Diagonalize the monodromy at gauge `t0`.
pub fn solve_floquet(d: &DriveProtocol, t0: f64, opts: &FloquetOptions) -> Result<FloquetSolution> {
    let mono = monodromy_with(d, t0, &opts.integrator)?;
    let spec = eigu_raw(mono.u.as_ref())?;
    let n = d.dim();
    let theta: Vec<f64> = spec.phases.iter().map(|&p| crate::numkernel::wrap_phase(-p)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
    let theta: Vec<f64> = order.iter().map(|&i| theta[i]).collect();
    let mut states = Mat::from_fn(n, n, |i, j| spec.vectors[(i, order[j])]);

    let mut unresolved = false;
    for cluster in degenerate_clusters(&theta, opts.degeneracy_tol) {
        if cluster.len() < 2 {
            continue;
        }
        match d.symmetry() {
            Some(sym) => rotate_to_symmetry(&mut states, &cluster, sym)?,
            None => unresolved = true,
        }
    }

    let mut sol = FloquetSolution {
        period: d.period(),
        t0,
        gauge: UnfoldingGauge(vec![0; n]),
        theta,
        states,
        monodromy: mono.u,
        steps: mono.steps,
        micromotion: Vec::new(),
        unresolved_degeneracy: unresolved,
    };
    if opts.micromotion_samples > 0 && n <= opts.store_dim_limit {
        let m = opts.micromotion_samples;
        let times: Vec<f64> = (0..=m).map(|j| t0 + d.period() * j as f64 / m as f64).collect();
        let us = evolve_sampled(d, t0, &times, sol.steps, crate::numkernel::identity(n).as_ref())?;
        sol.micromotion = times
            .iter()
            .zip(us)
            .map(|(&t, u)| (t, u * sol.exp_floquet(t - t0)))
            .collect();
    }
    Ok(sol)
}

/// Index groups of (cyclically) adjacent phases closer than `tol`.
pub fn degenerate_clusters(theta: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let n = theta.len();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if i > 0 && (theta[i] - theta[i - 1]).abs() < tol {
            clusters.last_mut().expect("non-empty").push(i);
        } else {
            clusters.push(vec![i]);
        }
    }
    if clusters.len() > 1 {
        let first = theta[0];
        let last = theta[n - 1];
        if (first + 2.0 * PI - last).abs() < tol {
            let head = clusters.remove(0);
            clusters.last_mut().expect("non-empty").extend(head);
        }
    }
    clusters
}

fn rotate_to_symmetry(states: &mut ComplexMatrix, cluster: &[usize], sym: &ComplexMatrix) -> Result<()> {
    let n = states.nrows();
    let m = cluster.len();
    let block = Mat::from_fn(n, m, |i, j| states[(i, cluster[j])]);
    let s = block.adjoint() * sym * &block;
    let s_u = crate::numkernel::polar_unitary(s.as_ref())?;
    let spec = eigu_raw(s_u.as_ref())?;
    let rotated = &block * &spec.vectors;
    for (j, &c) in cluster.iter().enumerate() {
        for i in 0..n {
            states[(i, c)] = rotated[(i, j)];
        }
    }
    Ok(())
}

/// `P(t) = U(t, t0) exp(+i(t - t0) H_F)`; periodic, `P(t0) = P(t0 + T) = 1`.
pub fn micromotion(sol: &FloquetSolution, d: &DriveProtocol, t: f64) -> Result<UnitaryMatrix> {
    let t0 = sol.t0;
    let tau = (t - t0).rem_euclid(sol.period);
    if let Some((_, p)) = sol.micromotion.iter().find(|(s, _)| (s - t0 - tau).abs() < 1e-14 * sol.period.max(1.0)) {
        return Ok(UnitaryMatrix::unchecked(p.clone()));
    }
    let u = propagate_grid(d, t0, t0 + tau, sol.steps)?;
    Ok(UnitaryMatrix::unchecked(u.as_ref() * sol.exp_floquet(tau)))
}

/// `H_F[t0] = Σ ε_n |ψ_n[t0]⟩⟨ψ_n[t0]|` in the solution's unfolding gauge.
pub fn floquet_hamiltonian(sol: &FloquetSolution) -> HermitianMatrix {
    let d: Vec<c64> = sol.quasienergies().iter().map(|&e| cplx(e, 0.0)).collect();
    HermitianMatrix::symmetrized(rebuild(sol.states.as_ref(), &d))
}

/// `H_F[t] = P(t) H_F[t0] P(t)†`
pub fn floquet_hamiltonian_at(sol: &FloquetSolution, d: &DriveProtocol, t: f64) -> Result<HermitianMatrix> {
    let p = micromotion(sol, d, t)?;
    let hf = floquet_hamiltonian(sol);
    Ok(HermitianMatrix::symmetrized(p.as_ref() * hf.as_ref() * p.as_ref().adjoint()))
}

/// `A_F(t) = H(t) - H_F[t]`
pub fn floquet_agp(sol: &FloquetSolution, d: &DriveProtocol, t: f64) -> Result<HermitianMatrix> {
    let h = d.hamiltonian(t)?;
    let hf = floquet_hamiltonian_at(sol, d, t)?;
    Ok(HermitianMatrix::symmetrized(h.into_inner() - hf.into_inner()))
}

/// Floquet states at time `t`: `|ψ_n[t]⟩ = P(t)|ψ_n[t0]⟩`.
pub fn floquet_states_at(sol: &FloquetSolution, d: &DriveProtocol, t: f64) -> Result<ComplexMatrix> {
    let p = micromotion(sol, d, t)?;
    Ok(p.as_ref() * &sol.states)
}

/// Shift quasienergies by `ℓ_n ω`; states and the stroboscopic propagator are untouched.
pub fn refold(sol: &FloquetSolution, gauge: &UnfoldingGauge) -> Result<FloquetSolution> {
    if gauge.0.len() != sol.dim() {
        return Err(Error::DimensionMismatch { expected: sol.dim(), found: gauge.0.len() });
    }
    let mut out = sol.clone();
    for (n, &l) in gauge.0.iter().enumerate() {
        out.theta[n] += 2.0 * PI * l as f64;
        out.gauge.0[n] += l;
    }
    let w = sol.omega();
    for (t, p) in out.micromotion.iter_mut() {
        let s = *t - sol.t0;
        let phases: Vec<c64> = gauge.0.iter().map(|&l| cis(s * w * l as f64)).collect();
        *p = &*p * rebuild(sol.states.as_ref(), &phases);
    }
    Ok(out)
}

/// Extremal drive families; flags are not mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DriveFamily {
    /// `A_F(t) ≡ 0`
    pub equilibrium: bool,
    /// `H_F = 0`
    pub pure_micromotion: bool,
    /// `A_K(t) ≡ 0`
    pub flat: bool,
    /// `H_K(t) ≡ 0`
    pub pure_geometric: bool,
}

/// Classify using the Kato samples' time grid; norms are max-abs entries.
pub fn classify_drive(
    d: &DriveProtocol,
    sol: &FloquetSolution,
    kato: &crate::kato::KatoResult,
    tol: f64,
) -> Result<DriveFamily> {
    let mut equilibrium = true;
    let times: Vec<f64> = if kato.samples.is_empty() {
        (0..16).map(|j| sol.t0 + sol.period * j as f64 / 16.0).collect()
    } else {
        kato.samples.iter().map(|s| s.t).collect()
    };
    for &t in &times {
        if max_abs(floquet_agp(sol, d, t)?.as_ref()) >= tol {
            equilibrium = false;
            break;
        }
    }
    let pure_micromotion = max_abs(floquet_hamiltonian(sol).as_ref()) < tol;
    let flat = kato.samples.iter().all(|s| max_abs(s.a_k.as_ref()) < tol);
    let pure_geometric = kato.samples.iter().all(|s| max_abs(s.h_k.as_ref()) < tol);
    Ok(DriveFamily { equilibrium, pure_micromotion, flat, pure_geometric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drives::tau;
    use crate::numkernel::{identity, max_diff};

    #[test]
    fn static_drive_phases_and_trivial_micromotion() {
        let h = HermitianMatrix::new(crate::numkernel::scale_real(tau('x').as_ref(), 3.0) + tau('z')).unwrap();
        let d = DriveProtocol::constant("static", h.clone(), 0.7).unwrap();
        let sol = solve_floquet(&d, 0.0, &FloquetOptions::default()).unwrap();
        let e = crate::numkernel::eigh(&h).unwrap();
        for (th, ev) in sol.theta.iter().zip(&e.values) {
            assert!((th - crate::numkernel::wrap_phase(ev * 0.7)).abs() < 1e-12);
        }
        let p = micromotion(&sol, &d, 0.31).unwrap();
        assert!(max_diff(p.as_ref(), identity(2).as_ref()) < 1e-12);
        let af = floquet_agp(&sol, &d, 0.2).unwrap();
        assert!(max_abs(af.as_ref()) < 1e-12);
    }

    #[test]
    fn refold_zero_is_identity() {
        let h = HermitianMatrix::new(tau('x') + tau('z')).unwrap();
        let d = DriveProtocol::constant("static", h, 1.0).unwrap();
        let sol = solve_floquet(&d, 0.0, &FloquetOptions::default()).unwrap();
        let r = refold(&sol, &UnfoldingGauge(vec![0, 0])).unwrap();
        assert_eq!(r.theta, sol.theta);
        assert!(refold(&sol, &UnfoldingGauge(vec![1])).is_err());
    }

    #[test]
    fn clusters_wrap_around() {
        let th = [-PI + 1e-12, 0.0, PI];
        let c = degenerate_clusters(&th, 1e-9);
        assert_eq!(c.len(), 2);
        assert!(c.iter().any(|c| c.len() == 2));
    }
}
