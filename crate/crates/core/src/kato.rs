//! Gauge-invariant Kato decomposition `H(t) = H_K(t) + A_K(t)`.
//!
//! Floquet states are transported with the exact evolution, so their labels
//! stay continuous through exact crossings. Every step of the schedule holds
//! a constant Hamiltonian; inside a step the expectation value `⟨ψ|H|ψ⟩` is
//! conserved, so Kato energies are exact step functions of the discretized
//! dynamics, and their integral is a finite sum.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};

use crate::drives::DriveProtocol;
use crate::error::{Error, Result};
use crate::floquet::{degenerate_clusters, FloquetSolution, DEGENERACY_TOL};
use crate::numkernel::{
    cis, cplx, eigh_raw, expm_antihermitian, max_abs, mul, mul_adj_left, rebuild, scale_real, wrap_phase,
    ComplexMatrix, HermitianMatrix, UnitaryMatrix,
};
use crate::propagator::{apply_partial, schedule, step_spectrum, StepSource};

/// Transported states whose return overlap falls below this demand a finer grid.
pub const MIN_CLOSURE_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoOptions {
    /// Number of uniformly spaced times at which `A_K`, `H_K` and the states are stored.
    /// `None` stores 32 samples for dimensions up to 64 and none above.
    pub samples: Option<usize>,
    /// Half-width of the central projector difference; `None` picks `1e-4 T / (1 + T‖H‖)`.
    pub fd_delta: Option<f64>,
    pub degeneracy_tol: f64,
}

impl Default for KatoOptions {
    fn default() -> Self {
        KatoOptions { samples: None, fd_delta: None, degeneracy_tol: DEGENERACY_TOL }
    }
}

/// Kato objects at one sampled time.
#[derive(Debug, Clone)]
pub struct KatoSample {
    pub t: f64,
    /// Transported Floquet states `|ψ_n[t]⟩`.
    pub states: ComplexMatrix,
    pub a_k: HermitianMatrix,
    pub h_k: HermitianMatrix,
}

#[derive(Debug, Clone)]
pub struct KatoResult {
    pub period: f64,
    pub t0: f64,
    /// Schedule steps `(start, dt)`.
    pub steps: Vec<(f64, f64)>,
    /// `E_K,n` on each step, row-major `[step][level]`.
    energies: Vec<f64>,
    /// Floquet phases in the solution's unfolding gauge.
    pub theta: Vec<f64>,
    pub gauge: Vec<i64>,
    /// Period-averaged Kato energies `ξ_K,n(T)`.
    pub xi: Vec<f64>,
    /// Berry phases `γ_n`: principal branch shifted by `2π ℓ_n` of the unfolding gauge.
    pub gamma: Vec<f64>,
    /// `|ψ_n[t0]⟩`; inside degenerate clusters rotated to diagonalize the cluster's Kato operator.
    pub states: ComplexMatrix,
    pub samples: Vec<KatoSample>,
    /// Smallest `|⟨ψ_n[t0]|ψ_n(t0+T)⟩|` observed.
    pub closure_min: f64,
}

impl KatoResult {
    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// `E_K,n` on step `j`.
    pub fn step_energies(&self, j: usize) -> &[f64] {
        let n = self.dim();
        &self.energies[j * n..(j + 1) * n]
    }

    /// `(t_mid, E_K,n)` for level `n` over one period.
    pub fn energy_curve(&self, n: usize) -> Vec<(f64, f64)> {
        (0..self.steps.len())
            .map(|j| (self.steps[j].0 + 0.5 * self.steps[j].1, self.step_energies(j)[n]))
            .collect()
    }

    /// `E_K,n(t)`, with `t` reduced into the period window.
    pub fn energies_at(&self, t: f64) -> Vec<f64> {
        let tau = self.t0 + (t - self.t0).rem_euclid(self.period);
        let j = self
            .steps
            .iter()
            .position(|&(s, dt)| tau < s + dt)
            .unwrap_or(self.steps.len() - 1);
        self.step_energies(j).to_vec()
    }

    /// Running average `ξ_K,n(t) = (t - t0)⁻¹ ∫ E_K,n`, `t ∈ [t0, t0 + T]`; equals `E_K,n(t0)` at `t = t0`.
    pub fn xi_running(&self, t: f64) -> Result<Vec<f64>> {
        let tau = t - self.t0;
        if tau < -1e-12 * self.period || tau > self.period * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("t = {t} outside [t0, t0 + T]")));
        }
        if tau <= 0.0 {
            return Ok(self.step_energies(0).to_vec());
        }
        let n = self.dim();
        let mut acc = vec![0.0; n];
        for (j, &(s, dt)) in self.steps.iter().enumerate() {
            let w = (self.t0 + tau - s).clamp(0.0, dt);
            if w <= 0.0 {
                break;
            }
            for (a, e) in acc.iter_mut().zip(self.step_energies(j)) {
                *a += w * e;
            }
        }
        Ok(acc.into_iter().map(|a| a / tau).collect())
    }

    /// Principal-branch Berry phases in (-π, π].
    pub fn gamma_principal(&self) -> Vec<f64> {
        self.gamma.iter().map(|&g| wrap_phase(g)).collect()
    }

    /// Wilson line `Σ e^{-iγ_n} |ψ_n[t0]⟩⟨ψ_n[t0]|`.
    pub fn wilson_line(&self) -> UnitaryMatrix {
        wilson_line(self.states.as_ref(), &self.gamma)
    }

    /// Kato operator `Ξ_K = Σ ξ_n |ψ_n[t0]⟩⟨ψ_n[t0]|`.
    pub fn kato_operator(&self) -> HermitianMatrix {
        kato_operator(&self.xi, self.states.as_ref())
    }

    /// `e^{-iΓ} e^{-iT Ξ_K}` built from the two factors separately.
    pub fn reconstruct(&self) -> Result<ComplexMatrix> {
        let w = self.wilson_line();
        let e = expm_antihermitian(&self.kato_operator(), self.period)?;
        Ok(w.as_ref() * e.as_ref())
    }
}

/// Kato decomposition over one period starting at the solution's gauge `t0`.
pub fn kato_decompose(d: &DriveProtocol, sol: &FloquetSolution, opts: &KatoOptions) -> Result<KatoResult> {
    let n = d.dim();
    if sol.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sol.dim() });
    }
    let t0 = sol.t0;
    let period = d.period();
    let sched = schedule(d, t0, t0 + period, sol.steps)?;
    let n_samples = opts.samples.unwrap_or(if n <= 64 { 32 } else { 0 });
    let sample_times: Vec<f64> = (0..n_samples).map(|j| t0 + period * j as f64 / n_samples as f64).collect();

    let clusters: Vec<Vec<usize>> = degenerate_clusters(&sol.theta, opts.degeneracy_tol)
        .into_iter()
        .filter(|c| c.len() > 1)
        .collect();

    let mut psi = sol.states.clone();
    let mut energies = Vec::with_capacity(sched.len() * n);
    let mut blocks: Vec<Vec<ComplexMatrix>> = clusters.iter().map(|_| Vec::with_capacity(sched.len())).collect();
    let mut sample_states: Vec<(f64, ComplexMatrix)> = Vec::with_capacity(n_samples);
    let mut k = 0;
    for st in &sched {
        let sp = step_spectrum(d, st)?;
        let v = sp.vectors.as_ref().as_ref();
        let c = mul_adj_left(v, psi.as_ref());
        match st.source {
            StepSource::Segment(_) => {
                // Exact: the segment Hamiltonian conserves its own expectation values.
                for col in 0..n {
                    energies.push(sp.values.iter().enumerate().map(|(i, &l)| l * c[(i, col)].norm_sqr()).sum());
                }
                for (ci, cl) in clusters.iter().enumerate() {
                    let sub = Mat::from_fn(n, cl.len(), |i, j| c[(i, cl[j])] * sp.values[i]);
                    let cc = Mat::from_fn(n, cl.len(), |i, j| c[(i, cl[j])]);
                    blocks[ci].push(mul_adj_left(cc.as_ref(), sub.as_ref()));
                }
            }
            StepSource::Magnus => {
                // Two-point Gauss quadrature of ⟨ψ(t)|H(t)|ψ(t)⟩ over the step.
                let mut e = vec![0.0; n];
                let mut blk: Vec<ComplexMatrix> = clusters.iter().map(|cl| Mat::zeros(cl.len(), cl.len())).collect();
                for g in st.gauss_nodes() {
                    let x = apply_partial(d, st, &sp, g - st.start, psi.as_ref())?;
                    let h = d.hamiltonian(g)?;
                    let hx = mul(h.as_ref(), x.as_ref());
                    for (col, ec) in e.iter_mut().enumerate() {
                        *ec += 0.5 * (0..n).map(|i| (x[(i, col)].conj() * hx[(i, col)]).re).sum::<f64>();
                    }
                    for (ci, cl) in clusters.iter().enumerate() {
                        let xc = Mat::from_fn(n, cl.len(), |i, j| x[(i, cl[j])]);
                        let hc = Mat::from_fn(n, cl.len(), |i, j| hx[(i, cl[j])]);
                        blk[ci] += scale_real(mul_adj_left(xc.as_ref(), hc.as_ref()).as_ref(), 0.5);
                    }
                }
                energies.extend(e);
                for (ci, b) in blk.into_iter().enumerate() {
                    blocks[ci].push(b);
                }
            }
        }
        while k < sample_times.len() && sample_times[k] < st.end() {
            let tau = sample_times[k] - st.start;
            sample_states.push((sample_times[k], apply_partial(d, st, &sp, tau, psi.as_ref())?));
            k += 1;
        }
        psi = mul(v, phase_rows(&c, &sp.values, st.dt).as_ref());
    }

    let mut states0 = sol.states.clone();
    let mut psi_t = psi;
    for (ci, cl) in clusters.iter().enumerate() {
        let m = cl.len();
        let mut total = Mat::<c64>::zeros(m, m);
        for (j, st) in sched.iter().enumerate() {
            total += crate::numkernel::scale_real(blocks[ci][j].as_ref(), st.dt);
        }
        let rot = eigh_raw(HermitianMatrix::symmetrized(total).as_ref())?.vectors;
        rotate_columns(&mut states0, cl, rot.as_ref());
        rotate_columns(&mut psi_t, cl, rot.as_ref());
        for (_, s) in sample_states.iter_mut() {
            rotate_columns(s, cl, rot.as_ref());
        }
        for (j, blk) in blocks[ci].iter().enumerate() {
            let r = rot.adjoint() * blk * &rot;
            for (a, &col) in cl.iter().enumerate() {
                energies[j * n + col] = r[(a, a)].re;
            }
        }
    }

    let mut integral = vec![0.0; n];
    for (j, st) in sched.iter().enumerate() {
        for col in 0..n {
            integral[col] += st.dt * energies[j * n + col];
        }
    }
    let xi: Vec<f64> = integral.iter().map(|x| x / period).collect();

    let mut closure_min = f64::INFINITY;
    let mut gamma = Vec::with_capacity(n);
    for col in 0..n {
        let mut z = cplx(0.0, 0.0);
        for i in 0..n {
            z += states0[(i, col)].conj() * psi_t[(i, col)];
        }
        closure_min = closure_min.min(z.norm());
        if z.norm() < MIN_CLOSURE_OVERLAP {
            return Err(Error::GridTooCoarse(format!(
                "level {col} returns with overlap {:.3} after one period; refine the step count",
                z.norm()
            )));
        }
        let b = z * cis(integral[col]);
        let g = wrap_phase(-b.im.atan2(b.re));
        gamma.push(g + 2.0 * PI * sol.gauge.0[col] as f64);
    }

    let mut samples = Vec::with_capacity(sample_states.len());
    for (t, s) in sample_states {
        let a = kato_agp(d, s.as_ref(), t, opts.fd_delta)?;
        let h = d.hamiltonian(t)?;
        let hk = HermitianMatrix::symmetrized(h.into_inner() - a.matrix());
        samples.push(KatoSample { t, states: s, a_k: a, h_k: hk });
    }

    Ok(KatoResult {
        period,
        t0,
        steps: sched.iter().map(|s| (s.start, s.dt)).collect(),
        energies,
        theta: sol.theta.clone(),
        gauge: sol.gauge.0.clone(),
        xi,
        gamma,
        states: states0,
        samples,
        closure_min,
    })
}

fn phase_rows(c: &ComplexMatrix, values: &[f64], dt: f64) -> ComplexMatrix {
    let mut out = c.clone();
    for (i, &l) in values.iter().enumerate() {
        let e = cis(-l * dt);
        for j in 0..out.ncols() {
            out[(i, j)] *= e;
        }
    }
    out
}

fn rotate_columns(m: &mut ComplexMatrix, cols: &[usize], rot: MatRef<'_, c64>) {
    let n = m.nrows();
    let block = Mat::from_fn(n, cols.len(), |i, j| m[(i, cols[j])]);
    let r = block * rot;
    for (j, &c) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, c)] = r[(i, j)];
        }
    }
}

/// `A_K(t) = (i/2) Σ_n [∂_t P_n, P_n]` from central differences of the transported projectors.
///
/// `states` are `|ψ_n[t]⟩`; neighbours at `t ± δ` come from one exponential step each.
pub fn kato_agp(d: &DriveProtocol, states: MatRef<'_, c64>, t: f64, delta: Option<f64>) -> Result<HermitianMatrix> {
    let h = d.hamiltonian(t)?;
    let hn = max_abs(h.as_ref());
    let period = d.period();
    let delta = delta.unwrap_or(1e-4 * period / (1.0 + period * hn));
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let hp = d.hamiltonian(t + 0.5 * delta)?;
    let hm = d.hamiltonian(t - 0.5 * delta)?;
    let fwd = expm_antihermitian(&hp, delta)?;
    let bwd = expm_antihermitian(&hm, -delta)?;
    let plus = fwd.as_ref() * states;
    let minus = bwd.as_ref() * states;
    let n = states.ncols();
    let dp: Vec<c64> = (0..n).map(|j| col_dot(plus.as_ref(), states, j)).collect();
    let dm: Vec<c64> = (0..n).map(|j| col_dot(minus.as_ref(), states, j)).collect();
    let x = (crate::numkernel::scale_columns(plus.as_ref(), &dp) - crate::numkernel::scale_columns(minus.as_ref(), &dm))
        * states.adjoint();
    let x = crate::numkernel::scale_real(x.as_ref(), 0.5 / delta);
    let a = crate::numkernel::scale(x.as_ref(), cplx(0.0, 0.5)) - crate::numkernel::scale(crate::numkernel::dagger(x.as_ref()).as_ref(), cplx(0.0, 0.5));
    Ok(HermitianMatrix::symmetrized(a))
}

/// `⟨a_j|b_j⟩`
fn col_dot(a: MatRef<'_, c64>, b: MatRef<'_, c64>, j: usize) -> c64 {
    (0..a.nrows()).map(|i| a[(i, j)].conj() * b[(i, j)]).sum()
}

/// `H_K(t) = H(t) - A_K(t)`
pub fn kato_hamiltonian(d: &DriveProtocol, a_k: &HermitianMatrix, t: f64) -> Result<HermitianMatrix> {
    let h = d.hamiltonian(t)?;
    Ok(HermitianMatrix::symmetrized(h.into_inner() - a_k.matrix()))
}

/// `Σ e^{-iγ_n} |ψ_n⟩⟨ψ_n|`
pub fn wilson_line(states: MatRef<'_, c64>, gamma: &[f64]) -> UnitaryMatrix {
    let d: Vec<c64> = gamma.iter().map(|&g| cis(-g)).collect();
    UnitaryMatrix::unchecked(rebuild(states, &d))
}

/// `Σ ξ_n |ψ_n⟩⟨ψ_n|`
pub fn kato_operator(xi: &[f64], states: MatRef<'_, c64>) -> HermitianMatrix {
    let d: Vec<c64> = xi.iter().map(|&x| cplx(x, 0.0)).collect();
    HermitianMatrix::symmetrized(rebuild(states, &d))
}

// ---------------------------------------------------------------------------
// Stored-grid variants.

/// States on a time grid over one period.
///
/// `probe_times[j]` is where `H` is evaluated for node `j`; for kicked drives
/// every interior segment boundary appears twice, once probing the segment on
/// each side, so quadrature never smears a jump.
#[derive(Debug, Clone)]
pub struct StateGrid {
    pub times: Vec<f64>,
    pub probe_times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
}

/// Transport the Floquet states onto `points` uniform intervals (plus segment boundaries).
pub fn state_grid(d: &DriveProtocol, sol: &FloquetSolution, points: usize) -> Result<StateGrid> {
    if points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one interval".into()));
    }
    let t0 = sol.t0;
    let period = d.period();
    let mut nodes: Vec<(f64, f64)> = (0..=points)
        .map(|j| {
            let t = t0 + period * j as f64 / points as f64;
            (t, t)
        })
        .collect();
    if d.is_piecewise_constant() {
        let sched = schedule(d, t0, t0 + period, 1)?;
        let tiny = 1e-9 * period;
        for w in sched.windows(2) {
            let b = w[1].start;
            nodes.retain(|&(t, _)| (t - b).abs() > 1e-12 * period);
            nodes.push((b, b - tiny.min(0.5 * w[0].dt)));
            nodes.push((b, b + tiny.min(0.5 * w[1].dt)));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        if let Some(first) = nodes.first_mut() {
            first.1 = t0 + tiny.min(0.5 * sched[0].dt);
        }
        if let Some(last) = nodes.last_mut() {
            last.1 = t0 + period - tiny.min(0.5 * sched[sched.len() - 1].dt);
        }
    }
    let times: Vec<f64> = nodes.iter().map(|x| x.0).collect();
    let states = crate::propagator::evolve_sampled(d, t0, &times, sol.steps, sol.states.as_ref())?;
    Ok(StateGrid { probe_times: nodes.iter().map(|x| x.1).collect(), times, states })
}

/// Discretized parallel transport `γ_n = -arg[⟨ψ_n(t_0)|ψ_n(t_N)⟩ Π_j ⟨ψ_n(t_{j+1})|ψ_n(t_j)⟩]`.
///
/// Invariant under independent phase changes of every grid state.
pub fn berry_phases(grid: &StateGrid) -> Result<Vec<f64>> {
    let m = grid.states.len();
    if m < 2 {
        return Err(Error::GridTooCoarse("need at least two grid states".into()));
    }
    let n = grid.states[0].ncols();
    let mut prod = vec![cplx(1.0, 0.0); n];
    for j in 0..m - 1 {
        let a = &grid.states[j + 1];
        let b = &grid.states[j];
        for (col, p) in prod.iter_mut().enumerate() {
            let z = col_dot(a.as_ref(), b.as_ref(), col);
            if z.norm() < MIN_CLOSURE_OVERLAP {
                return Err(Error::GridTooCoarse(format!(
                    "overlap {:.3} between grid points {j} and {} for level {col}",
                    z.norm(),
                    j + 1
                )));
            }
            *p *= z / z.norm();
        }
    }
    let first = &grid.states[0];
    let last = &grid.states[m - 1];
    Ok((0..n)
        .map(|col| {
            let z = col_dot(first.as_ref(), last.as_ref(), col) * prod[col];
            wrap_phase(-z.im.atan2(z.re))
        })
        .collect())
}

/// `E_K,n(t_j) = ⟨ψ_n[t_j]|H(probe_j)|ψ_n[t_j]⟩`, row per grid node.
pub fn kato_energies(d: &DriveProtocol, grid: &StateGrid) -> Result<Vec<Vec<f64>>> {
    grid.states
        .iter()
        .zip(&grid.probe_times)
        .map(|(s, &tp)| {
            let h = d.hamiltonian(tp)?;
            Ok(crate::numkernel::expectations(h.as_ref(), s.as_ref()))
        })
        .collect()
}

/// Running trapezoid averages `ξ_n(t_j) = (t_j - t_0)⁻¹ ∫ E_K,n`; the first node takes `E_K,n(t_0)`.
pub fn kato_average(curves: &[Vec<f64>], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if curves.len() != times.len() || curves.is_empty() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: curves.len() });
    }
    let n = curves[0].len();
    let mut acc = vec![0.0; n];
    let mut out = Vec::with_capacity(times.len());
    out.push(curves[0].clone());
    for j in 1..times.len() {
        let h = times[j] - times[j - 1];
        for i in 0..n {
            acc[i] += 0.5 * h * (curves[j][i] + curves[j - 1][i]);
        }
        let span = times[j] - times[0];
        out.push(if span > 0.0 { acc.iter().map(|a| a / span).collect() } else { curves[j].clone() });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Counterdiabatic gauge choices along an open control ramp.

/// A control Hamiltonian `H(t)`, `t ∈ [0, duration]`, with its time derivative.
pub struct ControlPath {
    pub dim: usize,
    pub duration: f64,
    pub h: Box<dyn Fn(f64) -> ComplexMatrix + Send + Sync>,
    pub dh: Box<dyn Fn(f64) -> ComplexMatrix + Send + Sync>,
}

impl ControlPath {
    /// `B[cos θ τ^z + sin θ (cos λ τ^x + sin λ τ^y)]` with `λ` ramped smoothly from 0 to `2π`.
    pub fn cone(b: f64, theta: f64, duration: f64) -> Self {
        let lam = move |t: f64| {
            let u = t / duration;
            2.0 * PI * (u - (2.0 * PI * u).sin() / (2.0 * PI))
        };
        let dlam = move |t: f64| {
            let u = t / duration;
            2.0 * PI * (1.0 - (2.0 * PI * u).cos()) / duration
        };
        let field = move |l: f64| -> ComplexMatrix {
            let x = crate::drives::tau('x');
            let y = crate::drives::tau('y');
            let z = crate::drives::tau('z');
            let s = |m: &ComplexMatrix, c: f64| crate::numkernel::scale_real(m.as_ref(), c);
            s(&z, b * theta.cos()) + s(&x, b * theta.sin() * l.cos()) + s(&y, b * theta.sin() * l.sin())
        };
        let dfield = move |l: f64, dl: f64| -> ComplexMatrix {
            let x = crate::drives::tau('x');
            let y = crate::drives::tau('y');
            let s = |m: &ComplexMatrix, c: f64| crate::numkernel::scale_real(m.as_ref(), c);
            s(&x, -b * theta.sin() * l.sin() * dl) + s(&y, b * theta.sin() * l.cos() * dl)
        };
        ControlPath {
            dim: 2,
            duration,
            h: Box::new(move |t| field(lam(t))),
            dh: Box::new(move |t| dfield(lam(t), dlam(t))),
        }
    }
}

/// Which counterdiabatic Hamiltonian drives the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeRow {
    /// `H_ctrl + A_K`: phase `γ + φ`.
    Kato,
    /// `H_ctrl + A_K + Σ χ̇ P` with `χ = -γ`: phase `φ`.
    Dynamical,
    /// `A_K` alone: phase `γ`.
    KatoAgpOnly,
    /// `A_K + Σ χ̇ P` with `χ = -γ + 2πℓ t/T`: phase `2πℓ` at the end.
    Periodic(i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugePhases {
    /// `-arg⟨n(t)|ψ(t)⟩`, continuously unwrapped.
    pub measured: f64,
    pub predicted: f64,
    /// Dynamical phase `∫ E_n`.
    pub phi: f64,
    /// Geometric phase `-∫ i⟨n|∂_t n⟩` in the reference gauge.
    pub gamma: f64,
    pub chi: f64,
}

/// Evolve eigenstate `level` of the control along the whole ramp and compare the accumulated
/// phase to the row's prediction. `A′ = A_K + Σ_n χ̇_n |n⟩⟨n|`.
pub fn gauge_shift_evolution(path: &ControlPath, level: usize, row: GaugeRow, steps: usize) -> Result<GaugePhases> {
    if level >= path.dim || steps == 0 {
        return Err(Error::InvalidParameter(format!("level {level} / steps {steps} invalid")));
    }
    let dt = path.duration / steps as f64;
    let frame0 = eigh_raw(HermitianMatrix::symmetrized((path.h)(0.0)).as_ref())?;
    let pin = (0..path.dim)
        .max_by(|&a, &b| frame0.vectors[(a, level)].norm().total_cmp(&frame0.vectors[(b, level)].norm()))
        .unwrap_or(0);

    // Reference gauge: component `pin` real and positive.
    let frame = |t: f64| -> Result<(Vec<f64>, ComplexMatrix)> {
        let s = eigh_raw(HermitianMatrix::symmetrized((path.h)(t)).as_ref())?;
        for w in s.values.windows(2) {
            if w[1] - w[0] < 1e-8 {
                return Err(Error::Degenerate(format!("control spectrum degenerate at t = {t}")));
            }
        }
        let mut v = s.vectors;
        for c in 0..path.dim {
            let z = v[(pin, c)];
            if z.norm() < 1e-6 {
                return Err(Error::Degenerate(format!("reference gauge undefined at t = {t}")));
            }
            let ph = z.conj() / z.norm();
            for r in 0..path.dim {
                v[(r, c)] *= ph;
            }
        }
        Ok((s.values, v))
    };

    let agp = |t: f64, vals: &[f64], v: &ComplexMatrix| -> ComplexMatrix {
        let dh = v.adjoint() * (path.dh)(t) * v;
        let a = Mat::from_fn(path.dim, path.dim, |m, n| {
            if m == n {
                cplx(0.0, 0.0)
            } else {
                cplx(0.0, 1.0) * dh[(m, n)] / (vals[n] - vals[m])
            }
        });
        v * a * v.adjoint()
    };

    let (_, v0) = frame(0.0)?;
    let mut psi = Mat::from_fn(path.dim, 1, |i, _| v0[(i, level)]);
    let mut prev = v0;
    let mut phi = 0.0;
    let mut gamma = 0.0;
    let mut measured = 0.0;
    let mut last_arg = 0.0;
    let include_h = matches!(row, GaugeRow::Kato | GaugeRow::Dynamical);
    for j in 0..steps {
        let tm = (j as f64 + 0.5) * dt;
        let (vals, vm) = frame(tm)?;
        let mut gen = agp(tm, &vals, &vm);
        if include_h {
            gen += (path.h)(tm);
        }
        // Berry connection at the midpoint from the reference-gauge eigenvectors.
        let h = 1e-5 * path.duration;
        let (_, va) = frame(tm + h)?;
        let (_, vb) = frame(tm - h)?;
        let conn: Vec<f64> = (0..path.dim)
            .map(|c| {
                let z: c64 = (0..path.dim).map(|r| vm[(r, c)].conj() * (va[(r, c)] - vb[(r, c)])).sum::<c64>() / (2.0 * h);
                -z.im
            })
            .collect();
        let chi_rate: Vec<f64> = match row {
            GaugeRow::Kato | GaugeRow::KatoAgpOnly => vec![0.0; path.dim],
            GaugeRow::Dynamical => conn.clone(),
            GaugeRow::Periodic(l) => conn.iter().map(|a| a + 2.0 * PI * l as f64 / path.duration).collect(),
        };
        for c in 0..path.dim {
            gen += crate::numkernel::scale_real(
                (Mat::from_fn(path.dim, 1, |r, _| vm[(r, c)]) * Mat::from_fn(1, path.dim, |_, r| vm[(r, c)].conj())).as_ref(),
                chi_rate[c],
            );
        }
        let u = expm_antihermitian(&HermitianMatrix::symmetrized(gen), dt)?;
        psi = u.as_ref() * &psi;
        if include_h {
            phi += vals[level] * dt;
        }
        let (_, vn) = frame((j + 1) as f64 * dt)?;
        let step: c64 = (0..path.dim).map(|r| vn[(r, level)].conj() * prev[(r, level)]).sum();
        gamma -= step.im.atan2(step.re);
        let z: c64 = (0..path.dim).map(|r| vn[(r, level)].conj() * psi[(r, 0)]).sum();
        let a = -z.im.atan2(z.re);
        let mut da = a - last_arg;
        da -= 2.0 * PI * (da / (2.0 * PI)).round();
        measured += da;
        last_arg = a;
        prev = vn;
    }
    let chi = match row {
        GaugeRow::Kato | GaugeRow::KatoAgpOnly => 0.0,
        GaugeRow::Dynamical => -gamma,
        GaugeRow::Periodic(l) => -gamma + 2.0 * PI * l as f64,
    };
    let predicted = match row {
        GaugeRow::Kato => gamma + phi,
        GaugeRow::Dynamical => phi,
        GaugeRow::KatoAgpOnly => gamma,
        GaugeRow::Periodic(l) => 2.0 * PI * l as f64,
    };
    Ok(GaugePhases { measured, predicted, phi, gamma, chi })
}
