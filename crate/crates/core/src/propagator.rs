//! Time-ordered evolution `U(t1, t0)`.
//!
//! Continuous drives use one exponential per step of a fourth-order Magnus
//! generator, so every step still holds a single constant Hermitian matrix.
//! Kicked drives are propagated exactly segment by segment.

use std::borrow::Cow;

use faer::{c64, Mat, MatRef};

use crate::drives::{DriveForm, DriveProtocol};
use crate::error::{Error, Result};
use crate::numkernel::{cis, eigh_raw, identity, max_diff, ComplexMatrix, HermitianMatrix, UnitaryMatrix};

pub const DEFAULT_STEPS: usize = 128;
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 1 << 16;

/// Step-count policy for continuous drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    /// Steps per period (initial value when adaptive).
    pub steps: usize,
    /// Double `steps` until two successive monodromies agree within `tol`.
    pub adaptive: bool,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator { steps: DEFAULT_STEPS, adaptive: true, tol: DEFAULT_REFINE_TOL, max_steps: DEFAULT_MAX_STEPS }
    }
}

impl Integrator {
    pub fn fixed(steps: usize) -> Self {
        Integrator { steps, adaptive: false, ..Default::default() }
    }
}

/// Where the Hamiltonian of a step comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSource {
    /// Segment index of a kicked drive.
    Segment(usize),
    /// Fourth-order Magnus generator built from the two Gauss nodes of the step.
    Magnus,
}

/// One constant-Hamiltonian step of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub start: f64,
    pub dt: f64,
    pub source: StepSource,
}

impl Step {
    pub fn end(&self) -> f64 {
        self.start + self.dt
    }

    pub fn midpoint(&self) -> f64 {
        self.start + 0.5 * self.dt
    }

    /// Two-point Gauss-Legendre nodes of the step.
    pub fn gauss_nodes(&self) -> [f64; 2] {
        gauss_nodes(self.start, self.dt)
    }
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6

fn gauss_nodes(start: f64, dt: f64) -> [f64; 2] {
    [start + (0.5 - GAUSS_OFFSET) * dt, start + (0.5 + GAUSS_OFFSET) * dt]
}

/// `Ω/dt` with `exp(-iΩ) ≈ U(start + dt, start)` to fourth order:
/// `(H₁ + H₂)/2 - i(√3/12) dt [H₂, H₁]` at the Gauss nodes.
pub fn magnus_generator(d: &DriveProtocol, start: f64, dt: f64) -> Result<HermitianMatrix> {
    let [a, b] = gauss_nodes(start, dt);
    let h1 = d.hamiltonian(a)?.into_inner();
    let h2 = d.hamiltonian(b)?.into_inner();
    let c = crate::numkernel::mul(h2.as_ref(), h1.as_ref()) - crate::numkernel::mul(h1.as_ref(), h2.as_ref());
    let k = 3f64.sqrt() / 12.0 * dt;
    Ok(HermitianMatrix::symmetrized(Mat::from_fn(h1.nrows(), h1.ncols(), |i, j| {
        (h1[(i, j)] + h2[(i, j)]) * 0.5 + c[(i, j)] * c64::new(0.0, -k)
    })))
}

/// `exp(-iH τ)` applied to `x` for the first `τ` of `step` (`τ ≤ dt`).
pub fn apply_partial(d: &DriveProtocol, step: &Step, sp: &StepSpectrum<'_>, tau: f64, x: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    match step.source {
        StepSource::Segment(_) => Ok(sp.apply(tau, x)),
        StepSource::Magnus => {
            if tau <= 0.0 {
                return Ok(x.to_owned());
            }
            let g = magnus_generator(d, step.start, tau)?;
            let s = eigh_raw(g.as_ref())?;
            let sub = StepSpectrum { values: s.values, vectors: Cow::Owned(s.vectors) };
            Ok(sub.apply(tau, x))
        }
    }
}

/// Eigendecomposition of a step Hamiltonian (eigenvalues not necessarily sorted).
#[derive(Debug, Clone)]
pub struct StepSpectrum<'a> {
    pub values: Vec<f64>,
    pub vectors: Cow<'a, ComplexMatrix>,
}

impl StepSpectrum<'_> {
    /// `V diag(e^{-iλ dt}) V†`
    pub fn exp(&self, dt: f64) -> ComplexMatrix {
        let d: Vec<c64> = self.values.iter().map(|&l| cis(-l * dt)).collect();
        crate::numkernel::rebuild(self.vectors.as_ref().as_ref(), &d)
    }

    /// Apply `exp(-i H dt)` to the columns of `x`.
    pub fn apply(&self, dt: f64, x: MatRef<'_, c64>) -> ComplexMatrix {
        let v = self.vectors.as_ref().as_ref();
        let mut c = crate::numkernel::mul_adj_left(v, x);
        for (i, &l) in self.values.iter().enumerate() {
            let e = cis(-l * dt);
            for j in 0..c.ncols() {
                c[(i, j)] *= e;
            }
        }
        crate::numkernel::mul(v, c.as_ref())
    }
}

/// Constant-Hamiltonian steps covering `[t0, t1]`.
///
/// Continuous drives use steps of width `T / steps_per_period` anchored at `t0`,
/// with one shorter final step when the interval is not a whole number of steps.
pub fn schedule(d: &DriveProtocol, t0: f64, t1: f64, steps_per_period: usize) -> Result<Vec<Step>> {
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite t1 >= t0, got [{t0}, {t1}]")));
    }
    let period = d.period();
    let mut steps = Vec::new();
    if t1 == t0 {
        return Ok(steps);
    }
    match d.form() {
        DriveForm::Kicked(segs) => {
            let mut p = (t0 / period).floor();
            'outer: loop {
                let mut a = p * period;
                for (i, s) in segs.iter().enumerate() {
                    let b = if i + 1 == segs.len() { (p + 1.0) * period } else { a + s.fraction * period };
                    let lo = a.max(t0);
                    let hi = b.min(t1);
                    if hi > lo {
                        steps.push(Step { start: lo, dt: hi - lo, source: StepSource::Segment(i) });
                    }
                    if b >= t1 {
                        break 'outer;
                    }
                    a = b;
                }
                p += 1.0;
            }
        }
        _ => {
            if steps_per_period == 0 {
                return Err(Error::InvalidParameter("steps per period must be positive".into()));
            }
            let h = period / steps_per_period as f64;
            let ratio = (t1 - t0) / h;
            let mut full = ratio.floor() as usize;
            let near = ratio.round();
            if (ratio - near).abs() < 1e-9 * ratio.max(1.0) {
                full = near as usize;
            }
            for j in 0..full {
                steps.push(Step { start: t0 + j as f64 * h, dt: h, source: StepSource::Magnus });
            }
            let covered = full as f64 * h;
            let rest = (t1 - t0) - covered;
            if rest > 1e-12 * h {
                steps.push(Step { start: t0 + covered, dt: rest, source: StepSource::Magnus });
            } else if let Some(last) = steps.last_mut() {
                last.dt = t1 - last.start;
            }
        }
    }
    Ok(steps)
}

/// Spectrum of the Hamiltonian held during `step`.
pub fn step_spectrum<'a>(d: &'a DriveProtocol, step: &Step) -> Result<StepSpectrum<'a>> {
    match step.source {
        StepSource::Segment(i) => {
            let seg = &d.segments().ok_or_else(|| Error::InvalidParameter("segment step on a continuous drive".into()))?[i];
            let s = seg.generator.spectrum()?;
            Ok(StepSpectrum { values: s.values.iter().map(|&x| x * seg.scale).collect(), vectors: Cow::Borrowed(&s.vectors) })
        }
        StepSource::Magnus => {
            let h = magnus_generator(d, step.start, step.dt)?;
            let s = eigh_raw(h.as_ref())?;
            Ok(StepSpectrum { values: s.values, vectors: Cow::Owned(s.vectors) })
        }
    }
}

/// Step Hamiltonian as a dense matrix.
pub fn step_hamiltonian(d: &DriveProtocol, step: &Step) -> Result<ComplexMatrix> {
    match step.source {
        StepSource::Segment(i) => d
            .segments()
            .map(|s| s[i].hamiltonian())
            .ok_or_else(|| Error::InvalidParameter("segment step on a continuous drive".into())),
        StepSource::Magnus => magnus_generator(d, step.start, step.dt).map(|h| h.into_inner()),
    }
}

/// Evolve the columns of `states` through `steps`.
pub fn evolve_states(d: &DriveProtocol, steps: &[Step], states: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    let mut x = states.to_owned();
    for st in steps {
        let sp = step_spectrum(d, st)?;
        x = sp.apply(st.dt, x.as_ref());
    }
    Ok(x)
}

/// Evolve `x0` from `t0` and record it at each of the sorted `times` (all `>= t0`).
///
/// The step grid is the one `schedule` would build for `[t0, times.last()]`;
/// sample times inside a step get a partial step with that step's Hamiltonian.
pub fn evolve_sampled(
    d: &DriveProtocol,
    t0: f64,
    times: &[f64],
    steps_per_period: usize,
    x0: MatRef<'_, c64>,
) -> Result<Vec<ComplexMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&t_last) = times.last() else {
        return Ok(out);
    };
    if times.windows(2).any(|w| w[1] < w[0]) || times[0] < t0 {
        return Err(Error::InvalidParameter("sample times must be sorted and not before t0".into()));
    }
    let sched = schedule(d, t0, t_last, steps_per_period)?;
    let mut x = x0.to_owned();
    let mut k = 0;
    while k < times.len() && times[k] <= t0 {
        out.push(x.clone());
        k += 1;
    }
    for st in &sched {
        let sp = step_spectrum(d, st)?;
        while k < times.len() && times[k] < st.end() {
            out.push(apply_partial(d, st, &sp, times[k] - st.start, x.as_ref())?);
            k += 1;
        }
        x = sp.apply(st.dt, x.as_ref());
    }
    while out.len() < times.len() {
        out.push(x.clone());
    }
    Ok(out)
}

fn product(d: &DriveProtocol, steps: &[Step]) -> Result<ComplexMatrix> {
    let mut u = identity(d.dim());
    for st in steps {
        let sp = step_spectrum(d, st)?;
        u = sp.apply(st.dt, u.as_ref());
    }
    if !crate::numkernel::all_finite(u.as_ref()) {
        return Err(Error::NonFinite { context: "propagator" });
    }
    Ok(u)
}

/// `U(t1, t0)` with `steps` uniform midpoint steps over the interval (ignored for kicked drives).
pub fn propagate(d: &DriveProtocol, t0: f64, t1: f64, steps: usize) -> Result<UnitaryMatrix> {
    let sched = if d.is_piecewise_constant() {
        schedule(d, t0, t1, 1)?
    } else {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidParameter(format!("need finite t1 >= t0, got [{t0}, {t1}]")));
        }
        uniform(t0, t1, steps)
    };
    Ok(UnitaryMatrix::unchecked(product(d, &sched)?))
}

fn uniform(t0: f64, t1: f64, n: usize) -> Vec<Step> {
    let h = (t1 - t0) / n as f64;
    (0..n)
        .map(|j| {
            let s = t0 + j as f64 * h;
            let e = if j + 1 == n { t1 } else { t0 + (j + 1) as f64 * h };
            Step { start: s, dt: e - s, source: StepSource::Magnus }
        })
        .collect()
}

/// `U(t1, t0)` on the period-anchored grid with `steps_per_period` steps per period.
pub fn propagate_grid(d: &DriveProtocol, t0: f64, t1: f64, steps_per_period: usize) -> Result<UnitaryMatrix> {
    let sched = schedule(d, t0, t1, steps_per_period)?;
    Ok(UnitaryMatrix::unchecked(product(d, &sched)?))
}

/// One-period propagator `U(t0 + T, t0)`.
pub fn monodromy(d: &DriveProtocol, t0: f64, steps: usize) -> Result<UnitaryMatrix> {
    propagate_grid(d, t0, t0 + d.period(), steps.max(1))
}

/// A monodromy together with the step count that produced it.
#[derive(Debug, Clone)]
pub struct Monodromy {
    pub u: UnitaryMatrix,
    /// Steps per period used (1 for kicked drives, meaning exact).
    pub steps: usize,
    /// Max-norm difference to the previous refinement (0 when exact).
    pub refinement: f64,
    pub converged: bool,
}

/// Monodromy at `t0` with the step count chosen by `integ`.
pub fn monodromy_with(d: &DriveProtocol, t0: f64, integ: &Integrator) -> Result<Monodromy> {
    if d.is_piecewise_constant() {
        return Ok(Monodromy { u: monodromy(d, t0, 1)?, steps: 1, refinement: 0.0, converged: true });
    }
    if integ.steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let mut n = integ.steps;
    let mut u = monodromy(d, t0, n)?;
    if !integ.adaptive {
        return Ok(Monodromy { u, steps: n, refinement: f64::NAN, converged: true });
    }
    loop {
        let n2 = 2 * n;
        let u2 = monodromy(d, t0, n2)?;
        let diff = max_diff(u.as_ref(), u2.as_ref());
        if diff < integ.tol || n2 >= integ.max_steps {
            return Ok(Monodromy { u: u2, steps: n2, refinement: diff, converged: diff < integ.tol });
        }
        n = n2;
        u = u2;
    }
}

/// Max-norm of `U(T,0)` differences between `n` and `2n` steps.
pub fn refinement_error(d: &DriveProtocol, t0: f64, n: usize) -> Result<f64> {
    let a = monodromy(d, t0, n)?;
    let b = monodromy(d, t0, 2 * n)?;
    Ok(max_diff(a.as_ref(), b.as_ref()))
}
