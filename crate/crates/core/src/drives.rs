//! Time-periodic drive protocols and the model zoo.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::{cis, cplx, eigh, ComplexMatrix, HermitianMatrix, HermitianSpectrum};

/// Largest spin chain accepted by default (dense `2^L` matrices).
pub const DEFAULT_MAX_SPINS: usize = 14;

/// A fixed Hermitian generator with a lazily cached eigendecomposition.
///
/// Shared between segments and between protocols of a sweep, so that the
/// decomposition is computed once per generator.
#[derive(Debug)]
pub struct Generator {
    h: HermitianMatrix,
    spectrum: OnceLock<HermitianSpectrum>,
}

impl Generator {
    pub fn new(h: HermitianMatrix) -> Arc<Self> {
        Arc::new(Generator { h, spectrum: OnceLock::new() })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn spectrum(&self) -> Result<&HermitianSpectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = eigh(&self.h)?;
        let _ = self.spectrum.set(s);
        Ok(self.spectrum.get().expect("spectrum just set"))
    }
}

/// One piece of a kicked drive: Hamiltonian `scale * generator` held for `fraction * T`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub generator: Arc<Generator>,
    pub scale: f64,
    pub fraction: f64,
}

impl Segment {
    pub fn new(generator: Arc<Generator>, scale: f64, fraction: f64) -> Self {
        Segment { generator, scale, fraction }
    }

    pub fn hamiltonian(&self) -> ComplexMatrix {
        crate::numkernel::scale_real(self.generator.matrix().as_ref(), self.scale)
    }
}

pub type SampledFn = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

#[derive(Clone)]
pub enum DriveForm {
    /// `H(t) = Σ_ℓ e^{iℓωt} H_ℓ`
    Fourier(Vec<(i32, ComplexMatrix)>),
    /// Arbitrary smooth rule evaluated on demand.
    Sampled(SampledFn),
    /// Piecewise-constant segments in time order.
    Kicked(Vec<Segment>),
}

impl fmt::Debug for DriveForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriveForm::Fourier(h) => {
                let ls: Vec<i32> = h.iter().map(|(l, _)| *l).collect();
                write!(f, "Fourier{ls:?}")
            }
            DriveForm::Sampled(_) => write!(f, "Sampled"),
            DriveForm::Kicked(s) => {
                let fr: Vec<f64> = s.iter().map(|x| x.fraction).collect();
                write!(f, "Kicked{fr:?}")
            }
        }
    }
}

/// A time-periodic Hamiltonian `H(t) = H(t + T)`.
#[derive(Debug, Clone)]
pub struct DriveProtocol {
    name: String,
    period: f64,
    dim: usize,
    form: DriveForm,
    symmetry: Option<Arc<ComplexMatrix>>,
}

impl DriveProtocol {
    pub fn fourier(name: impl Into<String>, period: f64, harmonics: Vec<(i32, ComplexMatrix)>) -> Result<Self> {
        check_period(period)?;
        let dim = harmonics
            .first()
            .map(|(_, m)| m.nrows())
            .ok_or_else(|| Error::InvalidParameter("no harmonics supplied".into()))?;
        for (l, m) in &harmonics {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
            }
            let partner = harmonics.iter().find(|(k, _)| *k == -*l).map(|(_, m)| m);
            let dev = match partner {
                Some(p) => crate::numkernel::max_diff(m.as_ref(), crate::numkernel::dagger(p.as_ref()).as_ref()),
                None => crate::numkernel::max_abs(m.as_ref()),
            };
            let scale = crate::numkernel::max_abs(m.as_ref()).max(1.0);
            if dev > 1e-12 * scale {
                return Err(Error::NotHermitian { deviation: dev, bound: 1e-12 * scale });
            }
        }
        Ok(DriveProtocol { name: name.into(), period, dim, form: DriveForm::Fourier(harmonics), symmetry: None })
    }

    pub fn sampled(name: impl Into<String>, period: f64, dim: usize, f: SampledFn) -> Result<Self> {
        check_period(period)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(DriveProtocol { name: name.into(), period, dim, form: DriveForm::Sampled(f), symmetry: None })
    }

    pub fn kicked(name: impl Into<String>, period: f64, segments: Vec<Segment>) -> Result<Self> {
        check_period(period)?;
        let dim = segments
            .first()
            .map(|s| s.generator.matrix().dim())
            .ok_or_else(|| Error::InvalidParameter("no segments supplied".into()))?;
        let mut total = 0.0;
        for s in &segments {
            if s.generator.matrix().dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.generator.matrix().dim() });
            }
            if !(s.fraction > 0.0) || !s.scale.is_finite() {
                return Err(Error::InvalidParameter(format!("bad segment fraction {} / scale {}", s.fraction, s.scale)));
            }
            total += s.fraction;
        }
        if (total - 1.0).abs() > 4.0 * f64::EPSILON * segments.len() as f64 {
            return Err(Error::InvalidParameter(format!("segment fractions sum to {total}, not 1")));
        }
        Ok(DriveProtocol { name: name.into(), period, dim, form: DriveForm::Kicked(segments), symmetry: None })
    }

    /// A time-independent Hamiltonian viewed as a drive of period `period`.
    pub fn constant(name: impl Into<String>, h: HermitianMatrix, period: f64) -> Result<Self> {
        Self::kicked(name, period, vec![Segment::new(Generator::new(h), 1.0, 1.0)])
    }

    /// Declare a unitary symmetry commuting with the monodromy (used to fix degenerate bases).
    pub fn with_symmetry(mut self, op: ComplexMatrix) -> Result<Self> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: op.nrows() });
        }
        self.symmetry = Some(Arc::new(op));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &DriveForm {
        &self.form
    }

    pub fn symmetry(&self) -> Option<&ComplexMatrix> {
        self.symmetry.as_deref()
    }

    pub fn segments(&self) -> Option<&[Segment]> {
        match &self.form {
            DriveForm::Kicked(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.form, DriveForm::Kicked(_))
    }

    pub fn harmonics(&self) -> Option<&[(i32, ComplexMatrix)]> {
        match &self.form {
            DriveForm::Fourier(h) => Some(h),
            _ => None,
        }
    }

    /// Largest harmonic index present in an exact Fourier form.
    pub fn max_harmonic(&self) -> Option<usize> {
        self.harmonics().map(|h| h.iter().map(|(l, _)| l.unsigned_abs() as usize).max().unwrap_or(0))
    }

    /// Index of the segment containing time `t` (reduced modulo the period) and the segment start.
    pub fn segment_at(&self, t: f64) -> Option<(usize, f64)> {
        let segs = self.segments()?;
        let tau = t.rem_euclid(self.period);
        let mut start = 0.0;
        for (i, s) in segs.iter().enumerate() {
            let end = start + s.fraction * self.period;
            if tau < end || i + 1 == segs.len() {
                return Some((i, start));
            }
            start = end;
        }
        None
    }

    /// Raw `H(t)` (symmetrized).
    pub fn hamiltonian_matrix(&self, t: f64) -> ComplexMatrix {
        match &self.form {
            DriveForm::Fourier(h) => {
                let w = self.omega();
                let ph: Vec<c64> = h.iter().map(|(l, _)| cis(*l as f64 * w * t)).collect();
                let acc = Mat::from_fn(self.dim, self.dim, |i, j| h.iter().zip(&ph).map(|((_, m), e)| m[(i, j)] * e).sum());
                HermitianMatrix::symmetrized(acc).into_inner()
            }
            DriveForm::Sampled(f) => HermitianMatrix::symmetrized(f(t.rem_euclid(self.period))).into_inner(),
            DriveForm::Kicked(s) => {
                let (i, _) = self.segment_at(t).expect("kicked drive has segments");
                s[i].hamiltonian()
            }
        }
    }

    /// `H(t)` with finiteness validation.
    pub fn hamiltonian(&self, t: f64) -> Result<HermitianMatrix> {
        let m = self.hamiltonian_matrix(t);
        if !crate::numkernel::all_finite(m.as_ref()) {
            return Err(Error::NonFinite { context: "drive Hamiltonian sample" });
        }
        Ok(HermitianMatrix::symmetrized(m))
    }

    /// `∂_t H(t)`; exact for Fourier forms, central differences otherwise (zero inside kicked segments).
    pub fn hamiltonian_derivative(&self, t: f64) -> ComplexMatrix {
        match &self.form {
            DriveForm::Fourier(h) => {
                let w = self.omega();
                let mut acc = Mat::<c64>::zeros(self.dim, self.dim);
                for (l, m) in h {
                    let e = cplx(0.0, *l as f64 * w) * cis(*l as f64 * w * t);
                    acc += crate::numkernel::scale(m.as_ref(), e);
                }
                acc
            }
            DriveForm::Sampled(_) => {
                let d = 1e-5 * self.period;
                let a = self.hamiltonian_matrix(t + d);
                let b = self.hamiltonian_matrix(t - d);
                crate::numkernel::scale_real((a - b).as_ref(), 0.5 / d)
            }
            DriveForm::Kicked(_) => Mat::zeros(self.dim, self.dim),
        }
    }
}

fn check_period(period: f64) -> Result<()> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidParameter(format!("period must be positive and finite, got {period}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spin-1/2 chain operators. Site n is bit (L-1-n) of the basis index, matching
// the Kronecker ordering σ_0 ⊗ σ_1 ⊗ ... ⊗ σ_{L-1}.

pub mod spin {
    use super::*;

    fn bit(l: usize, n: usize) -> usize {
        1usize << (l - 1 - n)
    }

    fn z(l: usize, n: usize, s: usize) -> f64 {
        if s & bit(l, n) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn check_size(l: usize, max: usize) -> Result<()> {
        if l < 1 {
            return Err(Error::InvalidParameter("chain needs at least one spin".into()));
        }
        if l > max {
            return Err(Error::Resource(format!("L = {l} exceeds the configured maximum of {max} spins")));
        }
        Ok(())
    }

    /// Diagonal operator from a function of the basis index.
    pub fn diagonal(l: usize, f: impl Fn(usize) -> f64) -> ComplexMatrix {
        let d = 1usize << l;
        let mut m = Mat::<c64>::zeros(d, d);
        for s in 0..d {
            m[(s, s)] = cplx(f(s), 0.0);
        }
        m
    }

    /// `σ^z_n` eigenvalue (+1 for spin up, bit clear) of basis state `s`.
    pub fn sz_value(l: usize, n: usize, s: usize) -> f64 {
        z(l, n, s)
    }

    pub fn sigma_z(l: usize, n: usize) -> ComplexMatrix {
        diagonal(l, |s| z(l, n, s))
    }

    pub fn sigma_x(l: usize, n: usize) -> ComplexMatrix {
        let d = 1usize << l;
        let mut m = Mat::<c64>::zeros(d, d);
        for s in 0..d {
            m[(s ^ bit(l, n), s)] = cplx(1.0, 0.0);
        }
        m
    }

    pub fn sigma_zz(l: usize, a: usize, b: usize) -> ComplexMatrix {
        diagonal(l, |s| z(l, a, s) * z(l, b, s))
    }

    /// `Σ_n c_n σ^x_n`
    pub fn sum_sigma_x(l: usize, coeff: f64) -> ComplexMatrix {
        let d = 1usize << l;
        let mut m = Mat::<c64>::zeros(d, d);
        for s in 0..d {
            for n in 0..l {
                m[(s ^ bit(l, n), s)] += cplx(coeff, 0.0);
            }
        }
        m
    }

    /// Global spin flip `Π_n σ^x_n`.
    pub fn global_flip(l: usize) -> ComplexMatrix {
        let d = 1usize << l;
        let mut m = Mat::<c64>::zeros(d, d);
        for s in 0..d {
            m[((d - 1) ^ s, s)] = cplx(1.0, 0.0);
        }
        m
    }

    /// Computational basis vector.
    pub fn basis_state(l: usize, s: usize) -> ComplexMatrix {
        let mut v = Mat::<c64>::zeros(1usize << l, 1);
        v[(s, 0)] = cplx(1.0, 0.0);
        v
    }
}

// ---------------------------------------------------------------------------
// Two-level XY Bloch Hamiltonian.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XYBlochParams {
    pub g: f64,
    pub j: f64,
    pub a: f64,
    pub omega: f64,
    pub k: f64,
}

impl XYBlochParams {
    pub fn delta_k(&self) -> f64 {
        self.g + self.j * self.k.cos()
    }

    pub fn a_k(&self) -> f64 {
        self.a * self.k.sin()
    }

    /// Rotating-frame level splitting `ε_k`, positive root.
    pub fn eps(&self) -> f64 {
        let dw = self.delta_k() - self.omega;
        (dw * dw + self.a_k().powi(2)).sqrt()
    }

    /// `(Δ_k - ω) Δ_k + A_k²`, the signed Kato prefactor.
    pub fn eps_k_sq(&self) -> f64 {
        let d = self.delta_k();
        (d - self.omega) * d + self.a_k().powi(2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        for (name, v) in [("g", self.g), ("J", self.j), ("A", self.a), ("k", self.k)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

pub fn pauli(which: char) -> ComplexMatrix {
    let z = cplx(0.0, 0.0);
    let one = cplx(1.0, 0.0);
    let i = cplx(0.0, 1.0);
    let e = match which {
        'x' => [[z, one], [one, z]],
        'y' => [[z, -i], [i, z]],
        'z' => [[one, z], [z, -one]],
        _ => [[one, z], [z, one]],
    };
    Mat::from_fn(2, 2, |r, c| e[r][c])
}

/// `τ^α = σ^α / 2`
pub fn tau(which: char) -> ComplexMatrix {
    crate::numkernel::scale_real(pauli(which).as_ref(), 0.5)
}

/// `cos(ωt) τ^x + sin(ωt) τ^y`
fn tau_perp(omega: f64, t: f64) -> ComplexMatrix {
    let c = (omega * t).cos();
    let s = (omega * t).sin();
    crate::numkernel::scale_real(tau('x').as_ref(), c) + crate::numkernel::scale_real(tau('y').as_ref(), s)
}

fn combo(cz: f64, cp: f64, omega: f64, t: f64) -> HermitianMatrix {
    let m = crate::numkernel::scale_real(tau('z').as_ref(), cz) + crate::numkernel::scale_real(tau_perp(omega, t).as_ref(), cp);
    HermitianMatrix::symmetrized(m)
}

/// `h(k,t) = Δ_k τ^z + A_k [cos ωt τ^x + sin ωt τ^y]` in exact Fourier form.
pub fn xy_bloch(p: &XYBlochParams) -> Result<DriveProtocol> {
    p.validate()?;
    let d = p.delta_k();
    let ak = p.a_k();
    let h0 = crate::numkernel::scale_real(tau('z').as_ref(), d);
    let mut hp = Mat::<c64>::zeros(2, 2);
    hp[(1, 0)] = cplx(0.5 * ak, 0.0);
    let mut hm = Mat::<c64>::zeros(2, 2);
    hm[(0, 1)] = cplx(0.5 * ak, 0.0);
    DriveProtocol::fourier(format!("xy(k={:.6})", p.k), 2.0 * PI / p.omega, vec![(-1, hm), (0, h0), (1, hp)])
}

/// Closed-form Floquet and Kato decompositions of the XY Bloch drive at time `t`.
#[derive(Debug, Clone)]
pub struct XYClosedForms {
    pub h_f: HermitianMatrix,
    pub a_f: HermitianMatrix,
    pub h_k: HermitianMatrix,
    pub a_k: HermitianMatrix,
    pub eps: f64,
    pub eps_k_sq: f64,
}

impl XYClosedForms {
    /// Quasienergies `±(ε - ω)/2`, ascending.
    pub fn quasienergies(&self, omega: f64) -> [f64; 2] {
        let q = 0.5 * (self.eps - omega).abs();
        [-q, q]
    }

    /// Kato energies `±ε_K²/(2ε)`, ascending.
    pub fn kato_energies(&self) -> [f64; 2] {
        let q = 0.5 * (self.eps_k_sq / self.eps).abs();
        [-q, q]
    }
}

pub fn xy_closed_forms(p: &XYBlochParams, t: f64) -> Result<XYClosedForms> {
    p.validate()?;
    let eps = p.eps();
    if eps == 0.0 {
        return Err(Error::Degenerate(format!(
            "rotating-frame Hamiltonian vanishes (Δ_k = ω = {}, A_k = 0)",
            p.omega
        )));
    }
    let w = p.omega;
    let dw = p.delta_k() - w;
    let ak = p.a_k();
    let ek2 = p.eps_k_sq();
    Ok(XYClosedForms {
        h_f: combo((eps - w) * dw / eps, (eps - w) * ak / eps, w, t),
        a_f: combo(w * (1.0 + dw / eps), w * ak / eps, w, t),
        h_k: combo(ek2 / eps * dw / eps, ek2 / eps * ak / eps, w, t),
        a_k: combo(ak * w / eps * ak / eps, -ak * w / eps * dw / eps, w, t),
        eps,
        eps_k_sq: ek2,
    })
}

/// Exact propagator `U(t,0) = exp(-iωtτ^z) exp(-it h_rot)` with `h_rot = (Δ_k-ω)τ^z + A_k τ^x`.
pub fn xy_exact_propagator(p: &XYBlochParams, t: f64) -> Result<ComplexMatrix> {
    let v1 = crate::numkernel::expm_antihermitian(&HermitianMatrix::symmetrized(tau('z')), p.omega * t)?;
    let hrot = crate::numkernel::scale_real(tau('z').as_ref(), p.delta_k() - p.omega)
        + crate::numkernel::scale_real(tau('x').as_ref(), p.a_k());
    let v2 = crate::numkernel::expm_antihermitian(&HermitianMatrix::symmetrized(hrot), t)?;
    Ok(v1.as_ref() * v2.as_ref())
}

// ---------------------------------------------------------------------------
// Kicked mixed-field Ising chain.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickedMFIParams {
    pub l: usize,
    pub j: f64,
    pub g: f64,
    pub h: f64,
    pub period: f64,
}

/// Generators of the kicked mixed-field Ising chain, reusable across periods.
#[derive(Debug, Clone)]
pub struct KickedMFI {
    pub l: usize,
    /// `-Σ (J/4 σ^zσ^z + h/2 σ^z)` with periodic boundary.
    pub h1: Arc<Generator>,
    /// `-g/2 Σ σ^x`
    pub h2: Arc<Generator>,
}

impl KickedMFI {
    pub fn new(l: usize, j: f64, g: f64, h: f64) -> Result<Self> {
        Self::with_max(l, j, g, h, DEFAULT_MAX_SPINS)
    }

    pub fn with_max(l: usize, j: f64, g: f64, h: f64, max_spins: usize) -> Result<Self> {
        spin::check_size(l, max_spins)?;
        if l < 2 {
            return Err(Error::InvalidParameter("kicked Ising chain needs L >= 2".into()));
        }
        let h1 = spin::diagonal(l, |s| {
            let mut e = 0.0;
            for n in 0..l {
                let zn = spin::sz_value(l, n, s);
                let zm = spin::sz_value(l, (n + 1) % l, s);
                e -= 0.25 * j * zn * zm + 0.5 * h * zn;
            }
            e
        });
        let h2 = spin::sum_sigma_x(l, -0.5 * g);
        Ok(KickedMFI {
            l,
            h1: Generator::new(HermitianMatrix::symmetrized(h1)),
            h2: Generator::new(HermitianMatrix::symmetrized(h2)),
        })
    }

    /// Segments (H_1, T/4), (H_2, T/2), (H_1, T/4).
    pub fn protocol(&self, period: f64) -> Result<DriveProtocol> {
        DriveProtocol::kicked(
            format!("kicked_mfi(L={},T={period})", self.l),
            period,
            vec![
                Segment::new(self.h1.clone(), 1.0, 0.25),
                Segment::new(self.h2.clone(), 1.0, 0.5),
                Segment::new(self.h1.clone(), 1.0, 0.25),
            ],
        )
    }

    /// Period-averaged Hamiltonian `(H_1 + H_2)/2`.
    pub fn average_hamiltonian(&self) -> HermitianMatrix {
        let m = crate::numkernel::scale_real((self.h1.matrix().matrix() + self.h2.matrix().matrix()).as_ref(), 0.5);
        HermitianMatrix::symmetrized(m)
    }
}

pub fn kicked_mfi(p: &KickedMFIParams) -> Result<DriveProtocol> {
    KickedMFI::new(p.l, p.j, p.g, p.h)?.protocol(p.period)
}

// ---------------------------------------------------------------------------
// Disordered discrete-time-crystal chain.

#[derive(Debug, Clone, PartialEq)]
pub struct DTCParams {
    pub l: usize,
    pub j: f64,
    /// Disorder half-width: `η_i` uniform in `[-disorder, disorder]`.
    pub disorder: f64,
    pub theta_x: f64,
    pub period: f64,
    pub seed: u64,
}

/// Fraction of the period spent in the kick segment.
pub const DTC_KICK_FRACTION: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct DTCChain {
    pub l: usize,
    /// Bond couplings `J_i = J(1 + η_i)`, open chain.
    pub couplings: Vec<f64>,
    /// `Σ J_i σ^z_i σ^z_{i+1}`
    pub h_int: Arc<Generator>,
    /// `Σ σ^x / 2`
    pub h_x: Arc<Generator>,
    /// `Π σ^x`
    pub flip: Arc<ComplexMatrix>,
}

impl DTCChain {
    pub fn new(l: usize, j: f64, disorder: f64, seed: u64) -> Result<Self> {
        spin::check_size(l, DEFAULT_MAX_SPINS)?;
        if l < 2 {
            return Err(Error::InvalidParameter("DTC chain needs L >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let couplings: Vec<f64> = (0..l - 1)
            .map(|_| {
                let eta: f64 = if disorder > 0.0 { rng.random_range(-disorder..=disorder) } else { 0.0 };
                j * (1.0 + eta)
            })
            .collect();
        Self::from_couplings(l, couplings)
    }

    pub fn from_couplings(l: usize, couplings: Vec<f64>) -> Result<Self> {
        if couplings.len() + 1 != l {
            return Err(Error::DimensionMismatch { expected: l - 1, found: couplings.len() });
        }
        let h_int = spin::diagonal(l, |s| {
            (0..l - 1).map(|i| couplings[i] * spin::sz_value(l, i, s) * spin::sz_value(l, i + 1, s)).sum()
        });
        Ok(DTCChain {
            l,
            couplings,
            h_int: Generator::new(HermitianMatrix::symmetrized(h_int)),
            h_x: Generator::new(HermitianMatrix::symmetrized(spin::sum_sigma_x(l, 0.5))),
            flip: Arc::new(spin::global_flip(l)),
        })
    }

    /// `U_F = exp(-iθ_x H_x) exp(-iT H_int)`: interaction segment first, then the kick.
    pub fn protocol(&self, theta_x: f64, period: f64) -> Result<DriveProtocol> {
        let f = DTC_KICK_FRACTION;
        let d = DriveProtocol::kicked(
            format!("dtc(L={},theta_x={theta_x},T={period})", self.l),
            period,
            vec![
                Segment::new(self.h_int.clone(), 1.0 / (1.0 - f), 1.0 - f),
                Segment::new(self.h_x.clone(), theta_x / (f * period), f),
            ],
        )?;
        d.with_symmetry((*self.flip).clone())
    }

    /// `P_x = exp(-iπ H_x) = (-i)^L Π σ^x`
    pub fn parity_operator(&self) -> ComplexMatrix {
        let phase = cis(-0.5 * PI * self.l as f64);
        crate::numkernel::scale(self.flip.as_ref().as_ref(), phase)
    }
}

pub fn dtc_chain(p: &DTCParams) -> Result<DriveProtocol> {
    DTCChain::new(p.l, p.j, p.disorder, p.seed)?.protocol(p.theta_x, p.period)
}

// ---------------------------------------------------------------------------
// Anomalous Floquet topological insulators on a cylinder (open in y).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AFTIHexParams {
    pub lx: usize,
    pub ly: usize,
    pub j: f64,
    pub f: f64,
    pub omega: f64,
}

impl AFTIHexParams {
    /// Allowed momenta `2π m / L_x` in (-π, π].
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.lx;
        let mut ks: Vec<f64> = (0..n).map(|m| crate::numkernel::wrap_phase(2.0 * PI * m as f64 / n as f64)).collect();
        ks.sort_by(f64::total_cmp);
        ks
    }
}

/// Hopping amplitude `J_n(t) = J exp[F cos(ωt + φ_n)]`, `φ_n = (n-1)2π/3`.
pub fn afti_hex_hopping(p: &AFTIHexParams, n: usize, t: f64) -> f64 {
    let phi = (n as f64 - 1.0) * 2.0 * PI / 3.0;
    p.j * (p.f * (p.omega * t + phi).cos()).exp()
}

/// Bloch hopping matrix at `k_x`; basis index `2y + s` with `s = 0` for A, `1` for B.
pub fn afti_hex_matrix(p: &AFTIHexParams, kx: f64, t: f64) -> ComplexMatrix {
    let ly = p.ly;
    let j1 = afti_hex_hopping(p, 1, t);
    let j2 = afti_hex_hopping(p, 2, t);
    let j3 = afti_hex_hopping(p, 3, t);
    let mut m = Mat::<c64>::zeros(2 * ly, 2 * ly);
    for y in 0..ly {
        let a = 2 * y;
        let b = 2 * y + 1;
        let v = cplx(j3, 0.0) + cis(kx) * j2;
        m[(b, a)] += v;
        m[(a, b)] += v.conj();
        if y >= 1 {
            let a_prev = 2 * (y - 1);
            m[(b, a_prev)] += cplx(j1, 0.0);
            m[(a_prev, b)] += cplx(j1, 0.0);
        }
    }
    m
}

pub fn afti_hex(p: &AFTIHexParams, kx: f64) -> Result<DriveProtocol> {
    if p.lx < 2 || p.ly < 2 {
        return Err(Error::InvalidParameter("AFTI cylinder needs L_x, L_y >= 2".into()));
    }
    if !(p.omega > 0.0) {
        return Err(Error::InvalidParameter("omega must be positive".into()));
    }
    let params = *p;
    DriveProtocol::sampled(
        format!("afti_hex(kx={kx:.6})"),
        2.0 * PI / p.omega,
        2 * p.ly,
        Arc::new(move |t| afti_hex_matrix(&params, kx, t)),
    )
}

/// Sublattice/row weight of a state on the first and last `width` rows of the cylinder.
pub fn cylinder_edge_weight(state: faer::ColRef<'_, c64>, ly: usize, width: usize) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for y in 0..ly {
        let w = state[2 * y].norm_sqr() + state[2 * y + 1].norm_sqr();
        if y < width {
            lo += w;
        }
        if y + width >= ly {
            hi += w;
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AFTIRudnerParams {
    pub mu: f64,
    pub j: f64,
    pub b: f64,
    pub a: f64,
    pub delta0: f64,
    pub omega: f64,
    pub ly: usize,
}

pub fn afti_rudner(p: &AFTIRudnerParams, kx: f64) -> Result<DriveProtocol> {
    if !(p.omega > 0.0) {
        return Err(Error::InvalidParameter("omega must be positive".into()));
    }
    if p.ly < 2 {
        return Err(Error::InvalidParameter("cylinder needs L_y >= 2".into()));
    }
    let ly = p.ly;
    let sx = pauli('x');
    let sy = pauli('y');
    let sz = pauli('z');
    let sc = |m: &ComplexMatrix, s: c64| crate::numkernel::scale(m.as_ref(), s);
    let onsite = sc(&sx, cplx(p.a * kx.sin(), 0.0))
        + sc(&sz, cplx((p.mu - p.j) - 2.0 * p.b * (2.0 - kx.cos()), 0.0));
    let hop = sc(&sy, cplx(0.0, -0.5 * p.a)) + sc(&sz, cplx(0.5 * (2.0 * p.b + p.j * kx.cos()), 0.0));
    let d = 2 * ly;
    let mut h0 = Mat::<c64>::zeros(d, d);
    let mut h1 = Mat::<c64>::zeros(d, d);
    for y in 0..ly {
        for r in 0..2 {
            for c in 0..2 {
                h0[(2 * y + r, 2 * y + c)] = onsite[(r, c)];
                h1[(2 * y + r, 2 * y + c)] = cplx(0.5 * p.delta0 * sz[(r, c)].re, 0.0);
                if y + 1 < ly {
                    h0[(2 * y + r, 2 * (y + 1) + c)] = hop[(r, c)];
                    h0[(2 * (y + 1) + c, 2 * y + r)] = hop[(r, c)].conj();
                }
            }
        }
    }
    DriveProtocol::fourier(format!("afti_rudner(kx={kx:.6})"), 2.0 * PI / p.omega, vec![(-1, h1.clone()), (0, h0), (1, h1)])
}

// ---------------------------------------------------------------------------
// Registry.

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// (parameter, default, meaning)
    pub params: &'static [(&'static str, &'static str, &'static str)],
}

pub fn registry() -> Vec<ModelInfo> {
    vec![
        ModelInfo {
            name: "xy",
            summary: "circularly driven XY chain, two-level Bloch Hamiltonian per momentum",
            params: &[
                ("g", "1.0", "transverse field"),
                ("J", "0.5", "exchange"),
                ("A", "2.5", "drive amplitude"),
                ("omega", "10.0", "drive frequency"),
                ("k", "0.19634954084936207", "quasi-momentum"),
            ],
        },
        ModelInfo {
            name: "kicked_mfi",
            summary: "kicked mixed-field Ising chain, U1 U2 U1, periodic boundary",
            params: &[
                ("L", "8", "spins"),
                ("J", "1.0", "Ising coupling"),
                ("g", "1.0", "transverse field"),
                ("h", "1.0", "longitudinal field"),
                ("T", "0.1", "period"),
            ],
        },
        ModelInfo {
            name: "dtc",
            summary: "disordered Ising chain with global x kick, open boundary",
            params: &[
                ("L", "8", "spins"),
                ("J", "1.0", "mean coupling"),
                ("disorder", "0.5", "half-width of relative coupling disorder"),
                ("theta_x", "3.141592653589793", "kick angle"),
                ("T", "0.05", "period"),
                ("seed", "7", "disorder seed"),
            ],
        },
        ModelInfo {
            name: "afti_hex",
            summary: "chirally modulated honeycomb hopping on a cylinder, one Bloch block per k_x",
            params: &[
                ("Lx", "100", "cells along the periodic direction"),
                ("Ly", "20", "cells along the open direction"),
                ("J", "1.0", "hopping scale"),
                ("F", "2.0", "modulation strength"),
                ("omega", "8.7", "drive frequency"),
            ],
        },
        ModelInfo {
            name: "afti_rudner",
            summary: "two-band d-vector model with oscillating mass on a cylinder",
            params: &[
                ("mu", "1.0", "energy unit"),
                ("J", "1.5", "diagonal hopping"),
                ("b", "1.5", "band curvature"),
                ("a", "4.0", "spin-orbit amplitude"),
                ("delta0", "1.0", "mass modulation"),
                ("omega", "14.285714285714286", "drive frequency"),
                ("Ly", "20", "cells along the open direction"),
                ("Lx", "100", "cells along the periodic direction"),
            ],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{kron, max_abs, max_diff};

    fn resonance_line(k: f64) -> XYBlochParams {
        XYBlochParams { g: 1.0, j: 0.5, a: 2.5, omega: 10.0, k }
    }

    #[test]
    fn xy_k_zero_is_static() {
        let d = xy_bloch(&resonance_line(0.0)).unwrap();
        let h0 = d.hamiltonian_matrix(0.0);
        let h1 = d.hamiltonian_matrix(0.3);
        assert!(max_diff(h0.as_ref(), h1.as_ref()) < 1e-15);
        assert!((h0[(0, 0)].re - 0.75).abs() < 1e-15);
    }

    #[test]
    fn xy_resonance_parameter_line() {
        let p = resonance_line(PI / 16.0);
        assert!((p.delta_k() - 1.49039).abs() < 1e-5);
        assert!((p.a_k() - 0.48773).abs() < 1e-5);
    }

    #[test]
    fn xy_closed_form_static_limit() {
        let mut p = resonance_line(0.7);
        p.a = 0.0;
        let c = xy_closed_forms(&p, 0.4).unwrap();
        let want = crate::numkernel::scale_real(tau('z').as_ref(), p.delta_k());
        assert!(max_diff(c.h_k.as_ref(), want.as_ref()) < 1e-14);
        assert!(max_abs(c.a_k.as_ref()) < 1e-15);
    }

    #[test]
    fn xy_closed_form_rejects_zero_eps() {
        let p = XYBlochParams { g: 10.0, j: 0.0, a: 1.0, omega: 10.0, k: 0.0 };
        assert!(matches!(xy_closed_forms(&p, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spin_ops_match_kron() {
        let l = 3;
        let one = pauli('1');
        let sx = pauli('x');
        let sz = pauli('z');
        let want = kron(kron(one.as_ref(), sx.as_ref()).as_ref(), one.as_ref());
        assert_eq!(max_diff(spin::sigma_x(l, 1).as_ref(), want.as_ref()), 0.0);
        let want = kron(kron(sz.as_ref(), one.as_ref()).as_ref(), one.as_ref());
        assert_eq!(max_diff(spin::sigma_z(l, 0).as_ref(), want.as_ref()), 0.0);
        let want = kron(kron(one.as_ref(), sz.as_ref()).as_ref(), sz.as_ref());
        assert_eq!(max_diff(spin::sigma_zz(l, 1, 2).as_ref(), want.as_ref()), 0.0);
    }

    #[test]
    fn mfi_rejects_large_chain() {
        assert!(matches!(KickedMFI::new(20, 1.0, 1.0, 1.0), Err(Error::Resource(_))));
    }

    #[test]
    fn kicked_fractions_sum_to_one() {
        let m = KickedMFI::new(3, 1.0, 1.0, 1.0).unwrap();
        let d = m.protocol(0.1).unwrap();
        let s: f64 = d.segments().unwrap().iter().map(|s| s.fraction).sum();
        assert_eq!(s, 1.0);
        let c = DTCChain::new(4, 1.0, 0.5, 3).unwrap();
        let d = c.protocol(PI, 0.05).unwrap();
        let s: f64 = d.segments().unwrap().iter().map(|s| s.fraction).sum();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn dtc_couplings_reproducible() {
        let a = DTCChain::new(6, 1.0, 0.5, 42).unwrap();
        let b = DTCChain::new(6, 1.0, 0.5, 42).unwrap();
        assert_eq!(a.couplings, b.couplings);
        assert!(a.couplings.iter().all(|&c| (0.5..=1.5).contains(&c)));
        let c = DTCChain::new(6, 1.0, 0.5, 43).unwrap();
        assert_ne!(a.couplings, c.couplings);
    }

    #[test]
    fn dtc_interaction_commutes_with_parity() {
        let c = DTCChain::new(5, 1.0, 0.5, 1).unwrap();
        let p = c.parity_operator();
        let h = c.h_int.matrix().matrix();
        let comm = crate::numkernel::commutator(h.as_ref(), p.as_ref());
        assert!(max_abs(comm.as_ref()) < 1e-13);
    }

    #[test]
    fn afti_static_at_zero_modulation() {
        let p = AFTIHexParams { lx: 10, ly: 4, j: 1.0, f: 0.0, omega: 8.7 };
        let d = afti_hex(&p, 0.3).unwrap();
        assert!(max_diff(d.hamiltonian_matrix(0.0).as_ref(), d.hamiltonian_matrix(0.2).as_ref()) < 1e-15);
        assert_eq!(afti_hex_hopping(&p, 2, 0.1), 1.0);
    }

    #[test]
    fn afti_momenta_count() {
        let p = AFTIHexParams { lx: 100, ly: 4, j: 1.0, f: 2.0, omega: 8.7 };
        let ks = p.momenta();
        assert_eq!(ks.len(), 100);
        assert!(ks.iter().all(|k| *k > -PI && *k <= PI));
    }

    #[test]
    fn rudner_static_without_mass_drive() {
        let p = AFTIRudnerParams { mu: 1.0, j: 1.5, b: 1.5, a: 4.0, delta0: 0.0, omega: 14.0, ly: 4 };
        let d = afti_rudner(&p, 0.4).unwrap();
        assert!(max_diff(d.hamiltonian_matrix(0.0).as_ref(), d.hamiltonian_matrix(0.13).as_ref()) < 1e-15);
    }

    #[test]
    fn registry_lists_five_models() {
        let names: Vec<&str> = registry().iter().map(|m| m.name).collect();
        for n in ["xy", "kicked_mfi", "dtc", "afti_hex", "afti_rudner"] {
            assert!(names.contains(&n));
        }
    }
}
