//! Dense complex linear algebra used by the rest of the crate.
//!
//! Everything here is a pure function of its inputs. Hermitian and unitary
//! inputs are wrapped in validated newtypes so that downstream phase
//! computations never see unchecked operators.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type ComplexMatrix = Mat<c64>;

/// Relative max-norm tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-norm tolerance on `U†U - 1` for accepting a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

const EIGU_CENTER: f64 = std::f64::consts::SQRT_2 - 1.0;
const EIGU_CLUSTER: f64 = 1e-6;

#[inline]
pub fn cplx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

#[inline]
pub fn cis(phi: f64) -> c64 {
    c64::new(phi.cos(), phi.sin())
}

/// Wrap an angle into (-π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn all_finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

pub fn identity(dim: usize) -> ComplexMatrix {
    Mat::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    Mat::zeros(rows, cols)
}

pub fn scale(m: MatRef<'_, c64>, s: c64) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn scale_real(m: MatRef<'_, c64>, s: f64) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn dagger(m: MatRef<'_, c64>) -> ComplexMatrix {
    m.adjoint().to_owned()
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    a * b - b * a
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `‖a - b‖_max`
pub fn max_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Matrix whose columns are `v_k`, scaled column-wise by `d_k`.
pub fn scale_columns(v: MatRef<'_, c64>, d: &[c64]) -> ComplexMatrix {
    Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * d[j])
}

/// `V diag(d) V†`
pub fn rebuild(v: MatRef<'_, c64>, d: &[c64]) -> ComplexMatrix {
    mul_adj_right(scale_columns(v, d).as_ref(), v)
}

// Below this many multiply-adds plain loops beat the blocked kernels' setup cost.
const SMALL_PRODUCT: usize = 4096;

fn small(a: MatRef<'_, c64>, b_cols: usize) -> bool {
    a.nrows() * a.ncols() * b_cols <= SMALL_PRODUCT
}

/// `a b`
pub fn mul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    if !small(a, b.ncols()) {
        return a * b;
    }
    Mat::from_fn(a.nrows(), b.ncols(), |i, j| (0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

/// `a† b`
pub fn mul_adj_left(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    if !small(a, b.ncols()) {
        return a.adjoint() * b;
    }
    Mat::from_fn(a.ncols(), b.ncols(), |i, j| (0..a.nrows()).map(|k| a[(k, i)].conj() * b[(k, j)]).sum())
}

/// `a b†`
pub fn mul_adj_right(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> ComplexMatrix {
    if !small(a, b.nrows()) {
        return a * b.adjoint();
    }
    Mat::from_fn(a.nrows(), b.nrows(), |i, j| (0..a.ncols()).map(|k| a[(i, k)] * b[(j, k)].conj()).sum())
}

/// Validated Hermitian operator. Construction symmetrizes the input.
#[derive(Debug, Clone)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(m.as_ref())?;
        if !all_finite(m.as_ref()) {
            return Err(Error::NonFinite { context: "Hermitian input" });
        }
        let scale = max_abs(m.as_ref());
        let dev = max_diff(m.as_ref(), dagger(m.as_ref()).as_ref());
        let bound = HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE);
        if dev > bound && dev > 0.0 {
            return Err(Error::NotHermitian { deviation: dev, bound });
        }
        Ok(Self::symmetrized(m))
    }

    /// Wrap `(M + M†)/2` without any tolerance check.
    pub fn symmetrized(m: ComplexMatrix) -> Self {
        let n = m.nrows();
        HermitianMatrix(Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(Mat::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }
}

/// Validated unitary operator.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(m.as_ref())?;
        if !all_finite(m.as_ref()) {
            return Err(Error::NonFinite { context: "unitary input" });
        }
        let dev = unitarity_defect(m.as_ref());
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation: dev, bound: UNITARY_TOL });
        }
        Ok(UnitaryMatrix(m))
    }

    pub(crate) fn unchecked(m: ComplexMatrix) -> Self {
        UnitaryMatrix(m)
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryMatrix(identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix(dagger(self.as_ref()))
    }

    pub fn compose(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix(&self.0 * &rhs.0)
    }

    /// `‖U†U - 1‖_max`
    pub fn defect(&self) -> f64 {
        unitarity_defect(self.as_ref())
    }
}

pub fn unitarity_defect(m: MatRef<'_, c64>) -> f64 {
    let p = m.adjoint() * m;
    max_diff(p.as_ref(), identity(m.nrows()).as_ref())
}

fn check_square(m: MatRef<'_, c64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    Ok(())
}

/// Eigenpairs of a Hermitian operator, ascending.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn rebuild(&self) -> ComplexMatrix {
        let d: Vec<c64> = self.values.iter().map(|&x| cplx(x, 0.0)).collect();
        rebuild(self.vectors.as_ref(), &d)
    }

    /// `exp(-i s M)` reusing the stored decomposition.
    pub fn exp_i(&self, s: f64) -> ComplexMatrix {
        let d: Vec<c64> = self.values.iter().map(|&x| cis(-s * x)).collect();
        rebuild(self.vectors.as_ref(), &d)
    }
}

/// Eigenpairs of a unitary operator. `U v_k = exp(i phases_k) v_k`, phases in (-π, π], ascending.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    pub phases: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl UnitarySpectrum {
    pub fn eigenvalues(&self) -> Vec<c64> {
        self.phases.iter().map(|&p| cis(p)).collect()
    }

    pub fn rebuild(&self) -> ComplexMatrix {
        rebuild(self.vectors.as_ref(), &self.eigenvalues())
    }
}

pub fn eigh(m: &HermitianMatrix) -> Result<HermitianSpectrum> {
    eigh_raw(m.as_ref())
}

pub(crate) fn eigh_raw(m: MatRef<'_, c64>) -> Result<HermitianSpectrum> {
    let n = m.nrows();
    if n == 1 {
        return Ok(HermitianSpectrum { values: vec![m[(0, 0)].re], vectors: identity(1) });
    }
    if n == 2 {
        return Ok(eigh_2x2(m));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("Hermitian eigensolver: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(HermitianSpectrum { values, vectors })
}

// Closed form; the eigenvector formula is picked to avoid cancellation.
fn eigh_2x2(m: MatRef<'_, c64>) -> HermitianSpectrum {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let r = h.hypot(b.norm());
    if b.norm() == 0.0 {
        let (lo, hi, swap) = if a <= d { (a, d, false) } else { (d, a, true) };
        let vectors = Mat::from_fn(2, 2, |i, j| if (i == j) != swap { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) });
        return HermitianSpectrum { values: vec![lo, hi], vectors };
    }
    let (v0, v1) = if h >= 0.0 { (cplx(r + h, 0.0), b.conj()) } else { (b, cplx(r - h, 0.0)) };
    let nrm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    let (v0, v1) = (v0 / nrm, v1 / nrm);
    let vectors = Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => -v1.conj(),
        (1, 0) => v0.conj(),
        (0, 1) => v0,
        _ => v1,
    });
    HermitianSpectrum { values: vec![mean - r, mean + r], vectors }
}

/// Unitary eigendecomposition with orthonormal eigenvectors, also within degenerate clusters.
///
/// The Hermitian part of `e^{-iφ} U` shares eigenvectors with `U`; its eigenvalues
/// `cos(θ - φ)` can only collide for mirror-image phases, which a second Hermitian
/// combination rotated by π/2 separates inside each cluster.
pub fn eigu(u: &UnitaryMatrix) -> Result<UnitarySpectrum> {
    eigu_raw(u.as_ref())
}

pub(crate) fn eigu_raw(u: MatRef<'_, c64>) -> Result<UnitarySpectrum> {
    let n = u.nrows();
    let herm_part = |phi: f64| -> ComplexMatrix {
        let e = cis(-phi);
        Mat::from_fn(n, n, |i, j| (u[(i, j)] * e + (u[(j, i)] * e).conj()) * 0.5)
    };
    let k1 = eigh_raw(herm_part(EIGU_CENTER).as_ref())?;
    let k2 = herm_part(EIGU_CENTER + 0.5 * PI);

    let mut vectors = Mat::<c64>::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && k1.values[end] - k1.values[end - 1] < EIGU_CLUSTER {
            end += 1;
        }
        let block = k1.vectors.as_ref().subcols(start, end - start);
        if end - start == 1 {
            vectors.as_mut().col_mut(start).copy_from(block.col(0));
        } else {
            let proj = block.adjoint() * &k2 * block;
            let inner = eigh_raw(HermitianMatrix::symmetrized(proj).as_ref())?;
            let rotated = block * &inner.vectors;
            vectors.as_mut().subcols_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }

    let uv = u * &vectors;
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let mut z = c64::new(0.0, 0.0);
        for i in 0..n {
            z += vectors[(i, j)].conj() * uv[(i, j)];
        }
        let mut p = z.im.atan2(z.re);
        if p <= -PI {
            p = PI;
        }
        phases.push(p);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let phases: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    let spec = UnitarySpectrum { phases, vectors };

    let resid = max_diff(spec.rebuild().as_ref(), u);
    if !resid.is_finite() || resid > 1e-8 * (n as f64).max(1.0) {
        return Err(Error::Solver(format!("unitary eigendecomposition residual {resid:.3e}")));
    }
    Ok(spec)
}

/// `exp(-i s M)` for Hermitian `M`.
pub fn expm_antihermitian(m: &HermitianMatrix, s: f64) -> Result<UnitaryMatrix> {
    if !s.is_finite() {
        return Err(Error::NonFinite { context: "exponent scale" });
    }
    if is_diagonal(m.as_ref()) {
        let n = m.dim();
        return Ok(UnitaryMatrix(Mat::from_fn(n, n, |i, j| {
            if i == j {
                cis(-s * m.as_ref()[(i, i)].re)
            } else {
                c64::new(0.0, 0.0)
            }
        })));
    }
    Ok(UnitaryMatrix(eigh(m)?.exp_i(s)))
}

fn is_diagonal(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| i == j || m[(i, j)] == c64::new(0.0, 0.0)))
}

/// Principal generator `H` with `U = exp(-i H)`, eigenvalues in [-π, π).
pub fn logm_unitary(u: &UnitaryMatrix) -> Result<(HermitianMatrix, UnitarySpectrum)> {
    let spec = eigu(u)?;
    let d: Vec<c64> = spec.phases.iter().map(|&p| cplx(-p, 0.0)).collect();
    let h = HermitianMatrix::symmetrized(rebuild(spec.vectors.as_ref(), &d));
    Ok((h, spec))
}

/// Moore-Penrose pseudoinverse; singular values below `rank_tol * σ_max` count as zero.
pub fn pinv(m: MatRef<'_, c64>, rank_tol: f64) -> Result<ComplexMatrix> {
    pinv_with_report(m, rank_tol).map(|(p, _)| p)
}

/// Conditioning diagnostics of a pseudoinverse solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest retained singular value over `σ_max`.
    pub smallest_kept: f64,
    /// Largest discarded singular value over `σ_max` (0 when nothing is discarded).
    pub largest_dropped: f64,
}

impl RankReport {
    /// Ratio between the kept and dropped singular values adjacent to the cutoff.
    pub fn gap_ratio(&self) -> f64 {
        if self.largest_dropped == 0.0 {
            f64::INFINITY
        } else {
            self.smallest_kept / self.largest_dropped
        }
    }
}

pub fn pinv_with_report(m: MatRef<'_, c64>, rank_tol: f64) -> Result<(ComplexMatrix, RankReport)> {
    pinv_capped(m, rank_tol, None)
}

/// As [`pinv_with_report`], additionally keeping at most `max_rank` singular values.
pub fn pinv_capped(m: MatRef<'_, c64>, rank_tol: f64, max_rank: Option<usize>) -> Result<(ComplexMatrix, RankReport)> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("rank_tol must be positive, got {rank_tol}")));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite { context: "pseudoinverse input" });
    }
    let (r, c) = (m.nrows(), m.ncols());
    if r == 0 || c == 0 {
        return Ok((Mat::zeros(c, r), RankReport { rank: 0, sigma_max: 0.0, smallest_kept: 0.0, largest_dropped: 0.0 }));
    }
    let svd = m.thin_svd().map_err(|e| Error::Solver(format!("SVD: {e:?}")))?;
    let s = svd.S();
    let k = r.min(c);
    let sigma: Vec<f64> = (0..k).map(|i| s[i].re).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let mut report = RankReport { rank: 0, sigma_max: smax, smallest_kept: 0.0, largest_dropped: 0.0 };
    if smax == 0.0 {
        return Ok((Mat::zeros(c, r), report));
    }
    let mut cut = rank_tol * smax;
    if let Some(cap) = max_rank {
        let mut desc = sigma.clone();
        desc.sort_by(|a, b| b.total_cmp(a));
        if cap == 0 {
            cut = f64::INFINITY;
        } else if cap < desc.len() {
            cut = cut.max(desc[cap]);
        }
    }
    let inv: Vec<c64> = sigma
        .iter()
        .map(|&x| if x > cut { cplx(1.0 / x, 0.0) } else { cplx(0.0, 0.0) })
        .collect();
    for &x in &sigma {
        if x > cut {
            report.rank += 1;
            report.smallest_kept = if report.rank == 1 { x / smax } else { report.smallest_kept.min(x / smax) };
        } else {
            report.largest_dropped = report.largest_dropped.max(x / smax);
        }
    }
    let v_scaled = scale_columns(svd.V(), &inv);
    Ok((v_scaled * svd.U().adjoint(), report))
}

/// `⟨a_i|b_j⟩` for state sets stored as columns.
pub fn overlap_matrix(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(a.adjoint() * b)
}

/// `⟨v|M|v⟩` real part for each column `v` of `states`.
pub fn expectations(m: MatRef<'_, c64>, states: MatRef<'_, c64>) -> Vec<f64> {
    let mv = m * states;
    (0..states.ncols())
        .map(|j| (0..states.nrows()).map(|i| (states[(i, j)].conj() * mv[(i, j)]).re).sum())
        .collect()
}

/// Gram-Schmidt orthonormalization of the columns, in place order.
pub fn orthonormalize(m: &mut ComplexMatrix) {
    let (r, c) = (m.nrows(), m.ncols());
    for j in 0..c {
        for k in 0..j {
            let mut z = c64::new(0.0, 0.0);
            for i in 0..r {
                z += m[(i, k)].conj() * m[(i, j)];
            }
            for i in 0..r {
                let t = m[(i, k)] * z;
                m[(i, j)] -= t;
            }
        }
        let nrm: f64 = (0..r).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for i in 0..r {
                m[(i, j)] = m[(i, j)] / nrm;
            }
        }
    }
}

/// Closest unitary in Frobenius norm (polar factor `U V†` of the SVD).
pub fn polar_unitary(m: MatRef<'_, c64>) -> Result<ComplexMatrix> {
    let svd = m.thin_svd().map_err(|e| Error::Solver(format!("SVD: {e:?}")))?;
    Ok(svd.U() * svd.V().adjoint())
}

/// Singular values, nonincreasing.
pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let svd = m.thin_svd().map_err(|e| Error::Solver(format!("SVD: {e:?}")))?;
    let s = svd.S();
    Ok((0..m.nrows().min(m.ncols())).map(|i| s[i].re).collect())
}
