//! Fourier-space construction of the Kato AGP.
//!
//! Periodic operators are truncated to harmonics `|ℓ| ≤ N_h` and vectorized
//! harmonic-major, then column-major inside each matrix:
//! `index = (ℓ + N_h) d² + col d + row`.
//!
//! The superoperator is `𝓛X = -i[H, X] - ∂_t X`. It annihilates every operator
//! transported by the evolution, and `A₊ = -𝓛⁺(∂_t H)` is the minimum-norm
//! solution of `𝓛A = -∂_t H`. It differs from `A_K` only by its diagonal in
//! the Floquet basis, `E_K,n(t) - ξ_K,n`, which [`AgpSolution::kato_agp_at`] removes.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};

use crate::drives::{DriveForm, DriveProtocol};
use crate::error::{Error, Result};
use crate::numkernel::{
    cis, cplx, dagger, eigh, frobenius, max_diff, pinv_capped, scale, ComplexMatrix, HermitianMatrix, RankReport,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Harmonics added on top of the drive's own when `N_h` is not given.
pub const EXTRA_HARMONICS: usize = 4;
/// Dense superoperators above this many rows are refused.
pub const MAX_ROWS: usize = 30_000;

/// `O(t) = Σ_{|ℓ|≤N_h} e^{iℓωt} O_ℓ`
#[derive(Debug, Clone, PartialEq)]
pub struct FourierOperator {
    pub omega: f64,
    pub n_h: usize,
    pub dim: usize,
    /// `harmonics[ℓ + N_h] = O_ℓ`
    pub harmonics: Vec<ComplexMatrix>,
}

impl FourierOperator {
    pub fn zeros(dim: usize, n_h: usize, omega: f64) -> Self {
        FourierOperator { omega, n_h, dim, harmonics: vec![Mat::zeros(dim, dim); 2 * n_h + 1] }
    }

    /// From `(ℓ, O_ℓ)` pairs; harmonics outside `N_h` are rejected.
    pub fn from_pairs(dim: usize, n_h: usize, omega: f64, pairs: &[(i32, ComplexMatrix)]) -> Result<Self> {
        let mut op = Self::zeros(dim, n_h, omega);
        for (l, m) in pairs {
            if l.unsigned_abs() as usize > n_h {
                return Err(Error::InvalidParameter(format!("harmonic {l} outside truncation {n_h}")));
            }
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
            }
            let idx = (*l + n_h as i32) as usize;
            op.harmonics[idx] += m;
        }
        Ok(op)
    }

    /// Fourier coefficients of a drive. Exact for Fourier forms; otherwise a sampled DFT on
    /// `max(64, 8(2N_h+1))` points.
    pub fn from_drive(d: &DriveProtocol, n_h: usize) -> Result<Self> {
        match d.form() {
            DriveForm::Fourier(pairs) => {
                let keep: Vec<(i32, ComplexMatrix)> =
                    pairs.iter().filter(|(l, _)| l.unsigned_abs() as usize <= n_h).cloned().collect();
                Self::from_pairs(d.dim(), n_h, d.omega(), &keep)
            }
            _ => {
                let m = 64.max(8 * (2 * n_h + 1));
                let samples: Vec<ComplexMatrix> =
                    (0..m).map(|j| d.hamiltonian_matrix(d.period() * j as f64 / m as f64)).collect();
                Ok(Self::from_samples(&samples, d.omega(), n_h))
            }
        }
    }

    /// DFT of uniformly spaced samples over one period.
    pub fn from_samples(samples: &[ComplexMatrix], omega: f64, n_h: usize) -> Self {
        let m = samples.len();
        let dim = samples.first().map(|s| s.nrows()).unwrap_or(0);
        let mut op = Self::zeros(dim, n_h, omega);
        for (j, s) in samples.iter().enumerate() {
            for l in -(n_h as i64)..=n_h as i64 {
                let e = cis(-2.0 * PI * (l * j as i64) as f64 / m as f64) / m as f64;
                op.harmonics[(l + n_h as i64) as usize] += scale(s.as_ref(), e);
            }
        }
        op
    }

    pub fn get(&self, l: i64) -> Option<&ComplexMatrix> {
        if l.unsigned_abs() as usize > self.n_h {
            None
        } else {
            Some(&self.harmonics[(l + self.n_h as i64) as usize])
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn evaluate(&self, t: f64) -> ComplexMatrix {
        let mut acc = Mat::<c64>::zeros(self.dim, self.dim);
        for (i, m) in self.harmonics.iter().enumerate() {
            let l = i as f64 - self.n_h as f64;
            acc += scale(m.as_ref(), cis(l * self.omega * t));
        }
        acc
    }

    /// `∂_t O`: harmonic `ℓ` multiplied by `iℓω`.
    pub fn derivative(&self) -> Self {
        let mut out = self.clone();
        for (i, m) in out.harmonics.iter_mut().enumerate() {
            let l = i as f64 - self.n_h as f64;
            *m = scale(m.as_ref(), cplx(0.0, l * self.omega));
        }
        out
    }

    /// Same operator on a larger (or smaller, dropping harmonics) truncation.
    pub fn resized(&self, n_h: usize) -> Self {
        let mut out = Self::zeros(self.dim, n_h, self.omega);
        for l in -(n_h.min(self.n_h) as i64)..=n_h.min(self.n_h) as i64 {
            out.harmonics[(l + n_h as i64) as usize] = self.harmonics[(l + self.n_h as i64) as usize].clone();
        }
        out
    }

    /// `max_ℓ ‖O_{-ℓ} - O_ℓ†‖_max`, zero for a Hermitian time-domain operator.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n_h as i64;
        (-n..=n)
            .map(|l| max_diff(self.harmonics[(l + n) as usize].as_ref(), dagger(self.harmonics[(n - l) as usize].as_ref()).as_ref()))
            .fold(0.0, f64::max)
    }

    /// Time-averaged Frobenius norm `(Σ_ℓ ‖O_ℓ‖²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.harmonics.iter().map(|m| frobenius(m.as_ref()).powi(2)).sum::<f64>().sqrt()
    }

    pub fn vectorize(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut v = Mat::zeros(self.harmonics.len() * d * d, 1);
        for (h, m) in self.harmonics.iter().enumerate() {
            for c in 0..d {
                for r in 0..d {
                    v[(h * d * d + c * d + r, 0)] = m[(r, c)];
                }
            }
        }
        v
    }

    pub fn from_vector(v: MatRef<'_, c64>, dim: usize, n_h: usize, omega: f64) -> Result<Self> {
        let len = (2 * n_h + 1) * dim * dim;
        if v.nrows() != len || v.ncols() != 1 {
            return Err(Error::DimensionMismatch { expected: len, found: v.nrows() });
        }
        let harmonics = (0..2 * n_h + 1)
            .map(|h| Mat::from_fn(dim, dim, |r, c| v[(h * dim * dim + c * dim + r, 0)]))
            .collect();
        Ok(FourierOperator { omega, n_h, dim, harmonics })
    }
}

/// Dense matrix of `𝓛` on the truncated space.
#[derive(Debug, Clone)]
pub struct SuperoperatorMatrix {
    pub n_h: usize,
    pub dim: usize,
    pub omega: f64,
    pub matrix: ComplexMatrix,
}

impl SuperoperatorMatrix {
    pub fn apply(&self, x: &FourierOperator) -> Result<FourierOperator> {
        if x.n_h != self.n_h || x.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.n_h, found: x.n_h });
        }
        let y = &self.matrix * x.vectorize();
        FourierOperator::from_vector(y.as_ref(), self.dim, self.n_h, self.omega)
    }
}

/// `(𝓛X)_m = -i Σ_ℓ [H_{m-ℓ}, X_ℓ] - iωm X_m` restricted to `|m|, |ℓ| ≤ N_h`.
pub fn build_l(h: &FourierOperator, n_h: usize) -> Result<SuperoperatorMatrix> {
    let d = h.dim;
    let blocks = 2 * n_h + 1;
    let rows = blocks * d * d;
    if rows > MAX_ROWS {
        return Err(Error::Resource(format!("superoperator with {rows} rows exceeds {MAX_ROWS}")));
    }
    let mut l = Mat::<c64>::zeros(rows, rows);
    let idx = |harm: usize, r: usize, c: usize| harm * d * d + c * d + r;
    let mi = cplx(0.0, -1.0);
    for m in 0..blocks {
        let mm = m as i64 - n_h as i64;
        for k in 0..blocks {
            let kk = k as i64 - n_h as i64;
            let Some(hm) = h.get(mm - kk) else { continue };
            for r in 0..d {
                for c in 0..d {
                    let out = idx(m, r, c);
                    for a in 0..d {
                        // H X: X_k[a, c] with weight H[r, a]
                        l[(out, idx(k, a, c))] += mi * hm[(r, a)];
                        // -X H: X_k[r, a] with weight H[a, c]
                        l[(out, idx(k, r, a))] -= mi * hm[(a, c)];
                    }
                }
            }
        }
        for j in 0..d * d {
            l[(m * d * d + j, m * d * d + j)] += cplx(0.0, -h.omega * mm as f64);
        }
    }
    Ok(SuperoperatorMatrix { n_h, dim: d, omega: h.omega, matrix: l })
}

/// Direct action of `𝓛` with no truncation of the output: harmonics up to `N_x + N_H`.
pub fn apply_l_exact(h: &FourierOperator, x: &FourierOperator) -> Result<FourierOperator> {
    if h.dim != x.dim {
        return Err(Error::DimensionMismatch { expected: h.dim, found: x.dim });
    }
    let n_out = x.n_h + h.n_h;
    let mut out = FourierOperator::zeros(h.dim, n_out, h.omega);
    for (i, xl) in x.harmonics.iter().enumerate() {
        let l = i as i64 - x.n_h as i64;
        for (j, hk) in h.harmonics.iter().enumerate() {
            let k = j as i64 - h.n_h as i64;
            let c = hk * xl - xl * hk;
            out.harmonics[(l + k + n_out as i64) as usize] += scale(c.as_ref(), cplx(0.0, -1.0));
        }
        out.harmonics[(l + n_out as i64) as usize] += scale(xl.as_ref(), cplx(0.0, -h.omega * l as f64));
    }
    Ok(out)
}

/// Result of the pseudoinverse solve.
#[derive(Debug, Clone)]
pub struct AgpSolution {
    /// Minimum-norm solution `A₊`.
    pub a_plus: FourierOperator,
    pub h: FourierOperator,
    pub rank: RankReport,
    /// `‖𝓛A₊ + ∂_tH‖` with 𝓛 applied untruncated, relative to `‖∂_tH‖`.
    pub residual: f64,
    /// `‖𝓛(𝓛A₊ + ∂_tH)‖` on the enlarged space, relative to `ω‖∂_tH‖`.
    pub normal_residual: f64,
}

impl AgpSolution {
    pub fn a_plus_at(&self, t: f64) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.a_plus.evaluate(t))
    }

    /// `A_K(t)`: `A₊(t)` with its diagonal removed in the eigenbasis of `H(t) - A₊(t)`.
    pub fn kato_agp_at(&self, t: f64) -> Result<HermitianMatrix> {
        let a = self.a_plus.evaluate(t);
        let hk = HermitianMatrix::symmetrized(self.h.evaluate(t) - &a);
        let v = eigh(&hk)?.vectors;
        let mut inner = v.adjoint() * &a * &v;
        for i in 0..inner.nrows() {
            inner[(i, i)] = cplx(0.0, 0.0);
        }
        Ok(HermitianMatrix::symmetrized(&v * inner * v.adjoint()))
    }

    /// Largest diagonal element of `A₊(t)` in the eigenbasis of `H(t) - A₊(t)`.
    pub fn diagonal_at(&self, t: f64) -> Result<Vec<f64>> {
        let a = self.a_plus.evaluate(t);
        let hk = HermitianMatrix::symmetrized(self.h.evaluate(t) - &a);
        let v = eigh(&hk)?.vectors;
        Ok(crate::numkernel::expectations(a.as_ref(), v.as_ref()))
    }
}

/// `A₊ = -𝓛⁺(∂_t H)` on `N_h` harmonics. Drive harmonics beyond `N_h` still couple
/// the retained ones; the residual is measured against the full drive.
///
/// The kernel of 𝓛 holds the `dim` Floquet projectors. Truncation lifts them to small but
/// finite singular values, so the `dim` smallest are always discarded on top of `rank_tol`;
/// otherwise the truncated solve lands on `H` plus kernel pieces instead of the minimum-norm `A₊`.
pub fn solve_kato_agp(h: &FourierOperator, n_h: usize, rank_tol: f64) -> Result<AgpSolution> {
    let dh_full = h.derivative();
    let dh = dh_full.resized(n_h);
    let l = build_l(h, n_h)?;
    let rows = l.matrix.nrows();
    let (p, rank) = pinv_capped(l.matrix.as_ref(), rank_tol, Some(rows.saturating_sub(h.dim)))?;
    let x = -(p * dh.vectorize());
    let a_plus = FourierOperator::from_vector(x.as_ref(), h.dim, n_h, h.omega)?;

    let dnorm = dh_full.norm().max(f64::MIN_POSITIVE);
    let mut r = apply_l_exact(h, &a_plus)?;
    let dh_big = dh_full.resized(r.n_h);
    for (a, b) in r.harmonics.iter_mut().zip(&dh_big.harmonics) {
        *a += b;
    }
    let residual = r.norm() / dnorm;
    let rr = apply_l_exact(h, &r)?;
    let normal_residual = rr.norm() / (dnorm * h.omega);
    Ok(AgpSolution { a_plus, h: h.clone(), rank, residual, normal_residual })
}

/// Default truncation: drive harmonics plus [`EXTRA_HARMONICS`].
pub fn default_harmonics(d: &DriveProtocol) -> usize {
    d.max_harmonic().unwrap_or(4) + EXTRA_HARMONICS
}

/// Solve for a drive at the default or given truncation.
pub fn solve_drive(d: &DriveProtocol, n_h: Option<usize>, rank_tol: f64) -> Result<AgpSolution> {
    let n_h = n_h.unwrap_or_else(|| default_harmonics(d));
    let h = FourierOperator::from_drive(d, d.max_harmonic().unwrap_or(n_h))?;
    solve_kato_agp(&h, n_h, rank_tol)
}

/// Zeroth-order high-frequency Kato data.
#[derive(Debug, Clone)]
pub struct HfeKato {
    /// Period-averaged Hamiltonian.
    pub h_f0: HermitianMatrix,
    /// Eigenstates of `H_F⁽⁰⁾`, columns in ascending energy.
    pub states: ComplexMatrix,
    /// `T⁻¹∫⟨ψ⁽⁰⁾|H(t)|ψ⁽⁰⁾⟩ dt`, equal to the eigenvalues of `H_F⁽⁰⁾`.
    pub xi_k0: Vec<f64>,
    /// Berry phases vanish at this order.
    pub gamma0: Vec<f64>,
}

/// Period average of `H` (exact per segment for kicked drives, `quad` midpoints otherwise),
/// its eigenstates, and the Kato energies they imply.
pub fn hfe_kato(d: &DriveProtocol, quad: usize) -> Result<HfeKato> {
    let n = d.dim();
    let mut avg = Mat::<c64>::zeros(n, n);
    match d.form() {
        DriveForm::Fourier(pairs) => {
            for (l, m) in pairs {
                if *l == 0 {
                    avg += m;
                }
            }
        }
        DriveForm::Kicked(segs) => {
            for s in segs {
                avg += crate::numkernel::scale_real(s.hamiltonian().as_ref(), s.fraction);
            }
        }
        DriveForm::Sampled(_) => {
            let q = quad.max(1);
            for j in 0..q {
                let t = d.period() * (j as f64 + 0.5) / q as f64;
                avg += crate::numkernel::scale_real(d.hamiltonian_matrix(t).as_ref(), 1.0 / q as f64);
            }
        }
    }
    let h_f0 = HermitianMatrix::symmetrized(avg);
    let sp = eigh(&h_f0)?;
    let xi_k0 = crate::numkernel::expectations(h_f0.as_ref(), sp.vectors.as_ref());
    Ok(HfeKato { h_f0, states: sp.vectors, xi_k0, gamma0: vec![0.0; n] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drives::tau;
    use crate::numkernel::max_abs;

    #[test]
    fn static_commutator() {
        let h = FourierOperator::from_pairs(2, 0, 1.0, &[(0, tau('z'))]).unwrap();
        let x = FourierOperator::from_pairs(2, 0, 1.0, &[(0, tau('x'))]).unwrap();
        let l = build_l(&h, 0).unwrap();
        let y = l.apply(&x).unwrap();
        let expect = scale((tau('z') * tau('x') - tau('x') * tau('z')).as_ref(), cplx(0.0, -1.0));
        assert!(max_diff(y.harmonics[0].as_ref(), expect.as_ref()) < 1e-15);
    }

    #[test]
    fn pure_derivative() {
        let h = FourierOperator::from_pairs(2, 0, 3.0, &[(0, tau('z'))]).unwrap();
        let x = FourierOperator::from_pairs(2, 1, 3.0, &[(1, crate::numkernel::identity(2))]).unwrap();
        let y = build_l(&h, 1).unwrap().apply(&x).unwrap();
        let expect = scale(crate::numkernel::identity(2).as_ref(), cplx(0.0, -3.0));
        assert!(max_diff(y.get(1).unwrap().as_ref(), expect.as_ref()) < 1e-15);
        assert!(max_abs(y.get(0).unwrap().as_ref()) < 1e-15);
    }

    #[test]
    fn static_drive_has_zero_agp() {
        let h = FourierOperator::from_pairs(2, 0, 1.0, &[(0, tau('z') + tau('x'))]).unwrap();
        let s = solve_kato_agp(&h, 3, DEFAULT_RANK_TOL).unwrap();
        assert!(s.a_plus.norm() < 1e-14);
    }

    #[test]
    fn vectorization_roundtrip() {
        let x = FourierOperator::from_pairs(2, 1, 1.0, &[(-1, tau('x')), (1, tau('y'))]).unwrap();
        let v = x.vectorize();
        assert_eq!(v[(4 * 2 + 2, 0)], tau('y')[(0, 1)]);
        assert_eq!(FourierOperator::from_vector(v.as_ref(), 2, 1, 1.0).unwrap(), x);
    }
}
