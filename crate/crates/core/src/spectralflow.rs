//! Band tracking across parameter sweeps.
//!
//! Consecutive points are matched by maximizing `Σ |⟨ψ_b(prev)|ψ_j(next)⟩|²`
//! over permutations, so exact crossings exchange labels instead of mixing
//! states. Degenerate Floquet clusters are first rotated onto the previous
//! point's states.

use std::f64::consts::PI;

use faer::{c64, ColRef, Mat, MatRef};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::error::{Error, Result};
use crate::floquet::{degenerate_clusters, FloquetSolution, DEGENERACY_TOL};
use crate::kato::KatoResult;
use crate::numkernel::{expectations, mul, polar_unitary, wrap_phase, ComplexMatrix};

/// Above this dimension the optimal assignment is replaced by a greedy pass.
pub const GREEDY_ABOVE: usize = 512;
pub const DEFAULT_AMBIGUITY: f64 = 0.05;
pub const PHOTON_TOLERANCE: f64 = 0.2;

/// Solver output at one sweep point.
#[derive(Debug, Clone)]
pub struct BandPoint {
    pub parameter: f64,
    pub period: f64,
    /// Floquet states, one column per level.
    pub states: ComplexMatrix,
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl BandPoint {
    pub fn new(parameter: f64, sol: &FloquetSolution, kato: &KatoResult) -> Self {
        BandPoint {
            parameter,
            period: sol.period,
            states: kato.states.clone(),
            theta: kato.theta.clone(),
            xi: kato.xi.clone(),
            gamma: kato.gamma.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    /// Minimum gap between the best and second-best `|overlap|` of a band.
    pub ambiguity: f64,
    /// Fail on the first ambiguous assignment instead of recording it.
    pub strict: bool,
    pub degeneracy_tol: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { ambiguity: DEFAULT_AMBIGUITY, strict: false, degeneracy_tol: DEGENERACY_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ambiguity {
    pub index: usize,
    pub band: usize,
    pub best: f64,
    pub second: f64,
}

/// Bands followed across the sweep; `band` indexes the columns at the first point.
#[derive(Debug, Clone)]
pub struct BandTrack {
    pub parameters: Vec<f64>,
    pub periods: Vec<f64>,
    /// `levels[i][b]`: level of point `i` carried by band `b`.
    pub levels: Vec<Vec<usize>>,
    /// Tracked states, column `b` is band `b` (degenerate clusters rotated).
    pub states: Vec<ComplexMatrix>,
    pub xi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// `|⟨ψ_b(i-1)|ψ_b(i)⟩|` per point, 1 at the first.
    pub overlaps: Vec<Vec<f64>>,
    pub ambiguities: Vec<Ambiguity>,
}

impl BandTrack {
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.levels.first().map(|l| l.len()).unwrap_or(0)
    }

    /// Smallest consecutive overlap over the whole track.
    pub fn min_overlap(&self) -> f64 {
        self.overlaps.iter().flatten().cloned().fold(1.0, f64::min)
    }

    /// Band with the smallest `ξ_K` at point `i`.
    pub fn lowest_xi_band(&self, i: usize) -> usize {
        let xi = &self.xi[i];
        (0..xi.len()).min_by(|&a, &b| xi[a].total_cmp(&xi[b])).unwrap_or(0)
    }
}

/// Follow the bands of `points` in order.
pub fn track(points: &[BandPoint], opts: &TrackOptions) -> Result<BandTrack> {
    let first = points.first().ok_or_else(|| Error::InvalidParameter("empty sweep".into()))?;
    let n = first.dim();
    let mut out = BandTrack {
        parameters: Vec::with_capacity(points.len()),
        periods: Vec::with_capacity(points.len()),
        levels: Vec::with_capacity(points.len()),
        states: Vec::with_capacity(points.len()),
        xi: Vec::new(),
        theta: Vec::new(),
        gamma: Vec::new(),
        overlaps: Vec::new(),
        ambiguities: Vec::new(),
    };
    let identity: Vec<usize> = (0..n).collect();
    push_point(&mut out, first, &identity, first.states.clone(), vec![1.0; n]);

    for (i, p) in points.iter().enumerate().skip(1) {
        if p.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
        }
        let prev = out.states.last().expect("first point pushed");
        let mut next = p.states.clone();
        let folded: Vec<f64> = p.theta.iter().map(|&t| wrap_phase(t)).collect();
        for cl in degenerate_clusters(&folded, opts.degeneracy_tol) {
            if cl.len() > 1 {
                align_cluster(prev, &mut next, &cl)?;
            }
        }
        let ov = prev.adjoint() * &next;
        let weight = Mat::from_fn(n, n, |b, j| ov[(b, j)].norm());
        let assign = if n > GREEDY_ABOVE { greedy(&weight) } else { optimal(&weight) };

        let mut ovl = Vec::with_capacity(n);
        for b in 0..n {
            let j = assign[b];
            let best = weight[(b, j)];
            let second = (0..n).filter(|&k| k != j).map(|k| weight[(b, k)]).fold(0.0, f64::max);
            if best - second < opts.ambiguity {
                let a = Ambiguity { index: i, band: b, best, second };
                if opts.strict {
                    return Err(Error::AmbiguousAssignment { index: i, band: b, best, second });
                }
                out.ambiguities.push(a);
            }
            ovl.push(best);
        }
        let aligned = Mat::from_fn(p.states.nrows(), n, |r, b| {
            let j = assign[b];
            // Keep the phase continuous with the previous point.
            let z = ov[(b, j)];
            let ph = if z.norm() > 0.0 { z.conj() / z.norm() } else { c64::new(1.0, 0.0) };
            next[(r, j)] * ph
        });
        push_point(&mut out, p, &assign, aligned, ovl);
    }
    Ok(out)
}

fn push_point(out: &mut BandTrack, p: &BandPoint, assign: &[usize], states: ComplexMatrix, ovl: Vec<f64>) {
    out.parameters.push(p.parameter);
    out.periods.push(p.period);
    out.xi.push(assign.iter().map(|&j| p.xi[j]).collect());
    out.theta.push(assign.iter().map(|&j| p.theta[j]).collect());
    out.gamma.push(assign.iter().map(|&j| p.gamma[j]).collect());
    out.levels.push(assign.to_vec());
    out.states.push(states);
    out.overlaps.push(ovl);
}

/// Rotate the cluster's columns of `next` onto the previous states it overlaps most.
fn align_cluster(prev: &ComplexMatrix, next: &mut ComplexMatrix, cl: &[usize]) -> Result<()> {
    let n = prev.ncols();
    let rows = next.nrows();
    let vc = Mat::from_fn(rows, cl.len(), |r, j| next[(r, cl[j])]);
    let m = prev.adjoint() * &vc;
    let mut weight: Vec<(usize, f64)> =
        (0..n).map(|b| (b, (0..cl.len()).map(|j| m[(b, j)].norm_sqr()).sum::<f64>())).collect();
    weight.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = weight.iter().take(cl.len()).map(|x| x.0).collect();
    chosen.sort_unstable();
    let vs = Mat::from_fn(rows, cl.len(), |r, j| prev[(r, chosen[j])]);
    let rot = polar_unitary((vc.adjoint() * &vs).as_ref())?;
    let r = vc * rot;
    for (j, &c) in cl.iter().enumerate() {
        for i in 0..rows {
            next[(i, c)] = r[(i, j)];
        }
    }
    Ok(())
}

/// `assign[b]` maximizing `Σ_b weight[b, assign[b]]²`.
fn optimal(weight: &Mat<f64>) -> Vec<usize> {
    let n = weight.nrows();
    let rows: Vec<Vec<i64>> = (0..n)
        .map(|b| (0..n).map(|j| (weight[(b, j)].powi(2) * 1e12).round() as i64).collect())
        .collect();
    let m = Matrix::from_rows(rows).expect("square weight matrix");
    kuhn_munkres(&m).1
}

fn greedy(weight: &Mat<f64>) -> Vec<usize> {
    let n = weight.nrows();
    let mut pairs: Vec<(usize, usize, f64)> =
        (0..n).flat_map(|b| (0..n).map(move |j| (b, j, 0.0))).collect();
    for p in pairs.iter_mut() {
        p.2 = weight[(p.0, p.1)];
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut assign = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (b, j, _) in pairs {
        if assign[b] == usize::MAX && !taken[j] {
            assign[b] = j;
            taken[j] = true;
        }
    }
    assign
}

/// `|⟨ref|ψ_b⟩|²` for every point and band.
pub fn reference_overlap(track: &BandTrack, reference: ColRef<'_, c64>) -> Result<Vec<Vec<f64>>> {
    track
        .states
        .iter()
        .map(|s| {
            if s.nrows() != reference.nrows() {
                return Err(Error::DimensionMismatch { expected: s.nrows(), found: reference.nrows() });
            }
            Ok((0..s.ncols())
                .map(|b| (0..s.nrows()).map(|r| reference[r].conj() * s[(r, b)]).sum::<c64>().norm_sqr())
                .collect())
        })
        .collect()
}

/// One even-parity state matched with its odd-parity partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityPair {
    pub even: usize,
    pub odd: usize,
    /// `|⟨odd|O|even⟩|` for the coupling operator `O` used in the match.
    pub coupling: f64,
}

/// Split states by the sign of `⟨P⟩` and pair each even state with the odd state it is
/// most strongly connected to by `coupling` (an operator odd under `P`, e.g. a single `σ^z`).
pub fn parity_pairs(
    states: MatRef<'_, c64>,
    parity: MatRef<'_, c64>,
    coupling: MatRef<'_, c64>,
) -> Result<Vec<ParityPair>> {
    let n = states.nrows();
    if parity.nrows() != n || coupling.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: parity.nrows().min(coupling.nrows()) });
    }
    let sign = expectations(parity, states);
    let even: Vec<usize> = (0..sign.len()).filter(|&j| sign[j] > 0.0).collect();
    let odd: Vec<usize> = (0..sign.len()).filter(|&j| sign[j] <= 0.0).collect();
    if even.len() != odd.len() {
        return Err(Error::InvalidParameter(format!(
            "parity sectors differ in size ({} even, {} odd)",
            even.len(),
            odd.len()
        )));
    }
    let cs = mul(coupling, states);
    let w = Mat::<f64>::from_fn(even.len(), odd.len(), |a, b| {
        (0..n).map(|r| states[(r, odd[b])].conj() * cs[(r, even[a])]).sum::<c64>().norm()
    });
    let assign = if even.len() > GREEDY_ABOVE { greedy(&w) } else { optimal(&w) };
    Ok(even
        .iter()
        .enumerate()
        .map(|(a, &e)| ParityPair { even: e, odd: odd[assign[a]], coupling: w[(a, assign[a])] })
        .collect())
}

/// Integer photon label of a band at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonIndex {
    pub value: i64,
    /// False when `(ξ_K - ε_F)/ω` lies more than 0.2 from the nearest integer.
    pub resolved: bool,
}

/// `ℓ = round((ξ_K - ε_F^folded)/ω)` per point and band.
pub fn photon_index(track: &BandTrack) -> Vec<Vec<PhotonIndex>> {
    (0..track.len())
        .map(|i| {
            let period = track.periods[i];
            let omega = 2.0 * PI / period;
            track.xi[i]
                .iter()
                .zip(&track.theta[i])
                .map(|(&xi, &th)| {
                    let eps = wrap_phase(th) / period;
                    let x = (xi - eps) / omega;
                    let value = x.round();
                    PhotonIndex { value: value as i64, resolved: (x - value).abs() <= PHOTON_TOLERANCE }
                })
                .collect()
        })
        .collect()
}

/// Largest `|Δξ|` between consecutive points divided by the median step of the same band.
pub fn jump_ratios(track: &BandTrack) -> Vec<f64> {
    (0..track.bands())
        .map(|b| {
            let mut d: Vec<f64> = track.xi.windows(2).map(|w| (w[1][b] - w[0][b]).abs()).collect();
            if d.is_empty() {
                return 0.0;
            }
            let max = d.iter().cloned().fold(0.0, f64::max);
            d.sort_by(f64::total_cmp);
            let med = d[d.len() / 2];
            if med > 0.0 {
                max / med
            } else if max > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect()
}
