#![allow(dead_code)]

use floquet_kato::drives::{
    afti_hex, afti_rudner, xy_bloch, AFTIHexParams, AFTIRudnerParams, DTCChain, DriveProtocol, KickedMFI, XYBlochParams,
};
use floquet_kato::numkernel::{cplx, ComplexMatrix, HermitianMatrix};
use proptest::prelude::*;

pub fn xy(j: f64, k: f64) -> XYBlochParams {
    XYBlochParams { g: 1.0, j, a: 2.5, omega: 10.0, k }
}

/// Hermitian matrix from `n*n` pairs; the upper triangle is mirrored.
pub fn hermitian_from(n: usize, raw: &[(f64, f64)]) -> HermitianMatrix {
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let (a, b) = raw[i.min(j) * n + i.max(j)];
        if i == j {
            cplx(a, 0.0)
        } else if i < j {
            cplx(a, b)
        } else {
            cplx(a, -b)
        }
    });
    HermitianMatrix::new(m).unwrap()
}

pub fn hermitian(max_dim: usize) -> impl Strategy<Value = HermitianMatrix> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| hermitian_from(n, &v))
    })
}

pub fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols)
        .prop_map(move |v| ComplexMatrix::from_fn(rows, cols, |i, j| cplx(v[i * cols + j].0, v[i * cols + j].1)))
}

/// One small instance of every model family.
pub fn small_zoo() -> Vec<DriveProtocol> {
    let ch = DTCChain::new(3, 1.0, 0.5, 5).unwrap();
    vec![
        xy_bloch(&xy(0.5, 0.4)).unwrap(),
        KickedMFI::new(3, 1.0, 0.9, 0.4).unwrap().protocol(0.7).unwrap(),
        ch.protocol(0.95 * std::f64::consts::PI, 0.3).unwrap(),
        afti_hex(&AFTIHexParams { lx: 10, ly: 4, j: 1.0, f: 2.0, omega: 8.7 }, 0.3).unwrap(),
        afti_rudner(
            &AFTIRudnerParams { mu: 1.0, j: 1.5, b: 1.5, a: 4.0, delta0: 1.0, omega: 100.0 / 7.0, ly: 4 },
            0.3,
        )
        .unwrap(),
    ]
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn max_pair_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
