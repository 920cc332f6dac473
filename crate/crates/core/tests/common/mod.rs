#![allow(dead_code)]

use eigenframe::eigensteps::{sample_eigensteps, NormSequence, OuterEigenstepTable};
use eigenframe::{Matrix, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const THIRD: f64 = 1.0 / 3.0;

/// The worked five-vector example in R^3, columns n = 1..5.
pub fn example_steps() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.0, 0.0],
        vec![5.0 * THIRD, THIRD, 0.0],
        vec![5.0 * THIRD, 4.0 * THIRD, 0.0],
        vec![5.0 * THIRD, 5.0 * THIRD, 2.0 * THIRD],
        vec![5.0 * THIRD, 5.0 * THIRD, 5.0 * THIRD],
    ]
}

pub fn example_table() -> OuterEigenstepTable {
    OuterEigenstepTable::from_steps(example_steps()).unwrap()
}

/// The frame printed to four decimals for the worked example.
pub fn printed_frame_matrix() -> Matrix {
    Matrix::from_row_slice(
        3,
        5,
        &[
            1.0000, 0.6667, -0.4082, -0.1667, 0.1667, //
            0.0, 0.7454, 0.9129, 0.3727, -0.3727, //
            0.0, 0.0, 0.0, 0.9129, 0.9129,
        ],
    )
}

/// A random feasible (lambda, mu) pair: mu nonincreasing, lambda the spectrum
/// of a random frame with those norms. Tiny eigenvalues are snapped to zero.
pub fn random_pair(seed: u64, max_m: usize, max_n: usize) -> (Spectrum, NormSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    let mut mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    let mut f = Matrix::zeros(m, n);
    for j in 0..n {
        let col: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..m {
            f[(i, j)] = col[i] / norm * mu[j].sqrt();
        }
    }
    let eig = eigenframe::numerics::sym_eig(&(&f * f.transpose())).unwrap();
    let mut values: Vec<f64> = eig.values.iter().map(|&v| if v.abs() < 1e-12 { 0.0 } else { v }).collect();
    // restore the exact trace after snapping
    let drift = mu.iter().sum::<f64>() - values.iter().sum::<f64>();
    values[0] += drift;
    (Spectrum::new(values).unwrap(), NormSequence::new(mu).unwrap())
}

pub fn random_table(seed: u64, max_m: usize, max_n: usize) -> OuterEigenstepTable {
    let (lambda, mu) = random_pair(seed, max_m, max_n);
    sample_eigensteps(&lambda, &mu, seed).unwrap()
}

pub fn random_orthogonal(m: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    qr.q()
}
