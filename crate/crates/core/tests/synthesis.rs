mod common;

use common::*;
use eigenframe::numerics::{orthogonality_defect, sym_eig};
use eigenframe::synthesis::{construct_frame, construct_u, residue_norm_targets, verify_frame, verify_frame_tol, Frame};
use eigenframe::Matrix;

#[test]
fn printed_frame_verifies_at_print_precision() {
    let frame = Frame::new(printed_frame_matrix()).unwrap();
    let report = verify_frame_tol(&frame, &example_table(), 5e-4).unwrap();
    assert!(report.passed, "{report}");
}

#[test]
fn perturbed_printed_frame_fails() {
    let mut f = printed_frame_matrix();
    f[(0, 4)] = -f[(0, 4)];
    let report = verify_frame_tol(&Frame::new(f).unwrap(), &example_table(), 5e-4).unwrap();
    assert!(!report.passed);
    // f_5 no longer has the prescribed components in the eigenbasis of F_4 F_4^*
    assert_eq!(report.clause(), Some("projection"), "{report}");
}

#[test]
fn random_tables_synthesize_and_verify() {
    for seed in 0..200 {
        let table = random_table(seed, 5, 8);
        let frame = construct_frame(&table, &Matrix::identity(table.dim(), table.dim()))
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let report = verify_frame(&frame, &table).unwrap();
        assert!(report.passed, "seed {seed}: {report}");
        for (n, norm) in frame.squared_norms().iter().enumerate() {
            assert!((norm - table.mu().values()[n]).abs() < 1e-8);
        }
    }
}

#[test]
fn step_mass_equals_added_norm() {
    for seed in 0..100 {
        let table = random_table(seed, 5, 8);
        for n in 1..table.len() {
            let step = construct_u(table.row(n), table.row(n + 1)).unwrap();
            let mass: f64 = step.f_rel.iter().map(|p| p * p).sum();
            assert!((mass - table.mu().values()[n]).abs() < 1e-8, "seed {seed} n {n}");
            assert!(orthogonality_defect(&step.u_rel) < 1e-8);
        }
    }
}

#[test]
fn residue_targets_match_step_components() {
    for seed in 0..100 {
        let table = random_table(seed, 5, 8);
        for n in 1..table.len() {
            let (prev, next) = (table.row(n), table.row(n + 1));
            let step = construct_u(prev, next).unwrap();
            let targets = residue_norm_targets(prev, next).unwrap();
            for t in &targets {
                // mass the step puts on positions carrying this eigenvalue
                let mass: f64 = (0..prev.len())
                    .filter(|&k| (prev[k] - t.eigenvalue).abs() <= 1e-9)
                    .map(|k| step.f_rel[k] * step.f_rel[k])
                    .sum();
                assert!((mass - t.target).abs() < 1e-10, "seed {seed} n {n}: {mass} vs {}", t.target);
            }
            let total: f64 = targets.iter().map(|t| t.target).sum();
            assert!((total - table.mu().values()[n]).abs() < 1e-8);
        }
    }
}

#[test]
fn basis_covariance() {
    for seed in 0..50 {
        let table = random_table(seed, 5, 8);
        let m = table.dim();
        let u1 = random_orthogonal(m, seed + 1000);
        let rotated = construct_frame(&table, &u1).unwrap();
        let plain = construct_frame(&table, &Matrix::identity(m, m)).unwrap();
        let diff = (rotated.matrix() - &u1 * plain.matrix()).abs().max();
        assert!(diff < 1e-9, "seed {seed}: {diff}");
    }
}

#[test]
fn accumulated_basis_stays_orthogonal_for_long_sequences() {
    use eigenframe::eigensteps::{sample_eigensteps, NormSequence};
    use eigenframe::Spectrum;
    let (m, n) = (4, 64);
    let lambda = Spectrum::new(vec![n as f64 / m as f64; m]).unwrap();
    let mu = NormSequence::new(vec![1.0; n]).unwrap();
    let table = sample_eigensteps(&lambda, &mu, 3).unwrap();
    let frame = construct_frame(&table, &Matrix::identity(m, m)).unwrap();
    assert!(verify_frame(&frame, &table).unwrap().passed);
    let eig = sym_eig(&frame.frame_operator()).unwrap();
    assert!(eig.values.iter().all(|v| (v - 16.0).abs() < 1e-7));
}
