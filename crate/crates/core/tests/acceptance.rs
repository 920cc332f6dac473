//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

mod common;

use std::panic;
use std::time::{Duration, Instant};

use common::{printed_frame_matrix, example_table, random_orthogonal, random_table};
use eigenframe::analysis::{
    canonical_dual, frame_bounds, frame_spectrum, is_untf, monte_carlo_mse, mse_closed_form, mse_untf,
    NoiseDistribution, NoiseModel,
};
use eigenframe::completion::{brute_force_completion, complete_frame, CompletionOptions, CompletionProblem};
use eigenframe::eigensteps::{
    inner_to_outer, outer_to_inner, sample_eigensteps, validate_inner, validate_outer, NormSequence,
};
use eigenframe::numerics::sym_eig;
use eigenframe::synthesis::{construct_frame, residue_norm_targets, verify_frame, verify_frame_tol, Frame};
use eigenframe::{Matrix, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn untf_frame(m: usize, n: usize, seed: u64) -> Result<Frame, String> {
    let lambda = Spectrum::new(vec![n as f64 / m as f64; m]).map_err(|e| e.to_string())?;
    let mu = NormSequence::new(vec![1.0; n]).map_err(|e| e.to_string())?;
    let table = sample_eigensteps(&lambda, &mu, seed).map_err(|e| e.to_string())?;
    construct_frame(&table, &random_orthogonal(m, seed)).map_err(|e| e.to_string())
}

fn printed_example_verifies() -> Outcome {
    let start = Instant::now();
    let table = example_table();
    let report = validate_outer(&table);
    ensure(report.passed, || format!("table rejected: {report}"))?;
    let frame = Frame::new(printed_frame_matrix()).map_err(|e| e.to_string())?;
    let report = verify_frame_tol(&frame, &table, 5e-4).map_err(|e| e.to_string())?;
    ensure(report.passed, || format!("printed frame rejected: {report}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("validated and verified in {:.2?}", start.elapsed()))
}

fn synthesis_reproduces_example() -> Outcome {
    let table = example_table();
    let frame = construct_frame(&table, &Matrix::identity(3, 3)).map_err(|e| e.to_string())?;
    let report = verify_frame(&frame, &table).map_err(|e| e.to_string())?;
    ensure(report.passed, || format!("synthesized frame rejected: {report}"))?;
    let worst_norm = frame.squared_norms().iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    ensure(worst_norm <= 1e-12, || format!("norm deviation {worst_norm:e}"))?;
    let spectrum = frame_spectrum(&frame).map_err(|e| e.to_string())?;
    let worst = spectrum.iter().map(|l| (l - 5.0 / 3.0).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("final spectrum {:?}", spectrum.values()))?;
    Ok(format!("unit norms, spectrum 5/3 within {worst:.1e}"))
}

fn untf_error_formula() -> Outcome {
    let noise = NoiseModel::new(1.0, NoiseDistribution::Gaussian, 0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (m, n) in [(2, 3), (3, 5), (4, 7), (2, 8)] {
        let frame = untf_frame(m, n, (10 * m + n) as u64)?;
        ensure(is_untf(&frame, 1e-8).unwrap_or(false), || format!("({m},{n}) not a UNTF"))?;
        let closed = mse_closed_form(&frame, &noise).map_err(|e| e.to_string())?;
        let formula = mse_untf(m, n, 1.0).map_err(|e| e.to_string())?;
        let rel = (closed - formula).abs() / formula;
        ensure(rel <= 1e-7, || format!("({m},{n}): {closed} vs {formula}"))?;
        if (m, n) == (3, 5) {
            ensure((closed - 1.8).abs() <= 1e-7 * 1.8, || format!("(3,5) gives {closed}"))?;
        }
        worst = worst.max(rel);
    }
    Ok(format!("four shapes, worst relative deviation {worst:.1e}"))
}

fn monte_carlo_matches() -> Outcome {
    let start = Instant::now();
    let frame = untf_frame(3, 5, 7)?;
    let dual = canonical_dual(&frame).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for dist in [NoiseDistribution::Gaussian, NoiseDistribution::Uniform] {
        let noise = NoiseModel::new(0.01, dist, 2024).map_err(|e| e.to_string())?;
        let mc = monte_carlo_mse(&frame, &dual, &noise, 100_000).map_err(|e| e.to_string())?;
        let rel = (mc.estimate - 0.018).abs() / 0.018;
        ensure(rel <= 0.03, || format!("{dist:?}: {} is {:.2}% off", mc.estimate, 100.0 * rel))?;
        parts.push(format!("{dist:?} {:.5}", mc.estimate));
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{} in {:.2?}", parts.join(", "), start.elapsed()))
}

fn conversions_round_trip() -> Outcome {
    for seed in 0..200 {
        let outer = random_table(seed, 5, 8);
        let report = validate_outer(&outer);
        ensure(report.passed, || format!("seed {seed}: outer {report}"))?;
        let inner = outer_to_inner(&outer).map_err(|e| e.to_string())?;
        let report = validate_inner(&inner);
        ensure(report.passed, || format!("seed {seed}: inner {report}"))?;
        let back = inner_to_outer(&inner, outer.dim()).map_err(|e| e.to_string())?;
        let same = back
            .rows()
            .iter()
            .flatten()
            .zip(outer.rows().iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same && back.rows().len() == outer.rows().len(), || format!("seed {seed}: outer round trip differs"))?;
        let again = outer_to_inner(&back).map_err(|e| e.to_string())?;
        let same = again.rows().iter().flatten().zip(inner.rows().iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same && again.rows().len() == inner.rows().len(), || format!("seed {seed}: inner round trip differs"))?;
    }
    Ok("200 tables, both directions bit-identical".into())
}

fn projections_match_residues() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let table = random_table(1000 + seed, 4, 8);
        let u1 = random_orthogonal(table.dim(), seed);
        let frame = construct_frame(&table, &u1).map_err(|e| format!("seed {seed}: {e}"))?;
        for n in 1..table.len() {
            let (prev, next) = (table.row(n), table.row(n + 1));
            let targets = residue_norm_targets(prev, next).map_err(|e| e.to_string())?;
            let total: f64 = targets.iter().map(|t| t.target).sum();
            let mu = table.mu().values()[n];
            ensure((total - mu).abs() <= 1e-8, || format!("seed {seed} n {n}: targets sum {total}, norm {mu}"))?;

            let eig = sym_eig(&frame.partial_frame_operator(n)).map_err(|e| e.to_string())?;
            let f = frame.column(n);
            let delta = 1e-6 * (1.0 + table.lambda().max());
            for t in &targets {
                let projected: f64 = eig
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| (v - t.eigenvalue).abs() <= delta)
                    .map(|(i, _)| eig.vectors.column(i).dot(&f).powi(2))
                    .sum();
                let expected: f64 =
                    targets.iter().filter(|o| (o.eigenvalue - t.eigenvalue).abs() <= delta).map(|o| o.target).sum();
                let err = (projected - expected).abs();
                worst = worst.max(err);
                ensure(err <= 1e-6, || {
                    format!("seed {seed} n {n} eigenvalue {}: {projected} vs {expected}", t.eigenvalue)
                })?;
            }
        }
    }
    Ok(format!("100 tables, worst projection error {worst:.1e}"))
}

fn random_columns(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn completion_reaches_oracles() -> Outcome {
    let start = Instant::now();
    let examples: [(Vec<Vec<f64>>, Vec<f64>, f64); 3] = [
        (vec![vec![1.0, 0.0]], vec![1.0], 2.0),
        (vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![1.0], 1.5),
        (vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], 1.0),
    ];
    for (cols, mu, oracle) in examples {
        let initial = Frame::from_columns(2, &cols).map_err(|e| e.to_string())?;
        let problem = CompletionProblem::new(initial, mu, CompletionOptions::default()).map_err(|e| e.to_string())?;
        let r = complete_frame(&problem).map_err(|e| e.to_string())?;
        ensure((r.objective - oracle).abs() <= 1e-3, || format!("objective {} vs {oracle}", r.objective))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut margin = f64::INFINITY;
    for i in 0..20 {
        let dim = rng.random_range(2..=3);
        let k = rng.random_range(1..=2);
        let n0 = rng.random_range(dim - 1..=dim + 1);
        let cols = random_columns(&mut rng, dim, n0);
        let mu: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..1.5)).collect();
        let initial = Frame::from_columns(dim, &cols).map_err(|e| e.to_string())?;
        let problem = CompletionProblem::new(initial, mu, CompletionOptions::default()).map_err(|e| e.to_string())?;
        let ours = complete_frame(&problem).map_err(|e| format!("instance {i}: {e}"))?;
        let brute = brute_force_completion(&problem, 100_000, i).map_err(|e| e.to_string())?;
        if brute.objective.is_finite() {
            ensure(ours.objective <= brute.objective + 1e-3, || {
                format!("instance {i}: {} worse than brute force {}", ours.objective, brute.objective)
            })?;
            margin = margin.min(brute.objective - ours.objective);
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("3 examples + 20 random instances, smallest margin over brute force {margin:.1e}, {:.2?}", start.elapsed()))
}

fn monotone_and_scaling() -> Outcome {
    let noise = NoiseModel::new(1.0, NoiseDistribution::Gaussian, 0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let dim = rng.random_range(1..=4);
        let n = rng.random_range(dim..=dim + 4);
        let frame = Frame::new(Matrix::from_fn(dim, n, |_, _| rng.sample(StandardNormal))).map_err(|e| e.to_string())?;
        let base = mse_closed_form(&frame, &noise).map_err(|e| e.to_string())?;
        let extra = nalgebra::DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let grown = frame.with_columns(&[extra]).map_err(|e| e.to_string())?;
        let after = mse_closed_form(&grown, &noise).map_err(|e| e.to_string())?;
        ensure(after < base, || format!("trial {trial}: adding a vector raised the error {base} -> {after}"))?;

        let (a, b) = frame_bounds(&frame).map_err(|e| e.to_string())?;
        for c in [0.5, 2.0, 10.0] {
            let scaled = frame.scaled(c).map_err(|e| e.to_string())?;
            let mse = mse_closed_form(&scaled, &noise).map_err(|e| e.to_string())?;
            ensure((mse * c * c - base).abs() <= 1e-10 * base, || format!("trial {trial} c {c}: {mse} vs {base}"))?;
            let (sa, sb) = frame_bounds(&scaled).map_err(|e| e.to_string())?;
            ensure(
                (sa - c * c * a).abs() <= 1e-10 * c * c * b && (sb - c * c * b).abs() <= 1e-10 * c * c * b,
                || format!("trial {trial} c {c}: bounds ({sa}, {sb}) vs ({a}, {b})"),
            )?;
        }
    }
    let sequence: Vec<f64> = (3..=10).map(|n| mse_untf(3, n, 1.0).unwrap()).collect();
    ensure(sequence.windows(2).all(|w| w[1] < w[0]), || "UNTF error not decreasing in N".into())?;
    Ok("20 frames, scale factors 0.5, 2, 10".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("printed example validates and verifies", printed_example_verifies),
        ("synthesis reproduces the worked example", synthesis_reproduces_example),
        ("UNTF error equals sigma^2 M^2 / N", untf_error_formula),
        ("Monte-Carlo error matches closed form", monte_carlo_matches),
        ("outer/inner conversion round trips", conversions_round_trip),
        ("projections match residue targets", projections_match_residues),
        ("completion matches oracles", completion_reaches_oracles),
        ("monotonicity and scaling", monotone_and_scaling),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({detail})", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {}: {name} ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
