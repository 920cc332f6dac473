//! Frame completion: append vectors of prescribed squared norms to a fixed
//! frame so that `Tr[(F F^*)^{-1}]` of the completed frame is small.
//!
//! The objective depends on the completed frame only through its spectrum,
//! and every chain of interlacing spectra with the right trace increments is
//! realized by actual vectors. The search therefore runs over spectrum chains
//! (water-filling, then coordinate descent with random restarts) and the
//! winning chain is synthesized step by step in the running eigenbasis.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, trace_inverse, Matrix, Spectrum, TOL_CANCEL, TOL_EIG};
use crate::synthesis::{construct_u_tol, Frame};

/// Cancellation tolerance used when the first synthesis attempt misses.
const RETRY_CANCEL_TOL: f64 = 1e-6;
/// Objective margin by which completion must match the sampling oracle.
pub const ORACLE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOptions {
    /// Initial coordinate-descent step; defaults to `1e-3 * sum(mu_new)`.
    pub grid_step: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
    /// Accepted deviation of the synthesized spectrum from the optimized one.
    pub tol: f64,
    /// When set, also run [`brute_force_completion`] with this many samples
    /// and attach the comparison to the result.
    pub oracle_samples: Option<u64>,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            grid_step: None,
            restarts: 8,
            seed: 0,
            tol: 1e-6,
            oracle_samples: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionProblem {
    initial: Frame,
    mu_new: Vec<f64>,
    options: CompletionOptions,
}

impl CompletionProblem {
    pub fn new(initial: Frame, mu_new: Vec<f64>, options: CompletionOptions) -> Result<Self> {
        if mu_new.is_empty() {
            return Err(Error::InvalidInput("no vectors to append".into()));
        }
        if let Some(bad) = mu_new.iter().find(|&&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput(format!("appended squared norms must be positive, got {bad}")));
        }
        Ok(CompletionProblem {
            initial,
            mu_new,
            options,
        })
    }

    pub fn initial(&self) -> &Frame {
        &self.initial
    }

    pub fn mu_new(&self) -> &[f64] {
        &self.mu_new
    }

    pub fn options(&self) -> &CompletionOptions {
        &self.options
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCertificate {
    pub oracle_objective: f64,
    pub samples: u64,
    pub seed: u64,
    /// `objective <= oracle_objective + ORACLE_MARGIN`.
    pub dominates: bool,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// Appended vectors, in the order of `mu_new`.
    pub appended: Vec<Vec<f64>>,
    /// Initial columns followed by `appended`.
    pub completed: Frame,
    pub final_spectrum: Spectrum,
    /// `Tr[(F_N F_N^*)^{-1}]`; infinite when the completed frame does not span.
    pub objective: f64,
    /// Frame-operator spectra, starting with the initial frame's.
    pub chain: Vec<Spectrum>,
    /// Index into `mu_new` of the vector added at each chain step.
    pub insertion_order: Vec<usize>,
    pub certificate: Option<OracleCertificate>,
}

pub fn initial_spectrum(initial: &Frame) -> Result<Spectrum> {
    sym_eig(&initial.frame_operator())?.spectrum()
}

/// `Tr` of the inverse, or infinity for a singular spectrum.
pub fn objective_of(lambda: &[f64]) -> f64 {
    trace_inverse(lambda).unwrap_or(f64::INFINITY)
}

/// Orders spectra by number of vanishing eigenvalues, then by the sum of
/// reciprocals of the others, so that progress is visible before spanning.
fn score(lambda: &[f64]) -> (usize, f64) {
    let zeros = lambda.iter().filter(|&&v| v <= TOL_EIG).count();
    let recip = lambda.iter().filter(|&&v| v > TOL_EIG).map(|v| 1.0 / v).sum();
    (zeros, recip)
}

fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1 - 1e-14 * b.1.abs().max(1.0))
}

/// Interlacing box for the spectrum after one rank-one update of `base`:
/// `base[m] <= next[m] <= base[m-1]`.
fn bounds(base: &[f64], m: usize) -> (f64, f64) {
    let hi = if m == 0 { f64::INFINITY } else { base[m - 1] };
    (base[m], hi)
}

/// The spectrum reachable from `base` by adding a vector of squared norm
/// `mu` that minimizes the trace of the inverse: a water level `t` clamped to
/// each interlacing box.
pub fn water_fill(base: &[f64], mu: f64) -> Vec<f64> {
    let m = base.len();
    let target: f64 = base.iter().sum::<f64>() + mu;
    let level_sum = |t: f64| -> f64 {
        (0..m)
            .map(|k| {
                let (lo, hi) = bounds(base, k);
                t.clamp(lo, hi)
            })
            .sum()
    };
    let mut breaks: Vec<f64> = base.to_vec();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut level = None;
    let mut prev: Option<(f64, f64)> = None;
    for &b in &breaks {
        let g = level_sum(b);
        if g >= target {
            level = Some(match prev {
                Some((pb, pg)) if g > pg => pb + (target - pg) * (b - pb) / (g - pg),
                _ => b,
            });
            break;
        }
        prev = Some((b, g));
    }
    let t = match level {
        Some(t) => t,
        None => {
            // above every breakpoint only the top box is still open
            let (pb, pg) = prev.expect("nonempty spectrum");
            pb + (target - pg)
        }
    };
    (0..m)
        .map(|k| {
            let (lo, hi) = bounds(base, k);
            t.clamp(lo, hi)
        })
        .collect()
}

/// Greedy continuation: water-fill each remaining step.
fn greedy_tail(start: &[f64], mus: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(mus.len());
    let mut current = start.to_vec();
    for &mu in mus {
        current = water_fill(&current, mu);
        rows.push(current.clone());
    }
    rows
}

/// A point of the interlacing box of `base` with trace increased by `mu`,
/// drawn coordinate by coordinate.
fn random_step(base: &[f64], mu: f64, rng: &mut impl Rng) -> Vec<f64> {
    let m = base.len();
    let mut remaining: f64 = base.iter().sum::<f64>() + mu;
    let mut lo_after = vec![0.0; m + 1];
    let mut hi_after = vec![0.0; m + 1];
    for k in (0..m).rev() {
        let (lo, hi) = bounds(base, k);
        lo_after[k] = lo_after[k + 1] + lo;
        hi_after[k] = hi_after[k + 1] + hi;
    }
    let mut row = vec![0.0; m];
    for k in 0..m {
        let (lo, hi) = bounds(base, k);
        let upper = hi.min(remaining - lo_after[k + 1]);
        let lower = lo.max(remaining - hi_after[k + 1]);
        let v = if upper > lower {
            lower + rng.random::<f64>() * (upper - lower)
        } else {
            lower.min(upper).max(lo)
        };
        row[k] = v;
        remaining -= v;
    }
    row
}

/// Coordinate descent over the intermediate rows of `chain` (rows 1..k-1):
/// move `step` between two coordinates of one row, re-derive the later rows
/// greedily, keep the move if the final objective improves. The step is
/// halved whenever a sweep makes no progress.
fn refine(mut chain: Vec<Vec<f64>>, mus: &[f64], step: f64, min_step: f64, max_sweeps: usize) -> Vec<Vec<f64>> {
    let k = mus.len();
    if k < 2 {
        return chain;
    }
    let m = chain[0].len();
    let mut best = score(&chain[k]);
    let mut step = step;
    let mut sweeps = 0;
    while step >= min_step && sweeps < max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for j in 1..k {
            for a in 0..m {
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    let mut candidate = chain[j].clone();
                    candidate[a] += step;
                    candidate[b] -= step;
                    let (lo_a, hi_a) = bounds(&chain[j - 1], a);
                    let (lo_b, hi_b) = bounds(&chain[j - 1], b);
                    if candidate[a] > hi_a || candidate[a] < lo_a || candidate[b] < lo_b || candidate[b] > hi_b {
                        continue;
                    }
                    let tail = greedy_tail(&candidate, &mus[j..]);
                    let s = score(tail.last().expect("nonempty tail"));
                    if better(s, best) {
                        best = s;
                        chain[j] = candidate;
                        for (offset, row) in tail.into_iter().enumerate() {
                            chain[j + 1 + offset] = row;
                        }
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    chain
}

/// Searches for the chain `lambda0 = c_0, c_1, .., c_k` of interlacing spectra
/// with `sum(c_j) - sum(c_{j-1}) = mu_sorted[j-1]` whose last element has the
/// smallest trace of the inverse. `mu_sorted` is taken in the given order;
/// [`complete_frame`] passes it nonincreasing.
pub fn optimize_final_spectrum(
    lambda0: &Spectrum,
    mu_sorted: &[f64],
    options: &CompletionOptions,
) -> Result<(Spectrum, Vec<Spectrum>)> {
    if mu_sorted.is_empty() {
        return Err(Error::InvalidInput("no vectors to append".into()));
    }
    let total: f64 = mu_sorted.iter().sum();
    let step = options.grid_step.unwrap_or(1e-3 * total);
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {step}")));
    }
    let min_step = step * 1e-4;
    let base = lambda0.values().to_vec();

    let candidates: Vec<(usize, Vec<Vec<f64>>)> = (0..=options.restarts)
        .into_par_iter()
        .map(|r| {
            let mut chain = vec![base.clone()];
            if r == 0 {
                chain.extend(greedy_tail(&base, mu_sorted));
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(r as u64);
                let k = mu_sorted.len();
                for (j, &mu) in mu_sorted.iter().enumerate() {
                    let prev = chain.last().expect("nonempty").clone();
                    let next = if j + 1 == k {
                        water_fill(&prev, mu)
                    } else {
                        let greedy = water_fill(&prev, mu);
                        let wild = random_step(&prev, mu, &mut rng);
                        let w: f64 = rng.random();
                        greedy.iter().zip(&wild).map(|(g, x)| (1.0 - w) * g + w * x).collect()
                    };
                    chain.push(next);
                }
            }
            (r, refine(chain, mu_sorted, step, min_step, 400))
        })
        .collect();

    let (_, best) = candidates
        .into_iter()
        .reduce(|a, b| if better(score(b.1.last().unwrap()), score(a.1.last().unwrap())) { b } else { a })
        .expect("at least one restart");
    let chain = best
        .into_iter()
        .map(Spectrum::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((chain.last().cloned().expect("nonempty chain"), chain))
}

/// Adds one vector per chain step. The new vector's coordinates in the
/// current eigenbasis of the frame operator come from the eigenbasis step
/// between consecutive chain spectra.
fn synthesize(initial: &Frame, chain: &[Spectrum], mus: &[f64], cancel_tol: f64) -> Result<Vec<DVector<f64>>> {
    let mut frame = initial.clone();
    let mut added = Vec::with_capacity(mus.len());
    for (j, &mu) in mus.iter().enumerate() {
        let eig = sym_eig(&frame.frame_operator())?;
        let step = construct_u_tol(&chain[j], &chain[j + 1], cancel_tol)?;
        let mut v = &eig.vectors * &step.f_rel;
        let norm = v.norm();
        if norm > 0.0 {
            v *= mu.sqrt() / norm;
        }
        frame = frame.with_columns(std::slice::from_ref(&v))?;
        added.push(v);
    }
    Ok(added)
}

fn spectrum_deviation(frame: &Frame, target: &Spectrum) -> Result<f64> {
    let eig = sym_eig(&frame.frame_operator())?;
    Ok(eig
        .values
        .iter()
        .zip(target.values())
        .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs())))
}

pub fn complete_frame(problem: &CompletionProblem) -> Result<CompletionResult> {
    let options = problem.options();
    let lambda0 = initial_spectrum(problem.initial())?;
    let mut order: Vec<usize> = (0..problem.mu_new().len()).collect();
    order.sort_by(|&a, &b| problem.mu_new()[b].total_cmp(&problem.mu_new()[a]));
    let mus: Vec<f64> = order.iter().map(|&i| problem.mu_new()[i]).collect();

    let (final_spectrum, chain) = optimize_final_spectrum(&lambda0, &mus, options)?;
    let allowed = options.tol * final_spectrum.max().max(1.0);

    let mut last_failure = String::new();
    let mut added = None;
    for cancel_tol in [TOL_CANCEL, RETRY_CANCEL_TOL] {
        match synthesize(problem.initial(), &chain, &mus, cancel_tol) {
            Ok(vectors) => {
                let completed = problem.initial().with_columns(&vectors)?;
                let deviation = spectrum_deviation(&completed, &final_spectrum)?;
                if deviation <= allowed {
                    added = Some(vectors);
                    break;
                }
                last_failure = format!("synthesized spectrum deviates by {deviation:e}");
            }
            Err(e) => last_failure = e.to_string(),
        }
    }
    let Some(added) = added else {
        return Err(Error::Tolerance(format!("completion synthesis failed: {last_failure}")));
    };

    let mut appended = vec![Vec::new(); added.len()];
    for (v, &slot) in added.iter().zip(&order) {
        appended[slot] = v.iter().copied().collect();
    }
    let columns: Vec<DVector<f64>> = appended.iter().map(|v| DVector::from_column_slice(v)).collect();
    let completed = problem.initial().with_columns(&columns)?;
    let objective = objective_of(&final_spectrum);

    let certificate = match options.oracle_samples {
        Some(samples) => {
            let oracle = brute_force_completion(problem, samples, options.seed)?;
            Some(OracleCertificate {
                oracle_objective: oracle.objective,
                samples,
                seed: options.seed,
                dominates: objective <= oracle.objective + ORACLE_MARGIN,
            })
        }
        None => None,
    };

    Ok(CompletionResult {
        appended,
        completed,
        final_spectrum,
        objective,
        chain,
        insertion_order: order,
        certificate,
    })
}

fn random_vectors(dim: usize, mus: &[f64], seed: u64, sample: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    mus.iter()
        .map(|&mu| loop {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 1e-12 {
                break v * (mu.sqrt() / norm);
            }
        })
        .collect()
}

fn trace_of_inverse(op: &Matrix) -> f64 {
    match op.clone().cholesky() {
        Some(chol) => {
            let inv = chol.inverse();
            let t = inv.trace();
            if t.is_finite() && t > 0.0 {
                t
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Reference completion by uniform sampling on the product of spheres of
/// radii `sqrt(mu)`; returns the best of `samples` draws. Intended for small
/// problems: it refuses more than 10^6 samples unless `M <= 3` and at most
/// two vectors are appended.
pub fn brute_force_completion(problem: &CompletionProblem, samples: u64, seed: u64) -> Result<CompletionResult> {
    let dim = problem.initial().dim();
    let k = problem.mu_new().len();
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    if !(dim <= 3 && k <= 2) && samples > 1_000_000 {
        return Err(Error::Guard(format!(
            "{samples} samples for M={dim} with {k} appended vectors; at most 10^6 allowed"
        )));
    }
    let base = problem.initial().frame_operator();
    let mus = problem.mu_new();
    let (best_obj, best_idx) = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut op = base.clone();
            for v in random_vectors(dim, mus, seed, s) {
                op += &v * v.transpose();
            }
            (trace_of_inverse(&op), s)
        })
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let best_idx = if best_idx == u64::MAX { 0 } else { best_idx };

    let vectors = random_vectors(dim, mus, seed, best_idx);
    let completed = problem.initial().with_columns(&vectors)?;
    let n0 = problem.initial().len();
    let chain = (n0..=completed.len())
        .map(|n| sym_eig(&completed.partial_frame_operator(n))?.spectrum())
        .collect::<Result<Vec<_>>>()?;
    let final_spectrum = chain.last().cloned().expect("nonempty chain");
    let objective = if best_obj.is_finite() { objective_of(&final_spectrum) } else { f64::INFINITY };
    Ok(CompletionResult {
        appended: vectors.iter().map(|v| v.iter().copied().collect()).collect(),
        completed,
        final_spectrum,
        objective,
        chain,
        insertion_order: (0..k).collect(),
        certificate: None,
    })
}
