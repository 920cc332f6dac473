//! Frame bounds, canonical duals and the mean square error of noisy
//! reconstruction, in closed form and by Monte-Carlo simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{max_abs, sym_eig, trace_inverse, Matrix, Spectrum, TOL_EIG};
use crate::synthesis::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    /// Uniform on `[-sigma sqrt(3), sigma sqrt(3)]`.
    Uniform,
}

/// iid zero-mean additive noise on each of the N frame coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma2: f64,
    distribution: NoiseDistribution,
    seed: u64,
}

impl NoiseModel {
    pub fn new(sigma2: f64, distribution: NoiseDistribution, seed: u64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidNoise(format!("variance must be positive, got {sigma2}")));
        }
        Ok(NoiseModel {
            sigma2,
            distribution,
            seed,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn distribution(&self) -> NoiseDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Noise vector of length `n` for trial `trial`. Each trial owns its own
    /// generator stream, so results do not depend on evaluation order.
    pub fn draw(&self, n: usize, trial: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        let sigma = self.sigma2.sqrt();
        match self.distribution {
            NoiseDistribution::Gaussian => (0..n)
                .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect(),
            NoiseDistribution::Uniform => {
                let half = sigma * 3.0_f64.sqrt();
                let dist = Uniform::new_inclusive(-half, half).expect("finite bounds");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        }
    }
}

/// A dual frame `G` of `F`, i.e. `F G^* = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFrame {
    matrix: Matrix,
}

impl DualFrame {
    pub fn new(matrix: Matrix) -> Self {
        DualFrame { matrix }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Largest entry of `|F G^* - I|`.
    pub fn duality_defect(&self, frame: &Frame) -> Result<f64> {
        if self.matrix.shape() != frame.matrix().shape() {
            return Err(Error::Dimension(format!(
                "dual is {:?} but frame is {:?}",
                self.matrix.shape(),
                frame.matrix().shape()
            )));
        }
        let m = frame.dim();
        Ok(max_abs(&(frame.matrix() * self.matrix.transpose() - Matrix::identity(m, m))))
    }
}

pub fn frame_spectrum(frame: &Frame) -> Result<Spectrum> {
    sym_eig(&frame.frame_operator())?.spectrum()
}

/// The canonical dual `(F F^*)^{-1} F`.
pub fn canonical_dual(frame: &Frame) -> Result<DualFrame> {
    let spectrum = frame_spectrum(frame)?;
    if spectrum.min() <= TOL_EIG {
        return Err(Error::Singular {
            min_eigenvalue: spectrum.min(),
        });
    }
    let chol = frame
        .frame_operator()
        .cholesky()
        .ok_or(Error::Singular {
            min_eigenvalue: spectrum.min(),
        })?;
    Ok(DualFrame::new(chol.solve(frame.matrix())))
}

/// Optimal frame bounds `(A, B)`: the extreme eigenvalues of `F F^*`.
pub fn frame_bounds(frame: &Frame) -> Result<(f64, f64)> {
    let s = frame_spectrum(frame)?;
    Ok((s.min(), s.max()))
}

/// Reconstruction MSE of the canonical dual: `sigma^2 Tr[(F F^*)^{-1}]`.
pub fn mse_closed_form(frame: &Frame, noise: &NoiseModel) -> Result<f64> {
    Ok(noise.sigma2() * trace_inverse(&frame_spectrum(frame)?)?)
}

/// MSE of a unit-norm tight frame of N vectors in R^M: `sigma^2 M^2 / N`.
pub fn mse_untf(m: usize, n: usize, sigma2: f64) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidNoise(format!("variance must be positive, got {sigma2}")));
    }
    Ok(sigma2 * (m * m) as f64 / n as f64)
}

/// Unit-norm columns and a flat frame-operator spectrum, both within `tol`.
pub fn is_untf(frame: &Frame, tol: f64) -> Result<bool> {
    Ok(tight_constant(frame, tol)?.is_some() && frame.squared_norms().iter().all(|n| (n - 1.0).abs() <= tol))
}

/// The constant `A` with `F F^* = A I`, if the frame is tight within `tol`.
pub fn tight_constant(frame: &Frame, tol: f64) -> Result<Option<f64>> {
    let s = frame_spectrum(frame)?;
    if s.max() - s.min() <= tol && s.min() > TOL_EIG {
        Ok(Some(s.sum() / s.len() as f64))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Standard error of the mean; infinite for a single trial.
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Empirical mean of `||G eps||^2` over `trials` noise draws, where `G` is
/// the dual used for reconstruction. The signal cancels from the error, so
/// none is needed.
pub fn monte_carlo_mse(frame: &Frame, dual: &DualFrame, noise: &NoiseModel, trials: u64) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let defect = dual.duality_defect(frame)?;
    if defect > 1e-6 {
        return Err(Error::DualityViolation { deviation: defect });
    }
    let n = frame.len();
    let g = dual.matrix();
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let eps = nalgebra::DVector::from_vec(noise.draw(n, t));
            (g * eps).norm_squared()
        })
        .collect();
    // sequential reduction keeps the result independent of thread scheduling
    let count = trials as f64;
    let mean = errors.iter().sum::<f64>() / count;
    let stderr = if trials > 1 {
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(MonteCarloEstimate {
        estimate: mean,
        stderr,
        trials,
        seed: noise.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_frame(m: usize) -> Frame {
        Frame::new(Matrix::identity(m, m)).unwrap()
    }

    #[test]
    fn identity_is_self_dual() {
        let f = identity_frame(3);
        let d = canonical_dual(&f).unwrap();
        assert_abs_diff_eq!(d.matrix().clone(), Matrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn single_vector_is_not_a_frame_for_r2() {
        let f = Frame::from_columns(2, &[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(canonical_dual(&f), Err(Error::Singular { .. })));
        assert!(mse_closed_form(&f, &NoiseModel::new(1.0, NoiseDistribution::Gaussian, 0).unwrap()).is_err());
    }

    #[test]
    fn bounds_of_repeated_vector() {
        let f = Frame::from_columns(2, &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let (a, b) = frame_bounds(&f).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-14);
        assert!(!is_untf(&f, 1e-6).unwrap());
    }

    #[test]
    fn identity_mse() {
        let noise = NoiseModel::new(0.25, NoiseDistribution::Gaussian, 0).unwrap();
        assert_abs_diff_eq!(mse_closed_form(&identity_frame(2), &noise).unwrap(), 0.5, epsilon = 1e-14);
        assert!(is_untf(&identity_frame(2), 1e-12).unwrap());
        assert_eq!(tight_constant(&identity_frame(2), 1e-12).unwrap(), Some(1.0));
    }

    #[test]
    fn untf_formula() {
        assert_abs_diff_eq!(mse_untf(3, 5, 1.0).unwrap(), 1.8, epsilon = 1e-15);
        for m in 1..6 {
            assert_abs_diff_eq!(mse_untf(m, m, 1.0).unwrap(), m as f64, epsilon = 1e-15);
        }
        let values: Vec<f64> = (3..50).map(|n| mse_untf(3, n, 1.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
        assert!(mse_untf(4, 3, 1.0).is_err());
    }

    #[test]
    fn noise_model_rejects_zero_variance() {
        assert!(NoiseModel::new(0.0, NoiseDistribution::Gaussian, 0).is_err());
        assert!(NoiseModel::new(-1.0, NoiseDistribution::Uniform, 0).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let f = identity_frame(2);
        let d = canonical_dual(&f).unwrap();
        let noise = NoiseModel::new(1.0, NoiseDistribution::Uniform, 11).unwrap();
        let a = monte_carlo_mse(&f, &d, &noise, 1).unwrap();
        let b = monte_carlo_mse(&f, &d, &noise, 1).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert!(a.stderr.is_infinite());
    }

    #[test]
    fn monte_carlo_rejects_non_dual() {
        let f = identity_frame(2);
        let d = DualFrame::new(Matrix::identity(2, 2) * 2.0);
        let noise = NoiseModel::new(1.0, NoiseDistribution::Gaussian, 0).unwrap();
        assert!(matches!(monte_carlo_mse(&f, &d, &noise, 10), Err(Error::DualityViolation { .. })));
    }

    #[test]
    fn uniform_noise_has_requested_variance() {
        let noise = NoiseModel::new(0.5, NoiseDistribution::Uniform, 3).unwrap();
        let draws: Vec<f64> = (0..2000).flat_map(|t| noise.draw(10, t)).collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((var - 0.5).abs() < 0.02, "{var}");
    }
}
