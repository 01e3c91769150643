//! Independent Monte Carlo oracle for the closed-form strategy moments.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// Raw power sums of `value - shift`, giving central moments without
/// cancellation when the shift is close to the mean.
#[derive(Clone)]
pub struct Moments {
    shift: f64,
    n: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

impl Moments {
    pub fn new(shift: f64) -> Self {
        Self {
            shift,
            n: 0.0,
            s1: 0.0,
            s2: 0.0,
            s3: 0.0,
            s4: 0.0,
        }
    }

    pub fn push(&mut self, value: f64) {
        let d = value - self.shift;
        let d2 = d * d;
        self.n += 1.0;
        self.s1 += d;
        self.s2 += d2;
        self.s3 += d2 * d;
        self.s4 += d2 * d2;
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.s1 / self.n
    }

    /// Central moments of order 2, 3, 4 (population normalisation).
    pub fn central(&self) -> (f64, f64, f64) {
        let n = self.n;
        let a = self.s1 / n;
        let m2 = self.s2 / n - a * a;
        let m3 = self.s3 / n - 3.0 * a * self.s2 / n + 2.0 * a.powi(3);
        let m4 = self.s4 / n - 4.0 * a * self.s3 / n + 6.0 * a * a * self.s2 / n - 3.0 * a.powi(4);
        (m2, m3, m4)
    }

    pub fn variance(&self) -> f64 {
        self.central().0 * self.n / (self.n - 1.0)
    }

    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }

    pub fn variance_se(&self) -> f64 {
        let (m2, _, m4) = self.central();
        ((m4 - m2 * m2) / self.n).sqrt()
    }

    /// Delta-method standard error of the sample mean / sd ratio.
    pub fn ratio_se(&self) -> f64 {
        let (m2, m3, m4) = self.central();
        let ir = self.mean() / m2.sqrt();
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2);
        ((1.0 - ir * skew + ir * ir * (kurt - 1.0) / 4.0) / self.n).sqrt()
    }
}

/// Unit-variance Gaussian vectors with Toeplitz correlation `rho`, built by
/// Cholesky factorisation of the full covariance.
pub struct GaussianSampler {
    chol: DMatrix<f64>,
    z: DVector<f64>,
    rng: ChaCha20Rng,
}

impl GaussianSampler {
    pub fn new(rho: &[f64], dim: usize, seed: u64) -> Self {
        let corr = DMatrix::from_fn(dim, dim, |i, j| {
            let lag = i.abs_diff(j);
            if lag == 0 {
                1.0
            } else {
                rho.get(lag - 1).copied().unwrap_or(0.0)
            }
        });
        let chol = corr
            .cholesky()
            .expect("positive definite battery profile")
            .unpack();
        Self {
            chol,
            z: DVector::zeros(dim),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self) -> DVector<f64> {
        for v in self.z.iter_mut() {
            *v = StandardNormal.sample(&mut self.rng);
        }
        &self.chol * &self.z
    }
}

/// `m_{t-1}(N) * X_t` with `X_t` the last element of `x`.
pub fn payoff(x: &[f64], n: usize) -> f64 {
    let t = x.len() - 1;
    let m = x[t - n..t].iter().sum::<f64>() / n as f64;
    m * x[t]
}
