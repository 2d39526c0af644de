use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::grid::{ImageGrid, RealMatrix};
use crate::rng::seeded;

use super::cholesky_with_jitter;

/// How distances wrap around the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TorusWrap {
    /// Per-axis sum of the Gaussian over all periodic images, normalized to
    /// a unit diagonal. Always positive semi-definite.
    #[default]
    Periodized,
    /// Gaussian of the shortest wrapped distance. Not positive semi-definite
    /// once the length scale is a sizeable fraction of the side.
    MinImage,
}

/// Squared-exponential Gaussian process on a `side` x `side` torus observed
/// through white Gaussian noise of standard deviation `noise_sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGp {
    pub side: usize,
    pub lengthscale: f64,
    pub noise_sigma: f64,
    pub wrap: TorusWrap,
}

impl TorusGp {
    pub fn new(side: usize, lengthscale: f64, noise_sigma: f64) -> Result<Self> {
        let gp = Self {
            side,
            lengthscale,
            noise_sigma,
            wrap: TorusWrap::Periodized,
        };
        gp.validate()?;
        Ok(gp)
    }

    pub fn with_wrap(mut self, wrap: TorusWrap) -> Self {
        self.wrap = wrap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return invalid(format!("torus side must be >= 2, got {}", self.side));
        }
        if !(self.lengthscale > 0.0) || !self.lengthscale.is_finite() {
            return invalid(format!(
                "length scale must be positive, got {}",
                self.lengthscale
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return invalid(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }

    /// Kernel value between two pixels that are `d` apart along one axis.
    fn axis_kernel(&self) -> Vec<f64> {
        let n = self.side;
        let l2 = 2.0 * self.lengthscale * self.lengthscale;
        match self.wrap {
            TorusWrap::MinImage => (0..n)
                .map(|d| {
                    let d = d.min(n - d) as f64;
                    (-d * d / l2).exp()
                })
                .collect(),
            TorusWrap::Periodized => {
                let images = (8.0 * self.lengthscale / n as f64).ceil() as i64 + 1;
                let raw: Vec<f64> = (0..n as i64)
                    .map(|d| {
                        (-images..=images)
                            .map(|w| {
                                let t = (d + w * n as i64) as f64;
                                (-t * t / l2).exp()
                            })
                            .sum()
                    })
                    .collect();
                raw.iter().map(|v| v / raw[0]).collect()
            }
        }
    }

    pub(crate) fn kernel_dmatrix(&self) -> DMatrix<f64> {
        let n = self.side;
        let k1 = self.axis_kernel();
        let m = n * n;
        DMatrix::from_fn(m, m, |p, q| {
            let (pr, pc) = (p / n, p % n);
            let (qr, qc) = (q / n, q % n);
            let dr = (pr + n - qr) % n;
            let dc = (pc + n - qc) % n;
            k1[dr] * k1[dc]
        })
    }

    fn noisy_covariance(&self) -> DMatrix<f64> {
        let m = self.side * self.side;
        self.kernel_dmatrix()
            + DMatrix::<f64>::identity(m, m) * (self.noise_sigma * self.noise_sigma)
    }

    fn require_noise(&self) -> Result<()> {
        if self.noise_sigma > 0.0 {
            Ok(())
        } else {
            invalid("predictor MSE needs noise_sigma > 0")
        }
    }
}

/// The `side^2` x `side^2` covariance of the process.
pub fn gp_kernel(gp: &TorusGp) -> Result<RealMatrix> {
    gp.validate()?;
    RealMatrix::from_dmatrix(&gp.kernel_dmatrix())
}

/// Draws fields from one factorization of the kernel.
#[derive(Debug, Clone)]
pub struct GpSampler {
    gp: TorusGp,
    lower: DMatrix<f64>,
}

impl GpSampler {
    pub fn new(gp: &TorusGp) -> Result<Self> {
        gp.validate()?;
        let chol = cholesky_with_jitter(&gp.kernel_dmatrix())?;
        Ok(Self {
            gp: *gp,
            lower: chol.l(),
        })
    }

    /// A clean field `y ~ N(0, K)` and its noisy observation `x`.
    pub fn sample(&self, seed: u64) -> Result<(ImageGrid, ImageGrid)> {
        let (side, sigma) = (self.gp.side, self.gp.noise_sigma);
        let mut rng = seeded(seed, 0x6770);
        let z = DVector::from_fn(side * side, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (&self.lower * z).iter().copied().collect();
        let x: Vec<f64> = y
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                if sigma == 0.0 {
                    v
                } else {
                    v + sigma * e
                }
            })
            .collect();
        Ok((
            ImageGrid::new(side, side, y)?,
            ImageGrid::new(side, side, x)?,
        ))
    }
}

/// Draws a clean field `y ~ N(0, K)` and its noisy observation `x`.
pub fn gp_sample(gp: &TorusGp, seed: u64) -> Result<(ImageGrid, ImageGrid)> {
    GpSampler::new(gp)?.sample(seed)
}

fn inverse_noisy_covariance(gp: &TorusGp) -> Result<DMatrix<f64>> {
    let a = gp.noisy_covariance();
    let chol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Numeric("K + sigma^2 I is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// Per-pixel expected error of `E[y | x]`: `tr(K - K (K + s^2 I)^-1 K) / m`,
/// evaluated as `s^2 - s^4 tr((K + s^2 I)^-1) / m`.
pub fn gp_full_predictor_mse(gp: &TorusGp) -> Result<f64> {
    gp.validate()?;
    gp.require_noise()?;
    let s2 = gp.noise_sigma * gp.noise_sigma;
    let inv = inverse_noisy_covariance(gp)?;
    let m = inv.nrows() as f64;
    Ok(s2 - s2 * s2 * inv.trace() / m)
}

/// `Var(y_j | x_{-j})` for every `j`, given the signal covariance `cov` and
/// white noise of variance `noise_var`. Uses `1 / P_jj - noise_var` with
/// `P = (cov + noise_var I)^-1`.
pub fn leave_one_out_variances(cov: &DMatrix<f64>, noise_var: f64) -> Result<Vec<f64>> {
    if !(noise_var > 0.0) {
        return invalid("noise variance must be positive");
    }
    let n = cov.nrows();
    let a = cov + DMatrix::<f64>::identity(n, n) * noise_var;
    let inv = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Numeric("covariance plus noise is not positive definite".into()))?
        .inverse();
    Ok((0..n).map(|j| 1.0 / inv[(j, j)] - noise_var).collect())
}

/// Per-pixel expected error of the best singleton-J-invariant predictor,
/// `mean_j Var(y_j | x_{-j})`.
pub fn gp_jinv_predictor_mse(gp: &TorusGp) -> Result<f64> {
    gp.validate()?;
    gp.require_noise()?;
    let v = leave_one_out_variances(&gp.kernel_dmatrix(), gp.noise_sigma * gp.noise_sigma)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// `Var(y_j | x_{-j}) = K_jj - k^T (K_{-j,-j} + s^2 I)^-1 k` by a direct solve
/// for one pixel.
pub fn gp_jinv_pixel_variance(gp: &TorusGp, j: usize) -> Result<f64> {
    gp.validate()?;
    gp.require_noise()?;
    let k = gp.kernel_dmatrix();
    let m = k.nrows();
    if j >= m {
        return invalid(format!("pixel {j} out of range for {m} pixels"));
    }
    let rest: Vec<usize> = (0..m).filter(|&i| i != j).collect();
    let s2 = gp.noise_sigma * gp.noise_sigma;
    let a = DMatrix::from_fn(m - 1, m - 1, |p, q| {
        k[(rest[p], rest[q])] + if p == q { s2 } else { 0.0 }
    });
    let kj = DVector::from_fn(m - 1, |p, _| k[(rest[p], j)]);
    let sol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Numeric("conditioning system is not positive definite".into()))?
        .solve(&kj);
    Ok(k[(j, j)] - kj.dot(&sol))
}

/// One row of the length-scale curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpRow {
    pub lengthscale: f64,
    pub jinv_mse: f64,
    pub full_mse: f64,
}

impl GpRow {
    pub fn compute(side: usize, lengthscale: f64, noise_sigma: f64) -> Result<Self> {
        let gp = TorusGp::new(side, lengthscale, noise_sigma)?;
        Ok(Self {
            lengthscale,
            jinv_mse: gp_jinv_predictor_mse(&gp)?,
            full_mse: gp_full_predictor_mse(&gp)?,
        })
    }

    pub fn gap(&self) -> f64 {
        self.jinv_mse - self.full_mse
    }
}
