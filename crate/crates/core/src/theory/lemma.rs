use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::grid::RealMatrix;

/// Covariance blocks of a jointly distributed `(x, y)`: `sigma_xy` has one
/// row per `x` coordinate and one column per `y` coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_xx: RealMatrix,
    pub sigma_yy: RealMatrix,
    pub sigma_xy: RealMatrix,
}

impl CovariancePair {
    /// Splits a joint `(n + k)` square covariance with the first `n`
    /// coordinates being `x`.
    pub fn from_joint(joint: &RealMatrix, n: usize) -> Result<Self> {
        if joint.rows() != joint.cols() || n == 0 || n >= joint.rows() {
            return invalid(format!(
                "cannot split a {}x{} matrix at {n}",
                joint.rows(),
                joint.cols()
            ));
        }
        let x: Vec<usize> = (0..n).collect();
        let y: Vec<usize> = (n..joint.rows()).collect();
        Ok(Self {
            sigma_xx: joint.select(&x, &x)?,
            sigma_yy: joint.select(&y, &y)?,
            sigma_xy: joint.select(&x, &y)?,
        })
    }

    fn joint(&self) -> DMatrix<f64> {
        let n = self.sigma_xx.rows();
        let k = self.sigma_yy.rows();
        DMatrix::from_fn(n + k, n + k, |p, q| match (p < n, q < n) {
            (true, true) => self.sigma_xx.get(p, q),
            (false, false) => self.sigma_yy.get(p - n, q - n),
            (true, false) => self.sigma_xy.get(p, q - n),
            (false, true) => self.sigma_xy.get(q, p - n),
        })
    }
}

fn check_symmetric(m: &RealMatrix, name: &str) -> Result<()> {
    if m.rows() != m.cols() {
        return invalid(format!(
            "{name} is {}x{}, expected square",
            m.rows(),
            m.cols()
        ));
    }
    let scale = m
        .values()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    for r in 0..m.rows() {
        for c in 0..r {
            if (m.get(r, c) - m.get(c, r)).abs() > 1e-12 * scale {
                return invalid(format!("{name} is not symmetric at ({r}, {c})"));
            }
        }
    }
    Ok(())
}

/// Whether the joint covariance is positive semi-definite, decided through
/// the generalized Schur complement `S_yy - S_yx S_xx^+ S_xy`: the joint
/// matrix is PSD iff `S_xx` is PSD, `S_xy` lies in the range of `S_xx`, and
/// the complement is PSD. Eigenvalues down to `-1e-9 * ||S||_F` count as
/// nonnegative.
pub fn check_psd_block_lemma(cov: &CovariancePair) -> Result<bool> {
    check_symmetric(&cov.sigma_xx, "sigma_xx")?;
    check_symmetric(&cov.sigma_yy, "sigma_yy")?;
    let (n, k) = (cov.sigma_xx.rows(), cov.sigma_yy.rows());
    if cov.sigma_xy.rows() != n || cov.sigma_xy.cols() != k {
        return invalid(format!(
            "sigma_xy is {}x{}, expected {n}x{k}",
            cov.sigma_xy.rows(),
            cov.sigma_xy.cols()
        ));
    }
    let tol = 1e-9 * cov.joint().norm().max(f64::MIN_POSITIVE);

    let eig = cov.sigma_xx.to_dmatrix().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return Ok(false);
    }
    let inv_diag = eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
    let sxx = cov.sigma_xx.to_dmatrix();
    let sxy = cov.sigma_xy.to_dmatrix();

    let residual = &sxy - &sxx * &pinv * &sxy;
    if residual.norm() > 1e-7 * (1.0 + sxy.norm()) {
        return Ok(false);
    }
    let schur = cov.sigma_yy.to_dmatrix() - sxy.transpose() * &pinv * &sxy;
    let schur = (&schur + schur.transpose()) * 0.5;
    Ok(schur
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&l| l >= -tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn real(m: &DMatrix<f64>) -> RealMatrix {
        RealMatrix::from_dmatrix(m).unwrap()
    }

    #[test]
    fn identity_is_psd() {
        let pair = CovariancePair::from_joint(&real(&DMatrix::identity(5, 5)), 2).unwrap();
        assert!(check_psd_block_lemma(&pair).unwrap());
    }

    #[test]
    fn hand_built_indefinite() {
        // positive diagonal blocks, but correlation 2 between unit variances
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(
            !check_psd_block_lemma(&CovariancePair::from_joint(&real(&j), 1).unwrap()).unwrap()
        );
        // indefinite leading block
        let j = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(
            !check_psd_block_lemma(&CovariancePair::from_joint(&real(&j), 2).unwrap()).unwrap()
        );
        // singular x block with y correlated outside its range
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 5.0]);
        assert!(
            !check_psd_block_lemma(&CovariancePair::from_joint(&real(&j), 1).unwrap()).unwrap()
        );
    }

    #[test]
    fn rejects_non_symmetric() {
        let j = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            check_psd_block_lemma(&CovariancePair::from_joint(&real(&j), 2).unwrap()),
            Err(crate::Error::InvalidArgument(_))
        ));
        let pair = CovariancePair {
            sigma_xx: real(&DMatrix::identity(2, 2)),
            sigma_yy: real(&DMatrix::identity(1, 1)),
            sigma_xy: real(&DMatrix::zeros(1, 2)),
        };
        assert!(check_psd_block_lemma(&pair).is_err());
    }

    #[test]
    fn law_of_total_variance() {
        // y scalar, x = A y-ish joint Gaussian built from a random factor
        let mut rng = seeded(5, 5);
        let f = DMatrix::from_fn(4, 6, |_, _| StandardNormal.sample(&mut rng));
        let joint = f.transpose() * &f / 4.0 + DMatrix::<f64>::identity(6, 6) * 0.1;
        let sxx = joint.view((0, 0), (5, 5)).into_owned();
        let sxy = joint.view((0, 5), (5, 1)).into_owned();
        let syy = joint[(5, 5)];
        let beta = sxx.clone().cholesky().unwrap().solve(&sxy);
        let cond_var = syy - (sxy.transpose() * &beta)[(0, 0)];
        let chol = joint.clone().cholesky().unwrap();
        let n = 40_000;
        let (mut ys, mut means) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let z = nalgebra::DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
            let s = chol.l() * z;
            ys.push(s[5]);
            means.push((beta.transpose() * s.rows(0, 5))[(0, 0)]);
        }
        let total = crate::stats::sample_variance(&ys);
        let explained = crate::stats::sample_variance(&means);
        let rel = (total - (explained + cond_var)).abs() / syy;
        assert!(
            rel < 0.03,
            "total {total} explained {explained} cond {cond_var}"
        );
    }

    proptest::proptest! {
        #[test]
        fn factorized_covariances_are_psd(seed in 0u64..1000, rank in 1usize..7, n in 1usize..5) {
            let mut rng = seeded(seed, 3);
            let f = DMatrix::from_fn(rank, 6, |_, _| rng.random_range(-2.0..2.0));
            let joint = f.transpose() * f;
            let joint = (&joint + joint.transpose()) * 0.5;
            let pair = CovariancePair::from_joint(&real(&joint), n).unwrap();
            proptest::prop_assert!(check_psd_block_lemma(&pair).unwrap());
        }
    }
}
