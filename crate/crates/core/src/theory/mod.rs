//! Analytic oracles: Gaussian-process and alphabet denoisers, and the
//! Schur-complement lemma behind the Gaussian worst-case bound.

mod alphabet;
mod gp;
mod lemma;

pub use alphabet::{
    alphabet_denoise, alphabet_jinv_predict, alphabet_vs_gp_mse, glyph_alphabet,
    matched_gaussian_jinv_mse, Alphabet, AlphabetRow,
};
pub use gp::{
    gp_full_predictor_mse, gp_jinv_pixel_variance, gp_jinv_predictor_mse, gp_kernel, gp_sample,
    leave_one_out_variances, GpRow, GpSampler, TorusGp, TorusWrap,
};
pub use lemma::{check_psd_block_lemma, CovariancePair};

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Cholesky factor of `a + jitter * I`, escalating the jitter from 0 through
/// 1e-12 .. 1e-6 until the factorization succeeds.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let n = a.nrows();
    let mut jitter = 1e-12;
    while jitter <= 1e-6 * (1.0 + 1e-9) {
        let shifted = a + DMatrix::<f64>::identity(n, n) * jitter;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "matrix of size {n} is not positive definite even with jitter 1e-6"
    )))
}
