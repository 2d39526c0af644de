//! Blind denoising by self-supervision.
//!
//! A function is *J-invariant* when its output on a subset `J` of the
//! dimensions does not look at the input on `J`. For such functions, and noise
//! that is unbiased and independent across subsets, the self-supervised loss
//! `mse(f(x), x)` equals the ground-truth loss `mse(f(x), y)` plus the noise
//! variance, so hyperparameters can be chosen from noisy data alone.
//!
//! The crate contains:
//! - [`grid`]: rasters, matrices and partitions of the dimensions,
//! - [`noise`]: seeded synthetic noise models,
//! - [`denoise`]: median / donut median, Haar soft-thresholding, NL-means,
//! - [`jinv`]: the masking construction and an empirical invariance check,
//! - [`calibrate`]: losses, sweeps, optimal mixing and moment rescaling,
//! - [`theory`]: Gaussian-process and alphabet oracles,
//! - [`counts`]: molecule splitting, normalization, PCR rank selection and
//!   bi-cross-validation for count matrices,
//! - [`scene`] and [`pgm`]: test scenes and 16-bit graymap I/O.

pub mod calibrate;
pub mod counts;
pub mod denoise;
pub mod error;
pub mod grid;
pub mod jinv;
pub mod noise;
mod par;
pub mod pgm;
pub mod rng;
pub mod scene;
pub mod stats;
pub mod theory;

pub use calibrate::{
    check_loss_decomposition, mse, optimal_mixing, psnr, rescale_to_moments, select_best,
    self_supervised_loss, sweep, CalibrationCurve, Masking, MixingResult,
};
pub use denoise::{Denoiser, DenoiserParam};
pub use error::{Error, Result};
pub use grid::{
    gather, partition_grid, partition_random, partition_singletons, scatter, ImageGrid, Partition,
    RealMatrix,
};
pub use jinv::{
    evaluate_j_invariant, evaluate_single_j, interpolate_neighbors, verify_j_invariance,
    JInvariantDenoiser, ReplacementStrategy,
};
pub use noise::{apply_noise, noise_variance, NoiseModel, NoiseSpec};
pub use scene::{bundled_scene, synthetic_scene, SceneParams};
