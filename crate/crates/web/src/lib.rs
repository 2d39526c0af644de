//! Browser bindings: calibrate a denoiser on a synthetic scene, compare the
//! two Gaussian-process predictors, and run one masked denoise.
//!
//! The plain functions return `String` errors so they can be tested off the
//! browser; the `#[wasm_bindgen]` wrappers turn those into JS exceptions.

use jinv_core::calibrate::apply_param;
use jinv_core::theory::GpRow;
use jinv_core::{
    apply_noise, noise_variance, optimal_mixing, partition_grid, psnr, sweep, synthetic_scene,
    DenoiserParam, ImageGrid, Masking, NoiseSpec, ReplacementStrategy, SceneParams,
};
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn param(kind: &str, value: f64) -> Result<DenoiserParam, String> {
    let r = || {
        if value >= 0.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(format!("{kind} needs a whole radius, got {value}"))
        }
    };
    match kind {
        "median" => Ok(DenoiserParam::median(r()?)),
        "donut" => Ok(DenoiserParam::donut(r()?)),
        "wavelet" => Ok(DenoiserParam::wavelet(value)),
        "nlm" => Ok(DenoiserParam::nlm(value)),
        _ => Err(format!("unknown denoiser {kind:?}")),
    }
}

fn grid_masking(w: usize, h: usize, side: usize) -> Result<Masking, String> {
    Ok(Masking {
        partition: partition_grid(w, h, side, side).map_err(msg)?,
        strategy: ReplacementStrategy::InterpolateNeighbors,
    })
}

/// Result of a calibration sweep on a noisy synthetic scene.
#[wasm_bindgen]
pub struct Calibration {
    size: usize,
    clean: Vec<f64>,
    noisy: Vec<f64>,
    denoised: Vec<f64>,
    mixed: Vec<f64>,
    params: Vec<f64>,
    ss_loss: Vec<f64>,
    gt_loss: Vec<f64>,
    best: usize,
    lambda: f64,
    noisy_psnr: f64,
    denoised_psnr: f64,
    mixed_psnr: f64,
}

#[wasm_bindgen]
impl Calibration {
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn clean(&self) -> Vec<f64> {
        self.clean.clone()
    }
    pub fn noisy(&self) -> Vec<f64> {
        self.noisy.clone()
    }
    pub fn denoised(&self) -> Vec<f64> {
        self.denoised.clone()
    }
    pub fn mixed(&self) -> Vec<f64> {
        self.mixed.clone()
    }
    pub fn params(&self) -> Vec<f64> {
        self.params.clone()
    }
    pub fn ss_loss(&self) -> Vec<f64> {
        self.ss_loss.clone()
    }
    pub fn gt_loss(&self) -> Vec<f64> {
        self.gt_loss.clone()
    }
    /// Index of the parameter with the smallest self-supervised loss.
    pub fn best(&self) -> usize {
        self.best
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn noisy_psnr(&self) -> f64 {
        self.noisy_psnr
    }
    pub fn denoised_psnr(&self) -> f64 {
        self.denoised_psnr
    }
    pub fn mixed_psnr(&self) -> f64 {
        self.mixed_psnr
    }
}

pub fn run_calibration(
    size: usize,
    sigma: f64,
    kind: &str,
    values: &[f64],
    seed: u64,
) -> Result<Calibration, String> {
    let clean = synthetic_scene(size, size, &SceneParams::default(), seed).map_err(msg)?;
    let spec = NoiseSpec::gaussian(sigma);
    let noisy = apply_noise(&clean, &spec, seed).map_err(msg)?;
    let params = values
        .iter()
        .map(|&v| param(kind, v))
        .collect::<Result<Vec<_>, _>>()?;
    let masking = grid_masking(size, size, 4)?;
    let curve = sweep(&params, &noisy, Some(&masking), Some(&clean)).map_err(msg)?;
    let chosen = curve.select_best().map_err(msg)?;
    let best = params.iter().position(|p| *p == chosen).unwrap_or(0);
    let denoised = apply_param(&chosen, &noisy, Some(&masking)).map_err(msg)?;
    let var = noise_variance(&spec, &clean).map_err(msg)?;
    let mix = optimal_mixing(&denoised, &noisy, var, curve.entries[best].ss_loss).map_err(msg)?;
    Ok(Calibration {
        size,
        noisy_psnr: psnr(&noisy, &clean).map_err(msg)?,
        denoised_psnr: psnr(&denoised, &clean).map_err(msg)?,
        mixed_psnr: psnr(&mix.mixed, &clean).map_err(msg)?,
        lambda: mix.lambda,
        clean: clean.values().to_vec(),
        noisy: noisy.values().to_vec(),
        denoised: denoised.values().to_vec(),
        mixed: mix.mixed.values().to_vec(),
        params: values.to_vec(),
        ss_loss: curve.entries.iter().map(|e| e.ss_loss).collect(),
        gt_loss: curve
            .entries
            .iter()
            .map(|e| e.gt_loss.unwrap_or(f64::NAN))
            .collect(),
        best,
    })
}

/// Adds Gaussian noise to a `size`x`size` synthetic scene and sweeps the
/// masked `kind` denoiser over `values`.
#[wasm_bindgen]
pub fn calibrate_scene(
    size: usize,
    sigma: f64,
    kind: &str,
    values: Vec<f64>,
    seed: u32,
) -> Result<Calibration, JsError> {
    run_calibration(size, sigma, kind, &values, seed as u64).map_err(|e| JsError::new(&e))
}

/// `[jinv_mse, full_mse]` for each lengthscale, flattened.
pub fn gp_rows(side: usize, sigma: f64, lengthscales: &[f64]) -> Result<Vec<f64>, String> {
    if side > 16 {
        return Err(format!("side {side} is too large for the browser (max 16)"));
    }
    if !(sigma > 0.0) {
        return Err(format!("sigma must be positive, got {sigma}"));
    }
    let mut out = Vec::with_capacity(2 * lengthscales.len());
    for &l in lengthscales {
        let row = GpRow::compute(side, l, sigma).map_err(msg)?;
        out.extend([row.jinv_mse, row.full_mse]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn gp_curve(side: usize, sigma: f64, lengthscales: Vec<f64>) -> Result<Vec<f64>, JsError> {
    gp_rows(side, sigma, &lengthscales).map_err(|e| JsError::new(&e))
}

pub fn masked(
    pixels: &[f64],
    width: usize,
    height: usize,
    kind: &str,
    value: f64,
    grid: usize,
) -> Result<Vec<f64>, String> {
    let x = ImageGrid::new(width, height, pixels.to_vec()).map_err(msg)?;
    let p = param(kind, value)?;
    let m = grid_masking(width, height, grid)?;
    Ok(apply_param(&p, &x, Some(&m))
        .map_err(msg)?
        .values()
        .to_vec())
}

/// Masked denoise of a row-major image with `grid`x`grid` masking.
#[wasm_bindgen]
pub fn masked_denoise(
    pixels: Vec<f64>,
    width: usize,
    height: usize,
    kind: &str,
    value: f64,
    grid: usize,
) -> Result<Vec<f64>, JsError> {
    masked(&pixels, width, height, kind, value, grid).map_err(|e| JsError::new(&e))
}
