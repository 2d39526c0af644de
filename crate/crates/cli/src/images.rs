use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use jinv_core::calibrate::{
    apply_param, optimal_mixing, psnr_from_mse, rescale_to_moments, sweep, Masking,
};
use jinv_core::denoise::{Denoiser, DenoiserParam};
use jinv_core::grid::{partition_grid, partition_random, partition_singletons, Partition};
use jinv_core::jinv::{verify_j_invariance, JInvariantDenoiser, ReplacementStrategy};
use jinv_core::noise::{apply_noise, noise_variance, NoiseSpec};
use jinv_core::pgm::read_pgm_file;
use jinv_core::scene::{bundled_scene, synthetic_scene, SceneParams};
use jinv_core::{mse, ImageGrid};

use crate::outputs::Outputs;

fn load(path: &Path) -> anyhow::Result<ImageGrid> {
    read_pgm_file(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Args, Debug)]
pub struct SceneArgs {
    /// Side length in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Write the fixed 128x128 scene used by the test suite instead.
    #[arg(long)]
    bundled: bool,
    #[arg(long, default_value = "scene.pgm")]
    name: String,
}

pub fn scene(a: SceneArgs, seed: u64, out: &mut Outputs) -> anyhow::Result<()> {
    let img = if a.bundled {
        bundled_scene()
    } else {
        synthetic_scene(a.size, a.size, &SceneParams::default(), seed)?
    };
    out.image(&a.name, &img)?;
    Ok(())
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("spec").required(true).multiple(false).args(["sigma", "noise", "noise_file", "preset"])))]
pub struct SimulateArgs {
    /// Clean input image (PGM).
    input: PathBuf,
    /// Additive Gaussian noise of this standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Inline noise spec, entries separated by `;`, e.g. "poisson peak=30; gaussian sigma=0.1".
    #[arg(long)]
    noise: Option<String>,
    /// Noise spec file, one entry per line.
    #[arg(long)]
    noise_file: Option<PathBuf>,
    /// Named composite: hanzi, imagenet or scmos.
    #[arg(long)]
    preset: Option<String>,
    /// Base name of the outputs (`<name>.pgm`, `<name>.meta`).
    #[arg(long, default_value = "noisy")]
    name: String,
}

pub fn simulate(a: SimulateArgs, seed: u64, out: &mut Outputs) -> anyhow::Result<()> {
    let y = load(&a.input)?;
    let spec: NoiseSpec = match (a.sigma, a.noise, a.noise_file, a.preset) {
        (Some(s), ..) => NoiseSpec::gaussian(s),
        (_, Some(text), ..) => text.parse()?,
        (_, _, Some(path), _) => std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?
            .parse()?,
        (.., Some(name)) => NoiseSpec::preset(&name)?,
        _ => bail!("no noise spec given"),
    };
    spec.validate()?;
    let x = apply_noise(&y, &spec, seed)?;
    let clipped = x
        .values()
        .iter()
        .filter(|v| !(0.0..=1.0).contains(*v))
        .count();
    let variance = match noise_variance(&spec, &y) {
        Ok(v) => v.to_string(),
        Err(_) => "undefined".to_string(),
    };
    let entries: Vec<String> = spec.to_string().lines().map(str::to_string).collect();
    let meta = format!(
        "input={}\nwidth={}\nheight={}\nseed={seed}\nspec={}\nnoise_variance={variance}\nclipped_pixels={clipped}\n",
        a.input.display(),
        x.width(),
        x.height(),
        entries.join("; "),
    );
    out.image(&format!("{}.pgm", a.name), &x)?;
    out.text(&format!("{}.meta", a.name), &meta)?;
    println!("noise_variance={variance}");
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Donut,
    Median,
    Wavelet,
    Nlm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskingKind {
    /// Apply the base denoiser directly.
    None,
    Singletons,
    /// Period-`--grid` lattice (`--grid`^2 subsets).
    Grid,
    /// `--subsets` random subsets.
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replacement {
    Interpolate,
    /// Uniform draws on [0, 1).
    Random,
}

/// Denoiser family and masking flags shared by `calibrate` and `verify-jinv`.
#[derive(Args, Debug)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    denoiser: Kind,
    /// Masking construction; defaults to none for the medians and grid otherwise.
    #[arg(long, value_enum)]
    masking: Option<MaskingKind>,
    #[arg(long, default_value_t = 4)]
    grid: usize,
    #[arg(long, default_value_t = 16)]
    subsets: usize,
    #[arg(long, value_enum, default_value_t = Replacement::Interpolate)]
    replacement: Replacement,
    /// Haar decomposition depth.
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// NL-means patch side.
    #[arg(long, default_value_t = jinv_core::denoise::NLM_PATCH)]
    patch: usize,
    /// NL-means search window side.
    #[arg(long, default_value_t = jinv_core::denoise::NLM_WINDOW)]
    window: usize,
}

impl MethodArgs {
    fn param(&self, v: f64) -> anyhow::Result<DenoiserParam> {
        let radius = || -> anyhow::Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                bail!("median radius must be a positive integer, got {v}")
            }
        };
        let p = match self.denoiser {
            Kind::Donut => DenoiserParam::donut(radius()?),
            Kind::Median => DenoiserParam::median(radius()?),
            Kind::Wavelet => DenoiserParam::WaveletThreshold {
                t: v,
                levels: self.levels,
            },
            Kind::Nlm => DenoiserParam::NlmCutoff {
                h: v,
                patch: self.patch,
                window: self.window,
            },
        };
        p.validate()?;
        Ok(p)
    }

    fn default_grid(&self) -> Vec<f64> {
        match self.denoiser {
            Kind::Donut | Kind::Median => (1..=6).map(f64::from).collect(),
            Kind::Wavelet => vec![0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2],
            Kind::Nlm => vec![0.04, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2],
        }
    }

    fn masking_kind(&self) -> MaskingKind {
        self.masking.unwrap_or(match self.denoiser {
            Kind::Donut | Kind::Median => MaskingKind::None,
            Kind::Wavelet | Kind::Nlm => MaskingKind::Grid,
        })
    }

    fn partition(
        &self,
        kind: MaskingKind,
        x: &ImageGrid,
        seed: u64,
    ) -> anyhow::Result<Option<Partition>> {
        Ok(match kind {
            MaskingKind::None => None,
            MaskingKind::Singletons => Some(partition_singletons(x.len())?),
            MaskingKind::Grid => {
                if self.grid > x.width() || self.grid > x.height() {
                    bail!(
                        "grid period {} does not fit a {}x{} image",
                        self.grid,
                        x.width(),
                        x.height()
                    );
                }
                Some(partition_grid(x.width(), x.height(), self.grid, self.grid)?)
            }
            MaskingKind::Random => Some(partition_random(x.len(), self.subsets, seed)?),
        })
    }

    fn masking(&self, x: &ImageGrid, seed: u64) -> anyhow::Result<Option<Masking>> {
        let strategy = match self.replacement {
            Replacement::Interpolate => ReplacementStrategy::InterpolateNeighbors,
            Replacement::Random => ReplacementStrategy::RandomUniform {
                lo: 0.0,
                hi: 1.0,
                seed,
            },
        };
        Ok(self
            .partition(self.masking_kind(), x, seed)?
            .map(|partition| Masking {
                partition,
                strategy,
            }))
    }
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Noisy input image (PGM).
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    /// Comma-separated parameter values (radius, threshold or cut-off).
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    /// Clean image; adds ground-truth loss and PSNR columns.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// Also write the variance-optimal mix of the estimate with the input.
    #[arg(long, requires = "noise_var")]
    mix: bool,
    /// Noise variance used for mixing.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Seed of random partitions and random replacement values.
    #[arg(long, default_value_t = 0)]
    mask_seed: u64,
}

pub fn calibrate(a: CalibrateArgs, out: &mut Outputs) -> anyhow::Result<()> {
    let x = load(&a.input)?;
    let clean = a.clean.as_deref().map(load).transpose()?;
    if let Some(y) = &clean {
        if !y.same_shape(&x) {
            bail!(
                "clean image is {}x{}, noisy image {}x{}",
                y.width(),
                y.height(),
                x.width(),
                x.height()
            );
        }
    }
    let values = a.params.clone().unwrap_or_else(|| a.method.default_grid());
    let params = values
        .iter()
        .map(|&v| a.method.param(v))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let masking = a.method.masking(&x, a.mask_seed)?;

    let curve = sweep(&params, &x, masking.as_ref(), clean.as_ref())?;
    let best = curve.select_best()?;
    let entry = curve.entry(&best).expect("selected from curve").clone();
    let f = apply_param(&best, &x, masking.as_ref())?;
    let g = best.denoise(&x)?;

    out.write_with("curve.csv", |w| curve.write_csv(w))?;
    out.image("denoised_jinv.pgm", &f)?;
    out.image("denoised_raw.pgm", &g)?;
    println!("param={best}");
    println!("ss_loss={}", entry.ss_loss);
    if let (Some(gt), Some(p)) = (entry.gt_loss, entry.psnr) {
        println!("gt_loss={gt}");
        println!("psnr={p}");
    }
    if a.mix {
        let noise_var = a.noise_var.expect("clap enforces --noise-var");
        let mixed = optimal_mixing(&f, &x, noise_var, entry.ss_loss)?;
        out.image("mixed.pgm", &mixed.mixed)?;
        println!("lambda={}", mixed.lambda);
        println!("predicted_gain_db={}", mixed.predicted_psnr_gain);
        if let Some(y) = &clean {
            println!("mixed_psnr={}", jinv_core::psnr(&mixed.mixed, y)?);
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Image to score.
    a: PathBuf,
    /// Reference image.
    b: PathBuf,
    /// Match the mean and variance of the reference before scoring.
    #[arg(long)]
    rescale: bool,
}

pub fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    let (x, y) = (load(&a.a)?, load(&a.b)?);
    if !x.same_shape(&y) {
        bail!(
            "images differ in shape: {}x{} vs {}x{}",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        );
    }
    let x = if a.rescale {
        rescale_to_moments(&x, &y)?.image
    } else {
        x
    };
    let m = mse(&x, &y)?;
    println!("mse={m}");
    println!("psnr={}", psnr_from_mse(m));
    Ok(())
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Input image (PGM).
    input: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    /// Parameter value (radius, threshold or cut-off).
    #[arg(long)]
    param: f64,
    /// Perturbation trials.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Largest tolerated change of a masked output.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
}

/// Prints the report; fails when the check does not pass.
pub fn verify(a: VerifyArgs, seed: u64) -> anyhow::Result<()> {
    let x = load(&a.input)?;
    let param = a.method.param(a.param)?;
    let report = match a.method.masking(&x, seed)? {
        Some(m) => {
            let f = JInvariantDenoiser::new(param, m.partition.clone(), m.strategy)?;
            verify_j_invariance(&f, &m.partition, &x, a.trials, seed, a.tol)?
        }
        None => verify_j_invariance(
            &param,
            &partition_singletons(x.len())?,
            &x,
            a.trials,
            seed,
            a.tol,
        )?,
    };
    println!("pass={}", report.pass);
    println!("max_deviation={}", report.max_deviation);
    println!("trials={}", report.trials);
    if !report.pass {
        bail!(
            "{param} is not J-invariant: outputs moved by {}",
            report.max_deviation
        );
    }
    Ok(())
}
