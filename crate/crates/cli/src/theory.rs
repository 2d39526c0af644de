use std::io::Write;

use anyhow::bail;
use clap::{Args, ValueEnum};
use jinv_core::theory::{alphabet_vs_gp_mse, glyph_alphabet, GpRow, GpSampler, TorusGp, TorusWrap};
use jinv_core::ImageGrid;

use crate::outputs::Outputs;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrap {
    Periodized,
    MinImage,
}

#[derive(Args, Debug)]
pub struct GpArgs {
    /// Torus side (at most 33).
    #[arg(long, default_value_t = 9)]
    side: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
    lengthscales: Vec<f64>,
    /// Noise standard deviation; must be positive.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = Wrap::Periodized)]
    wrap: Wrap,
}

/// Unit-variance fields are shown as `0.5 + v / 6`, so +-3 sd spans the
/// grey range.
fn display(img: &ImageGrid) -> anyhow::Result<ImageGrid> {
    Ok(img.map(|v| 0.5 + v / 6.0)?)
}

pub fn gp_demo(a: GpArgs, seed: u64, out: &mut Outputs) -> anyhow::Result<()> {
    if a.side > 33 {
        bail!("side {} is too large for dense solves (max 33)", a.side);
    }
    if !(a.sigma > 0.0) {
        bail!("sigma must be positive, got {}", a.sigma);
    }
    let wrap = match a.wrap {
        Wrap::Periodized => TorusWrap::Periodized,
        Wrap::MinImage => TorusWrap::MinImage,
    };
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for &l in &a.lengthscales {
        let gp = TorusGp::new(a.side, l, a.sigma)?.with_wrap(wrap);
        let row = GpRow {
            lengthscale: l,
            jinv_mse: jinv_core::theory::gp_jinv_predictor_mse(&gp)?,
            full_mse: jinv_core::theory::gp_full_predictor_mse(&gp)?,
        };
        rows.push(row);
        samples.push((l, GpSampler::new(&gp)?.sample(seed)?));
    }
    out.write_with("gp_curve.csv", |w| {
        writeln!(w, "lengthscale,jinv_mse,full_mse")?;
        for r in &rows {
            writeln!(w, "{},{},{}", r.lengthscale, r.jinv_mse, r.full_mse)?;
        }
        Ok(())
    })?;
    for (l, (y, x)) in &samples {
        out.image(&format!("gp_l{l}_clean.pgm"), &display(y)?)?;
        out.image(&format!("gp_l{l}_noisy.pgm"), &display(x)?)?;
    }
    for r in &rows {
        println!("lengthscale={} gap={}", r.lengthscale, r.gap());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AlphabetArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.8, 1.6])]
    sigmas: Vec<f64>,
    /// Monte-Carlo trials per noise level.
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Number of procedurally drawn glyphs.
    #[arg(long, default_value_t = 30)]
    glyphs: usize,
    /// Glyph side in pixels.
    #[arg(long, default_value_t = 16)]
    glyph_side: usize,
}

pub fn alphabet_demo(a: AlphabetArgs, seed: u64, out: &mut Outputs) -> anyhow::Result<()> {
    let letters = glyph_alphabet(a.glyphs, a.glyph_side, 0)?;
    let rows = alphabet_vs_gp_mse(&letters, &a.sigmas, seed, a.trials)?;
    out.write_with("alphabet_curve.csv", |w| {
        writeln!(w, "sigma,alphabet_mse,gp_mse")?;
        for r in &rows {
            writeln!(w, "{},{},{}", r.sigma, r.alphabet_mse, r.gp_mse)?;
        }
        Ok(())
    })?;
    for r in &rows {
        println!(
            "sigma={} alphabet_mse={} alphabet_se={} gp_mse={}",
            r.sigma, r.alphabet_mse, r.alphabet_se, r.gp_mse
        );
    }
    Ok(())
}
