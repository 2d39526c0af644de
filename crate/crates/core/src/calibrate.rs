//! Losses, metrics and self-supervised hyperparameter calibration.

use std::io::{Read, Write};

use crate::denoise::{Denoiser, DenoiserParam};
use crate::error::{invalid, Error, Result};
use crate::grid::{ImageGrid, Partition};
use crate::jinv::{JInvariantDenoiser, ReplacementStrategy};
use crate::noise::{apply_noise, NoiseSpec};
use crate::par::map_indices;
use crate::stats::{mean, mean_se, population_variance};

/// Mean over pixels of `(a_j - b_j)^2`.
pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if !a.same_shape(b) {
        return invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        ));
    }
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10(1 / mse)` for unit-range signals; `+inf` when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn psnr(a: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, reference)?))
}

/// `mse(f(x), x)`.
pub fn self_supervised_loss(f: &dyn Denoiser, x: &ImageGrid) -> Result<f64> {
    mse(&f.denoise(x)?, x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    /// Mean over seeds of `mse(f(x), x)`.
    pub lhs: f64,
    /// Mean over seeds of `mse(f(x), y) + mse(x, y)`.
    pub rhs: f64,
    pub gap: f64,
    /// Standard error of the per-seed `lhs - rhs` differences.
    pub standard_error: f64,
    pub seeds: usize,
}

/// Monte-Carlo check that the self-supervised loss splits into the
/// supervised loss plus the noise variance.
pub fn check_loss_decomposition(
    f: &dyn Denoiser,
    y: &ImageGrid,
    spec: &NoiseSpec,
    seeds: &[u64],
) -> Result<DecompositionReport> {
    if !spec.is_unbiased() {
        return Err(Error::UnsupportedSpec(
            "loss decomposition needs unbiased, unclipped noise".into(),
        ));
    }
    if seeds.is_empty() {
        return invalid("need at least one seed");
    }
    let per_seed = map_indices(seeds.len(), |k| -> Result<(f64, f64)> {
        let x = apply_noise(y, spec, seeds[k])?;
        let fx = f.denoise(&x)?;
        Ok((mse(&fx, &x)?, mse(&fx, y)? + mse(&x, y)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = per_seed.iter().map(|p| p.1).collect();
    let diffs: Vec<f64> = per_seed.iter().map(|p| p.0 - p.1).collect();
    let (_, standard_error) = mean_se(&diffs);
    let (lhs, rhs) = (mean(&lhs), mean(&rhs));
    Ok(DecompositionReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        standard_error,
        seeds: seeds.len(),
    })
}

/// Partition plus replacement rule used to wrap a base denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Masking {
    pub partition: Partition,
    pub strategy: ReplacementStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveEntry {
    pub param: DenoiserParam,
    pub ss_loss: f64,
    pub gt_loss: Option<f64>,
    pub psnr: Option<f64>,
}

/// Per-parameter losses, in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub entries: Vec<CurveEntry>,
}

/// Output of `param` on `x`, through the masking construction when given.
pub fn apply_param(
    param: &DenoiserParam,
    x: &ImageGrid,
    masking: Option<&Masking>,
) -> Result<ImageGrid> {
    match masking {
        None => param.denoise(x),
        Some(m) => JInvariantDenoiser::new(*param, m.partition.clone(), m.strategy)?.evaluate(x),
    }
}

/// Self-supervised (and, given `clean`, ground-truth) loss for every
/// parameter. Without `masking` the base denoiser is applied directly.
pub fn sweep(
    params: &[DenoiserParam],
    x: &ImageGrid,
    masking: Option<&Masking>,
    clean: Option<&ImageGrid>,
) -> Result<CalibrationCurve> {
    if params.is_empty() {
        return invalid("parameter grid is empty");
    }
    for (i, p) in params.iter().enumerate() {
        p.validate()?;
        if params[..i].contains(p) {
            return invalid(format!("duplicate parameter {p}"));
        }
    }
    if let Some(y) = clean {
        if !y.same_shape(x) {
            return invalid("clean image shape differs from the noisy image");
        }
    }
    let entries = map_indices(params.len(), |k| -> Result<CurveEntry> {
        let param = params[k];
        let fx = apply_param(&param, x, masking)?;
        let ss_loss = mse(&fx, x)?;
        let gt_loss = clean.map(|y| mse(&fx, y)).transpose()?;
        Ok(CurveEntry {
            param,
            ss_loss,
            gt_loss,
            psnr: gt_loss.map(psnr_from_mse),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationCurve { entries })
}

impl CalibrationCurve {
    fn best_by(&self, key: impl Fn(&CurveEntry) -> f64) -> Option<&CurveEntry> {
        self.entries
            .iter()
            .fold(None, |best: Option<&CurveEntry>, e| match best {
                None => Some(e),
                Some(b) => {
                    let (ke, kb) = (key(e), key(b));
                    if ke < kb || (ke == kb && e.param.scalar() < b.param.scalar()) {
                        Some(e)
                    } else {
                        Some(b)
                    }
                }
            })
    }

    /// Parameter with the smallest self-supervised loss; ties go to the
    /// smallest radius / threshold / cut-off.
    pub fn select_best(&self) -> Result<DenoiserParam> {
        self.best_by(|e| e.ss_loss)
            .map(|e| e.param)
            .ok_or_else(|| Error::InvalidArgument("empty calibration curve".into()))
    }

    /// Parameter with the smallest ground-truth loss, when known.
    pub fn oracle_best(&self) -> Option<DenoiserParam> {
        if self.entries.iter().any(|e| e.gt_loss.is_none()) {
            return None;
        }
        self.best_by(|e| e.gt_loss.unwrap_or(f64::INFINITY))
            .map(|e| e.param)
    }

    pub fn ss_losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ss_loss).collect()
    }

    pub fn entry(&self, param: &DenoiserParam) -> Option<&CurveEntry> {
        self.entries.iter().find(|e| &e.param == param)
    }

    /// CSV with header `param,ss_loss,gt_loss,psnr`; unknown fields empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["param", "ss_loss", "gt_loss", "psnr"])
            .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.entries {
            out.write_record([
                e.param.to_string(),
                e.ss_loss.to_string(),
                opt(e.gt_loss),
                opt(e.psnr),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["param", "ss_loss", "gt_loss", "psnr"] {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "expected header param,ss_loss,gt_loss,psnr".into(),
            });
        }
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            })?;
            let field = |c: usize| -> Result<Option<f64>> {
                let s = rec.get(c).unwrap_or("");
                if s.is_empty() {
                    return Ok(None);
                }
                // "inf" is what f64's Display writes for an infinite PSNR
                s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("'{s}' is not a number"),
                })
            };
            let param = rec
                .get(0)
                .unwrap_or("")
                .parse::<DenoiserParam>()
                .map_err(|e| Error::Parse {
                    line,
                    column: 1,
                    message: e.to_string(),
                })?;
            let ss_loss = field(1)?.ok_or(Error::Parse {
                line,
                column: 2,
                message: "missing ss_loss".into(),
            })?;
            entries.push(CurveEntry {
                param,
                ss_loss,
                gt_loss: field(2)?,
                psnr: field(3)?,
            });
        }
        if entries.is_empty() {
            return invalid("calibration curve has no rows");
        }
        Ok(Self { entries })
    }
}

/// Free-function form of [`CalibrationCurve::select_best`].
pub fn select_best(curve: &CalibrationCurve) -> Result<DenoiserParam> {
    curve.select_best()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingResult {
    /// Weight on the J-invariant estimate.
    pub lambda: f64,
    pub mixed: ImageGrid,
    /// Predicted PSNR improvement of `mixed` over `fx`, in dB.
    pub predicted_psnr_gain: f64,
}

/// Variance-optimal mix `lambda * fx + (1 - lambda) * x` of a J-invariant
/// estimate with the raw input.
///
/// With `U = noise_var` and `V = ss_loss - noise_var` (the variance of `fx`
/// as an estimate of the signal) the optimum is `lambda = U / (U + V)`, i.e.
/// `noise_var / ss_loss`, and the mixture's error is `UV / (U + V)`.
pub fn optimal_mixing(
    fx: &ImageGrid,
    x: &ImageGrid,
    noise_var: f64,
    ss_loss: f64,
) -> Result<MixingResult> {
    if !fx.same_shape(x) {
        return invalid("shape mismatch between estimate and input");
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return invalid(format!("noise variance must be positive, got {noise_var}"));
    }
    if noise_var > ss_loss {
        return invalid(format!(
            "noise variance {noise_var} exceeds self-supervised loss {ss_loss}; the estimate's variance would be negative"
        ));
    }
    let lambda = noise_var / ss_loss;
    let v_over_u = (ss_loss - noise_var) / noise_var;
    let values = fx
        .values()
        .iter()
        .zip(x.values())
        .map(|(f, x)| lambda * f + (1.0 - lambda) * x)
        .collect();
    Ok(MixingResult {
        lambda,
        mixed: ImageGrid::new(x.width(), x.height(), values)?,
        predicted_psnr_gain: 10.0 * (1.0 + v_over_u).log10(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub image: ImageGrid,
    pub scale: f64,
    pub offset: f64,
    /// Set when `out` was constant and only the mean could be matched.
    pub degenerate: bool,
}

/// Affine map `scale * out + offset` whose mean and variance equal those of
/// `reference`.
pub fn rescale_to_moments(out: &ImageGrid, reference: &ImageGrid) -> Result<Rescaled> {
    if !out.same_shape(reference) {
        return invalid("shape mismatch");
    }
    let ref_var = population_variance(reference.values());
    if !(ref_var > 0.0) {
        return invalid("reference image has zero variance");
    }
    let ref_mean = reference.mean();
    let out_mean = out.mean();
    let out_var = population_variance(out.values());
    if !(out_var > 0.0) {
        return Ok(Rescaled {
            image: ImageGrid::filled(out.width(), out.height(), ref_mean)?,
            scale: 0.0,
            offset: ref_mean,
            degenerate: true,
        });
    }
    let scale = (ref_var / out_var).sqrt();
    let offset = ref_mean - scale * out_mean;
    Ok(Rescaled {
        image: out.map(|v| scale * v + offset)?,
        scale,
        offset,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::Identity;
    use crate::grid::{partition_grid, partition_singletons};
    use crate::jinv::interpolate_neighbors;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn img(v: &[f64]) -> ImageGrid {
        ImageGrid::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn random_image(w: usize, h: usize, seed: u64) -> ImageGrid {
        let mut rng = seeded(seed, 2);
        ImageGrid::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn mse_values() {
        let x = img(&[0.3, 0.1]);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        assert_eq!(mse(&img(&[0.0, 0.0]), &img(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(mse(&img(&[0.0, 2.0]), &img(&[1.0, 1.0])).unwrap(), 1.0);
        assert!(mse(&img(&[0.0]), &img(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn psnr_values() {
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!((psnr_from_mse(0.001) - 30.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(0.0), f64::INFINITY);
        let y = ImageGrid::from_fn(400, 250, |r, c| ((r + c) % 10) as f64 / 10.0).unwrap();
        let x = apply_noise(&y, &NoiseSpec::gaussian(0.1), 3).unwrap();
        assert!((psnr(&x, &y).unwrap() - 20.0).abs() < 0.1);
    }

    #[test]
    fn ss_loss_of_masked_identity() {
        let x = random_image(12, 12, 1);
        let f = JInvariantDenoiser::new(
            Identity,
            partition_grid(12, 12, 2, 2).unwrap(),
            ReplacementStrategy::InterpolateNeighbors,
        )
        .unwrap();
        let expected = mse(&interpolate_neighbors(&x), &x).unwrap();
        assert!((self_supervised_loss(&f, &x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn ss_loss_on_pure_noise() {
        // y = 0: loss ~ sigma^2 + supervised loss.
        let y = ImageGrid::filled(256, 256, 0.0).unwrap();
        let x = apply_noise(&y, &NoiseSpec::gaussian(0.2), 8).unwrap();
        let f = DenoiserParam::donut(2);
        let ss = self_supervised_loss(&f, &x).unwrap();
        let gt = mse(&f.denoise(&x).unwrap(), &y).unwrap();
        assert!((ss - (0.04 + gt)).abs() < 0.02 * ss, "ss {ss}, gt {gt}");
    }

    #[test]
    fn donut_cannot_beat_noise_floor() {
        let y = ImageGrid::filled(128, 128, 0.5).unwrap();
        let x = apply_noise(&y, &NoiseSpec::gaussian(0.1), 2).unwrap();
        for r in 1..=6 {
            let ss = self_supervised_loss(&DenoiserParam::donut(r), &x).unwrap();
            assert!(ss >= 0.01 * 0.97, "r={r}: {ss}");
        }
    }

    #[test]
    fn decomposition_exact_without_noise() {
        let y = random_image(20, 20, 3);
        let rep = check_loss_decomposition(
            &DenoiserParam::donut(2),
            &y,
            &NoiseSpec::gaussian(0.0),
            &[1, 2],
        )
        .unwrap();
        assert!(rep.gap <= 1e-12);
    }

    #[test]
    fn decomposition_masked_identity() {
        let y = ImageGrid::from_fn(64, 64, |r, c| {
            0.5 + 0.3 * ((r as f64 / 9.0).sin() * (c as f64 / 7.0).cos())
        })
        .unwrap();
        let f = JInvariantDenoiser::new(
            Identity,
            partition_singletons(64 * 64).unwrap(),
            ReplacementStrategy::InterpolateNeighbors,
        )
        .unwrap();
        let seeds: Vec<u64> = (0..20).collect();
        let rep = check_loss_decomposition(&f, &y, &NoiseSpec::gaussian(0.1), &seeds).unwrap();
        assert!(rep.gap <= 4.0 * rep.standard_error, "{rep:?}");
    }

    #[test]
    fn decomposition_rejects_biased_noise() {
        let y = random_image(8, 8, 4);
        let spec = NoiseSpec::gaussian(0.1).with_clip(0.0, 1.0);
        assert!(matches!(
            check_loss_decomposition(&Identity, &y, &spec, &[1]),
            Err(Error::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn sweep_and_selection() {
        let y = ImageGrid::from_fn(
            32,
            32,
            |r, c| if (r / 8 + c / 8) % 2 == 0 { 0.2 } else { 0.8 },
        )
        .unwrap();
        let x = apply_noise(&y, &NoiseSpec::gaussian(0.1), 5).unwrap();
        let one = sweep(&[DenoiserParam::donut(1)], &x, None, None).unwrap();
        assert_eq!(one.entries.len(), 1);
        assert!(one.entries[0].gt_loss.is_none() && one.entries[0].psnr.is_none());

        let params: Vec<_> = (1..=3).map(DenoiserParam::donut).collect();
        let curve = sweep(&params, &x, None, Some(&y)).unwrap();
        assert_eq!(
            curve.entries.iter().map(|e| e.param).collect::<Vec<_>>(),
            params
        );
        assert!(curve
            .entries
            .iter()
            .all(|e| e.gt_loss.is_some() && e.psnr.is_some()));

        assert!(sweep(&[], &x, None, None).is_err());
        assert!(sweep(
            &[DenoiserParam::donut(1), DenoiserParam::donut(1)],
            &x,
            None,
            None
        )
        .is_err());
    }

    fn curve(losses: &[f64]) -> CalibrationCurve {
        CalibrationCurve {
            entries: losses
                .iter()
                .enumerate()
                .map(|(i, &l)| CurveEntry {
                    param: DenoiserParam::donut(i + 1),
                    ss_loss: l,
                    gt_loss: None,
                    psnr: None,
                })
                .collect(),
        }
    }

    #[test]
    fn select_best_rules() {
        assert_eq!(
            select_best(&curve(&[1.0, 2.0, 3.0])).unwrap(),
            DenoiserParam::donut(1)
        );
        assert_eq!(
            select_best(&curve(&[3.0, 2.0, 1.0])).unwrap(),
            DenoiserParam::donut(3)
        );
        assert_eq!(
            select_best(&curve(&[0.5, 0.5, 0.5])).unwrap(),
            DenoiserParam::donut(1)
        );
        // tie-break is by parameter value, not position
        let mut c = curve(&[0.5, 0.5]);
        c.entries.reverse();
        assert_eq!(c.select_best().unwrap(), DenoiserParam::donut(1));
        assert!(select_best(&CalibrationCurve { entries: vec![] }).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let mut c = curve(&[0.0125, 0.011, 0.0119]);
        c.entries[1].gt_loss = Some(0.001);
        c.entries[1].psnr = Some(30.0);
        c.entries[2].gt_loss = Some(0.0);
        c.entries[2].psnr = Some(f64::INFINITY);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("param,ss_loss,gt_loss,psnr\ndonut:r=1,0.0125,,\n"));
        assert_eq!(CalibrationCurve::read_csv(buf.as_slice()).unwrap(), c);
        assert!(CalibrationCurve::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(CalibrationCurve::read_csv(
            "param,ss_loss,gt_loss,psnr\ndonut:r=1,x,,\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn mixing_arithmetic() {
        let x = img(&[0.0, 1.0]);
        let fx = img(&[1.0, 0.0]);
        let equal = optimal_mixing(&fx, &x, 0.01, 0.02).unwrap();
        assert!((equal.lambda - 0.5).abs() < 1e-15);
        assert!((equal.predicted_psnr_gain - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert_eq!(equal.mixed.values(), &[0.5, 0.5]);

        let tenth = optimal_mixing(&fx, &x, 0.01, 0.011).unwrap();
        assert!((tenth.lambda - 1.0 / 1.1).abs() < 1e-12);
        assert!((tenth.predicted_psnr_gain - 0.4139).abs() < 1e-3);

        let perfect = optimal_mixing(&fx, &x, 0.01, 0.01).unwrap();
        assert_eq!(perfect.lambda, 1.0);
        assert_eq!(perfect.predicted_psnr_gain, 0.0);
        assert_eq!(perfect.mixed, fx);

        assert!(optimal_mixing(&fx, &x, 0.02, 0.01).is_err());
        assert!(optimal_mixing(&fx, &x, 0.0, 0.01).is_err());
    }

    #[test]
    fn rescaling() {
        let y = random_image(10, 10, 6);
        let same = rescale_to_moments(&y, &y).unwrap();
        assert!((same.scale - 1.0).abs() < 1e-12 && same.offset.abs() < 1e-12);
        let distorted = y.map(|v| 2.0 * v + 3.0).unwrap();
        let back = rescale_to_moments(&distorted, &y).unwrap();
        for (a, b) in back.image.values().iter().zip(y.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = ImageGrid::filled(10, 10, 4.0).unwrap();
        let deg = rescale_to_moments(&flat, &y).unwrap();
        assert!(deg.degenerate);
        assert!(deg
            .image
            .values()
            .iter()
            .all(|v| (v - y.mean()).abs() < 1e-12));
        assert!(rescale_to_moments(&y, &flat).is_err());
    }

    proptest! {
        #[test]
        fn rescaled_moments_match(seed_a in any::<u64>(), seed_b in any::<u64>()) {
            let a = random_image(9, 7, seed_a);
            let b = random_image(9, 7, seed_b);
            let r = rescale_to_moments(&a, &b).unwrap();
            prop_assert!((r.image.mean() - b.mean()).abs() < 1e-12);
            prop_assert!((population_variance(r.image.values()) - population_variance(b.values())).abs() < 1e-12);
        }

        #[test]
        fn rescaled_psnr_is_affine_invariant(seed in any::<u64>(), scale in 0.1f64..10.0, offset in -5.0f64..5.0) {
            let y = random_image(8, 8, seed);
            let out = random_image(8, 8, seed.wrapping_add(1));
            let p0 = psnr(&rescale_to_moments(&out, &y).unwrap().image, &y).unwrap();
            let p1 = psnr(&rescale_to_moments(&out.map(|v| scale * v + offset).unwrap(), &y).unwrap().image, &y).unwrap();
            prop_assert!((p0 - p1).abs() < 1e-8);
        }
    }
}
