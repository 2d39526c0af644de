//! Classical single-image denoisers with one explicit hyperparameter each.

mod median;
mod nlmeans;
mod wavelet;

use std::fmt;
use std::str::FromStr;

pub use median::median_filter;
pub use nlmeans::nl_means;
pub use wavelet::{haar_forward, haar_inverse, haar_wavelet_denoise, soft_threshold};

use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;

/// Anything that maps an image to an image of the same shape.
pub trait Denoiser: Sync {
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid>;
}

/// Default NL-means patch side.
pub const NLM_PATCH: usize = 5;
/// Default NL-means search window side.
pub const NLM_WINDOW: usize = 11;

/// A classical denoiser together with its hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenoiserParam {
    /// Median over the disk of radius `r`; `include_center = false` is the
    /// donut median.
    MedianRadius { r: usize, include_center: bool },
    /// Haar soft-thresholding of all detail coefficients.
    WaveletThreshold { t: f64, levels: usize },
    /// Non-local means with cut-off distance `h`.
    NlmCutoff { h: f64, patch: usize, window: usize },
}

impl DenoiserParam {
    pub fn donut(r: usize) -> Self {
        DenoiserParam::MedianRadius {
            r,
            include_center: false,
        }
    }

    pub fn median(r: usize) -> Self {
        DenoiserParam::MedianRadius {
            r,
            include_center: true,
        }
    }

    pub fn wavelet(t: f64) -> Self {
        DenoiserParam::WaveletThreshold { t, levels: 4 }
    }

    pub fn nlm(h: f64) -> Self {
        DenoiserParam::NlmCutoff {
            h,
            patch: NLM_PATCH,
            window: NLM_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DenoiserParam::MedianRadius { r, .. } if r == 0 => {
                invalid("median radius must be >= 1")
            }
            DenoiserParam::WaveletThreshold { t, levels }
                if !(t >= 0.0 && t.is_finite()) || levels == 0 =>
            {
                invalid(format!(
                    "wavelet needs t >= 0 and levels >= 1, got t = {t}, levels = {levels}"
                ))
            }
            DenoiserParam::NlmCutoff { h, patch, window } => {
                if !(h > 0.0) || h.is_nan() {
                    invalid(format!("NL-means cut-off must be positive, got {h}"))
                } else if patch % 2 == 0 || window % 2 == 0 || patch > window {
                    invalid(format!(
                        "NL-means needs odd patch <= odd window, got {patch} and {window}"
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The tuned scalar; used to order parameters of the same kind.
    pub fn scalar(&self) -> f64 {
        match *self {
            DenoiserParam::MedianRadius { r, .. } => r as f64,
            DenoiserParam::WaveletThreshold { t, .. } => t,
            DenoiserParam::NlmCutoff { h, .. } => h,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DenoiserParam::MedianRadius {
                include_center: false,
                ..
            } => "donut",
            DenoiserParam::MedianRadius { .. } => "median",
            DenoiserParam::WaveletThreshold { .. } => "wavelet",
            DenoiserParam::NlmCutoff { .. } => "nlm",
        }
    }
}

impl Denoiser for DenoiserParam {
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.validate()?;
        match *self {
            DenoiserParam::MedianRadius { r, include_center } => {
                median_filter(x, r, include_center)
            }
            DenoiserParam::WaveletThreshold { t, levels } => haar_wavelet_denoise(x, t, levels),
            DenoiserParam::NlmCutoff { h, patch, window } => nl_means(x, h, patch, window),
        }
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Denoiser for Identity {
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid> {
        Ok(x.clone())
    }
}

/// Adapts a closure into a [`Denoiser`].
pub struct FnDenoiser<F>(pub F);

impl<F> Denoiser for FnDenoiser<F>
where
    F: Fn(&ImageGrid) -> Result<ImageGrid> + Sync,
{
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid> {
        (self.0)(x)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid> {
        (**self).denoise(x)
    }
}

/// `median:r=3`, `donut:r=3`, `wavelet:t=0.1:levels=4`,
/// `nlm:h=0.1:patch=5:window=11`.
impl fmt::Display for DenoiserParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DenoiserParam::MedianRadius { r, .. } => write!(f, "{}:r={r}", self.kind()),
            DenoiserParam::WaveletThreshold { t, levels } => {
                write!(f, "wavelet:t={t}:levels={levels}")
            }
            DenoiserParam::NlmCutoff { h, patch, window } => {
                write!(f, "nlm:h={h}:patch={patch}:window={window}")
            }
        }
    }
}

impl FromStr for DenoiserParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or("");
        let mut fields = Vec::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value in '{s}'")))?;
            fields.push((k, v));
        }
        let num = |key: &str| -> Result<Option<f64>> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| {
                    v.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!("'{v}' is not a number in '{s}'"))
                    })
                })
                .transpose()
        };
        let int = |key: &str| -> Result<Option<usize>> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| {
                    v.parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("'{v}' is not an integer in '{s}'"))
                    })
                })
                .transpose()
        };
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("'{s}' is missing {key}")))
        };
        let param = match kind {
            "median" | "donut" => DenoiserParam::MedianRadius {
                r: int("r")?
                    .ok_or_else(|| Error::InvalidArgument(format!("'{s}' is missing r")))?,
                include_center: kind == "median",
            },
            "wavelet" => DenoiserParam::WaveletThreshold {
                t: need(num("t")?, "t")?,
                levels: int("levels")?.unwrap_or(4),
            },
            "nlm" => DenoiserParam::NlmCutoff {
                h: need(num("h")?, "h")?,
                patch: int("patch")?.unwrap_or(NLM_PATCH),
                window: int("window")?.unwrap_or(NLM_WINDOW),
            },
            other => return invalid(format!("unknown denoiser '{other}'")),
        };
        param.validate()?;
        Ok(param)
    }
}
