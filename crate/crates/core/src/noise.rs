//! Seeded synthetic noise models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Poisson, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;
use crate::par::map_indices;
use crate::rng::element_rng;

/// One stage of a noise pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Additive white Gaussian noise.
    Gaussian { sigma: f64 },
    /// Photon counting: `k ~ Poisson(peak * x)`, returned as `k / peak`.
    Poisson { peak: f64 },
    /// With probability `p` a pixel is replaced by `low` or `high`
    /// (each with probability one half).
    Bernoulli { p: f64, low: f64, high: f64 },
    /// Additive Cauchy noise with the given scale.
    CauchyAdditive { scale: f64 },
    /// Per-pixel multiplicative gain `1 + N(0, sigma_gain^2)`.
    GainField { sigma_gain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clip {
    pub lo: f64,
    pub hi: f64,
}

/// An ordered noise pipeline with optional final clipping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseSpec {
    pub stages: Vec<NoiseModel>,
    pub clip: Option<Clip>,
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseModel::Poisson { peak } => peak.is_finite() && peak > 0.0,
            NoiseModel::Bernoulli { p, low, high } => {
                (0.0..=1.0).contains(&p) && low.is_finite() && high.is_finite()
            }
            NoiseModel::CauchyAdditive { scale } => scale.is_finite() && scale >= 0.0,
            NoiseModel::GainField { sigma_gain } => sigma_gain.is_finite() && sigma_gain >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid noise parameters: {self}"))
        }
    }

    fn apply_one(&self, v: f64, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    v
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    v + sigma * z
                }
            }
            NoiseModel::Poisson { peak } => {
                let lambda = peak * v.max(0.0);
                if lambda == 0.0 {
                    0.0
                } else {
                    // lambda is finite and positive here
                    let k: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                    k / peak
                }
            }
            NoiseModel::Bernoulli { p, low, high } => {
                if rng.random::<f64>() < p {
                    if rng.random::<bool>() {
                        high
                    } else {
                        low
                    }
                } else {
                    v
                }
            }
            NoiseModel::CauchyAdditive { scale } => {
                if scale == 0.0 {
                    v
                } else {
                    v + Cauchy::new(0.0, scale).expect("positive scale").sample(rng)
                }
            }
            NoiseModel::GainField { sigma_gain } => {
                if sigma_gain == 0.0 {
                    v
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    v * (1.0 + sigma_gain * z)
                }
            }
        }
    }
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self::single(NoiseModel::Gaussian { sigma })
    }

    pub fn single(model: NoiseModel) -> Self {
        Self {
            stages: vec![model],
            clip: None,
        }
    }

    pub fn then(mut self, model: NoiseModel) -> Self {
        self.stages.push(model);
        self
    }

    pub fn with_clip(mut self, lo: f64, hi: f64) -> Self {
        self.clip = Some(Clip { lo, hi });
        self
    }

    /// Named noise regimes used by the example datasets. The `scmos`
    /// parameters are illustrative defaults, not a calibrated camera model.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "hanzi" => Ok(NoiseSpec::gaussian(0.7).then(NoiseModel::Bernoulli {
                p: 0.5,
                low: 0.0,
                high: 0.0,
            })),
            "imagenet" => Ok(NoiseSpec::single(NoiseModel::Poisson { peak: 30.0 })
                .then(NoiseModel::Gaussian {
                    sigma: 80.0 / 255.0,
                })
                .then(NoiseModel::Bernoulli {
                    p: 0.2,
                    low: 0.0,
                    high: 1.0,
                })
                .with_clip(0.0, 1.0)),
            "scmos" => Ok(NoiseSpec::single(NoiseModel::GainField { sigma_gain: 0.1 })
                .then(NoiseModel::Poisson { peak: 20.0 })
                .then(NoiseModel::CauchyAdditive { scale: 0.02 })),
            other => invalid(format!("unknown noise preset '{other}'")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.stages {
            s.validate()?;
        }
        if let Some(Clip { lo, hi }) = self.clip {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return invalid(format!("invalid clip range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// True when `E[x | y] = y` holds for nonnegative signals: no Bernoulli,
    /// Cauchy or clipping stages.
    pub fn is_unbiased(&self) -> bool {
        self.clip.is_none()
            && self.stages.iter().all(|s| {
                !matches!(
                    s,
                    NoiseModel::Bernoulli { .. } | NoiseModel::CauchyAdditive { .. }
                )
            })
    }
}

/// Applies `spec` to the clean image `y`. Deterministic in `(y, spec, seed)`.
pub fn apply_noise(y: &ImageGrid, spec: &NoiseSpec, seed: u64) -> Result<ImageGrid> {
    spec.validate()?;
    let mut values = y.values().to_vec();
    for (stage, model) in spec.stages.iter().enumerate() {
        let prev = values;
        values = map_indices(prev.len(), |j| {
            let mut rng = element_rng(seed, stage as u64, j as u64);
            model.apply_one(prev[j], &mut rng)
        });
    }
    if let Some(Clip { lo, hi }) = spec.clip {
        for v in &mut values {
            *v = v.clamp(lo, hi);
        }
    }
    ImageGrid::new(y.width(), y.height(), values)
        .map_err(|e| Error::Numeric(format!("noise produced invalid image: {e}")))
}

/// Analytic per-pixel `E (x_j - y_j)^2`, averaged over pixels.
///
/// Stages are composed by tracking the conditional mean and variance of each
/// pixel. Poisson stages assume the intermediate value is nonnegative.
pub fn noise_variance(spec: &NoiseSpec, y: &ImageGrid) -> Result<f64> {
    spec.validate()?;
    if spec.clip.is_some() {
        return Err(Error::UnsupportedSpec(
            "clipping has no closed-form variance".into(),
        ));
    }
    if spec
        .stages
        .iter()
        .any(|s| matches!(s, NoiseModel::CauchyAdditive { .. }))
    {
        return Err(Error::UnsupportedSpec(
            "Cauchy noise has undefined variance".into(),
        ));
    }
    let total: f64 = y
        .values()
        .iter()
        .map(|&yj| {
            let (mut mean, mut var) = (yj, 0.0);
            for s in &spec.stages {
                match *s {
                    NoiseModel::Gaussian { sigma } => var += sigma * sigma,
                    NoiseModel::Poisson { peak } => var += mean.max(0.0) / peak,
                    NoiseModel::Bernoulli { p, low, high } => {
                        let second =
                            (1.0 - p) * (var + mean * mean) + p * 0.5 * (low * low + high * high);
                        mean = (1.0 - p) * mean + p * 0.5 * (low + high);
                        var = second - mean * mean;
                    }
                    NoiseModel::GainField { sigma_gain } => {
                        var = (1.0 + sigma_gain * sigma_gain) * (var + mean * mean) - mean * mean;
                    }
                    NoiseModel::CauchyAdditive { .. } => unreachable!(),
                }
            }
            var + (mean - yj) * (mean - yj)
        })
        .sum();
    Ok(total / y.len() as f64)
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseModel::Gaussian { sigma } => write!(f, "gaussian sigma={sigma}"),
            NoiseModel::Poisson { peak } => write!(f, "poisson peak={peak}"),
            NoiseModel::Bernoulli { p, low, high } => {
                write!(f, "bernoulli p={p} low={low} high={high}")
            }
            NoiseModel::CauchyAdditive { scale } => write!(f, "cauchy scale={scale}"),
            NoiseModel::GainField { sigma_gain } => write!(f, "gain sigma_gain={sigma_gain}"),
        }
    }
}

/// One stage per line; `clip lo=.. hi=..` last when present.
impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            writeln!(f, "{s}")?;
        }
        if let Some(Clip { lo, hi }) = self.clip {
            writeln!(f, "clip lo={lo} hi={hi}")?;
        }
        Ok(())
    }
}

/// Parses the text form: entries separated by newlines or `;`, each
/// `kind key=value ...`. `#` starts a comment.
///
/// ```text
/// gaussian sigma=0.1
/// bernoulli p=0.2 low=0 high=1
/// clip lo=0 hi=1
/// ```
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = NoiseSpec::default();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for entry in line.split(';') {
                let mut words = entry.split_whitespace();
                let Some(kind) = words.next() else { continue };
                let mut kv = Vec::new();
                for w in words {
                    let (k, v) = w.split_once('=').ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        column: 0,
                        message: format!("expected key=value, got '{w}'"),
                    })?;
                    let v: f64 = v.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        column: 0,
                        message: format!("'{v}' is not a number (key '{k}')"),
                    })?;
                    kv.push((k.to_string(), v));
                }
                let parsed = parse_entry(kind, &kv).map_err(|message| Error::Parse {
                    line: lineno + 1,
                    column: 0,
                    message,
                })?;
                match parsed {
                    Entry::Stage(m) => {
                        if spec.clip.is_some() {
                            return Err(Error::Parse {
                                line: lineno + 1,
                                column: 0,
                                message: "clip must be the last entry".into(),
                            });
                        }
                        spec.stages.push(m)
                    }
                    Entry::Clip(c) => spec.clip = Some(c),
                }
            }
        }
        if spec.stages.is_empty() && spec.clip.is_none() {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                message: "empty noise spec".into(),
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

enum Entry {
    Stage(NoiseModel),
    Clip(Clip),
}

fn parse_entry(kind: &str, kv: &[(String, f64)]) -> std::result::Result<Entry, String> {
    let allowed: &[&str] = match kind {
        "gaussian" => &["sigma"],
        "poisson" => &["peak"],
        "bernoulli" => &["p", "low", "high"],
        "cauchy" => &["scale"],
        "gain" => &["sigma_gain"],
        "clip" => &["lo", "hi"],
        other => return Err(format!("unknown noise kind '{other}'")),
    };
    if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(format!("unknown key '{k}' for {kind}"));
    }
    let get = |key: &str, default: Option<f64>| -> std::result::Result<f64, String> {
        kv.iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .or(default)
            .ok_or_else(|| format!("{kind} requires '{key}'"))
    };
    Ok(match kind {
        "gaussian" => Entry::Stage(NoiseModel::Gaussian {
            sigma: get("sigma", None)?,
        }),
        "poisson" => Entry::Stage(NoiseModel::Poisson {
            peak: get("peak", None)?,
        }),
        "bernoulli" => Entry::Stage(NoiseModel::Bernoulli {
            p: get("p", None)?,
            low: get("low", Some(0.0))?,
            high: get("high", Some(1.0))?,
        }),
        "cauchy" => Entry::Stage(NoiseModel::CauchyAdditive {
            scale: get("scale", None)?,
        }),
        "gain" => Entry::Stage(NoiseModel::GainField {
            sigma_gain: get("sigma_gain", None)?,
        }),
        _ => Entry::Clip(Clip {
            lo: get("lo", Some(0.0))?,
            hi: get("hi", Some(1.0))?,
        }),
    })
}
