//! Masking construction that turns any denoiser into a J-invariant one.
//!
//! For each subset `J` of a partition, the pixels in `J` are replaced
//! (by a neighbour interpolation or by input-independent random values), the
//! base denoiser is run on the modified image, and only its outputs on `J`
//! are kept. The result at `J` therefore cannot depend on `x_J`.

use rand::Rng;

use crate::denoise::Denoiser;
use crate::error::{invalid, Result};
use crate::grid::{gather, reflect, scatter, ImageGrid, Partition};
use crate::par::map_indices;
use crate::rng::{element_rng, seeded};

/// How masked pixels are filled before the base denoiser runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplacementStrategy {
    /// Average of the four edge neighbours (see [`interpolate_neighbors`]).
    InterpolateNeighbors,
    /// Independent uniform draws on `[lo, hi)`, frozen by `seed`.
    RandomUniform { lo: f64, hi: f64, seed: u64 },
}

impl ReplacementStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReplacementStrategy::RandomUniform { lo, hi, .. }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() =>
            {
                invalid(format!(
                    "random replacement needs lo < hi, got [{lo}, {hi}]"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Replacement values for the pixels of `subset`, in subset order.
    ///
    /// Interpolation skips neighbours that are themselves in `subset`; a
    /// pixel whose neighbours all lie in `subset` gets the mean of `x` outside
    /// it. Either way the values never depend on `x_J`. For partitions whose
    /// subsets contain no edge-adjacent pixels this is exactly
    /// [`interpolate_neighbors`] restricted to `subset`.
    pub fn values_for(&self, x: &ImageGrid, subset: &[usize]) -> Result<Vec<f64>> {
        self.validate()?;
        match *self {
            ReplacementStrategy::InterpolateNeighbors => {
                let mut member = vec![false; x.len()];
                for &i in subset {
                    member[i] = true;
                }
                let (w, h) = (x.width(), x.height());
                let mut outside_mean = None;
                let mut out = Vec::with_capacity(subset.len());
                for &i in subset {
                    let (r, c) = ((i / w) as isize, (i % w) as isize);
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    let mut neighbours = Vec::with_capacity(4);
                    if h > 1 {
                        neighbours.push((reflect(r - 1, h), c as usize));
                        neighbours.push((reflect(r + 1, h), c as usize));
                    }
                    if w > 1 {
                        neighbours.push((r as usize, reflect(c - 1, w)));
                        neighbours.push((r as usize, reflect(c + 1, w)));
                    }
                    for (rr, cc) in neighbours {
                        let k = rr * w + cc;
                        if !member[k] {
                            sum += x.values()[k];
                            n += 1;
                        }
                    }
                    out.push(if n > 0 {
                        sum / n as f64
                    } else {
                        *outside_mean.get_or_insert_with(|| {
                            let (s, n) = x
                                .values()
                                .iter()
                                .zip(&member)
                                .filter(|(_, &m)| !m)
                                .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
                            if n == 0 {
                                0.0
                            } else {
                                s / n as f64
                            }
                        })
                    });
                }
                Ok(out)
            }
            ReplacementStrategy::RandomUniform { lo, hi, seed } => Ok(subset
                .iter()
                .map(|&j| element_rng(seed, 0x756e_6966, j as u64).random_range(lo..hi))
                .collect()),
        }
    }

    /// Replacement values for every pixel as if each were masked alone.
    pub fn field(&self, x: &ImageGrid) -> Result<ImageGrid> {
        match *self {
            ReplacementStrategy::InterpolateNeighbors => Ok(interpolate_neighbors(x)),
            ReplacementStrategy::RandomUniform { .. } => {
                let all: Vec<usize> = (0..x.len()).collect();
                ImageGrid::new(x.width(), x.height(), self.values_for(x, &all)?)
            }
        }
    }
}

/// Convolution with the cross kernel `[[0, 1/4, 0], [1/4, 0, 1/4], [0, 1/4, 0]]`
/// under mirror padding that does not repeat the edge sample, so a pixel
/// never contributes to its own interpolation. On a length-1 axis the
/// neighbours along that axis are dropped and the rest averaged; a 1x1
/// image maps to 0.
pub fn interpolate_neighbors(x: &ImageGrid) -> ImageGrid {
    let (w, h) = (x.width(), x.height());
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut sum = 0.0;
            let mut n = 0usize;
            if h > 1 {
                sum += x.get_mirrored(r - 1, c) + x.get_mirrored(r + 1, c);
                n += 2;
            }
            if w > 1 {
                sum += x.get_mirrored(r, c - 1) + x.get_mirrored(r, c + 1);
                n += 2;
            }
            out.push(if n == 0 { 0.0 } else { sum / n as f64 });
        }
    }
    ImageGrid::from_parts(w, h, out)
}

/// A base denoiser made J-invariant with respect to `partition` by masking.
#[derive(Debug, Clone)]
pub struct JInvariantDenoiser<D> {
    pub base: D,
    pub partition: Partition,
    pub replacement: ReplacementStrategy,
}

impl<D: Denoiser> JInvariantDenoiser<D> {
    pub fn new(base: D, partition: Partition, replacement: ReplacementStrategy) -> Result<Self> {
        replacement.validate()?;
        Ok(Self {
            base,
            partition,
            replacement,
        })
    }

    fn check(&self, x: &ImageGrid) -> Result<()> {
        if self.partition.m() != x.len() {
            return invalid(format!(
                "partition covers {} dimensions but the image has {} pixels",
                self.partition.m(),
                x.len()
            ));
        }
        Ok(())
    }

    fn masked_output(&self, x: &ImageGrid, subset: &[usize]) -> Result<Vec<f64>> {
        let masked = scatter(x, subset, &self.replacement.values_for(x, subset)?)?;
        let out = self.base.denoise(&masked)?;
        if !out.same_shape(x) {
            return invalid("base denoiser changed the image shape");
        }
        gather(&out, subset)
    }

    /// Full masked evaluation: one base-denoiser call per subset.
    pub fn evaluate(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check(x)?;
        let subsets = self.partition.subsets();
        let parts = map_indices(subsets.len(), |k| self.masked_output(x, &subsets[k]));
        let mut values = vec![0.0; x.len()];
        for (subset, part) in subsets.iter().zip(parts) {
            for (&i, v) in subset.iter().zip(part?) {
                values[i] = v;
            }
        }
        ImageGrid::new(x.width(), x.height(), values)
    }

    /// Masked evaluation restricted to subset `j_index`. Returns the values
    /// and the subset's indices.
    pub fn evaluate_single(&self, x: &ImageGrid, j_index: usize) -> Result<(Vec<f64>, Vec<usize>)> {
        self.check(x)?;
        let Some(subset) = self.partition.subset(j_index) else {
            return invalid(format!(
                "subset index {j_index} out of range for {} subsets",
                self.partition.len()
            ));
        };
        Ok((self.masked_output(x, subset)?, subset.to_vec()))
    }

    /// Same function with a different random-replacement seed. Deterministic
    /// strategies are returned unchanged.
    pub fn reseeded(&self, seed: u64) -> Self
    where
        D: Clone,
    {
        let replacement = match self.replacement {
            ReplacementStrategy::RandomUniform { lo, hi, .. } => {
                ReplacementStrategy::RandomUniform { lo, hi, seed }
            }
            s => s,
        };
        Self {
            base: self.base.clone(),
            partition: self.partition.clone(),
            replacement,
        }
    }
}

impl<D: Denoiser> Denoiser for JInvariantDenoiser<D> {
    fn denoise(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.evaluate(x)
    }
}

/// Free-function form of [`JInvariantDenoiser::evaluate`].
pub fn evaluate_j_invariant<D: Denoiser>(
    f: &JInvariantDenoiser<D>,
    x: &ImageGrid,
) -> Result<ImageGrid> {
    f.evaluate(x)
}

/// Free-function form of [`JInvariantDenoiser::evaluate_single`].
pub fn evaluate_single_j<D: Denoiser>(
    f: &JInvariantDenoiser<D>,
    x: &ImageGrid,
    j_index: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    f.evaluate_single(x, j_index)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    pub max_deviation: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Empirical check of J-invariance: for random subsets `J` of `partition`,
/// overwrite `x_J` with random values and measure how far `f(x)_J` moves.
/// Replacement values are drawn from `[min(x) - span, max(x) + span]`.
pub fn verify_j_invariance(
    f: &dyn Denoiser,
    partition: &Partition,
    x: &ImageGrid,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<InvarianceReport> {
    if trials == 0 {
        return invalid("trials must be >= 1");
    }
    if partition.m() != x.len() {
        return invalid("partition does not match the image size");
    }
    let (lo, hi) = (x.min(), x.max());
    let span = (hi - lo).max(1.0);
    let base = f.denoise(x)?;
    let mut rng = seeded(seed, 0x6a69_6e76);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..trials {
        let subset = &partition.subsets()[rng.random_range(0..partition.len())];
        let vals: Vec<f64> = subset
            .iter()
            .map(|_| rng.random_range(lo - span..hi + span))
            .collect();
        let perturbed = scatter(x, subset, &vals)?;
        let out = f.denoise(&perturbed)?;
        for &i in subset {
            max_deviation = max_deviation.max((out.values()[i] - base.values()[i]).abs());
        }
    }
    Ok(InvarianceReport {
        max_deviation,
        trials,
        pass: max_deviation <= tol,
    })
}
