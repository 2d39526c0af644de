//! Rasters, dense matrices and index partitions.
//!
//! Pixels are addressed by their row-major linear index `r * width + c`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::seeded;

/// A 2-D real-valued raster stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            ));
        }
        if values.len() != width * height {
            return invalid(format!(
                "expected {} values for a {width}x{height} image, got {}",
                width * height,
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite value at pixel {i}"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values)
    }

    /// Builds an image from already validated parts. Callers guarantee the
    /// length and finiteness invariants.
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    /// Value at a possibly out-of-range position, mirrored back into the image.
    #[inline]
    pub fn get_mirrored(&self, r: isize, c: isize) -> f64 {
        self.values[reflect(r, self.height) * self.width + reflect(c, self.width)]
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ImageGrid> {
        ImageGrid::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Mirror an index into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`). A length-1 axis maps everything to 0.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            ));
        }
        if values.len() != rows * cols {
            return invalid(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("matrix contains non-finite values");
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Sub-matrix made of the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<RealMatrix> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.rows) {
            return invalid(format!("row index {r} out of range for {} rows", self.rows));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return invalid(format!(
                "column index {c} out of range for {} columns",
                self.cols
            ));
        }
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            let row = self.row(r);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        RealMatrix::new(rows.len(), cols.len(), values)
    }

    pub(crate) fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub(crate) fn from_dmatrix(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(m[(r, c)]);
            }
        }
        RealMatrix::new(rows, cols, values)
    }
}

/// A partition of the dimensions `0..m` into disjoint, nonempty subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    m: usize,
    subsets: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `subsets` are disjoint, nonempty and cover `0..m`.
    pub fn new(m: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if m == 0 {
            return invalid("partition needs at least one dimension");
        }
        let mut seen = vec![false; m];
        for (k, subset) in subsets.iter().enumerate() {
            if subset.is_empty() {
                return invalid(format!("subset {k} is empty"));
            }
            for &i in subset {
                if i >= m {
                    return invalid(format!("index {i} out of range for m = {m}"));
                }
                if seen[i] {
                    return invalid(format!("index {i} appears in more than one subset"));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return invalid(format!("index {i} is not covered by any subset"));
        }
        Ok(Self { m, subsets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn subset(&self, k: usize) -> Option<&[usize]> {
        self.subsets.get(k).map(Vec::as_slice)
    }
}

/// `{{0}, {1}, ..., {m-1}}`.
pub fn partition_singletons(m: usize) -> Result<Partition> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    Partition::new(m, (0..m).map(|i| vec![i]).collect())
}

/// Regular grid partition: pixel `(r, c)` goes to subset `(r mod gh) * gw + (c mod gw)`.
pub fn partition_grid(width: usize, height: usize, gw: usize, gh: usize) -> Result<Partition> {
    if width == 0 || height == 0 {
        return invalid("image dimensions must be positive");
    }
    if gw == 0 || gh == 0 || gw > width || gh > height {
        return invalid(format!(
            "grid {gw}x{gh} must be within 1..={width} by 1..={height}"
        ));
    }
    let mut subsets = vec![Vec::new(); gw * gh];
    for r in 0..height {
        for c in 0..width {
            subsets[(r % gh) * gw + (c % gw)].push(r * width + c);
        }
    }
    Partition::new(width * height, subsets)
}

/// Random partition into `k` nonempty subsets: `k` randomly chosen indices
/// seed one subset each, every other index joins a uniformly drawn subset.
pub fn partition_random(m: usize, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 || m == 0 || k > m {
        return invalid(format!("need 1 <= k <= m, got k = {k}, m = {m}"));
    }
    let mut rng = seeded(seed, 0x7061_7274);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut label = vec![0usize; m];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    let mut subsets = vec![Vec::new(); k];
    for (i, &l) in label.iter().enumerate() {
        subsets[l].push(i);
    }
    Partition::new(m, subsets)
}

/// Values of `img` at `indices`, in order.
pub fn gather(img: &ImageGrid, indices: &[usize]) -> Result<Vec<f64>> {
    let n = img.len();
    indices
        .iter()
        .map(|&i| {
            img.values.get(i).copied().ok_or_else(|| {
                crate::Error::InvalidArgument(format!("index {i} out of range for {n} pixels"))
            })
        })
        .collect()
}

/// Copy of `img` with `indices` overwritten by `vals`.
pub fn scatter(img: &ImageGrid, indices: &[usize], vals: &[f64]) -> Result<ImageGrid> {
    if indices.len() != vals.len() {
        return invalid(format!(
            "{} indices but {} values",
            indices.len(),
            vals.len()
        ));
    }
    let mut values = img.values.clone();
    for (&i, &v) in indices.iter().zip(vals) {
        if i >= values.len() {
            return invalid(format!(
                "index {i} out of range for {} pixels",
                values.len()
            ));
        }
        if !v.is_finite() {
            return invalid(format!("non-finite value for index {i}"));
        }
        values[i] = v;
    }
    Ok(ImageGrid::from_parts(img.width, img.height, values))
}
