//! Count matrices (cells x genes): molecule splitting, normalization,
//! principal component regression and rank selection.

mod pcr;
mod rank;
mod simulate;

pub use self::rank::{bicv, self_supervised_rank_curve, RankCurve, RankPoint};
pub use pcr::{pcr_fit, pcr_fit_path, pcr_predict, PcrModel};
pub use simulate::{simulate_gaussian_lowrank, simulate_poisson_lowrank};

use std::io::{Read, Write};

use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::grid::RealMatrix;
use crate::rng::element_rng;

/// Nonnegative integer counts with cell (row) and gene (column) labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    cell_ids: Vec<String>,
    gene_names: Vec<String>,
}

impl CountMatrix {
    /// Counts in row-major order, with default labels `cell{i}` / `gene{j}`.
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        let cell_ids = (0..rows).map(|i| format!("cell{i}")).collect();
        let gene_names = (0..cols).map(|j| format!("gene{j}")).collect();
        Self::with_labels(rows, cols, counts, cell_ids, gene_names)
    }

    pub fn with_labels(
        rows: usize,
        cols: usize,
        counts: Vec<u64>,
        cell_ids: Vec<String>,
        gene_names: Vec<String>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!("count matrix must be nonempty, got {rows}x{cols}"));
        }
        if counts.len() != rows * cols {
            return invalid(format!(
                "{rows}x{cols} matrix needs {} counts, got {}",
                rows * cols,
                counts.len()
            ));
        }
        if cell_ids.len() != rows || gene_names.len() != cols {
            return invalid("label count does not match matrix shape");
        }
        Ok(Self {
            rows,
            cols,
            counts,
            cell_ids,
            gene_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.counts[r * self.cols..(r + 1) * self.cols]
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    fn with_counts(&self, counts: Vec<u64>) -> Self {
        Self {
            counts,
            ..self.clone()
        }
    }

    /// Elementwise sum; labels are taken from `self`.
    pub fn add(&self, other: &CountMatrix) -> Result<CountMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return invalid("count matrices differ in shape");
        }
        Ok(self.with_counts(
            self.counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Header `cell,<gene names>`, then one line per cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(std::iter::once("cell").chain(self.gene_names.iter().map(String::as_str)))
            .map_err(io)?;
        for r in 0..self.rows {
            let mut rec = vec![self.cell_ids[r].clone()];
            rec.extend(self.row(r).iter().map(u64::to_string));
            out.write_record(&rec).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (cell_ids, gene_names, cells) =
            read_labelled(r, |s| s.parse::<u64>().map_err(|e| e.to_string()))?;
        let rows = cell_ids.len();
        let cols = gene_names.len();
        Self::with_labels(
            rows,
            cols,
            cells.into_iter().flatten().collect(),
            cell_ids,
            gene_names,
        )
    }
}

type Labelled<T> = (Vec<String>, Vec<String>, Vec<Vec<T>>);

/// Reads a CSV with a header row of column names and a first column of row
/// labels. Errors name the 1-based line and column.
fn read_labelled<R: Read, T>(
    r: R,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Labelled<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut records = rdr.records();
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        line,
        column,
        message,
    };
    let header = match records.next() {
        Some(h) => h.map_err(|e| parse_err(1, 1, e.to_string()))?,
        None => return Err(parse_err(1, 1, "empty file".into())),
    };
    if header.len() < 2 {
        return Err(parse_err(
            1,
            1,
            "header needs a label column and at least one value column".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, 1, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                rec.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        labels.push(rec[0].to_string());
        let row = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, field)| {
                parse(field.trim()).map_err(|m| parse_err(line, c + 1, format!("{field:?}: {m}")))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(2, 1, "no data rows".into()));
    }
    Ok((labels, names, rows))
}

/// Writes a real matrix with row labels and column names in the same layout
/// as [`CountMatrix::write_csv`].
pub fn write_labelled_csv<W: Write>(
    w: W,
    m: &RealMatrix,
    row_labels: &[String],
    col_names: &[String],
) -> Result<()> {
    if row_labels.len() != m.rows() || col_names.len() != m.cols() {
        return invalid("label count does not match matrix shape");
    }
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(std::iter::once("cell").chain(col_names.iter().map(String::as_str)))
        .map_err(io)?;
    for r in 0..m.rows() {
        let mut rec = vec![row_labels[r].clone()];
        rec.extend(m.row(r).iter().map(f64::to_string));
        out.write_record(&rec).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_labelled_csv`]: `(matrix, row labels,
/// column names)`.
pub fn read_labelled_csv<R: Read>(r: R) -> Result<(RealMatrix, Vec<String>, Vec<String>)> {
    let (labels, names, rows) = read_labelled(r, |s| {
        let v: f64 = s
            .parse()
            .map_err(|e: std::num::ParseFloatError| e.to_string())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err("value is not finite".to_string())
        }
    })?;
    let m = RealMatrix::new(
        labels.len(),
        names.len(),
        rows.into_iter().flatten().collect(),
    )?;
    Ok((m, labels, names))
}

/// Binomial thinning: every count `n` becomes `k ~ Binomial(n, p)` in the
/// first output and `n - k` in the second.
pub fn split_counts(c: &CountMatrix, p: f64, seed: u64) -> Result<(CountMatrix, CountMatrix)> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("split probability must be in (0, 1), got {p}"));
    }
    let first: Vec<u64> = crate::par::map_indices(c.counts.len(), |i| {
        let n = c.counts[i];
        if n == 0 {
            return 0;
        }
        let dist = Binomial::new(n, p).expect("p checked above");
        dist.sample(&mut element_rng(seed, 0x7370_6c74, i as u64))
    });
    let second = c.counts.iter().zip(&first).map(|(n, k)| n - k).collect();
    Ok((c.with_counts(first), c.with_counts(second)))
}

/// Variance-stabilizing transform applied after depth normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rho {
    #[default]
    Sqrt,
    Log1p,
}

impl Rho {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Rho::Sqrt => v.sqrt(),
            Rho::Log1p => v.ln_1p(),
        }
    }
}

impl std::str::FromStr for Rho {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Rho::Sqrt),
            "log1p" => Ok(Rho::Log1p),
            other => invalid(format!(
                "unknown transform {other:?}, expected sqrt or log1p"
            )),
        }
    }
}

/// `z = rho(n0 * count / row_sum)`; `n0 = None` uses the median row sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizationSpec {
    pub n0: Option<f64>,
    pub rho: Rho,
}

/// Median of the row sums (mean of the middle two for an even count).
pub fn median_row_sum(c: &CountMatrix) -> f64 {
    let mut s: Vec<u64> = c.row_sums();
    s.sort_unstable();
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0
    }
}

pub fn normalize(c: &CountMatrix, spec: &NormalizationSpec) -> Result<RealMatrix> {
    let sums = c.row_sums();
    let zero: Vec<usize> = sums
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 0)
        .map(|(i, _)| i)
        .collect();
    if !zero.is_empty() {
        return Err(Error::DegenerateRows(zero));
    }
    let n0 = match spec.n0 {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return invalid(format!("n0 must be positive, got {v}")),
        None => median_row_sum(c),
    };
    let values = (0..c.rows)
        .flat_map(|r| {
            let scale = n0 / sums[r] as f64;
            c.row(r)
                .iter()
                .map(move |&k| spec.rho.apply(scale * k as f64))
        })
        .collect();
    RealMatrix::new(c.rows, c.cols, values)
}
