use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Subcommand, ValueEnum};
use jinv_core::counts::{
    bicv, median_row_sum, normalize, read_labelled_csv, self_supervised_rank_curve,
    simulate_gaussian_lowrank, simulate_poisson_lowrank, split_counts, write_labelled_csv,
    CountMatrix, NormalizationSpec, RankCurve, Rho,
};
use jinv_core::grid::{Partition, RealMatrix};

use crate::outputs::Outputs;

#[derive(Subcommand, Debug)]
pub enum CountsCommand {
    /// Binomially split every count into two independent halves.
    Split(SplitArgs),
    /// Depth-normalize and transform a count matrix.
    Normalize(NormalizeArgs),
    /// Self-supervised PCA rank curve from two halves.
    RankCurve(RankCurveArgs),
    /// Bi-cross-validation rank curve for a real matrix.
    Bicv(BicvArgs),
    /// Write a simulated low-rank matrix.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Sqrt,
    Log1p,
}

impl From<Transform> for Rho {
    fn from(t: Transform) -> Self {
        match t {
            Transform::Sqrt => Rho::Sqrt,
            Transform::Log1p => Rho::Log1p,
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn read_counts(path: &Path) -> anyhow::Result<CountMatrix> {
    CountMatrix::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_matrix(path: &Path) -> anyhow::Result<RealMatrix> {
    Ok(read_labelled_csv(open(path)?)
        .with_context(|| format!("reading {}", path.display()))?
        .0)
}

fn write_curve(out: &mut Outputs, name: &str, curve: &RankCurve) -> anyhow::Result<()> {
    out.write_with(name, |w| curve.write_csv(w))?;
    match curve.argmin() {
        Some(k) => println!("k={k}"),
        None => bail!("rank curve has no finite loss"),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    input: PathBuf,
    /// Probability that a molecule goes to the first half.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    input: PathBuf,
    /// Target depth; defaults to the median row sum.
    #[arg(long)]
    n0: Option<f64>,
    #[arg(long, value_enum, default_value_t = Transform::Sqrt)]
    rho: Transform,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).multiple(false).args(["counts", "x1"])))]
pub struct RankCurveArgs {
    /// Count matrix to split and normalize.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// First normalized half (needs --x2).
    #[arg(long, requires = "x2")]
    x1: Option<PathBuf>,
    #[arg(long)]
    x2: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Transform::Sqrt)]
    rho: Transform,
    /// Largest rank evaluated.
    #[arg(long, default_value_t = 30)]
    kmax: usize,
}

#[derive(Args, Debug)]
pub struct BicvArgs {
    /// Real matrix CSV (labelled rows and columns).
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    #[arg(long, default_value_t = 2)]
    folds: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimKind {
    /// Poisson counts around nonnegative factors (writes counts.csv).
    Poisson,
    /// Gaussian factors plus unit noise (writes matrix.csv).
    Gaussian,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: SimKind,
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 200)]
    cols: usize,
    #[arg(long, default_value_t = 10)]
    rank: usize,
    /// Mean count per entry (poisson).
    #[arg(long, default_value_t = 5.0)]
    depth: f64,
    /// Factor entry standard deviation (gaussian).
    #[arg(long, default_value_t = 0.6)]
    factor_scale: f64,
    /// Noise standard deviation (gaussian).
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
}

pub fn run(cmd: CountsCommand, seed: u64, out: &mut Outputs) -> anyhow::Result<()> {
    match cmd {
        CountsCommand::Split(a) => {
            let c = read_counts(&a.input)?;
            let (x1, x2) = split_counts(&c, a.p, seed)?;
            out.write_with("split_1.csv", |w| x1.write_csv(w))?;
            out.write_with("split_2.csv", |w| x2.write_csv(w))?;
        }
        CountsCommand::Normalize(a) => {
            let c = read_counts(&a.input)?;
            let z = normalize(
                &c,
                &NormalizationSpec {
                    n0: a.n0,
                    rho: a.rho.into(),
                },
            )?;
            out.write_with("normalized.csv", |w| {
                write_labelled_csv(w, &z, c.cell_ids(), c.gene_names())
            })?;
        }
        CountsCommand::RankCurve(a) => {
            let (z1, z2) = match (&a.counts, &a.x1, &a.x2) {
                (Some(path), ..) => {
                    let (c1, c2) = split_counts(&read_counts(path)?, a.p, seed)?;
                    // one depth for both halves keeps their scales comparable
                    let n0 = 0.5 * (median_row_sum(&c1) + median_row_sum(&c2));
                    let spec = NormalizationSpec {
                        n0: Some(n0),
                        rho: a.rho.into(),
                    };
                    (normalize(&c1, &spec)?, normalize(&c2, &spec)?)
                }
                (None, Some(p1), Some(p2)) => (read_matrix(p1)?, read_matrix(p2)?),
                _ => bail!("give --counts or both --x1 and --x2"),
            };
            let kmax = a.kmax.min(z1.rows()).min(z1.cols());
            let ks: Vec<usize> = (1..=kmax).collect();
            write_curve(
                out,
                "rank_curve.csv",
                &self_supervised_rank_curve(&z1, &z2, &ks)?,
            )?;
        }
        CountsCommand::Bicv(a) => {
            let x = read_matrix(&a.input)?;
            let half = x.cols() / 2;
            if half == 0 {
                bail!("bi-cross-validation needs at least two columns");
            }
            let split = Partition::new(
                x.cols(),
                vec![(0..half).collect(), (half..x.cols()).collect()],
            )?;
            let ks: Vec<usize> = (1..=a.kmax).collect();
            write_curve(
                out,
                "bicv_curve.csv",
                &bicv(&x, &ks, a.folds, &split, seed)?,
            )?;
        }
        CountsCommand::Simulate(a) => match a.kind {
            SimKind::Poisson => {
                let (c, _) = simulate_poisson_lowrank(a.rows, a.cols, a.rank, a.depth, seed)?;
                out.write_with("counts.csv", |w| c.write_csv(w))?;
            }
            SimKind::Gaussian => {
                let (x, _) = simulate_gaussian_lowrank(
                    a.rows,
                    a.cols,
                    a.rank,
                    a.factor_scale,
                    a.noise_sigma,
                    seed,
                )?;
                let rows: Vec<String> = (0..x.rows()).map(|i| format!("row{i}")).collect();
                let cols: Vec<String> = (0..x.cols()).map(|j| format!("col{j}")).collect();
                out.write_with("matrix.csv", |w| write_labelled_csv(w, &x, &rows, &cols))?;
            }
        },
    }
    Ok(())
}
