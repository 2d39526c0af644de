//! `jinv`: reproducible experiments for self-supervised denoiser
//! calibration. Every command reads files, writes into `--out`, and prints
//! its headline numbers as `key=value` lines on standard output.

mod counts;
mod images;
mod outputs;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use outputs::Outputs;

#[derive(Parser, Debug)]
#[command(
    name = "jinv",
    version,
    about = "Calibrate denoisers without clean data"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Do not report written files on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic test scene.
    Scene(images::SceneArgs),
    /// Add synthetic noise to an image.
    Simulate(images::SimulateArgs),
    /// Sweep a denoiser's parameter and pick it by self-supervised loss.
    Calibrate(images::CalibrateArgs),
    /// Optimal vs J-invariant error of a Gaussian process on a torus.
    GpDemo(theory::GpArgs),
    /// Alphabet denoiser vs the matched Gaussian.
    AlphabetDemo(theory::AlphabetArgs),
    /// Count-matrix workflows.
    #[command(subcommand)]
    Counts(counts::CountsCommand),
    /// Mean squared error and PSNR between two images.
    Metrics(images::MetricsArgs),
    /// Empirically check that a (masked) denoiser is J-invariant.
    VerifyJinv(images::VerifyArgs),
}

fn run(cli: Cli, out: &mut Outputs) -> anyhow::Result<()> {
    match cli.command {
        Command::Scene(a) => images::scene(a, cli.seed, out),
        Command::Simulate(a) => images::simulate(a, cli.seed, out),
        Command::Calibrate(a) => images::calibrate(a, out),
        Command::GpDemo(a) => theory::gp_demo(a, cli.seed, out),
        Command::AlphabetDemo(a) => theory::alphabet_demo(a, cli.seed, out),
        Command::Counts(c) => counts::run(c, cli.seed, out),
        Command::Metrics(a) => images::metrics(a),
        Command::VerifyJinv(a) => images::verify(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let mut out = match Outputs::new(&cli.out, cli.quiet) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            out.discard();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
