use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{invalid, Result};
use crate::grid::RealMatrix;
use crate::rng::seeded;

use super::CountMatrix;

/// Poisson counts around a rank-`rank` nonnegative factor model. Cell
/// loadings are Gamma(2, 1/2); gene programs are Gamma(0.3, 1), so each
/// program is concentrated on few genes. Rates are scaled to `mean_count`
/// per entry on average. Returns `(counts, rates)`.
pub fn simulate_poisson_lowrank(
    cells: usize,
    genes: usize,
    rank: usize,
    mean_count: f64,
    seed: u64,
) -> Result<(CountMatrix, RealMatrix)> {
    if cells == 0 || genes == 0 || rank == 0 {
        return invalid("cells, genes and rank must be >= 1");
    }
    if !(mean_count > 0.0) || !mean_count.is_finite() {
        return invalid(format!("mean count must be positive, got {mean_count}"));
    }
    let mut rng = seeded(seed, 0x7073_696d);
    let load = Gamma::new(2.0, 0.5).expect("valid");
    let program = Gamma::new(0.3, 1.0).expect("valid");
    let w: Vec<f64> = (0..cells * rank).map(|_| load.sample(&mut rng)).collect();
    let h: Vec<f64> = (0..rank * genes)
        .map(|_| program.sample(&mut rng))
        .collect();
    let mut rates: Vec<f64> = (0..cells * genes)
        .map(|i| {
            let (r, c) = (i / genes, i % genes);
            (0..rank).map(|t| w[r * rank + t] * h[t * genes + c]).sum()
        })
        .collect();
    let scale = mean_count / (rates.iter().sum::<f64>() / rates.len() as f64);
    rates.iter_mut().for_each(|v| *v *= scale);
    let counts = rates
        .iter()
        .map(|&l| {
            if l > 0.0 {
                Poisson::new(l).expect("positive rate").sample(&mut rng) as u64
            } else {
                0
            }
        })
        .collect();
    Ok((
        CountMatrix::new(cells, genes, counts)?,
        RealMatrix::new(cells, genes, rates)?,
    ))
}

/// `U V^T + noise` with `U`, `V` entries `N(0, factor_scale^2)` and white
/// noise of standard deviation `noise_sigma`. Returns `(noisy, clean)`.
pub fn simulate_gaussian_lowrank(
    rows: usize,
    cols: usize,
    rank: usize,
    factor_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(RealMatrix, RealMatrix)> {
    if rows == 0 || cols == 0 || rank == 0 {
        return invalid("rows, cols and rank must be >= 1");
    }
    if !(factor_scale >= 0.0 && noise_sigma >= 0.0) {
        return invalid("scales must be >= 0");
    }
    let mut rng = seeded(seed, 0x6773_696d);
    let mut draw = |n: usize, s: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
            .collect()
    };
    let u = draw(rows * rank, factor_scale);
    let v = draw(cols * rank, factor_scale);
    let noise = draw(rows * cols, noise_sigma);
    let clean: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            (0..rank).map(|t| u[r * rank + t] * v[c * rank + t]).sum()
        })
        .collect();
    let noisy = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok((
        RealMatrix::new(rows, cols, noisy)?,
        RealMatrix::new(rows, cols, clean)?,
    ))
}
