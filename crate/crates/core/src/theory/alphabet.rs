use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::par::map_indices;
use crate::rng::{element_rng, seeded};
use crate::stats::mean_se;

use super::gp::leave_one_out_variances;

/// A finite set of equally sized templates observed through white Gaussian
/// noise of standard deviation `noise_sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    letters: Vec<Vec<f64>>,
    noise_sigma: f64,
}

impl Alphabet {
    pub fn new(letters: Vec<Vec<f64>>, noise_sigma: f64) -> Result<Self> {
        let Some(first) = letters.first() else {
            return invalid("alphabet needs at least one letter");
        };
        let m = first.len();
        if m == 0 {
            return invalid("letters must be nonempty");
        }
        if let Some(i) = letters.iter().position(|l| l.len() != m) {
            return invalid(format!(
                "letter {i} has length {}, expected {m}",
                letters[i].len()
            ));
        }
        if letters.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("letters must be finite");
        }
        if !(noise_sigma > 0.0) || !noise_sigma.is_finite() {
            return invalid(format!("noise sigma must be positive, got {noise_sigma}"));
        }
        Ok(Self {
            letters,
            noise_sigma,
        })
    }

    pub fn letters(&self) -> &[Vec<f64>] {
        &self.letters
    }

    pub fn dim(&self) -> usize {
        self.letters[0].len()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn with_sigma(&self, noise_sigma: f64) -> Result<Self> {
        Self::new(self.letters.clone(), noise_sigma)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return invalid(format!(
                "input has length {}, letters have {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(())
    }
}

/// Normalized weights from unnormalized log-weights.
fn softmax(logw: &mut [f64]) {
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in logw.iter_mut() {
        *w = (*w - top).exp();
        total += *w;
    }
    for w in logw.iter_mut() {
        *w /= total;
    }
}

/// Posterior mean of the letter given the coordinates of `x` outside `j_set`.
pub fn alphabet_denoise(x: &[f64], ab: &Alphabet, j_set: &[usize]) -> Result<Vec<f64>> {
    ab.check_input(x)?;
    let m = ab.dim();
    let mut masked = vec![false; m];
    for &j in j_set {
        if j >= m {
            return invalid(format!("index {j} out of range for length {m}"));
        }
        masked[j] = true;
    }
    let s2 = 2.0 * ab.noise_sigma * ab.noise_sigma;
    let mut logw: Vec<f64> = ab
        .letters
        .iter()
        .map(|a| {
            let d: f64 = (0..m)
                .filter(|&k| !masked[k])
                .map(|k| (a[k] - x[k]).powi(2))
                .sum();
            -d / s2
        })
        .collect();
    softmax(&mut logw);
    Ok((0..m)
        .map(|k| ab.letters.iter().zip(&logw).map(|(a, w)| w * a[k]).sum())
        .collect())
}

/// Singleton-J-invariant prediction: coordinate `j` is `alphabet_denoise(x,
/// ab, [j])[j]`, computed in `O(r m)` by subtracting each coordinate's own
/// term from the full distance.
pub fn alphabet_jinv_predict(x: &[f64], ab: &Alphabet) -> Result<Vec<f64>> {
    ab.check_input(x)?;
    let m = ab.dim();
    let s2 = 2.0 * ab.noise_sigma * ab.noise_sigma;
    let full: Vec<f64> = ab
        .letters
        .iter()
        .map(|a| a.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum())
        .collect();
    let mut logw = vec![0.0; ab.letters.len()];
    Ok((0..m)
        .map(|j| {
            for (i, a) in ab.letters.iter().enumerate() {
                logw[i] = -(full[i] - (a[j] - x[j]).powi(2)) / s2;
            }
            softmax(&mut logw);
            ab.letters.iter().zip(&logw).map(|(a, w)| w * a[j]).sum()
        })
        .collect())
}

/// Per-pixel `mean_j Var(y_j | x_{-j})` for a Gaussian signal with the same
/// mean and covariance as a uniformly drawn letter.
pub fn matched_gaussian_jinv_mse(letters: &[Vec<f64>], sigma: f64) -> Result<f64> {
    let ab = Alphabet::new(letters.to_vec(), sigma)?;
    let m = ab.dim();
    let r = letters.len() as f64;
    let mu: Vec<f64> = (0..m)
        .map(|k| letters.iter().map(|a| a[k]).sum::<f64>() / r)
        .collect();
    let centred = DMatrix::from_fn(letters.len(), m, |i, k| letters[i][k] - mu[k]);
    let cov = centred.transpose() * &centred / r;
    let v = leave_one_out_variances(&cov, sigma * sigma)?;
    Ok(v.iter().sum::<f64>() / m as f64)
}

/// One row of the alphabet comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphabetRow {
    pub sigma: f64,
    pub alphabet_mse: f64,
    /// Monte-Carlo standard error of `alphabet_mse`.
    pub alphabet_se: f64,
    pub gp_mse: f64,
}

/// Monte-Carlo error of the singleton-J-invariant alphabet predictor against
/// the analytic error of the best J-invariant predictor for a Gaussian with
/// matched first and second moments, at each noise level.
pub fn alphabet_vs_gp_mse(
    letters: &[Vec<f64>],
    sigmas: &[f64],
    seed: u64,
    trials: usize,
) -> Result<Vec<AlphabetRow>> {
    if trials == 0 {
        return invalid("trials must be >= 1");
    }
    sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let ab = Alphabet::new(letters.to_vec(), sigma)?;
            let per_trial = map_indices(trials, |t| {
                let mut rng = element_rng(seed, si as u64, t as u64);
                let a = &ab.letters[rng.random_range(0..ab.letters.len())];
                let x: Vec<f64> = a
                    .iter()
                    .map(|v| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        v + sigma * e
                    })
                    .collect();
                alphabet_jinv_predict(&x, &ab).map(|p| {
                    p.iter().zip(a).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64
                })
            });
            let per_trial = per_trial.into_iter().collect::<Result<Vec<f64>>>()?;
            let (alphabet_mse, alphabet_se) = mean_se(&per_trial);
            Ok(AlphabetRow {
                sigma,
                alphabet_mse,
                alphabet_se,
                gp_mse: matched_gaussian_jinv_mse(letters, sigma)?,
            })
        })
        .collect()
}

/// Rasterizes a thick segment into a `side` x `side` binary glyph.
fn stroke(glyph: &mut [f64], side: usize, from: (f64, f64), to: (f64, f64), radius: f64) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len2 = dx * dx + dy * dy;
    for r in 0..side {
        for c in 0..side {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((px - from.0) * dx + (py - from.1) * dy) / len2).clamp(0.0, 1.0)
            };
            let (qx, qy) = (from.0 + t * dx, from.1 + t * dy);
            if (px - qx).powi(2) + (py - qy).powi(2) <= radius * radius {
                glyph[r * side + c] = 1.0;
            }
        }
    }
}

/// `count` binary `side` x `side` glyphs made of a few thick pen strokes,
/// pairwise differing in at least `side^2 / 8` pixels. Deterministic in
/// `seed`.
pub fn glyph_alphabet(count: usize, side: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 || side < 4 {
        return invalid("need count >= 1 and side >= 4");
    }
    let min_dist = side * side / 8;
    let mut rng = seeded(seed, 0x676c_7970);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let margin = side as f64 * 0.2;
    let hi = side as f64 - margin;
    for _attempt in 0..count * 1000 {
        if out.len() == count {
            break;
        }
        let mut g = vec![0.0; side * side];
        let strokes = rng.random_range(2..=4);
        let mut pen = (rng.random_range(margin..hi), rng.random_range(margin..hi));
        for _ in 0..strokes {
            let next = (rng.random_range(margin..hi), rng.random_range(margin..hi));
            stroke(&mut g, side, pen, next, side as f64 / 14.0);
            pen = next;
        }
        let far = out
            .iter()
            .all(|h| h.iter().zip(&g).filter(|(a, b)| a != b).count() >= min_dist);
        if far {
            out.push(g);
        }
    }
    if out.len() < count {
        return invalid(format!(
            "could not place {count} distinct glyphs of side {side}"
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_binary(r: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded(seed, 1);
        (0..r)
            .map(|_| {
                (0..m)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_letter_is_returned() {
        let ab = Alphabet::new(vec![vec![0.3, -1.0, 2.0]], 0.5).unwrap();
        assert_eq!(
            alphabet_denoise(&[9.0, 9.0, 9.0], &ab, &[1]).unwrap(),
            vec![0.3, -1.0, 2.0]
        );
    }

    #[test]
    fn huge_sigma_gives_mean_letter() {
        let letters = random_binary(5, 12, 3);
        let ab = Alphabet::new(letters.clone(), 1e9).unwrap();
        let out = alphabet_denoise(&[0.5; 12], &ab, &[]).unwrap();
        for k in 0..12 {
            let mean = letters.iter().map(|a| a[k]).sum::<f64>() / 5.0;
            assert!((out[k] - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_sigma_concentrates_on_exact_letter() {
        let letters = random_binary(8, 40, 5);
        let ab = Alphabet::new(letters.clone(), 1e-3).unwrap();
        for (k, a) in letters.iter().enumerate() {
            let out = alphabet_denoise(a, &ab, &[0, 1, 2]).unwrap();
            assert_eq!(&out, a, "letter {k}");
        }
    }

    #[test]
    fn fast_jinv_matches_masked_posterior() {
        let letters = random_binary(6, 20, 11);
        let ab = Alphabet::new(letters, 0.7).unwrap();
        let mut rng = seeded(2, 2);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..2.0)).collect();
        let fast = alphabet_jinv_predict(&x, &ab).unwrap();
        for j in 0..20 {
            let slow = alphabet_denoise(&x, &ab, &[j]).unwrap()[j];
            assert!((fast[j] - slow).abs() < 1e-12);
        }
        // changing x_j does not move prediction j beyond rounding
        let mut x2 = x.clone();
        x2[7] += 5.0;
        assert!((alphabet_jinv_predict(&x2, &ab).unwrap()[7] - fast[7]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alphabets() {
        assert!(Alphabet::new(vec![], 1.0).is_err());
        assert!(Alphabet::new(vec![vec![1.0], vec![1.0, 2.0]], 1.0).is_err());
        assert!(Alphabet::new(vec![vec![1.0]], 0.0).is_err());
        let ab = Alphabet::new(vec![vec![1.0, 2.0]], 1.0).unwrap();
        assert!(alphabet_denoise(&[1.0], &ab, &[]).is_err());
        assert!(alphabet_denoise(&[1.0, 1.0], &ab, &[2]).is_err());
        assert!(alphabet_vs_gp_mse(&[vec![1.0]], &[1.0], 0, 0).is_err());
    }

    #[test]
    fn single_letter_alphabet_is_exact() {
        let rows = alphabet_vs_gp_mse(&[vec![0.0, 1.0, 1.0, 0.0]], &[0.5], 1, 50).unwrap();
        assert_eq!(rows[0].alphabet_mse, 0.0);
        assert!(rows[0].gp_mse.abs() < 1e-12);
    }

    #[test]
    fn matched_gaussian_of_independent_coordinates() {
        // letters +-1 in every coordinate independently: covariance = I, and
        // the other coordinates carry no information about y_j
        let letters: Vec<Vec<f64>> = (0..4u32)
            .map(|b| {
                (0..2)
                    .map(|k| if b >> k & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        assert!((matched_gaussian_jinv_mse(&letters, 0.5).unwrap() - 1.0).abs() < 1e-12);
        // perfectly correlated coordinates: x_{-j} = y_j + noise
        let twins = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        assert!((matched_gaussian_jinv_mse(&twins, 0.5).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn glyphs_are_binary_and_separated() {
        let g = glyph_alphabet(30, 16, 0).unwrap();
        assert_eq!(g.len(), 30);
        for a in &g {
            assert!(a.iter().all(|&v| v == 0.0 || v == 1.0));
            let on = a.iter().filter(|&&v| v == 1.0).count();
            assert!(on > 10 && on < 200, "{on}");
        }
        for i in 0..30 {
            for j in 0..i {
                assert!(g[i].iter().zip(&g[j]).filter(|(a, b)| a != b).count() >= 32);
            }
        }
        assert_eq!(g, glyph_alphabet(30, 16, 0).unwrap());
    }

    #[test]
    fn gaussian_letters_approach_matched_gaussian() {
        // many i.i.d. Gaussian letters: the alphabet prior is close to the
        // Gaussian one, so the two errors should nearly agree
        let m = 6;
        let mut rng = seeded(4, 4);
        let letters: Vec<Vec<f64>> = (0..3000)
            .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let row = alphabet_vs_gp_mse(&letters, &[1.0], 8, 4000).unwrap()[0];
        assert!(
            row.alphabet_mse <= row.gp_mse + 4.0 * row.alphabet_se,
            "{row:?}"
        );
        assert!(row.alphabet_mse > 0.8 * row.gp_mse, "{row:?}");
    }

    proptest::proptest! {
        #[test]
        fn output_is_convex_combination(seed in 0u64..500, sigma in 0.05f64..5.0, j in 0usize..10) {
            let mut rng = seeded(seed, 9);
            let letters: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            let ab = Alphabet::new(letters.clone(), sigma).unwrap();
            let out = alphabet_denoise(&x, &ab, &[j]).unwrap();
            for k in 0..10 {
                let lo = letters.iter().map(|a| a[k]).fold(f64::INFINITY, f64::min);
                let hi = letters.iter().map(|a| a[k]).fold(f64::NEG_INFINITY, f64::max);
                proptest::prop_assert!(out[k] >= lo - 1e-12 && out[k] <= hi + 1e-12);
            }
        }
    }
}
