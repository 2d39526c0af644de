use crate::error::{invalid, Result};
use crate::grid::{reflect, ImageGrid};

/// Sliding box sum of side `k` over a `w`x`h` buffer; the output has shape
/// `(w - k + 1) x (h - k + 1)`.
fn box_sum(src: &[f64], w: usize, h: usize, k: usize) -> Vec<f64> {
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; ow * h];
    for r in 0..h {
        let line = &src[r * w..(r + 1) * w];
        let mut acc: f64 = line[..k].iter().sum();
        rows[r * ow] = acc;
        for c in 1..ow {
            acc += line[c + k - 1] - line[c - 1];
            rows[r * ow + c] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for c in 0..ow {
        let mut acc: f64 = (0..k).map(|r| rows[r * ow + c]).sum();
        out[c] = acc;
        for r in 1..oh {
            acc += rows[(r + k - 1) * ow + c] - rows[(r - 1) * ow + c];
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Non-local means.
///
/// `out_j = sum_k w_jk x_k / sum_k w_jk` over the `window` x `window`
/// neighbourhood of `j` (self included), with `w_jk = exp(-D_jk / h^2)` and
/// `D_jk` the mean squared difference between the `patch` x `patch`
/// neighbourhoods of `j` and `k`. Mirror boundary.
pub fn nl_means(x: &ImageGrid, h: f64, patch: usize, window: usize) -> Result<ImageGrid> {
    if !(h > 0.0) {
        return invalid(format!("NL-means cut-off must be positive, got {h}"));
    }
    if patch % 2 == 0 || window % 2 == 0 || patch > window {
        return invalid(format!(
            "need odd patch <= odd window, got {patch} and {window}"
        ));
    }
    let (w, ht) = (x.width(), x.height());
    let pr = patch / 2;
    let wr = window / 2;
    let pad = pr + wr;
    let pw = w + 2 * pad;
    let ph = ht + 2 * pad;
    let mut padded = Vec::with_capacity(pw * ph);
    for r in 0..ph {
        for c in 0..pw {
            padded.push(x.get(
                reflect(r as isize - pad as isize, ht),
                reflect(c as isize - pad as isize, w),
            ));
        }
    }

    // Squared differences are needed on the region reachable by patches
    // around original pixels: rows/cols wr .. wr + h + 2 pr.
    let rw = w + 2 * pr;
    let rh = ht + 2 * pr;
    let inv_area = 1.0 / (patch * patch) as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut num = vec![0.0; w * ht];
    let mut den = vec![0.0; w * ht];
    let mut diff = vec![0.0; rw * rh];
    for dy in -(wr as isize)..=(wr as isize) {
        for dx in -(wr as isize)..=(wr as isize) {
            for r in 0..rh {
                let base = (r + wr) * pw + wr;
                let shifted = ((r + wr) as isize + dy) as usize * pw + (wr as isize + dx) as usize;
                for c in 0..rw {
                    let d = padded[base + c] - padded[shifted + c];
                    diff[r * rw + c] = d * d;
                }
            }
            let dist = box_sum(&diff, rw, rh, patch);
            for r in 0..ht {
                let nb = ((r + pad) as isize + dy) as usize * pw;
                for c in 0..w {
                    let weight = (-dist[r * w + c] * inv_area * inv_h2).exp();
                    let v = padded[nb + ((c + pad) as isize + dx) as usize];
                    num[r * w + c] += weight * v;
                    den[r * w + c] += weight;
                }
            }
        }
    }
    let out = num.iter().zip(&den).map(|(n, d)| n / d).collect();
    Ok(ImageGrid::from_parts(w, ht, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageGrid {
        let mut rng = crate::rng::seeded(seed, 0);
        ImageGrid::new(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    // Direct O(m * window^2 * patch^2) evaluation of the definition.
    fn brute(x: &ImageGrid, h: f64, patch: usize, window: usize) -> ImageGrid {
        let (pr, wr) = ((patch / 2) as isize, (window / 2) as isize);
        ImageGrid::from_fn(x.width(), x.height(), |r, c| {
            let (r, c) = (r as isize, c as isize);
            let (mut num, mut den) = (0.0, 0.0);
            for dy in -wr..=wr {
                for dx in -wr..=wr {
                    let mut d = 0.0;
                    for u in -pr..=pr {
                        for v in -pr..=pr {
                            let a = x.get_mirrored(r + u, c + v);
                            let b = x.get_mirrored(r + dy + u, c + dx + v);
                            d += (a - b) * (a - b);
                        }
                    }
                    d /= (patch * patch) as f64;
                    let wgt = (-d / (h * h)).exp();
                    num += wgt * x.get_mirrored(r + dy, c + dx);
                    den += wgt;
                }
            }
            num / den
        })
        .unwrap()
    }

    #[test]
    fn matches_direct_definition() {
        let x = random_image(9, 7, 4);
        let fast = nl_means(&x, 0.3, 3, 5).unwrap();
        let slow = brute(&x, 0.3, 3, 5);
        for (a, b) in fast.values().iter().zip(slow.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_image_unchanged() {
        let x = ImageGrid::filled(10, 10, 0.42).unwrap();
        let out = nl_means(&x, 0.1, 5, 11).unwrap();
        assert!(out.values().iter().all(|v| (v - 0.42).abs() < 1e-14));
    }

    #[test]
    fn huge_cutoff_is_window_mean() {
        let x = random_image(12, 12, 5);
        let out = nl_means(&x, 1e12, 3, 5).unwrap();
        for r in 0..12isize {
            for c in 0..12isize {
                let mut s = 0.0;
                for dy in -2..=2 {
                    for dx in -2..=2 {
                        s += x.get_mirrored(r + dy, c + dx);
                    }
                }
                assert!((out.get(r as usize, c as usize) - s / 25.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tiny_cutoff_returns_input() {
        let x = random_image(16, 16, 6);
        let out = nl_means(&x, 1e-6, 5, 11).unwrap();
        for (a, b) in out.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let x = random_image(4, 4, 7);
        assert!(nl_means(&x, 0.0, 3, 5).is_err());
        assert!(nl_means(&x, -1.0, 3, 5).is_err());
        assert!(nl_means(&x, 0.1, 4, 5).is_err());
        assert!(nl_means(&x, 0.1, 7, 5).is_err());
    }
}
