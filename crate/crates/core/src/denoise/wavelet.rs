use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Result};
use crate::grid::{reflect, ImageGrid};

/// `sign(c) * max(|c| - t, 0)`.
#[inline]
pub fn soft_threshold(c: f64, t: f64) -> f64 {
    if c > t {
        c - t
    } else if c < -t {
        c + t
    } else {
        0.0
    }
}

fn haar_step(data: &mut [f64], scratch: &mut [f64], stride: usize, n: usize) {
    let half = n / 2;
    for i in 0..half {
        let a = data[2 * i * stride];
        let b = data[(2 * i + 1) * stride];
        scratch[i] = (a + b) * FRAC_1_SQRT_2;
        scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    for i in 0..n {
        data[i * stride] = scratch[i];
    }
}

fn haar_step_inv(data: &mut [f64], scratch: &mut [f64], stride: usize, n: usize) {
    let half = n / 2;
    for i in 0..half {
        let a = data[i * stride];
        let d = data[(half + i) * stride];
        scratch[2 * i] = (a + d) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
    }
    for i in 0..n {
        data[i * stride] = scratch[i];
    }
}

fn check_dims(w: usize, h: usize, len: usize, levels: usize) -> Result<()> {
    let block = 1usize << levels;
    if len != w * h || w % block != 0 || h % block != 0 {
        return invalid(format!(
            "{w}x{h} buffer is not divisible into {block}x{block} blocks"
        ));
    }
    Ok(())
}

/// In-place orthonormal 2-D Haar transform (Mallat layout). Both sides must
/// be multiples of `2^levels`.
pub fn haar_forward(data: &mut [f64], w: usize, h: usize, levels: usize) -> Result<()> {
    check_dims(w, h, data.len(), levels)?;
    let mut scratch = vec![0.0; w.max(h)];
    let (mut cw, mut ch) = (w, h);
    for _ in 0..levels {
        for r in 0..ch {
            haar_step(&mut data[r * w..], &mut scratch, 1, cw);
        }
        for c in 0..cw {
            haar_step(&mut data[c..], &mut scratch, w, ch);
        }
        cw /= 2;
        ch /= 2;
    }
    Ok(())
}

/// Inverse of [`haar_forward`].
pub fn haar_inverse(data: &mut [f64], w: usize, h: usize, levels: usize) -> Result<()> {
    check_dims(w, h, data.len(), levels)?;
    let mut scratch = vec![0.0; w.max(h)];
    for level in (0..levels).rev() {
        let (cw, ch) = (w >> level, h >> level);
        for c in 0..cw {
            haar_step_inv(&mut data[c..], &mut scratch, w, ch);
        }
        for r in 0..ch {
            haar_step_inv(&mut data[r * w..], &mut scratch, 1, cw);
        }
    }
    Ok(())
}

/// Multi-level Haar soft-thresholding. The image is mirror-padded to a
/// multiple of `2^levels` on each side, every detail coefficient is
/// soft-thresholded by `t`, and the padding is cropped after inversion.
pub fn haar_wavelet_denoise(x: &ImageGrid, t: f64, levels: usize) -> Result<ImageGrid> {
    if !(t >= 0.0) || levels == 0 || levels > 30 {
        return invalid(format!(
            "need t >= 0 and 1 <= levels <= 30, got t = {t}, levels = {levels}"
        ));
    }
    let block = 1usize << levels;
    let (w, h) = (x.width(), x.height());
    let pw = w.div_ceil(block) * block;
    let ph = h.div_ceil(block) * block;
    let mut data = Vec::with_capacity(pw * ph);
    for r in 0..ph {
        for c in 0..pw {
            data.push(x.get(reflect(r as isize, h), reflect(c as isize, w)));
        }
    }
    haar_forward(&mut data, pw, ph, levels)?;
    let (aw, ah) = (pw >> levels, ph >> levels);
    for r in 0..ph {
        for c in 0..pw {
            if r >= ah || c >= aw {
                let v = &mut data[r * pw + c];
                *v = soft_threshold(*v, t);
            }
        }
    }
    haar_inverse(&mut data, pw, ph, levels)?;
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        out.extend_from_slice(&data[r * pw..r * pw + w]);
    }
    Ok(ImageGrid::from_parts(w, h, out))
}
