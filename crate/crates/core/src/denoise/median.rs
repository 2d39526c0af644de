use crate::error::{invalid, Result};
use crate::grid::{reflect, ImageGrid};
use crate::par::map_indices;

/// Offsets `(dr, dc)` with `dr^2 + dc^2 <= r^2`.
pub(crate) fn disk_offsets(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn median_of(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (_, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median over the disk of radius `r` around each pixel, mirror boundary.
///
/// With `include_center = false` every disk sample that lands on the centre
/// pixel, including mirrored copies near the border, is dropped, so the
/// output at a pixel never depends on that pixel's own value. A disk left
/// with no samples yields 0.
pub fn median_filter(x: &ImageGrid, r: usize, include_center: bool) -> Result<ImageGrid> {
    if r == 0 {
        return invalid("median radius must be >= 1");
    }
    let (w, h) = (x.width(), x.height());
    let offsets = disk_offsets(r);
    let rows = map_indices(h, |row| {
        let mut buf = Vec::with_capacity(offsets.len());
        let mut out = Vec::with_capacity(w);
        for col in 0..w {
            buf.clear();
            for &(dr, dc) in &offsets {
                let rr = reflect(row as isize + dr, h);
                let cc = reflect(col as isize + dc, w);
                if !include_center && rr == row && cc == col {
                    continue;
                }
                buf.push(x.get(rr, cc));
            }
            out.push(if buf.is_empty() {
                0.0
            } else {
                median_of(&mut buf)
            });
        }
        out
    });
    Ok(ImageGrid::from_parts(w, h, rows.concat()))
}
