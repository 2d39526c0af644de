//! Seeded synthetic test scenes: a smooth background, flat-shaded shapes
//! with sharp edges and a few thin strokes, all within `[0, 1]`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::grid::ImageGrid;
use crate::rng::seeded;

/// Side length of [`bundled_scene`].
pub const BUNDLED_SIDE: usize = 128;
const BUNDLED_SEED: u64 = 20190;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub shapes: usize,
    pub strokes: usize,
    /// Amplitude of the low-frequency background ripple.
    pub ripple: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            shapes: 14,
            strokes: 5,
            ripple: 0.08,
        }
    }
}

enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        cos: f64,
        sin: f64,
    },
    Rect {
        cx: f64,
        cy: f64,
        hw: f64,
        hh: f64,
        cos: f64,
        sin: f64,
    },
    Stroke {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        half: f64,
    },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Rect {
                cx,
                cy,
                hw,
                hh,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                u.abs() <= hw && v.abs() <= hh
            }
            Shape::Stroke {
                x0,
                y0,
                x1,
                y1,
                half,
            } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let t = (((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy).max(1e-12))
                    .clamp(0.0, 1.0);
                (x - x0 - t * dx).powi(2) + (y - y0 - t * dy).powi(2) <= half * half
            }
        }
    }
}

/// A `width` x `height` scene; coordinates are scaled so that shapes keep
/// their relative size at any resolution.
pub fn synthetic_scene(
    width: usize,
    height: usize,
    params: &SceneParams,
    seed: u64,
) -> Result<ImageGrid> {
    if width < 8 || height < 8 {
        return invalid(format!("scene must be at least 8x8, got {width}x{height}"));
    }
    let mut rng = seeded(seed, 0x7363_656e);
    let scale = width.min(height) as f64;
    let (w, h) = (width as f64, height as f64);

    let base = rng.random_range(0.25..0.55);
    let (gx, gy) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
    let (fx, fy, phase) = (
        rng.random_range(1.0..3.0),
        rng.random_range(1.0..3.0),
        rng.random_range(0.0..6.3),
    );

    let mut shapes = Vec::new();
    for _ in 0..params.shapes {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let (a, b) = (
            rng.random_range(0.05..0.22) * scale,
            rng.random_range(0.05..0.22) * scale,
        );
        let shape = if rng.random_bool(0.5) {
            Shape::Ellipse {
                cx,
                cy,
                rx: a,
                ry: b,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        } else {
            Shape::Rect {
                cx,
                cy,
                hw: a,
                hh: b,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        };
        shapes.push((shape, rng.random_range(0.05..0.95)));
    }
    for _ in 0..params.strokes {
        let (x0, y0) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let len = rng.random_range(0.15..0.5) * scale;
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let half = rng.random_range(0.006..0.015) * scale;
        let stroke = Shape::Stroke {
            x0,
            y0,
            x1: x0 + len * angle.cos(),
            y1: y0 + len * angle.sin(),
            half,
        };
        shapes.push((stroke, if rng.random_bool(0.5) { 0.95 } else { 0.05 }));
    }

    ImageGrid::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
        let (u, v) = (x / scale, y / scale);
        let mut value = base
            + gx * u
            + gy * v
            + params.ripple * (fx * u * 3.0 + phase).sin() * (fy * v * 3.0).cos();
        for (shape, level) in &shapes {
            if shape.contains(x, y) {
                value = *level;
            }
        }
        value.clamp(0.0, 1.0)
    })
}

/// The fixed 128 x 128 scene used by examples and tests.
pub fn bundled_scene() -> ImageGrid {
    synthetic_scene(
        BUNDLED_SIDE,
        BUNDLED_SIDE,
        &SceneParams::default(),
        BUNDLED_SEED,
    )
    .expect("valid size")
}
