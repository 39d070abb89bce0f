//! Synthetic noisy point clouds for experiments and tests.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::{write_pointcloud, CloudFormat};
use crate::signal::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Sphere,
    Torus,
    Cube,
    Cylinder,
    Saddle,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Sphere,
        Shape::Torus,
        Shape::Cube,
        Shape::Cylinder,
        Shape::Saddle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Torus => "torus",
            Shape::Cube => "cube",
            Shape::Cylinder => "cylinder",
            Shape::Saddle => "saddle",
        }
    }

    /// A point on the surface and the surface region it belongs to (for colors).
    fn sample(self, rng: &mut impl Rng) -> ([f64; 3], usize) {
        match self {
            Shape::Sphere => {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                ([r * phi.cos(), r * phi.sin(), z], usize::from(z > 0.0))
            }
            Shape::Torus => {
                let (u, v): (f64, f64) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
                let (big, small) = (1.0, 0.35);
                let p = [
                    (big + small * v.cos()) * u.cos(),
                    (big + small * v.cos()) * u.sin(),
                    small * v.sin(),
                ];
                (p, (u / (TAU / 3.0)) as usize % 3)
            }
            Shape::Cube => {
                let face = rng.random_range(0..6usize);
                let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let s = if face % 2 == 0 { 1.0 } else { -1.0 };
                let p = match face / 2 {
                    0 => [s, a, b],
                    1 => [a, s, b],
                    _ => [a, b, s],
                };
                (p, face / 2)
            }
            Shape::Cylinder => {
                let t: f64 = rng.random_range(0.0..TAU);
                let h: f64 = rng.random_range(-1.0..1.0);
                ([t.cos(), t.sin(), h], usize::from(h > 0.0))
            }
            Shape::Saddle => {
                let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                ([x, y, 0.5 * (x * x - y * y)], usize::from(x * y > 0.0))
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown shape '{s}'")))
    }
}

const PALETTE: [[f64; 3]; 3] = [[0.85, 0.2, 0.15], [0.2, 0.55, 0.85], [0.3, 0.75, 0.3]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Standard deviation of Gaussian noise added to positions.
    pub position_noise: f64,
    /// Standard deviation of Gaussian noise added to colors (clamped to `[0, 1]`).
    pub color_noise: f64,
    /// Anisotropic scale applied after sampling, so instances of a class differ.
    pub scale_jitter: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            position_noise: 0.02,
            color_noise: 0.05,
            scale_jitter: 0.2,
        }
    }
}

/// Samples `points` noisy points on `shape`, with region colors plus noise.
pub fn synthetic_cloud(shape: Shape, points: usize, params: &SynthParams, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_noise = Normal::new(0.0, params.position_noise.max(0.0)).expect("finite std");
    let col_noise = Normal::new(0.0, params.color_noise.max(0.0)).expect("finite std");
    let scale: [f64; 3] =
        std::array::from_fn(|_| 1.0 + params.scale_jitter * rng.random_range(-1.0..1.0));
    let twist: f64 = rng.random_range(0.0..PI);

    let mut positions = Vec::with_capacity(points);
    let mut colors = Vec::with_capacity(points);
    for _ in 0..points {
        let (p, region) = shape.sample(&mut rng);
        let (c, s) = (twist.cos(), twist.sin());
        let rotated = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
        positions.push(std::array::from_fn(|k| {
            rotated[k] * scale[k] + pos_noise.sample(&mut rng)
        }));
        let base = PALETTE[region % PALETTE.len()];
        colors.push(base.map(|v| (v + col_noise.sample(&mut rng)).clamp(0.0, 1.0)));
    }
    PointCloud {
        positions,
        colors: Some(colors),
    }
}

/// Writes `count` clouds as `<root>/<shape>/<shape>_<i>.ply`, cycling through
/// `shapes`, with point counts drawn uniformly from `points` (inclusive).
/// Returns the written paths.
pub fn write_synthetic_dataset(
    root: &Path,
    shapes: &[Shape],
    count: usize,
    points: (usize, usize),
    params: &SynthParams,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if points.0 < 2 || points.0 > points.1 {
        return Err(Error::InvalidParameter(format!(
            "bad point-count range {}..={}",
            points.0, points.1
        )));
    }
    if shapes.is_empty() {
        return Err(Error::InvalidParameter("no shapes given".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut written = Vec::with_capacity(count);
    for c in 0..count {
        let shape = shapes[c % shapes.len()];
        let dir = root.join(shape.name());
        fs::create_dir_all(&dir)?;
        let n = rng.random_range(points.0..=points.1);
        let cloud = synthetic_cloud(shape, n, params, rng.random());
        let path = dir.join(format!("{}_{:03}.ply", shape.name(), c / shapes.len()));
        write_pointcloud(&path, &cloud, CloudFormat::PlyBinary)?;
        written.push(path);
    }
    Ok(written)
}
