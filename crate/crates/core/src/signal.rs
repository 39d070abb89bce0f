//! Vertex and arc valued data: point clouds, per-vertex signals and per-arc fields.

use crate::error::{Error, Result};

/// Raw point-cloud data as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    /// Per-point colors in `[0, 1]`.
    pub colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>) -> Self {
        Self {
            positions,
            colors: None,
        }
    }

    pub fn with_colors(positions: Vec<[f64; 3]>, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != positions.len() {
            return Err(Error::DimensionMismatch {
                expected: positions.len(),
                found: colors.len(),
            });
        }
        Ok(Self {
            positions,
            colors: Some(colors),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks that the cloud is non-empty, finite, and that colors lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidParameter("point cloud has no points".into()));
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite point coordinate".into()));
        }
        if let Some(colors) = &self.colors {
            if colors.len() != self.positions.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.positions.len(),
                    found: colors.len(),
                });
            }
            if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidParameter("color outside [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn positions_signal(&self) -> Signal {
        Signal::from_rows(&self.positions)
    }

    pub fn colors_signal(&self) -> Option<Signal> {
        self.colors.as_deref().map(Signal::from_rows)
    }
}

/// A row-major `|V| x d` matrix of vertex features.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    dim: usize,
}

impl Signal {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot be split into rows of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { values, dim })
    }

    pub fn zeros(vertices: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; vertices * dim],
            dim,
        }
    }

    pub fn from_rows<const D: usize>(rows: &[[f64; D]]) -> Self {
        Self {
            values: rows.iter().flatten().copied().collect(),
            dim: D,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rows as 3-vectors; `None` unless `dim == 3`.
    pub fn to_rows3(&self) -> Option<Vec<[f64; 3]>> {
        (self.dim == 3).then(|| self.rows().map(|r| [r[0], r[1], r[2]]).collect())
    }

    pub fn check_shape(&self, vertices: usize, dim: usize) -> Result<()> {
        if self.vertex_count() != vertices {
            return Err(Error::DimensionMismatch {
                expected: vertices,
                found: self.vertex_count(),
            });
        }
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn distance_sq(&self, other: &Signal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A row-major `|A| x d` matrix indexed by directed arc.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    values: Vec<f64>,
    dim: usize,
}

impl EdgeField {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot be split into rows of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { values, dim })
    }

    pub fn zeros(arcs: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; arcs * dim],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arc_count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn arc(&self, a: usize) -> &[f64] {
        &self.values[a * self.dim..(a + 1) * self.dim]
    }

    pub fn arc_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.values[a * self.dim..(a + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dot(&self, other: &EdgeField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn distance_sq(&self, other: &EdgeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}
