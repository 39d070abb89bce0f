use crate::signal::PointCloud;

/// Per-axis affine map used by [`minmax_normalize`], kept so that processed
/// positions can be written back in the original frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRecord {
    pub min: [f64; 3],
    pub extent: [f64; 3],
    /// Axes with zero extent; every point maps to 0.5 on them.
    pub degenerate: [bool; 3],
}

impl AffineRecord {
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| {
            if self.degenerate[k] {
                0.5
            } else {
                (p[k] - self.min[k]) / self.extent[k]
            }
        })
    }

    pub fn invert(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| {
            if self.degenerate[k] {
                self.min[k]
            } else {
                p[k] * self.extent[k] + self.min[k]
            }
        })
    }

    pub fn denormalize(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            positions: cloud.positions.iter().map(|&p| self.invert(p)).collect(),
            colors: cloud.colors.clone(),
        }
    }
}

impl AffineRecord {
    /// Per-axis min/extent of a set of rows.
    pub fn fit(rows: &[[f64; 3]]) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in rows {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let extent: [f64; 3] = std::array::from_fn(|k| max[k] - min[k]);
        Self {
            min,
            extent,
            degenerate: std::array::from_fn(|k| !(extent[k] > 0.0)),
        }
    }
}

/// Maps positions to `[0, 1]` independently per axis. Colors are untouched.
pub fn minmax_normalize(cloud: &PointCloud) -> (PointCloud, AffineRecord) {
    let record = AffineRecord::fit(&cloud.positions);
    let normalized = PointCloud {
        positions: cloud.positions.iter().map(|&p| record.apply(p)).collect(),
        colors: cloud.colors.clone(),
    };
    (normalized, record)
}
