//! Point-cloud files, normalization, datasets and CSV export.

mod dataset;
mod normalize;
mod ply;
mod xyz;

use std::path::Path;

pub use dataset::{read_dataset_index, split_dataset, DatasetEntry, DatasetIndex, Split};
pub use normalize::{minmax_normalize, AffineRecord};
pub use ply::{encode_ply, parse_ply, read_ply, write_ply, PlyEncoding};
pub use xyz::{encode_xyz, parse_xyz, read_xyz, write_xyz};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{PointCloud, Signal};

/// Which per-point attribute is processed as the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Features {
    Coords,
    Colors,
}

impl Features {
    pub fn name(self) -> &'static str {
        match self {
            Features::Coords => "coords",
            Features::Colors => "colors",
        }
    }

    pub fn rows(self, cloud: &PointCloud) -> Result<&[[f64; 3]]> {
        match self {
            Features::Coords => Ok(&cloud.positions),
            Features::Colors => cloud
                .colors
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("point cloud has no colors".into())),
        }
    }

    pub fn extract(self, cloud: &PointCloud) -> Result<Signal> {
        Ok(Signal::from_rows(self.rows(cloud)?))
    }

    /// Copy of `cloud` with this attribute replaced by `f` (must be `|V| x 3`).
    pub fn replace(self, cloud: &PointCloud, f: &Signal) -> Result<PointCloud> {
        f.check_shape(cloud.len(), 3)?;
        let rows = f.to_rows3().expect("checked shape");
        let mut out = cloud.clone();
        match self {
            Features::Coords => out.positions = rows,
            Features::Colors => out.colors = Some(rows),
        }
        Ok(out)
    }
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Features {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coords" => Ok(Features::Coords),
            "colors" => Ok(Features::Colors),
            _ => Err(Error::InvalidParameter(format!("unknown feature kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinary,
    Xyz,
}

impl CloudFormat {
    /// Format implied by a file extension; `.ply` maps to binary PLY.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("ply") => Ok(CloudFormat::PlyBinary),
            Some("xyz") | Some("txt") => Ok(CloudFormat::Xyz),
            _ => Err(Error::InvalidParameter(format!(
                "cannot infer point-cloud format from {}",
                path.display()
            ))),
        }
    }
}

/// Reads a PLY (ASCII or binary little-endian) or XYZ file, chosen by extension.
pub fn read_pointcloud(path: &Path) -> Result<PointCloud> {
    match CloudFormat::from_path(path)? {
        CloudFormat::PlyAscii | CloudFormat::PlyBinary => read_ply(path),
        CloudFormat::Xyz => read_xyz(path),
    }
}

pub fn write_pointcloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    match format {
        CloudFormat::PlyAscii => write_ply(path, cloud, PlyEncoding::Ascii),
        CloudFormat::PlyBinary => write_ply(path, cloud, PlyEncoding::BinaryLittleEndian),
        CloudFormat::Xyz => write_xyz(path, cloud),
    }
}

/// Quantizes a color channel to a byte: clamp to `[0, 1]`, scale by 255, round half away from zero.
pub fn color_to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn byte_to_color(b: u8) -> f64 {
    f64::from(b) / 255.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_quantization() {
        assert_eq!(color_to_byte(0.5), 128);
        assert_eq!(color_to_byte(1.0), 255);
        assert_eq!(color_to_byte(1.2), 255);
        assert_eq!(color_to_byte(-0.1), 0);
        assert_eq!(byte_to_color(255), 1.0);
        assert_eq!(byte_to_color(0), 0.0);
    }
}
