//! Whitespace-separated text clouds: `x y z` or `x y z r g b` per line, with
//! colors as 0-255 values. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::color_to_byte;
use crate::error::{Error, Result};
use crate::signal::PointCloud;

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let err = |offset: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        offset,
        message,
    };
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut columns = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(start, format!("bad number '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 3 && values.len() != 6 {
            return Err(err(start, format!("expected 3 or 6 columns, found {}", values.len())));
        }
        match columns {
            None => columns = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(err(start, format!("expected {n} columns, found {}", values.len())))
            }
            _ => {}
        }
        positions.push([values[0], values[1], values[2]]);
        if values.len() == 6 {
            let mut c = [0.0; 3];
            for (k, &v) in values[3..].iter().enumerate() {
                if !(0.0..=255.0).contains(&v) {
                    return Err(err(start, format!("color value {v} outside 0..255")));
                }
                c[k] = v / 255.0;
            }
            colors.push(c);
        }
    }
    if positions.is_empty() {
        return Err(err(0, "no points".into()));
    }
    Ok(PointCloud {
        colors: (columns == Some(6)).then_some(colors),
        positions,
    })
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        path: PathBuf::from(path),
        offset: e.valid_up_to(),
        message: "file is not valid UTF-8".into(),
    })?;
    parse_xyz(text, path)
}

pub fn encode_xyz(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for (i, p) in cloud.positions.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
        if let Some(colors) = &cloud.colors {
            let [r, g, b] = colors[i].map(color_to_byte);
            let _ = write!(out, " {r} {g} {b}");
        }
        out.push('\n');
    }
    out
}

pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    fs::write(path, encode_xyz(cloud))?;
    Ok(())
}
