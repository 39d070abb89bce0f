//! PLY reader/writer for the `vertex` element.
//!
//! Reads ASCII and binary little-endian files with `x, y, z` stored as
//! `float`/`double` and optional `red, green, blue` as `uchar`. Other
//! properties and elements are parsed and skipped.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{byte_to_color, color_to_byte};
use crate::error::{Error, Result};
use crate::signal::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: PathBuf::from(self.path),
            offset,
            message: message.into(),
        }
    }
}

fn parse_header(bytes: &[u8], ctx: &Ctx) -> Result<Header> {
    let mut offset = 0;
    let next_line = |offset: &mut usize| -> Result<(usize, String)> {
        let start = *offset;
        let rest = &bytes[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ctx.err(start, "unterminated header"))?;
        *offset = start + end + 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| ctx.err(start, "header is not valid UTF-8"))?;
        Ok((start, line.trim_end_matches('\r').to_owned()))
    };

    let (start, magic) = next_line(&mut offset)?;
    if magic.trim() != "ply" {
        return Err(ctx.err(start, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (start, line) = next_line(&mut offset)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(ctx.err(start, format!("unsupported format '{other}'"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| ctx.err(start, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: (*name).to_owned(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| ctx.err(start, "property before any element"))?;
                let count = Scalar::parse(count)
                    .filter(|s| !s.is_float())
                    .ok_or_else(|| ctx.err(start, format!("bad list count type '{count}'")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| ctx.err(start, format!("unknown type '{item}'")))?;
                element.properties.push(Property {
                    name: (*name).to_owned(),
                    kind: PropertyKind::List { count, item },
                });
            }
            ["property", ty, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| ctx.err(start, "property before any element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| ctx.err(start, format!("unknown type '{ty}'")))?;
                element.properties.push(Property {
                    name: (*name).to_owned(),
                    kind: PropertyKind::Scalar(ty),
                });
            }
            ["end_header"] => break,
            _ => return Err(ctx.err(start, format!("malformed header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| ctx.err(0, "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

/// Where each vertex property ends up.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Position(usize),
    Color(usize),
    Skip,
}

fn vertex_slots(element: &Element, ctx: &Ctx, header_offset: usize) -> Result<(Vec<Slot>, bool)> {
    let mut slots = Vec::with_capacity(element.properties.len());
    let mut seen_pos = [false; 3];
    let mut seen_col = [false; 3];
    for p in &element.properties {
        let pos = ["x", "y", "z"].iter().position(|n| *n == p.name);
        let col = ["red", "green", "blue"].iter().position(|n| *n == p.name);
        let slot = match (pos, col, &p.kind) {
            (Some(k), _, PropertyKind::Scalar(s)) if s.is_float() => {
                seen_pos[k] = true;
                Slot::Position(k)
            }
            (Some(_), _, _) => {
                return Err(ctx.err(
                    header_offset,
                    format!("vertex property '{}' must be float or double", p.name),
                ))
            }
            (_, Some(k), PropertyKind::Scalar(Scalar::U8)) => {
                seen_col[k] = true;
                Slot::Color(k)
            }
            (_, Some(_), _) => {
                return Err(ctx.err(
                    header_offset,
                    format!("vertex property '{}' must be uchar", p.name),
                ))
            }
            _ => {
                log::warn!("{}: skipping vertex property '{}'", ctx.path.display(), p.name);
                Slot::Skip
            }
        };
        slots.push(slot);
    }
    if seen_pos != [true; 3] {
        return Err(ctx.err(header_offset, "vertex element lacks x, y or z"));
    }
    let has_colors = match seen_col {
        [true, true, true] => true,
        [false, false, false] => false,
        _ => return Err(ctx.err(header_offset, "partial red/green/blue properties")),
    };
    Ok((slots, has_colors))
}

/// Sequential reader over either encoding of the body.
trait BodyReader {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
    fn offset(&self) -> usize;
    fn finish(&mut self) -> Result<()>;
}

struct BinaryReader<'a, 'c> {
    bytes: &'a [u8],
    pos: usize,
    ctx: &'c Ctx<'c>,
}

impl BodyReader for BinaryReader<'_, '_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        let chunk = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.ctx.err(self.pos, "truncated binary payload"))?;
        let value = match ty {
            Scalar::I8 => f64::from(chunk[0] as i8),
            Scalar::U8 => f64::from(chunk[0]),
            Scalar::I16 => f64::from(i16::from_le_bytes([chunk[0], chunk[1]])),
            Scalar::U16 => f64::from(u16::from_le_bytes([chunk[0], chunk[1]])),
            Scalar::I32 => f64::from(i32::from_le_bytes(chunk.try_into().expect("4 bytes"))),
            Scalar::U32 => f64::from(u32::from_le_bytes(chunk.try_into().expect("4 bytes"))),
            Scalar::F32 => f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes"))),
            Scalar::F64 => f64::from_le_bytes(chunk.try_into().expect("8 bytes")),
        };
        self.pos += n;
        Ok(value)
    }

    fn offset(&self) -> usize {
        self.pos
    }

    fn finish(&mut self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.ctx.err(self.pos, "trailing bytes after last element"));
        }
        Ok(())
    }
}

struct AsciiReader<'a, 'c> {
    bytes: &'a [u8],
    pos: usize,
    ctx: &'c Ctx<'c>,
}

impl AsciiReader<'_, '_> {
    fn token(&mut self) -> Option<(usize, &str)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (start < self.pos).then(|| (start, std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")))
    }
}

impl BodyReader for AsciiReader<'_, '_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let ctx = self.ctx;
        let end = self.bytes.len();
        let (start, tok) = self
            .token()
            .ok_or_else(|| ctx.err(end, "truncated ASCII payload"))?;
        let value: f64 = tok
            .parse()
            .map_err(|_| ctx.err(start, format!("bad number '{tok}'")))?;
        if !ty.is_float() && value.fract() != 0.0 {
            return Err(ctx.err(start, format!("expected integer, found '{tok}'")));
        }
        if ty == Scalar::U8 && !(0.0..=255.0).contains(&value) {
            return Err(ctx.err(start, format!("uchar out of range: '{tok}'")));
        }
        Ok(value)
    }

    fn offset(&self) -> usize {
        self.pos
    }

    fn finish(&mut self) -> Result<()> {
        if let Some((start, _)) = self.token() {
            return Err(self.ctx.err(start, "trailing data after last element"));
        }
        Ok(())
    }
}

fn read_body(header: &Header, body: &mut dyn BodyReader, ctx: &Ctx) -> Result<PointCloud> {
    let mut cloud = None;
    for element in &header.elements {
        if element.name == "vertex" {
            if cloud.is_some() {
                return Err(ctx.err(body.offset(), "duplicate vertex element"));
            }
            let (slots, has_colors) = vertex_slots(element, ctx, 0)?;
            let mut positions = Vec::with_capacity(element.count.min(1 << 20));
            let mut colors = Vec::with_capacity(if has_colors { positions.capacity() } else { 0 });
            for _ in 0..element.count {
                let mut p = [0.0; 3];
                let mut c = [0.0; 3];
                for (prop, slot) in element.properties.iter().zip(&slots) {
                    match (slot, &prop.kind) {
                        (Slot::Position(k), PropertyKind::Scalar(ty)) => p[*k] = body.scalar(*ty)?,
                        (Slot::Color(k), PropertyKind::Scalar(ty)) => {
                            c[*k] = byte_to_color(body.scalar(*ty)? as u8)
                        }
                        (_, kind) => skip_property(kind, body, ctx)?,
                    }
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(ctx.err(body.offset(), "non-finite vertex coordinate"));
                }
                positions.push(p);
                if has_colors {
                    colors.push(c);
                }
            }
            cloud = Some(PointCloud {
                positions,
                colors: has_colors.then_some(colors),
            });
        } else {
            log::warn!("{}: skipping element '{}'", ctx.path.display(), element.name);
            for _ in 0..element.count {
                for prop in &element.properties {
                    skip_property(&prop.kind, body, ctx)?;
                }
            }
        }
    }
    body.finish()?;
    let cloud = cloud.ok_or_else(|| ctx.err(header.body_offset, "no vertex element"))?;
    if cloud.is_empty() {
        return Err(ctx.err(header.body_offset, "vertex element is empty"));
    }
    Ok(cloud)
}

fn skip_property(kind: &PropertyKind, body: &mut dyn BodyReader, ctx: &Ctx) -> Result<()> {
    match kind {
        PropertyKind::Scalar(ty) => {
            body.scalar(*ty)?;
        }
        PropertyKind::List { count, item } => {
            let at = body.offset();
            let n = body.scalar(*count)?;
            if !(n >= 0.0) {
                return Err(ctx.err(at, "negative list length"));
            }
            for _ in 0..n as usize {
                body.scalar(*item)?;
            }
        }
    }
    Ok(())
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let ctx = Ctx { path };
    let header = parse_header(bytes, &ctx)?;
    match header.encoding {
        PlyEncoding::BinaryLittleEndian => {
            let mut reader = BinaryReader {
                bytes,
                pos: header.body_offset,
                ctx: &ctx,
            };
            read_body(&header, &mut reader, &ctx)
        }
        PlyEncoding::Ascii => {
            let mut reader = AsciiReader {
                bytes,
                pos: header.body_offset,
                ctx: &ctx,
            };
            read_body(&header, &mut reader, &ctx)
        }
    }
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    parse_ply(&bytes, path)
}

pub fn encode_ply(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut out = Vec::new();
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    out.extend_from_slice(
        format!(
            "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
            cloud.len()
        )
        .as_bytes(),
    );
    if cloud.colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");

    for (i, p) in cloud.positions.iter().enumerate() {
        let color = cloud.colors.as_ref().map(|c| c[i].map(color_to_byte));
        match encoding {
            PlyEncoding::Ascii => {
                let mut line = format!("{} {} {}", p[0], p[1], p[2]);
                if let Some([r, g, b]) = color {
                    line.push_str(&format!(" {r} {g} {b}"));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(rgb) = color {
                    out.extend_from_slice(&rgb);
                }
            }
        }
    }
    out
}

pub fn write_ply(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_ply(cloud, encoding))?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(bytes: &[u8]) -> Result<PointCloud> {
        parse_ply(bytes, Path::new("test.ply"))
    }

    fn sample() -> PointCloud {
        PointCloud::with_colors(
            vec![[0.1, -2.5, 3.0], [1e-7, 0.0, 12345.678], [-0.3, 0.7, 0.2]],
            vec![[1.0, 0.0, 0.5], [0.2, 0.4, 0.6], [0.0, 0.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact_on_positions() {
        let cloud = sample();
        let back = parse(&encode_ply(&cloud, PlyEncoding::BinaryLittleEndian)).unwrap();
        assert_eq!(back.positions, cloud.positions);
        let colors = back.colors.unwrap();
        assert_eq!(colors[0], [1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn ascii_round_trip_is_bit_exact_on_positions() {
        let cloud = sample();
        let back = parse(&encode_ply(&cloud, PlyEncoding::Ascii)).unwrap();
        assert_eq!(back.positions, cloud.positions);
    }

    #[test]
    fn reads_float32_and_skips_extras() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment made by hand\n\
element vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\n\
property uchar red\nproperty uchar green\nproperty uchar blue\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n"
            .to_vec();
        for (p, c) in [([1.5f32, 2.0, -1.0], [255u8, 0, 10]), ([0.0, 0.25, 4.0], [0, 0, 0])] {
            for v in p {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.extend_from_slice(&9.0f32.to_le_bytes());
            bytes.extend_from_slice(&c);
        }
        bytes.push(3);
        for i in [0i32, 1, 0] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let cloud = parse(&bytes).unwrap();
        assert_eq!(cloud.positions, vec![[1.5, 2.0, -1.0], [0.0, 0.25, 4.0]]);
        let colors = cloud.colors.unwrap();
        assert_eq!(colors[0][0], 1.0);
        assert_eq!(colors[1][0], 0.0);
    }

    #[test]
    fn rejects_bad_headers_and_types() {
        assert!(parse(b"plx\nformat ascii 1.0\nend_header\n").is_err());
        assert!(parse(b"ply\nformat binary_big_endian 1.0\nend_header\n").is_err());
        let int_coords = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\n\
property int y\nproperty int z\nend_header\n1 2 3\n";
        assert!(matches!(parse(int_coords), Err(Error::Parse { .. })));
        let float_red = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n\
property float y\nproperty float z\nproperty float red\nproperty float green\n\
property float blue\nend_header\n1 2 3 0.5 0.5 0.5\n";
        assert!(parse(float_red).is_err());
        assert!(parse(b"ply\nformat ascii 1.0\nelement vertex 1\n").is_err());
    }

    #[test]
    fn error_reports_byte_offset() {
        let bytes = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n\
property float y\nproperty float z\nend_header\n1 2 3\n4 oops 6\n";
        match parse(bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&bytes[offset..offset + 4], b"oops"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn every_truncation_is_rejected_or_full_size() {
        let cloud = sample();
        for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = encode_ply(&cloud, encoding);
            for cut in 0..bytes.len() {
                if let Ok(c) = parse(&bytes[..cut]) {
                    assert_eq!(c.len(), cloud.len(), "cut at {cut} ({encoding:?})");
                    assert_eq!(encoding, PlyEncoding::Ascii);
                }
            }
        }
    }
}
