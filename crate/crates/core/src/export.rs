//! Surface export: CSV point lists, 16-bit binary PGM heightmaps, and OBJ
//! triangle meshes. All three formats are byte-deterministic for a given
//! field.

use std::path::Path;

use crate::error::Result;
use crate::field::SampledField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Pgm,
    Obj,
}

impl ExportFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(ExportFormat::Csv),
            "pgm" => Some(ExportFormat::Pgm),
            "obj" => Some(ExportFormat::Obj),
            _ => None,
        }
    }
}

pub fn export_field(field: &SampledField, format: ExportFormat, path: &Path) -> Result<()> {
    let bytes = render_field(field, format);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Renders the field in the given format; exposed separately so tests can
/// compare bytes without touching the filesystem.
pub fn render_field(field: &SampledField, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => render_csv(field),
        ExportFormat::Pgm => render_pgm(field),
        ExportFormat::Obj => render_obj(field),
    }
}

/// `x,y,z` rows in grid-row-major order, 17 significant digits so a decimal
/// round trip is bit-exact.
fn render_csv(field: &SampledField) -> Vec<u8> {
    let mut out = String::from("x,y,z\n");
    for (iy, &y) in field.ys().iter().enumerate() {
        for (ix, &x) in field.xs().iter().enumerate() {
            out.push_str(&format!("{x:.17e},{y:.17e},{:.17e}\n", field.value(ix, iy)));
        }
    }
    out.into_bytes()
}

/// Binary P5 with 16-bit big-endian samples, min-max normalized to
/// `0..=65535`; a constant field maps to all zeros.
fn render_pgm(field: &SampledField) -> Vec<u8> {
    let values = field.values();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = Vec::with_capacity(32 + values.len() * 2);
    out.extend_from_slice(format!("P5\n{} {}\n65535\n", field.nx(), field.ny()).as_bytes());
    for iy in 0..field.ny() {
        for ix in 0..field.nx() {
            let v = field.value(ix, iy);
            let level = if span > 0.0 {
                ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    out
}

/// All vertices as `v x y z` (grid-row-major), then two counterclockwise
/// triangles per cell with 1-based indices, viewed from +z.
fn render_obj(field: &SampledField) -> Vec<u8> {
    let nx = field.nx();
    let ny = field.ny();
    let mut out = String::new();
    for (iy, &y) in field.ys().iter().enumerate() {
        for (ix, &x) in field.xs().iter().enumerate() {
            out.push_str(&format!("v {x} {y} {}\n", field.value(ix, iy)));
        }
    }
    let idx = |ix: usize, iy: usize| iy * nx + ix + 1;
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let (a, b, c, d) = (idx(ix, iy), idx(ix + 1, iy), idx(ix + 1, iy + 1), idx(ix, iy + 1));
            out.push_str(&format!("f {a} {b} {c}\n"));
            out.push_str(&format!("f {a} {c} {d}\n"));
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn csv_round_trips_bit_exact() {
        let field = SampledField::from_fn(grid(4), grid(4), |x, y| {
            (std::f64::consts::PI * x).sin() * y + 1.0 / 3.0
        });
        let bytes = render_field(&field, ExportFormat::Csv);
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,z"));
        let mut idx = 0usize;
        for line in lines {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            let (ix, iy) = (idx % 4, idx / 4);
            assert_eq!(cols[0].to_bits(), field.xs()[ix].to_bits());
            assert_eq!(cols[1].to_bits(), field.ys()[iy].to_bits());
            assert_eq!(cols[2].to_bits(), field.value(ix, iy).to_bits());
            idx += 1;
        }
        assert_eq!(idx, 16);
    }

    #[test]
    fn constant_field_pgm_is_all_zero() {
        let field = SampledField::from_fn(grid(2), grid(2), |_, _| 7.25);
        let bytes = render_field(&field, ExportFormat::Pgm);
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 8]);
    }

    #[test]
    fn pgm_normalizes_to_full_range() {
        let field = SampledField::from_fn(grid(3), grid(3), |x, y| x + 2.0 * y);
        let bytes = render_field(&field, ExportFormat::Pgm);
        let header_len = b"P5\n3 3\n65535\n".len();
        let pixels: Vec<u16> = bytes[header_len..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(pixels.len(), 9);
        assert_eq!(pixels[0], 0);
        assert_eq!(pixels[8], 65535);
        assert!(pixels.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn obj_has_expected_counts_and_orientation() {
        let field = SampledField::from_fn(grid(3), grid(3), |_, _| 0.0);
        let text = String::from_utf8(render_field(&field, ExportFormat::Obj)).unwrap();
        let vs: Vec<&str> = text.lines().filter(|l| l.starts_with("v ")).collect();
        let fs: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(vs.len(), 9);
        assert_eq!(fs.len(), 8);
        // counterclockwise from +z: signed area of each projected triangle
        // is positive
        let verts: Vec<(f64, f64)> = vs
            .iter()
            .map(|l| {
                let parts: Vec<f64> =
                    l.split_whitespace().skip(1).map(|p| p.parse().unwrap()).collect();
                (parts[0], parts[1])
            })
            .collect();
        for face in &fs {
            let ids: Vec<usize> =
                face.split_whitespace().skip(1).map(|p| p.parse::<usize>().unwrap() - 1).collect();
            let (a, b, c) = (verts[ids[0]], verts[ids[1]], verts[ids[2]]);
            let area2 = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            assert!(area2 > 0.0, "face {face} is not counterclockwise");
        }
    }
}
