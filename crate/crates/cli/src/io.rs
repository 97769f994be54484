//! CSV writers and the `LCSK` binary grid format.
//!
//! An `LCSK` file is a little-endian header followed by the channel payload:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `LCSK` |
//! | 4     | format version (`u32`, currently 1) |
//! | 4 × 3 | `nx`, `ny`, channel count (`u32`) |
//! | 8 × 4 | `x_min`, `x_max`, `y_min`, `y_max` (`f64`) |
//! | 2 + n per channel | name length (`u16`) and UTF-8 name |
//! | 8 × nx × ny per channel | values (`f64`), row-major with `x` fastest |
//!
//! Channels follow each other in header order. Invalid values are NaN.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use lcsk_core::deformation::DeformationField;
use lcsk_core::flowmap::Grid2;
use lcsk_core::lcs::{Extremum, MaterialCurve};
use lcsk_core::Vec2;

pub const MAGIC: [u8; 4] = *b"LCSK";
pub const VERSION: u32 = 1;

/// A named set of equally sized scalar channels on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub channels: Vec<(String, Vec<f64>)>,
}

impl GridBlock {
    pub fn new(grid: &Grid2) -> Self {
        GridBlock {
            nx: grid.nx(),
            ny: grid.ny(),
            x_range: grid.x_range(),
            y_range: grid.y_range(),
            channels: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.nx * self.ny, "channel `{name}` size");
        self.channels.push((name.to_string(), values));
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        for v in [
            VERSION,
            self.nx as u32,
            self.ny as u32,
            self.channels.len() as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [
            self.x_range.0,
            self.x_range.1,
            self.y_range.0,
            self.y_range.1,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (name, _) in &self.channels {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| {
                io::Error::new(io::ErrorKind::InvalidInput, "channel name too long")
            })?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
        }
        for (_, values) in &self.channels {
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(bad("not an LCSK file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(bad(&format!("unsupported LCSK version {version}")));
        }
        let nx = read_u32(r)? as usize;
        let ny = read_u32(r)? as usize;
        let count = read_u32(r)? as usize;
        let x_range = (read_f64(r)?, read_f64(r)?);
        let y_range = (read_f64(r)?, read_f64(r)?);
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut buf)?;
            names.push(String::from_utf8(buf).map_err(|_| bad("channel name is not UTF-8"))?);
        }
        let n = nx
            .checked_mul(ny)
            .ok_or_else(|| bad("grid size overflows"))?;
        let mut channels = Vec::with_capacity(count);
        for name in names {
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            channels.push((name, values));
        }
        Ok(GridBlock {
            nx,
            ny,
            x_range,
            y_range,
            channels,
        })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Self::read_from(&mut io::BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn components(v: Option<Vec2>) -> [f64; 2] {
    v.map_or([f64::NAN; 2], |v| [v.x, v.y])
}

/// Grid channels written by `ftle`. The backward FTLE lives at the image
/// points and is resampled onto the initial grid by nearest neighbour.
pub fn field_block(field: &DeformationField, grid: &Grid2) -> GridBlock {
    let svd = |f: fn(&lcsk_core::deformation::SvdPoint) -> f64| -> Vec<f64> {
        field
            .svd
            .iter()
            .map(|s| s.as_ref().map_or(f64::NAN, f))
            .collect()
    };
    let mut b = GridBlock::new(grid);
    b.push("ftle_f", field.ftle_f.clone());
    b.push("ftle_b", field.resample_backward_nearest(grid));
    b.push("s1", svd(|s| s.sigma1));
    b.push("s2", svd(|s| s.sigma2));
    b.push("xi1x", svd(|s| s.xi1.x));
    b.push("xi1y", svd(|s| s.xi1.y));
    b.push("xi2x", svd(|s| s.xi2.x));
    b.push("xi2y", svd(|s| s.xi2.y));
    b
}

/// Per-site CSV: positions, Jacobian, SVD and both FTLE values.
pub fn write_field_csv<W: Write>(w: &mut W, field: &DeformationField) -> io::Result<()> {
    writeln!(
        w,
        "x,y,fx,fy,j11,j12,j21,j22,valid,s1,s2,xi1x,xi1y,xi2x,xi2y,th1x,th1y,th2x,th2y,ftle_f,ftle_b,degenerate"
    )?;
    for k in 0..field.len() {
        let p = field.site(k);
        let q = field.image(k);
        let j = field.flow.jacobians[k];
        let valid = field.flow.valid[k];
        let s = field.svd[k];
        let sig = s.map_or([f64::NAN; 2], |s| [s.sigma1, s.sigma2]);
        let xi1 = components(s.map(|s| s.xi1));
        let xi2 = components(s.map(|s| s.xi2));
        let th1 = components(s.map(|s| s.theta1));
        let th2 = components(s.map(|s| s.theta2));
        let degenerate = s.is_some_and(|s| s.degenerate);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.x,
            p.y,
            q.x,
            q.y,
            j.m[0][0],
            j.m[0][1],
            j.m[1][0],
            j.m[1][1],
            u8::from(valid),
            sig[0],
            sig[1],
            xi1[0],
            xi1[1],
            xi2[0],
            xi2[1],
            th1[0],
            th1[1],
            th2[0],
            th2[1],
            field.ftle_f[k],
            field.ftle_b[k],
            u8::from(degenerate),
        )?;
    }
    Ok(())
}

/// One row per vertex. `L1`/`L2` are the first and second Lie derivatives
/// across the curve.
pub fn write_curves_csv<W: Write>(w: &mut W, curves: &[MaterialCurve]) -> io::Result<()> {
    writeln!(w, "curve_id,vertex_id,x,y,s1,s2,L1,L2,class")?;
    for (id, c) in curves.iter().enumerate() {
        for (v, p) in c.vertices.iter().enumerate() {
            let (s1, s2, l1, l2) = match c.diagnostics.get(v) {
                Some(d) => {
                    let (l1, l2) = d.normal_derivatives(c.kind);
                    (d.sigma1, d.sigma2, l1, l2)
                }
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            writeln!(
                w,
                "{id},{v},{},{},{s1},{s2},{l1},{l2},{}",
                p.x,
                p.y,
                c.classification.as_str()
            )?;
        }
    }
    Ok(())
}

pub fn write_extrema_csv<W: Write>(w: &mut W, extrema: &[Extremum]) -> io::Result<()> {
    writeln!(w, "x,y,second")?;
    for e in extrema {
        writeln!(w, "{},{},{}", e.point.x, e.point.y, e.second)?;
    }
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_roundtrips_bit_exactly() {
        let grid = Grid2::new((-1.0, 1.0), (0.0, 2.0), 3, 2).unwrap();
        let mut b = GridBlock::new(&grid);
        b.push("a", vec![0.1, -0.0, f64::NAN, 1e300, f64::INFINITY, 5.0]);
        b.push("bee", vec![1.0; 6]);
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        let r = GridBlock::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(
            (r.nx, r.ny, r.x_range, r.y_range),
            (3, 2, (-1.0, 1.0), (0.0, 2.0))
        );
        for ((n1, v1), (n2, v2)) in b.channels.iter().zip(&r.channels) {
            assert_eq!(n1, n2);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(v1), bits(v2));
        }
    }

    #[test]
    fn rejects_foreign_and_truncated_input() {
        assert!(GridBlock::read_from(&mut &b"NOPE\x01\0\0\0"[..]).is_err());
        let grid = Grid2::new((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let mut b = GridBlock::new(&grid);
        b.push("a", vec![1.0; 4]);
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(GridBlock::read_from(&mut bytes.as_slice()).is_err());
    }
}
