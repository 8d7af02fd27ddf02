//! Field snapshots on disk: CSV (coordinates then value) and a binary layout
//!
//! ```text
//! "LKSF" | u32 LE header length | JSON header | f64 LE values
//! ```
//!
//! The JSON header holds `dim, extents, points, boundary, time, epsilon,
//! theta, format-version`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};

pub const MAGIC: &[u8; 4] = b"LKSF";
pub const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub points: Vec<usize>,
    pub boundary: Boundary,
    pub time: f64,
    pub epsilon: f64,
    pub theta: f64,
    #[serde(rename = "format-version")]
    pub format_version: u32,
}

impl Header {
    pub fn grid(&self) -> Result<Grid> {
        if self.extents.len() != self.dim || self.points.len() != self.dim {
            return Err(Error::Decode("header dim disagrees with extents/points".into()));
        }
        Grid::new(self.extents.clone(), self.points.clone(), self.boundary)
            .map_err(|e| Error::Decode(e.to_string()))
    }
}

pub fn encode_binary(field: &Field, epsilon: f64, theta: f64) -> Result<Vec<u8>> {
    let header = Header {
        dim: field.grid.dim,
        extents: field.grid.extent.clone(),
        points: field.grid.points.clone(),
        boundary: field.grid.boundary,
        time: field.time,
        epsilon,
        theta,
        format_version: FORMAT_VERSION,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = Vec::with_capacity(8 + json.len() + 8 * field.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<(Header, Field)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Decode("missing LKSF magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    if hlen > MAX_HEADER || 8 + hlen > bytes.len() {
        return Err(Error::Decode(format!("header length {hlen} out of range")));
    }
    let header: Header = serde_json::from_slice(&bytes[8..8 + hlen])
        .map_err(|e| Error::Decode(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Decode(format!(
            "unsupported format-version {}",
            header.format_version
        )));
    }
    let grid = header.grid()?;
    let body = &bytes[8 + hlen..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Decode(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let field = Field::new(grid, header.time, values).map_err(|e| Error::Decode(e.to_string()))?;
    Ok((header, field))
}

pub fn write_binary<W: Write>(w: &mut W, field: &Field, epsilon: f64, theta: f64) -> Result<()> {
    w.write_all(&encode_binary(field, epsilon, theta)?)?;
    Ok(())
}

pub fn read_binary<R: Read>(r: &mut R) -> Result<(Header, Field)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

fn axis_names(dim: usize) -> Vec<String> {
    (0..dim).map(|a| format!("x{a}")).collect()
}

/// Header `x0,..,x{d-1},value`, one row per cell in storage order.
pub fn write_csv<W: Write>(w: W, field: &Field) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut head = axis_names(field.grid.dim);
    head.push("value".into());
    wtr.write_record(&head).map_err(csv_err)?;
    for (i, v) in field.values.iter().enumerate() {
        let mut row: Vec<String> = field.grid.coords(i).iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a CSV snapshot written for `grid`; coordinates must match the
/// lattice to within `1e-9` of the spacing.
pub fn read_csv<R: Read>(r: R, grid: &Grid, time: f64) -> Result<Field> {
    let mut rdr = csv::Reader::from_reader(r);
    let head = rdr.headers().map_err(csv_err)?.clone();
    let mut want = axis_names(grid.dim);
    want.push("value".into());
    if head.iter().ne(want.iter().map(String::as_str)) {
        return Err(Error::Decode(format!("unexpected CSV header {head:?}")));
    }
    let h = grid.spacing();
    let mut values = Vec::with_capacity(grid.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if i >= grid.len() {
            return Err(Error::Decode("more rows than grid cells".into()));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Decode(format!("row {}: {e}", i + 1)))?;
        if nums.len() != grid.dim + 1 {
            return Err(Error::Decode(format!("row {} has {} columns", i + 1, nums.len())));
        }
        let c = grid.coords(i);
        for a in 0..grid.dim {
            if !((nums[a] - c[a]).abs() <= 1e-9 * h[a]) {
                return Err(Error::Decode(format!(
                    "row {} coordinate {} does not match the grid",
                    i + 1,
                    nums[a]
                )));
            }
        }
        values.push(nums[grid.dim]);
    }
    if values.len() != grid.len() {
        return Err(Error::Decode(format!(
            "expected {} rows, found {}",
            grid.len(),
            values.len()
        )));
    }
    Field::new(grid.clone(), time, values).map_err(|e| Error::Decode(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Decode(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Field {
        let g = Grid::periodic(&[1.0, 2.0], &[4, 8]).unwrap();
        let mut f = Field::from_fn(&g, |x| x[0] * 3.0 - x[1].sin());
        f.time = 0.25;
        f
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let bytes = encode_binary(&f, 1.0, -0.5).unwrap();
        let (h, g) = decode_binary(&bytes).unwrap();
        assert_eq!(g, f);
        assert_eq!(h.theta, -0.5);
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let json = String::from_utf8_lossy(&bytes[8..8 + hlen]);
        assert!(json.contains("\"format-version\":1"));
    }

    #[test]
    fn binary_rejects_corruption() {
        let bytes = encode_binary(&sample(), 1.0, 1.0).unwrap();
        assert!(decode_binary(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_binary(b"LKS").is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_binary(&bad).is_err());
        let mut huge = bytes;
        huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_binary(&huge).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, &f).unwrap();
        let g = read_csv(buf.as_slice(), &f.grid, f.time).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn csv_rejects_wrong_coordinates() {
        let text = "x0,value\n0,1\n0.5,2\n0.5,3\n0.75,4\n";
        let g = Grid::cube(1, 1.0, 4).unwrap();
        assert!(read_csv(text.as_bytes(), &g, 0.0).is_err());
        let ok = "x0,value\n0,1\n0.25,2\n0.5,3\n0.75,4\n";
        assert!(read_csv(ok.as_bytes(), &g, 0.0).is_ok());
    }
}
