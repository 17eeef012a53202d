//! `PGDMFLD1` array files: 8-byte magic, `u32` LE rank, `rank` `u32` LE
//! dims, then the row-major `f64` LE payload.

use std::fs;
use std::path::Path;

use super::{Field, GridSpec};
use crate::error::{PgdmError, Result};

pub const FIELD_MAGIC: &[u8; 8] = b"PGDMFLD1";

pub fn write_array(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != values.len() {
        return Err(PgdmError::invalid(format!(
            "dims {dims:?} describe {expected} values, got {}",
            values.len()
        )));
    }
    let mut buf = Vec::with_capacity(12 + 4 * dims.len() + 8 * values.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| PgdmError::invalid("dimension exceeds u32"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| PgdmError::io(path, e))
}

pub fn read_array(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| PgdmError::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != FIELD_MAGIC {
        return Err(PgdmError::format(path, "missing PGDMFLD1 magic"));
    }
    let rank = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header = 12 + 4 * rank;
    if bytes.len() < header {
        return Err(PgdmError::format(path, "truncated dimension table"));
    }
    let dims: Vec<usize> = bytes[12..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != 8 * count {
        return Err(PgdmError::format(
            path,
            format!(
                "payload holds {} bytes, dims {dims:?} need {}",
                payload.len(),
                8 * count
            ),
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, values))
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    write_array(path, &field.grid().shape(), field.values())
}

/// Reads a field and checks its dims against `grid`.
pub fn read_field(path: &Path, grid: &GridSpec) -> Result<Field> {
    let (dims, values) = read_array(path)?;
    if dims != grid.shape() {
        return Err(PgdmError::format(
            path,
            format!("dims {dims:?} do not match grid shape {:?}", grid.shape()),
        ));
    }
    Field::from_vec(*grid, values).map_err(|e| PgdmError::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Boundary;

    #[test]
    fn layout_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.fld");
        write_array(&path, &[2, 1], &[1.5, -2.0]).unwrap();
        let bytes = fs::read(&path).unwrap();
        let mut expected = b"PGDMFLD1".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.5f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn field_round_trip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.fld");
        let g = GridSpec::new(2, 8, Boundary::DirichletZero).unwrap();
        let u = Field::from_fn(g, |x| x[0] - x[1] * 0.25);
        write_field(&path, &u).unwrap();
        assert_eq!(read_field(&path, &g).unwrap(), u);
        let other = g.with_cells(16).unwrap();
        assert!(matches!(read_field(&path, &other), Err(PgdmError::Format { .. })));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.fld");
        write_array(&path, &[3], &[1.0, 2.0, 3.0]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_array(&path), Err(PgdmError::Format { .. })));
        fs::write(&path, b"NOTAFILE").unwrap();
        assert!(read_array(&path).is_err());
    }
}
