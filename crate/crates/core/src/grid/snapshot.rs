//! `DBW1` binary field snapshots.
//!
//! Layout (all little-endian): magic `DBW1`, `u8` dim, `u8` reserved = 0,
//! `u16` reserved = 0, `u32` samples per axis, `f64` box length, then
//! `n^dim` `f64` samples in row-major order.

use std::io::{Read, Write};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub const MAGIC: &[u8; 4] = b"DBW1";
const HEADER_LEN: usize = 20;

pub fn write_snapshot<T: Real, W: Write>(field: &ScalarField<T>, mut w: W) -> Result<()> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.push(g.dim() as u8);
    buf.push(0);
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&to_f64(g.length()).to_le_bytes());
    for &v in field.samples() {
        buf.extend_from_slice(&to_f64(v).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a snapshot and builds its grid.
pub fn read_snapshot<T: Real, R: Read>(mut r: R) -> Result<ScalarField<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("snapshot shorter than its header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected DBW1".into()));
    }
    let dim = bytes[4] as usize;
    if bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("reserved header bytes must be zero".into()));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let length = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let grid = Grid::new(dim, n, lit::<T>(length))?;
    let expected = HEADER_LEN + 8 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let samples = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| lit::<T>(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ScalarField::new(&grid, samples)
}

/// Reads a snapshot and checks that it lives on `grid`.
pub fn read_snapshot_on<T: Real, R: Read>(grid: &Grid<T>, r: R) -> Result<ScalarField<T>> {
    let f = read_snapshot(r)?;
    grid.ensure_same(f.grid(), "snapshot grid")?;
    Ok(ScalarField::from_raw(grid, f.into_samples()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(samples in proptest::collection::vec(-1e6f64..1e6, 16), len in 0.1f64..100.0) {
            let g = Grid::<f64>::new(1, 16, len).unwrap();
            let f = ScalarField::new(&g, samples).unwrap();
            let mut buf = Vec::new();
            write_snapshot(&f, &mut buf).unwrap();
            let back: ScalarField<f64> = read_snapshot(&buf[..]).unwrap();
            prop_assert_eq!(back.grid().length().to_bits(), len.to_bits());
            for (a, b) in back.samples().iter().zip(f.samples()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn header_layout() {
        let g = Grid::<f64>::new(2, 16, 2.0).unwrap();
        let f = ScalarField::constant(&g, 1.5);
        let mut buf = Vec::new();
        write_snapshot(&f, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"DBW1");
        assert_eq!(buf[4], 2);
        assert_eq!(&buf[5..8], &[0, 0, 0]);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 2.0);
        assert_eq!(buf.len(), 20 + 8 * 256);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_snapshot::<f64, _>(&b"DBW"[..]).is_err());
        let g = Grid::<f64>::new(1, 16, 1.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&ScalarField::zeros(&g), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot::<f64, _>(&bad[..]).is_err());
        buf.pop();
        assert!(read_snapshot::<f64, _>(&buf[..]).is_err());
        let other = Grid::<f64>::new(1, 32, 1.0).unwrap();
        let mut ok = Vec::new();
        write_snapshot(&ScalarField::zeros(&g), &mut ok).unwrap();
        assert!(read_snapshot_on(&other, &ok[..]).is_err());
    }
}
