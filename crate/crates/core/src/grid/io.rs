//! Versioned little-endian grid file.
//!
//! ```text
//! magic     8 bytes  "SEPGRID\0"
//! version   u32      1
//! manifold  u8       0 circle, 1 flat torus, 2 sphere
//! dim       u8
//! reserved  u16      0
//! n         u64
//! seed      u64
//! epsilon   f64
//! points    n × 3 f64
//! n_edges   u64
//! edges     n_edges × (i u32, j u32, weight f64), i < j, sorted
//! ```

use std::io::{Read, Write};

use super::{Edge, Grid};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point};

pub const GRID_MAGIC: &[u8; 8] = b"SEPGRID\0";
pub const GRID_VERSION: u32 = 1;

pub fn write_grid<W: Write>(grid: &Grid, mut w: W) -> Result<()> {
    let m = grid.manifold();
    w.write_all(GRID_MAGIC)?;
    w.write_all(&GRID_VERSION.to_le_bytes())?;
    w.write_all(&[m.tag(), m.dim() as u8])?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.seed().to_le_bytes())?;
    w.write_all(&grid.epsilon().to_le_bytes())?;
    for p in grid.points() {
        for c in p.coords {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.write_all(&(grid.edges().len() as u64).to_le_bytes())?;
    for e in grid.edges() {
        w.write_all(&e.i.to_le_bytes())?;
        w.write_all(&e.j.to_le_bytes())?;
        w.write_all(&e.weight.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn take<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

pub fn read_grid<R: Read>(mut r: R) -> Result<Grid> {
    let magic: [u8; 8] = take(&mut r)?;
    if &magic != GRID_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tag, dim] = take(&mut r)?;
    let _reserved: [u8; 2] = take(&mut r)?;
    let manifold = ManifoldModel::from_tag(tag, dim)?;
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let seed = u64::from_le_bytes(take(&mut r)?);
    let epsilon = f64::from_le_bytes(take(&mut r)?);
    let mut points = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let mut coords = [0.0; 3];
        for c in coords.iter_mut() {
            *c = f64::from_le_bytes(take(&mut r)?);
        }
        points.push(Point { coords });
    }
    let ne = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut edges = Vec::with_capacity(ne.min(1 << 26));
    for _ in 0..ne {
        let i = u32::from_le_bytes(take(&mut r)?);
        let j = u32::from_le_bytes(take(&mut r)?);
        let weight = f64::from_le_bytes(take(&mut r)?);
        edges.push(Edge { i, j, weight });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after edge list".into()));
    }
    Grid::from_parts(manifold, points, edges, epsilon, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Bandwidth};

    #[test]
    fn round_trip_is_byte_identical() {
        for m in [
            ManifoldModel::circle(),
            ManifoldModel::flat_torus(2).unwrap(),
            ManifoldModel::sphere2(),
        ] {
            let g = build_grid(&m, 150, Bandwidth::Auto, 77).unwrap();
            let mut buf = Vec::new();
            write_grid(&g, &mut buf).unwrap();
            let h = read_grid(buf.as_slice()).unwrap();
            assert_eq!(h.manifold(), g.manifold());
            assert_eq!(h.points(), g.points());
            assert_eq!(h.edges(), g.edges());
            assert_eq!(h.seed(), 77);
            let mut buf2 = Vec::new();
            write_grid(&h, &mut buf2).unwrap();
            assert_eq!(buf, buf2);
        }
    }

    #[test]
    fn header_layout() {
        let g = build_grid(&ManifoldModel::flat_torus(2).unwrap(), 10, Bandwidth::Auto, 5).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        assert_eq!(&buf[..8], GRID_MAGIC);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(buf[12], 1);
        assert_eq!(buf[13], 2);
        assert_eq!(&buf[16..24], &10u64.to_le_bytes());
        assert_eq!(buf.len(), 40 + 10 * 24 + 8 + g.edges().len() * 16);
    }

    #[test]
    fn corrupt_input_rejected() {
        let g = build_grid(&ManifoldModel::circle(), 10, Bandwidth::Auto, 5).unwrap();
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        assert!(read_grid(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_grid(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_grid(bad.as_slice()).is_err());
        let mut long = buf;
        long.push(0);
        assert!(read_grid(long.as_slice()).is_err());
    }
}
