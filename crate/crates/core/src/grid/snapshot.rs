//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "YEESNAP1"
//! version  u32
//! nx ny nz u64 × 3
//! dx dy dz dt time  f64 × 5
//! count    u32
//! count × { name_len u16, name bytes, dims u64 × 3 }
//! data     f64, arrays concatenated in manifest order, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::GridSpec;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"YEESNAP1";
const VERSION: u32 = 1;

/// A decoded snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub cells: [usize; 3],
    pub spacing: [f64; 3],
    pub dt: f64,
    pub time: f64,
    pub arrays: Vec<(String, Array3<f64>)>,
}

impl Snapshot {
    pub fn get(&self, name: &str) -> Option<&Array3<f64>> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }
}

pub fn write_snapshot(path: &Path, g: &GridSpec, time: f64, arrays: &[(&str, &Array3<f64>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for n in g.cells() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in [g.dx, g.dy, g.dz, g.dt, time] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, a) in arrays {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| Error::param("snapshot", "array name too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(bytes)?;
        for d in a.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
    }
    for (_, a) in arrays {
        for v in a.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, reason.into()))
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    if &take::<8>(&mut r)? != MAGIC {
        return Err(bad("not a field snapshot"));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let mut cells = [0usize; 3];
    for c in &mut cells {
        *c = u64::from_le_bytes(take(&mut r)?) as usize;
    }
    let mut reals = [0.0; 5];
    for v in &mut reals {
        *v = f64::from_le_bytes(take(&mut r)?);
    }
    let count = u32::from_le_bytes(take(&mut r)?) as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u16::from_le_bytes(take(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("array name is not UTF-8"))?;
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u64::from_le_bytes(take(&mut r)?) as usize;
        }
        manifest.push((name, dims));
    }
    let mut arrays = Vec::with_capacity(count);
    for (name, dims) in manifest {
        let n = dims.iter().product::<usize>();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(take(&mut r)?));
        }
        let a = Array3::from_shape_vec((dims[0], dims[1], dims[2]), data).map_err(|e| bad(e.to_string()))?;
        arrays.push((name, a));
    }
    Ok(Snapshot {
        cells,
        spacing: [reals[0], reals[1], reals[2]],
        dt: reals[3],
        time: reals[4],
        arrays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Component;

    #[test]
    fn round_trip_preserves_everything() {
        let g = GridSpec::new([3, 4, 2], [1.0, 2.0, 0.5], 0.5).unwrap();
        let ez = Array3::from_shape_fn(Component::Ez.shape(&g), |(i, j, k)| {
            (i * 100 + j * 10 + k) as f64 * 0.1 - 3.0
        });
        let hx = Array3::from_elem(Component::Hx.shape(&g), f64::MIN_POSITIVE);
        let dir = std::env::temp_dir().join(format!("ferrocavity-snap-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.bin");
        write_snapshot(&path, &g, 1.25e-7, &[("Ez", &ez), ("Hx", &hx)]).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.cells, [3, 4, 2]);
        assert_eq!(s.spacing, g.spacing());
        assert_eq!((s.dt, s.time), (g.dt, 1.25e-7));
        assert_eq!(s.get("Ez"), Some(&ez));
        assert_eq!(s.get("Hx"), Some(&hx));
        std::fs::write(&path, b"garbage!").unwrap();
        assert!(read_snapshot(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
