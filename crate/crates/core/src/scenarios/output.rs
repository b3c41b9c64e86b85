//! Run outputs: diagnostic rows, potential snapshots and their file formats.
//!
//! # Snapshot container
//!
//! Little-endian throughout:
//!
//! ```text
//! magic     8 bytes  "FSPIFSNP"
//! version   u32      1
//! dtype     u32      1 = f64
//! rank      u32      2
//! dims      u64 x rank   rows (x), columns (y)
//! step      u64
//! time      f64
//! modes     u32      N_m of the solve (grid size for PIC)
//! alpha     u32      extension factor of the mode grid (0 for PIC)
//! origin    f64      coordinate of sample 0 on both axes
//! spacing   f64
//! payload   rows*cols f64, row-major, x slow
//! ```

use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const SNAPSHOT_MAGIC: &[u8; 8] = b"FSPIFSNP";
const SNAPSHOT_VERSION: u32 = 1;
const DTYPE_F64: u32 = 1;

/// One diagnostic row. Energies are totals over the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub step: usize,
    pub time: f64,
    pub kinetic: f64,
    pub electric: f64,
    pub harmonic: f64,
    pub total: f64,
    /// `|sum m V|`.
    pub momentum: f64,
    /// Deposited charge over `q N_p`, minus one.
    pub charge_residual: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// Central second moments.
    pub moment_xx: f64,
    pub moment_yy: f64,
    pub moment_xy: f64,
    /// Ratio of the principal second moments, at least one.
    pub anisotropy: f64,
    pub frozen: usize,
    pub support_violations: usize,
}

/// Potential sampled on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub modes: usize,
    pub alpha: usize,
    pub origin: f64,
    pub spacing: f64,
    pub size: usize,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
        w.write_u32::<LittleEndian>(DTYPE_F64)?;
        w.write_u32::<LittleEndian>(2)?;
        w.write_u64::<LittleEndian>(self.size as u64)?;
        w.write_u64::<LittleEndian>(self.size as u64)?;
        w.write_u64::<LittleEndian>(self.step as u64)?;
        w.write_f64::<LittleEndian>(self.time)?;
        w.write_u32::<LittleEndian>(self.modes as u32)?;
        w.write_u32::<LittleEndian>(self.alpha as u32)?;
        w.write_f64::<LittleEndian>(self.origin)?;
        w.write_f64::<LittleEndian>(self.spacing)?;
        for &v in &self.values {
            w.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::InvalidConfig(format!("snapshot: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        if r.read_u32::<LittleEndian>()? != SNAPSHOT_VERSION {
            return Err(bad("unsupported version"));
        }
        if r.read_u32::<LittleEndian>()? != DTYPE_F64 || r.read_u32::<LittleEndian>()? != 2 {
            return Err(bad("expected a rank-2 f64 array"));
        }
        let rows = r.read_u64::<LittleEndian>()? as usize;
        let cols = r.read_u64::<LittleEndian>()? as usize;
        if rows != cols {
            return Err(bad("expected a square grid"));
        }
        let step = r.read_u64::<LittleEndian>()? as usize;
        let time = r.read_f64::<LittleEndian>()?;
        let modes = r.read_u32::<LittleEndian>()? as usize;
        let alpha = r.read_u32::<LittleEndian>()? as usize;
        let origin = r.read_f64::<LittleEndian>()?;
        let spacing = r.read_f64::<LittleEndian>()?;
        let mut values = vec![0.0; rows * cols];
        r.read_f64_into::<LittleEndian>(&mut values)?;
        Ok(Self {
            step,
            time,
            modes,
            alpha,
            origin,
            spacing,
            size: rows,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// `x,y,phi` rows.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["x", "y", "phi"]).map_err(csv_error)?;
        for i in 0..self.size {
            let x = self.origin + i as f64 * self.spacing;
            for j in 0..self.size {
                let y = self.origin + j as f64 * self.spacing;
                let v = self.values[i * self.size + j];
                w.write_record([x.to_string(), y.to_string(), v.to_string()]).map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Write serializable rows as a headered CSV file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}
