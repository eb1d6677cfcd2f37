//! Grid solution file format.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PINNGRID"
//! 8       4     format version (u32) = 1
//! 12      4     problem-name length L (u32)
//! 16      L     problem name (UTF-8)
//! ..      1     provenance tag: 0 = analytic, 1 = spectral
//! [spectral only]
//! ..      8     n_modes (u64)
//! ..      8     dt (f64)
//! [always]
//! ..      8     n_times (u64)
//! ..      8     n_xs (u64)
//! ..      8·n_times   times (f64)
//! ..      8·n_xs      xs (f64)
//! ..      8·n_times·n_xs  values, row-major, time-major (f64)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{GridSolution, Provenance};

const MAGIC: &[u8; 8] = b"PINNGRID";
const VERSION: u32 = 1;

pub fn write_grid(path: &Path, sol: &GridSolution) -> Result<()> {
    sol.assert_valid()?;
    let mut buf: Vec<u8> = Vec::with_capacity(64 + 8 * sol.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let name = sol.problem.as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    match &sol.provenance {
        Provenance::Analytic => buf.push(0),
        Provenance::Spectral { n_modes, dt } => {
            buf.push(1);
            buf.extend_from_slice(&(*n_modes as u64).to_le_bytes());
            buf.extend_from_slice(&dt.to_le_bytes());
        }
    }
    buf.extend_from_slice(&(sol.times.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(sol.xs.len() as u64).to_le_bytes());
    for v in sol.times.iter().chain(&sol.xs).chain(&sol.values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::FileFormat("unexpected end of grid file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn read_grid(path: &Path) -> Result<GridSolution> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::FileFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::FileFormat(format!(
            "unsupported grid file version {version}"
        )));
    }
    let name_len = r.u32()? as usize;
    let problem = String::from_utf8(r.take(name_len)?.to_vec())
        .map_err(|_| Error::FileFormat("problem name is not UTF-8".into()))?;
    let provenance = match r.take(1)?[0] {
        0 => Provenance::Analytic,
        1 => {
            let n_modes = r.u64()? as usize;
            let dt = r.f64()?;
            Provenance::Spectral { n_modes, dt }
        }
        t => return Err(Error::FileFormat(format!("unknown provenance tag {t}"))),
    };
    let n_times = r.u64()? as usize;
    let n_xs = r.u64()? as usize;
    let times = r.f64_vec(n_times)?;
    let xs = r.f64_vec(n_xs)?;
    let values = r.f64_vec(n_times * n_xs)?;
    let sol = GridSolution {
        problem,
        times,
        xs,
        values,
        provenance,
    };
    sol.assert_valid()?;
    Ok(sol)
}
