//! 3-D stack of A-scans and its flat binary file format.
//!
//! Layout on disk, all little-endian regardless of host:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ORPA"
//! 4       2     version (u16, = 1)
//! 6       4     nx (u32)
//! 10      4     ny (u32)
//! 14      4     nt (u32)
//! 18      8     sampling rate in Hz (f64)
//! 26      8     lateral pitch in metres (f64)
//! 34      1     dtype code (u8, 0 = 32-bit float little-endian)
//! 35      ...   nx*ny*nt samples, x fastest, then y, time contiguous
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::transforms::AScan;

pub const MAGIC: &[u8; 4] = b"ORPA";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F32_LE: u8 = 0;

const HEADER_LEN: usize = 35;

/// A raster-scanned stack of A-scans sharing one time base.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    nx: usize,
    ny: usize,
    nt: usize,
    sampling_rate: f64,
    pitch: f64,
    samples: Vec<f32>,
}

impl Volume {
    /// All-zero volume of the given geometry.
    pub fn new(nx: usize, ny: usize, nt: usize, sampling_rate: f64, pitch: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nt == 0 {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be nonzero, got {nx}x{ny}x{nt}"
            )));
        }
        if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {sampling_rate}"
            )));
        }
        Ok(Self { nx, ny, nt, sampling_rate, pitch, samples: vec![0.0; nx * ny * nt] })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nt)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.nx + x) * self.nt
    }

    pub fn a_scan(&self, x: usize, y: usize) -> &[f32] {
        let o = self.offset(x, y);
        &self.samples[o..o + self.nt]
    }

    /// Copies one trace in as f32.
    pub fn set_a_scan(&mut self, x: usize, y: usize, trace: &[f64]) {
        assert_eq!(trace.len(), self.nt, "trace length must equal nt");
        let o = self.offset(x, y);
        for (dst, &v) in self.samples[o..o + self.nt].iter_mut().zip(trace) {
            *dst = v as f32;
        }
    }

    /// Widens one stored trace to an f64 A-scan for processing.
    pub fn to_ascan(&self, x: usize, y: usize) -> Result<AScan> {
        AScan::new(self.a_scan(x, y).iter().map(|&v| v as f64).collect(), self.sampling_rate)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.nx as u32).to_le_bytes())?;
        w.write_all(&(self.ny as u32).to_le_bytes())?;
        w.write_all(&(self.nt as u32).to_le_bytes())?;
        w.write_all(&self.sampling_rate.to_le_bytes())?;
        w.write_all(&self.pitch.to_le_bytes())?;
        w.write_all(&[DTYPE_F32_LE])?;
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header).map_err(|_| Error::Format("truncated volume header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format("bad magic; not a volume file".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported volume format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let nx = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let ny = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
        let nt = u32::from_le_bytes(header[14..18].try_into().unwrap()) as usize;
        let sampling_rate = f64::from_le_bytes(header[18..26].try_into().unwrap());
        let pitch = f64::from_le_bytes(header[26..34].try_into().unwrap());
        let dtype = header[34];
        if dtype != DTYPE_F32_LE {
            return Err(Error::Format(format!("unsupported dtype code {dtype}")));
        }
        let mut volume = Volume::new(nx, ny, nt, sampling_rate, pitch)?;
        let count = nx * ny * nt;
        let mut payload = vec![0u8; count * 4];
        r.read_exact(&mut payload).map_err(|_| {
            Error::Format(format!("truncated payload; expected {} bytes", count * 4))
        })?;
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            volume.samples[i] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(volume)
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
