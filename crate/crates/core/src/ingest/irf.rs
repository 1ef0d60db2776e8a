//! `IRF1` storm-centered brightness-temperature frame container.
//!
//! Little-endian, no padding:
//! magic `IRF1`, u32 width, u32 height, i64 unix seconds, f32 pixel scale (km),
//! f32 center lat, f32 center lon, u16 storm id length + UTF-8 bytes, then
//! `width * height` f32 temperatures in row-major order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{self, Timestamp};

pub const MAGIC: &[u8; 4] = b"IRF1";
pub const MIN_WIDTH: usize = 16;
pub const MAX_WIDTH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrFrame {
    pub storm_id: String,
    #[serde(with = "time::serde_iso")]
    pub timestamp: Timestamp,
    pub width: usize,
    pub height: usize,
    pub pixel_scale_km: f32,
    pub center_lat_deg: f32,
    pub center_lon_deg: f32,
    /// Kelvin, row-major.
    pub temps: Vec<f32>,
}

impl IrFrame {
    /// Builds a frame and checks the container invariants.
    pub fn new(
        storm_id: impl Into<String>,
        timestamp: Timestamp,
        width: usize,
        pixel_scale_km: f32,
        center: (f32, f32),
        temps: Vec<f32>,
    ) -> Result<Self> {
        let frame = IrFrame {
            storm_id: storm_id.into(),
            timestamp,
            width,
            height: width,
            pixel_scale_km,
            center_lat_deg: center.0,
            center_lon_deg: center.1,
            temps,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.width, self.height)?;
        if self.temps.len() != self.width * self.height {
            return Err(Error::Format(format!(
                "expected {} temperatures, found {}",
                self.width * self.height,
                self.temps.len()
            )));
        }
        if let Some((i, t)) = self
            .temps
            .iter()
            .enumerate()
            .find(|(_, t)| !t.is_finite() || **t <= 0.0 || **t > 400.0)
        {
            return Err(Error::Format(format!("temperature {t} at index {i} outside (0, 400] K")));
        }
        if self.storm_id.len() > u16::MAX as usize {
            return Err(Error::Format("storm id too long".into()));
        }
        Ok(())
    }

    pub fn temps_f64(&self) -> Vec<f64> {
        self.temps.iter().map(|&t| t as f64).collect()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width != height {
        return Err(Error::Format(format!("frame is {width}x{height}, must be square")));
    }
    if !width.is_power_of_two() || !(MIN_WIDTH..=MAX_WIDTH).contains(&width) {
        return Err(Error::Format(format!(
            "width {width} is not a power of two in [{MIN_WIDTH}, {MAX_WIDTH}]"
        )));
    }
    Ok(())
}

pub fn write_ir_frame(frame: &IrFrame) -> Result<Vec<u8>> {
    frame.validate()?;
    let id = frame.storm_id.as_bytes();
    let mut out = Vec::with_capacity(34 + id.len() + 4 * frame.temps.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    out.extend_from_slice(&frame.timestamp.timestamp().to_le_bytes());
    out.extend_from_slice(&frame.pixel_scale_km.to_le_bytes());
    out.extend_from_slice(&frame.center_lat_deg.to_le_bytes());
    out.extend_from_slice(&frame.center_lon_deg.to_le_bytes());
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    for t in &frame.temps {
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated payload while reading {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn read_ir_frame(bytes: &[u8]) -> Result<IrFrame> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", String::from_utf8_lossy(magic))));
    }
    let width = u32::from_le_bytes(c.array("width")?) as usize;
    let height = u32::from_le_bytes(c.array("height")?) as usize;
    check_dims(width, height)?;
    let timestamp = time::from_unix(i64::from_le_bytes(c.array("timestamp")?))?;
    let pixel_scale_km = f32::from_le_bytes(c.array("pixel scale")?);
    let center_lat_deg = f32::from_le_bytes(c.array("center lat")?);
    let center_lon_deg = f32::from_le_bytes(c.array("center lon")?);
    let id_len = u16::from_le_bytes(c.array("storm id length")?) as usize;
    let storm_id = std::str::from_utf8(c.take(id_len, "storm id")?)
        .map_err(|_| Error::Format("storm id is not UTF-8".into()))?
        .to_string();
    let n = width * height;
    let payload = c.take(4 * n, "temperatures")?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after payload", bytes.len() - c.pos)));
    }
    let temps = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")))
        .collect();
    let frame = IrFrame {
        storm_id,
        timestamp,
        width,
        height,
        pixel_scale_km,
        center_lat_deg,
        center_lon_deg,
        temps,
    };
    frame.validate()?;
    Ok(frame)
}
