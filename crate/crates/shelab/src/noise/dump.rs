//! Raw little-endian dump: 64-byte header then `f32` values.

use std::io::{Read, Write};

use crate::noise::grid::SpaceTimeGrid;
use crate::noise::white::WhiteNoiseField;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SHENOISE";

/// Header: magic, version, nt, nx, ny (u32), dt, dx (f64), seed, stream (u64), 8 reserved bytes.
pub fn write_raw<W: Write>(mut w: W, grid: &SpaceTimeGrid, seed: u64, stream: u64, values: &[f64]) -> Result<()> {
    let mut h = Vec::with_capacity(64);
    h.extend_from_slice(MAGIC);
    for v in [1u32, grid.nt as u32, grid.nx as u32, grid.ny as u32] {
        h.extend_from_slice(&v.to_le_bytes());
    }
    h.extend_from_slice(&grid.dt.to_le_bytes());
    h.extend_from_slice(&grid.dx.to_le_bytes());
    h.extend_from_slice(&seed.to_le_bytes());
    h.extend_from_slice(&stream.to_le_bytes());
    h.extend_from_slice(&[0u8; 8]);
    debug_assert_eq!(h.len(), 64);
    w.write_all(&h)?;
    let mut body = Vec::with_capacity(values.len() * 4);
    for v in values {
        body.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&body)?;
    Ok(())
}

pub fn write_field<W: Write>(w: W, field: &WhiteNoiseField) -> Result<()> {
    write_raw(w, &field.grid, field.seed, field.stream, field.values())
}

/// Parsed header and values of a raw dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDump {
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub dx: f64,
    pub seed: u64,
    pub stream: u64,
    pub values: Vec<f32>,
}

pub fn read_raw<R: Read>(mut r: R) -> Result<RawDump> {
    let mut h = [0u8; 64];
    r.read_exact(&mut h)?;
    if &h[..8] != MAGIC {
        return Err(Error::domain("not a noise dump (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let (nt, nx, ny) = (u32_at(12), u32_at(16), u32_at(20));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != nt * nx * ny * 4 {
        return Err(Error::domain("noise dump length does not match header"));
    }
    Ok(RawDump {
        nt,
        nx,
        ny,
        dt: f64::from_bits(u64_at(24)),
        dx: f64::from_bits(u64_at(32)),
        seed: u64_at(40),
        stream: u64_at(48),
        values: body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white::sample_white_noise;

    #[test]
    fn roundtrip() {
        let g = SpaceTimeGrid::new(0.1, 0.5, 3, 4, 5, [0.0, 0.0], true).unwrap();
        let f = sample_white_noise(g, 9, 2).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 64 + 4 * 60);
        let d = read_raw(&buf[..]).unwrap();
        assert_eq!((d.nt, d.nx, d.ny, d.seed, d.stream), (3, 4, 5, 9, 2));
        assert_eq!(d.values[7], f.values()[7] as f32);
        assert!(read_raw(&buf[1..]).is_err());
    }
}
