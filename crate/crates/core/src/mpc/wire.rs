//! Bit-exact share serialization.
//!
//! Header (25 bytes, little-endian): magic `LTMS`, version `u16`, `n u64`,
//! `d u32`, `s u32`, `f u8`, `server_id u16`. The body holds `n` rows of `d·s`
//! ring elements as little-endian `u64`, row-major. Output shares use the same
//! layout with `n = m` and `s = 1`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mpc::share::ShareMatrix;

pub const MAGIC: [u8; 4] = *b"LTMS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireHeader {
    pub n: u64,
    pub d: u32,
    pub s: u32,
    pub frac_bits: u8,
    pub server_id: u16,
}

impl WireHeader {
    pub fn cols(&self) -> usize {
        self.d as usize * self.s as usize
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..14].copy_from_slice(&self.n.to_le_bytes());
        b[14..18].copy_from_slice(&self.d.to_le_bytes());
        b[18..22].copy_from_slice(&self.s.to_le_bytes());
        b[22] = self.frac_bits;
        b[23..25].copy_from_slice(&self.server_id.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[0..4] != MAGIC {
            return Err(Error::Wire("bad magic".into()));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(Error::Wire(format!("unsupported version {version}")));
        }
        Ok(WireHeader {
            n: u64::from_le_bytes(b[6..14].try_into().unwrap()),
            d: u32::from_le_bytes(b[14..18].try_into().unwrap()),
            s: u32::from_le_bytes(b[18..22].try_into().unwrap()),
            frac_bits: b[22],
            server_id: u16::from_le_bytes([b[23], b[24]]),
        })
    }
}

/// Writes header and body; returns the number of body bytes.
pub fn write_shares<W: Write>(mut w: W, header: &WireHeader, shares: &ShareMatrix) -> Result<u64> {
    if shares.rows as u64 != header.n || shares.cols != header.cols() || shares.server_id != header.server_id {
        return Err(Error::shape("share matrix does not match its header"));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * shares.data.len());
    buf.extend_from_slice(&header.to_bytes());
    for v in &shares.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(8 * shares.data.len() as u64)
}

pub fn read_shares<R: Read>(mut r: R) -> Result<(WireHeader, ShareMatrix)> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| Error::Wire(format!("truncated header: {e}")))?;
    let header = WireHeader::from_bytes(&head)?;
    let (rows, cols) = (header.n as usize, header.cols());
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != rows * cols * 8 {
        return Err(Error::Wire(format!("body has {} bytes, expected {}", body.len(), rows * cols * 8)));
    }
    let data = body.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, ShareMatrix { server_id: header.server_id, rows, cols, data }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let h = WireHeader { n: 2, d: 3, s: 1, frac_bits: 16, server_id: 7 };
        let b = h.to_bytes();
        assert_eq!(&b[0..4], b"LTMS");
        assert_eq!(b[4..6], [1, 0]);
        assert_eq!(b[6..14], [2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(b[22], 16);
        assert_eq!(b[23..25], [7, 0]);
    }

    #[test]
    fn round_trip() {
        let sm = ShareMatrix { server_id: 1, rows: 2, cols: 4, data: (0..8).map(|v| u64::MAX - v).collect() };
        let h = WireHeader { n: 2, d: 2, s: 2, frac_bits: 0, server_id: 1 };
        let mut buf = Vec::new();
        assert_eq!(write_shares(&mut buf, &h, &sm).unwrap(), 64);
        assert_eq!(buf.len(), HEADER_LEN + 64);
        assert_eq!(buf[HEADER_LEN..HEADER_LEN + 8], u64::MAX.to_le_bytes());
        assert_eq!(read_shares(&buf[..]).unwrap(), (h, sm));
        assert!(read_shares(&buf[..buf.len() - 3]).is_err());
    }
}
