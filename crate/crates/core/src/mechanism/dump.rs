//! Columnar binary dump of pipeline inputs and outputs.
//!
//! Layout (little-endian): magic `LTMP`, version `u16`, kind `u8`, `n u64`,
//! `d u32`, `s u32`, `m u32`, then the matrix as `f64` values column by column.
//! The kind fixes the matrix shape: inputs are `n×d`, messages `n×(d·s)`,
//! outputs `m×d`.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LTMP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 8 + 4 + 4 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DumpKind {
    Input = 0,
    Messages = 1,
    Output = 2,
}

impl DumpKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(DumpKind::Input),
            1 => Ok(DumpKind::Messages),
            2 => Ok(DumpKind::Output),
            _ => Err(Error::Wire(format!("unknown dump kind {b}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub n: u64,
    pub d: u32,
    pub s: u32,
    pub m: u32,
}

impl DumpHeader {
    pub fn shape(&self) -> (usize, usize) {
        match self.kind {
            DumpKind::Input => (self.n as usize, self.d as usize),
            DumpKind::Messages => (self.n as usize, self.d as usize * self.s as usize),
            DumpKind::Output => (self.m as usize, self.d as usize),
        }
    }
}

pub fn write_dump<W: Write>(mut w: W, header: &DumpHeader, matrix: &DMatrix<f64>) -> Result<()> {
    if header.shape() != matrix.shape() {
        return Err(Error::shape(format!(
            "{:?} dump expects {:?}, got {:?}",
            header.kind,
            header.shape(),
            matrix.shape()
        )));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * matrix.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(header.kind as u8);
    buf.extend_from_slice(&header.n.to_le_bytes());
    buf.extend_from_slice(&header.d.to_le_bytes());
    buf.extend_from_slice(&header.s.to_le_bytes());
    buf.extend_from_slice(&header.m.to_le_bytes());
    // nalgebra storage is column-major already.
    for v in matrix.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<(DumpHeader, DMatrix<f64>)> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| Error::Wire(format!("truncated header: {e}")))?;
    if head[0..4] != MAGIC {
        return Err(Error::Wire("bad magic".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != VERSION {
        return Err(Error::Wire(format!("unsupported version {version}")));
    }
    let header = DumpHeader {
        kind: DumpKind::from_byte(head[6])?,
        n: u64::from_le_bytes(head[7..15].try_into().unwrap()),
        d: u32::from_le_bytes(head[15..19].try_into().unwrap()),
        s: u32::from_le_bytes(head[19..23].try_into().unwrap()),
        m: u32::from_le_bytes(head[23..27].try_into().unwrap()),
    };
    let (rows, cols) = header.shape();
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != rows * cols * 8 {
        return Err(Error::Wire(format!("body has {} bytes, expected {}", body.len(), rows * cols * 8)));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok((header, DMatrix::from_iterator(rows, cols, values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let header = DumpHeader { kind: DumpKind::Output, n: 10, d: 2, s: 1, m: 3 };
        let mat = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut buf = Vec::new();
        write_dump(&mut buf, &header, &mat).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 48);
        assert_eq!(&buf[..4], b"LTMP");
        // Column-major: the second stored value is entry (1, 0) = 3.
        assert_eq!(f64::from_le_bytes(buf[HEADER_LEN + 8..HEADER_LEN + 16].try_into().unwrap()), 3.0);
        let (h, back) = read_dump(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, mat);
    }

    #[test]
    fn rejects_bad_input() {
        let header = DumpHeader { kind: DumpKind::Input, n: 2, d: 1, s: 1, m: 1 };
        assert!(write_dump(Vec::new(), &header, &DMatrix::zeros(3, 1)).is_err());
        let mut buf = Vec::new();
        write_dump(&mut buf, &header, &DMatrix::zeros(2, 1)).unwrap();
        assert!(matches!(read_dump(&buf[..buf.len() - 1]), Err(Error::Wire(_))));
        buf[0] = b'X';
        assert!(matches!(read_dump(&buf[..]), Err(Error::Wire(_))));
    }
}
