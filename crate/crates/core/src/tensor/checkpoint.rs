//! `BRGP` parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"BRGP"  u32 tensor_count
//! repeated: u16 name_len, name (UTF-8), u32 rows, u32 cols, rows*cols f32
//! ```
//!
//! Values are stored as `f32`, so a save/load round trip rounds each
//! parameter to single precision.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::Matrix;

pub const MAGIC: &[u8; 4] = b"BRGP";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a BRGP checkpoint (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("tensor name `{0}` longer than 65535 bytes")]
    NameTooLong(String),
    #[error("tensor `{0}` has more than u32::MAX rows or columns")]
    TooLarge(String),
    #[error("tensor `{name}` contains a non-finite value")]
    NonFinite { name: String },
    #[error("trailing bytes after last tensor")]
    TrailingBytes,
    #[error(transparent)]
    Io(io::Error),
}

fn truncated(what: &'static str) -> impl Fn(io::Error) -> CheckpointError {
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CheckpointError::Truncated(what)
        } else {
            CheckpointError::Io(e)
        }
    }
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    tensors: &[(String, Matrix)],
) -> Result<(), CheckpointError> {
    w.write_all(MAGIC).map_err(CheckpointError::Io)?;
    w.write_u32::<LittleEndian>(tensors.len() as u32)
        .map_err(CheckpointError::Io)?;
    for (name, m) in tensors {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| CheckpointError::NameTooLong(name.clone()))?;
        let rows = u32::try_from(m.rows()).map_err(|_| CheckpointError::TooLarge(name.clone()))?;
        let cols = u32::try_from(m.cols()).map_err(|_| CheckpointError::TooLarge(name.clone()))?;
        w.write_u16::<LittleEndian>(len).map_err(CheckpointError::Io)?;
        w.write_all(bytes).map_err(CheckpointError::Io)?;
        w.write_u32::<LittleEndian>(rows).map_err(CheckpointError::Io)?;
        w.write_u32::<LittleEndian>(cols).map_err(CheckpointError::Io)?;
        for &v in m.as_slice() {
            w.write_f32::<LittleEndian>(v as f32)
                .map_err(CheckpointError::Io)?;
        }
    }
    w.flush().map_err(CheckpointError::Io)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<(String, Matrix)>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated("magic"))?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let count = r.read_u32::<LittleEndian>().map_err(truncated("tensor count"))?;
    let mut out = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let len = r.read_u16::<LittleEndian>().map_err(truncated("name length"))?;
        let mut name = vec![0u8; len as usize];
        r.read_exact(&mut name).map_err(truncated("name"))?;
        let name = String::from_utf8(name).map_err(|_| CheckpointError::BadName)?;
        let rows = r.read_u32::<LittleEndian>().map_err(truncated("rows"))? as usize;
        let cols = r.read_u32::<LittleEndian>().map_err(truncated("cols"))? as usize;
        let mut buf = vec![0f32; rows * cols];
        r.read_f32_into::<LittleEndian>(&mut buf)
            .map_err(truncated("payload"))?;
        let data: Vec<f64> = buf.into_iter().map(f64::from).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite { name });
        }
        let m = Matrix::from_vec(rows, cols, data).expect("length matches by construction");
        out.push((name, m));
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(out),
        Ok(_) => Err(CheckpointError::TrailingBytes),
        Err(e) => Err(CheckpointError::Io(e)),
    }
}
