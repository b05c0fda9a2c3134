//! `.bre` text-embedding files: `b"BRGE"`, u32 count, u32 dim, count×dim f32,
//! all little-endian, rows in dataset node order.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::IngestError;
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"BRGE";

/// One embedding row per user.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(matrix: Matrix) -> Result<Self, IngestError> {
        if matrix.cols() == 0 {
            return Err(IngestError::Embedding("embedding dim must be positive".into()));
        }
        if !matrix.is_finite() {
            return Err(IngestError::Embedding("embedding contains a non-finite value".into()));
        }
        Ok(Self { matrix })
    }

    pub fn count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

pub fn read_embeddings<R: Read>(mut r: R, expected_count: usize) -> Result<EmbeddingMatrix, IngestError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| IngestError::EmbeddingTruncated)?;
    if &magic != MAGIC {
        return Err(IngestError::EmbeddingMagic(magic));
    }
    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|_| IngestError::EmbeddingTruncated)? as usize;
    let dim = r
        .read_u32::<LittleEndian>()
        .map_err(|_| IngestError::EmbeddingTruncated)? as usize;
    if count != expected_count {
        return Err(IngestError::EmbeddingCount {
            expected: expected_count,
            found: count,
        });
    }
    let mut buf = vec![0f32; count * dim];
    r.read_f32_into::<LittleEndian>(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => IngestError::EmbeddingTruncated,
        _ => IngestError::Io { path: None, source: e },
    })?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe).map_err(|e| IngestError::Io { path: None, source: e })? != 0 {
        return Err(IngestError::Embedding("trailing bytes after payload".into()));
    }
    let m = Matrix::from_vec(count, dim, buf.into_iter().map(f64::from).collect())
        .expect("length matches header");
    EmbeddingMatrix::new(m)
}

/// Loads a `.bre` file, checking that it holds exactly `expected_count` rows.
pub fn load_embeddings(path: &Path, expected_count: usize) -> Result<EmbeddingMatrix, IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_embeddings(BufReader::new(f), expected_count).map_err(|e| e.with_path(path))
}

pub fn write_embeddings<W: Write>(mut w: W, m: &Matrix) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(m.rows() as u32)?;
    w.write_u32::<LittleEndian>(m.cols() as u32)?;
    for &v in m.as_slice() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    w.flush()
}

pub fn save_embeddings(path: &Path, m: &Matrix) -> Result<(), IngestError> {
    let f = File::create(path).map_err(|e| IngestError::io(path, e))?;
    write_embeddings(BufWriter::new(f), m).map_err(|e| IngestError::io(path, e))
}
