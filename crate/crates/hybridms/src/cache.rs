//! Offline basis cache: one binary file per run holding every cell's basis
//! data, keyed by a content hash of the mesh, the diffusion coefficient, the
//! degrees and the refinement level.
//!
//! Layout (all integers little-endian u64 unless noted):
//!
//! ```text
//! magic "MHMB" | version u32 | k u32 | m u32 | r u32 | key hash [32 bytes]
//! n_cells | per-cell records
//! ```
//!
//! Matrices are written as `rows, cols` followed by the column-major f64
//! payload with exact bit patterns, so a write-read cycle is bitwise exact.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::local::LocalBasisSet;
use crate::mesh::CoarseMesh;
use crate::problem::CoeffSpec;

pub const MAGIC: &[u8; 4] = b"MHMB";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a basis cache file (bad magic)")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    BadVersion(u32),
    #[error("cache key mismatch: expected {expected}, found {found}; rerun the offline stage for this configuration")]
    HashMismatch { expected: String, found: String },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheHeader {
    pub version: u32,
    pub k: u32,
    pub m: u32,
    pub refinement: u32,
    pub hash: [u8; 32],
    pub n_cells: u64,
}

pub fn hash_hex(hash: &[u8; 32]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash identifying one offline configuration: mesh geometry and
/// topology, coefficient, degrees and refinement.
pub fn content_hash(mesh: &CoarseMesh, coeff: &CoeffSpec, k: usize, m: usize, r: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"HYBRIDMS-CACHE-KEY-V1");
    h.update((mesh.vertices.len() as u64).to_le_bytes());
    for v in &mesh.vertices {
        h.update(v.x.to_le_bytes());
        h.update(v.y.to_le_bytes());
    }
    h.update((mesh.cells.len() as u64).to_le_bytes());
    for c in &mesh.cells {
        h.update((c.vertices.len() as u64).to_le_bytes());
        for &v in &c.vertices {
            h.update((v as u64).to_le_bytes());
        }
    }
    h.update(coeff.canonical_bytes());
    h.update((k as u32).to_le_bytes());
    h.update((m as u32).to_le_bytes());
    h.update(r.to_le_bytes());
    h.finalize().into()
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    put_u64(out, m.nrows() as u64);
    put_u64(out, m.ncols() as u64);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize the cache to bytes.
pub fn encode(hash: &[u8; 32], k: usize, m: usize, r: u32, bases: &[LocalBasisSet]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&r.to_le_bytes());
    out.extend_from_slice(hash);
    put_u64(&mut out, bases.len() as u64);
    for set in bases {
        put_u64(&mut out, set.cell as u64);
        put_u64(&mut out, set.n_cell as u64);
        put_u64(&mut out, set.n_face as u64);
        put_u64(&mut out, set.faces.len() as u64);
        for &f in &set.faces {
            put_u64(&mut out, f as u64);
        }
        put_matrix(&mut out, &set.primal);
        put_matrix(&mut out, &set.div_map);
        put_matrix(&mut out, &set.raw_cell_moments);
        for rf in &set.raw_face_moments {
            put_matrix(&mut out, rf);
        }
        put_matrix(&mut out, &set.moment_matrix);
        put_matrix(&mut out, &set.dual);
        put_matrix(&mut out, &set.face_based);
        put_matrix(&mut out, &set.energy);
        put_matrix(&mut out, &set.gram_cell);
        for gf in &set.gram_faces {
            put_matrix(&mut out, gf);
        }
        put_matrix(&mut out, &set.g_kk_inv);
        out.extend_from_slice(&set.cond_moment.to_le_bytes());
        out.extend_from_slice(&set.cond_gram.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CacheError> {
        if self.pos + n > self.buf.len() {
            return Err(CacheError::Corrupt("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, CacheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CacheError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>, CacheError> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(DMatrix::from_vec(rows, cols, data))
    }
}

/// Decode a cache byte image.
pub fn decode(buf: &[u8]) -> Result<(CacheHeader, Vec<LocalBasisSet>), CacheError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CacheError::BadVersion(version));
    }
    let k = r.u32()?;
    let m = r.u32()?;
    let refinement = r.u32()?;
    let hash: [u8; 32] = r.take(32)?.try_into().unwrap();
    let n_cells = r.u64()?;
    let mut bases = Vec::with_capacity(n_cells as usize);
    for _ in 0..n_cells {
        let cell = r.u64()? as usize;
        let n_cell = r.u64()? as usize;
        let n_face = r.u64()? as usize;
        let n_faces = r.u64()? as usize;
        let mut faces = Vec::with_capacity(n_faces);
        for _ in 0..n_faces {
            faces.push(r.u64()? as usize);
        }
        let primal = r.matrix()?;
        let div_map = r.matrix()?;
        let raw_cell_moments = r.matrix()?;
        let raw_face_moments = (0..n_faces)
            .map(|_| r.matrix())
            .collect::<Result<Vec<_>, _>>()?;
        let moment_matrix = r.matrix()?;
        let dual = r.matrix()?;
        let face_based = r.matrix()?;
        let energy = r.matrix()?;
        let gram_cell = r.matrix()?;
        let gram_faces = (0..n_faces)
            .map(|_| r.matrix())
            .collect::<Result<Vec<_>, _>>()?;
        let g_kk_inv = r.matrix()?;
        let cond_moment = r.f64()?;
        let cond_gram = r.f64()?;
        bases.push(LocalBasisSet {
            cell,
            k: k as usize,
            m: m as usize,
            n_cell,
            n_face,
            faces,
            primal,
            div_map,
            raw_cell_moments,
            raw_face_moments,
            moment_matrix,
            dual,
            face_based,
            energy,
            gram_cell,
            gram_faces,
            g_kk_inv,
            cond_moment,
            cond_gram,
        });
    }
    if r.pos != buf.len() {
        return Err(CacheError::Corrupt(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    Ok((
        CacheHeader {
            version,
            k,
            m,
            refinement,
            hash,
            n_cells,
        },
        bases,
    ))
}

pub fn write_cache(
    path: impl AsRef<Path>,
    hash: &[u8; 32],
    k: usize,
    m: usize,
    r: u32,
    bases: &[LocalBasisSet],
) -> Result<(), CacheError> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(hash, k, m, r, bases))?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<(CacheHeader, Vec<LocalBasisSet>), CacheError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

/// Read and validate against the expected content hash; a mismatch is
/// refused with instructions to rerun the offline stage.
pub fn read_cache_checked(
    path: impl AsRef<Path>,
    expected: &[u8; 32],
) -> Result<(CacheHeader, Vec<LocalBasisSet>), CacheError> {
    let (header, bases) = read_cache(path)?;
    if &header.hash != expected {
        return Err(CacheError::HashMismatch {
            expected: hash_hex(expected),
            found: hash_hex(&header.hash),
        });
    }
    Ok((header, bases))
}
