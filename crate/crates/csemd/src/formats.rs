//! Binary matrix (`CSM1`) and dictionary (`CSD1`) files, and the TOML sidecar
//! that travels with a measurement file.
//!
//! All integers are little-endian `u32`, all values little-endian `f64`.
//!
//! ```text
//! CSM1  "CSM1" m n family-tag | m·n values, row-major
//! CSD1  "CSD1" n d J K_1..K_J | n·d values, column-major
//! ```

use std::path::{Path, PathBuf};

use csemd_core::dictionary::Dictionary;
use csemd_core::framing::FrameLayout;
use csemd_core::sensing::{MeasurementSet, SensingFamily, SensingMatrix};
use csemd_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file};
use crate::{Error, Result};

pub const CSM_MAGIC: &[u8; 4] = b"CSM1";
pub const CSD_MAGIC: &[u8; 4] = b"CSD1";

fn put_u32(out: &mut Vec<u8>, v: usize) -> std::result::Result<(), String> {
    let v = u32::try_from(v).map_err(|_| format!("{v} does not fit in u32"))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, count: usize) -> std::result::Result<Vec<f64>, String> {
        let len = count.checked_mul(8).ok_or("size overflow")?;
        let raw = self.take(len)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> std::result::Result<(), String> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(format!("{extra} trailing bytes")),
        }
    }
}

fn magic(c: &mut Cursor, want: &[u8; 4]) -> std::result::Result<(), String> {
    let got = c.take(4)?;
    if got != want {
        return Err(format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(got), String::from_utf8_lossy(want)));
    }
    Ok(())
}

pub fn encode_csm(matrix: &Matrix, tag: u32) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(16 + 8 * matrix.rows() * matrix.cols());
    out.extend_from_slice(CSM_MAGIC);
    put_u32(&mut out, matrix.rows())?;
    put_u32(&mut out, matrix.cols())?;
    out.extend_from_slice(&tag.to_le_bytes());
    for v in matrix.to_row_major() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_csm(bytes: &[u8]) -> std::result::Result<(Matrix, u32), String> {
    let mut c = Cursor { bytes, pos: 0 };
    magic(&mut c, CSM_MAGIC)?;
    let (m, n) = (c.u32()?, c.u32()?);
    let tag = c.u32()? as u32;
    let values = c.f64s(m.checked_mul(n).ok_or("size overflow")?)?;
    c.finish()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite value".into());
    }
    let matrix = Matrix::from_row_major(m, n, &values).map_err(|e| e.to_string())?;
    Ok((matrix, tag))
}

pub fn encode_csd(dict: &Dictionary) -> std::result::Result<Vec<u8>, String> {
    let counts = dict.level_counts();
    let mut out = Vec::with_capacity(16 + 4 * counts.len() + 8 * dict.n() * dict.d());
    out.extend_from_slice(CSD_MAGIC);
    put_u32(&mut out, dict.n())?;
    put_u32(&mut out, dict.d())?;
    put_u32(&mut out, counts.len())?;
    for k in counts {
        put_u32(&mut out, k)?;
    }
    for v in dict.atoms.as_col_major() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_csd(bytes: &[u8]) -> std::result::Result<Dictionary, String> {
    let mut c = Cursor { bytes, pos: 0 };
    magic(&mut c, CSD_MAGIC)?;
    let (n, d, levels) = (c.u32()?, c.u32()?, c.u32()?);
    let mut level_of_atom = Vec::with_capacity(d);
    for q in 0..levels {
        let k = c.u32()?;
        level_of_atom.extend(std::iter::repeat_n(q, k));
    }
    if level_of_atom.len() != d {
        return Err(format!("level counts sum to {}, header says {d} atoms", level_of_atom.len()));
    }
    let values = c.f64s(n.checked_mul(d).ok_or("size overflow")?)?;
    c.finish()?;
    let atoms = Matrix::from_col_major(n, d, values).map_err(|e| e.to_string())?;
    Dictionary::new(atoms, level_of_atom).map_err(|e| e.to_string())
}

pub fn write_matrix(path: &Path, phi: &SensingMatrix) -> Result<()> {
    let bytes = encode_csm(&phi.entries, phi.family.tag()).map_err(|r| Error::format(path, r))?;
    write_file(path, &bytes)
}

pub fn read_matrix(path: &Path, seed: u64) -> Result<SensingMatrix> {
    let (entries, tag) = decode_csm(&read_file(path)?).map_err(|r| Error::format(path, r))?;
    let family =
        SensingFamily::from_tag(tag).ok_or_else(|| Error::format(path, format!("unknown family tag {tag}")))?;
    Ok(SensingMatrix::from_entries(entries, family, seed)?)
}

pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    let bytes = encode_csd(dict).map_err(|r| Error::format(path, r))?;
    write_file(path, &bytes)
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    decode_csd(&read_file(path)?).map_err(|r| Error::format(path, r))
}

/// What the measurement block alone cannot say: how to put frames back on
/// the time line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementMeta {
    pub sample_rate: u32,
    pub source_len: usize,
    pub n: usize,
    pub hop: usize,
    pub m: usize,
    pub frames: usize,
    pub family: String,
    pub seed: u64,
}

impl MeasurementMeta {
    pub fn layout(&self) -> FrameLayout {
        FrameLayout { frame_len: self.n, hop: self.hop, sample_rate: self.sample_rate, source_len: self.source_len }
    }
}

/// `measurements.csm` → `measurements.toml`.
pub fn sidecar_path(measurements: &Path) -> PathBuf {
    measurements.with_extension("toml")
}

pub fn write_measurements(path: &Path, y: &MeasurementSet, meta: &MeasurementMeta) -> Result<()> {
    let tag = SensingFamily::from_name(&meta.family)
        .ok_or_else(|| Error::Config(format!("unknown family {}", meta.family)))?
        .tag();
    let bytes = encode_csm(&y.measurements, tag).map_err(|r| Error::format(path, r))?;
    write_file(path, &bytes)?;
    let side = sidecar_path(path);
    let text = toml::to_string(meta).map_err(|e| Error::format(&side, e.to_string()))?;
    write_file(&side, text.as_bytes())
}

pub fn read_measurements(path: &Path) -> Result<(MeasurementSet, MeasurementMeta)> {
    let (measurements, _) = decode_csm(&read_file(path)?).map_err(|r| Error::format(path, r))?;
    let side = sidecar_path(path);
    let text = String::from_utf8(read_file(&side)?).map_err(|e| Error::format(&side, e.to_string()))?;
    let meta: MeasurementMeta = toml::from_str(&text).map_err(|e| Error::format(&side, e.message()))?;
    if meta.m != measurements.rows() || meta.frames != measurements.cols() {
        return Err(Error::format(
            path,
            format!(
                "block is {}×{} but the sidecar says {}×{}",
                measurements.rows(),
                measurements.cols(),
                meta.m,
                meta.frames
            ),
        ));
    }
    Ok((MeasurementSet { measurements, source_n: meta.n }, meta))
}
