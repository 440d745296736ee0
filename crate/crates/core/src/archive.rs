//! Bit-exact binary interchange for attention records.
//!
//! One file carries one (seed, step, layer) record: a fixed 32-byte
//! little-endian header followed by the row-major `total_tokens^2` f32
//! payload, nothing else. Records are validated on write and on read, so a
//! file that loads is row-stochastic and its stored grid is self-consistent.

use crate::attention::{validate_record, AttentionError, AttentionRecord, Violation};
use crate::grid::{GridError, GridSpec, TokenGrid};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"S2MA";
pub const ARCHIVE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("header is shorter than {HEADER_LEN} bytes")]
    TruncatedHeader,
    #[error("payload size mismatch: expected {expected} bytes after the header")]
    SizeMismatch { expected: usize },
    #[error("header field {field} is {stored} but the grid derives {derived}")]
    GridFieldMismatch {
        field: &'static str,
        stored: u16,
        derived: usize,
    },
    #[error("{field} = {value} does not fit the header's u16")]
    FieldOverflow { field: &'static str, value: usize },
    #[error("payload has {} violations, first: {}", .0.len(), .0[0])]
    PayloadViolations(Vec<Violation>),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

fn u16_field(field: &'static str, value: usize) -> Result<u16, ArchiveError> {
    u16::try_from(value).map_err(|_| ArchiveError::FieldOverflow { field, value })
}

/// Canonical archive file name for one record.
pub fn archive_file_name(seed_id: u32, step_index: u16, layer_index: u16) -> String {
    format!("seed{seed_id:04}_step{step_index:03}_layer{layer_index:03}.s2ma")
}

fn encode_header(record: &AttentionRecord) -> Result<[u8; HEADER_LEN], ArchiveError> {
    let grid = record.grid();
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&ARCHIVE_MAGIC);
    h[4..6].copy_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    h[6..10].copy_from_slice(&record.seed_id().to_le_bytes());
    h[10..12].copy_from_slice(&record.step_index().to_le_bytes());
    h[12..14].copy_from_slice(&record.layer_index().to_le_bytes());
    let fields: [(&'static str, usize, usize); 9] = [
        ("frames_latent", grid.frames_latent(), 14),
        ("height_tokens", grid.height_tokens(), 16),
        ("width_tokens", grid.width_tokens(), 18),
        ("patch_t", grid.patch_t(), 20),
        ("patch_h", grid.patch_h(), 22),
        ("patch_w", grid.patch_w(), 24),
        ("frame_height", grid.frame_height(), 26),
        ("frame_width", grid.frame_width(), 28),
        ("frame_count", grid.frame_count(), 30),
    ];
    for (name, value, offset) in fields {
        h[offset..offset + 2].copy_from_slice(&u16_field(name, value)?.to_le_bytes());
    }
    Ok(h)
}

/// Writes one validated record in the interchange format.
pub fn write_record<W: Write>(writer: &mut W, record: &AttentionRecord) -> Result<(), ArchiveError> {
    let violations = validate_record(record);
    if !violations.is_empty() {
        return Err(ArchiveError::PayloadViolations(violations));
    }
    writer.write_all(&encode_header(record)?)?;
    let mut payload = Vec::with_capacity(record.matrix().len() * 4);
    for &v in record.matrix() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&payload)?;
    Ok(())
}

/// Reads and validates one record; the reader must end exactly at the
/// payload boundary.
pub fn read_record<R: Read>(reader: &mut R) -> Result<AttentionRecord, ArchiveError> {
    let mut header = [0u8; HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => ArchiveError::TruncatedHeader,
            _ => ArchiveError::Io(e),
        })?;
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&header[0..4]);
    if magic != ARCHIVE_MAGIC {
        return Err(ArchiveError::BadMagic(magic));
    }
    let le16 = |o: usize| u16::from_le_bytes([header[o], header[o + 1]]);
    let version = le16(4);
    if version != ARCHIVE_VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let seed_id = u32::from_le_bytes([header[6], header[7], header[8], header[9]]);
    let step_index = le16(10);
    let layer_index = le16(12);
    let grid = TokenGrid::new(GridSpec {
        frame_height: le16(26) as usize,
        frame_width: le16(28) as usize,
        frame_count: le16(30) as usize,
        patch_t: le16(20) as usize,
        patch_h: le16(22) as usize,
        patch_w: le16(24) as usize,
    })?;
    let derived: [(&'static str, u16, usize); 3] = [
        ("frames_latent", le16(14), grid.frames_latent()),
        ("height_tokens", le16(16), grid.height_tokens()),
        ("width_tokens", le16(18), grid.width_tokens()),
    ];
    for (field, stored, derived) in derived {
        if stored as usize != derived {
            return Err(ArchiveError::GridFieldMismatch {
                field,
                stored,
                derived,
            });
        }
    }

    let n = grid.total_tokens();
    let expected = n * n * 4;
    let mut payload = vec![0u8; expected];
    reader
        .read_exact(&mut payload)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => ArchiveError::SizeMismatch { expected },
            _ => ArchiveError::Io(e),
        })?;
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(ArchiveError::SizeMismatch { expected });
    }
    let matrix: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let record = AttentionRecord::new(seed_id, step_index, layer_index, grid, matrix)?;
    let violations = validate_record(&record);
    if !violations.is_empty() {
        return Err(ArchiveError::PayloadViolations(violations));
    }
    Ok(record)
}

pub fn write_record_file(path: &Path, record: &AttentionRecord) -> Result<(), ArchiveError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_record(&mut writer, record)?;
    writer.flush()?;
    Ok(())
}

pub fn read_record_file(path: &Path) -> Result<AttentionRecord, ArchiveError> {
    read_record(&mut BufReader::new(File::open(path)?))
}

/// One archive file in a directory manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed_id: u32,
    pub step_index: u16,
    pub layer_index: u16,
    pub file: String,
}

/// Directory listing of an archive set, with the planted outlier flagged
/// when the set is a synthetic population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_seed_id: Option<u32>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_manifest(dir: &Path, manifest: &ArchiveManifest) -> Result<PathBuf, ArchiveError> {
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<ArchiveManifest, ArchiveError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}
