//! On-disk index format, version `frtr-index/1`.
//!
//! An index directory holds:
//!
//! ```text
//! manifest.json   format version, dim, counts, build metadata, sha-256 of each file
//! units.dat       u32 count, then per unit: u32 length + JSON record
//! postings.dat    u32 n_docs, n_docs x u32 doc_length,
//!                 u32 n_terms, per term: u16 term length + utf-8 bytes,
//!                 u32 df, df x (u32 delta-encoded ordinal, u32 tf)
//! vectors.dat     contiguous 32-bit little-endian floats, row-major by unit ordinal
//! media.dat       u32 count, then per image: u16 id length + id,
//!                 u16 media-type length + media type,
//!                 u8 caption flag (+ u16 length + caption when set),
//!                 u32 byte length + bytes
//! ```
//!
//! All integers are little-endian. Checksums are verified before parsing, so
//! a flipped byte surfaces as a corrupt-file error rather than a misparse.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HybridIndex, IndexError, IndexStats, Posting, StoredMedia};
use crate::decompose::Unit;

pub const FORMAT_VERSION: &str = "frtr-index/1";

const UNITS_FILE: &str = "units.dat";
const POSTINGS_FILE: &str = "postings.dat";
const VECTORS_FILE: &str = "vectors.dat";
const MEDIA_FILE: &str = "media.dat";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: String,
    dim: usize,
    stats: IndexStats,
    #[serde(default)]
    meta: serde_json::Value,
    checksums: std::collections::BTreeMap<String, String>,
}

fn io_err(path: &Path, source: std::io::Error) -> IndexError {
    IndexError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn corrupt(file: &str, detail: impl std::fmt::Display) -> IndexError {
    IndexError::Corrupt {
        file: file.to_string(),
        detail: detail.to_string(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8], file: &'a str) -> Self {
        Self { buf, pos: 0, file }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.pos + n > self.buf.len() {
            return Err(corrupt(self.file, "unexpected end of file"));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, IndexError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

impl HybridIndex {
    /// Persist the index into `dir` (created if absent). Everything is
    /// rewritten; the manifest goes last so its checksums cover final bytes.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

        // units.dat
        let mut units_buf = Vec::new();
        units_buf.extend_from_slice(&(self.units.len() as u32).to_le_bytes());
        for unit in &self.units {
            let json = serde_json::to_vec(unit)
                .map_err(|e| corrupt(UNITS_FILE, format!("serialize: {e}")))?;
            units_buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
            units_buf.extend_from_slice(&json);
        }

        // postings.dat
        let mut post_buf = Vec::new();
        post_buf.extend_from_slice(&(self.doc_lengths.len() as u32).to_le_bytes());
        for &dl in &self.doc_lengths {
            post_buf.extend_from_slice(&dl.to_le_bytes());
        }
        post_buf.extend_from_slice(&(self.postings.len() as u32).to_le_bytes());
        for (term, list) in &self.postings {
            let bytes = term.as_bytes();
            post_buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
            post_buf.extend_from_slice(bytes);
            post_buf.extend_from_slice(&(list.len() as u32).to_le_bytes());
            let mut prev = 0u32;
            for p in list {
                post_buf.extend_from_slice(&(p.ordinal - prev).to_le_bytes());
                post_buf.extend_from_slice(&p.tf.to_le_bytes());
                prev = p.ordinal;
            }
        }

        // vectors.dat
        let mut vec_buf = Vec::with_capacity(self.vectors.len() * 4);
        for &v in &self.vectors {
            vec_buf.extend_from_slice(&v.to_le_bytes());
        }

        // media.dat
        let mut media_buf = Vec::new();
        media_buf.extend_from_slice(&(self.media.len() as u32).to_le_bytes());
        for m in &self.media {
            media_buf.extend_from_slice(&(m.id.len() as u16).to_le_bytes());
            media_buf.extend_from_slice(m.id.as_bytes());
            media_buf.extend_from_slice(&(m.media_type.len() as u16).to_le_bytes());
            media_buf.extend_from_slice(m.media_type.as_bytes());
            match &m.caption {
                None => media_buf.push(0),
                Some(c) => {
                    media_buf.push(1);
                    media_buf.extend_from_slice(&(c.len() as u16).to_le_bytes());
                    media_buf.extend_from_slice(c.as_bytes());
                }
            }
            media_buf.extend_from_slice(&(m.bytes.len() as u32).to_le_bytes());
            media_buf.extend_from_slice(&m.bytes);
        }

        let mut checksums = std::collections::BTreeMap::new();
        for (name, buf) in [
            (UNITS_FILE, &units_buf),
            (POSTINGS_FILE, &post_buf),
            (VECTORS_FILE, &vec_buf),
            (MEDIA_FILE, &media_buf),
        ] {
            let path = dir.join(name);
            let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            f.write_all(buf).map_err(|e| io_err(&path, e))?;
            checksums.insert(name.to_string(), sha256_hex(buf));
        }

        let manifest = Manifest {
            format_version: FORMAT_VERSION.to_string(),
            dim: self.dim,
            stats: self.stats.clone(),
            meta: self.meta.clone(),
            checksums,
        };
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| corrupt(MANIFEST_FILE, format!("serialize: {e}")))?;
        fs::write(&path, json).map_err(|e| io_err(&path, e))?;
        Ok(())
    }

    /// Load an index directory written by [`HybridIndex::save`].
    pub fn load(dir: &Path) -> Result<HybridIndex, IndexError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_bytes = fs::read(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| corrupt(MANIFEST_FILE, format!("parse: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(IndexError::Version {
                found: manifest.format_version,
                expected: FORMAT_VERSION.to_string(),
            });
        }

        let read_checked = |name: &str| -> Result<Vec<u8>, IndexError> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let want = manifest
                .checksums
                .get(name)
                .ok_or_else(|| corrupt(MANIFEST_FILE, format!("no checksum for {name}")))?;
            let got = sha256_hex(&bytes);
            if &got != want {
                return Err(corrupt(name, format!("checksum mismatch (expected {want}, got {got})")));
            }
            Ok(bytes)
        };

        let units_bytes = read_checked(UNITS_FILE)?;
        let post_bytes = read_checked(POSTINGS_FILE)?;
        let vec_bytes = read_checked(VECTORS_FILE)?;
        let media_bytes = read_checked(MEDIA_FILE)?;

        // units.dat
        let mut r = ByteReader::new(&units_bytes, UNITS_FILE);
        let n_units = r.u32()? as usize;
        let mut units = Vec::with_capacity(n_units);
        for _ in 0..n_units {
            let len = r.u32()? as usize;
            let unit: Unit = serde_json::from_slice(r.take(len)?)
                .map_err(|e| corrupt(UNITS_FILE, format!("unit record: {e}")))?;
            units.push(unit);
        }
        if !r.done() {
            return Err(corrupt(UNITS_FILE, "trailing bytes"));
        }

        // postings.dat
        let mut r = ByteReader::new(&post_bytes, POSTINGS_FILE);
        let n_docs = r.u32()? as usize;
        if n_docs != n_units {
            return Err(corrupt(POSTINGS_FILE, "doc count disagrees with unit store"));
        }
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_lengths.push(r.u32()?);
        }
        let n_terms = r.u32()? as usize;
        let mut postings = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let len = r.u16()? as usize;
            let term = std::str::from_utf8(r.take(len)?)
                .map_err(|e| corrupt(POSTINGS_FILE, format!("term utf-8: {e}")))?
                .to_string();
            let df = r.u32()? as usize;
            let mut list = Vec::with_capacity(df);
            let mut prev = 0u32;
            for _ in 0..df {
                let delta = r.u32()?;
                let tf = r.u32()?;
                let ordinal = prev + delta;
                if ordinal as usize >= n_units {
                    return Err(corrupt(POSTINGS_FILE, "posting ordinal out of range"));
                }
                prev = ordinal;
                list.push(Posting { ordinal, tf });
            }
            postings.push((term, list));
        }
        if !r.done() {
            return Err(corrupt(POSTINGS_FILE, "trailing bytes"));
        }

        // vectors.dat
        let expected = n_units * manifest.dim * 4;
        if vec_bytes.len() != expected {
            return Err(corrupt(
                VECTORS_FILE,
                format!("size {} does not match {n_units} x {} floats", vec_bytes.len(), manifest.dim),
            ));
        }
        let mut vectors = Vec::with_capacity(n_units * manifest.dim);
        for chunk in vec_bytes.chunks_exact(4) {
            vectors.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }

        // media.dat
        let mut r = ByteReader::new(&media_bytes, MEDIA_FILE);
        let n_media = r.u32()? as usize;
        let mut media = Vec::with_capacity(n_media);
        for _ in 0..n_media {
            let id_len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|e| corrupt(MEDIA_FILE, format!("id utf-8: {e}")))?
                .to_string();
            let mt_len = r.u16()? as usize;
            let media_type = std::str::from_utf8(r.take(mt_len)?)
                .map_err(|e| corrupt(MEDIA_FILE, format!("media type utf-8: {e}")))?
                .to_string();
            let caption = match r.take(1)?[0] {
                0 => None,
                _ => {
                    let len = r.u16()? as usize;
                    Some(
                        std::str::from_utf8(r.take(len)?)
                            .map_err(|e| corrupt(MEDIA_FILE, format!("caption utf-8: {e}")))?
                            .to_string(),
                    )
                }
            };
            let len = r.u32()? as usize;
            let bytes = r.take(len)?.to_vec();
            media.push(StoredMedia {
                id,
                media_type,
                caption,
                bytes,
            });
        }
        if !r.done() {
            return Err(corrupt(MEDIA_FILE, "trailing bytes"));
        }

        let ordinals: HashMap<String, u32> = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.unit_id.clone(), i as u32))
            .collect();
        if ordinals.len() != units.len() {
            return Err(corrupt(UNITS_FILE, "duplicate unit ids"));
        }
        let term_lookup = postings
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let media_lookup = media
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i as u32))
            .collect();
        let total_tokens: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = if units.is_empty() {
            0.0
        } else {
            total_tokens as f64 / units.len() as f64
        };

        Ok(HybridIndex {
            units,
            ordinals,
            postings,
            term_lookup,
            doc_lengths,
            avg_doc_length,
            vectors,
            dim: manifest.dim,
            media,
            media_lookup,
            stats: manifest.stats,
            meta: manifest.meta,
        })
    }
}

/// Read a manifest without loading index data (used by health endpoints and
/// CLI status output).
pub fn read_manifest(dir: &Path) -> Result<(String, usize, IndexStats, serde_json::Value), IndexError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_bytes = fs::read(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| corrupt(MANIFEST_FILE, format!("parse: {e}")))?;
    Ok((
        manifest.format_version,
        manifest.dim,
        manifest.stats,
        manifest.meta,
    ))
}
