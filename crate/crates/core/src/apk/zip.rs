//! Minimal strict ZIP reader and writer for APK containers.
//!
//! Opening an archive cross-checks every local header against its central
//! directory record. Reading an entry verifies its CRC-32 and sizes, so a
//! damaged container fails instead of yielding partial content. ZIP64 and
//! encryption are not supported.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::bytes::{slice, u16_le, u32_le, OutOfBounds};

const EOCD_SIG: u32 = 0x0605_4b50;
const CDIR_SIG: u32 = 0x0201_4b50;
const LOCAL_SIG: u32 = 0x0403_4b50;
const EOCD_LEN: usize = 22;
const MAX_ENTRY_SIZE: u64 = 512 * 1024 * 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZipError {
    #[error("not a zip archive: {0}")]
    NotAZip(String),
    #[error("corrupt zip entry {name:?} at offset {offset}: {reason}")]
    CorruptEntry {
        name: String,
        offset: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stored,
    Deflated,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    method: Method,
    crc32: u32,
    compressed_size: u64,
    size: u64,
    local_offset: usize,
}

/// A parsed archive; entry data is extracted lazily.
#[derive(Debug)]
pub struct Archive<'a> {
    buf: &'a [u8],
    entries: Vec<Entry>,
}

fn not_zip(reason: impl Into<String>) -> ZipError {
    ZipError::NotAZip(reason.into())
}

impl<'a> Archive<'a> {
    pub fn parse(buf: &'a [u8]) -> Result<Self, ZipError> {
        let eocd = find_eocd(buf).ok_or_else(|| not_zip("end of central directory not found"))?;
        let trunc = |e: OutOfBounds| not_zip(format!("truncated central directory at {}", e.0));
        let disk = u16_le(buf, eocd + 4).map_err(trunc)?;
        let cd_disk = u16_le(buf, eocd + 6).map_err(trunc)?;
        let n_here = u16_le(buf, eocd + 8).map_err(trunc)?;
        let n_total = u16_le(buf, eocd + 10).map_err(trunc)?;
        let cd_size = u32_le(buf, eocd + 12).map_err(trunc)? as usize;
        let cd_off = u32_le(buf, eocd + 16).map_err(trunc)? as usize;
        let comment_len = u16_le(buf, eocd + 20).map_err(trunc)? as usize;
        if disk != 0 || cd_disk != 0 || n_here != n_total {
            return Err(not_zip("multi-disk archives are not supported"));
        }
        if eocd + EOCD_LEN + comment_len != buf.len() {
            return Err(not_zip("trailing bytes after archive comment"));
        }
        if cd_off.checked_add(cd_size) != Some(eocd) {
            return Err(not_zip("central directory does not end at the end record"));
        }

        let mut entries: Vec<Entry> = Vec::with_capacity(n_total as usize);
        let mut pos = cd_off;
        for _ in 0..n_total {
            let entry = read_central(buf, pos).map_err(trunc)?;
            let (entry, next) =
                entry.ok_or_else(|| not_zip(format!("bad central header at {pos}")))?;
            if entries.iter().any(|e| e.name == entry.name) {
                return Err(not_zip(format!("duplicate entry {:?}", entry.name)));
            }
            entries.push(entry);
            pos = next;
        }
        if pos != eocd {
            return Err(not_zip("central directory size mismatch"));
        }
        for entry in &entries {
            Self::data_offset(buf, entry)?;
        }
        Ok(Archive { buf, entries })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn find(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Checks the local header of `entry` against its central record and
    /// returns the offset of the entry data.
    fn data_offset(buf: &[u8], entry: &Entry) -> Result<usize, ZipError> {
        let corrupt = |offset: usize, reason: &str| ZipError::CorruptEntry {
            name: entry.name.clone(),
            offset,
            reason: reason.to_string(),
        };
        let lo = entry.local_offset;
        let bounds = |e: OutOfBounds| corrupt(e.0, "truncated local header");
        if u32_le(buf, lo).map_err(bounds)? != LOCAL_SIG {
            return Err(corrupt(lo, "bad local header signature"));
        }
        let flags = u16_le(buf, lo + 6).map_err(bounds)?;
        let method = u16_le(buf, lo + 8).map_err(bounds)?;
        let crc = u32_le(buf, lo + 14).map_err(bounds)?;
        let csize = u32_le(buf, lo + 18).map_err(bounds)? as u64;
        let usize_ = u32_le(buf, lo + 22).map_err(bounds)? as u64;
        let name_len = u16_le(buf, lo + 26).map_err(bounds)? as usize;
        let extra_len = u16_le(buf, lo + 28).map_err(bounds)? as usize;
        let name = slice(buf, lo + 30, name_len).map_err(bounds)?;
        if name != entry.name.as_bytes() {
            return Err(corrupt(
                lo + 30,
                "local name differs from central directory",
            ));
        }
        let expected_method = match entry.method {
            Method::Stored => 0,
            Method::Deflated => 8,
        };
        if method != expected_method {
            return Err(corrupt(
                lo + 8,
                "local method differs from central directory",
            ));
        }
        let has_descriptor = flags & 0x0008 != 0;
        if !has_descriptor
            && (crc != entry.crc32 || csize != entry.compressed_size || usize_ != entry.size)
        {
            return Err(corrupt(
                lo + 14,
                "local sizes or crc differ from central directory",
            ));
        }
        let data_off = lo + 30 + name_len + extra_len;
        slice(buf, data_off, entry.compressed_size as usize)
            .map_err(|e| corrupt(e.0, "truncated entry data"))?;
        Ok(data_off)
    }

    /// Extracts and verifies one entry.
    pub fn read(&self, entry: &Entry) -> Result<Vec<u8>, ZipError> {
        let corrupt = |offset: usize, reason: &str| ZipError::CorruptEntry {
            name: entry.name.clone(),
            offset,
            reason: reason.to_string(),
        };
        let buf = self.buf;
        let data_off = Self::data_offset(buf, entry)?;
        let data = slice(buf, data_off, entry.compressed_size as usize)
            .map_err(|e| corrupt(e.0, "truncated entry data"))?;
        let out = match entry.method {
            Method::Stored => {
                if entry.compressed_size != entry.size {
                    return Err(corrupt(data_off, "stored entry size mismatch"));
                }
                data.to_vec()
            }
            Method::Deflated => {
                let mut out = Vec::with_capacity(entry.size as usize);
                DeflateDecoder::new(data)
                    .take(entry.size + 1)
                    .read_to_end(&mut out)
                    .map_err(|_| corrupt(data_off, "invalid deflate stream"))?;
                out
            }
        };
        if out.len() as u64 != entry.size {
            return Err(corrupt(data_off, "uncompressed size mismatch"));
        }
        if crc32fast::hash(&out) != entry.crc32 {
            return Err(corrupt(data_off, "crc mismatch"));
        }
        Ok(out)
    }
}

fn find_eocd(buf: &[u8]) -> Option<usize> {
    if buf.len() < EOCD_LEN {
        return None;
    }
    let lowest = buf.len().saturating_sub(EOCD_LEN + u16::MAX as usize);
    (lowest..=buf.len() - EOCD_LEN)
        .rev()
        .find(|&i| u32_le(buf, i) == Ok(EOCD_SIG))
}

fn read_central(buf: &[u8], pos: usize) -> Result<Option<(Entry, usize)>, OutOfBounds> {
    if u32_le(buf, pos)? != CDIR_SIG {
        return Ok(None);
    }
    let flags = u16_le(buf, pos + 8)?;
    let method = match u16_le(buf, pos + 10)? {
        0 => Method::Stored,
        8 => Method::Deflated,
        _ => return Ok(None),
    };
    if flags & 0x0001 != 0 {
        return Ok(None);
    }
    let crc32 = u32_le(buf, pos + 16)?;
    let compressed_size = u32_le(buf, pos + 20)? as u64;
    let size = u32_le(buf, pos + 24)? as u64;
    let name_len = u16_le(buf, pos + 28)? as usize;
    let extra_len = u16_le(buf, pos + 30)? as usize;
    let comment_len = u16_le(buf, pos + 32)? as usize;
    let local_offset = u32_le(buf, pos + 42)? as usize;
    let name = slice(buf, pos + 46, name_len)?;
    let Ok(name) = std::str::from_utf8(name) else {
        return Ok(None);
    };
    if name.is_empty() || size > MAX_ENTRY_SIZE || local_offset >= pos {
        return Ok(None);
    }
    let next = pos + 46 + name_len + extra_len + comment_len;
    let entry = Entry {
        name: name.to_string(),
        method,
        crc32,
        compressed_size,
        size,
        local_offset,
    };
    Ok(Some((entry, next)))
}

/// Deterministic archive writer: fixed timestamps, entries in insertion
/// order.
#[derive(Debug, Default)]
pub struct ZipWriter {
    out: Vec<u8>,
    central: Vec<u8>,
    count: u16,
}

impl ZipWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, data: &[u8], method: Method) {
        let crc = crc32fast::hash(data);
        let (code, payload) = match method {
            Method::Stored => (0u16, data.to_vec()),
            Method::Deflated => {
                let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
                enc.write_all(data).expect("in-memory write");
                (8u16, enc.finish().expect("in-memory write"))
            }
        };
        let offset = self.out.len() as u32;
        // 1980-01-01 00:00
        let (time, date) = (0u16, 0x0021u16);

        let mut local = Vec::new();
        local.extend_from_slice(&LOCAL_SIG.to_le_bytes());
        local.extend_from_slice(&20u16.to_le_bytes());
        local.extend_from_slice(&0u16.to_le_bytes());
        local.extend_from_slice(&code.to_le_bytes());
        local.extend_from_slice(&time.to_le_bytes());
        local.extend_from_slice(&date.to_le_bytes());
        local.extend_from_slice(&crc.to_le_bytes());
        local.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        local.extend_from_slice(&(data.len() as u32).to_le_bytes());
        local.extend_from_slice(&(name.len() as u16).to_le_bytes());
        local.extend_from_slice(&0u16.to_le_bytes());
        local.extend_from_slice(name.as_bytes());
        self.out.extend_from_slice(&local);
        self.out.extend_from_slice(&payload);

        let c = &mut self.central;
        c.extend_from_slice(&CDIR_SIG.to_le_bytes());
        c.extend_from_slice(&20u16.to_le_bytes());
        c.extend_from_slice(&20u16.to_le_bytes());
        c.extend_from_slice(&0u16.to_le_bytes());
        c.extend_from_slice(&code.to_le_bytes());
        c.extend_from_slice(&time.to_le_bytes());
        c.extend_from_slice(&date.to_le_bytes());
        c.extend_from_slice(&crc.to_le_bytes());
        c.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        c.extend_from_slice(&(data.len() as u32).to_le_bytes());
        c.extend_from_slice(&(name.len() as u16).to_le_bytes());
        c.extend_from_slice(&0u16.to_le_bytes()); // extra
        c.extend_from_slice(&0u16.to_le_bytes()); // comment
        c.extend_from_slice(&0u16.to_le_bytes()); // disk
        c.extend_from_slice(&0u16.to_le_bytes()); // internal attrs
        c.extend_from_slice(&0u32.to_le_bytes()); // external attrs
        c.extend_from_slice(&offset.to_le_bytes());
        c.extend_from_slice(name.as_bytes());
        self.count += 1;
    }

    pub fn finish(mut self) -> Vec<u8> {
        let cd_off = self.out.len() as u32;
        let cd_size = self.central.len() as u32;
        self.out.extend_from_slice(&self.central);
        self.out.extend_from_slice(&EOCD_SIG.to_le_bytes());
        self.out.extend_from_slice(&0u16.to_le_bytes());
        self.out.extend_from_slice(&0u16.to_le_bytes());
        self.out.extend_from_slice(&self.count.to_le_bytes());
        self.out.extend_from_slice(&self.count.to_le_bytes());
        self.out.extend_from_slice(&cd_size.to_le_bytes());
        self.out.extend_from_slice(&cd_off.to_le_bytes());
        self.out.extend_from_slice(&0u16.to_le_bytes());
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut w = ZipWriter::new();
        w.add("a.txt", b"hello", Method::Stored);
        w.add("b.bin", &[7u8; 300], Method::Deflated);
        w.finish()
    }

    #[test]
    fn round_trip() {
        let buf = sample();
        let ar = Archive::parse(&buf).unwrap();
        assert_eq!(ar.entries().len(), 2);
        assert_eq!(ar.read(ar.find("a.txt").unwrap()).unwrap(), b"hello");
        assert_eq!(ar.read(ar.find("b.bin").unwrap()).unwrap(), vec![7u8; 300]);
    }

    #[test]
    fn empty_archive_parses() {
        let buf = ZipWriter::new().finish();
        assert!(Archive::parse(&buf).unwrap().entries().is_empty());
    }

    #[test]
    fn rejects_non_zip() {
        assert!(matches!(
            Archive::parse(b"not a zip at all, sorry"),
            Err(ZipError::NotAZip(_))
        ));
        assert!(matches!(Archive::parse(&[]), Err(ZipError::NotAZip(_))));
    }

    #[test]
    fn detects_data_corruption() {
        let mut buf = sample();
        // first entry's payload starts after the 30-byte header and 5-byte name
        buf[35] ^= 0x20;
        let ar = Archive::parse(&buf).unwrap();
        let err = ar.read(ar.find("a.txt").unwrap()).unwrap_err();
        assert!(
            matches!(err, ZipError::CorruptEntry { ref reason, .. } if reason == "crc mismatch")
        );
    }

    #[test]
    fn renamed_central_entry_fails_on_open() {
        let mut buf = sample();
        let at = buf.windows(5).rposition(|w| w == b"b.bin").unwrap();
        buf[at] = b'c';
        let err = Archive::parse(&buf).unwrap_err();
        assert!(matches!(err, ZipError::CorruptEntry { ref name, .. } if name == "c.bin"));
    }

    #[test]
    fn every_truncation_fails() {
        let buf = sample();
        for cut in 0..buf.len() {
            assert!(Archive::parse(&buf[..cut]).is_err(), "cut at {cut}");
        }
    }
}
