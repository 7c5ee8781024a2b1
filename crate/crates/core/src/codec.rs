//! Little-endian primitives shared by the binary artifact formats.
//!
//! Every format starts with a 4-byte magic followed by a `u32` version. Readers
//! run over an in-memory byte slice; a short payload surfaces as an
//! `UnexpectedEof` I/O error and trailing bytes as a format error.

use std::io::{self, Read};

use crate::error::{format_err, Error, Result};

pub(crate) const FORMAT_VERSION: u32 = 1;

pub(crate) struct Reader<'a> {
    inner: io::Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader {
            inner: io::Cursor::new(bytes),
        }
    }

    /// Checks magic and version.
    pub fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let mut got = [0u8; 4];
        self.inner.read_exact(&mut got)?;
        if &got != magic {
            return Err(format_err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.inner.read_exact(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn remaining(&self) -> usize {
        let pos = self.inner.position() as usize;
        self.inner.get_ref().len().saturating_sub(pos)
    }

    /// Reads `count` fixed-width items, checking the byte budget up front so a
    /// forged header cannot trigger a huge allocation.
    fn array<T, const N: usize>(&mut self, count: usize, decode: fn([u8; N]) -> T) -> Result<Vec<T>> {
        let needed = count.checked_mul(N);
        match needed {
            Some(n) if n <= self.remaining() => {}
            _ => {
                return Err(Error::Io(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    format!("payload truncated: need {count} items of {N} bytes"),
                )))
            }
        }
        let mut out = Vec::with_capacity(count);
        let mut b = [0u8; N];
        for _ in 0..count {
            self.inner.read_exact(&mut b)?;
            out.push(decode(b));
        }
        Ok(out)
    }

    pub fn u16_array(&mut self, count: usize) -> Result<Vec<u16>> {
        self.array(count, u16::from_le_bytes)
    }

    pub fn f32_array(&mut self, count: usize) -> Result<Vec<f32>> {
        self.array(count, f32::from_le_bytes)
    }

    pub fn f64_array(&mut self, count: usize) -> Result<Vec<f64>> {
        self.array(count, f64::from_le_bytes)
    }

    pub fn finish(self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(format_err(format!("{n} trailing bytes after payload"))),
        }
    }
}

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_header(magic: &[u8; 4]) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(magic);
        w.u32(FORMAT_VERSION);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Converts a dimension to the on-disk `u32`, rejecting values that do not fit.
pub(crate) fn dim_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| format_err(format!("{what} = {value} does not fit in u32")))
}

/// Writes `bytes` to `path` through a sibling temporary file renamed into place.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| -> io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}
