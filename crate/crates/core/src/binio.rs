//! Little-endian helpers shared by the versioned model and corpus files.
//!
//! Every file starts with an ASCII magic string; structured configuration is
//! stored as a length-prefixed JSON blob, matrices as row-major floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) struct BinWriter {
    inner: BufWriter<File>,
    path: PathBuf,
}

impl BinWriter {
    pub fn create(path: &Path, magic: &[u8]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BinWriter {
            inner: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.bytes(magic)?;
        Ok(w)
    }

    fn wrap(&self, e: std::io::Error) -> Error {
        Error::io(&self.path, e)
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b).map_err(|e| self.wrap(e))
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.inner
            .write_u32::<LittleEndian>(v)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.inner
            .write_u64::<LittleEndian>(v)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn len(&mut self, n: usize) -> Result<()> {
        let n = u32::try_from(n).map_err(|_| Error::invalid("length exceeds u32"))?;
        self.u32(n)
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let s = serde_json::to_string(value)?;
        self.str(&s)
    }

    pub fn f64s(&mut self, values: &[f64]) -> Result<()> {
        for &v in values {
            self.inner
                .write_f64::<LittleEndian>(v)
                .map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn f32s(&mut self, values: &[f32]) -> Result<()> {
        for &v in values {
            self.inner
                .write_f32::<LittleEndian>(v)
                .map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn u32s(&mut self, values: &[u32]) -> Result<()> {
        for &v in values {
            self.u32(v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) struct BinReader {
    inner: BufReader<File>,
    path: PathBuf,
}

impl BinReader {
    pub fn open(path: &Path, magic: &[u8]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BinReader {
            inner: BufReader::new(file),
            path: path.to_path_buf(),
        };
        let found = r.bytes(magic.len())?;
        if found != magic {
            return Err(Error::format(
                path,
                format!(
                    "expected magic {:?}, found {:?}",
                    String::from_utf8_lossy(magic),
                    String::from_utf8_lossy(&found)
                ),
            ));
        }
        Ok(r)
    }

    fn truncated(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(&self.path, "truncated file")
        } else {
            Error::io(&self.path, e)
        }
    }

    pub fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| self.truncated(e))?;
        Ok(buf)
    }

    pub fn u32(&mut self) -> Result<u32> {
        match self.inner.read_u32::<LittleEndian>() {
            Ok(v) => Ok(v),
            Err(e) => Err(self.truncated(e)),
        }
    }

    pub fn u64(&mut self) -> Result<u64> {
        match self.inner.read_u64::<LittleEndian>() {
            Ok(v) => Ok(v),
            Err(e) => Err(self.truncated(e)),
        }
    }

    pub fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let b = self.bytes(n)?;
        String::from_utf8(b).map_err(|_| Error::format(&self.path, "invalid UTF-8 string"))
    }

    pub fn json<T: DeserializeOwned>(&mut self) -> Result<T> {
        let s = self.str()?;
        serde_json::from_str(&s).map_err(|e| Error::format(&self.path, format!("bad config block: {e}")))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        if let Err(e) = self.inner.read_f64_into::<LittleEndian>(&mut out) {
            return Err(self.truncated(e));
        }
        Ok(out)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut out = vec![0.0; n];
        if let Err(e) = self.inner.read_f32_into::<LittleEndian>(&mut out) {
            return Err(self.truncated(e));
        }
        Ok(out)
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let mut out = vec![0; n];
        if let Err(e) = self.inner.read_u32_into::<LittleEndian>(&mut out) {
            return Err(self.truncated(e));
        }
        Ok(out)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Fails unless the reader is positioned at end of file.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::format(&self.path, "trailing bytes after payload")),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}

/// FNV-1a, 32-bit, over raw bytes.
pub fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// FNV-1a, 64-bit, over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
