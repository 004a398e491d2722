//! Little-endian binary read/write helpers shared by the checkpoint,
//! replay-buffer and shard file formats. The reader tracks its byte offset
//! so format errors can point at the corrupt position.

use std::io::{Read, Write};

use crate::{Error, Result};

pub struct CountingReader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn format_err(&self, msg: impl Into<String>) -> Error {
        Error::Format { offset: self.offset, msg: msg.into() }
    }

    pub fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("unexpected end of file ({e})"),
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn read_magic(&mut self, expect: &[u8; 8]) -> Result<()> {
        let mut got = [0u8; 8];
        self.read_exact(&mut got)?;
        if &got != expect {
            return Err(Error::Format {
                offset: 0,
                msg: format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expect),
                    String::from_utf8_lossy(&got)
                ),
            });
        }
        Ok(())
    }

    pub fn read_u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b)?;
        Ok(b[0])
    }

    pub fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn read_f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn read_f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.read_f64()?);
        }
        Ok(out)
    }

    /// u32 length prefix followed by UTF-8 bytes.
    pub fn read_string(&mut self) -> Result<String> {
        let len = self.read_u32()? as usize;
        let mut buf = vec![0u8; len];
        self.read_exact(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("invalid UTF-8 string: {e}"),
        })
    }
}

pub fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64_slice<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}
