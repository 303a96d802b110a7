//! Shared little-endian codec helpers for the crate's binary artifacts.
//!
//! Every on-disk artifact starts with a four-byte magic and a `u32` format
//! version. Readers here are written for untrusted input: length and count
//! fields are bounds-checked before any allocation, and nothing is
//! preallocated from a header field alone.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Upper bound on a single length-prefixed string, in bytes.
pub const MAX_STRING_BYTES: u32 = 1 << 20;
/// Upper bound on a declared vector dimensionality.
pub const MAX_DIM: u32 = 1 << 20;

/// Read and check a four-byte magic plus a `u32` version.
pub fn read_header(r: &mut impl Read, magic: &[u8; 4], what: &str) -> Result<u32> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)
        .map_err(|e| Error::bad_format(what, format!("missing magic: {e}")))?;
    if &found != magic {
        return Err(Error::bad_format(
            what,
            format!("bad magic {:02x?}, expected {:02x?}", found, magic),
        ));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| Error::bad_format(what, format!("missing version: {e}")))?;
    Ok(version)
}

/// Write a four-byte magic plus a `u32` version.
pub fn write_header(w: &mut impl Write, magic: &[u8; 4], version: u32) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)
}

/// Reject any version other than the one this build understands.
pub fn expect_version(version: u32, supported: u32, what: &str) -> Result<()> {
    if version != supported {
        return Err(Error::bad_format(
            what,
            format!("unsupported version {version}, expected {supported}"),
        ));
    }
    Ok(())
}

/// Read a `u32` length prefix followed by that many UTF-8 bytes.
pub fn read_string(r: &mut impl Read, what: &str) -> Result<String> {
    let len = r
        .read_u32::<LittleEndian>()
        .map_err(|e| Error::bad_format(what, format!("truncated string length: {e}")))?;
    if len > MAX_STRING_BYTES {
        return Err(Error::bad_format(
            what,
            format!("string length {len} exceeds limit {MAX_STRING_BYTES}"),
        ));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)
        .map_err(|e| Error::bad_format(what, format!("truncated string body: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::bad_format(what, format!("invalid utf-8: {e}")))
}

/// Write a `u32` length prefix followed by the UTF-8 bytes.
pub fn write_string(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

/// Validate a declared dimensionality before reading vectors of that size.
pub fn check_dim(d: u32, what: &str) -> Result<usize> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::bad_format(
            what,
            format!("dimensionality {d} outside 1..={MAX_DIM}"),
        ));
    }
    Ok(d as usize)
}

/// Read `d` float32 components, widening to f64.
pub fn read_f32_vector(r: &mut impl Read, d: usize, what: &str) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(d);
    for _ in 0..d {
        let x = r
            .read_f32::<LittleEndian>()
            .map_err(|e| Error::bad_format(what, format!("truncated vector: {e}")))?;
        v.push(f64::from(x));
    }
    Ok(v)
}

/// Write a vector as float32 components, narrowing from f64.
pub fn write_f32_vector(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    for &x in v {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    Ok(())
}

/// Read `d` float64 components.
pub fn read_f64_vector(r: &mut impl Read, d: usize, what: &str) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(d);
    for _ in 0..d {
        let x = r
            .read_f64::<LittleEndian>()
            .map_err(|e| Error::bad_format(what, format!("truncated vector: {e}")))?;
        v.push(x);
    }
    Ok(v)
}

/// Write a vector as float64 components.
pub fn write_f64_vector(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    for &x in v {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

/// Require that a reader is fully consumed; trailing bytes mean corruption.
pub fn expect_eof(r: &mut impl Read, what: &str) -> Result<()> {
    let mut buf = [0u8; 1];
    match r.read(&mut buf) {
        Ok(0) => Ok(()),
        Ok(_) => Err(Error::bad_format(what, "trailing bytes after payload")),
        Err(e) => Err(Error::bad_format(what, format!("read failure at tail: {e}"))),
    }
}
