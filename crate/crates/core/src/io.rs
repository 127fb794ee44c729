//! File helpers shared by every artifact writer.
//!
//! Binary artifacts (feature caches, checkpoints) use one container layout:
//!
//! ```text
//! magic    4 bytes
//! version  u32 LE
//! hlen     u64 LE   length of the JSON header in bytes
//! header   hlen bytes of UTF-8 JSON
//! count    u64 LE   number of f64 values in the payload
//! payload  count * 8 bytes, IEEE-754 binary64 LE
//! ```
//!
//! Values are stored bit-for-bit so a read after a write reproduces them exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "path has no file name"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

pub(crate) fn encode_container<H: Serialize>(
    magic: &[u8; 4],
    version: u32,
    header: &H,
    payload: &[f64],
) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(4 + 4 + 8 + header.len() + 8 + payload.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn decode_container<H: DeserializeOwned>(
    path: &Path,
    bytes: &[u8],
    magic: &[u8; 4],
    version: u32,
) -> Result<(H, Vec<f64>)> {
    let mut cursor = Cursor { path, bytes, pos: 0 };
    if cursor.take(4)? != magic {
        return Err(Error::format(path, "bad magic number"));
    }
    let found = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
    if found != version {
        return Err(Error::format(
            path,
            format!("unsupported format version {found} (expected {version})"),
        ));
    }
    let hlen = cursor.u64()? as usize;
    let header: H =
        serde_json::from_slice(cursor.take(hlen)?).map_err(|e| Error::format(path, format!("header: {e}")))?;
    let count = cursor.u64()? as usize;
    let raw = cursor.take(
        count
            .checked_mul(8)
            .ok_or_else(|| Error::format(path, "payload too large"))?,
    )?;
    if cursor.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after payload"));
    }
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.path, "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Mixes a base seed with stream identifiers into an independent seed (splitmix64).
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut z = base;
    for &s in stream {
        z = splitmix(z ^ splitmix(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix(z)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
