//! Binary fingerprint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "UCIF" | version: u16 = 1 | width: u32 | height: u32 | support_count: u32 |
//! width * height f32 values, row-major
//! ```
//!
//! Values are stored as `f32`, so a save/load cycle quantizes an in-memory
//! fingerprint once; after that, further cycles are bit-exact.

use std::io::Write;
use std::path::Path;

use super::CameraFingerprint;
use crate::error::{Error, Result};
use crate::imaging::PixelGrid;

pub const MAGIC: [u8; 4] = *b"UCIF";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 18;
/// Refuse anything larger than a 16k x 16k fingerprint.
const MAX_VALUES: usize = 1 << 28;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFingerprintFile(msg.into())
}

pub fn encode_fingerprint(fp: &CameraFingerprint) -> Result<Vec<u8>> {
    let (w, h) = fp.dims();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * w * h);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(w, "width")?.to_le_bytes());
    out.extend_from_slice(&to_u32(h, "height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(fp.support_count(), "support count")?.to_le_bytes());
    for &v in fp.values() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fingerprint value {v} does not fit in f32"
            )));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_fingerprint(bytes: &[u8]) -> Result<CameraFingerprint> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(corrupt(format!("bad magic {:02x?}", &bytes[..4])));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let (width, height, support) = (u32_at(6), u32_at(10), u32_at(14));
    if width == 0 || height == 0 {
        return Err(corrupt(format!("empty dimensions {width}x{height}")));
    }
    let count = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_VALUES)
        .ok_or_else(|| corrupt(format!("dimensions {width}x{height} overflow")))?;
    if support == 0 {
        return Err(corrupt("support count is zero"));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 4 {
        return Err(corrupt(format!(
            "expected {} value bytes, found {}",
            count * 4,
            body.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for chunk in body.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(corrupt(format!("non-finite value at index {}", values.len())));
        }
        values.push(f64::from(v));
    }
    let grid = PixelGrid::new(width, height, values).map_err(|e| corrupt(e.to_string()))?;
    CameraFingerprint::new(grid, support)
}

/// Writes atomically: a sibling temp file is renamed over `path`.
pub fn save_fingerprint(fp: &CameraFingerprint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_fingerprint(fp)?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_fingerprint(path: impl AsRef<Path>) -> Result<CameraFingerprint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fingerprint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CameraFingerprint {
        let grid = PixelGrid::from_fn(5, 3, |x, y| (x as f64 - 2.0) * 0.01 + y as f64 * 0.5);
        CameraFingerprint::new(grid, 7).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_fingerprint(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"UCIF");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[5, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[3, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &[7, 0, 0, 0]);
        assert_eq!(bytes.len(), 18 + 15 * 4);
        assert_eq!(&bytes[18..22], &(-0.02f32).to_le_bytes());
    }

    #[test]
    fn round_trip_is_stable_after_one_quantization() {
        let once = decode_fingerprint(&encode_fingerprint(&sample()).unwrap()).unwrap();
        let bytes = encode_fingerprint(&once).unwrap();
        let twice = decode_fingerprint(&bytes).unwrap();
        assert_eq!(once, twice);
        assert_eq!(encode_fingerprint(&twice).unwrap(), bytes);
        for (a, b) in once.values().iter().zip(sample().values()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
    }

    #[test]
    fn corrupt_inputs() {
        let good = encode_fingerprint(&sample()).unwrap();
        let is_corrupt = |b: &[u8]| matches!(decode_fingerprint(b), Err(Error::CorruptFingerprintFile(_)));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(is_corrupt(&bad_magic));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(is_corrupt(&bad_version));

        assert!(is_corrupt(&good[..10]));
        assert!(is_corrupt(&good[..good.len() - 1]));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(is_corrupt(&trailing));

        let mut huge = good.clone();
        huge[6..10].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[10..14].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(is_corrupt(&huge));

        let mut zero_support = good.clone();
        zero_support[14..18].copy_from_slice(&0u32.to_le_bytes());
        assert!(is_corrupt(&zero_support));

        let mut nan = good;
        nan[18..22].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(is_corrupt(&nan));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ucif");
        save_fingerprint(&sample(), &path).unwrap();
        let loaded = load_fingerprint(&path).unwrap();
        assert_eq!(encode_fingerprint(&loaded).unwrap(), std::fs::read(&path).unwrap());
        // no temp files left behind
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
