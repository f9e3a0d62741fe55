//! Shard file format: a versioned binary container of samples.
//!
//! Layout: magic, version, sample count, then length-prefixed records, then
//! a trailing CRC-64 over everything before it. Pixel data is stored as raw
//! little-endian f64, so a write/read roundtrip is the identity.

use std::path::Path;

use ndarray::{Array2, Array3};

use crate::image::RgbaImage;
use crate::io_util::{check_trailing_checksum, ByteReader, ByteWriter};
use crate::{Error, Result};

use super::sample::{RgbaSample, SampleSource};

const MAGIC: &[u8; 8] = b"FOCSHARD";
const VERSION: u32 = 1;

fn encode_record(sample: &RgbaSample) -> Vec<u8> {
    let mut w = ByteWriter::new();
    let (h, width, _) = sample.image.rgb.dim();
    w.put_u32(h as u32);
    w.put_u32(width as u32);
    for &v in sample.image.rgb.iter() {
        w.put_f64(v);
    }
    for &v in sample.image.alpha.iter() {
        w.put_f64(v);
    }
    w.put_str(&sample.text);
    w.put_u32(sample.tokens.len() as u32);
    for &t in &sample.tokens {
        w.put_u32(t);
    }
    w.put_u8(sample.source.tag());
    match sample.region_id {
        Some(id) => {
            w.put_u8(1);
            w.put_u32(id);
        }
        None => w.put_u8(0),
    }
    w.into_inner()
}

fn decode_record(bytes: &[u8]) -> Result<RgbaSample> {
    let mut r = ByteReader::new(bytes, "shard record");
    let h = r.get_u32()? as usize;
    let w = r.get_u32()? as usize;
    if h == 0 || w == 0 || h > 1 << 16 || w > 1 << 16 {
        return Err(Error::Corrupt(format!("shard record: implausible dims {h}x{w}")));
    }
    let mut rgb = Array3::zeros((h, w, 3));
    for v in rgb.iter_mut() {
        *v = r.get_f64()?;
    }
    let mut alpha = Array2::zeros((h, w));
    for v in alpha.iter_mut() {
        *v = r.get_f64()?;
    }
    let text = r.get_str()?;
    let n_tokens = r.get_u32()? as usize;
    let mut tokens = Vec::with_capacity(n_tokens.min(r.remaining() / 4));
    for _ in 0..n_tokens {
        tokens.push(r.get_u32()?);
    }
    let source = SampleSource::from_tag(r.get_u8()?)?;
    let region_id = if r.get_u8()? == 1 { Some(r.get_u32()?) } else { None };
    r.expect_end()?;

    let image = RgbaImage::new(rgb, alpha)
        .map_err(|e| Error::Corrupt(format!("shard record: invalid image: {e}")))?;
    RgbaSample::new(image, text, tokens, source, region_id)
        .map_err(|e| Error::Corrupt(format!("shard record: invalid sample: {e}")))
}

/// Serialize samples into shard bytes.
pub fn shard_bytes(samples: &[RgbaSample]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_bytes(MAGIC);
    w.put_u32(VERSION);
    w.put_u64(samples.len() as u64);
    for s in samples {
        let rec = encode_record(s);
        w.put_u64(rec.len() as u64);
        w.put_bytes(&rec);
    }
    w.finish_with_checksum()
}

/// Parse shard bytes back into samples, validating structure and checksum.
pub fn shard_from_bytes(bytes: &[u8]) -> Result<Vec<RgbaSample>> {
    let payload = check_trailing_checksum(bytes, "shard")?;
    let mut r = ByteReader::new(payload, "shard");
    if r.take(8)? != MAGIC {
        return Err(Error::Corrupt("shard: bad magic".into()));
    }
    let version = r.get_u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("shard: unsupported version {version}")));
    }
    let count = r.get_u64()? as usize;
    let mut samples = Vec::with_capacity(count.min(r.remaining() / 16));
    for _ in 0..count {
        let len = r.get_u64()? as usize;
        let rec = r.take(len)?;
        samples.push(decode_record(rec)?);
    }
    r.expect_end()?;
    Ok(samples)
}

pub fn shard_write(samples: &[RgbaSample], path: &Path) -> Result<()> {
    std::fs::write(path, shard_bytes(samples))?;
    Ok(())
}

pub fn shard_read(path: &Path) -> Result<Vec<RgbaSample>> {
    let bytes = std::fs::read(path)?;
    shard_from_bytes(&bytes)
}
