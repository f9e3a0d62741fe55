//! Single-file checkpoint container.
//!
//! Layout: magic, version, dtype, kind, architecture config block, named
//! tensors (row-major), optional optimizer-state section (moment tensors,
//! step counter, training progress and recipe), trailing CRC-64. Loading
//! validates every tensor's shape against the config block and fails naming
//! the offending tensor.
//!
//! Model exports use 32-bit floats. Training checkpoints used for exact
//! resume store 64-bit values, since a 32-bit roundtrip could not reproduce
//! an uninterrupted 64-bit run bit for bit.

use std::path::Path;

use crate::io_util::{check_trailing_checksum, ByteReader, ByteWriter};
use crate::model::{ArchConfig, EncoderParams};
use crate::{Error, Result};

use super::adamw::OptimizerState;
use super::config::TrainConfig;

const MAGIC: &[u8; 8] = b"FOCCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            _ => Err(Error::Corrupt(format!("checkpoint: unknown dtype tag {t}"))),
        }
    }
}

/// Training progress stored alongside the optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub cfg: TrainConfig,
    /// Next step index to run.
    pub next_step: usize,
    /// Cosine schedule horizon fixed at run start.
    pub schedule_total: usize,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub state: Option<OptimizerState>,
    pub meta: Option<TrainMeta>,
}

fn write_config(w: &mut ByteWriter, c: &ArchConfig) {
    for v in [c.patch, c.image_size, c.dim, c.layers, c.heads, c.embed, c.text_layers, c.context, c.vocab] {
        w.put_u32(v as u32);
    }
    w.put_f64(c.temperature);
}

fn read_config(r: &mut ByteReader) -> Result<ArchConfig> {
    let mut vals = [0usize; 9];
    for v in &mut vals {
        *v = r.get_u32()? as usize;
    }
    let temperature = r.get_f64()?;
    let cfg = ArchConfig {
        patch: vals[0],
        image_size: vals[1],
        dim: vals[2],
        layers: vals[3],
        heads: vals[4],
        embed: vals[5],
        text_layers: vals[6],
        context: vals[7],
        vocab: vals[8],
        temperature,
    };
    cfg.validate().map_err(|e| Error::Corrupt(format!("checkpoint config: {e}")))?;
    Ok(cfg)
}

fn write_train_config(w: &mut ByteWriter, c: &TrainConfig) {
    w.put_f64(c.r_s);
    w.put_f64(c.lr_alpha);
    w.put_f64(c.lr_rest);
    w.put_f64(c.weight_decay);
    w.put_u32(c.unfreeze_blocks as u32);
    w.put_u32(c.epochs as u32);
    w.put_u32(c.batch as u32);
    w.put_u64(c.seed);
    match c.schedule_total {
        Some(t) => {
            w.put_u8(1);
            w.put_u64(t as u64);
        }
        None => w.put_u8(0),
    }
    match c.grad_clip {
        Some(g) => {
            w.put_u8(1);
            w.put_f64(g);
        }
        None => w.put_u8(0),
    }
}

fn read_train_config(r: &mut ByteReader) -> Result<TrainConfig> {
    Ok(TrainConfig {
        r_s: r.get_f64()?,
        lr_alpha: r.get_f64()?,
        lr_rest: r.get_f64()?,
        weight_decay: r.get_f64()?,
        unfreeze_blocks: r.get_u32()? as usize,
        epochs: r.get_u32()? as usize,
        batch: r.get_u32()? as usize,
        seed: r.get_u64()?,
        schedule_total: if r.get_u8()? == 1 { Some(r.get_u64()? as usize) } else { None },
        grad_clip: if r.get_u8()? == 1 { Some(r.get_f64()?) } else { None },
    })
}

fn write_tensors(w: &mut ByteWriter, params: &EncoderParams, dtype: Dtype) {
    let shapes = params.tensor_shapes();
    let tensors = params.tensors();
    w.put_u32(tensors.len() as u32);
    for ((name, values), (_, shape)) in tensors.iter().zip(shapes.iter()) {
        w.put_str(name);
        w.put_u8(shape.len() as u8);
        for &d in shape {
            w.put_u64(d as u64);
        }
        match dtype {
            Dtype::F32 => {
                for &v in *values {
                    w.put_f32(v as f32);
                }
            }
            Dtype::F64 => {
                for &v in *values {
                    w.put_f64(v);
                }
            }
        }
    }
}

fn read_tensors(r: &mut ByteReader, container: &mut EncoderParams, dtype: Dtype, what: &str) -> Result<()> {
    let expected = container.tensor_shapes();
    let count = r.get_u32()? as usize;
    if count != expected.len() {
        return Err(Error::Shape(format!(
            "{what}: {count} tensors stored, config expects {}",
            expected.len()
        )));
    }
    let mut tensors = container.tensors_mut();
    for ((exp_name, exp_shape), (_, slice)) in expected.iter().zip(tensors.iter_mut()) {
        let name = r.get_str()?;
        if name != *exp_name {
            return Err(Error::Shape(format!("{what}: expected tensor {exp_name}, found {name}")));
        }
        let ndim = r.get_u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.get_u64()? as usize);
        }
        if shape != *exp_shape {
            return Err(Error::Shape(format!(
                "{what}: tensor {name} has shape {shape:?}, config expects {exp_shape:?}"
            )));
        }
        match dtype {
            Dtype::F32 => {
                for v in slice.iter_mut() {
                    *v = f64::from(r.get_f32()?);
                }
            }
            Dtype::F64 => {
                for v in slice.iter_mut() {
                    *v = r.get_f64()?;
                }
            }
        }
    }
    Ok(())
}

fn encode(
    params: &EncoderParams,
    state: Option<&OptimizerState>,
    meta: Option<&TrainMeta>,
    dtype: Dtype,
) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_bytes(MAGIC);
    w.put_u32(VERSION);
    w.put_u8(dtype.tag());
    w.put_u8(u8::from(state.is_some()));
    write_config(&mut w, &params.config);
    write_tensors(&mut w, params, dtype);
    if let Some(state) = state {
        w.put_u64(state.step);
        write_tensors(&mut w, &state.m, dtype);
        write_tensors(&mut w, &state.v, dtype);
        let meta = meta.expect("optimizer state requires train meta");
        write_train_config(&mut w, &meta.cfg);
        w.put_u64(meta.next_step as u64);
        w.put_u64(meta.schedule_total as u64);
    }
    w.finish_with_checksum()
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let payload = check_trailing_checksum(bytes, "checkpoint")?;
    let mut r = ByteReader::new(payload, "checkpoint");
    if r.take(8)? != MAGIC {
        return Err(Error::Corrupt("checkpoint: bad magic".into()));
    }
    let version = r.get_u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("checkpoint: unsupported version {version}")));
    }
    let dtype = Dtype::from_tag(r.get_u8()?)?;
    let has_state = r.get_u8()? == 1;
    let config = read_config(&mut r)?;

    let mut params = EncoderParams::zeros(config.clone());
    read_tensors(&mut r, &mut params, dtype, "params")?;

    let (state, meta) = if has_state {
        let step = r.get_u64()?;
        let mut state = OptimizerState::new(config);
        state.step = step;
        read_tensors(&mut r, &mut state.m, dtype, "adam.m")?;
        read_tensors(&mut r, &mut state.v, dtype, "adam.v")?;
        let cfg = read_train_config(&mut r)?;
        let next_step = r.get_u64()? as usize;
        let schedule_total = r.get_u64()? as usize;
        (Some(state), Some(TrainMeta { cfg, next_step, schedule_total }))
    } else {
        (None, None)
    };
    r.expect_end()?;
    Ok(Checkpoint { params, state, meta })
}

/// Export model weights only, 32-bit tensors.
pub fn save_params(params: &EncoderParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode(params, None, None, Dtype::F32))?;
    Ok(())
}

/// Full training checkpoint: parameters, optimizer state and progress, in
/// 64-bit for exact resume.
pub fn checkpoint_save(
    params: &EncoderParams,
    state: &OptimizerState,
    meta: &TrainMeta,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, encode(params, Some(state), Some(meta), Dtype::F64))?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStreams;

    fn params() -> EncoderParams {
        let mut rng = SeedStreams::new(0).stream("init");
        EncoderParams::init(ArchConfig::tiny(), &mut rng)
    }

    #[test]
    fn f64_checkpoint_roundtrip_is_bit_exact() {
        let p = params();
        let mut state = OptimizerState::new(p.config.clone());
        state.step = 17;
        state.m.cls_token[0] = 0.25;
        let meta = TrainMeta {
            cfg: TrainConfig::default(),
            next_step: 18,
            schedule_total: 120,
        };
        let bytes = encode(&p, Some(&state), Some(&meta), Dtype::F64);
        let ck = decode(&bytes).unwrap();
        assert_eq!(ck.params, p);
        let st = ck.state.unwrap();
        assert_eq!(st.step, 17);
        assert_eq!(st.m, state.m);
        assert_eq!(st.v, state.v);
        assert_eq!(ck.meta.unwrap(), meta);
    }

    #[test]
    fn f32_export_roundtrips_within_f32_precision() {
        let p = params();
        let bytes = encode(&p, None, None, Dtype::F32);
        let ck = decode(&bytes).unwrap();
        assert!(ck.state.is_none());
        for ((_, a), (_, b)) in p.tensors().iter().zip(ck.params.tensors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn corrupted_byte_fails_to_load() {
        let p = params();
        let bytes = encode(&p, None, None, Dtype::F64);
        for pos in [0usize, 9, 40, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x08;
            assert!(decode(&bad).is_err(), "flip at {pos} undetected");
        }
    }

    #[test]
    fn mismatched_architecture_names_the_tensor() {
        // Save under tiny config, then doctor the config block to a wider
        // model: the checksum is recomputed so only shape validation can
        // reject it.
        let p = params();
        let mut state = OptimizerState::new(p.config.clone());
        state.step = 1;
        let meta = TrainMeta { cfg: TrainConfig::default(), next_step: 1, schedule_total: 10 };
        let bytes = encode(&p, Some(&state), Some(&meta), Dtype::F64);
        let mut payload = bytes[..bytes.len() - 8].to_vec();
        // dim field lives after magic(8) + version(4) + dtype(1) + kind(1)
        // + patch(4) + image_size(4).
        let dim_off = 8 + 4 + 1 + 1 + 4 + 4;
        payload[dim_off..dim_off + 4].copy_from_slice(&32u32.to_le_bytes());
        let crc = crate::io_util::crc64(&payload);
        payload.extend_from_slice(&crc.to_le_bytes());
        let err = decode(&payload).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("image.rgb_kernel"), "error should name the tensor, got: {msg}");
    }

    #[test]
    fn file_roundtrip_via_public_api() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let p = params();
        save_params(&p, &path).unwrap();
        let ck = checkpoint_load(&path).unwrap();
        assert_eq!(ck.params.config, p.config);
    }
}
