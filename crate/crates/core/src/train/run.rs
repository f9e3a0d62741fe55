//! The deterministic training loop.
//!
//! One seed drives everything through named streams; each step's batch is
//! drawn from a stream indexed by the step number, so randomness is
//! stateless per step and a resumed run draws exactly what the
//! uninterrupted run would have drawn.

use std::path::Path;

use crate::data::{sample_training_batch, RgbaSample};
use crate::model::{batch_loss_and_grads, EncoderParams, Pair};
use crate::rng::SeedStreams;
use crate::{Error, Result};

use super::adamw::{optimizer_step, GroupLr, OptimizerState};
use super::checkpoint::{checkpoint_save, TrainMeta};
use super::config::TrainConfig;
use super::groups::{group_of, GroupKind};
use super::schedule::cosine_lr;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr_alpha: f64,
    pub lr_rest: f64,
    pub loss: f64,
}

/// Line-delimited loss log; f64 values print in shortest-roundtrip form so
/// equal runs produce byte-identical logs.
pub fn render_loss_log(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "step={} lr_alpha={} lr_rest={} loss={}\n",
            r.step, r.lr_alpha, r.lr_rest, r.loss
        ));
    }
    out
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub state: OptimizerState,
    pub log: Vec<StepRecord>,
    /// Steps executed so far across resumes.
    pub next_step: usize,
    pub schedule_total: usize,
}

/// Where to start and stop, and what to do on divergence.
#[derive(Debug, Default)]
pub struct TrainOptions<'a> {
    /// Resume state: optimizer moments plus the next step index.
    pub resume: Option<(OptimizerState, usize)>,
    /// Stop after this step index (exclusive); later steps resume elsewhere.
    pub stop_after: Option<usize>,
    /// On divergence, write the last good state here before failing.
    pub abort_checkpoint: Option<&'a Path>,
}

/// Steps per epoch over the region pool.
pub fn steps_per_epoch(region_len: usize, batch: usize) -> usize {
    (region_len / batch).max(1)
}

/// Train over the sampled batches: encode both towers, contrastive loss,
/// backprop, AdamW with per-group cosine learning rates. Deterministic for
/// a fixed seed; the text tower stays frozen throughout.
pub fn train(
    mut params: EncoderParams,
    region: &[RgbaSample],
    whole: &[RgbaSample],
    cfg: &TrainConfig,
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate(params.config.layers)?;
    if region.is_empty() && (cfg.r_s < 1.0 || whole.is_empty()) {
        return Err(Error::Input("training pool is empty".into()));
    }

    let streams = SeedStreams::new(cfg.seed);
    let total = cfg
        .schedule_total
        .unwrap_or(cfg.epochs * steps_per_epoch(region.len(), cfg.batch));
    let (mut state, start_step) = match opts.resume {
        Some((state, step)) => (state, step),
        None => (OptimizerState::new(params.config.clone()), 0),
    };
    let end_step = opts.stop_after.unwrap_or(total).min(total);

    let mut log = Vec::with_capacity(end_step.saturating_sub(start_step));
    for step in start_step..end_step {
        let mut rng = streams.stream_indexed("batch", step as u64);
        let batch = sample_training_batch(region, whole, cfg.r_s, cfg.batch, &mut rng)?;
        let pairs: Vec<Pair> = batch
            .iter()
            .map(|s| Pair { image: s.image.clone(), tokens: s.tokens.clone() })
            .collect();

        let (loss, mut grads) = batch_loss_and_grads(&params, &pairs)?;
        if !loss.is_finite() {
            abort_with_checkpoint(&params, &state, cfg, step, total, opts.abort_checkpoint)?;
            return Err(Error::Numeric(format!("loss diverged at step {step}")));
        }

        if let Some(clip) = cfg.grad_clip {
            clip_trainable(&mut grads, params.config.layers, cfg.unfreeze_blocks, clip);
        }

        let lr_alpha = cosine_lr(step, total, cfg.lr_alpha)?;
        let lr_rest = cosine_lr(step, total, cfg.lr_rest)?;
        if let Err(err) = optimizer_step(
            &mut params,
            &grads,
            &mut state,
            GroupLr { alpha: lr_alpha, rest: lr_rest },
            cfg.weight_decay,
            cfg.unfreeze_blocks,
        ) {
            abort_with_checkpoint(&params, &state, cfg, step, total, opts.abort_checkpoint)?;
            return Err(err);
        }

        log.push(StepRecord { step, lr_alpha, lr_rest, loss });
    }

    Ok(TrainOutcome { params, state, log, next_step: end_step, schedule_total: total })
}

fn abort_with_checkpoint(
    params: &EncoderParams,
    state: &OptimizerState,
    cfg: &TrainConfig,
    step: usize,
    total: usize,
    path: Option<&Path>,
) -> Result<()> {
    if let Some(path) = path {
        let meta = TrainMeta { cfg: cfg.clone(), next_step: step, schedule_total: total };
        checkpoint_save(params, state, &meta, path)?;
        log::warn!("divergence at step {step}: last good state checkpointed to {}", path.display());
    }
    Ok(())
}

fn clip_trainable(grads: &mut EncoderParams, layers: usize, unfreeze: usize, clip: f64) {
    let mut sq = 0.0;
    for (name, g) in grads.tensors() {
        if group_of(&name, layers, unfreeze) != GroupKind::Frozen {
            sq += g.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > clip {
        let scale = clip / norm;
        for (name, g) in grads.tensors_mut() {
            if group_of(&name, layers, unfreeze) != GroupKind::Frozen {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
}
