//! Adam with decoupled weight decay over the three parameter groups.
//!
//! The decay is multiplicative (`p <- p - lr * wd * p`) and applied before
//! the adaptive update term; norm parameters are excluded from decay.
//! Frozen tensors are untouched, moments included.

use crate::model::EncoderParams;
use crate::{Error, Result};

use super::groups::{group_of, is_norm_param, GroupKind};

/// Optimizer constants. The published recipe names AdamW and the decay but
/// not these; they are this artifact's defaults.
pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.98;
pub const EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    /// First-moment accumulators, same shapes as the parameters.
    pub m: EncoderParams,
    /// Second-moment accumulators.
    pub v: EncoderParams,
    /// Completed optimizer steps.
    pub step: u64,
}

impl OptimizerState {
    pub fn new(config: crate::model::ArchConfig) -> Self {
        Self {
            m: EncoderParams::zeros(config.clone()),
            v: EncoderParams::zeros(config),
            step: 0,
        }
    }
}

/// Per-group learning rates for one step (already scheduled).
#[derive(Debug, Clone, Copy)]
pub struct GroupLr {
    pub alpha: f64,
    pub rest: f64,
}

/// One AdamW step in place. Aborts (leaving parameters, moments and the
/// step counter untouched) if any trainable gradient is non-finite.
pub fn optimizer_step(
    params: &mut EncoderParams,
    grads: &EncoderParams,
    state: &mut OptimizerState,
    lr: GroupLr,
    weight_decay: f64,
    unfreeze_blocks: usize,
) -> Result<()> {
    let layers = params.config.layers;

    // Validate before mutating anything.
    for (name, g) in grads.tensors() {
        let kind = group_of(&name, layers, unfreeze_blocks);
        if kind == GroupKind::Frozen {
            continue;
        }
        if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("gradient {name}[{pos}]")));
        }
    }

    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);

    let p_tensors = params.tensors_mut();
    let g_tensors = grads.tensors();
    let m_tensors = state.m.tensors_mut();
    let v_tensors = state.v.tensors_mut();
    debug_assert_eq!(p_tensors.len(), g_tensors.len());

    for (((pt, gt), mt), vt) in p_tensors
        .into_iter()
        .zip(g_tensors.into_iter())
        .zip(m_tensors.into_iter())
        .zip(v_tensors.into_iter())
    {
        let (name, p) = pt;
        let (_, g) = gt;
        let (_, m) = mt;
        let (_, v) = vt;
        let kind = group_of(&name, layers, unfreeze_blocks);
        let lr_t = match kind {
            GroupKind::Alpha => lr.alpha,
            GroupKind::ImageRest => lr.rest,
            GroupKind::Frozen => continue,
        };
        let decay = if weight_decay > 0.0 && !is_norm_param(&name) {
            1.0 - lr_t * weight_decay
        } else {
            1.0
        };
        for i in 0..p.len() {
            if decay != 1.0 {
                p[i] *= decay;
            }
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr_t * m_hat / (v_hat.sqrt() + EPS);
        }
    }

    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchConfig;
    use crate::rng::SeedStreams;

    fn setup() -> (EncoderParams, EncoderParams, OptimizerState) {
        let mut rng = SeedStreams::new(0).stream("init");
        let p = EncoderParams::init(ArchConfig::tiny(), &mut rng);
        let g = EncoderParams::zeros(ArchConfig::tiny());
        let s = OptimizerState::new(ArchConfig::tiny());
        (p, g, s)
    }

    #[test]
    fn zero_grads_zero_decay_leave_params_unchanged() {
        let (mut p, g, mut s) = setup();
        let before = p.clone();
        optimizer_step(&mut p, &g, &mut s, GroupLr { alpha: 1e-3, rest: 1e-3 }, 0.0, 2).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    /// Closed-form single-step oracle on one scalar coordinate.
    #[test]
    fn single_step_matches_hand_computed_update() {
        let (mut p, mut g, mut s) = setup();
        // Perturb one alpha-kernel coordinate's gradient.
        let gval = 0.37;
        g.alpha_kernel[[0, 0]] = gval;
        let p0 = p.alpha_kernel[[0, 0]];
        let lr = 2e-4;
        optimizer_step(&mut p, &g, &mut s, GroupLr { alpha: lr, rest: 1e-6 }, 0.0, 0).unwrap();

        let m = (1.0 - BETA1) * gval;
        let v = (1.0 - BETA2) * gval * gval;
        let m_hat = m / (1.0 - BETA1);
        let v_hat = v / (1.0 - BETA2);
        let expect = p0 - lr * m_hat / (v_hat.sqrt() + EPS);
        assert!((p.alpha_kernel[[0, 0]] - expect).abs() < 1e-15);
    }

    /// With zero grads and decay on, every trainable non-norm parameter is
    /// scaled by exactly (1 - lr * wd).
    #[test]
    fn decoupled_decay_scales_trainable_params_exactly() {
        let (mut p, g, mut s) = setup();
        let before = p.clone();
        let layers = p.config.layers;
        let (lr, wd) = (1e-2, 2e-2);
        optimizer_step(&mut p, &g, &mut s, GroupLr { alpha: lr, rest: lr }, wd, layers).unwrap();
        let factor = 1.0 - lr * wd;
        for ((name, after), (_, prev)) in p.tensors().iter().zip(before.tensors().iter()) {
            let frozen = name.starts_with("text.");
            for (a, b) in after.iter().zip(prev.iter()) {
                if frozen {
                    assert_eq!(a, b, "{name} should be frozen");
                } else if is_norm_param(name) {
                    assert_eq!(a, b, "{name} should not decay");
                } else {
                    assert_eq!(*a, *b * factor, "{name}");
                }
            }
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let (mut p, mut g, mut s) = setup();
        g.rgb_kernel[[0, 0]] = f64::NAN;
        let before = p.clone();
        let err = optimizer_step(&mut p, &g, &mut s, GroupLr { alpha: 1e-3, rest: 1e-3 }, 0.02, 2);
        assert!(err.is_err());
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn frozen_text_tower_never_moves() {
        let (mut p, mut g, mut s) = setup();
        // Put gradients everywhere.
        for (_, slice) in g.tensors_mut() {
            for v in slice.iter_mut() {
                *v = 0.5;
            }
        }
        let text_before = p.text.clone();
        for _ in 0..3 {
            optimizer_step(&mut p, &g, &mut s, GroupLr { alpha: 1e-3, rest: 1e-3 }, 0.02, 2)
                .unwrap();
        }
        assert_eq!(p.text, text_before);
    }
}
