//! Parameter-group construction: which tensors train, and at which rate.
//!
//! Three groups partition the model exactly:
//! 1. the alpha patch kernel, trainable at `lr_alpha`;
//! 2. the trailing `unfreeze_blocks` image blocks plus, when any block is
//!    unfrozen, the image-side stem and head (RGB kernel, CLS, positional
//!    embedding, final norm, projection), trainable at `lr_rest`;
//! 3. everything else, frozen: the whole text tower and any remaining image
//!    blocks. With `unfreeze_blocks = 0` only the alpha kernel trains.
//!
//! The temperature is not a tensor, so it sits in no group and can never be
//! updated.

use crate::model::EncoderParams;
use crate::Result;

use super::config::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Alpha,
    ImageRest,
    Frozen,
}

#[derive(Debug, Clone)]
pub struct ParamGroup {
    pub kind: GroupKind,
    pub lr: f64,
    pub trainable: bool,
    pub tensors: Vec<String>,
}

/// Group membership of a named tensor.
pub fn group_of(name: &str, layers: usize, unfreeze_blocks: usize) -> GroupKind {
    if name == "image.alpha_kernel" {
        return GroupKind::Alpha;
    }
    if name.starts_with("text.") {
        return GroupKind::Frozen;
    }
    if let Some(rest) = name.strip_prefix("image.blocks.") {
        let l: usize = rest.split('.').next().unwrap_or("").parse().unwrap_or(usize::MAX);
        if l < layers && l >= layers - unfreeze_blocks {
            return GroupKind::ImageRest;
        }
        return GroupKind::Frozen;
    }
    // Image stem and head train only when at least one block is unfrozen.
    if unfreeze_blocks > 0 {
        GroupKind::ImageRest
    } else {
        GroupKind::Frozen
    }
}

/// Layer norm scales and shifts are excluded from weight decay.
pub fn is_norm_param(name: &str) -> bool {
    name.contains(".ln1.") || name.contains(".ln2.") || name.contains(".ln_post.") || name.contains(".ln_final.")
}

pub fn make_param_groups(params: &EncoderParams, cfg: &TrainConfig) -> Result<Vec<ParamGroup>> {
    cfg.validate(params.config.layers)?;
    let mut alpha = Vec::new();
    let mut rest = Vec::new();
    let mut frozen = Vec::new();
    for (name, _) in params.tensors() {
        match group_of(&name, params.config.layers, cfg.unfreeze_blocks) {
            GroupKind::Alpha => alpha.push(name),
            GroupKind::ImageRest => rest.push(name),
            GroupKind::Frozen => frozen.push(name),
        }
    }
    Ok(vec![
        ParamGroup { kind: GroupKind::Alpha, lr: cfg.lr_alpha, trainable: true, tensors: alpha },
        ParamGroup { kind: GroupKind::ImageRest, lr: cfg.lr_rest, trainable: true, tensors: rest },
        ParamGroup { kind: GroupKind::Frozen, lr: 0.0, trainable: false, tensors: frozen },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchConfig;
    use crate::rng::SeedStreams;

    fn params() -> EncoderParams {
        let mut rng = SeedStreams::new(0).stream("init");
        EncoderParams::init(ArchConfig::tiny(), &mut rng)
    }

    fn cfg(unfreeze: usize) -> TrainConfig {
        TrainConfig { unfreeze_blocks: unfreeze, ..TrainConfig::default() }
    }

    #[test]
    fn groups_partition_all_tensors() {
        let p = params();
        for unfreeze in 0..=p.config.layers {
            let groups = make_param_groups(&p, &cfg(unfreeze)).unwrap();
            let mut seen: Vec<&String> = groups.iter().flat_map(|g| g.tensors.iter()).collect();
            seen.sort();
            let mut all: Vec<String> = p.tensors().iter().map(|(n, _)| n.clone()).collect();
            all.sort();
            assert_eq!(seen.len(), all.len());
            for (a, b) in seen.iter().zip(all.iter()) {
                assert_eq!(**a, *b);
            }
        }
    }

    #[test]
    fn default_rates_follow_the_recipe() {
        let p = params();
        let groups = make_param_groups(&p, &TrainConfig { unfreeze_blocks: 2, ..Default::default() }).unwrap();
        assert_eq!(groups[0].lr, 2e-4);
        assert_eq!(groups[1].lr, 2e-6);
        assert_eq!(groups[0].tensors, vec!["image.alpha_kernel".to_string()]);
    }

    #[test]
    fn unfreeze_zero_trains_only_the_alpha_kernel() {
        let p = params();
        let groups = make_param_groups(&p, &cfg(0)).unwrap();
        assert_eq!(groups[0].tensors, vec!["image.alpha_kernel".to_string()]);
        assert!(groups[1].tensors.is_empty());
        let trainable: usize = groups.iter().filter(|g| g.trainable).map(|g| g.tensors.len()).sum();
        assert_eq!(trainable, 1);
    }

    #[test]
    fn full_unfreeze_trains_all_image_blocks_but_no_text() {
        let p = params();
        let layers = p.config.layers;
        let groups = make_param_groups(&p, &cfg(layers)).unwrap();
        for l in 0..layers {
            assert!(groups[1].tensors.iter().any(|n| n.starts_with(&format!("image.blocks.{l}."))));
        }
        assert!(groups[1].tensors.iter().any(|n| n == "image.rgb_kernel"));
        assert!(groups[2].tensors.iter().all(|n| n.starts_with("text.")));
        assert!(!groups[2].tensors.is_empty());
    }

    #[test]
    fn partial_unfreeze_keeps_leading_blocks_frozen() {
        let p = params();
        let groups = make_param_groups(&p, &cfg(1)).unwrap();
        assert!(groups[2].tensors.iter().any(|n| n.starts_with("image.blocks.0.")));
        assert!(groups[1].tensors.iter().any(|n| n.starts_with("image.blocks.1.")));
    }

    #[test]
    fn unfreeze_beyond_depth_is_a_config_error() {
        let p = params();
        assert!(make_param_groups(&p, &cfg(p.config.layers + 1)).is_err());
    }

    #[test]
    fn norm_params_are_detected() {
        assert!(is_norm_param("image.blocks.0.ln1.gamma"));
        assert!(is_norm_param("text.ln_final.beta"));
        assert!(!is_norm_param("image.rgb_kernel"));
        assert!(!is_norm_param("image.blocks.0.mlp.w1"));
    }
}
