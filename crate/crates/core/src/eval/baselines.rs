//! Competing region-focus strategies evaluated side by side: pixel-space
//! masking, drawn ellipse prompts, attention masking, feature masking, and
//! the alpha channel itself.

use ndarray::{Array2, Array3};

use crate::data::BoxAnnotation;
use crate::image::RgbaImage;
use crate::mask::pool_mask;
use crate::model::{
    encode_image, feature_masked_encode, masked_last_attention_encode, EncoderParams,
};
use crate::{Error, Result};

use super::classify::{classify_embeddings, ClassPromptSet};
use super::dataset::EvalSet;
use super::metrics::{ClassifyOutcome, EvalReport, ReportRow};

/// Replace background pixels with a fill color; the output does not use the
/// alpha channel (forced to all ones).
pub fn image_level_mask_baseline(
    image: &RgbaImage,
    mask: &Array2<f64>,
    fill: [f64; 3],
) -> Result<RgbaImage> {
    if mask.dim() != image.alpha.dim() {
        return Err(Error::Shape("mask dims do not match image".into()));
    }
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Input("image-level masking requires a binary mask".into()));
    }
    let (h, w, _) = image.rgb.dim();
    let mut rgb = image.rgb.clone();
    for y in 0..h {
        for x in 0..w {
            if mask[[y, x]] == 0.0 {
                for c in 0..3 {
                    rgb[[y, x, c]] = fill[c];
                }
            }
        }
    }
    RgbaImage::with_full_alpha(rgb)
}

/// Rasterize an ellipse annulus inscribed in the box (enlarged about its
/// center) onto the RGB channels. A pixel is on the annulus iff it lies
/// inside the outer ellipse (semi-axes + w/2) but not inside the inner one
/// (semi-axes - w/2). The output does not use the alpha channel.
pub fn red_circle_baseline(
    image: &RgbaImage,
    bbox: &BoxAnnotation,
    stroke_width: f64,
    color: [f64; 3],
    enlarge: f64,
) -> Result<RgbaImage> {
    let (h, w, _) = image.rgb.dim();
    bbox.validate(h, w)?;
    if !(stroke_width > 0.0) || enlarge < 1.0 {
        return Err(Error::Input("stroke width must be positive and enlarge >= 1".into()));
    }
    let cx = (bbox.x0 + bbox.x1) as f64 / 2.0;
    let cy = (bbox.y0 + bbox.y1) as f64 / 2.0;
    let rx = bbox.width() as f64 / 2.0 * enlarge;
    let ry = bbox.height() as f64 / 2.0 * enlarge;
    let half = stroke_width / 2.0;

    let mut rgb = image.rgb.clone();
    for y in 0..h {
        for x in 0..w {
            if annulus_contains(x, y, cx, cy, rx, ry, half) {
                for c in 0..3 {
                    rgb[[y, x, c]] = color[c];
                }
            }
        }
    }
    RgbaImage::with_full_alpha(rgb)
}

/// Outer-minus-inner ellipse containment test at a pixel center.
pub fn annulus_contains(x: usize, y: usize, cx: f64, cy: f64, rx: f64, ry: f64, half: f64) -> bool {
    let px = x as f64 + 0.5 - cx;
    let py = y as f64 + 0.5 - cy;
    let inside = |ax: f64, ay: f64| -> bool {
        if ax <= 0.0 || ay <= 0.0 {
            return false;
        }
        (px / ax).powi(2) + (py / ay).powi(2) <= 1.0
    };
    inside(rx + half, ry + half) && !inside(rx - half, ry - half)
}

/// The six comparison rows, in report order.
pub const BASELINE_ROWS: [&str; 6] = [
    "original",
    "image-masked",
    "red-circle",
    "attn-masked",
    "feature-masked",
    "alpha",
];

pub struct BaselineOptions {
    /// Fill color for image-level masking; defaults to the dataset mean.
    pub fill: Option<[f64; 3]>,
    pub stroke_width: f64,
    pub circle_color: [f64; 3],
    pub circle_enlarge: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            fill: None,
            stroke_width: 2.0,
            circle_color: [0.9, 0.05, 0.05],
            circle_enlarge: 1.1,
        }
    }
}

/// Mean color over every region image of the set.
pub fn dataset_mean_color(set: &EvalSet) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for r in &set.regions {
        let (h, w, _) = r.rgb.dim();
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    sum[c] += r.rgb[[y, x, c]];
                }
            }
        }
        count += h * w;
    }
    if count == 0 {
        return [0.5; 3];
    }
    [sum[0] / count as f64, sum[1] / count as f64, sum[2] / count as f64]
}

/// Classify every region under each strategy and assemble one table.
pub fn compare_baselines(
    set: &EvalSet,
    prompts: &ClassPromptSet,
    params: &EncoderParams,
    opts: &BaselineOptions,
    config_hash: &str,
    seed: u64,
) -> Result<EvalReport> {
    let fill = opts.fill.unwrap_or_else(|| dataset_mean_color(set));
    let patch = params.config.patch;

    let mut rows = Vec::with_capacity(BASELINE_ROWS.len());
    for &row_name in BASELINE_ROWS.iter() {
        let mut embs = Vec::with_capacity(set.regions.len());
        let mut labels = Vec::with_capacity(set.regions.len());
        for region in &set.regions {
            let (h, w) = region.mask.dim();
            let full = RgbaImage::new(region.rgb.clone(), Array2::ones((h, w)))?;
            let emb = match row_name {
                "original" => encode_image(&full, params)?,
                "image-masked" => {
                    let masked = image_level_mask_baseline(&full, &region.mask, fill)?;
                    encode_image(&masked, params)?
                }
                "red-circle" => {
                    let drawn = red_circle_baseline(
                        &full,
                        &region.bbox,
                        opts.stroke_width,
                        opts.circle_color,
                        opts.circle_enlarge,
                    )?;
                    encode_image(&drawn, params)?
                }
                "attn-masked" => {
                    let m = pool_mask(&region.mask, patch)?;
                    masked_last_attention_encode(&full, &m, params)?
                }
                "feature-masked" => {
                    let m = pool_mask(&region.mask, patch)?;
                    feature_masked_encode(&full, &m, params)?
                }
                "alpha" => {
                    let focused = RgbaImage::new(region.rgb.clone(), region.mask.clone())?;
                    encode_image(&focused, params)?
                }
                _ => unreachable!(),
            };
            embs.push(emb);
            labels.push(region.class);
        }
        let outcome = classify_embeddings(&embs, &labels, prompts)?;
        rows.push(ReportRow {
            name: row_name.to_string(),
            metrics: outcome_metrics(&outcome),
        });
    }

    let report = EvalReport {
        title: "baseline-comparison".into(),
        config_hash: config_hash.to_string(),
        seed,
        rows,
    };
    report.validate()?;
    Ok(report)
}

pub fn outcome_metrics(o: &ClassifyOutcome) -> Vec<(String, f64)> {
    vec![
        ("top1_acc".into(), o.top1),
        ("top5_acc".into(), o.top5),
        ("mean_per_class_acc".into(), o.mean_per_class),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SceneSpec;
    use crate::eval::classify::{ClassPromptSet, DEFAULT_TEMPLATE};
    use crate::eval::dataset::build_eval_set;
    use crate::model::ArchConfig;
    use crate::rng::SeedStreams;

    fn tiny_params() -> EncoderParams {
        let mut rng = SeedStreams::new(0).stream("init");
        EncoderParams::init(ArchConfig { image_size: 32, ..ArchConfig::tiny() }, &mut rng)
    }

    fn sample_image(seed: u64) -> (RgbaImage, Array2<f64>, BoxAnnotation) {
        let spec = SceneSpec::default();
        let set = build_eval_set(&spec, 1, 100 + seed, &SeedStreams::new(seed)).unwrap();
        let r = &set.regions[0];
        let (h, w) = r.mask.dim();
        (
            RgbaImage::new(r.rgb.clone(), Array2::ones((h, w))).unwrap(),
            r.mask.clone(),
            r.bbox.clone(),
        )
    }

    #[test]
    fn mask_of_all_ones_leaves_image_unchanged() {
        let (img, _, _) = sample_image(1);
        let (h, w) = img.alpha.dim();
        let out = image_level_mask_baseline(&img, &Array2::ones((h, w)), [0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.rgb, img.rgb);
        assert!(out.alpha.iter().all(|&v| v == 1.0));
    }

    /// Per-pixel comparison oracle: every background pixel equals the fill.
    #[test]
    fn background_pixels_equal_fill_exactly() {
        let (img, mask, _) = sample_image(2);
        let fill = [0.25, 0.5, 0.75];
        let out = image_level_mask_baseline(&img, &mask, fill).unwrap();
        for ((y, x), &m) in mask.indexed_iter() {
            for c in 0..3 {
                if m == 0.0 {
                    assert_eq!(out.rgb[[y, x, c]], fill[c]);
                } else {
                    assert_eq!(out.rgb[[y, x, c]], img.rgb[[y, x, c]]);
                }
            }
        }
    }

    /// Locality plus the distance-test oracle: exactly the annulus pixels
    /// change, and the annulus membership matches an independent
    /// normalized-distance check.
    #[test]
    fn red_circle_only_touches_annulus_pixels() {
        let (img, _, bbox) = sample_image(3);
        let (stroke, color, enlarge) = (2.0, [0.9, 0.05, 0.05], 1.1);
        let out = red_circle_baseline(&img, &bbox, stroke, color, enlarge).unwrap();

        let cx = (bbox.x0 + bbox.x1) as f64 / 2.0;
        let cy = (bbox.y0 + bbox.y1) as f64 / 2.0;
        let rx = bbox.width() as f64 / 2.0 * enlarge;
        let ry = bbox.height() as f64 / 2.0 * enlarge;
        let (h, w) = img.alpha.dim();
        let mut on_band_count = 0;
        for y in 0..h {
            for x in 0..w {
                // Independent oracle: inside outer ellipse, outside inner.
                let px = x as f64 + 0.5 - cx;
                let py = y as f64 + 0.5 - cy;
                let q = |ax: f64, ay: f64| (px / ax).powi(2) + (py / ay).powi(2);
                let outer_ok = q(rx + stroke / 2.0, ry + stroke / 2.0) <= 1.0;
                let inner_rx = rx - stroke / 2.0;
                let inner_ry = ry - stroke / 2.0;
                let inner_in = inner_rx > 0.0 && inner_ry > 0.0 && q(inner_rx, inner_ry) <= 1.0;
                let on_band = outer_ok && !inner_in;
                for c in 0..3 {
                    if on_band {
                        assert_eq!(out.rgb[[y, x, c]], color[c]);
                    } else {
                        assert_eq!(out.rgb[[y, x, c]], img.rgb[[y, x, c]]);
                    }
                }
                on_band_count += usize::from(on_band);
            }
        }
        assert!(on_band_count > 0, "annulus must touch some pixels");
    }

    #[test]
    fn transforms_keep_values_in_unit_range() {
        let (img, mask, bbox) = sample_image(4);
        let a = image_level_mask_baseline(&img, &mask, [1.0, 1.0, 1.0]).unwrap();
        let b = red_circle_baseline(&img, &bbox, 3.0, [1.0, 0.0, 0.0], 1.2).unwrap();
        for v in a.rgb.iter().chain(b.rgb.iter()) {
            assert!((0.0..=1.0).contains(v));
        }
    }

    /// Zero-init model: the alpha row equals the original row bitwise.
    #[test]
    fn zero_init_alpha_row_equals_original_row() {
        let params = tiny_params();
        let spec = SceneSpec::default();
        let set = build_eval_set(&spec, 4, 0, &SeedStreams::new(10)).unwrap();
        let prompts =
            ClassPromptSet::build(&set.classes, &[DEFAULT_TEMPLATE.to_string()], &params).unwrap();
        let report = compare_baselines(&set, &prompts, &params, &BaselineOptions::default(), "h", 0)
            .unwrap();
        assert_eq!(report.rows.len(), 6);
        let original = &report.rows[0];
        let alpha = &report.rows[5];
        assert_eq!(original.metrics, alpha.metrics);
        for (expected, row) in BASELINE_ROWS.iter().zip(report.rows.iter()) {
            assert_eq!(row.name, *expected);
        }
    }
}
