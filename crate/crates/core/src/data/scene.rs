//! Procedural scene generation: colored shapes on a cluttered background,
//! with per-region masks and grammar captions. Deterministic per
//! (seed, scene index, spec).

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::tokenizer::{Vocabulary, COLOR_TABLE, SHAPE_NAMES};
use crate::rng::SeedStreams;
use crate::{Error, Result};

use super::sample::BoxAnnotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapPolicy {
    /// Shape masks must be pairwise disjoint (bounded retries).
    NonOverlapping,
    /// Later shapes may paint over earlier ones.
    Allow,
}

/// Knobs of the synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub canvas: usize,
    pub shapes_min: usize,
    pub shapes_max: usize,
    /// Color names drawn from the builtin table; pairwise distinct within a
    /// scene, so the palette must cover `shapes_max`.
    pub palette: Vec<String>,
    pub kinds: Vec<ShapeKind>,
    pub overlap: OverlapPolicy,
    /// Per-region caption template with `{color}` and `{shape}` holes.
    pub caption_template: String,
    /// Background clutter amplitude in [0, 1).
    pub background_noise: f64,
    /// Per-pixel foreground color jitter amplitude.
    pub color_jitter: f64,
    /// Shape half-size range in pixels.
    pub min_radius: usize,
    pub max_radius: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            canvas: 32,
            shapes_min: 2,
            shapes_max: 3,
            palette: ["red", "green", "blue", "yellow", "cyan", "magenta"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            kinds: vec![ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle],
            overlap: OverlapPolicy::NonOverlapping,
            caption_template: "a {color} {shape}".into(),
            background_noise: 0.25,
            color_jitter: 0.10,
            min_radius: 3,
            max_radius: 6,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shapes_min == 0 || self.shapes_min > self.shapes_max {
            return Err(Error::Config(format!(
                "shape count range [{}, {}] invalid",
                self.shapes_min, self.shapes_max
            )));
        }
        if self.palette.is_empty() {
            return Err(Error::Config("palette is empty".into()));
        }
        for name in &self.palette {
            if Vocabulary::color_rgb(name).is_none() {
                return Err(Error::Config(format!("unknown palette color {name:?}")));
            }
        }
        let mut dedup = self.palette.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() != self.palette.len() {
            return Err(Error::Config("palette has duplicate colors".into()));
        }
        if self.palette.len() < self.shapes_max {
            return Err(Error::Config(format!(
                "palette of {} colors cannot keep {} shapes distinct",
                self.palette.len(),
                self.shapes_max
            )));
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("no shape kinds enabled".into()));
        }
        if !self.caption_template.contains("{color}") || !self.caption_template.contains("{shape}") {
            return Err(Error::Config("caption template needs {color} and {shape}".into()));
        }
        if !(0.0..1.0).contains(&self.background_noise) || !(0.0..1.0).contains(&self.color_jitter) {
            return Err(Error::Config("noise amplitudes must be in [0, 1)".into()));
        }
        if self.min_radius < 2 || self.min_radius > self.max_radius {
            return Err(Error::Config(format!(
                "radius range [{}, {}] invalid",
                self.min_radius, self.max_radius
            )));
        }
        if self.canvas < 2 * self.max_radius + 2 {
            return Err(Error::Config(format!(
                "canvas {} too small for max radius {}",
                self.canvas, self.max_radius
            )));
        }
        Ok(())
    }

    pub fn region_caption(&self, color: &str, shape: ShapeKind) -> String {
        self.caption_template
            .replace("{color}", color)
            .replace("{shape}", shape.name())
    }

    /// All color-shape class labels this spec can produce, in canonical
    /// order (builtin color order crossed with shape order).
    pub fn class_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (color, _) in COLOR_TABLE.iter() {
            if self.palette.iter().any(|p| p == color) {
                for shape in SHAPE_NAMES.iter() {
                    out.push(format!("{color} {shape}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SceneShape {
    pub kind: ShapeKind,
    pub color_name: String,
    /// Binary mask over the canvas.
    pub mask: Array2<f64>,
    /// Tight half-open bounding box.
    pub bbox: BoxAnnotation,
    pub caption: String,
    /// Index into `SceneSpec::class_labels()`.
    pub class: usize,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub rgb: Array3<f64>,
    pub shapes: Vec<SceneShape>,
    pub whole_caption: String,
}

/// Rasterize one shape with pixel-center point tests. Center is real-valued;
/// `r` is the half-size.
pub fn rasterize_shape(
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    r: f64,
    canvas: usize,
) -> Array2<f64> {
    let mut mask = Array2::zeros((canvas, canvas));
    for y in 0..canvas {
        for x in 0..canvas {
            let px = x as f64 + 0.5 - cx;
            let py = y as f64 + 0.5 - cy;
            let inside = match kind {
                ShapeKind::Circle => px * px + py * py <= r * r,
                ShapeKind::Square => px.abs() <= r && py.abs() <= r,
                ShapeKind::Triangle => {
                    // Apex-up isoceles triangle inscribed in the 2r box.
                    let t = (py + r) / (2.0 * r);
                    (0.0..=1.0).contains(&t) && px.abs() <= r * t
                }
            };
            if inside {
                mask[[y, x]] = 1.0;
            }
        }
    }
    mask
}

fn masks_intersect(a: &Array2<f64>, b: &Array2<f64>) -> bool {
    a.iter().zip(b.iter()).any(|(&x, &y)| x == 1.0 && y == 1.0)
}

const PLACEMENT_RETRIES: usize = 100;

/// Generate the scene at `index` under `streams`. Bit-identical for equal
/// (seed, index, spec).
pub fn generate_scene(streams: &SeedStreams, index: u64, spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng: ChaCha8Rng = streams.stream_indexed("scene", index);
    let class_labels = spec.class_labels();

    // Background clutter.
    let c = spec.canvas;
    let mut rgb = Array3::zeros((c, c, 3));
    for v in rgb.iter_mut() {
        *v = rng.random::<f64>() * spec.background_noise;
    }

    let count = rng.random_range(spec.shapes_min..=spec.shapes_max);
    let mut colors = spec.palette.clone();
    colors.shuffle(&mut rng);
    colors.truncate(count);

    let mut shapes: Vec<SceneShape> = Vec::with_capacity(count);
    for color_name in colors {
        let kind = spec.kinds[rng.random_range(0..spec.kinds.len())];
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let r = rng.random_range(spec.min_radius..=spec.max_radius) as f64;
            let lo = r + 0.5;
            let hi = c as f64 - r - 0.5;
            let cx = lo + rng.random::<f64>() * (hi - lo);
            let cy = lo + rng.random::<f64>() * (hi - lo);
            let mask = rasterize_shape(kind, cx, cy, r, c);
            if mask.iter().all(|&v| v == 0.0) {
                continue;
            }
            if spec.overlap == OverlapPolicy::NonOverlapping
                && shapes.iter().any(|s| masks_intersect(&s.mask, &mask))
            {
                continue;
            }
            let caption = spec.region_caption(&color_name, kind);
            let label = format!("{color_name} {}", kind.name());
            let class = class_labels
                .iter()
                .position(|l| *l == label)
                .expect("label in class set");
            let bbox = BoxAnnotation::of_mask(&mask, caption.clone()).expect("non-empty mask");

            // Paint with per-pixel jitter.
            let base = Vocabulary::color_rgb(&color_name).expect("validated color");
            for ((y, x), &m) in mask.indexed_iter() {
                if m == 1.0 {
                    for ch in 0..3 {
                        let jitter = (rng.random::<f64>() - 0.5) * spec.color_jitter;
                        rgb[[y, x, ch]] = (base[ch] + jitter).clamp(0.0, 1.0);
                    }
                }
            }

            shapes.push(SceneShape { kind, color_name: color_name.clone(), mask, bbox, caption, class });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place shape after {PLACEMENT_RETRIES} retries (scene {index})"
            )));
        }
    }

    let whole_caption = shapes
        .iter()
        .map(|s| s.caption.as_str())
        .collect::<Vec<_>>()
        .join(" and ");

    Ok(Scene { rgb, shapes, whole_caption })
}
