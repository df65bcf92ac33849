//! Procedural traffic signs on noisy backgrounds.
//!
//! Each sample draws its own ChaCha stream from `(seed, class, index)`, so
//! samples are reproducible individually and can be rendered in any order.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ingest::canonicalize;
use super::{Result, SignSet, SignsError};
use crate::imaging::{rasterize_vertices, save_png, write_annotation, PixelImage, PolygonAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Octagon,
    /// Point-down triangle.
    Triangle,
    Diamond,
    Rectangle,
}

impl FromStr for ShapeKind {
    type Err = SignsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "octagon" => Ok(Self::Octagon),
            "triangle" => Ok(Self::Triangle),
            "diamond" => Ok(Self::Diamond),
            "rectangle" => Ok(Self::Rectangle),
            other => Err(SignsError::InvalidInput(format!("unknown sign shape {other:?}"))),
        }
    }
}

impl ShapeKind {
    /// Outline centered at `(cx, cy)` with circumradius-like size `r`.
    pub fn outline(self, cx: f64, cy: f64, r: f64) -> Vec<[f64; 2]> {
        use std::f64::consts::PI;
        match self {
            ShapeKind::Octagon => (0..8)
                .map(|k| {
                    let a = PI / 8.0 + k as f64 * PI / 4.0;
                    [cx + r * a.cos(), cy + r * a.sin()]
                })
                .collect(),
            ShapeKind::Triangle => {
                let (dx, dy) = (r * (PI / 6.0).cos(), r * (PI / 6.0).sin());
                vec![[cx - dx, cy - dy], [cx + dx, cy - dy], [cx, cy + r]]
            }
            ShapeKind::Diamond => vec![[cx, cy - r], [cx + r, cy], [cx, cy + r], [cx - r, cy]],
            ShapeKind::Rectangle => {
                let hw = 0.75 * r;
                vec![[cx - hw, cy - r], [cx + hw, cy - r], [cx + hw, cy + r], [cx - hw, cy + r]]
            }
        }
    }
}

/// Dark or light marks painted inside the sign face, in units of the sign
/// size relative to its center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    None,
    /// One wide horizontal bar (lettering).
    Word,
    /// Two stacked horizontal bars.
    TwoLines,
    /// A vertical stroke with a branch (merge arrow).
    Branch,
    /// A stick figure: vertical stroke plus a crossbar near the bottom.
    Figure,
}

impl Glyph {
    fn rects(self) -> &'static [[f64; 4]] {
        // [x0, y0, x1, y1] relative to center, scaled by r
        match self {
            Glyph::None => &[],
            Glyph::Word => &[[-0.55, -0.12, 0.55, 0.12]],
            Glyph::TwoLines => &[[-0.45, -0.45, 0.45, -0.25], [-0.35, 0.0, 0.35, 0.35]],
            Glyph::Branch => &[[-0.07, -0.55, 0.07, 0.55], [0.05, -0.1, 0.35, 0.04]],
            Glyph::Figure => &[[-0.07, -0.5, 0.07, 0.2], [-0.35, 0.2, 0.35, 0.34], [-0.12, -0.62, 0.12, -0.45]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    /// File-name friendly key, e.g. `stop`.
    pub key: String,
    /// Ground-truth label written to annotations, e.g. `Stop`.
    pub name: String,
    pub shape: ShapeKind,
    pub fill: [u8; 3],
    pub border: [u8; 3],
    pub glyph: Glyph,
    pub glyph_color: [u8; 3],
}

impl ClassSpec {
    pub const PRESETS: [&'static str; 5] = ["stop", "yield", "merge", "pedestrian_crossing", "speed_limit"];

    pub fn preset(key: &str) -> Result<Self> {
        const RED: [u8; 3] = [200, 20, 30];
        const WHITE: [u8; 3] = [240, 240, 240];
        const BLACK: [u8; 3] = [20, 20, 20];
        const YELLOW: [u8; 3] = [245, 200, 20];
        let spec = |name: &str, shape, fill, border, glyph, glyph_color| Self {
            key: key.to_string(),
            name: name.to_string(),
            shape,
            fill,
            border,
            glyph,
            glyph_color,
        };
        Ok(match key {
            "stop" => spec("Stop", ShapeKind::Octagon, RED, WHITE, Glyph::Word, WHITE),
            "yield" => spec("Yield", ShapeKind::Triangle, YELLOW, WHITE, Glyph::None, WHITE),
            "merge" => spec("Merge", ShapeKind::Diamond, YELLOW, BLACK, Glyph::Branch, BLACK),
            "pedestrian_crossing" => spec("Ped. Crossing", ShapeKind::Diamond, YELLOW, BLACK, Glyph::Figure, BLACK),
            "speed_limit" => spec("Speed Limit 25", ShapeKind::Rectangle, WHITE, BLACK, Glyph::TwoLines, BLACK),
            other => {
                return Err(SignsError::InvalidInput(format!(
                    "unknown sign class {other:?} (known: {})",
                    Self::PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn all_presets() -> Vec<Self> {
        Self::PRESETS.iter().map(|k| Self::preset(k).expect("preset exists")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub classes: Vec<ClassSpec>,
    pub count_per_class: usize,
    /// The last `test_per_class` samples of each class form the test split.
    pub test_per_class: usize,
    pub seed: u64,
    /// Side of the rendered scene before canonical cropping.
    pub image_size: u32,
}

impl SyntheticConfig {
    pub fn new(classes: Vec<ClassSpec>, count_per_class: usize, seed: u64) -> Self {
        Self {
            classes,
            count_per_class,
            test_per_class: 0,
            seed,
            image_size: 256,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count_per_class == 0 {
            return Err(SignsError::InvalidInput("count per class must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(SignsError::InvalidInput("no sign classes given".into()));
        }
        if self.test_per_class > self.count_per_class {
            return Err(SignsError::InvalidInput("test split larger than class count".into()));
        }
        if self.image_size < 16 {
            return Err(SignsError::InvalidInput("image size must be at least 16".into()));
        }
        Ok(())
    }

    fn split_of(&self, index: usize) -> Split {
        if index >= self.count_per_class - self.test_per_class {
            Split::Test
        } else {
            Split::Train
        }
    }

    fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.classes.len())
            .flat_map(|c| (0..self.count_per_class).map(move |i| (c, i)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub set: SignSet,
    /// Indices into `set.records`.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn sample_id(spec: &ClassSpec, index: usize) -> String {
    format!("{}_{index:04}", spec.key)
}

/// Renders sample `index` of class `class_idx`: the raw scene and the sign
/// outline in normalized coordinates.
pub fn render_sample(cfg: &SyntheticConfig, class_idx: usize, index: usize) -> Result<(PixelImage, PolygonAnnotation)> {
    let spec = &cfg.classes[class_idx];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((class_idx as u64) << 32) | index as u64);

    // position ±5%, scale ±10%, brightness ±20%
    let cx = 0.5 + rng.random_range(-0.05..0.05);
    let cy = 0.5 + rng.random_range(-0.05..0.05);
    let r = 0.38 * rng.random_range(0.9..1.1);
    let brightness = rng.random_range(0.8..1.2);

    const BACKGROUNDS: [[f64; 3]; 4] = [[110.0, 150.0, 200.0], [80.0, 120.0, 70.0], [130.0, 130.0, 125.0], [170.0, 160.0, 140.0]];
    let base = BACKGROUNDS[rng.random_range(0..BACKGROUNDS.len())];
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
    let gradient = rng.random_range(-40.0..40.0);

    let n = cfg.image_size;
    let outline = spec.shape.outline(cx, cy, r);
    let inner = spec.shape.outline(cx, cy, r * 0.86);
    let outer_mask = rasterize_vertices(&outline, n, n)?;
    let inner_mask = rasterize_vertices(&inner, n, n)?;
    let glyphs: Vec<[f64; 4]> = spec
        .glyph
        .rects()
        .iter()
        .map(|&[x0, y0, x1, y1]| [cx + x0 * r, cy + y0 * r, cx + x1 * r, cy + y1 * r])
        .collect();

    let mut data = Vec::with_capacity((n * n * 3) as usize);
    for y in 0..n {
        let ny = (y as f64 + 0.5) / n as f64;
        for x in 0..n {
            let nx = (x as f64 + 0.5) / n as f64;
            let color: [f64; 3] = if inner_mask.get(x, y) {
                if glyphs.iter().any(|&[x0, y0, x1, y1]| nx >= x0 && nx < x1 && ny >= y0 && ny < y1) {
                    spec.glyph_color.map(f64::from)
                } else {
                    spec.fill.map(f64::from)
                }
            } else if outer_mask.get(x, y) {
                spec.border.map(f64::from)
            } else {
                std::array::from_fn(|c| base[c] + tint[c] + gradient * (ny - 0.5))
            };
            let noise = rng.random_range(-8.0..8.0);
            for c in color {
                data.push(((c + noise) * brightness).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let image = PixelImage::new(n, n, data)?;
    let outline = outline.into_iter().map(|[x, y]| [x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)]).collect();
    let poly = PolygonAnnotation::new(spec.name.clone(), outline)?;
    Ok((image, poly))
}

/// Renders every sample and canonicalizes it. Classes appear in `cfg.classes`
/// order, samples in index order.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let jobs = cfg.jobs();
    let records = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (image, poly) = render_sample(cfg, c, i)?;
            canonicalize(&sample_id(&cfg.classes[c], i), &image, &poly)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (k, &(_, i)) in jobs.iter().enumerate() {
        match cfg.split_of(i) {
            Split::Train => train.push(k),
            Split::Test => test.push(k),
        }
    }
    let class_names = cfg.classes.iter().map(|c| c.name.clone()).collect();
    Ok(SyntheticDataset {
        set: SignSet::new(records, class_names)?,
        train,
        test,
    })
}

/// Writes raw scenes and sidecars as `dir/train/<id>.png` and
/// `dir/test/<id>.png` (plus `<id>.mask.json`).
pub fn write_synthetic(cfg: &SyntheticConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    for split in [Split::Train, Split::Test] {
        let sub = dir.join(split.dir_name());
        fs::create_dir_all(&sub).map_err(|e| {
            SignsError::Imaging(crate::imaging::ImagingError::Io {
                path: sub.display().to_string(),
                source: e,
            })
        })?;
    }
    cfg.jobs().par_iter().try_for_each(|&(c, i)| {
        let (image, poly) = render_sample(cfg, c, i)?;
        let sub = dir.join(cfg.split_of(i).dir_name());
        let id = sample_id(&cfg.classes[c], i);
        save_png(&image, &sub.join(format!("{id}.png")))?;
        write_annotation(&poly, &sub.join(format!("{id}.mask.json")))?;
        Ok(())
    })
}
