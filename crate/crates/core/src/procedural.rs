//! Random style generation and aesthetic scoring.
//!
//! Generation draws between 4 and 9 blocks from a fixed pool with uniform
//! parameters. Only `xdog` and `tv_flow` may repeat. To Grayscale is
//! included with probability 0.2 and, when present, is the last block so
//! that color-only blocks never follow it.
//!
//! Seeds drive a ChaCha8 stream (`rand_chacha`), which is specified
//! independently of platform and word size.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{resize, Image};
use crate::io::{encode_png, save_png};
use crate::pipeline::{execute, BlockDescriptor, ModelRegistry, StylePipeline};
use crate::spatial_ops::sobel;

pub const MIN_BLOCKS: usize = 4;
pub const MAX_BLOCKS: usize = 9;
pub const GRAYSCALE_PROBABILITY: f64 = 0.2;
/// Kinds that may appear more than once.
pub const REPEATABLE: [&str; 2] = ["xdog", "tv_flow"];
/// Every kind the generator can draw, apart from To Grayscale.
pub const POOL: [&str; 7] = [
    "xdog",
    "tv_flow",
    "soft_threshold",
    "detail_control",
    "luma_posterize",
    "saturation",
    "scale",
];

/// Inclusive parameter ranges per generated kind.
pub fn ranges(kind: &str) -> &'static [(&'static str, f64, f64)] {
    match kind {
        "xdog" => &[("sigma", 0.5, 8.0), ("p", 1.0, 40.0)],
        "soft_threshold" => &[("phi", 0.013, 0.059), ("epsilon", 50.0, 110.0)],
        "detail_control" => &[("delta", -100.0, 60.0)],
        "luma_posterize" => &[("levels", 5.0, 12.0)],
        "saturation" => &[("saturation", 1.5, 2.2)],
        "scale" => &[("percent", 100.0, 300.0)],
        _ => &[],
    }
}

fn draw_block(kind: &str, rng: &mut ChaCha8Rng) -> BlockDescriptor {
    let mut b = BlockDescriptor::new(kind);
    for &(name, lo, hi) in ranges(kind) {
        let v = if kind == "luma_posterize" {
            rng.random_range(lo as i64..=hi as i64) as f64
        } else {
            rng.random_range(lo..=hi)
        };
        b = b.with(name, v);
    }
    b
}

/// A random style; a pure function of `seed`.
pub fn generate(seed: u64) -> StylePipeline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(MIN_BLOCKS..=MAX_BLOCKS);
    let gray = rng.random_bool(GRAYSCALE_PROBABILITY);
    let mut available: Vec<&str> = POOL.to_vec();
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count - usize::from(gray) {
        let kind = available[rng.random_range(0..available.len())];
        if !REPEATABLE.contains(&kind) {
            available.retain(|k| *k != kind);
        }
        blocks.push(draw_block(kind, &mut rng));
    }
    if gray {
        blocks.push(BlockDescriptor::new("to_grayscale"));
    }
    let mut p = StylePipeline::new(format!("procedural-{seed}"));
    p.background = blocks;
    p
}

/// Rates a rendered image; higher is better.
pub trait Scorer: Send + Sync {
    fn score(&self, img: &Image<f64>) -> Result<f64>;
}

/// Always returns the same value.
#[derive(Clone, Copy, Debug)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _: &Image<f64>) -> Result<f64> {
        Ok(self.0)
    }
}

/// Colorfulness and edge density blended into `[0, 10]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeuristicScorer;

const EDGE_LEVEL: f64 = 0.2;
const EDGE_TARGET: f64 = 0.15;

impl Scorer for HeuristicScorer {
    fn score(&self, img: &Image<f64>) -> Result<f64> {
        let rgb = img.to_three_channels();
        let n = rgb.pixel_count() as f64;
        let (r, g, b) = (rgb.plane(0), rgb.plane(1), rgb.plane(2));
        let rg: Vec<f64> = r.iter().zip(g).map(|(r, g)| 255.0 * (r - g)).collect();
        let yb: Vec<f64> = r.iter().zip(g).zip(b).map(|((r, g), b)| 255.0 * (0.5 * (r + g) - b)).collect();
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / n;
            (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
        };
        let ((mrg, vrg), (myb, vyb)) = (stats(&rg), stats(&yb));
        let colorful = (vrg + vyb).sqrt() + 0.3 * (mrg * mrg + myb * myb).sqrt();
        let c = (colorful / 100.0).min(1.0);
        let edges = sobel(&rgb)?;
        let density = edges.data().iter().filter(|&&v| v > EDGE_LEVEL).count() as f64 / n;
        let e = (1.0 - (density - EDGE_TARGET).abs() / (1.0 - EDGE_TARGET)).clamp(0.0, 1.0);
        Ok(10.0 * (0.5 * c + 0.5 * e))
    }
}

/// Runs an external program with the path of a PNG rendering appended to
/// its arguments; the program prints one number.
#[derive(Clone, Debug)]
pub struct CommandScorer {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandScorer {
    /// Splits `command` on whitespace into program and leading arguments.
    pub fn parse(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace().map(String::from);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("scorer command is empty".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }

    pub fn score_file(&self, png: &Path) -> Result<f64> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(png)
            .output()
            .map_err(|e| Error::Scoring(format!("cannot run {}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(Error::Scoring(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| Error::Scoring(format!("{} printed {:?}, not a number", self.program, text.trim())))?;
        if !v.is_finite() {
            return Err(Error::Scoring(format!("{} printed a non-finite score", self.program)));
        }
        Ok(v)
    }
}

impl Scorer for CommandScorer {
    fn score(&self, img: &Image<f64>) -> Result<f64> {
        let mut tmp = tempfile::Builder::new()
            .suffix(".png")
            .tempfile()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        std::io::Write::write_all(&mut tmp, &encode_png(img)?).map_err(|e| Error::io(tmp.path(), e))?;
        self.score_file(tmp.path())
    }
}

/// Default number of scorer invocations in flight.
pub const DEFAULT_CONCURRENCY: usize = 4;

/// Mean score of the style rendered on each image.
pub fn score(
    p: &StylePipeline,
    imgs: &[Image<f64>],
    scorer: &dyn Scorer,
    models: &ModelRegistry<f64>,
) -> Result<f64> {
    if imgs.is_empty() {
        return Err(Error::invalid("scoring needs at least one image"));
    }
    let mut sum = 0.0;
    for img in imgs {
        sum += scorer.score(&execute(p, img, models)?)?;
    }
    Ok(sum / imgs.len() as f64)
}

/// Scores many styles with at most `concurrency` in flight. A failing style
/// yields its error; the rest of the batch continues.
pub fn score_styles(
    styles: &[StylePipeline],
    imgs: &[Image<f64>],
    scorer: &dyn Scorer,
    models: &ModelRegistry<f64>,
    concurrency: usize,
) -> Vec<Result<f64>> {
    use rayon::prelude::*;
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => return styles.iter().map(|_| Err(Error::Scoring(e.to_string()))).collect(),
    };
    pool.install(|| {
        styles
            .par_iter()
            .with_max_len(1)
            .map(|p| score(p, imgs, scorer, models))
            .collect()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SheetEntry {
    pub name: String,
    pub style: PathBuf,
    pub thumb: Option<PathBuf>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContactSheet {
    pub report: PathBuf,
    pub entries: Vec<SheetEntry>,
}

pub const THUMB_EDGE: usize = 256;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Fit inside `edge` pixels on the longer side (never upscales).
pub fn thumbnail(img: &Image<f64>, edge: usize) -> Result<Image<f64>> {
    let long = img.width().max(img.height());
    if long <= edge {
        return Ok(img.clone());
    }
    let s = edge as f64 / long as f64;
    let w = ((img.width() as f64 * s).round() as usize).max(1);
    let h = ((img.height() as f64 * s).round() as usize).max(1);
    resize(img, w, h)
}

/// Writes `report.html`, `styles/*.json` and `thumbs/*.png` under
/// `out_dir`. Each entry carries its score and any error hit while
/// rendering or writing it; with `sort_by_score` entries are ordered by
/// non-increasing score (unscored last).
pub fn contact_sheet(
    styles: &[(StylePipeline, Option<f64>)],
    img: &Image<f64>,
    models: &ModelRegistry<f64>,
    out_dir: &Path,
    sort_by_score: bool,
) -> Result<ContactSheet> {
    if styles.is_empty() {
        return Err(Error::invalid("contact sheet needs at least one style"));
    }
    for sub in ["styles", "thumbs"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let small = thumbnail(img, THUMB_EDGE)?;
    let mut entries: Vec<SheetEntry> = styles
        .iter()
        .enumerate()
        .map(|(i, (style, score))| {
            let stem = format!("{:04}-{}", i, file_stem(&style.name));
            let style_rel = PathBuf::from("styles").join(format!("{stem}.json"));
            let thumb_rel = PathBuf::from("thumbs").join(format!("{stem}.png"));
            let mut entry = SheetEntry {
                name: style.name.clone(),
                style: style_rel.clone(),
                thumb: None,
                score: *score,
                error: None,
            };
            let result = style
                .save(out_dir.join(&style_rel))
                .and_then(|_| execute(style, &small, models))
                .and_then(|out| save_png(&out, out_dir.join(&thumb_rel)));
            match result {
                Ok(()) => entry.thumb = Some(thumb_rel),
                Err(e) => entry.error = Some(e.to_string()),
            }
            entry
        })
        .collect();
    if sort_by_score {
        entries.sort_by(|a, b| match (a.score, b.score) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
    }
    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>styles</title>\n<style>\
         body{font-family:sans-serif;background:#222;color:#eee}\
         .grid{display:flex;flex-wrap:wrap;gap:12px}\
         .cell{background:#333;padding:8px;width:260px}\
         .cell img{max-width:256px;display:block}\
         .err{color:#f88}</style></head><body>\n<div class=\"grid\">\n",
    );
    for e in &entries {
        let name = escape(&e.name);
        let style = escape(&e.style.to_string_lossy());
        let _ = write!(html, "<div class=\"cell\">");
        if let Some(t) = &e.thumb {
            let _ = write!(html, "<img src=\"{}\" alt=\"{name}\">", escape(&t.to_string_lossy()));
        }
        let _ = write!(html, "<div><a href=\"{style}\">{name}</a>");
        if let Some(s) = e.score {
            let _ = write!(html, " <span class=\"score\">{s:.3}</span>");
        }
        if let Some(err) = &e.error {
            let _ = write!(html, "<div class=\"err\">{}</div>", escape(err));
        }
        html.push_str("</div></div>\n");
    }
    html.push_str("</div>\n</body></html>\n");
    let report = out_dir.join("report.html");
    std::fs::write(&report, html).map_err(|e| Error::io(&report, e))?;
    Ok(ContactSheet { report, entries })
}
