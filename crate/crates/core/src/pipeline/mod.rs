//! Two-layer style pipelines.
//!
//! A style is an ordered list of blocks for the background (color) layer
//! and another for the foreground (line) layer. Both run on copies of the
//! input; the foreground's luma becomes an alpha mask that blends
//! `line_color` over the background.

mod bench;
mod registry;

pub use bench::{benchmark, BenchReport, BenchRow};
pub use registry::{block_spec, blocks, style_schema, BlockSpec, Needs, ParamKind, ParamSpec, Produces};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blade::{self, BladeModel};
use crate::color::{luma_chroma_to_rgb, luma_plane, on_luma, rgb_to_luma_chroma};
use crate::error::{Error, Result};
use crate::image::{resample, resize, Image};
use crate::pixel_ops as px;
use crate::reference as rf;
use crate::scalar::Scalar;
use crate::spatial_ops as sp;

pub const STYLE_VERSION: &str = "styler/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
    Vector(Vec<f64>),
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDescriptor {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default = "yes")]
    pub enabled: bool,
}

impl BlockDescriptor {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            params: BTreeMap::new(),
            enabled: true,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.into(), ParamValue::Number(value));
        self
    }

    pub fn with_text(mut self, name: &str, value: &str) -> Self {
        self.params.insert(name.into(), ParamValue::Text(value.into()));
        self
    }

    pub fn with_vector(mut self, name: &str, value: Vec<f64>) -> Self {
        self.params.insert(name.into(), ParamValue::Vector(value));
        self
    }
}

const PRESET_FILES: [&str; 6] = [
    include_str!("../../styles/inspired-by-1-orange-ink.json"),
    include_str!("../../styles/inspired-by-2-crayon.json"),
    include_str!("../../styles/inspired-by-3-sketch.json"),
    include_str!("../../styles/inspired-by-4-abstract.json"),
    include_str!("../../styles/inspired-by-5-heavy.json"),
    include_str!("../../styles/inspired-by-6-blob.json"),
];

/// The designed styles shipped with the library.
pub fn presets() -> Vec<StylePipeline> {
    PRESET_FILES
        .iter()
        .map(|s| StylePipeline::from_json(s).expect("shipped style parses"))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeMode {
    #[default]
    Multiply,
    ForegroundOnly,
    BackgroundOnly,
}

fn default_version() -> String {
    STYLE_VERSION.into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StylePipeline {
    #[serde(default = "default_version")]
    pub version: String,
    pub name: String,
    #[serde(default)]
    pub background: Vec<BlockDescriptor>,
    #[serde(default)]
    pub foreground: Vec<BlockDescriptor>,
    #[serde(default)]
    pub composite_mode: CompositeMode,
    #[serde(default)]
    pub line_color: [f64; 3],
}

impl StylePipeline {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            version: STYLE_VERSION.into(),
            name: name.into(),
            background: Vec::new(),
            foreground: Vec::new(),
            composite_mode: CompositeMode::Multiply,
            line_color: [0.0; 3],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid style file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("style serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Style,
    Background,
    Foreground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub layer: Layer,
    /// Block position within the layer; `None` for style-level problems.
    pub index: Option<usize>,
    pub block: Option<String>,
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let layer = match self.layer {
            Layer::Style => "style",
            Layer::Background => "background",
            Layer::Foreground => "foreground",
        };
        match (self.index, &self.block) {
            (Some(i), Some(b)) => write!(f, "{layer}[{i}] {b}: {} ({})", self.message, self.code),
            _ => write!(f, "{layer}: {} ({})", self.message, self.code),
        }
    }
}

/// Channel layout tracked through a layer during validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Shape {
    channels: usize,
    stash: bool,
}

fn check_param(spec: &ParamSpec, value: &ParamValue) -> Option<(&'static str, String)> {
    let name = spec.name;
    match (&spec.kind, value) {
        (ParamKind::Number { min, max, min_exclusive }, ParamValue::Number(v)) => {
            let low_ok = if *min_exclusive { *v > *min } else { *v >= *min };
            if !v.is_finite() || !low_ok || *v > *max {
                let open = if *min_exclusive { "(" } else { "[" };
                return Some(("out-of-range", format!("{name} = {v} is outside {open}{min}, {max}]")));
            }
        }
        (ParamKind::Integer { min, max }, ParamValue::Number(v)) => {
            if v.fract() != 0.0 {
                return Some(("wrong-type", format!("{name} must be an integer, got {v}")));
            }
            if *v < *min as f64 || *v > *max as f64 {
                return Some(("out-of-range", format!("{name} = {v} is outside [{min}, {max}]")));
            }
        }
        (ParamKind::Choice { options }, ParamValue::Text(t)) => {
            if !options.contains(&t.as_str()) {
                return Some(("out-of-range", format!("{name} = {t:?} is not one of {options:?}")));
            }
        }
        (ParamKind::Text, ParamValue::Text(t)) => {
            if t.is_empty() {
                return Some(("out-of-range", format!("{name} must not be empty")));
            }
        }
        (ParamKind::Vector { len, min, max }, ParamValue::Vector(v)) => {
            if v.len() != *len {
                return Some(("wrong-type", format!("{name} needs {len} components, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite() || x < min || x > max) {
                return Some(("out-of-range", format!("{name} components must lie in [{min}, {max}]")));
            }
        }
        _ => return Some(("wrong-type", format!("{name} has the wrong type"))),
    }
    None
}

fn validate_layer(blocks: &[BlockDescriptor], layer: Layer, out: &mut Vec<Diagnostic>) {
    let mut shape = Shape {
        channels: 3,
        stash: false,
    };
    for (index, b) in blocks.iter().enumerate() {
        let mut diag = |code: &str, message: String| {
            out.push(Diagnostic {
                layer,
                index: Some(index),
                block: Some(b.kind.clone()),
                code: code.into(),
                message,
            })
        };
        let Some(spec) = block_spec(&b.kind) else {
            diag("unknown-block", format!("unknown block {:?}", b.kind));
            continue;
        };
        for (name, value) in &b.params {
            match spec.param(name) {
                None => diag("unknown-param", format!("{} has no parameter {name:?}", spec.kind)),
                Some(p) => {
                    if let Some((code, msg)) = check_param(p, value) {
                        diag(code, msg);
                    }
                }
            }
        }
        if b.kind == "linear_equalize" {
            let p = Params::new(spec, b);
            if p.num("low") >= p.num("high") {
                diag("out-of-range", "low percentile must be below high percentile".into());
            }
        }
        if !b.enabled {
            continue;
        }
        match spec.needs {
            Needs::Color if shape.channels != 3 => diag(
                "channel-mismatch",
                format!("{} needs a color image but receives a single channel", spec.label),
            ),
            Needs::Stash if !(shape.channels == 1 && shape.stash) => diag(
                "missing-chroma",
                format!("{} needs chroma stashed by an earlier To Grayscale", spec.label),
            ),
            _ => {}
        }
        shape = match spec.produces {
            Produces::Same => shape,
            Produces::Luma => Shape {
                channels: 1,
                stash: true,
            },
            Produces::Gray => Shape {
                channels: 1,
                stash: shape.channels == 1 && shape.stash,
            },
            Produces::Color => Shape {
                channels: 3,
                stash: false,
            },
        };
        if b.kind == "halftone" && Params::new(spec, b).text("mode") == Some("cmyk") {
            shape = Shape {
                channels: 3,
                stash: false,
            };
        }
    }
}

/// Every problem that would stop the style from executing. Empty means the
/// style is runnable (given its models).
pub fn validate(p: &StylePipeline) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if p.version != STYLE_VERSION {
        out.push(Diagnostic {
            layer: Layer::Style,
            index: None,
            block: None,
            code: "bad-version".into(),
            message: format!("style version must be {STYLE_VERSION:?}, got {:?}", p.version),
        });
    }
    if p.line_color.iter().any(|v| !(0.0..=1.0).contains(v)) {
        out.push(Diagnostic {
            layer: Layer::Style,
            index: None,
            block: None,
            code: "out-of-range".into(),
            message: "line_color components must lie in [0, 1]".into(),
        });
    }
    validate_layer(&p.background, Layer::Background, &mut out);
    validate_layer(&p.foreground, Layer::Foreground, &mut out);
    out
}

/// Named, shared, read-only filter banks.
#[derive(Clone, Debug, Default)]
pub struct ModelRegistry<T> {
    models: HashMap<String, Arc<BladeModel<T>>>,
}

impl<T: Scalar> ModelRegistry<T> {
    pub fn new() -> Self {
        Self { models: HashMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, model: BladeModel<T>) {
        self.models.insert(name.into(), Arc::new(model));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<BladeModel<T>>> {
        self.models.get(name)
    }

    pub fn names(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.models.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Loads every `*.bld` file in `dir`, named by file stem.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut reg = Self::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "bld") {
                let name = path.file_stem().unwrap().to_string_lossy().into_owned();
                reg.insert(name, blade::load_model(&path)?);
            }
        }
        Ok(reg)
    }
}

/// Parameter lookup with registry defaults.
struct Params<'a> {
    spec: &'a BlockSpec,
    desc: &'a BlockDescriptor,
}

impl<'a> Params<'a> {
    fn new(spec: &'a BlockSpec, desc: &'a BlockDescriptor) -> Self {
        Self { spec, desc }
    }

    fn value(&self, name: &str) -> Option<&'a ParamValue> {
        self.desc
            .params
            .get(name)
            .or_else(|| self.spec.param(name).and_then(|p| p.default.as_ref()))
    }

    fn num(&self, name: &str) -> f64 {
        match self.value(name) {
            Some(ParamValue::Number(v)) => *v,
            _ => f64::NAN,
        }
    }

    fn text(&self, name: &str) -> Option<&'a str> {
        match self.value(name) {
            Some(ParamValue::Text(t)) => Some(t),
            _ => None,
        }
    }

    fn vec3(&self, name: &str) -> [f64; 3] {
        match self.value(name) {
            Some(ParamValue::Vector(v)) if v.len() == 3 => [v[0], v[1], v[2]],
            _ => [0.0; 3],
        }
    }
}

fn resolve<'m, T: Scalar>(models: &'m ModelRegistry<T>, name: &str) -> Result<&'m BladeModel<T>> {
    models
        .get(name)
        .map(|m| m.as_ref())
        .ok_or_else(|| Error::Config(format!("no trained model named {name:?}")))
}

/// Runs a filter bank on luma; `clip` keeps the result in display range.
fn run_model<T: Scalar>(img: &Image<T>, model: &BladeModel<T>, passes: u32, clip: bool) -> Result<Image<T>> {
    on_luma(img, |g| {
        let out = blade::apply(g, model, passes)?;
        Ok(if clip { out.map(|v| v.unit_clamp()) } else { out })
    })
}

/// Applies one block.
pub fn run_block<T: Scalar>(
    desc: &BlockDescriptor,
    img: &Image<T>,
    models: &ModelRegistry<T>,
) -> Result<Image<T>> {
    let spec = block_spec(&desc.kind).ok_or_else(|| Error::invalid(format!("unknown block {:?}", desc.kind)))?;
    let p = Params::new(spec, desc);
    let model = match p.text("model") {
        Some(name) => Some(resolve(models, name)?),
        None => None,
    };
    match spec.kind {
        "to_grayscale" => rgb_to_luma_chroma(img),
        "to_color" => luma_chroma_to_rgb(img),
        "posterize" => px::posterize(img, p.num("levels") as u32),
        "luma_posterize" => px::luma_posterize(img, p.num("levels") as u32),
        "brightness" => px::brightness(img, p.num("factor")),
        "soft_threshold" => px::soft_threshold(img, p.num("phi"), p.num("epsilon")),
        "saturation" => px::saturate(img, p.num("saturation")),
        "hue" => px::hue(img, p.num("angle"), p.vec3("bias")),
        "colorize" => px::colorize(img, p.num("hue"), p.num("saturation"), p.num("lightness")),
        "gaussian" => sp::gaussian_blur(img, p.num("sigma")),
        "sobel" => sp::sobel(img),
        "pattern" => sp::pattern_fill(img, &sp::default_hatch_textures()),
        "halftone" => {
            let mode = match p.text("mode") {
                Some("cmyk") => sp::HalftoneMode::Cmyk,
                _ => sp::HalftoneMode::Gray,
            };
            sp::halftone(img, p.num("cell") as usize, mode)
        }
        "linear_equalize" => px::linear_equalize(img, p.num("low"), p.num("high")),
        "min_dynamic_range" => px::min_dynamic_range(img, p.num("range")),
        "scale" => resample(img, p.num("percent") / 100.0),
        "detail_control" => match model {
            Some(m) => run_model(img, m, m.passes(), true),
            None => rf::detail_control(img, p.num("delta"), p.num("sigma_base")),
        },
        "tv_flow" => match model {
            Some(m) => run_model(img, m, m.passes(), true),
            None => on_luma(img, |g| rf::tv_flow(g, p.num("steps") as u32, p.num("dt"), p.num("epsilon"))),
        },
        "etf" => match model {
            Some(m) => run_model(img, m, p.num("passes") as u32, true),
            None => on_luma(img, |g| rf::etf_smooth(g, p.num("rho"), p.num("length"), p.num("passes") as u32)),
        },
        "xdog" => match model {
            Some(m) => run_model(img, m, m.passes(), false),
            None => on_luma(img, |g| {
                rf::flow_xdog_response(g, p.num("sigma"), p.num("p"), p.num("rho"), p.num("lic_length"))
            }),
        },
        other => Err(Error::invalid(format!("block {other:?} has no implementation"))),
    }
}

/// Runs the enabled blocks of one layer, calling `timer` after each.
pub(crate) fn run_layer<T: Scalar>(
    blocks: &[BlockDescriptor],
    img: &Image<T>,
    models: &ModelRegistry<T>,
    mut timer: impl FnMut(usize, &BlockDescriptor),
) -> Result<Image<T>> {
    let mut cur = img.clone();
    for (i, b) in blocks.iter().enumerate() {
        if !b.enabled {
            continue;
        }
        cur = run_block(b, &cur, models)?;
        if !cur.is_finite() {
            return Err(Error::CorruptState(format!("block {} produced non-finite samples", b.kind)));
        }
        timer(i, b);
    }
    Ok(cur)
}

/// Blends `line_color` over `background` where `alpha` is below 1.
///
/// `alpha` is the clipped luma of the foreground, resized to the background
/// if a scale block changed its size. `None` means `alpha = 1`.
pub fn composite<T: Scalar>(
    background: &Image<T>,
    alpha: Option<&Image<T>>,
    mode: CompositeMode,
    line_color: [f64; 3],
) -> Result<Image<T>> {
    let (w, h) = (background.width(), background.height());
    let white;
    let base = match mode {
        CompositeMode::BackgroundOnly => return Ok(background.clone()),
        CompositeMode::Multiply => background,
        CompositeMode::ForegroundOnly => {
            white = Image::filled(w, h, background.channels(), T::one())?;
            &white
        }
    };
    let Some(alpha) = alpha else {
        return Ok(base.clone());
    };
    let alpha = if alpha.width() != w || alpha.height() != h {
        resize(alpha, w, h)?
    } else {
        alpha.clone()
    };
    let a: Vec<T> = luma_plane(&alpha).into_iter().map(|v| v.unit_clamp()).collect();
    let gray_line = line_color[0] == line_color[1] && line_color[1] == line_color[2];
    let base = if base.channels() == 1 && !gray_line {
        luma_chroma_to_rgb(base).unwrap_or_else(|_| base.to_three_channels())
    } else {
        base.clone()
    };
    let n = w * h;
    let mut data = base.data().to_vec();
    for c in 0..base.channels() {
        let lc = T::of(line_color[c]);
        for (v, &ai) in data[c * n..(c + 1) * n].iter_mut().zip(&a) {
            *v = *v * ai + lc * (T::one() - ai);
        }
    }
    Ok(base.with_data(data))
}

/// Runs a validated style on `img`.
pub fn execute<T: Scalar>(p: &StylePipeline, img: &Image<T>, models: &ModelRegistry<T>) -> Result<Image<T>> {
    let diags = validate(p);
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    let bg = run_layer(&p.background, img, models, |_, _| {})?;
    let fg = if p.foreground.iter().any(|b| b.enabled) && p.composite_mode != CompositeMode::BackgroundOnly {
        Some(run_layer(&p.foreground, img, models, |_, _| {})?)
    } else {
        None
    };
    composite(&bg, fg.as_ref(), p.composite_mode, p.line_color)
}
