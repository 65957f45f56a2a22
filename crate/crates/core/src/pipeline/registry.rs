//! The block catalogue: names, parameters, legal ranges and channel rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use super::ParamValue;
use crate::reference::defaults;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Number {
        min: f64,
        max: f64,
        #[serde(skip_serializing_if = "std::ops::Not::not")]
        min_exclusive: bool,
    },
    Integer {
        min: i64,
        max: i64,
    },
    Choice {
        options: Vec<&'static str>,
    },
    /// Free text, used for model names.
    Text,
    Vector {
        len: usize,
        min: f64,
        max: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: ParamKind,
    /// `None` marks an optional parameter without a default.
    pub default: Option<ParamValue>,
    pub description: &'static str,
}

/// What a block needs from its input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Needs {
    Any,
    Color,
    /// Single channel with stashed chroma.
    Stash,
}

/// Channel layout a block hands downstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Produces {
    Same,
    /// Single channel with chroma stashed.
    Luma,
    /// Single channel; a stash on single-channel input survives.
    Gray,
    /// Three channels, no stash.
    Color,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSpec {
    pub kind: &'static str,
    pub label: &'static str,
    pub description: &'static str,
    pub needs: Needs,
    pub produces: Produces,
    pub params: Vec<ParamSpec>,
}

impl BlockSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn num(name: &'static str, min: f64, max: f64, default: f64, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Number {
            min,
            max,
            min_exclusive: false,
        },
        default: Some(ParamValue::Number(default)),
        description,
    }
}

fn pos(name: &'static str, max: f64, default: f64, description: &'static str) -> ParamSpec {
    ParamSpec {
        kind: ParamKind::Number {
            min: 0.0,
            max,
            min_exclusive: true,
        },
        ..num(name, 0.0, max, default, description)
    }
}

fn int(name: &'static str, min: i64, max: i64, default: i64, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        kind: ParamKind::Integer { min, max },
        default: Some(ParamValue::Number(default as f64)),
        description,
    }
}

fn model() -> ParamSpec {
    ParamSpec {
        name: "model",
        kind: ParamKind::Text,
        default: None,
        description: "name of a trained filter bank to use instead of the reference filter",
    }
}

fn block(
    kind: &'static str,
    label: &'static str,
    description: &'static str,
    needs: Needs,
    produces: Produces,
    params: Vec<ParamSpec>,
) -> BlockSpec {
    BlockSpec {
        kind,
        label,
        description,
        needs,
        produces,
        params,
    }
}

fn build() -> Vec<BlockSpec> {
    use Needs as N;
    use Produces as P;
    vec![
        block("to_grayscale", "To Grayscale", "keep luma, stash chroma", N::Color, P::Luma, vec![]),
        block("to_color", "To Color", "restore RGB from the stashed chroma", N::Stash, P::Color, vec![]),
        block(
            "posterize",
            "Posterization",
            "quantize every channel",
            N::Any,
            P::Same,
            vec![int("levels", 2, 256, 6, "number of output levels")],
        ),
        block(
            "luma_posterize",
            "Luma Posterization",
            "quantize luma only",
            N::Any,
            P::Same,
            vec![int("levels", 2, 256, 6, "number of output levels")],
        ),
        block(
            "brightness",
            "Brightness",
            "scale luma, clipping at white",
            N::Any,
            P::Same,
            vec![num("factor", 0.0, 4.0, 1.0, "luma multiplier")],
        ),
        block(
            "soft_threshold",
            "Soft Threshold",
            "1 + tanh(min(0, phi (v - epsilon))) per channel, v in 0..255",
            N::Any,
            P::Same,
            vec![
                pos("phi", 1.0, 0.03, "slope per 8-bit unit"),
                num("epsilon", 0.0, 255.0, 80.0, "cut-off in 8-bit units"),
            ],
        ),
        block(
            "saturation",
            "Saturation",
            "push RGB away from or toward gray",
            N::Color,
            P::Same,
            vec![num("saturation", 0.0, 4.0, 1.0, "1 keeps the input")],
        ),
        block(
            "hue",
            "Hue",
            "rotate chroma, then add an RGB bias",
            N::Color,
            P::Same,
            vec![
                num("angle", -PI, PI, 0.0, "rotation in radians"),
                ParamSpec {
                    name: "bias",
                    kind: ParamKind::Vector {
                        len: 3,
                        min: -1.0,
                        max: 1.0,
                    },
                    default: Some(ParamValue::Vector(vec![0.0; 3])),
                    description: "added to R, G, B",
                },
            ],
        ),
        block(
            "colorize",
            "Colorize",
            "monochrome HSL palette",
            N::Any,
            P::Color,
            vec![
                num("hue", 0.0, 360.0, 30.0, "palette hue in degrees"),
                num("saturation", 0.0, 1.0, 0.6, "palette saturation"),
                num("lightness", 0.0, 4.0, 1.0, "luma to lightness scale"),
            ],
        ),
        block(
            "gaussian",
            "Gaussian Smoothing",
            "separable Gaussian blur",
            N::Any,
            P::Same,
            vec![num("sigma", 0.0, 32.0, 1.0, "standard deviation in pixels")],
        ),
        block("sobel", "Sobel Filter", "gradient magnitude of the luma", N::Any, P::Gray, vec![]),
        block(
            "pattern",
            "Pattern Filling",
            "replace luma levels by hatching tiles",
            N::Any,
            P::Gray,
            vec![],
        ),
        block(
            "halftone",
            "Halftone",
            "dots sized by local ink coverage",
            N::Any,
            P::Gray,
            vec![
                int("cell", 2, 64, 8, "screen cell size in pixels"),
                ParamSpec {
                    name: "mode",
                    kind: ParamKind::Choice {
                        options: vec!["gray", "cmyk"],
                    },
                    default: Some(ParamValue::Text("gray".into())),
                    description: "single black screen or four-color screens",
                },
            ],
        ),
        block(
            "linear_equalize",
            "Linear Equalization",
            "stretch luma percentiles to black and white",
            N::Any,
            P::Same,
            vec![
                num("low", 0.0, 100.0, 5.0, "percentile mapped to 0"),
                num("high", 0.0, 100.0, 95.0, "percentile mapped to 1"),
            ],
        ),
        block(
            "min_dynamic_range",
            "Minimum Dynamic Range",
            "widen a narrow luma span",
            N::Any,
            P::Same,
            vec![pos("range", 255.0, 100.0, "minimum 5-95 percentile span in 8-bit units")],
        ),
        block(
            "scale",
            "Scale",
            "bilinear resize",
            N::Any,
            P::Same,
            vec![num("percent", 5.0, 800.0, 100.0, "output size, 100 keeps the input")],
        ),
        block(
            "detail_control",
            "Detail Control",
            "add delta percent of the residual over a Gaussian base",
            N::Any,
            P::Same,
            vec![
                num("delta", -100.0, 100.0, defaults::DETAIL_DELTA, "negative smooths, positive sharpens"),
                pos("sigma_base", 32.0, crate::reference::DEFAULT_SIGMA_BASE, "base blur in pixels"),
                model(),
            ],
        ),
        block(
            "tv_flow",
            "TV Flow",
            "total variation flow on luma",
            N::Any,
            P::Same,
            vec![
                int("steps", 0, 500, crate::reference::DEFAULT_STEPS as i64, "explicit time steps"),
                pos("dt", crate::reference::MAX_DT, crate::reference::DEFAULT_DT, "time step"),
                pos("epsilon", 1.0, crate::reference::DEFAULT_EPS, "gradient floor"),
                model(),
            ],
        ),
        block(
            "etf",
            "Edge Tangent Flow",
            "line integral convolution along edges",
            N::Any,
            P::Same,
            vec![
                num("rho", 0.0, 16.0, defaults::ETF_RHO, "structure tensor smoothing"),
                pos("length", 32.0, defaults::ETF_LENGTH, "streamline half-length in pixels"),
                int("passes", 1, 16, defaults::ETF_PASSES as i64, "repetitions"),
                model(),
            ],
        ),
        block(
            "xdog",
            "Flow XDoG",
            "flow-guided high-emphasis difference of Gaussians (pre-threshold)",
            N::Any,
            P::Same,
            vec![
                pos("sigma", 16.0, defaults::XDOG_SIGMA, "narrow Gaussian deviation"),
                num("p", 0.0, 100.0, defaults::XDOG_P, "edge emphasis"),
                num("rho", 0.0, 16.0, defaults::XDOG_RHO, "structure tensor smoothing"),
                num("lic_length", 0.0, 32.0, defaults::XDOG_LIC, "smoothing along the flow"),
                model(),
            ],
        ),
    ]
}

/// All known blocks in display order.
pub fn blocks() -> &'static [BlockSpec] {
    static REGISTRY: OnceLock<Vec<BlockSpec>> = OnceLock::new();
    REGISTRY.get_or_init(build)
}

pub fn block_spec(kind: &str) -> Option<&'static BlockSpec> {
    blocks().iter().find(|b| b.kind == kind)
}


fn param_schema(p: &ParamSpec) -> serde_json::Value {
    use serde_json::json;
    let mut v = match &p.kind {
        ParamKind::Number { min, max, min_exclusive } => {
            let lower = if *min_exclusive { "exclusiveMinimum" } else { "minimum" };
            json!({ "type": "number", lower: min, "maximum": max })
        }
        ParamKind::Integer { min, max } => json!({ "type": "integer", "minimum": min, "maximum": max }),
        ParamKind::Choice { options } => json!({ "enum": options }),
        ParamKind::Text => json!({ "type": "string" }),
        ParamKind::Vector { len, min, max } => json!({
            "type": "array",
            "items": { "type": "number", "minimum": min, "maximum": max },
            "minItems": len,
            "maxItems": len,
        }),
    };
    v["description"] = json!(p.description);
    v
}

/// JSON Schema (draft 2020-12) of a style file, derived from the block
/// catalogue. Cross-block rules (channel flow, percentile order) are only
/// checked by [`super::validate`].
pub fn style_schema() -> serde_json::Value {
    use serde_json::json;
    let variants: Vec<serde_json::Value> = blocks()
        .iter()
        .map(|b| {
            let props: serde_json::Map<String, serde_json::Value> =
                b.params.iter().map(|p| (p.name.to_string(), param_schema(p))).collect();
            json!({
                "title": b.label,
                "type": "object",
                "properties": {
                    "kind": { "const": b.kind },
                    "params": { "type": "object", "properties": props, "additionalProperties": false },
                    "enabled": { "type": "boolean" },
                },
                "required": ["kind"],
                "additionalProperties": false,
            })
        })
        .collect();
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "styler style file",
        "type": "object",
        "properties": {
            "version": { "const": super::STYLE_VERSION },
            "name": { "type": "string" },
            "background": { "type": "array", "items": { "$ref": "#/$defs/block" } },
            "foreground": { "type": "array", "items": { "$ref": "#/$defs/block" } },
            "composite_mode": { "enum": ["multiply", "foreground_only", "background_only"] },
            "line_color": {
                "type": "array",
                "items": { "type": "number", "minimum": 0.0, "maximum": 1.0 },
                "minItems": 3,
                "maxItems": 3,
            },
        },
        "required": ["name"],
        "additionalProperties": false,
        "$defs": { "block": { "oneOf": variants } },
    })
}
