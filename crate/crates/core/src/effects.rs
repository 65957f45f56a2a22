//! Trainable effects: reference target generation plus the default filter
//! bank layout for each, and an end-to-end training routine.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blade::{
    build_regularizer, fit_strength_thresholds, solve, BladeModel, ModelMetadata, SolveOptions,
    TrainingAccumulator, DEFAULT_LAMBDA,
};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::reference::{self as rf, defaults};
use crate::structure_tensor::QuantizerSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Etf,
    TvFlow,
    FlowXdog,
    Detail,
}

impl Effect {
    pub const ALL: [Effect; 4] = [Effect::Etf, Effect::TvFlow, Effect::FlowXdog, Effect::Detail];

    pub fn name(self) -> &'static str {
        match self {
            Effect::Etf => "etf",
            Effect::TvFlow => "tvflow",
            Effect::FlowXdog => "flowxdog",
            Effect::Detail => "detail",
        }
    }

    /// `(side, orientation, strength, coherence)` bins.
    pub fn default_layout(self) -> (usize, usize, usize, usize) {
        match self {
            Effect::Etf => (5, 24, 1, 3),
            Effect::TvFlow => (7, 16, 4, 4),
            Effect::FlowXdog => (7, 16, 5, 3),
            Effect::Detail => (9, 16, 5, 3),
        }
    }

    /// Structure tensor smoothing used for selection; matches the
    /// reference filter's own field where it has one.
    pub fn default_rho(self, params: &EffectParams) -> f64 {
        match self {
            Effect::Etf => params.rho,
            Effect::FlowXdog => params.rho,
            Effect::TvFlow | Effect::Detail => crate::structure_tensor::DEFAULT_RHO,
        }
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Effect::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown effect {s:?}; expected etf, tvflow, flowxdog or detail")))
    }
}

impl std::fmt::Display for Effect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Reference filter parameters. Each effect reads only its own fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectParams {
    /// Tangent field smoothing (ETF, Flow-XDoG).
    pub rho: f64,
    /// Streamline half-length (ETF).
    pub length: f64,
    /// ETF passes; stored as the model's pass count, targets use one pass.
    pub passes: u32,
    pub steps: u32,
    pub dt: f64,
    pub eps: f64,
    pub sigma: f64,
    pub p: f64,
    pub lic_length: f64,
    pub delta: f64,
    pub sigma_base: f64,
}

impl Default for EffectParams {
    fn default() -> Self {
        Self {
            rho: defaults::ETF_RHO,
            length: defaults::ETF_LENGTH,
            passes: defaults::ETF_PASSES,
            steps: rf::DEFAULT_STEPS,
            dt: rf::DEFAULT_DT,
            eps: rf::DEFAULT_EPS,
            sigma: defaults::XDOG_SIGMA,
            p: defaults::XDOG_P,
            lic_length: defaults::XDOG_LIC,
            delta: defaults::DETAIL_DELTA,
            sigma_base: rf::DEFAULT_SIGMA_BASE,
        }
    }
}

impl EffectParams {
    /// The fields that matter for `effect`, for model metadata.
    pub fn describe(&self, effect: Effect) -> BTreeMap<String, String> {
        let pairs: Vec<(&str, String)> = match effect {
            Effect::Etf => vec![
                ("rho", self.rho.to_string()),
                ("length", self.length.to_string()),
                ("passes", self.passes.to_string()),
            ],
            Effect::TvFlow => vec![
                ("steps", self.steps.to_string()),
                ("dt", self.dt.to_string()),
                ("eps", self.eps.to_string()),
            ],
            Effect::FlowXdog => vec![
                ("sigma", self.sigma.to_string()),
                ("p", self.p.to_string()),
                ("rho", self.rho.to_string()),
                ("lic_length", self.lic_length.to_string()),
            ],
            Effect::Detail => vec![
                ("delta", self.delta.to_string()),
                ("sigma_base", self.sigma_base.to_string()),
            ],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Reference output of `effect` on a single-channel image (one pass).
pub fn reference_target(effect: Effect, img: &Image<f64>, p: &EffectParams) -> Result<Image<f64>> {
    match effect {
        Effect::Etf => rf::etf_smooth(img, p.rho, p.length, 1),
        Effect::TvFlow => rf::tv_flow(img, p.steps, p.dt, p.eps),
        Effect::FlowXdog => rf::flow_xdog_response(img, p.sigma, p.p, p.rho, p.lic_length),
        Effect::Detail => rf::detail_control_raw(img, p.delta, p.sigma_base),
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub side: usize,
    pub orientation_bins: usize,
    pub strength_bins: usize,
    pub coherence_bins: usize,
    /// `None` picks the effect default.
    pub rho: Option<f64>,
    pub lambda: f64,
    /// Accumulate all eight rotations and flips of every pair.
    pub augment: bool,
}

impl TrainOptions {
    pub fn for_effect(effect: Effect) -> Self {
        let (side, o, s, c) = effect.default_layout();
        Self {
            side,
            orientation_bins: o,
            strength_bins: s,
            coherence_bins: c,
            rho: None,
            lambda: DEFAULT_LAMBDA,
            augment: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub samples: u64,
    pub populated_buckets: usize,
    pub fallback_buckets: Vec<usize>,
}

/// Generates targets for `inputs` (single-channel), accumulates, and
/// solves a filter bank.
pub fn train_effect(
    effect: Effect,
    inputs: &[Image<f64>],
    params: &EffectParams,
    opts: &TrainOptions,
) -> Result<(BladeModel<f64>, TrainReport)> {
    if inputs.is_empty() {
        return Err(Error::invalid("training needs at least one image"));
    }
    let rho = opts.rho.unwrap_or_else(|| effect.default_rho(params));
    let mut q = QuantizerSpec::new(opts.orientation_bins, opts.strength_bins, opts.coherence_bins, rho);
    fit_strength_thresholds(inputs, &mut q)?;
    q.validate()?;
    let mut acc = TrainingAccumulator::<f64>::new(opts.side, q.bucket_count())?;
    for img in inputs {
        let target = reference_target(effect, img, params)?;
        if opts.augment {
            acc.accumulate(img, &target, &q)?;
        } else {
            acc.accumulate_variant(img, &target, &q)?;
        }
    }
    let reg = build_regularizer(opts.side, opts.side, 1.0);
    let bank = solve(
        &acc,
        &reg,
        SolveOptions {
            lambda: opts.lambda,
            ..SolveOptions::default()
        },
    )?;
    let passes = if effect == Effect::Etf { params.passes.max(1) } else { 1 };
    let mut model = BladeModel::new(opts.side, q, bank.filters, passes)?;
    let mut notes = params.describe(effect);
    notes.insert("effect".into(), effect.name().into());
    notes.insert("lambda".into(), opts.lambda.to_string());
    notes.insert("augment".into(), opts.augment.to_string());
    notes.insert("features".into(), "computed on the stage input".into());
    model.metadata = ModelMetadata {
        name: effect.name().into(),
        notes,
    };
    let report = TrainReport {
        samples: acc.total_count(),
        populated_buckets: acc.buckets().iter().filter(|b| b.count > 0).count(),
        fallback_buckets: bank.fallback,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for e in Effect::ALL {
            assert_eq!(e.name().parse::<Effect>().unwrap(), e);
        }
        assert!("blur".parse::<Effect>().is_err());
    }

    #[test]
    fn default_layouts() {
        let k = |e: Effect| {
            let (_, o, s, c) = e.default_layout();
            o * s * c
        };
        assert_eq!(k(Effect::Etf), 72);
        assert_eq!(k(Effect::TvFlow), 256);
        assert_eq!(k(Effect::FlowXdog), 240);
        assert_eq!(k(Effect::Detail), 240);
    }

    #[test]
    fn small_training_run() {
        let img = Image::from_fn(48, 40, 1, |x, y, _| {
            0.5 + 0.3 * ((x as f64 * 0.4).sin() * (y as f64 * 0.3).cos())
        })
        .unwrap();
        let mut opts = TrainOptions::for_effect(Effect::Detail);
        opts.side = 5;
        opts.orientation_bins = 4;
        opts.strength_bins = 2;
        opts.coherence_bins = 2;
        let (model, report) = train_effect(Effect::Detail, &[img.clone()], &EffectParams::default(), &opts).unwrap();
        assert_eq!(report.samples, 8 * 48 * 40);
        assert_eq!(model.bucket_count(), 16);
        assert_eq!(model.metadata.notes["effect"], "detail");
        let out = crate::blade::infer(&img, &model).unwrap();
        let target = reference_target(Effect::Detail, &img, &EffectParams::default()).unwrap();
        assert!(crate::metrics::psnr(&out, &target).unwrap() > 30.0);
    }
}
