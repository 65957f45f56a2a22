//! Trainable image stylization.
//!
//! The crate is organized around a planar floating-point [`Image`] and a set
//! of filter blocks that compose into two-layer [`pipeline::StylePipeline`]s.
//! Expensive flow-based effects ([`reference`]) can be approximated by a bank
//! of learned, per-pixel selected FIR filters ([`blade`]) whose selection is
//! driven by structure tensor features ([`structure_tensor`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the precision for the common cases.

pub mod blade;
pub mod color;
pub mod effects;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod pixel_ops;
pub mod procedural;
pub mod reference;
pub mod scalar;
pub mod spatial_ops;
pub mod structure_tensor;

pub use crate::error::{Error, Result};
pub use crate::image::{Chroma, Image};
pub use crate::scalar::Scalar;

pub type Image32 = Image<f32>;
pub type Image64 = Image<f64>;
pub type BladeModel32 = blade::BladeModel<f32>;
pub type BladeModel64 = blade::BladeModel<f64>;
pub type TrainingAccumulator64 = blade::TrainingAccumulator<f64>;
pub type ModelRegistry64 = pipeline::ModelRegistry<f64>;
