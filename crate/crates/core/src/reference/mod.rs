//! Slow, accurate flow-based filters. They are pipeline blocks in their own
//! right and the training targets for the learned approximations.
//!
//! Except for [`detail_control`], which handles color itself, these work on
//! single-channel images; pipeline blocks route color input through luma.

mod detail;
mod flow;
mod tv_flow;
mod xdog;

pub use detail::{detail_control, detail_control_raw, DEFAULT_SIGMA_BASE};
pub use flow::{etf_field, etf_smooth, FlowField, MIN_STRENGTH, STEP};
pub use tv_flow::{tv_flow, DEFAULT_DT, DEFAULT_EPS, DEFAULT_STEPS, MAX_DT};
pub use xdog::{cross_kernel, flow_xdog_response, K as XDOG_K};

/// Defaults used when an effect is trained or run as a reference block.
pub mod defaults {
    pub const ETF_RHO: f64 = 2.0;
    pub const ETF_LENGTH: f64 = 3.0;
    pub const ETF_PASSES: u32 = 1;
    pub const XDOG_SIGMA: f64 = 1.0;
    pub const XDOG_P: f64 = 8.0;
    pub const XDOG_RHO: f64 = 2.0;
    pub const XDOG_LIC: f64 = 2.0;
    pub const DETAIL_DELTA: f64 = 20.0;
}
