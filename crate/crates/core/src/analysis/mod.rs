//! Fidelity metrics and the event-density correlation study.

mod correlation;
mod metrics;

pub use correlation::{
    correlation_study, pearson, CorrelationConfig, CorrelationReport, CorrelationRow, Pearson,
    WindowKind,
};
pub use metrics::{mse, psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
