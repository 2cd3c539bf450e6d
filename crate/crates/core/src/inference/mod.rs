//! Random-intercept binary regression of the mismatch outcome.

mod anomalies;
mod design;
mod glmm;
mod quadrature;
mod simulate;

pub use anomalies::{render_anomalies, report_anomalies, AnomalyRow};
pub use design::{balance, encodable, encode, BalancedSample, DesignMatrix, EncodeOptions, COLUMN_NAMES};
pub use glmm::{
    fit_glmm, marginal_loglik, marginal_loglik_gradient, multi_start_select, FixedEffect, GlmmConfig, GlmmFit, MultiStart,
    RunSummary,
};
pub use quadrature::GaussHermite;
pub use simulate::{simulate, simulate_small, SimulatedData, TABLE8_BETA, TABLE8_SIGMA};
