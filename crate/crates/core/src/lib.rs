//! Ensemble empirical mode decomposition and a from-scratch LSTM regressor,
//! composed into a next-bar price forecasting pipeline.

pub mod data;
pub mod eemd;
pub mod emd;
pub mod lstm;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod spline;
pub mod window;
