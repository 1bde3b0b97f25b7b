//! ROI-aware pseudo-analog video transmission simulator.
//!
//! Frames are cut into 8x8 blocks, de-correlated with an orthonormal
//! 2D-DCT, and the coefficients are sent directly as power-scaled I/Q
//! symbols, so reconstruction quality degrades gracefully with channel
//! SNR instead of falling off a decoding cliff. Detector-supplied ROI
//! rectangles steer an unequal power allocation that protects the blocks
//! a viewer actually looks at; block power and correlation side
//! information travels digitally with its own power and bandwidth cost.
//!
//! Pipeline: ROI classify -> DCT -> reference match -> side-info packet ->
//! MCS select -> power split -> per-block gains -> bandwidth prune ->
//! whiten -> I/Q -> channel -> equalize -> descale -> reconstruct ->
//! PSNR report. The [`harness`] module runs it end to end and drives the
//! sweep experiments; everything is deterministic under a fixed seed.

pub mod channel;
pub mod correlation;
pub mod error;
pub mod harness;
pub mod media_io;
pub mod metrics;
pub mod power_alloc;
pub mod receiver;
pub mod roi_coding;
pub mod sideinfo;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
