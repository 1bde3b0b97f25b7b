//! MSE and PSNR, whole-frame and region-restricted.
//!
//! ROI regions are evaluated over ROI block footprints (the unit the
//! allocator protects), not the raw detector rectangles. A zero MSE is
//! reported as infinite PSNR.

use crate::error::{Error, Result};
use crate::media_io::LumaFrame;
use crate::roi_coding::RoiMask;
use crate::transform::BlockGrid;

/// Peak sample value of the 8-bit pipeline.
pub const PEAK: f64 = 255.0;

fn squared_error_sums(
    a: &LumaFrame,
    b: &LumaFrame,
    mask: &RoiMask,
    grid: &BlockGrid,
) -> (u64, u64, u64, u64) {
    let mut roi_sum = 0u64;
    let mut non_roi_sum = 0u64;
    let mut roi_pixels = 0u64;
    let mut non_roi_pixels = 0u64;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let block = grid.index(y / 8, x / 8);
            let diff = i64::from(a.pixel(x, y)) - i64::from(b.pixel(x, y));
            let sq = (diff * diff) as u64;
            if mask.is_roi(block) {
                roi_sum += sq;
                roi_pixels += 1;
            } else {
                non_roi_sum += sq;
                non_roi_pixels += 1;
            }
        }
    }
    (roi_sum, non_roi_sum, roi_pixels, non_roi_pixels)
}

fn check_geometry(a: &LumaFrame, b: &LumaFrame) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Validation(format!(
            "frame geometries differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared pixel difference over the whole frame, or over the ROI /
/// non-ROI block footprint when a region is selected.
pub fn mse(
    a: &LumaFrame,
    b: &LumaFrame,
    region: Option<(&RoiMask, &BlockGrid, bool)>,
) -> Result<f64> {
    check_geometry(a, b)?;
    match region {
        None => {
            let sum: u64 = a
                .pixels()
                .iter()
                .zip(b.pixels())
                .map(|(&pa, &pb)| {
                    let diff = i64::from(pa) - i64::from(pb);
                    (diff * diff) as u64
                })
                .sum();
            Ok(sum as f64 / a.pixels().len() as f64)
        }
        Some((mask, grid, want_roi)) => {
            let (roi_sum, non_roi_sum, roi_pixels, non_roi_pixels) =
                squared_error_sums(a, b, mask, grid);
            let (sum, pixels) = if want_roi {
                (roi_sum, roi_pixels)
            } else {
                (non_roi_sum, non_roi_pixels)
            };
            if pixels == 0 {
                return Err(Error::Validation("selected region has no pixels".into()));
            }
            Ok(sum as f64 / pixels as f64)
        }
    }
}

/// `20 * log10(255 / sqrt(mse))`; zero MSE maps to infinity.
pub fn psnr(mse_value: f64) -> Result<f64> {
    if mse_value < 0.0 || mse_value.is_nan() {
        return Err(Error::Domain(format!("mse {mse_value} must be >= 0")));
    }
    if mse_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (PEAK / mse_value.sqrt()).log10())
}

/// Frame-level quality summary. Region PSNRs are absent when the region
/// is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub mse_overall: f64,
    pub psnr_overall: f64,
    pub psnr_roi: Option<f64>,
    pub psnr_non_roi: Option<f64>,
    pub roi_pixels: usize,
    pub non_roi_pixels: usize,
}

/// Overall, ROI-only and non-ROI-only quality of a reconstruction.
pub fn quality_report(
    original: &LumaFrame,
    reconstructed: &LumaFrame,
    mask: &RoiMask,
    grid: &BlockGrid,
) -> Result<QualityReport> {
    check_geometry(original, reconstructed)?;
    if mask.len() != grid.len() {
        return Err(Error::Validation(format!(
            "mask covers {} blocks, grid has {}",
            mask.len(),
            grid.len()
        )));
    }
    let (roi_sum, non_roi_sum, roi_pixels, non_roi_pixels) =
        squared_error_sums(original, reconstructed, mask, grid);
    let total_pixels = roi_pixels + non_roi_pixels;
    let mse_overall = (roi_sum + non_roi_sum) as f64 / total_pixels as f64;
    let psnr_roi = if roi_pixels > 0 {
        Some(psnr(roi_sum as f64 / roi_pixels as f64)?)
    } else {
        None
    };
    let psnr_non_roi = if non_roi_pixels > 0 {
        Some(psnr(non_roi_sum as f64 / non_roi_pixels as f64)?)
    } else {
        None
    };
    Ok(QualityReport {
        mse_overall,
        psnr_overall: psnr(mse_overall)?,
        psnr_roi,
        psnr_non_roi,
        roi_pixels: roi_pixels as usize,
        non_roi_pixels: non_roi_pixels as usize,
    })
}
