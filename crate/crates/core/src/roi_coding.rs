//! ROI classification and run-length coding of ROI block positions.
//!
//! Blocks are ROI when their 8x8 footprint overlaps a detector rectangle in
//! at least one pixel. Runs of consecutive ROI blocks in row-major index
//! order become (start, end) spans; a rectangle therefore yields one span
//! per covered grid row.

use crate::error::{Error, Result};
use crate::media_io::{RoiRect, BLOCK_DIM};
use crate::transform::BlockGrid;

/// Inclusive run of ROI blocks in linear index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiSpan {
    pub start: usize,
    pub end: usize,
}

/// Per-block ROI flags for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    flags: Vec<bool>,
}

impl RoiMask {
    pub fn new(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn all_non_roi(n_blocks: usize) -> Self {
        Self {
            flags: vec![false; n_blocks],
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_roi(&self, index: usize) -> bool {
        self.flags[index]
    }

    /// Number of ROI blocks N_r.
    pub fn n_roi(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Number of non-ROI blocks N_nr.
    pub fn n_non_roi(&self) -> usize {
        self.len() - self.n_roi()
    }

    /// ROI pixel count S(r).
    pub fn s_roi(&self) -> usize {
        self.n_roi() * BLOCK_DIM * BLOCK_DIM
    }

    /// Non-ROI pixel count S(nr).
    pub fn s_non_roi(&self) -> usize {
        self.n_non_roi() * BLOCK_DIM * BLOCK_DIM
    }
}

/// Marks every block whose pixel footprint intersects any rectangle.
pub fn classify_blocks(grid: &BlockGrid, rects: &[RoiRect]) -> RoiMask {
    let mut flags = vec![false; grid.len()];
    for rect in rects {
        // Grid rows/cols covered by the rectangle (any-overlap rule).
        let col_lo = rect.x / BLOCK_DIM;
        let col_hi = ((rect.x + rect.w - 1) / BLOCK_DIM).min(grid.blocks_x - 1);
        let row_lo = rect.y / BLOCK_DIM;
        let row_hi = ((rect.y + rect.h - 1) / BLOCK_DIM).min(grid.blocks_y - 1);
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                flags[grid.index(row, col)] = true;
            }
        }
    }
    RoiMask::new(flags)
}

/// Collapses maximal runs of ROI blocks into spans.
pub fn rlc_encode(mask: &RoiMask) -> Vec<RoiSpan> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for (index, &flag) in mask.flags().iter().enumerate() {
        match (flag, run_start) {
            (true, None) => run_start = Some(index),
            (false, Some(start)) => {
                spans.push(RoiSpan {
                    start,
                    end: index - 1,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(start) = run_start {
        spans.push(RoiSpan {
            start,
            end: mask.len() - 1,
        });
    }
    spans
}

/// Expands spans back to a mask. Spans must be sorted, non-overlapping and
/// within `[0, n_blocks)`.
pub fn rlc_decode(spans: &[RoiSpan], n_blocks: usize) -> Result<RoiMask> {
    let mut flags = vec![false; n_blocks];
    let mut previous_end: Option<usize> = None;
    for span in spans {
        if span.start > span.end || span.end >= n_blocks {
            return Err(Error::Validation(format!(
                "span ({}, {}) invalid for {} blocks",
                span.start, span.end, n_blocks
            )));
        }
        if let Some(prev) = previous_end {
            if span.start <= prev {
                return Err(Error::Validation(format!(
                    "span ({}, {}) overlaps or is unsorted after end {prev}",
                    span.start, span.end
                )));
            }
        }
        for flag in &mut flags[span.start..=span.end] {
            *flag = true;
        }
        previous_end = Some(span.end);
    }
    Ok(RoiMask::new(flags))
}
