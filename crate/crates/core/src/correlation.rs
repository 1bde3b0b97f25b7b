//! Reference-frame block matching and the correlation gain.
//!
//! Each transmitted block is matched against the reference frame with a
//! full search over a small window around the co-located position, scored
//! by mean-removed normalized cross-correlation. The correlation factor
//! feeds the gain `ell(k) = (k + sqrt((M-1)(1-k^2)))^2` that weighs a block
//! in the unequal power allocation.

use crate::error::{Error, Result};
use crate::media_io::{LumaFrame, BLOCK_DIM};
use crate::transform::BLOCK_LEN;

/// Default half-width of the match search window, in pixels.
pub const DEFAULT_MATCH_RADIUS: usize = 8;

/// Outcome of matching one block against the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub block_index: usize,
    /// Top-left pixel of the best reference window.
    pub ref_row: usize,
    pub ref_col: usize,
    /// Correlation factor, NCC clamped to [0, 1].
    pub k: f64,
}

fn window_pixels(reference: &LumaFrame, top: usize, left: usize) -> [u8; BLOCK_LEN] {
    let mut out = [0u8; BLOCK_LEN];
    for row in 0..BLOCK_DIM {
        for col in 0..BLOCK_DIM {
            out[row * BLOCK_DIM + col] = reference.pixel(left + col, top + row);
        }
    }
    out
}

/// Mean-removed NCC of two 8x8 pixel blocks. Constant blocks have no
/// defined correlation: identical blocks score 1, anything else 0.
fn ncc_score(a: &[u8; BLOCK_LEN], b: &[u8; BLOCK_LEN]) -> f64 {
    if a == b {
        return 1.0;
    }
    let mean =
        |v: &[u8; BLOCK_LEN]| v.iter().map(|&p| f64::from(p)).sum::<f64>() / BLOCK_LEN as f64;
    let ma = mean(a);
    let mb = mean(b);
    let mut num = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&pa, &pb) in a.iter().zip(b.iter()) {
        let da = f64::from(pa) - ma;
        let db = f64::from(pb) - mb;
        num += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    num / (var_a.sqrt() * var_b.sqrt())
}

/// Full search for the reference window most similar to `block`.
///
/// Candidates are the 8x8 windows whose top-left corner lies within
/// `radius` pixels of the co-located corner `(center_row, center_col)`,
/// clipped to the reference bounds. Ties keep the smallest (row, col).
pub fn match_block(
    block: &[u8; BLOCK_LEN],
    reference: &LumaFrame,
    block_index: usize,
    center_row: usize,
    center_col: usize,
    radius: usize,
) -> MatchResult {
    let max_top = reference.height() - BLOCK_DIM;
    let max_left = reference.width() - BLOCK_DIM;
    let row_lo = center_row.saturating_sub(radius);
    let row_hi = (center_row + radius).min(max_top);
    let col_lo = center_col.saturating_sub(radius);
    let col_hi = (center_col + radius).min(max_left);

    let mut best: Option<(f64, usize, usize)> = None;
    for top in row_lo..=row_hi {
        for left in col_lo..=col_hi {
            let window = window_pixels(reference, top, left);
            let score = ncc_score(block, &window);
            // Strict improvement only: row-major scan keeps the earliest
            // position on ties.
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, top, left));
            }
        }
    }
    let (score, ref_row, ref_col) = best.expect("search window is never empty");
    MatchResult {
        block_index,
        ref_row,
        ref_col,
        k: score.clamp(0.0, 1.0),
    }
}

/// Correlation gain `ell(k) = (k + sqrt((m-1)(1-k^2)))^2`.
///
/// For m = 64 the gain spans [1, 64]: 1 at k = 1, 63 at k = 0, peaking at
/// 64 when k = 1/8.
pub fn corr_gain(k: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "correlation factor {k} outside [0, 1]"
        )));
    }
    if m == 0 {
        return Err(Error::Domain("block size must be at least 1".into()));
    }
    let root = ((m as f64 - 1.0) * (1.0 - k * k)).sqrt();
    Ok((k + root) * (k + root))
}
