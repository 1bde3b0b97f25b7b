//! Block partitioning and the orthonormal 8x8 2D-DCT.
//!
//! The DCT is type-II with orthonormal scaling, so Parseval holds and the
//! per-block power bookkeeping is independent of the transform: the energy
//! of a pixel block equals the energy of its 64 coefficients.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::media_io::{LumaFrame, BLOCK_DIM};

/// Coefficients per block (8x8).
pub const BLOCK_LEN: usize = BLOCK_DIM * BLOCK_DIM;

/// Blocks with mean coefficient power at or below this are treated as
/// carrying no signal and are skipped by the allocators.
pub const LAMBDA_EPSILON: f64 = 1e-12;

/// Row-major grid of 8x8 blocks covering a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub frame_width: usize,
    pub frame_height: usize,
}

impl BlockGrid {
    pub fn for_frame(frame: &LumaFrame) -> Self {
        Self {
            blocks_x: frame.width() / BLOCK_DIM,
            blocks_y: frame.height() / BLOCK_DIM,
            frame_width: frame.width(),
            frame_height: frame.height(),
        }
    }

    /// Total block count N_s.
    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block index -> (row, col).
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.blocks_x, index % self.blocks_x)
    }

    /// (row, col) -> block index.
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.blocks_x + col
    }

    /// Top-left pixel of a block.
    pub fn pixel_origin(&self, index: usize) -> (usize, usize) {
        let (row, col) = self.position(index);
        (col * BLOCK_DIM, row * BLOCK_DIM)
    }
}

/// One block's transform-domain state as carried through the pipeline.
#[derive(Debug, Clone)]
pub struct DctBlock {
    pub index: usize,
    pub coeffs: Vec<f64>,
    /// Mean coefficient power, (1/64)*sum(theta^2).
    pub lambda: f64,
    /// Correlation factor against the best reference match, in 0..=1.
    pub k: f64,
    /// Correlation gain derived from `k`.
    pub ell: f64,
    pub roi: bool,
}

impl DctBlock {
    pub fn new(index: usize, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), BLOCK_LEN);
        let lambda = block_power(&coeffs);
        Self {
            index,
            coeffs,
            lambda,
            k: 1.0,
            ell: 1.0,
            roi: false,
        }
    }
}

/// Cuts a frame into row-major 8x8 pixel blocks.
pub fn partition_blocks(frame: &LumaFrame) -> (BlockGrid, Vec<[u8; BLOCK_LEN]>) {
    let grid = BlockGrid::for_frame(frame);
    let mut blocks = Vec::with_capacity(grid.len());
    for index in 0..grid.len() {
        let (x0, y0) = grid.pixel_origin(index);
        let mut block = [0u8; BLOCK_LEN];
        for row in 0..BLOCK_DIM {
            for col in 0..BLOCK_DIM {
                block[row * BLOCK_DIM + col] = frame.pixel(x0 + col, y0 + row);
            }
        }
        blocks.push(block);
    }
    (grid, blocks)
}

/// Rebuilds a frame from row-major 8x8 blocks. Inverse of [`partition_blocks`].
pub fn reassemble_frame(grid: &BlockGrid, blocks: &[[u8; BLOCK_LEN]]) -> Result<LumaFrame> {
    if blocks.len() != grid.len() {
        return Err(Error::Validation(format!(
            "grid holds {} blocks, got {}",
            grid.len(),
            blocks.len()
        )));
    }
    let mut pixels = vec![0u8; grid.frame_width * grid.frame_height];
    for (index, block) in blocks.iter().enumerate() {
        let (x0, y0) = grid.pixel_origin(index);
        for row in 0..BLOCK_DIM {
            for col in 0..BLOCK_DIM {
                pixels[(y0 + row) * grid.frame_width + x0 + col] = block[row * BLOCK_DIM + col];
            }
        }
    }
    LumaFrame::new(grid.frame_width, grid.frame_height, pixels)
}

/// Orthonormal DCT-II basis matrix, row u holds the u-th basis vector.
fn dct_matrix() -> &'static [[f64; BLOCK_DIM]; BLOCK_DIM] {
    static MATRIX: OnceLock<[[f64; BLOCK_DIM]; BLOCK_DIM]> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let n = BLOCK_DIM as f64;
        let mut m = [[0.0; BLOCK_DIM]; BLOCK_DIM];
        for (u, row) in m.iter_mut().enumerate() {
            let scale = if u == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for (x, cell) in row.iter_mut().enumerate() {
                *cell = scale
                    * (std::f64::consts::PI * (2.0 * x as f64 + 1.0) * u as f64 / (2.0 * n)).cos();
            }
        }
        m
    })
}

/// Forward orthonormal 2D-DCT of one 8x8 block (row-major).
pub fn dct2_forward(block: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
    let m = dct_matrix();
    // tmp = C * X
    let mut tmp = [0.0; BLOCK_LEN];
    for u in 0..BLOCK_DIM {
        for x in 0..BLOCK_DIM {
            let mut acc = 0.0;
            for k in 0..BLOCK_DIM {
                acc += m[u][k] * block[k * BLOCK_DIM + x];
            }
            tmp[u * BLOCK_DIM + x] = acc;
        }
    }
    // out = tmp * C^T
    let mut out = [0.0; BLOCK_LEN];
    for u in 0..BLOCK_DIM {
        for v in 0..BLOCK_DIM {
            let mut acc = 0.0;
            for k in 0..BLOCK_DIM {
                acc += tmp[u * BLOCK_DIM + k] * m[v][k];
            }
            out[u * BLOCK_DIM + v] = acc;
        }
    }
    out
}

/// Inverse of [`dct2_forward`].
pub fn dct2_inverse(coeffs: &[f64; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
    let m = dct_matrix();
    // tmp = C^T * Y
    let mut tmp = [0.0; BLOCK_LEN];
    for x in 0..BLOCK_DIM {
        for v in 0..BLOCK_DIM {
            let mut acc = 0.0;
            for k in 0..BLOCK_DIM {
                acc += m[k][x] * coeffs[k * BLOCK_DIM + v];
            }
            tmp[x * BLOCK_DIM + v] = acc;
        }
    }
    // out = tmp * C
    let mut out = [0.0; BLOCK_LEN];
    for x in 0..BLOCK_DIM {
        for y in 0..BLOCK_DIM {
            let mut acc = 0.0;
            for k in 0..BLOCK_DIM {
                acc += tmp[x * BLOCK_DIM + k] * m[k][y];
            }
            out[x * BLOCK_DIM + y] = acc;
        }
    }
    out
}

/// Mean coefficient power of a block: (1/64)*sum(theta^2).
pub fn block_power(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum::<f64>() / coeffs.len() as f64
}

/// Converts a pixel block to transform input.
pub fn block_to_f64(block: &[u8; BLOCK_LEN]) -> [f64; BLOCK_LEN] {
    let mut out = [0.0; BLOCK_LEN];
    for (dst, &src) in out.iter_mut().zip(block.iter()) {
        *dst = f64::from(src);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng) -> [f64; BLOCK_LEN] {
        let mut b = [0.0; BLOCK_LEN];
        for v in &mut b {
            *v = rng.gen_range(-255.0..255.0);
        }
        b
    }

    #[test]
    fn qcif_grid_geometry() {
        let frame = LumaFrame::new(176, 144, vec![0; 176 * 144]).unwrap();
        let (grid, blocks) = partition_blocks(&frame);
        assert_eq!((grid.blocks_x, grid.blocks_y), (22, 18));
        assert_eq!(grid.len(), 396);
        assert_eq!(blocks.len(), 396);
    }

    #[test]
    fn grid_indexing_is_row_major_bijection() {
        let grid = BlockGrid {
            blocks_x: 22,
            blocks_y: 18,
            frame_width: 176,
            frame_height: 144,
        };
        for index in 0..grid.len() {
            let (row, col) = grid.position(index);
            assert_eq!(grid.index(row, col), index);
        }
        assert_eq!(grid.position(23), (1, 1));
    }

    #[test]
    fn single_block_frame_partitions_to_itself() {
        let pixels: Vec<u8> = (0..64).map(|i| i as u8).collect();
        let frame = LumaFrame::new(8, 8, pixels.clone()).unwrap();
        let (grid, blocks) = partition_blocks(&frame);
        assert_eq!(grid.len(), 1);
        assert_eq!(&blocks[0][..], &pixels[..]);
    }

    #[test]
    fn partition_reassemble_is_identity() {
        let pixels: Vec<u8> = (0..176 * 144).map(|i| (i * 31 % 256) as u8).collect();
        let frame = LumaFrame::new(176, 144, pixels).unwrap();
        let (grid, blocks) = partition_blocks(&frame);
        let back = reassemble_frame(&grid, &blocks).unwrap();
        assert_eq!(frame, back);
    }

    #[test]
    fn constant_block_concentrates_in_dc() {
        let block = [37.0; BLOCK_LEN];
        let coeffs = dct2_forward(&block);
        assert!((coeffs[0] - 8.0 * 37.0).abs() < 1e-9);
        for &c in &coeffs[1..] {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn zero_block_transforms_to_zero() {
        let coeffs = dct2_forward(&[0.0; BLOCK_LEN]);
        assert!(coeffs.iter().all(|&c| c == 0.0));
        let back = dct2_inverse(&[0.0; BLOCK_LEN]);
        assert!(back.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn dc_only_vector_inverts_to_constant() {
        let mut coeffs = [0.0; BLOCK_LEN];
        coeffs[0] = 8.0 * 19.5;
        let block = dct2_inverse(&coeffs);
        for &p in &block {
            assert!((p - 19.5).abs() < 1e-9);
        }
    }

    // Oracle: direct summation of squared values on both sides of the
    // transform; the orthonormal DCT must preserve it.
    #[test]
    fn parseval_holds_on_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let block = random_block(&mut rng);
            let coeffs = dct2_forward(&block);
            let pixel_energy: f64 = block.iter().map(|p| p * p).sum();
            let coeff_energy: f64 = coeffs.iter().map(|c| c * c).sum();
            assert!(
                (pixel_energy - coeff_energy).abs() <= 1e-9 * pixel_energy.max(1.0),
                "energy mismatch: {pixel_energy} vs {coeff_energy}"
            );
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let block = random_block(&mut rng);
            let back = dct2_inverse(&dct2_forward(&block));
            for (a, b) in block.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dct_block_carries_its_stats() {
        let coeffs: Vec<f64> = (0..64).map(|i| i as f64 / 7.0).collect();
        let block = DctBlock::new(5, coeffs.clone());
        assert_eq!(block.index, 5);
        assert!((block.lambda - block_power(&coeffs)).abs() < 1e-15);
        assert!(block.lambda >= 0.0);
        // Defaults describe a perfectly matched non-ROI block.
        assert_eq!((block.k, block.ell, block.roi), (1.0, 1.0, false));
    }

    #[test]
    fn block_power_examples() {
        assert!((block_power(&[2.0; 64]) - 4.0).abs() < 1e-15);
        assert_eq!(block_power(&[0.0; 64]), 0.0);
        let mut coeffs = [0.0; 64];
        coeffs[0] = 8.0;
        assert!((block_power(&coeffs) - 1.0).abs() < 1e-15);
    }
}
