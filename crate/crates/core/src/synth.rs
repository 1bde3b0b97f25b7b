//! Deterministic synthetic fixtures.
//!
//! Real surveillance-style footage cannot ship with the crate, so tests
//! and the CLI generate it: a bright static textured background with one
//! moving dark textured object and one static secondary object, plus the
//! matching ROI rectangles. The background is brighter (higher block
//! power) than the objects and the object pattern translates rigidly, so
//! block matching against frame 0 behaves like it would on near-static
//! camera footage.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::media_io::{LumaFrame, RoiRect, RoiTable};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Pixels the moving object advances per frame.
    pub speed: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 176,
            height: 144,
            frames: 30,
            seed: 0,
            // Half a block per frame: even frames sit on the block grid,
            // where every object block is a rigid translate of the
            // reference and matches exactly.
            speed: 4,
        }
    }
}

const MOVER_W: usize = 48;
const MOVER_H: usize = 32;
const MOVER_Y: usize = 48;
const STATIC_X: usize = 128;
const STATIC_Y: usize = 104;
const STATIC_W: usize = 24;
const STATIC_H: usize = 24;

fn hash_noise(x: u64, y: u64, seed: u64, salt: u64) -> f64 {
    let mut v = x
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(y.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(seed.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(salt);
    v ^= v >> 30;
    v = v.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    v ^= v >> 27;
    v = v.wrapping_mul(0x94D0_49BB_1331_11EB);
    v ^= v >> 31;
    (v >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn background_pixel(x: usize, y: usize, seed: u64) -> f64 {
    let fx = x as f64;
    let fy = y as f64;
    150.0
        + 35.0
            * (fx * std::f64::consts::TAU / 23.0).sin()
            * (fy * std::f64::consts::TAU / 17.0).cos()
        + 18.0 * hash_noise(x as u64, y as u64, seed, 1)
}

fn object_pixel(u: usize, v: usize, seed: u64, salt: u64) -> f64 {
    let fu = u as f64;
    let fv = v as f64;
    70.0 + 25.0
        * (fu * std::f64::consts::TAU / 7.0).sin()
        * (fv * std::f64::consts::TAU / 5.0).cos()
        + 12.0 * hash_noise(u as u64, v as u64, seed, salt)
}

/// Horizontal position of the moving object at frame `t`: a triangle wave
/// that bounces between the frame edges.
fn mover_x(config: &SynthConfig, t: usize) -> usize {
    let travel = config.width - MOVER_W;
    if travel == 0 {
        return 0;
    }
    let phase = (t * config.speed) % (2 * travel);
    if phase <= travel {
        phase
    } else {
        2 * travel - phase
    }
}

/// Generates the sequence and its ROI rectangles, keyed by frame index.
pub fn sequence(config: &SynthConfig) -> Result<(Vec<LumaFrame>, RoiTable)> {
    let mut frames = Vec::with_capacity(config.frames);
    let mut rois = HashMap::new();
    for t in 0..config.frames {
        let mx = mover_x(config, t);
        let mut pixels = vec![0u8; config.width * config.height];
        for y in 0..config.height {
            for x in 0..config.width {
                let in_mover =
                    x >= mx && x < mx + MOVER_W && (MOVER_Y..MOVER_Y + MOVER_H).contains(&y);
                let in_static = (STATIC_X..STATIC_X + STATIC_W).contains(&x)
                    && (STATIC_Y..STATIC_Y + STATIC_H).contains(&y);
                let value = if in_mover {
                    object_pixel(x - mx, y - MOVER_Y, config.seed, 2)
                } else if in_static {
                    object_pixel(x - STATIC_X, y - STATIC_Y, config.seed, 3)
                } else {
                    background_pixel(x, y, config.seed)
                };
                pixels[y * config.width + x] = value.round().clamp(0.0, 255.0) as u8;
            }
        }
        frames.push(LumaFrame::new(config.width, config.height, pixels)?);
        rois.insert(
            t,
            vec![
                RoiRect {
                    frame_index: t,
                    x: mx,
                    y: MOVER_Y,
                    w: MOVER_W,
                    h: MOVER_H,
                },
                RoiRect {
                    frame_index: t,
                    x: STATIC_X,
                    y: STATIC_Y,
                    w: STATIC_W,
                    h: STATIC_H,
                },
            ],
        );
    }
    Ok((frames, rois))
}

/// A frame of independent uniform pixels: every block carries roughly the
/// same power, useful for degenerate-allocation tests.
pub fn iid_frame(width: usize, height: usize, seed: u64) -> Result<LumaFrame> {
    let pixels: Vec<u8> = (0..width * height)
        .map(|i| {
            let n = hash_noise((i % width) as u64, (i / width) as u64, seed, 4);
            ((n * 0.5 + 0.5) * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    LumaFrame::new(width, height, pixels)
}

/// Writes the sequence as a luma-only raw file plus an ROI CSV; returns
/// the two paths.
pub fn write_fixtures(dir: &Path, config: &SynthConfig) -> Result<(PathBuf, PathBuf)> {
    let (frames, rois) = sequence(config)?;
    let video_path = dir.join("synthetic.yuv");
    let csv_path = dir.join("synthetic_roi.csv");

    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let mut video = File::create(&video_path).map_err(io_err(&video_path))?;
    for frame in &frames {
        video
            .write_all(frame.pixels())
            .map_err(io_err(&video_path))?;
    }

    let mut csv = File::create(&csv_path).map_err(io_err(&csv_path))?;
    writeln!(csv, "# frame,x,y,w,h").map_err(io_err(&csv_path))?;
    let mut keys: Vec<&usize> = rois.keys().collect();
    keys.sort();
    for key in keys {
        for rect in &rois[key] {
            writeln!(
                csv,
                "{},{},{},{},{}",
                rect.frame_index, rect.x, rect.y, rect.w, rect.h
            )
            .map_err(io_err(&csv_path))?;
        }
    }
    Ok((video_path, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_io::{load_roi_rects, load_yuv_frames, PixelFormat};

    #[test]
    fn sequence_is_deterministic_and_static_background() {
        let config = SynthConfig {
            frames: 3,
            ..SynthConfig::default()
        };
        let (a, _) = sequence(&config).unwrap();
        let (b, _) = sequence(&config).unwrap();
        assert_eq!(a[2], b[2]);
        // A pixel far from both objects never changes.
        assert_eq!(a[0].pixel(4, 4), a[2].pixel(4, 4));
    }

    #[test]
    fn roi_stays_small_and_in_bounds() {
        let config = SynthConfig {
            frames: 400,
            ..SynthConfig::default()
        };
        let (frames, rois) = sequence(&config).unwrap();
        for (index, rects) in &rois {
            let frame = &frames[*index];
            let mut roi_pixels = 0;
            for rect in rects {
                rect.validate(frame.width(), frame.height()).unwrap();
                roi_pixels += rect.w * rect.h;
            }
            assert!((roi_pixels as f64) < 0.3 * (frame.width() * frame.height()) as f64);
        }
    }

    #[test]
    fn written_fixtures_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            frames: 4,
            ..SynthConfig::default()
        };
        let (video, csv) = write_fixtures(dir.path(), &config).unwrap();
        let frames = load_yuv_frames(&video, 176, 144, PixelFormat::Luma, &[0, 3]).unwrap();
        let (expected, _) = sequence(&config).unwrap();
        assert_eq!(frames[0], expected[0]);
        assert_eq!(frames[1], expected[3]);
        let rects = load_roi_rects(&csv, 176, 144).unwrap();
        assert_eq!(rects.len(), 4);
        assert_eq!(rects[&0].len(), 2);
    }
}
