//! Raw video and ROI ingest, PGM output.
//!
//! Frames are 8-bit luminance planes read either from planar 4:2:0 files
//! (chroma skipped) or from luma-only raw files. ROI rectangles come from an
//! external detector as CSV records `frame,x,y,w,h`; this crate consumes
//! them, it never runs a detector. Reconstructed frames are written as
//! binary PGM (P5).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Side length of the square pixel blocks every frame is cut into.
pub const BLOCK_DIM: usize = 8;

/// Detector rectangles grouped by frame index.
pub type RoiTable = HashMap<usize, Vec<RoiRect>>;

/// One 8-bit luminance frame. Width and height must be multiples of 8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumaFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl LumaFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0
            || height == 0
            || !width.is_multiple_of(BLOCK_DIM)
            || !height.is_multiple_of(BLOCK_DIM)
        {
            return Err(Error::Validation(format!(
                "frame dimensions {width}x{height} must be nonzero multiples of {BLOCK_DIM}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Validation(format!(
                "pixel buffer holds {} bytes, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Axis-aligned ROI rectangle in pixel coordinates (top-left corner form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiRect {
    pub frame_index: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RoiRect {
    /// Validates the rectangle against a frame geometry.
    pub fn validate(&self, frame_width: usize, frame_height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::Validation(format!(
                "rect for frame {} has empty extent {}x{}",
                self.frame_index, self.w, self.h
            )));
        }
        if self.x + self.w > frame_width || self.y + self.h > frame_height {
            return Err(Error::Validation(format!(
                "rect ({},{}) {}x{} exceeds frame {}x{}",
                self.x, self.y, self.w, self.h, frame_width, frame_height
            )));
        }
        Ok(())
    }
}

/// Frame layout of a raw video file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    /// Planar YUV 4:2:0: a frame occupies `w*h*3/2` bytes, luma first.
    Yuv420,
    /// Luma plane only: a frame occupies `w*h` bytes.
    Luma,
}

impl PixelFormat {
    pub fn frame_stride(self, width: usize, height: usize) -> usize {
        match self {
            PixelFormat::Yuv420 => width * height * 3 / 2,
            PixelFormat::Luma => width * height,
        }
    }
}

/// Reads the luma planes of the requested frames, in the requested order.
pub fn load_yuv_frames(
    path: &Path,
    width: usize,
    height: usize,
    format: PixelFormat,
    indices: &[usize],
) -> Result<Vec<LumaFrame>> {
    let mut file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file_len = file
        .metadata()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .len() as usize;

    let stride = format.frame_stride(width, height);
    let plane = width * height;
    let complete_frames = file_len / stride;

    let mut frames = Vec::with_capacity(indices.len());
    for &index in indices {
        if index >= complete_frames {
            // A partial tail frame is a truncation, anything past the data
            // is an ordinary range error.
            if index * stride < file_len {
                return Err(Error::TruncatedInput(format!(
                    "frame {index} is cut short: file holds {file_len} bytes, \
                     frame needs bytes {}..{}",
                    index * stride,
                    (index + 1) * stride
                )));
            }
            return Err(Error::OutOfRange(format!(
                "frame {index} requested but file holds {complete_frames} frames"
            )));
        }
        file.seek(SeekFrom::Start((index * stride) as u64))
            .map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
        let mut pixels = vec![0u8; plane];
        file.read_exact(&mut pixels).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        frames.push(LumaFrame::new(width, height, pixels)?);
    }
    Ok(frames)
}

/// Parses a detector CSV (`frame,x,y,w,h`, `#` comments) and groups the
/// rectangles by frame. Frames absent from the file get no entry; callers
/// treat those as all non-ROI.
pub fn load_roi_rects(path: &Path, frame_width: usize, frame_height: usize) -> Result<RoiTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut rects: RoiTable = HashMap::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 5 fields `frame,x,y,w,h`, got {}", fields.len()),
            });
        }
        let mut values = [0usize; 5];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{field}` is not a non-negative integer"),
            })?;
        }
        let rect = RoiRect {
            frame_index: values[0],
            x: values[1],
            y: values[2],
            w: values[3],
            h: values[4],
        };
        rect.validate(frame_width, frame_height)?;
        rects.entry(rect.frame_index).or_default().push(rect);
    }
    Ok(rects)
}

/// Writes a frame as binary PGM (P5, maxval 255).
pub fn write_frame_pgm(frame: &LumaFrame, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    write!(writer, "P5\n{} {}\n255\n", frame.width(), frame.height()).map_err(io_err)?;
    writer.write_all(frame.pixels()).map_err(io_err)?;
    writer.flush().map_err(io_err)
}

/// Reads a binary PGM written by [`write_frame_pgm`] back into a frame.
pub fn read_frame_pgm(path: &Path) -> Result<LumaFrame> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;

    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::TruncatedInput("pgm header ends early".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(Error::Validation(format!(
            "expected P5 magic, found `{magic}`"
        )));
    }
    let width: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::Validation("bad pgm width".into()))?;
    let height: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::Validation("bad pgm height".into()))?;
    let maxval: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::Validation("bad pgm maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Validation(format!(
            "only maxval 255 supported, found {maxval}"
        )));
    }
    // Single whitespace byte separates header from raster.
    pos += 1;
    let raster = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| Error::TruncatedInput("pgm raster shorter than geometry".into()))?;
    LumaFrame::new(width, height, raster.to_vec())
}
