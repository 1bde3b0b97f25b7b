//! Equalization, descaling, and frame reconstruction.
//!
//! The receiver divides each packet by its known fading gain (perfect CSI),
//! undoes the transmitter's power scaling per block, inverse-transforms,
//! and reassembles the frame. Skipped blocks come back as zeros. Analytic
//! per-block distortions (`m * sigma_eff^2 / g^2`) turn a gain vector into
//! an expected-quality report without running noise.

use num_complex::Complex64;

use crate::channel::SymbolStream;
use crate::error::{Error, Result};
use crate::media_io::LumaFrame;
use crate::metrics;
use crate::roi_coding::RoiMask;
use crate::transform::{self, BlockGrid, BLOCK_LEN};

/// Effective noise variance per real coefficient given the total complex
/// noise variance per symbol.
pub fn sigma_eff_sq(sigma0_sq: f64) -> f64 {
    sigma0_sq / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    /// Zero-forcing: divide by the gain.
    Zf,
    /// Linear MMSE refinement using the dequantized block power as prior.
    Llse,
}

/// Per-packet division by the fading gain. Packets faded to exactly zero
/// cannot be inverted and are zeroed instead.
pub fn equalize_zf(stream: &SymbolStream) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(stream.received.len());
    for (packet_index, packet) in stream.received.chunks(stream.packet_len).enumerate() {
        let h = stream.fading[packet_index];
        for &symbol in packet {
            out.push(if h > 0.0 {
                symbol / h
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
    }
    out
}

/// Per-packet MMSE equalization `h*S / (h^2*S + sigma0^2) * r`, with `S`
/// the mean transmitted symbol energy. Unlike plain inversion this stays
/// bounded through deep fades (a dead packet decays to zero instead of
/// amplifying noise without limit) and reduces to [`equalize_zf`] as the
/// noise vanishes.
pub fn equalize_mmse(stream: &SymbolStream, sigma0_sq: f64, signal_energy: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(stream.received.len());
    for (packet_index, packet) in stream.received.chunks(stream.packet_len).enumerate() {
        let h = stream.fading[packet_index];
        let coeff = h * signal_energy / (h * h * signal_energy + sigma0_sq);
        for &symbol in packet {
            out.push(coeff * symbol);
        }
    }
    out
}

/// Residual error variance per real dimension after [`equalize_zf`], one
/// entry per packet.
pub fn packet_noise_vars_zf(stream: &SymbolStream, sigma0_sq: f64) -> Vec<f64> {
    stream
        .fading
        .iter()
        .map(|&h| sigma_eff_sq(sigma0_sq) / (h * h).max(1e-30))
        .collect()
}

/// Residual error variance per real dimension after [`equalize_mmse`]:
/// the suppressed-signal part `(1 - c*h)^2 * S/2` plus the passed-through
/// noise `c^2 * sigma0^2 / 2`.
pub fn packet_noise_vars_mmse(
    stream: &SymbolStream,
    sigma0_sq: f64,
    signal_energy: f64,
) -> Vec<f64> {
    stream
        .fading
        .iter()
        .map(|&h| {
            let c = h * signal_energy / (h * h * signal_energy + sigma0_sq);
            let bias = 1.0 - c * h;
            bias * bias * signal_energy / 2.0 + c * c * sigma0_sq / 2.0
        })
        .collect()
}

/// Zero-forcing estimate `theta_hat = r / g`.
pub fn descale_zf(received: &[f64], gain: f64) -> Result<Vec<f64>> {
    if gain <= 0.0 {
        return Err(Error::Domain(format!("gain {gain} must be positive")));
    }
    Ok(received.iter().map(|r| r / gain).collect())
}

/// Wiener-scaled estimate `theta_hat = g*lambda / (g^2*lambda + sigma^2) * r`.
/// Reduces to zero-forcing as the noise vanishes.
pub fn descale_llse(
    received: &[f64],
    gain: f64,
    lambda_hat: f64,
    sigma_eff_sq: f64,
) -> Result<Vec<f64>> {
    if gain <= 0.0 {
        return Err(Error::Domain(format!("gain {gain} must be positive")));
    }
    if lambda_hat < 0.0 || sigma_eff_sq < 0.0 {
        return Err(Error::Domain(
            "lambda and noise variance must be non-negative".into(),
        ));
    }
    let denom = gain * gain * lambda_hat + sigma_eff_sq;
    let factor = if denom > 0.0 {
        gain * lambda_hat / denom
    } else {
        0.0
    };
    Ok(received.iter().map(|r| factor * r).collect())
}

/// Expected squared reconstruction error of a transmitted block,
/// `m * sigma_eff^2 / g^2`.
pub fn expected_distortion(gain: f64, sigma_eff_sq: f64, m: usize) -> Result<f64> {
    if gain <= 0.0 {
        return Err(Error::Domain(format!("gain {gain} must be positive")));
    }
    Ok(m as f64 * sigma_eff_sq / (gain * gain))
}

/// Distortion of a block that was never sent: its whole signal energy.
pub fn skipped_distortion(lambda_hat: f64, m: usize) -> f64 {
    m as f64 * lambda_hat
}

/// One block as seen by the receiver. `coeffs` is empty for skipped
/// blocks. `noise_var` is the effective per-coefficient noise variance
/// after equalization (and dewhitening), used by the LLSE decoder.
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    pub index: usize,
    pub coeffs: Vec<f64>,
    pub gain: f64,
    pub lambda_hat: f64,
    pub noise_var: f64,
    pub roi: bool,
}

/// Descales, inverse-transforms, and reassembles received blocks. Every
/// grid position must appear exactly once; skipped blocks (empty
/// coefficients) reconstruct as zeros. Pixels are rounded half away from
/// zero and clamped to [0, 255].
pub fn reconstruct_frame(
    blocks: &[ReceivedBlock],
    grid: &BlockGrid,
    decoder: DecoderKind,
) -> Result<LumaFrame> {
    if blocks.len() != grid.len() {
        return Err(Error::Integrity(format!(
            "{} blocks for a {}-block grid",
            blocks.len(),
            grid.len()
        )));
    }
    let mut seen = vec![false; grid.len()];
    let mut pixel_blocks = vec![[0u8; BLOCK_LEN]; grid.len()];
    for block in blocks {
        if block.index >= grid.len() || seen[block.index] {
            return Err(Error::Integrity(format!(
                "block index {} missing or duplicated",
                block.index
            )));
        }
        seen[block.index] = true;
        if block.coeffs.is_empty() {
            continue; // skipped: stays zero
        }
        if block.coeffs.len() != BLOCK_LEN {
            return Err(Error::Integrity(format!(
                "block {} carries {} coefficients",
                block.index,
                block.coeffs.len()
            )));
        }
        let estimates = match decoder {
            DecoderKind::Zf => descale_zf(&block.coeffs, block.gain)?,
            DecoderKind::Llse => {
                descale_llse(&block.coeffs, block.gain, block.lambda_hat, block.noise_var)?
            }
        };
        let coeffs: [f64; BLOCK_LEN] = estimates.try_into().expect("length checked");
        let pixels = transform::dct2_inverse(&coeffs);
        let out = &mut pixel_blocks[block.index];
        for (slot, &value) in out.iter_mut().zip(pixels.iter()) {
            // Round half away from zero, then clamp.
            let rounded = if value >= 0.0 {
                (value + 0.5).floor()
            } else {
                (value - 0.5).ceil()
            };
            *slot = rounded.clamp(0.0, 255.0) as u8;
        }
    }
    transform::reassemble_frame(grid, &pixel_blocks)
}

/// Analytic quality summary derived from gains instead of a noisy run.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    pub per_block: Vec<f64>,
    pub roi_sum: f64,
    pub non_roi_sum: f64,
    pub psnr_overall: f64,
    pub psnr_roi: Option<f64>,
    pub psnr_non_roi: Option<f64>,
}

/// Builds the expected-distortion report for one frame. Gains of zero mark
/// skipped blocks, which contribute their signal energy instead.
pub fn distortion_report(
    gains: &[f64],
    lambda_hats: &[f64],
    mask: &RoiMask,
    sigma_eff_sq: f64,
) -> Result<DistortionReport> {
    if gains.len() != mask.len() || lambda_hats.len() != mask.len() {
        return Err(Error::Validation(format!(
            "{} gains / {} lambdas for {} blocks",
            gains.len(),
            lambda_hats.len(),
            mask.len()
        )));
    }
    let mut per_block = Vec::with_capacity(gains.len());
    let mut roi_sum = 0.0;
    let mut non_roi_sum = 0.0;
    for index in 0..gains.len() {
        let d = if gains[index] > 0.0 {
            expected_distortion(gains[index], sigma_eff_sq, BLOCK_LEN)?
        } else {
            skipped_distortion(lambda_hats[index], BLOCK_LEN)
        };
        per_block.push(d);
        if mask.is_roi(index) {
            roi_sum += d;
        } else {
            non_roi_sum += d;
        }
    }

    let pixels_per_block = BLOCK_LEN as f64;
    let n_roi = mask.n_roi() as f64;
    let n_non_roi = mask.n_non_roi() as f64;
    let total_pixels = pixels_per_block * (n_roi + n_non_roi);
    let psnr_overall = metrics::psnr((roi_sum + non_roi_sum) / total_pixels)?;
    let psnr_roi = if mask.n_roi() > 0 {
        Some(metrics::psnr(roi_sum / (pixels_per_block * n_roi))?)
    } else {
        None
    };
    let psnr_non_roi = if mask.n_non_roi() > 0 {
        Some(metrics::psnr(non_roi_sum / (pixels_per_block * n_non_roi))?)
    } else {
        None
    };
    Ok(DistortionReport {
        per_block,
        roi_sum,
        non_roi_sum,
        psnr_overall,
        psnr_roi,
        psnr_non_roi,
    })
}
