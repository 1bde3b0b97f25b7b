//! Symbol-level channel simulation.
//!
//! Scaled coefficients are whitened by an orthonormal 64-point Hadamard
//! transform, paired into I/Q symbols, optionally framed onto 64 OFDM
//! subcarriers, and pushed through AWGN or Rayleigh block fading with a
//! seeded, per-packet RNG so every run is reproducible.
//!
//! Noise convention: `sigma0_sq` is the total complex noise variance per
//! symbol, i.e. `sigma0_sq / 2` per real dimension. Real coefficients
//! therefore see an effective variance of half the symbol value after
//! unpacking.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Hadamard chunk length; also the OFDM size.
pub const WHITEN_CHUNK: usize = 64;
pub const OFDM_SUBCARRIERS: usize = 64;
pub const OFDM_DATA_PER_BLOCK: usize = 48;
/// Fixed unit pilots; channel estimation itself is not simulated.
pub const PILOT_SUBCARRIERS: [usize; 4] = [7, 21, 43, 57];
const NULL_SUBCARRIERS: [usize; 12] = [0, 1, 2, 3, 4, 5, 58, 59, 60, 61, 62, 63];

/// Default symbols per fading packet (one OFDM block's data load).
pub const DEFAULT_PACKET_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// Total complex noise variance per symbol.
    pub sigma0_sq: f64,
    /// Symbols per fading packet.
    pub packet_len: usize,
    pub seed: u64,
    pub whitening: bool,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma0_sq <= 0.0 {
            return Err(Error::Domain(format!(
                "noise variance {} must be positive",
                self.sigma0_sq
            )));
        }
        if self.packet_len == 0 {
            return Err(Error::Domain("packet length must be at least 1".into()));
        }
        Ok(())
    }
}

/// In-place fast Walsh-Hadamard butterfly, orthonormal scaling.
fn hadamard_chunk(chunk: &mut [f64; WHITEN_CHUNK]) {
    let mut stride = 1;
    while stride < WHITEN_CHUNK {
        for base in (0..WHITEN_CHUNK).step_by(stride * 2) {
            for offset in base..base + stride {
                let a = chunk[offset];
                let b = chunk[offset + stride];
                chunk[offset] = a + b;
                chunk[offset + stride] = a - b;
            }
        }
        stride *= 2;
    }
    for value in chunk.iter_mut() {
        *value *= 0.125; // 1/sqrt(64)
    }
}

fn hadamard_pass(values: &mut [f64]) {
    debug_assert_eq!(values.len() % WHITEN_CHUNK, 0);
    let chunks = values.len() / WHITEN_CHUNK;
    let mut chunk = [0.0; WHITEN_CHUNK];
    for c in 0..chunks {
        // Chunks gather every chunks-th sample, so one Hadamard mix spans
        // the whole stream and a faded packet is spread thinly over all
        // coefficients instead of wiping out 64 consecutive ones.
        for (j, slot) in chunk.iter_mut().enumerate() {
            *slot = values[c + j * chunks];
        }
        hadamard_chunk(&mut chunk);
        for (j, &v) in chunk.iter().enumerate() {
            values[c + j * chunks] = v;
        }
    }
}

/// Whitens a real sequence. Returns the transformed stream (zero-padded to
/// a multiple of 64) and the pad length.
pub fn whiten(values: &[f64]) -> (Vec<f64>, usize) {
    let pad = (WHITEN_CHUNK - values.len() % WHITEN_CHUNK) % WHITEN_CHUNK;
    let mut out = values.to_vec();
    out.resize(values.len() + pad, 0.0);
    hadamard_pass(&mut out);
    (out, pad)
}

/// Inverts [`whiten`], dropping the recorded pad. The scaled Hadamard is
/// its own inverse.
pub fn dewhiten(values: &[f64], pad: usize) -> Result<Vec<f64>> {
    if !values.len().is_multiple_of(WHITEN_CHUNK) || pad >= WHITEN_CHUNK || pad > values.len() {
        return Err(Error::Validation(format!(
            "whitened stream of {} samples with pad {pad} is malformed",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    hadamard_pass(&mut out);
    out.truncate(values.len() - pad);
    Ok(out)
}

/// Propagates per-sample noise variances through [`dewhiten`]: Hadamard
/// entries are all +-1/8, so every output of a chunk carries the mean of
/// its 64 input variances.
pub fn dewhiten_noise_vars(vars: &[f64], pad: usize) -> Result<Vec<f64>> {
    if !vars.len().is_multiple_of(WHITEN_CHUNK) || pad >= WHITEN_CHUNK || pad > vars.len() {
        return Err(Error::Validation(format!(
            "variance stream of {} samples with pad {pad} is malformed",
            vars.len()
        )));
    }
    let chunks = vars.len() / WHITEN_CHUNK;
    let mut out = vec![0.0; vars.len()];
    for c in 0..chunks {
        let mean =
            (0..WHITEN_CHUNK).map(|j| vars[c + j * chunks]).sum::<f64>() / WHITEN_CHUNK as f64;
        for j in 0..WHITEN_CHUNK {
            out[c + j * chunks] = mean;
        }
    }
    out.truncate(vars.len() - pad);
    Ok(out)
}

/// Pairs consecutive reals into I/Q symbols; an odd tail is zero-padded
/// and the pad recorded.
pub fn iq_pack(values: &[f64]) -> (Vec<Complex64>, usize) {
    let symbols: Vec<Complex64> = values
        .chunks(2)
        .map(|pair| Complex64::new(pair[0], *pair.get(1).unwrap_or(&0.0)))
        .collect();
    (symbols, values.len() % 2)
}

/// Inverts [`iq_pack`].
pub fn iq_unpack(symbols: &[Complex64], pad: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        values.push(s.re);
        values.push(s.im);
    }
    let keep = values.len().saturating_sub(pad);
    values.truncate(keep);
    values
}

fn data_subcarriers() -> &'static [usize] {
    static DATA: OnceLock<Vec<usize>> = OnceLock::new();
    DATA.get_or_init(|| {
        (0..OFDM_SUBCARRIERS)
            .filter(|i| !PILOT_SUBCARRIERS.contains(i) && !NULL_SUBCARRIERS.contains(i))
            .collect()
    })
}

type FftPair = (std::sync::Arc<dyn Fft<f64>>, std::sync::Arc<dyn Fft<f64>>);

fn fft_pair() -> &'static FftPair {
    static PLANS: OnceLock<FftPair> = OnceLock::new();
    PLANS.get_or_init(|| {
        let mut planner = FftPlanner::new();
        (
            planner.plan_fft_inverse(OFDM_SUBCARRIERS),
            planner.plan_fft_forward(OFDM_SUBCARRIERS),
        )
    })
}

/// Packs symbols 48 per block onto the data subcarriers, inserts unit
/// pilots, and converts each block to the time domain with a unitary IFFT.
/// Returns the flat time-domain stream and the symbol count for deframing.
pub fn ofdm_frame(symbols: &[Complex64]) -> (Vec<Complex64>, usize) {
    let blocks = symbols.len().div_ceil(OFDM_DATA_PER_BLOCK).max(1);
    let (ifft, _) = fft_pair();
    let scale = 1.0 / (OFDM_SUBCARRIERS as f64).sqrt();
    let mut time = Vec::with_capacity(blocks * OFDM_SUBCARRIERS);
    for b in 0..blocks {
        let mut freq = [Complex64::new(0.0, 0.0); OFDM_SUBCARRIERS];
        for &pilot in &PILOT_SUBCARRIERS {
            freq[pilot] = Complex64::new(1.0, 0.0);
        }
        for (slot, &carrier) in data_subcarriers().iter().enumerate() {
            if let Some(&symbol) = symbols.get(b * OFDM_DATA_PER_BLOCK + slot) {
                freq[carrier] = symbol;
            }
        }
        ifft.process(&mut freq);
        time.extend(freq.iter().map(|v| v * scale));
    }
    (time, symbols.len())
}

/// Inverts [`ofdm_frame`] under ideal synchronization.
pub fn ofdm_deframe(time: &[Complex64], n_symbols: usize) -> Result<Vec<Complex64>> {
    if !time.len().is_multiple_of(OFDM_SUBCARRIERS) {
        return Err(Error::Validation(format!(
            "time stream of {} samples is not whole OFDM blocks",
            time.len()
        )));
    }
    if n_symbols > (time.len() / OFDM_SUBCARRIERS) * OFDM_DATA_PER_BLOCK {
        return Err(Error::Validation(format!(
            "{n_symbols} symbols cannot fit in {} blocks",
            time.len() / OFDM_SUBCARRIERS
        )));
    }
    let (_, fft) = fft_pair();
    let scale = 1.0 / (OFDM_SUBCARRIERS as f64).sqrt();
    let mut symbols = Vec::with_capacity(n_symbols);
    for block in time.chunks_exact(OFDM_SUBCARRIERS) {
        let mut freq: [Complex64; OFDM_SUBCARRIERS] = block.try_into().unwrap();
        fft.process(&mut freq);
        for &carrier in data_subcarriers() {
            if symbols.len() < n_symbols {
                symbols.push(freq[carrier] * scale);
            }
        }
    }
    Ok(symbols)
}

/// Received symbols plus the per-packet channel state that produced them.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    pub received: Vec<Complex64>,
    /// Per-packet fading magnitude, 1 for AWGN.
    pub fading: Vec<f64>,
    /// Per-packet realized SNR in dB.
    pub snr_db: Vec<f64>,
    pub packet_len: usize,
}

fn packet_rng(seed: u64, frame_index: u64, packet_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&frame_index.to_le_bytes());
    key[16..24].copy_from_slice(&packet_index.to_le_bytes());
    key[24..].copy_from_slice(&0x7061636b6574726eu64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Pushes symbols through the configured channel. Packets of
/// `config.packet_len` symbols share one fading gain; each packet owns an
/// RNG derived from (seed, frame, packet), so streams are reproducible and
/// frames can be simulated in parallel.
pub fn transmit(
    symbols: &[Complex64],
    config: &ChannelConfig,
    frame_index: u64,
) -> Result<SymbolStream> {
    config.validate()?;
    let noise_std = (config.sigma0_sq / 2.0).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut received = Vec::with_capacity(symbols.len());
    let mut fading = Vec::new();
    let mut snr_db = Vec::new();
    for (packet_index, packet) in symbols.chunks(config.packet_len).enumerate() {
        let mut rng = packet_rng(config.seed, frame_index, packet_index as u64);
        let h = match config.kind {
            ChannelKind::Awgn => 1.0,
            ChannelKind::Rayleigh => {
                let re: f64 = normal.sample(&mut rng);
                let im: f64 = normal.sample(&mut rng);
                ((re * re + im * im) / 2.0).sqrt()
            }
        };
        for symbol in packet {
            let noise = Complex64::new(
                noise_std * normal.sample(&mut rng),
                noise_std * normal.sample(&mut rng),
            );
            received.push(h * symbol + noise);
        }
        let mean_power = packet.iter().map(|s| s.norm_sqr()).sum::<f64>() / packet.len() as f64;
        fading.push(h);
        snr_db.push(if mean_power > 0.0 {
            10.0 * (h * h * mean_power / config.sigma0_sq).log10()
        } else {
            f64::NEG_INFINITY
        });
    }
    Ok(SymbolStream {
        received,
        fading,
        snr_db,
        packet_len: config.packet_len,
    })
}
