//! End-to-end experiment runner.
//!
//! One frame run is: classify ROI blocks, transform, match against the
//! reference, quantize and pack side information, select the MCS, split
//! the power budget, compute per-block gains, prune to the symbol budget,
//! whiten, map to I/Q, simulate the channel, equalize, descale, rebuild
//! the frame, and score it. The receiver path works only from the parsed
//! packet plus shared run parameters, so transmitter and receiver gains
//! agree exactly by construction.
//!
//! Sweeps fan runs out over a rayon pool; per-frame channel RNG streams
//! are derived from (seed, frame), so results do not depend on scheduling.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::channel::{self, ChannelConfig, ChannelKind, DEFAULT_PACKET_LEN, OFDM_SUBCARRIERS};
use crate::correlation::{self, DEFAULT_MATCH_RADIUS};
use crate::error::{Error, Result};
use crate::media_io::{self, LumaFrame, PixelFormat, RoiRect, RoiTable};
use crate::metrics::{self, QualityReport};
use crate::power_alloc::{self, PowerPlan, DEFAULT_ETA, SYMBOLS_PER_BLOCK};
use crate::receiver::{self, DecoderKind, DistortionReport, ReceivedBlock};
use crate::roi_coding::{self, RoiMask};
use crate::sideinfo::{self, McsTable};
use crate::transform::{self, BlockGrid, DctBlock, BLOCK_LEN};

/// Power allocation scheme for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Softcast,
    Kmvcast,
    Roiccast,
    /// Uniform per-block energy; stands in for allocators whose closed
    /// form is not public.
    Equal,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Softcast => "softcast",
            Scheme::Kmvcast => "kmvcast",
            Scheme::Roiccast => "roiccast",
            Scheme::Equal => "equal",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "softcast" => Ok(Scheme::Softcast),
            "kmvcast" => Ok(Scheme::Kmvcast),
            "roiccast" => Ok(Scheme::Roiccast),
            "equal" => Ok(Scheme::Equal),
            other => Err(Error::Validation(format!("unknown scheme `{other}`"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a single frame run needs besides the input frames.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub scheme: Scheme,
    pub eta: f64,
    /// Total frame power; derived from the channel SNR when absent.
    pub p_t: Option<f64>,
    pub sigma0_sq: f64,
    /// Channel SNR in dB; selects the MCS and, in auto-power mode, sets
    /// the data power so the mean data-symbol SNR matches it.
    pub channel_snr_db: f64,
    pub channel: ChannelKind,
    pub seed: u64,
    pub packet_len: usize,
    pub whitening: bool,
    pub ofdm: bool,
    /// Complex-symbol budget per frame; defaults to the unpruned analog
    /// stream plus the side-info packet, i.e. nothing is pruned.
    pub symbol_budget: Option<usize>,
    pub decoder: DecoderKind,
    pub match_radius: usize,
    /// Score from expected distortions instead of one noisy realization.
    pub analytic: bool,
    pub mcs: McsTable,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            scheme: Scheme::Roiccast,
            eta: DEFAULT_ETA,
            p_t: None,
            sigma0_sq: 1e-3,
            channel_snr_db: 10.0,
            channel: ChannelKind::Awgn,
            seed: 0,
            packet_len: DEFAULT_PACKET_LEN,
            whitening: true,
            ofdm: false,
            symbol_budget: None,
            decoder: DecoderKind::Zf,
            match_radius: DEFAULT_MATCH_RADIUS,
            analytic: false,
            mcs: McsTable::default(),
        }
    }
}

/// In-memory experiment inputs: the frames to send, the shared reference,
/// and detector rectangles keyed by frame number.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub frames: Vec<(usize, LumaFrame)>,
    pub reference: LumaFrame,
    pub rois: RoiTable,
}

impl ExperimentInputs {
    pub fn frame(&self, number: usize) -> Result<&LumaFrame> {
        self.frames
            .iter()
            .find(|(n, _)| *n == number)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::OutOfRange(format!("frame {number} not loaded")))
    }

    pub fn rects(&self, number: usize) -> &[RoiRect] {
        self.rois.get(&number).map_or(&[], Vec::as_slice)
    }
}

/// Channel-independent per-frame source state, reusable across seeds,
/// SNRs and schemes.
#[derive(Debug, Clone)]
pub struct SourceAnalysis {
    pub frame_number: usize,
    pub grid: BlockGrid,
    pub mask: RoiMask,
    /// Per-block transform state with exact (unquantized) statistics.
    pub blocks: Vec<DctBlock>,
    pub lambda_codes: Vec<u8>,
    pub k_codes: Vec<u8>,
    /// Dequantized block powers; what both ends allocate from.
    pub lambda_hats: Vec<f64>,
    /// Correlation gains from the dequantized correlation factors.
    pub ell_hats: Vec<f64>,
    pub spans: Vec<roi_coding::RoiSpan>,
}

/// Runs the source half of the pipeline: partition, classify, transform,
/// match, quantize, span-code.
pub fn analyze_source(
    frame: &LumaFrame,
    reference: &LumaFrame,
    rects: &[RoiRect],
    match_radius: usize,
    frame_number: usize,
) -> Result<SourceAnalysis> {
    if reference.width() != frame.width() || reference.height() != frame.height() {
        return Err(Error::Validation(
            "reference and transmitted frame geometries differ".into(),
        ));
    }
    for rect in rects {
        rect.validate(frame.width(), frame.height())?;
    }
    let (grid, pixel_blocks) = transform::partition_blocks(frame);
    let mask = roi_coding::classify_blocks(&grid, rects);

    let mut blocks = Vec::with_capacity(grid.len());
    for (index, pixels) in pixel_blocks.iter().enumerate() {
        let coeffs = transform::dct2_forward(&transform::block_to_f64(pixels));
        let mut block = DctBlock::new(index, coeffs.to_vec());
        let (x0, y0) = grid.pixel_origin(index);
        let matched = correlation::match_block(pixels, reference, index, y0, x0, match_radius);
        block.k = matched.k;
        block.ell = correlation::corr_gain(matched.k, BLOCK_LEN)?;
        block.roi = mask.is_roi(index);
        blocks.push(block);
    }

    let lambda_codes: Vec<u8> = blocks
        .iter()
        .map(|b| sideinfo::quantize_lambda(b.lambda))
        .collect();
    let k_codes: Vec<u8> = blocks.iter().map(|b| sideinfo::quantize_k(b.k)).collect();
    let lambda_hats: Vec<f64> = lambda_codes
        .iter()
        .map(|&c| sideinfo::dequantize_lambda(c))
        .collect();
    let ell_hats: Vec<f64> = k_codes
        .iter()
        .map(|&c| correlation::corr_gain(sideinfo::dequantize_k(c), BLOCK_LEN))
        .collect::<Result<_>>()?;
    let spans = roi_coding::rlc_encode(&mask);

    Ok(SourceAnalysis {
        frame_number,
        grid,
        mask,
        blocks,
        lambda_codes,
        k_codes,
        lambda_hats,
        ell_hats,
        spans,
    })
}

/// Outcome of one frame run.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_number: usize,
    pub scheme: Scheme,
    pub eta: f64,
    pub channel_snr_db: f64,
    pub analytic: bool,
    /// Measured quality; absent in analytic mode.
    pub quality: Option<QualityReport>,
    /// Expected quality from the gain vector.
    pub distortion: DistortionReport,
    pub reconstructed: Option<LumaFrame>,
    pub tx_gains: Vec<f64>,
    pub rx_gains: Vec<f64>,
    pub plan: PowerPlan,
    pub packet_bits: usize,
    pub packet_symbols: usize,
    pub kept_blocks: usize,
    /// Per-packet realized SNR of the channel run, empty in analytic mode.
    pub snr_trace: Vec<f64>,
}

impl FrameResult {
    /// Overall PSNR of the run: measured when a channel ran, analytic
    /// otherwise.
    pub fn psnr_overall(&self) -> f64 {
        self.quality
            .as_ref()
            .map_or(self.distortion.psnr_overall, |q| q.psnr_overall)
    }

    pub fn psnr_roi(&self) -> Option<f64> {
        self.quality
            .as_ref()
            .map_or(self.distortion.psnr_roi, |q| q.psnr_roi)
    }

    pub fn psnr_non_roi(&self) -> Option<f64> {
        self.quality
            .as_ref()
            .map_or(self.distortion.psnr_non_roi, |q| q.psnr_non_roi)
    }
}

fn scheme_gains(
    scheme: Scheme,
    lambda_hats: &[f64],
    ell_hats: &[f64],
    roi: &[bool],
    plan: &PowerPlan,
) -> Result<Vec<f64>> {
    match scheme {
        Scheme::Softcast => power_alloc::softcast_gains(lambda_hats, plan.p_d),
        Scheme::Kmvcast => power_alloc::kmvcast_gains(lambda_hats, ell_hats, plan.p_d),
        Scheme::Roiccast => power_alloc::roiccast_gains(lambda_hats, ell_hats, roi, plan),
        Scheme::Equal => power_alloc::equal_gains(lambda_hats, plan.p_d),
    }
}

/// Data power needed for the mean data-symbol SNR to hit the channel SNR:
/// each complex symbol carries two coefficients of average power p_d / n.
pub fn auto_data_power(n_blocks: usize, sigma0_sq: f64, channel_snr_db: f64) -> f64 {
    n_blocks as f64 * sigma0_sq * 10f64.powf(channel_snr_db / 10.0) / 2.0
}

/// Expected analog-stream energy as the receiver sees it.
fn rx_transmitted_energy(rx: &AllocationState) -> f64 {
    (0..rx.gains.len())
        .filter(|&i| rx.kept[i] && rx.gains[i] > 0.0)
        .map(|i| BLOCK_LEN as f64 * rx.gains[i] * rx.gains[i] * rx.lambda_hats[i])
        .sum()
}

struct AllocationState {
    plan: PowerPlan,
    gains: Vec<f64>,
    kept: Vec<bool>,
    mask: RoiMask,
    lambda_hats: Vec<f64>,
}

/// Budgets, pruning and gains from quantized side information. Both ends
/// run exactly this, the transmitter from its own quantized values, the
/// receiver from the parsed packet.
fn allocate(
    params: &PipelineParams,
    mask: &RoiMask,
    lambda_hats: &[f64],
    ell_hats: &[f64],
    p_t: f64,
    p_s: f64,
    packet_symbols: usize,
) -> Result<AllocationState> {
    let plan = PowerPlan::new(p_t, p_s, params.eta, mask.s_roi(), mask.s_non_roi())?;
    let symbol_budget = params
        .symbol_budget
        .unwrap_or(SYMBOLS_PER_BLOCK * mask.len() + packet_symbols);
    let kept = power_alloc::prune_to_bandwidth(lambda_hats, symbol_budget, packet_symbols)?;
    let masked_lambdas: Vec<f64> = lambda_hats
        .iter()
        .zip(&kept)
        .map(|(&l, &keep)| if keep { l } else { 0.0 })
        .collect();
    let gains = scheme_gains(
        params.scheme,
        &masked_lambdas,
        ell_hats,
        mask.flags(),
        &plan,
    )?;
    Ok(AllocationState {
        plan,
        gains,
        kept,
        mask: mask.clone(),
        lambda_hats: lambda_hats.to_vec(),
    })
}

/// Runs one frame from precomputed source analysis.
pub fn run_frame_with_analysis(
    analysis: &SourceAnalysis,
    original: &LumaFrame,
    params: &PipelineParams,
) -> Result<FrameResult> {
    let n_blocks = analysis.grid.len();
    let mcs = params.mcs.select(params.channel_snr_db);
    let packet = sideinfo::build_packet(
        &analysis.spans,
        &analysis.lambda_codes,
        &analysis.k_codes,
        mcs,
        params.sigma0_sq,
    )?;
    let p_t = params.p_t.unwrap_or_else(|| {
        packet.p_s + auto_data_power(n_blocks, params.sigma0_sq, params.channel_snr_db)
    });

    // Transmitter-side allocation.
    let tx = allocate(
        params,
        &analysis.mask,
        &analysis.lambda_hats,
        &analysis.ell_hats,
        p_t,
        packet.p_s,
        packet.symbol_count,
    )?;

    // Receiver-side allocation from the packet alone.
    let parsed = sideinfo::parse_packet(&packet.bytes)?;
    if parsed.n_blocks != n_blocks {
        return Err(Error::Integrity(format!(
            "packet describes {} blocks, frame has {n_blocks}",
            parsed.n_blocks
        )));
    }
    let rx_mask = roi_coding::rlc_decode(&parsed.spans, parsed.n_blocks)?;
    let rx_lambda_hats: Vec<f64> = parsed
        .lambda_codes
        .iter()
        .map(|&c| sideinfo::dequantize_lambda(c))
        .collect();
    let rx_ell_hats: Vec<f64> = parsed
        .k_codes
        .iter()
        .map(|&c| correlation::corr_gain(sideinfo::dequantize_k(c), BLOCK_LEN))
        .collect::<Result<_>>()?;
    let rx = allocate(
        params,
        &rx_mask,
        &rx_lambda_hats,
        &rx_ell_hats,
        p_t,
        packet.p_s,
        packet.symbol_count,
    )?;

    let distortion = receiver::distortion_report(
        &tx.gains,
        &tx.lambda_hats,
        &tx.mask,
        receiver::sigma_eff_sq(params.sigma0_sq),
    )?;
    let kept_blocks = (0..n_blocks)
        .filter(|&i| tx.kept[i] && tx.gains[i] > 0.0)
        .count();

    let mut result = FrameResult {
        frame_number: analysis.frame_number,
        scheme: params.scheme,
        eta: params.eta,
        channel_snr_db: params.channel_snr_db,
        analytic: params.analytic,
        quality: None,
        distortion,
        reconstructed: None,
        tx_gains: tx.gains.clone(),
        rx_gains: rx.gains.clone(),
        plan: tx.plan,
        packet_bits: packet.bit_count,
        packet_symbols: packet.symbol_count,
        kept_blocks,
        snr_trace: Vec::new(),
    };
    if params.analytic {
        return Ok(result);
    }

    // Scale and serialize the transmitted blocks in index order.
    let transmitted: Vec<usize> = (0..n_blocks)
        .filter(|&i| tx.kept[i] && tx.gains[i] > 0.0)
        .collect();
    let mut stream = Vec::with_capacity(transmitted.len() * BLOCK_LEN);
    for &i in &transmitted {
        stream.extend(analysis.blocks[i].coeffs.iter().map(|&c| tx.gains[i] * c));
    }

    let (stream, whiten_pad) = if params.whitening {
        channel::whiten(&stream)
    } else {
        (stream, 0)
    };
    let (symbols, iq_pad) = channel::iq_pack(&stream);
    let (channel_input, packet_len) = if params.ofdm {
        let (time, _) = channel::ofdm_frame(&symbols);
        (time, OFDM_SUBCARRIERS)
    } else {
        (symbols.clone(), params.packet_len)
    };

    let config = ChannelConfig {
        kind: params.channel,
        sigma0_sq: params.sigma0_sq,
        packet_len,
        seed: params.seed,
        whitening: params.whitening,
    };
    let received = channel::transmit(&channel_input, &config, analysis.frame_number as u64)?;
    result.snr_trace = received.snr_db.clone();

    // Equalize with perfect CSI and track the residual noise variance per
    // packet, so the LLSE decoder can weight faded packets correctly.
    let (equalized, packet_vars) = match params.channel {
        // Nothing to undo: AWGN packets all carry h = 1.
        ChannelKind::Awgn => (
            receiver::equalize_zf(&received),
            receiver::packet_noise_vars_zf(&received, params.sigma0_sq),
        ),
        // Fading is removed in the MMSE sense; the receiver estimates the
        // mean symbol energy from its own side information.
        ChannelKind::Rayleigh => {
            let data_energy: f64 = rx_transmitted_energy(&rx);
            let (total_energy, n_channel_symbols) = if params.ofdm {
                let blocks = channel_input.len() / OFDM_SUBCARRIERS;
                (
                    data_energy + (blocks * channel::PILOT_SUBCARRIERS.len()) as f64,
                    channel_input.len(),
                )
            } else {
                (data_energy, channel_input.len())
            };
            let energy_hint = total_energy / n_channel_symbols.max(1) as f64;
            (
                receiver::equalize_mmse(&received, params.sigma0_sq, energy_hint),
                receiver::packet_noise_vars_mmse(&received, params.sigma0_sq, energy_hint),
            )
        }
    };
    let rx_symbols = if params.ofdm {
        channel::ofdm_deframe(&equalized, symbols.len())?
    } else {
        equalized
    };

    // Per-real noise variances aligned with the unpacked stream. A data
    // symbol's packet is its OFDM block when framing is on.
    let mut real_vars = Vec::with_capacity(rx_symbols.len() * 2);
    for sym_index in 0..rx_symbols.len() {
        let packet = if params.ofdm {
            sym_index / channel::OFDM_DATA_PER_BLOCK
        } else {
            sym_index / packet_len
        };
        let var = packet_vars[packet.min(packet_vars.len() - 1)];
        real_vars.push(var);
        real_vars.push(var);
    }
    real_vars.truncate(real_vars.len().saturating_sub(iq_pad));

    let mut rx_stream = channel::iq_unpack(&rx_symbols, iq_pad);
    if params.whitening {
        rx_stream = channel::dewhiten(&rx_stream, whiten_pad)?;
        real_vars = channel::dewhiten_noise_vars(&real_vars, whiten_pad)?;
    }

    // Receiver's view of which blocks arrived, from its own allocation.
    let rx_transmitted: Vec<usize> = (0..n_blocks)
        .filter(|&i| rx.kept[i] && rx.gains[i] > 0.0)
        .collect();
    if rx_stream.len() != rx_transmitted.len() * BLOCK_LEN {
        return Err(Error::Integrity(format!(
            "stream carries {} coefficients, receiver expected {}",
            rx_stream.len(),
            rx_transmitted.len() * BLOCK_LEN
        )));
    }
    let mut received_blocks: Vec<ReceivedBlock> = (0..n_blocks)
        .map(|index| ReceivedBlock {
            index,
            coeffs: Vec::new(),
            gain: rx.gains[index],
            lambda_hat: rx.lambda_hats[index],
            noise_var: 0.0,
            roi: rx.mask.is_roi(index),
        })
        .collect();
    for (slot, &index) in rx_transmitted.iter().enumerate() {
        let range = slot * BLOCK_LEN..(slot + 1) * BLOCK_LEN;
        received_blocks[index].coeffs = rx_stream[range.clone()].to_vec();
        received_blocks[index].noise_var = real_vars[range].iter().sum::<f64>() / BLOCK_LEN as f64;
    }

    let reconstructed =
        receiver::reconstruct_frame(&received_blocks, &analysis.grid, params.decoder)?;
    result.quality = Some(metrics::quality_report(
        original,
        &reconstructed,
        &rx.mask,
        &analysis.grid,
    )?);
    result.reconstructed = Some(reconstructed);
    Ok(result)
}

/// Runs one frame end to end.
pub fn run_frame(
    inputs: &ExperimentInputs,
    params: &PipelineParams,
    frame_number: usize,
) -> Result<FrameResult> {
    let frame = inputs.frame(frame_number)?;
    let analysis = analyze_source(
        frame,
        &inputs.reference,
        inputs.rects(frame_number),
        params.match_radius,
        frame_number,
    )?;
    run_frame_with_analysis(&analysis, frame, params)
}

/// Runs a list of frames on the worker pool, results in input order.
pub fn run_frames(
    inputs: &ExperimentInputs,
    params: &PipelineParams,
    frame_numbers: &[usize],
) -> Result<Vec<FrameResult>> {
    frame_numbers
        .par_iter()
        .map(|&number| run_frame(inputs, params, number))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaRow {
    pub eta: f64,
    pub psnr_overall: f64,
    pub psnr_roi: Option<f64>,
}

/// Sweeps the preference parameter on one frame. In analytic mode the
/// overall PSNR must be non-decreasing and the ROI PSNR non-increasing in
/// eta; a violation is an experiment anomaly.
pub fn run_eta_sweep(
    inputs: &ExperimentInputs,
    params: &PipelineParams,
    frame_number: usize,
    etas: &[f64],
) -> Result<Vec<EtaRow>> {
    if etas.is_empty() {
        return Err(Error::Validation(
            "eta sweep needs at least one value".into(),
        ));
    }
    let frame = inputs.frame(frame_number)?;
    let analysis = analyze_source(
        frame,
        &inputs.reference,
        inputs.rects(frame_number),
        params.match_radius,
        frame_number,
    )?;
    let rows: Vec<EtaRow> = etas
        .par_iter()
        .map(|&eta| {
            let mut point = params.clone();
            point.eta = eta;
            run_frame_with_analysis(&analysis, frame, &point).map(|r| EtaRow {
                eta,
                psnr_overall: r.psnr_overall(),
                psnr_roi: r.psnr_roi(),
            })
        })
        .collect::<Result<_>>()?;

    if params.analytic {
        const SLACK: f64 = 1e-9;
        for pair in rows.windows(2) {
            if pair[1].psnr_overall < pair[0].psnr_overall - SLACK {
                return Err(Error::Anomaly(format!(
                    "overall PSNR fell from {} to {} as eta rose {} -> {}",
                    pair[0].psnr_overall, pair[1].psnr_overall, pair[0].eta, pair[1].eta
                )));
            }
            if let (Some(a), Some(b)) = (pair[0].psnr_roi, pair[1].psnr_roi) {
                if b > a + SLACK {
                    return Err(Error::Anomaly(format!(
                        "ROI PSNR rose from {a} to {b} as eta rose {} -> {}",
                        pair[0].eta, pair[1].eta
                    )));
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub psnr_overall: f64,
    pub psnr_roi: Option<f64>,
}

/// One row per (SNR, scheme) on one frame; the MCS is reselected per SNR.
pub fn run_snr_sweep(
    inputs: &ExperimentInputs,
    params: &PipelineParams,
    frame_number: usize,
    snrs: &[f64],
    schemes: &[Scheme],
) -> Result<Vec<SnrRow>> {
    if snrs.is_empty() || schemes.is_empty() {
        return Err(Error::Validation(
            "snr sweep needs at least one SNR and one scheme".into(),
        ));
    }
    let frame = inputs.frame(frame_number)?;
    let analysis = analyze_source(
        frame,
        &inputs.reference,
        inputs.rects(frame_number),
        params.match_radius,
        frame_number,
    )?;
    let points: Vec<(f64, Scheme)> = snrs
        .iter()
        .flat_map(|&snr| schemes.iter().map(move |&scheme| (snr, scheme)))
        .collect();
    points
        .par_iter()
        .map(|&(snr_db, scheme)| {
            let mut point = params.clone();
            point.channel_snr_db = snr_db;
            point.scheme = scheme;
            run_frame_with_analysis(&analysis, frame, &point).map(|r| SnrRow {
                snr_db,
                scheme,
                psnr_overall: r.psnr_overall(),
                psnr_roi: r.psnr_roi(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadeFrameRow {
    pub frame: usize,
    pub psnr_overall: f64,
    pub psnr_roi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadePacketRow {
    pub frame: usize,
    pub packet: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FadeTrace {
    pub frames: Vec<FadeFrameRow>,
    pub packets: Vec<FadePacketRow>,
}

/// Rayleigh-fading run over a frame range: per-packet realized SNR plus
/// per-frame quality.
pub fn run_fading_trace(
    inputs: &ExperimentInputs,
    params: &PipelineParams,
    frame_numbers: &[usize],
) -> Result<FadeTrace> {
    if params.channel != ChannelKind::Rayleigh {
        return Err(Error::Validation(
            "fading trace requires the rayleigh channel".into(),
        ));
    }
    let results = run_frames(inputs, params, frame_numbers)?;
    let mut trace = FadeTrace::default();
    for result in results {
        for (packet, &snr_db) in result.snr_trace.iter().enumerate() {
            trace.packets.push(FadePacketRow {
                frame: result.frame_number,
                packet,
                snr_db,
            });
        }
        trace.frames.push(FadeFrameRow {
            frame: result.frame_number,
            psnr_overall: result.psnr_overall(),
            psnr_roi: result.psnr_roi(),
        });
    }
    Ok(trace)
}

// ── File-level experiment configuration and CSV output ────────────────

/// A fully resolved experiment: input files plus pipeline parameters.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub video: PathBuf,
    pub roi_csv: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub format: PixelFormat,
    pub reference_index: usize,
    pub frames: Vec<usize>,
    pub params: PipelineParams,
}

/// Loads the reference frame, the transmit frames and the ROI table.
pub fn load_inputs(config: &ExperimentConfig) -> Result<ExperimentInputs> {
    let mut wanted = config.frames.clone();
    wanted.push(config.reference_index);
    wanted.sort_unstable();
    wanted.dedup();
    let loaded = media_io::load_yuv_frames(
        &config.video,
        config.width,
        config.height,
        config.format,
        &wanted,
    )?;
    let by_number: HashMap<usize, LumaFrame> = wanted.into_iter().zip(loaded).collect();
    let reference = by_number[&config.reference_index].clone();
    let frames = config
        .frames
        .iter()
        .map(|&n| (n, by_number[&n].clone()))
        .collect();
    let rois = match &config.roi_csv {
        Some(path) => media_io::load_roi_rects(path, config.width, config.height)?,
        None => HashMap::new(),
    };
    Ok(ExperimentInputs {
        frames,
        reference,
        rois,
    })
}

fn fmt_db(value: f64) -> String {
    if value.is_infinite() {
        "inf".to_string()
    } else {
        format!("{value:.4}")
    }
}

fn fmt_opt_db(value: Option<f64>) -> String {
    value.map(fmt_db).unwrap_or_default()
}

/// `# key = value` lines echoing the resolved configuration, so every CSV
/// is self-describing.
pub fn config_comment(config: &ExperimentConfig) -> String {
    let p = &config.params;
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(&format!("# {key} = {value}\n"));
    };
    push("video", config.video.display().to_string());
    push(
        "roi_csv",
        config
            .roi_csv
            .as_ref()
            .map_or("none".into(), |p| p.display().to_string()),
    );
    push("geometry", format!("{}x{}", config.width, config.height));
    push(
        "format",
        match config.format {
            PixelFormat::Yuv420 => "yuv420".into(),
            PixelFormat::Luma => "luma".into(),
        },
    );
    push("reference", config.reference_index.to_string());
    push(
        "frames",
        config
            .frames
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" "),
    );
    push("scheme", p.scheme.to_string());
    push("eta", format!("{}", p.eta));
    push("p_t", p.p_t.map_or("auto".into(), |v| format!("{v}")));
    push("sigma0_sq", format!("{:e}", p.sigma0_sq));
    push("channel_snr_db", format!("{}", p.channel_snr_db));
    push(
        "channel",
        match p.channel {
            ChannelKind::Awgn => "awgn".into(),
            ChannelKind::Rayleigh => "rayleigh".into(),
        },
    );
    push("seed", p.seed.to_string());
    push("packet_len", p.packet_len.to_string());
    push("whitening", p.whitening.to_string());
    push("ofdm", p.ofdm.to_string());
    push(
        "symbol_budget",
        p.symbol_budget.map_or("auto".into(), |v| v.to_string()),
    );
    push(
        "decoder",
        match p.decoder {
            DecoderKind::Zf => "zf".into(),
            DecoderKind::Llse => "llse".into(),
        },
    );
    push("match_radius", p.match_radius.to_string());
    push("analytic", p.analytic.to_string());
    out
}

/// CSV for `run`: one row per frame.
pub fn render_run_csv(config: &ExperimentConfig, results: &[FrameResult]) -> String {
    let mut out = config_comment(config);
    out.push_str(
        "frame,scheme,eta,snr_db,mode,psnr_overall,psnr_roi,psnr_nonroi,\
         p_t,p_s,p_dr,p_dnr,kept_blocks,packet_bits,packet_symbols\n",
    );
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{}\n",
            r.frame_number,
            r.scheme,
            r.eta,
            r.channel_snr_db,
            if r.analytic { "analytic" } else { "realized" },
            fmt_db(r.psnr_overall()),
            fmt_opt_db(r.psnr_roi()),
            fmt_opt_db(r.psnr_non_roi()),
            r.plan.p_t,
            r.plan.p_s,
            r.plan.p_dr,
            r.plan.p_dnr,
            r.kept_blocks,
            r.packet_bits,
            r.packet_symbols,
        ));
    }
    out
}

/// CSV for `sweep-eta`.
pub fn render_eta_csv(config: &ExperimentConfig, rows: &[EtaRow]) -> String {
    let mut out = config_comment(config);
    out.push_str("eta,psnr_overall,psnr_roi\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.eta,
            fmt_db(row.psnr_overall),
            fmt_opt_db(row.psnr_roi)
        ));
    }
    out
}

/// CSV for `sweep-snr`.
pub fn render_snr_csv(config: &ExperimentConfig, rows: &[SnrRow]) -> String {
    let mut out = config_comment(config);
    out.push_str("snr_db,scheme,psnr_overall,psnr_roi\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.snr_db,
            row.scheme,
            fmt_db(row.psnr_overall),
            fmt_opt_db(row.psnr_roi)
        ));
    }
    out
}

/// CSVs for `fade-trace`: (per-frame table, per-packet table).
pub fn render_fade_csvs(config: &ExperimentConfig, trace: &FadeTrace) -> (String, String) {
    let mut frames = config_comment(config);
    frames.push_str("frame,psnr_overall,psnr_roi\n");
    for row in &trace.frames {
        frames.push_str(&format!(
            "{},{},{}\n",
            row.frame,
            fmt_db(row.psnr_overall),
            fmt_opt_db(row.psnr_roi)
        ));
    }
    let mut packets = config_comment(config);
    packets.push_str("frame,packet,snr_db\n");
    for row in &trace.packets {
        packets.push_str(&format!(
            "{},{},{}\n",
            row.frame,
            row.packet,
            fmt_db(row.snr_db)
        ));
    }
    (frames, packets)
}
