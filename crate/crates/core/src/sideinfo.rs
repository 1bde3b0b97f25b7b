//! Side-information coding: quantizers, MCS selection, packet layout.
//!
//! The receiver needs the ROI spans plus per-block power and correlation to
//! rebuild the transmitter's scaling factors. Both values are quantized to
//! 8 bits, serialized together with the spans, Huffman-coded, and charged
//! power `p_s = beta_linear * sigma0^2` for the MCS that the channel SNR
//! admits. Transmitter and receiver both work from the dequantized values,
//! so their gain computations agree exactly.
//!
//! Packet wire layout (MSB-first bits within bytes):
//!
//! ```text
//! bytes 0..256 : canonical Huffman code lengths for symbols 0..255
//! then         : Huffman-coded payload, zero-padded to a byte boundary
//!
//! payload      : u16 BE block count N_s
//!                u16 BE span count
//!                span count x (u16 BE start, u16 BE end)
//!                N_s x u8   lambda codes
//!                N_s x u8   k codes
//! ```

pub mod huffman;

use crate::error::{Error, Result};
use crate::roi_coding::RoiSpan;
use huffman::{BitReader, BitWriter, CodeTable};

/// Quantizer range for log10(lambda).
const LAMBDA_LOG_MIN: f64 = -6.0;
const LAMBDA_LOG_MAX: f64 = 6.0;
const LAMBDA_LOG_FLOOR: f64 = 1e-12;

/// One row of the modulation-and-coding table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    /// SNR threshold in dB that meets the target block error ratio.
    pub beta_db: f64,
    pub cqi: u8,
    /// Bits per symbol: 2 for 4QAM, 4 for 16QAM, 6 for 64QAM.
    pub modulation_order: u8,
    /// Effective code rate.
    pub ecr: f64,
}

impl McsEntry {
    /// Side-information power `beta_linear * sigma0^2`.
    pub fn side_info_power(&self, sigma0_sq: f64) -> f64 {
        10f64.powf(self.beta_db / 10.0) * sigma0_sq
    }

    /// Symbols needed to carry `bit_count` bits at this MCS.
    pub fn symbols_for_bits(&self, bit_count: usize) -> usize {
        let bits_per_symbol = f64::from(self.modulation_order) * self.ecr;
        (bit_count as f64 / bits_per_symbol).ceil() as usize
    }
}

/// MCS table ordered by rising SNR threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

/// LTE-style operating points: (threshold dB, CQI, modulation, code rate).
pub const DEFAULT_MCS_ROWS: [(f64, u8, u8, f64); 6] = [
    (-5.0, 1, 2, 0.0762),
    (0.0, 4, 2, 0.3008),
    (5.0, 7, 4, 0.3691),
    (10.0, 9, 4, 0.6016),
    (15.0, 12, 6, 0.6504),
    (20.0, 15, 6, 0.9258),
];

impl Default for McsTable {
    fn default() -> Self {
        let entries = DEFAULT_MCS_ROWS
            .iter()
            .map(|&(beta_db, cqi, modulation_order, ecr)| McsEntry {
                beta_db,
                cqi,
                modulation_order,
                ecr,
            })
            .collect();
        Self { entries }
    }
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("MCS table must not be empty".into()));
        }
        for pair in entries.windows(2) {
            if pair[1].beta_db <= pair[0].beta_db || pair[1].cqi <= pair[0].cqi {
                return Err(Error::Validation(
                    "MCS rows must strictly increase in beta and CQI".into(),
                ));
            }
        }
        Ok(Self { entries })
    }

    /// Parses CSV rows `beta_db,cqi,modulation,ecr` where modulation is
    /// `4QAM`, `16QAM` or `64QAM`. `#` starts a comment.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line_no = line_no + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!(
                        "expected `beta_db,cqi,modulation,ecr`, got {}",
                        fields.len()
                    ),
                });
            }
            let parse_err = |field: &str| Error::Parse {
                line: line_no,
                msg: format!("cannot parse `{field}`"),
            };
            let modulation_order = match fields[2].to_ascii_uppercase().as_str() {
                "4QAM" | "QPSK" => 2,
                "16QAM" => 4,
                "64QAM" => 6,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown modulation `{other}`"),
                    })
                }
            };
            entries.push(McsEntry {
                beta_db: fields[0].parse().map_err(|_| parse_err(fields[0]))?,
                cqi: fields[1].parse().map_err(|_| parse_err(fields[1]))?,
                modulation_order,
                ecr: fields[3].parse().map_err(|_| parse_err(fields[3]))?,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Highest-CQI row whose threshold the channel meets; channels below
    /// the lowest threshold fall back to the most protected row.
    pub fn select(&self, channel_snr_db: f64) -> McsEntry {
        self.entries
            .iter()
            .rev()
            .find(|entry| entry.beta_db <= channel_snr_db)
            .copied()
            .unwrap_or(self.entries[0])
    }
}

/// Quantizes a block power to 8 bits, uniform over log10 in [-6, 6].
pub fn quantize_lambda(lambda: f64) -> u8 {
    let x = (lambda + LAMBDA_LOG_FLOOR).log10();
    let t = (x - LAMBDA_LOG_MIN) / (LAMBDA_LOG_MAX - LAMBDA_LOG_MIN);
    ((t * 256.0).floor() as i64).clamp(0, 255) as u8
}

/// Bin center of a lambda code, back in linear units.
pub fn dequantize_lambda(code: u8) -> f64 {
    let step = (LAMBDA_LOG_MAX - LAMBDA_LOG_MIN) / 256.0;
    10f64.powf(LAMBDA_LOG_MIN + (f64::from(code) + 0.5) * step)
}

/// Quantizes a correlation factor in [0, 1] to 8 bits.
pub fn quantize_k(k: f64) -> u8 {
    ((k * 255.0).floor() as i64).clamp(0, 255) as u8
}

/// Bin center of a k code; the top bin is exactly 1.
pub fn dequantize_k(code: u8) -> f64 {
    ((f64::from(code) + 0.5) / 255.0).min(1.0)
}

/// Compressed side information for one frame plus its channel cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoPacket {
    /// Wire bytes: code-length table then the coded payload.
    pub bytes: Vec<u8>,
    /// Exact bit count before byte padding.
    pub bit_count: usize,
    pub mcs: McsEntry,
    pub symbol_count: usize,
    /// Transmission power reserved for the packet.
    pub p_s: f64,
}

/// Decoded packet contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSideInfo {
    pub n_blocks: usize,
    pub spans: Vec<RoiSpan>,
    pub lambda_codes: Vec<u8>,
    pub k_codes: Vec<u8>,
}

fn payload_bytes(spans: &[RoiSpan], lambda_codes: &[u8], k_codes: &[u8]) -> Result<Vec<u8>> {
    let n_blocks = lambda_codes.len();
    if k_codes.len() != n_blocks {
        return Err(Error::Validation(format!(
            "lambda and k code counts differ: {} vs {}",
            n_blocks,
            k_codes.len()
        )));
    }
    if n_blocks >= 1 << 16 || spans.len() >= 1 << 16 {
        return Err(Error::Capacity(format!(
            "{n_blocks} blocks / {} spans exceed the 16-bit packet header",
            spans.len()
        )));
    }
    let mut payload = Vec::with_capacity(4 + 4 * spans.len() + 2 * n_blocks);
    payload.extend_from_slice(&(n_blocks as u16).to_be_bytes());
    payload.extend_from_slice(&(spans.len() as u16).to_be_bytes());
    for span in spans {
        if span.start >= 1 << 16 || span.end >= 1 << 16 {
            return Err(Error::Capacity(format!(
                "span ({}, {}) exceeds 16-bit block indices",
                span.start, span.end
            )));
        }
        payload.extend_from_slice(&(span.start as u16).to_be_bytes());
        payload.extend_from_slice(&(span.end as u16).to_be_bytes());
    }
    payload.extend_from_slice(lambda_codes);
    payload.extend_from_slice(k_codes);
    Ok(payload)
}

/// Serializes and Huffman-codes the side information, then prices it at
/// the given MCS.
pub fn build_packet(
    spans: &[RoiSpan],
    lambda_codes: &[u8],
    k_codes: &[u8],
    mcs: McsEntry,
    sigma0_sq: f64,
) -> Result<SideInfoPacket> {
    let payload = payload_bytes(spans, lambda_codes, k_codes)?;
    let table = CodeTable::from_symbols(&payload)?;

    let mut writer = BitWriter::new();
    for &len in &table.lengths {
        writer.write_bits(u64::from(len), 8);
    }
    huffman::encode_with_table(&payload, &table, &mut writer)?;
    let bit_count = writer.bit_len();

    Ok(SideInfoPacket {
        bytes: writer.into_bytes(),
        bit_count,
        mcs,
        symbol_count: mcs.symbols_for_bits(bit_count),
        p_s: mcs.side_info_power(sigma0_sq),
    })
}

/// Recovers the side information from packet bytes.
pub fn parse_packet(bytes: &[u8]) -> Result<ParsedSideInfo> {
    if bytes.len() < huffman::ALPHABET {
        return Err(Error::Decode("packet shorter than its code table".into()));
    }
    let mut lengths = [0u8; huffman::ALPHABET];
    lengths.copy_from_slice(&bytes[..huffman::ALPHABET]);
    let table = CodeTable { lengths };

    let mut reader = BitReader::new(&bytes[huffman::ALPHABET..]);
    let mut take = |count: usize| huffman::decode_with_table(&mut reader, &table, count);

    let header = take(4)?;
    let n_blocks = usize::from(u16::from_be_bytes([header[0], header[1]]));
    let span_count = usize::from(u16::from_be_bytes([header[2], header[3]]));

    let span_bytes = take(4 * span_count)?;
    let spans = span_bytes
        .chunks_exact(4)
        .map(|c| RoiSpan {
            start: usize::from(u16::from_be_bytes([c[0], c[1]])),
            end: usize::from(u16::from_be_bytes([c[2], c[3]])),
        })
        .collect();

    let lambda_codes = take(n_blocks)?;
    let k_codes = take(n_blocks)?;
    Ok(ParsedSideInfo {
        n_blocks,
        spans,
        lambda_codes,
        k_codes,
    })
}
