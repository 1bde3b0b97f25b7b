//! Canonical Huffman codec over byte symbols.
//!
//! Code lengths come from a frequency-built Huffman tree with deterministic
//! tie-breaking; codes are then assigned canonically (sorted by length,
//! then symbol), so the 256 code lengths fully describe the code and are
//! all a decoder needs. Bits are packed MSB-first within bytes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const ALPHABET: usize = 256;

/// MSB-first bit sink.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the `count` low bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, count: usize) {
        debug_assert!(count <= 64);
        for shift in (0..count).rev() {
            let bit = (value >> shift) & 1;
            let offset = self.bit_len % 8;
            if offset == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (7 - offset);
            }
            self.bit_len += 1;
        }
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    /// Finishes the stream, zero-padded to a byte boundary.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// MSB-first bit source.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    cursor: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, cursor: 0 }
    }

    pub fn read_bit(&mut self) -> Result<u8> {
        let byte = self
            .bytes
            .get(self.cursor / 8)
            .ok_or_else(|| Error::Decode("bitstream exhausted".into()))?;
        let bit = (byte >> (7 - self.cursor % 8)) & 1;
        self.cursor += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: usize) -> Result<u64> {
        let mut value = 0u64;
        for _ in 0..count {
            value = (value << 1) | u64::from(self.read_bit()?);
        }
        Ok(value)
    }

    pub fn bits_read(&self) -> usize {
        self.cursor
    }
}

/// Canonical code description: one length per byte symbol, zero = unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    pub lengths: [u8; ALPHABET],
}

impl CodeTable {
    /// Builds code lengths from symbol frequencies.
    pub fn from_symbols(symbols: &[u8]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Validation(
                "cannot build a code from no symbols".into(),
            ));
        }
        let mut freq = [0u64; ALPHABET];
        for &s in symbols {
            freq[s as usize] += 1;
        }

        let present: Vec<usize> = (0..ALPHABET).filter(|&s| freq[s] > 0).collect();
        let mut lengths = [0u8; ALPHABET];
        if present.len() == 1 {
            lengths[present[0]] = 1;
            return Ok(Self { lengths });
        }

        // Leaf nodes first, then internal nodes; `order` makes heap
        // tie-breaking deterministic.
        struct Node {
            left: usize,
            right: usize,
        }
        let mut nodes: Vec<Option<Node>> = present.iter().map(|_| None).collect();
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = present
            .iter()
            .enumerate()
            .map(|(node, &sym)| Reverse((freq[sym], node)))
            .collect();
        while heap.len() > 1 {
            let Reverse((fa, a)) = heap.pop().unwrap();
            let Reverse((fb, b)) = heap.pop().unwrap();
            let id = nodes.len();
            nodes.push(Some(Node { left: a, right: b }));
            heap.push(Reverse((fa + fb, id)));
        }
        let root = heap.pop().unwrap().0 .1;

        // Depth-first walk assigns leaf depths.
        let mut stack = vec![(root, 0u8)];
        while let Some((id, depth)) = stack.pop() {
            match &nodes[id] {
                Some(node) => {
                    stack.push((node.left, depth + 1));
                    stack.push((node.right, depth + 1));
                }
                None => lengths[present[id]] = depth,
            }
        }
        Ok(Self { lengths })
    }

    /// Checks the Kraft sum so corrupt tables are rejected before decode.
    fn validate(&self) -> Result<()> {
        let mut kraft = 0u128;
        let max_len = self.max_len();
        if max_len == 0 {
            return Err(Error::Decode("code table has no symbols".into()));
        }
        if max_len > 64 {
            return Err(Error::Decode(format!("code length {max_len} exceeds 64")));
        }
        for &len in &self.lengths {
            if len > 0 {
                kraft += 1u128 << (max_len - len as usize);
            }
        }
        // A lone 1-bit code (single-symbol alphabet) under-fills the tree;
        // anything over-full cannot be decoded unambiguously.
        if kraft > 1u128 << max_len {
            return Err(Error::Decode(
                "code table violates the Kraft inequality".into(),
            ));
        }
        Ok(())
    }

    fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0) as usize
    }

    /// Canonical code words, index = symbol. Unused symbols get (0, 0).
    fn codes(&self) -> [(u64, u8); ALPHABET] {
        let mut order: Vec<usize> = (0..ALPHABET).filter(|&s| self.lengths[s] > 0).collect();
        order.sort_by_key(|&s| (self.lengths[s], s));
        let mut codes = [(0u64, 0u8); ALPHABET];
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for sym in order {
            let len = self.lengths[sym];
            code <<= len - prev_len;
            codes[sym] = (code, len);
            code += 1;
            prev_len = len;
        }
        codes
    }
}

/// Huffman-codes `symbols`; returns the padded bitstream, its exact bit
/// length, and the code table.
pub fn huffman_encode(symbols: &[u8]) -> Result<(Vec<u8>, usize, CodeTable)> {
    let table = CodeTable::from_symbols(symbols)?;
    let mut writer = BitWriter::new();
    encode_with_table(symbols, &table, &mut writer)?;
    let bit_len = writer.bit_len();
    Ok((writer.into_bytes(), bit_len, table))
}

/// Appends the coded symbols to an existing bit stream.
pub fn encode_with_table(symbols: &[u8], table: &CodeTable, writer: &mut BitWriter) -> Result<()> {
    let codes = table.codes();
    for &sym in symbols {
        let (code, len) = codes[sym as usize];
        if len == 0 {
            return Err(Error::Validation(format!(
                "symbol {sym} has no code in the table"
            )));
        }
        writer.write_bits(code, len as usize);
    }
    Ok(())
}

/// Decodes exactly `count` symbols from the reader.
pub fn decode_with_table(
    reader: &mut BitReader,
    table: &CodeTable,
    count: usize,
) -> Result<Vec<u8>> {
    table.validate()?;
    let max_len = table.max_len();

    // first_code/first_index per length drive canonical decoding.
    let mut count_per_len = vec![0usize; max_len + 1];
    for &len in &table.lengths {
        if len > 0 {
            count_per_len[len as usize] += 1;
        }
    }
    let mut sorted: Vec<u8> = (0..ALPHABET as u16)
        .filter(|&s| table.lengths[s as usize] > 0)
        .map(|s| s as u8)
        .collect();
    sorted.sort_by_key(|&s| (table.lengths[s as usize], s));
    let mut first_code = vec![0u64; max_len + 1];
    let mut first_index = vec![0usize; max_len + 1];
    let mut code = 0u64;
    let mut index = 0usize;
    for len in 1..=max_len {
        first_code[len] = code;
        first_index[len] = index;
        code = (code + count_per_len[len] as u64) << 1;
        index += count_per_len[len];
    }

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut code = 0u64;
        let mut len = 0usize;
        loop {
            code = (code << 1) | u64::from(reader.read_bit()?);
            len += 1;
            if len > max_len {
                return Err(Error::Decode("bit pattern matches no code word".into()));
            }
            if count_per_len[len] > 0 {
                let offset = code.wrapping_sub(first_code[len]);
                if offset < count_per_len[len] as u64 {
                    out.push(sorted[first_index[len] + offset as usize]);
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Decodes `count` symbols from a standalone bitstream.
pub fn huffman_decode(bytes: &[u8], table: &CodeTable, count: usize) -> Result<Vec<u8>> {
    let mut reader = BitReader::new(bytes);
    decode_with_table(&mut reader, table, count)
}
