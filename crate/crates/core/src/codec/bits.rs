use std::fmt;
use std::str::FromStr;

/// Payload framing inside one stego text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Framing {
    /// 32-bit big-endian payload bit count, then the payload.
    #[default]
    Header32,
    /// Payload only; the receiver learns its length out of band.
    Raw,
}

impl fmt::Display for Framing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framing::Header32 => "header32",
            Framing::Raw => "raw",
        })
    }
}

impl FromStr for Framing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "header32" => Ok(Framing::Header32),
            "raw" => Ok(Framing::Raw),
            other => Err(format!(
                "unknown framing {other:?} (expected header32 or raw)"
            )),
        }
    }
}

pub const HEADER_BITS: usize = 32;

/// Ordered bits with a read cursor. Frames are consecutive, non-overlapping slices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
    cursor: usize,
}

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits, cursor: 0 }
    }

    /// Framed and zero-padded channel bits for `payload`: optional length
    /// header, payload, then `0`s up to a multiple of `bits_per_token`.
    pub fn framed(payload: &[bool], framing: Framing, bits_per_token: usize) -> Self {
        let mut bits = Vec::with_capacity(payload.len() + HEADER_BITS + bits_per_token);
        if framing == Framing::Header32 {
            let len = u32::try_from(payload.len()).expect("payload length fits the 32-bit header");
            bits.extend((0..HEADER_BITS).rev().map(|i| (len >> i) & 1 == 1));
        }
        bits.extend_from_slice(payload);
        if bits_per_token > 0 {
            while bits.len() % bits_per_token != 0 {
                bits.push(false);
            }
        }
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor >= self.bits.len()
    }

    /// The next `n` bits without consuming them; `None` if fewer remain.
    pub fn peek(&self, n: usize) -> Option<&[bool]> {
        self.bits.get(self.cursor..self.cursor + n)
    }

    pub fn advance(&mut self, n: usize) {
        self.cursor = (self.cursor + n).min(self.bits.len());
    }

    pub fn next_frame(&mut self, n: usize) -> Option<&[bool]> {
        let start = self.cursor;
        if start + n > self.bits.len() {
            return None;
        }
        self.cursor += n;
        Some(&self.bits[start..start + n])
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

/// Bytes to bits, most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect()
}

/// Bits to bytes, most significant bit first; a short final byte is zero-filled.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect()
}

/// Parses a `0`/`1` string.
pub fn parse_bits(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}
