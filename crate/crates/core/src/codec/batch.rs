//! Spreading one payload over many cover texts.
//!
//! Texts are filled in input order. Each text takes as many payload bits as
//! its carrying positions can hold under the token cap
//! (`ceil(max_tokens / s) * l`, minus the header in header32 framing). When a
//! text cannot hold its share (common tokens use up positions) the share is
//! halved until it fits. The manifest records, per text, which payload bits it
//! carries so that raw-framed output can be extracted without guessing.
//!
//! An empty payload produces plain greedy text for every cover. Otherwise, in
//! header32 framing every text carries a frame (possibly of length zero); in
//! raw framing texts after the end of the payload are plain greedy text.

use std::fmt::Write as _;

use super::{extract, CodecError, Embedder, Framing, StegoParams, StegoText, HEADER_BITS};
use crate::bins::BinAssignment;
use crate::lm::Provider;
use crate::tokenizer::{BpeModel, TokenId, EOS_ID};

pub const MANIFEST_HEADER: &str = "line\tbit_offset\tpayload_bits\tembedded_bits\ttokens";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    /// Offset of this text's share within the whole payload.
    pub bit_offset: usize,
    pub payload_bits: usize,
    /// Channel bits including header and padding.
    pub embedded_bits: usize,
    /// Generated tokens, `<eos>` excluded.
    pub tokens: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn total_payload_bits(&self) -> usize {
        self.entries.iter().map(|e| e.payload_bits).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.line, e.bit_offset, e.payload_bits, e.embedded_bits, e.tokens
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err("manifest header row missing".into());
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Result<Vec<usize>, _> = line.split('\t').map(str::parse).collect();
            match fields.as_deref() {
                Ok(&[line, bit_offset, payload_bits, embedded_bits, tokens]) => {
                    entries.push(ManifestEntry {
                        line,
                        bit_offset,
                        payload_bits,
                        embedded_bits,
                        tokens,
                    })
                }
                _ => return Err(format!("manifest row {} is malformed", i + 2)),
            }
        }
        Ok(Self { entries })
    }
}

#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub params: StegoParams,
}

#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub texts: Vec<StegoText>,
    pub manifest: Manifest,
}

impl BatchOutput {
    /// One stego text per line, in input order.
    pub fn stego_lines(&self) -> String {
        let mut out = String::new();
        for t in &self.texts {
            out.push_str(&t.surface);
            out.push('\n');
        }
        out
    }
}

fn body_len(tokens: &[TokenId]) -> usize {
    tokens.iter().filter(|&&t| t != EOS_ID).count()
}

fn capacity_bits(params: &StegoParams) -> Result<usize, CodecError> {
    let step = params
        .step
        .expect("capacity is only defined for bit-carrying params");
    let positions = params.max_tokens.div_ceil(step);
    let channel = positions * params.bits as usize;
    let overhead = if params.framing == Framing::Header32 {
        HEADER_BITS
    } else {
        0
    };
    channel.checked_sub(overhead).ok_or_else(|| {
        CodecError::InvalidParams(format!(
            "{} tokens cannot hold the 32-bit header",
            params.max_tokens
        ))
    })
}

pub fn embed_batch<P: Provider + ?Sized, S: AsRef<str>>(
    embedder: &Embedder<'_>,
    covers: &[S],
    payload: &[bool],
    config: &BatchConfig,
    provider: &mut P,
) -> Result<BatchOutput, CodecError> {
    let params = &config.params;
    let mut texts = Vec::with_capacity(covers.len());
    let mut manifest = Manifest::default();
    let mut offset = 0usize;

    if payload.is_empty() || params.is_zero_bit() {
        if !payload.is_empty() {
            return Err(CodecError::ParamMismatch(
                "zero-bit mode cannot carry a payload".into(),
            ));
        }
        for (line, cover) in covers.iter().enumerate() {
            let text = embedder.generate_zero_bit(cover.as_ref(), provider, params.max_tokens)?;
            manifest.entries.push(ManifestEntry {
                line,
                bit_offset: 0,
                payload_bits: 0,
                embedded_bits: 0,
                tokens: body_len(&text.tokens),
            });
            texts.push(text);
        }
        return Ok(BatchOutput { texts, manifest });
    }

    let capacity = capacity_bits(params)?;
    for (line, cover) in covers.iter().enumerate() {
        let cover = cover.as_ref();
        let mut share = capacity.min(payload.len() - offset);
        let text = loop {
            let chunk = &payload[offset..offset + share];
            match embedder.embed(cover, chunk, params, provider) {
                Ok(text) => break text,
                Err(CodecError::PayloadTooLarge { .. }) if share > 0 => share /= 2,
                Err(e) => return Err(e),
            }
        };
        manifest.entries.push(ManifestEntry {
            line,
            bit_offset: offset,
            payload_bits: share,
            embedded_bits: text.embedded_bits,
            tokens: body_len(&text.tokens),
        });
        offset += share;
        texts.push(text);
    }

    if offset < payload.len() {
        return Err(CodecError::PayloadTooLarge {
            embedded: offset,
            total: payload.len(),
            max_tokens: params.max_tokens,
        });
    }
    Ok(BatchOutput { texts, manifest })
}

/// Concatenates the payload shares of `lines`.
///
/// `line_bits[i]` is the payload length of line `i` (from the manifest). It
/// is required for raw framing; with header32 framing it only serves to skip
/// lines that carry nothing.
pub fn extract_batch<S: AsRef<str>>(
    lines: &[S],
    params: &StegoParams,
    f: &BinAssignment,
    tokenizer: &BpeModel,
    line_bits: Option<&[usize]>,
) -> Result<Vec<bool>, CodecError> {
    if let Some(counts) = line_bits {
        if counts.len() != lines.len() {
            return Err(CodecError::ParamMismatch(format!(
                "{} lengths for {} stego lines",
                counts.len(),
                lines.len()
            )));
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let declared = line_bits.map(|c| c[i]);
        if declared == Some(0) || params.is_zero_bit() {
            continue;
        }
        match params.framing {
            Framing::Raw if declared.is_none() => return Err(CodecError::MissingLength),
            _ => out.extend(extract(line.as_ref(), params, f, tokenizer, declared)?),
        }
    }
    Ok(out)
}
