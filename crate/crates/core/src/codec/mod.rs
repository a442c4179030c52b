//! Embedding and extraction.
//!
//! Generation is token-greedy. Counting generated tokens from zero, a token
//! carries bits when its position equals the next *carrying position*: the
//! first token carries, and after a token that consumed a frame the next
//! carrying position is `s` tokens later. Carrying tokens are the argmax
//! inside the bin spelling the next `l` bits; every other token is the plain
//! argmax. Once the framed payload is consumed, generation is greedy until
//! `<eos>` or the token cap.
//!
//! With the common-token scheme a carrying position may also pick a common
//! token. Such a token consumes no bits and the very next position carries
//! instead.
//!
//! Generated words are restricted to a [`Lexicon`] of canonical
//! segmentations, and a word that starts between two carrying positions must
//! end before the next one. Together these make the text re-tokenize to
//! exactly the generated tokens, which is what lets the receiver work from
//! the surface string alone. `<eos>` is only allowed after the payload has
//! been consumed.

mod batch;
mod bits;

pub use batch::{embed_batch, extract_batch, BatchConfig, BatchOutput, Manifest, ManifestEntry};
pub use bits::{
    bits_to_bytes, bytes_to_bits, format_bits, parse_bits, BitStream, Framing, HEADER_BITS,
};

use thiserror::Error;

use crate::bins::{BinAssignment, BinsError, Slot};
use crate::lm::{argmax, bin_candidates, Distribution, GenerationContext, LmError, Provider};
use crate::tokenizer::{BpeModel, Lexicon, LexiconNode, TokenId, TokenizerError, EOS_ID};

/// Common tokens the hider may pick in a row at carrying positions. Without a
/// cap a greedy model can cycle through common tokens and never embed. The
/// receiver does not need this value.
pub const MAX_COMMON_RUN: usize = 2;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("payload too large: {embedded} of {total} channel bits fit in {max_tokens} tokens")]
    PayloadTooLarge {
        embedded: usize,
        total: usize,
        max_tokens: usize,
    },
    #[error("generated text does not re-tokenize to the generated tokens (first difference at token {0})")]
    RoundTripUnsafe(usize),
    #[error("text ends after {got} of {needed} payload bits")]
    TruncatedPayload { needed: usize, got: usize },
    #[error("raw framing needs the payload bit length")]
    MissingLength,
    #[error("text ends inside the 32-bit length header ({0} bits read)")]
    BadHeader(usize),
    #[error("bin {0} contains no token that can start a word")]
    Unembeddable(u32),
    #[error("no admissible token at position {0}")]
    NoCandidate(usize),
    #[error(transparent)]
    Provider(#[from] LmError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Bins(#[from] BinsError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StegoParams {
    /// Embedding step `s`; `None` means no token carries bits.
    pub step: Option<usize>,
    /// Bits per carrying token `l`; 0 exactly when `step` is `None`.
    pub bits: u32,
    pub framing: Framing,
    pub max_tokens: usize,
}

impl StegoParams {
    pub fn new(
        step: usize,
        bits: u32,
        framing: Framing,
        max_tokens: usize,
    ) -> Result<Self, CodecError> {
        if step == 0 {
            return Err(CodecError::InvalidParams("step must be at least 1".into()));
        }
        if bits == 0 {
            return Err(CodecError::InvalidParams(
                "bits per token must be at least 1".into(),
            ));
        }
        if max_tokens == 0 {
            return Err(CodecError::InvalidParams(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(Self {
            step: Some(step),
            bits,
            framing,
            max_tokens,
        })
    }

    /// `s = infinity, l = 0`: plain greedy generation.
    pub fn zero_bit(max_tokens: usize) -> Self {
        Self {
            step: None,
            bits: 0,
            framing: Framing::Raw,
            max_tokens: max_tokens.max(1),
        }
    }

    pub fn is_zero_bit(&self) -> bool {
        self.step.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StegoText {
    /// Generated tokens, ending in `<eos>` unless the token cap was hit.
    pub tokens: Vec<TokenId>,
    pub surface: String,
    /// Channel bits carried (header and padding included).
    pub embedded_bits: usize,
    /// Payload bits carried (header and padding excluded).
    pub payload_bits: usize,
    /// Positions (0-based) of tokens that consumed a frame.
    pub carrying_positions: Vec<usize>,
}

/// Hider side: everything needed to generate stego text except the model.
#[derive(Clone, Copy)]
pub struct Embedder<'a> {
    pub tokenizer: &'a BpeModel,
    pub bins: &'a BinAssignment,
    pub lexicon: &'a Lexicon,
}

impl<'a> Embedder<'a> {
    pub fn new(tokenizer: &'a BpeModel, bins: &'a BinAssignment, lexicon: &'a Lexicon) -> Self {
        Self {
            tokenizer,
            bins,
            lexicon,
        }
    }

    pub fn embed<P: Provider + ?Sized>(
        &self,
        cover: &str,
        payload: &[bool],
        params: &StegoParams,
        provider: &mut P,
    ) -> Result<StegoText, CodecError> {
        self.check_setup(params, provider)?;
        let stream = match params.step {
            None if payload.is_empty() => BitStream::default(),
            None => {
                return Err(CodecError::ParamMismatch(
                    "zero-bit mode cannot carry a payload".into(),
                ))
            }
            Some(_) if payload.is_empty() && params.framing == Framing::Raw => BitStream::default(),
            Some(_) => BitStream::framed(payload, params.framing, params.bits as usize),
        };
        if !stream.is_empty() {
            self.check_bins_reachable()?;
        }
        let payload_bits = payload.len();
        self.generate(cover, stream, params, provider, payload_bits)
    }

    /// Greedy generation with nothing embedded.
    pub fn generate_zero_bit<P: Provider + ?Sized>(
        &self,
        cover: &str,
        provider: &mut P,
        max_tokens: usize,
    ) -> Result<StegoText, CodecError> {
        self.embed(cover, &[], &StegoParams::zero_bit(max_tokens), provider)
    }

    fn check_setup<P: Provider + ?Sized>(
        &self,
        params: &StegoParams,
        provider: &P,
    ) -> Result<(), CodecError> {
        if params.max_tokens == 0 {
            return Err(CodecError::InvalidParams(
                "max_tokens must be at least 1".into(),
            ));
        }
        if params.step.is_some() != (params.bits > 0) {
            return Err(CodecError::InvalidParams(
                "zero-bit mode needs both s = infinity and l = 0".into(),
            ));
        }
        if !params.is_zero_bit() && params.bits != self.bins.bits() {
            return Err(CodecError::ParamMismatch(format!(
                "params carry {} bits per token, bins file carries {}",
                params.bits,
                self.bins.bits()
            )));
        }
        let m = self.tokenizer.vocab_size();
        if provider.vocab_size() != m {
            return Err(CodecError::ParamMismatch(format!(
                "provider vocabulary has {} tokens, tokenizer has {m}",
                provider.vocab_size()
            )));
        }
        self.bins
            .check_vocab(self.tokenizer)
            .map_err(|e| CodecError::ParamMismatch(e.to_string()))?;
        if self.lexicon.is_empty() {
            return Err(CodecError::InvalidParams("lexicon is empty".into()));
        }
        Ok(())
    }

    /// Every bin must offer at least one token that is a complete word on its own.
    fn check_bins_reachable(&self) -> Result<(), CodecError> {
        for bin in 0..self.bins.bin_count() as u32 {
            let bits = crate::bins::index_to_bits(bin, self.bins.bits());
            let mut candidates = bin_candidates(self.bins, &bits)?;
            if !candidates.any(|t| self.lexicon.is_single_token_word(t)) {
                return Err(CodecError::Unembeddable(bin));
            }
        }
        Ok(())
    }

    /// Whether `token` may follow the partial word at `node` and still finish
    /// within `budget` tokens (itself included).
    fn admissible(&self, node: LexiconNode, token: TokenId, budget: usize) -> Option<LexiconNode> {
        let next = self.lexicon.step(node, token)?;
        let needed = self.lexicon.min_finish(next) as usize + 1;
        (needed <= budget).then_some(next)
    }

    fn generate<P: Provider + ?Sized>(
        &self,
        cover: &str,
        mut stream: BitStream,
        params: &StegoParams,
        provider: &mut P,
        payload_bits: usize,
    ) -> Result<StegoText, CodecError> {
        let l = params.bits as usize;
        let step = params.step.unwrap_or(usize::MAX);
        let mut tokens: Vec<TokenId> = Vec::new();
        let mut node = Lexicon::ROOT;
        let mut next_carry = 0usize;
        let mut common_run = 0usize;
        let mut carrying_positions = Vec::new();

        for pos in 0..params.max_tokens {
            let until_cap = params.max_tokens - pos;
            let ctx = GenerationContext::new(cover, &tokens);
            let mut dist = provider.next_distribution(&ctx)?;

            let choice = if !stream.is_exhausted() && pos == next_carry {
                let frame = stream
                    .peek(l)
                    .expect("stream length is a multiple of l")
                    .to_vec();
                let after_frame = if stream.remaining() > l {
                    step
                } else {
                    until_cap
                };
                let candidates: Vec<(TokenId, LexiconNode)> = bin_candidates(self.bins, &frame)?
                    .filter_map(|t| {
                        let budget = match self.bins.slot(t) {
                            Slot::None if common_run >= MAX_COMMON_RUN => return None,
                            Slot::None => 1,
                            _ => after_frame,
                        };
                        self.admissible(node, t, budget).map(|n| (t, n))
                    })
                    .collect();
                let token = pick(provider, &ctx, &mut dist, &candidates, pos)?;
                if self.bins.slot(token) == Slot::None {
                    common_run += 1;
                    next_carry = pos + 1;
                } else {
                    common_run = 0;
                    stream.advance(l);
                    carrying_positions.push(pos);
                    next_carry = pos.saturating_add(step);
                }
                token
            } else {
                let budget = if stream.is_exhausted() {
                    until_cap
                } else {
                    next_carry - pos
                };
                let mut candidates: Vec<(TokenId, LexiconNode)> = self
                    .lexicon
                    .children(node)
                    .filter_map(|(t, _)| self.admissible(node, t, budget).map(|n| (t, n)))
                    .collect();
                if stream.is_exhausted() && node == Lexicon::ROOT {
                    candidates.push((EOS_ID, Lexicon::ROOT));
                }
                pick(provider, &ctx, &mut dist, &candidates, pos)?
            };

            tokens.push(choice);
            if choice == EOS_ID {
                break;
            }
            let next = self
                .lexicon
                .step(node, choice)
                .expect("choices come from the lexicon");
            node = if self.lexicon.is_terminal(next) {
                Lexicon::ROOT
            } else {
                next
            };
        }

        if !stream.is_exhausted() {
            return Err(CodecError::PayloadTooLarge {
                embedded: stream.cursor(),
                total: stream.len(),
                max_tokens: params.max_tokens,
            });
        }

        let surface = self.tokenizer.decode(&tokens)?;
        let reencoded = self.tokenizer.encode(&surface)?;
        let body = tokens.strip_suffix(&[EOS_ID]).unwrap_or(&tokens);
        if reencoded != body {
            let at = reencoded
                .iter()
                .zip(body)
                .take_while(|(a, b)| a == b)
                .count();
            return Err(CodecError::RoundTripUnsafe(at));
        }

        Ok(StegoText {
            tokens,
            surface,
            embedded_bits: stream.len(),
            payload_bits: if stream.is_empty() { 0 } else { payload_bits },
            carrying_positions,
        })
    }
}

/// Argmax over `candidates`. A partial (top-k) distribution is replaced by
/// the dense one when the winner was not explicitly reported.
fn pick<P: Provider + ?Sized>(
    provider: &mut P,
    ctx: &GenerationContext<'_>,
    dist: &mut Distribution,
    candidates: &[(TokenId, LexiconNode)],
    pos: usize,
) -> Result<TokenId, CodecError> {
    let ids = || candidates.iter().map(|&(t, _)| t);
    let mut best = argmax(dist, ids()).ok_or(CodecError::NoCandidate(pos))?;
    if !dist.is_exact(best) {
        *dist = provider.dense_distribution(ctx)?;
        best = argmax(dist, ids()).ok_or(CodecError::NoCandidate(pos))?;
    }
    Ok(best)
}

/// Receiver side: recovers the payload from the stego text alone.
///
/// In header32 framing the length header is read first. In raw framing
/// `declared_bits` gives the payload length.
pub fn extract(
    surface: &str,
    params: &StegoParams,
    f: &BinAssignment,
    tokenizer: &BpeModel,
    declared_bits: Option<usize>,
) -> Result<Vec<bool>, CodecError> {
    let Some(step) = params.step else {
        return match declared_bits {
            Some(0) | None => Ok(Vec::new()),
            Some(n) => Err(CodecError::TruncatedPayload { needed: n, got: 0 }),
        };
    };
    if params.bits != f.bits() {
        return Err(CodecError::ParamMismatch(format!(
            "params carry {} bits per token, bins file carries {}",
            params.bits,
            f.bits()
        )));
    }
    f.check_vocab(tokenizer)
        .map_err(|e| CodecError::ParamMismatch(e.to_string()))?;

    let tokens = tokenizer.encode(surface)?;
    let mut needed = match params.framing {
        Framing::Header32 => HEADER_BITS,
        Framing::Raw => declared_bits.ok_or(CodecError::MissingLength)?,
    };
    let mut header_read = params.framing == Framing::Raw;
    let mut bits: Vec<bool> = Vec::with_capacity(needed);
    let mut next_carry = 0usize;

    for (pos, &token) in tokens.iter().enumerate() {
        if bits.len() >= needed && header_read {
            break;
        }
        if pos != next_carry {
            continue;
        }
        match f.slot(token) {
            Slot::Bin(_) => {
                bits.extend(f.bits_of(token));
                next_carry = pos.saturating_add(step);
            }
            Slot::None => next_carry = pos + 1,
            Slot::Eos => break,
        }
        if !header_read && bits.len() >= HEADER_BITS {
            let len = bits[..HEADER_BITS]
                .iter()
                .fold(0u64, |acc, &b| (acc << 1) | b as u64);
            bits.drain(..HEADER_BITS);
            needed = len as usize;
            header_read = true;
        }
    }

    if !header_read {
        return Err(CodecError::BadHeader(bits.len()));
    }
    if bits.len() < needed {
        return Err(CodecError::TruncatedPayload {
            needed,
            got: bits.len(),
        });
    }
    bits.truncate(needed);
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bins::Scheme;
    use crate::lm::ScriptedProvider;

    /// V = {<eos>, <unk>, a, b, c, d}, word level; f: {a, c} -> "0", {b, d} -> "1".
    fn toy() -> (BpeModel, BinAssignment, Lexicon) {
        let model = BpeModel::from_words(&["a", "b", "c", "d"]);
        let slots = vec![
            Slot::Eos,
            Slot::None,
            Slot::Bin(0),
            Slot::Bin(1),
            Slot::Bin(0),
            Slot::Bin(1),
        ];
        let f = BinAssignment::from_slots(Scheme::Bins, 1, "00", model.vocab().to_vec(), slots)
            .unwrap();
        let lex = Lexicon::from_vocab(&model);
        (model, f, lex)
    }

    fn dist(p: [f64; 6]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn script() -> ScriptedProvider {
        // Order: eos, unk, a, b, c, d.
        ScriptedProvider::new(vec![
            dist([0.05, 0.0, 0.4, 0.3, 0.2, 0.05]),
            dist([0.2, 0.0, 0.5, 0.1, 0.1, 0.1]),
            Distribution::one_hot(6, EOS_ID),
        ])
    }

    #[test]
    fn hand_trace_embed_and_extract() {
        let (model, f, lex) = toy();
        let params = StegoParams::new(1, 1, Framing::Raw, 10).unwrap();
        let payload = parse_bits("10").unwrap();
        let text = Embedder::new(&model, &f, &lex)
            .embed("cover", &payload, &params, &mut script())
            .unwrap();
        assert_eq!(text.tokens, vec![3, 2, EOS_ID]); // b a <eos>
        assert_eq!(text.surface, "b a");
        assert_eq!(text.embedded_bits, 2);
        assert_eq!(
            extract(&text.surface, &params, &f, &model, Some(2)).unwrap(),
            payload
        );
    }

    #[test]
    fn empty_payload_equals_zero_bit() {
        let (model, f, lex) = toy();
        let emb = Embedder::new(&model, &f, &lex);
        let params = StegoParams::new(1, 1, Framing::Raw, 10).unwrap();
        let a = emb.embed("c", &[], &params, &mut script()).unwrap();
        let b = emb.generate_zero_bit("c", &mut script(), 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.tokens, vec![2, 2, EOS_ID]);
        assert_eq!(b.embedded_bits, 0);
        assert!(extract(&a.surface, &params, &f, &model, Some(0))
            .unwrap()
            .is_empty());
        assert!(
            extract(&b.surface, &StegoParams::zero_bit(10), &f, &model, Some(0))
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn scripted_spelling() {
        let (model, f, lex) = toy();
        let mut provider = ScriptedProvider::spelling(6, &[5, 4, 3, 2, EOS_ID]);
        let text = Embedder::new(&model, &f, &lex)
            .generate_zero_bit("", &mut provider, 20)
            .unwrap();
        assert_eq!(text.tokens, vec![5, 4, 3, 2, EOS_ID]);
        assert_eq!(text.surface, "d c b a");
    }

    #[test]
    fn payload_too_large() {
        let (model, f, lex) = toy();
        let params = StegoParams::new(1, 1, Framing::Raw, 3).unwrap();
        let mut provider = crate::lm::UniformProvider(6);
        let err = Embedder::new(&model, &f, &lex)
            .embed("", &parse_bits("1011").unwrap(), &params, &mut provider)
            .unwrap_err();
        assert!(matches!(
            err,
            CodecError::PayloadTooLarge {
                embedded: 3,
                total: 4,
                max_tokens: 3
            }
        ));
    }

    #[test]
    fn eos_suppressed_while_bits_remain() {
        let (model, f, lex) = toy();
        let params = StegoParams::new(2, 1, Framing::Raw, 10).unwrap();
        // <eos> is the greedy choice everywhere; the non-carrying step must avoid it.
        let mut provider =
            ScriptedProvider::new(vec![
                Distribution::new(vec![0.5, 0.0, 0.2, 0.1, 0.1, 0.1])
                    .unwrap();
                10
            ]);
        let text = Embedder::new(&model, &f, &lex)
            .embed("", &parse_bits("01").unwrap(), &params, &mut provider)
            .unwrap();
        assert_eq!(text.tokens, vec![2, 2, 3, EOS_ID]);
        assert_eq!(text.carrying_positions, vec![0, 2]);
        assert_eq!(
            extract(&text.surface, &params, &f, &model, Some(2)).unwrap(),
            parse_bits("01").unwrap()
        );
    }

    #[test]
    fn extraction_errors() {
        let (model, f, lex) = toy();
        let raw = StegoParams::new(1, 1, Framing::Raw, 50).unwrap();
        assert!(matches!(
            extract("a b", &raw, &f, &model, None),
            Err(CodecError::MissingLength)
        ));
        assert!(matches!(
            extract("a b", &raw, &f, &model, Some(3)),
            Err(CodecError::TruncatedPayload { needed: 3, got: 2 })
        ));

        let hdr = StegoParams::new(1, 1, Framing::Header32, 100).unwrap();
        assert!(matches!(
            extract("a b", &hdr, &f, &model, None),
            Err(CodecError::BadHeader(2))
        ));

        let mut provider = crate::lm::UniformProvider(6);
        let payload = parse_bits("110").unwrap();
        let text = Embedder::new(&model, &f, &lex)
            .embed("", &payload, &hdr, &mut provider)
            .unwrap();
        assert_eq!(text.embedded_bits, 35);
        assert_eq!(
            extract(&text.surface, &hdr, &f, &model, None).unwrap(),
            payload
        );
        let words: Vec<&str> = text.surface.split(' ').collect();
        let cut = words[..33].join(" ");
        assert!(matches!(
            extract(&cut, &hdr, &f, &model, None),
            Err(CodecError::TruncatedPayload { needed: 3, got: 1 })
        ));
    }

    #[test]
    fn header_example_frames_with_three_bits() {
        // 32 header bits + 9 payload bits, padded with one zero to 14 frames of 3.
        let stream = BitStream::framed(&parse_bits("010111000").unwrap(), Framing::Header32, 3);
        assert_eq!(stream.len(), 42);
        assert_eq!(format_bits(&stream.as_bits()[32..41]), "010111000");
        assert!(!stream.as_bits()[41]);
    }

    #[test]
    fn parameter_checks() {
        let (model, f, lex) = toy();
        let emb = Embedder::new(&model, &f, &lex);
        assert!(StegoParams::new(0, 1, Framing::Raw, 5).is_err());
        assert!(StegoParams::new(1, 0, Framing::Raw, 5).is_err());
        let two_bits = StegoParams::new(1, 2, Framing::Raw, 5).unwrap();
        assert!(matches!(
            emb.embed("", &[true], &two_bits, &mut crate::lm::UniformProvider(6)),
            Err(CodecError::ParamMismatch(_))
        ));
        let ok = StegoParams::new(1, 1, Framing::Raw, 5).unwrap();
        assert!(matches!(
            emb.embed("", &[true], &ok, &mut crate::lm::UniformProvider(7)),
            Err(CodecError::ParamMismatch(_))
        ));
        assert!(matches!(
            emb.embed(
                "",
                &[true],
                &StegoParams::zero_bit(5),
                &mut crate::lm::UniformProvider(6)
            ),
            Err(CodecError::ParamMismatch(_))
        ));
    }
}
