//! The token-to-bits mapping `f`.
//!
//! The vocabulary is split into `2^l + 1` disjoint groups. Tokens in bin
//! `i < 2^l` carry the `l`-bit big-endian binary form of `i`; `<eos>` alone
//! forms the final group and carries nothing. Tokens marked [`Slot::None`]
//! (`<unk>`, and the common tokens of the common-token variant) belong to no
//! bin and carry nothing either.
//!
//! Three constructions are provided:
//!
//! * [`build_sabins`] walks tokens in descending corpus frequency and spreads
//!   each token's unprocessed substitution set over distinct bins, in chunks of
//!   at most `2^l`. Inside a chunk, draws happen in a fixed order: shuffle the
//!   chunk candidates and take the first `n_s` tokens, then pick `n_s` bins
//!   uniformly among the least-filled ones, then shuffle the chosen bins to
//!   pair them with the tokens.
//! * [`build_bins_random`] shuffles the vocabulary and deals it round-robin
//!   into `2^l` bins.
//! * [`build_bins_common`] first removes the `common_count` most frequent
//!   tokens (they become selectable everywhere but carry no bits), then deals
//!   the rest as in [`build_bins_random`].

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::key::SecretKey;
use crate::synonyms::SynonymDb;
use crate::tokenizer::{BpeModel, FrequencyTable, TokenId, EOS_ID, EOS_TOKEN, UNK_ID};

/// Largest supported bits-per-token. Keeps `2^l` bin tables allocatable.
pub const MAX_BITS: u32 = 24;

const FILE_MAGIC: &str = "bins-v1";

#[derive(Debug, Error)]
pub enum BinsError {
    #[error("bits per token must be in 1..={MAX_BITS}, got {0}")]
    InvalidBits(u32),
    #[error("{bins} bins cannot all be filled from {tokens} assignable tokens")]
    BinUnderfilled { bins: usize, tokens: usize },
    #[error("vocabulary has no <eos> token")]
    MissingEos,
    #[error("common token count {common} leaves no room in a vocabulary of {vocab}")]
    TooManyCommon { common: usize, vocab: usize },
    #[error("frequency table covers {got} tokens, vocabulary has {expected}")]
    FrequencyMismatch { expected: usize, got: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("bins file vocabulary does not match the tokenizer at id {0}")]
    VocabMismatch(TokenId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    SaBins,
    Bins,
    BinsCommon,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::SaBins => "sabins",
            Scheme::Bins => "bins",
            Scheme::BinsCommon => "bins-common",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sabins" => Ok(Scheme::SaBins),
            "bins" => Ok(Scheme::Bins),
            "bins-common" => Ok(Scheme::BinsCommon),
            other => Err(format!(
                "unknown scheme {other:?} (expected sabins, bins or bins-common)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Bin(u32),
    Eos,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinAssignment {
    scheme: Scheme,
    bits: u32,
    key_fingerprint: String,
    tokens: Vec<String>,
    slots: Vec<Slot>,
    members: Vec<Vec<TokenId>>,
    none_tokens: Vec<TokenId>,
}

impl BinAssignment {
    /// Builds and validates an assignment from explicit slots, one per token.
    pub fn from_slots(
        scheme: Scheme,
        bits: u32,
        key_fingerprint: impl Into<String>,
        tokens: Vec<String>,
        slots: Vec<Slot>,
    ) -> Result<Self, BinsError> {
        check_bits(bits)?;
        if tokens.len() != slots.len() {
            return Err(BinsError::InvariantViolation(format!(
                "{} tokens but {} slots",
                tokens.len(),
                slots.len()
            )));
        }
        let bin_count = 1usize << bits;
        let mut members = vec![Vec::new(); bin_count];
        let mut none_tokens = Vec::new();
        let mut eos = None;
        for (id, slot) in slots.iter().enumerate() {
            let id = id as TokenId;
            match *slot {
                Slot::Bin(b) if (b as usize) < bin_count => members[b as usize].push(id),
                Slot::Bin(b) => {
                    return Err(BinsError::InvariantViolation(format!(
                        "token {:?} placed in bin {b}, only {bin_count} bins exist",
                        tokens[id as usize]
                    )))
                }
                Slot::None => none_tokens.push(id),
                Slot::Eos => {
                    if eos.replace(id).is_some() {
                        return Err(BinsError::InvariantViolation(
                            "more than one token in the <eos> group".into(),
                        ));
                    }
                }
            }
        }
        match eos {
            Some(id) if tokens[id as usize] == EOS_TOKEN => {}
            Some(id) => {
                return Err(BinsError::InvariantViolation(format!(
                    "the <eos> group holds {:?} instead of <eos>",
                    tokens[id as usize]
                )))
            }
            None => {
                return Err(BinsError::InvariantViolation(
                    "<eos> is not in its own group".into(),
                ))
            }
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(BinsError::InvariantViolation(format!(
                "bin {empty} is empty"
            )));
        }
        Ok(Self {
            scheme,
            bits,
            key_fingerprint: key_fingerprint.into(),
            tokens,
            slots,
            members,
            none_tokens,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Bits carried per stego token (`l`).
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn bin_count(&self) -> usize {
        self.members.len()
    }

    pub fn key_fingerprint(&self) -> &str {
        &self.key_fingerprint
    }

    pub fn vocab_size(&self) -> usize {
        self.slots.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn slot(&self, token: TokenId) -> Slot {
        self.slots
            .get(token as usize)
            .copied()
            .unwrap_or(Slot::None)
    }

    pub fn members(&self, bin: u32) -> &[TokenId] {
        &self.members[bin as usize]
    }

    /// Tokens that belong to no bin (`<unk>` and, for the common-token
    /// variant, the common tokens).
    pub fn none_tokens(&self) -> &[TokenId] {
        &self.none_tokens
    }

    /// `l`-bit big-endian form of the token's bin index; empty for `<eos>`
    /// and unassigned tokens.
    pub fn bits_of(&self, token: TokenId) -> Vec<bool> {
        match self.slot(token) {
            Slot::Bin(b) => index_to_bits(b, self.bits),
            Slot::Eos | Slot::None => Vec::new(),
        }
    }

    pub fn bit_string(&self, token: TokenId) -> String {
        self.bits_of(token)
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Errors unless `model` has exactly this vocabulary, id for id.
    pub fn check_vocab(&self, model: &BpeModel) -> Result<(), BinsError> {
        if model.vocab_size() != self.tokens.len() {
            return Err(BinsError::VocabMismatch(
                model.vocab_size().min(self.tokens.len()) as TokenId,
            ));
        }
        for (id, token) in self.tokens.iter().enumerate() {
            if model.token(id as TokenId) != Some(token.as_str()) {
                return Err(BinsError::VocabMismatch(id as TokenId));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{FILE_MAGIC} scheme={} l={} key={}\n",
            self.scheme, self.bits, self.key_fingerprint
        );
        for (token, slot) in self.tokens.iter().zip(&self.slots) {
            match slot {
                Slot::Bin(b) => writeln!(out, "{token}\t{b}"),
                Slot::Eos => writeln!(out, "{token}\tEOS"),
                Slot::None => writeln!(out, "{token}\tNONE"),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BinsError> {
        let parse = |line: usize, msg: String| BinsError::Parse { line, msg };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse(1, "empty bins file".into()))?;
        let mut fields = header.split(' ');
        if fields.next() != Some(FILE_MAGIC) {
            return Err(parse(1, "missing bins-v1 header".into()));
        }
        let (mut scheme, mut bits, mut key) = (None, None, None);
        for field in fields {
            match field.split_once('=') {
                Some(("scheme", v)) => scheme = Some(v.parse::<Scheme>().map_err(|e| parse(1, e))?),
                Some(("l", v)) => {
                    bits = Some(
                        v.parse::<u32>()
                            .map_err(|_| parse(1, format!("bad l {v:?}")))?,
                    )
                }
                Some(("key", v)) if v.chars().all(|c| c.is_ascii_hexdigit()) => {
                    key = Some(v.to_owned())
                }
                _ => return Err(parse(1, format!("unrecognized header field {field:?}"))),
            }
        }
        let (Some(scheme), Some(bits), Some(key)) = (scheme, bits, key) else {
            return Err(parse(1, "header needs scheme=, l= and key=".into()));
        };
        check_bits(bits)?;

        let mut tokens: Vec<String> = Vec::new();
        let mut slots = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let (token, value) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse(n, "expected <token>\\t<bin|NONE|EOS>".into()))?;
            if token.is_empty() || !seen.insert(token) {
                return Err(parse(n, format!("duplicate or empty token {token:?}")));
            }
            let slot = match value {
                "EOS" => Slot::Eos,
                "NONE" => Slot::None,
                v => Slot::Bin(
                    v.parse()
                        .map_err(|_| parse(n, format!("bad bin index {v:?}")))?,
                ),
            };
            tokens.push(token.to_owned());
            slots.push(slot);
        }
        Self::from_slots(scheme, bits, key, tokens, slots)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BinsError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BinsError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub fn index_to_bits(index: u32, bits: u32) -> Vec<bool> {
    (0..bits)
        .rev()
        .map(|shift| (index >> shift) & 1 == 1)
        .collect()
}

pub fn bits_to_index(bits: &[bool]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
}

fn check_bits(bits: u32) -> Result<(), BinsError> {
    if (1..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(BinsError::InvalidBits(bits))
    }
}

/// Common preconditions; returns the token strings and initial slots with
/// `<eos>` and `<unk>` placed.
fn prepare(model: &BpeModel, bits: u32) -> Result<(Vec<String>, Vec<Slot>), BinsError> {
    check_bits(bits)?;
    if model.token(EOS_ID) != Some(EOS_TOKEN) {
        return Err(BinsError::MissingEos);
    }
    let tokens = model.vocab().to_vec();
    let mut slots = vec![Slot::None; tokens.len()];
    slots[EOS_ID as usize] = Slot::Eos;
    Ok((tokens, slots))
}

fn assignable(model: &BpeModel, id: TokenId) -> bool {
    id != EOS_ID && id != UNK_ID && (id as usize) < model.vocab_size()
}

fn ensure_fillable(bits: u32, available: usize) -> Result<(), BinsError> {
    let bins = 1usize << bits;
    if available < bins {
        Err(BinsError::BinUnderfilled {
            bins,
            tokens: available,
        })
    } else {
        Ok(())
    }
}

/// Record of the SaBins walk, for checking construction properties.
#[derive(Clone, Debug, Default)]
pub struct ConstructionLog {
    /// Anchor tokens in processing order.
    pub order: Vec<TokenId>,
    /// Every chunk as `(token, bin)` pairs, in construction order.
    pub chunks: Vec<Vec<(TokenId, u32)>>,
}

pub fn build_sabins(
    model: &BpeModel,
    freqs: &FrequencyTable,
    syndb: &SynonymDb,
    bits: u32,
    key: &SecretKey,
) -> Result<BinAssignment, BinsError> {
    build_sabins_logged(model, freqs, syndb, bits, key).map(|(f, _)| f)
}

pub fn build_sabins_logged(
    model: &BpeModel,
    freqs: &FrequencyTable,
    syndb: &SynonymDb,
    bits: u32,
    key: &SecretKey,
) -> Result<(BinAssignment, ConstructionLog), BinsError> {
    let (tokens, mut slots) = prepare(model, bits)?;
    let m = tokens.len();
    if freqs.len() != m {
        return Err(BinsError::FrequencyMismatch {
            expected: m,
            got: freqs.len(),
        });
    }
    let available = (0..m as TokenId)
        .filter(|&id| assignable(model, id))
        .count();
    ensure_fillable(bits, available)?;

    let bin_count = 1usize << bits;
    let mut processed: Vec<bool> = (0..m as TokenId).map(|id| !assignable(model, id)).collect();
    let mut load = vec![0usize; bin_count];
    let mut rng = key.stream("sabins");
    let mut log = ConstructionLog::default();
    let mut bin_order: Vec<u32> = (0..bin_count as u32).collect();

    for anchor in freqs.sorted_desc() {
        if anchor == EOS_ID {
            continue;
        }
        log.order.push(anchor);
        let mut pending: Vec<TokenId> = syndb
            .substitution_set(model, anchor)
            .members
            .into_iter()
            .filter(|&t| !processed[t as usize])
            .collect();
        while !pending.is_empty() {
            let n = pending.len().min(bin_count);
            rng.shuffle(&mut pending);
            let chosen: Vec<TokenId> = pending.drain(..n).collect();

            // Uniform among the least-filled bins: random order, then a stable sort by load.
            for (i, b) in bin_order.iter_mut().enumerate() {
                *b = i as u32;
            }
            rng.shuffle(&mut bin_order);
            bin_order.sort_by_key(|&b| load[b as usize]);
            let mut targets: Vec<u32> = bin_order[..n].to_vec();
            rng.shuffle(&mut targets);

            let chunk: Vec<(TokenId, u32)> = chosen.into_iter().zip(targets).collect();
            for &(token, bin) in &chunk {
                slots[token as usize] = Slot::Bin(bin);
                processed[token as usize] = true;
                load[bin as usize] += 1;
            }
            log.chunks.push(chunk);
            pending.sort_unstable();
        }
    }

    let f = BinAssignment::from_slots(Scheme::SaBins, bits, key.fingerprint(), tokens, slots)?;
    Ok((f, log))
}

pub fn build_bins_random(
    model: &BpeModel,
    bits: u32,
    key: &SecretKey,
) -> Result<BinAssignment, BinsError> {
    let (tokens, mut slots) = prepare(model, bits)?;
    let pool: Vec<TokenId> = (0..tokens.len() as TokenId)
        .filter(|&id| assignable(model, id))
        .collect();
    deal(&mut slots, pool, bits, key)?;
    BinAssignment::from_slots(Scheme::Bins, bits, key.fingerprint(), tokens, slots)
}

pub fn build_bins_common(
    model: &BpeModel,
    freqs: &FrequencyTable,
    bits: u32,
    key: &SecretKey,
    common_count: usize,
) -> Result<BinAssignment, BinsError> {
    let (tokens, mut slots) = prepare(model, bits)?;
    let m = tokens.len();
    if freqs.len() != m {
        return Err(BinsError::FrequencyMismatch {
            expected: m,
            got: freqs.len(),
        });
    }
    if common_count + 1 >= m {
        return Err(BinsError::TooManyCommon {
            common: common_count,
            vocab: m,
        });
    }
    let mut common = vec![false; m];
    for id in freqs
        .sorted_desc()
        .into_iter()
        .filter(|&id| assignable(model, id))
        .take(common_count)
    {
        common[id as usize] = true;
    }
    let pool: Vec<TokenId> = (0..m as TokenId)
        .filter(|&id| assignable(model, id) && !common[id as usize])
        .collect();
    deal(&mut slots, pool, bits, key)?;
    BinAssignment::from_slots(Scheme::BinsCommon, bits, key.fingerprint(), tokens, slots)
}

fn deal(
    slots: &mut [Slot],
    mut pool: Vec<TokenId>,
    bits: u32,
    key: &SecretKey,
) -> Result<(), BinsError> {
    ensure_fillable(bits, pool.len())?;
    let bin_count = 1usize << bits;
    key.stream("bins").shuffle(&mut pool);
    for (i, token) in pool.into_iter().enumerate() {
        slots[token as usize] = Slot::Bin((i % bin_count) as u32);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> BpeModel {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        BpeModel::from_words(&words)
    }

    fn uniform_freqs(model: &BpeModel) -> FrequencyTable {
        FrequencyTable::from_counts(vec![1; model.vocab_size()])
    }

    fn key(s: &str) -> SecretKey {
        SecretKey::from_passphrase(s)
    }

    #[test]
    fn bit_string_example() {
        let model = vocab(40);
        let f = build_bins_random(&model, 4, &key("k")).unwrap();
        let token = f.members(3)[0];
        assert_eq!(f.bit_string(token), "0011");
        assert_eq!(f.bit_string(EOS_ID), "");
    }

    #[test]
    fn single_bit_strings() {
        let model = vocab(4);
        let f = build_bins_random(&model, 1, &key("k")).unwrap();
        assert_eq!(f.bit_string(f.members(1)[0]), "1");
        assert_eq!(f.bit_string(f.members(0)[0]), "0");
        assert_eq!(f.bit_string(UNK_ID), "");
    }

    #[test]
    fn forced_bijection_with_singleton_synsets() {
        let model = vocab(4);
        let db = SynonymDb::new();
        let f = build_sabins(&model, &uniform_freqs(&model), &db, 2, &key("any")).unwrap();
        for bin in 0..4 {
            assert_eq!(f.members(bin).len(), 1);
        }
        assert_eq!(f.slot(EOS_ID), Slot::Eos);
    }

    #[test]
    fn two_synonyms_split_across_one_bit() {
        let model = BpeModel::from_words(&["a", "b", "c", "d"]);
        let mut db = SynonymDb::new();
        db.add_synset(&["a", "b"]);
        for k in ["1", "2", "3", "4", "5"] {
            let f = build_sabins(&model, &uniform_freqs(&model), &db, 1, &key(k)).unwrap();
            let (a, b) = (model.id_of("a").unwrap(), model.id_of("b").unwrap());
            assert_ne!(f.slot(a), f.slot(b));
        }
    }

    #[test]
    fn underfilled_and_bad_bits() {
        let model = vocab(3);
        assert!(matches!(
            build_bins_random(&model, 2, &key("k")),
            Err(BinsError::BinUnderfilled { bins: 4, tokens: 3 })
        ));
        assert!(matches!(
            build_bins_random(&model, 0, &key("k")),
            Err(BinsError::InvalidBits(0))
        ));
        let big = vocab(998);
        assert!(matches!(
            build_sabins(&big, &uniform_freqs(&big), &SynonymDb::new(), 20, &key("k")),
            Err(BinsError::BinUnderfilled { .. })
        ));
    }

    #[test]
    fn random_bins_even_sizes() {
        // 33 tokens including <eos> and <unk>: 31 assignable over 8 bins.
        let model = vocab(31);
        assert_eq!(model.vocab_size(), 33);
        let f = build_bins_random(&model, 3, &key("k")).unwrap();
        let sizes: Vec<usize> = (0..8).map(|b| f.members(b).len()).collect();
        assert!(sizes.iter().all(|&s| s == 3 || s == 4), "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 31);

        let f = build_bins_random(&vocab(32), 3, &key("k")).unwrap();
        assert!((0..8).all(|b| f.members(b).len() == 4));

        let exact = vocab(8);
        let f = build_bins_random(&exact, 3, &key("k")).unwrap();
        assert!((0..8).all(|b| f.members(b).len() == 1));
    }

    #[test]
    fn different_keys_differ() {
        let model = vocab(1000);
        let a = build_bins_random(&model, 2, &key("alpha")).unwrap();
        let b = build_bins_random(&model, 2, &key("beta")).unwrap();
        assert_ne!(a.to_text(), b.to_text());
    }

    #[test]
    fn common_variant() {
        let model = vocab(20);
        let counts: Vec<u64> = (0..model.vocab_size() as u64).rev().collect();
        let freqs = FrequencyTable::from_counts(counts);
        let plain = build_bins_random(&model, 2, &key("k")).unwrap();
        let zero = build_bins_common(&model, &freqs, 2, &key("k"), 0).unwrap();
        for id in 0..model.vocab_size() as TokenId {
            assert_eq!(plain.slot(id), zero.slot(id));
        }

        let f = build_bins_common(&model, &freqs, 2, &key("k"), 5).unwrap();
        // Highest counts go to the lowest assignable ids (2..=6).
        for id in 2..7 {
            assert_eq!(f.slot(id), Slot::None);
        }
        assert_eq!(f.none_tokens().len(), 6);

        // m = 22: common_count = m - 2 leaves nothing to deal.
        assert!(build_bins_common(&model, &freqs, 1, &key("k"), 20).is_err());
        let f = build_bins_common(&model, &freqs, 1, &key("k"), 18).unwrap();
        assert_eq!((f.members(0).len(), f.members(1).len()), (1, 1));
    }

    #[test]
    fn file_round_trip_and_tampering() {
        let model = vocab(50);
        let f = build_sabins(
            &model,
            &uniform_freqs(&model),
            &SynonymDb::new(),
            3,
            &key("k"),
        )
        .unwrap();
        let text = f.to_text();
        assert!(text.starts_with(&format!(
            "bins-v1 scheme=sabins l=3 key={}\n",
            key("k").fingerprint()
        )));
        assert_eq!(BinAssignment::from_text(&text).unwrap(), f);

        let moved = text.replace("<eos>\tEOS", "<eos>\t0");
        assert!(matches!(
            BinAssignment::from_text(&moved),
            Err(BinsError::InvariantViolation(_))
        ));

        let dup = format!("{text}w3\t1\n");
        assert!(matches!(
            BinAssignment::from_text(&dup),
            Err(BinsError::Parse { .. })
        ));

        let out_of_range: String = text
            .lines()
            .map(|l| if l.starts_with("w0\t") { "w0\t9".to_owned() } else { l.to_owned() } + "\n")
            .collect();
        assert!(matches!(
            BinAssignment::from_text(&out_of_range),
            Err(BinsError::InvariantViolation(_))
        ));
    }

    #[test]
    fn vocab_check() {
        let model = vocab(10);
        let f = build_bins_random(&model, 1, &key("k")).unwrap();
        assert!(f.check_vocab(&model).is_ok());
        assert!(matches!(
            f.check_vocab(&vocab(11)),
            Err(BinsError::VocabMismatch(_))
        ));
    }

    #[test]
    fn frequency_priority_and_chunk_bijectivity() {
        let model = vocab(60);
        let counts: Vec<u64> = (0..model.vocab_size() as u64)
            .map(|i| (i * 7919) % 13)
            .collect();
        let freqs = FrequencyTable::from_counts(counts);
        let mut db = SynonymDb::new();
        db.add_synset(&["w1", "w2", "w3", "w4", "w5", "w6"]);
        db.add_synset(&["w6", "w7", "w8"]);
        let (f, log) = build_sabins_logged(&model, &freqs, &db, 2, &key("k")).unwrap();
        for pair in log.order.windows(2) {
            assert!(freqs.count(pair[0]) >= freqs.count(pair[1]));
        }
        for chunk in &log.chunks {
            let mut bins: Vec<u32> = chunk.iter().map(|&(_, b)| b).collect();
            bins.sort_unstable();
            bins.dedup();
            assert_eq!(bins.len(), chunk.len());
            for &(t, b) in chunk {
                assert_eq!(f.slot(t), Slot::Bin(b));
            }
        }
        let assigned: usize = log.chunks.iter().map(Vec::len).sum();
        assert_eq!(assigned, model.vocab_size() - 2);
    }
}
