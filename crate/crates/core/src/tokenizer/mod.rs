//! Deterministic BPE subword tokenization.
//!
//! Segmentation follows the classic subword-nmt layout: words are split on
//! whitespace, each word becomes a character sequence whose last symbol carries
//! an end-of-word tag, and merge rules are applied lowest-rank first. Emitted
//! tokens that do not end a word carry a trailing continuation marker (`@@` by
//! default), so a token sequence can be turned back into text without any
//! side table:
//!
//! ```text
//! "lowest"  ->  ["low@@", "est"]  ->  "lowest"
//! ```
//!
//! Two reserved tokens always exist: `<eos>` (id 0) and `<unk>` (id 1).
//! A word-level mode skips merging entirely and treats each whitespace
//! separated word as a token.

mod freq;
mod lexicon;

pub use freq::FrequencyTable;
pub use lexicon::{Lexicon, LexiconNode};

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Dense token identifier, `0..vocab_size`.
pub type TokenId = u32;

pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";
pub const EOS_ID: TokenId = 0;
pub const UNK_ID: TokenId = 1;
pub const DEFAULT_MARKER: &str = "@@";

/// Internal end-of-word tag appended to the last symbol of a word while merging.
const END_OF_WORD: &str = "</w>";
const FILE_MAGIC: &str = "bpe-v1";
const VOCAB_SENTINEL: &str = "#vocab";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("corpus contains no words")]
    EmptyCorpus,
    #[error("character {0:?} is outside the model alphabet")]
    UnrepresentableInput(char),
    #[error("word {0:?} is not in the word-level vocabulary")]
    UnknownWord(String),
    #[error("token id {0} is out of range")]
    UnknownTokenId(TokenId),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How characters (or words, in word-level mode) missing from the model are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnknownPolicy {
    /// Fail with [`TokenizerError::UnrepresentableInput`].
    Strict,
    /// Emit `<unk>` in place of the unknown unit.
    MapToUnk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    Subword,
    Word,
}

#[derive(Clone, Debug)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
    marker: String,
    granularity: Granularity,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges
            && self.vocab == other.vocab
            && self.marker == other.marker
            && self.granularity == other.granularity
    }
}

impl Eq for BpeModel {}

impl BpeModel {
    /// Learns `num_merges` merge rules from whitespace-split corpus lines.
    ///
    /// Each round merges the most frequent adjacent symbol pair; equal counts
    /// go to the lexicographically smallest `(left, right)` pair. Training
    /// stops early when every word has collapsed to a single symbol. Words
    /// spelling a reserved token are ignored.
    pub fn train<S: AsRef<str>>(corpus: &[S], num_merges: usize) -> Result<Self, TokenizerError> {
        Self::train_with_marker(corpus, num_merges, DEFAULT_MARKER)
    }

    pub fn train_with_marker<S: AsRef<str>>(
        corpus: &[S],
        num_merges: usize,
        marker: &str,
    ) -> Result<Self, TokenizerError> {
        let counts = word_counts(corpus);
        if counts.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }

        let mut alphabet: Vec<char> = counts.keys().flat_map(|w| w.chars()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();

        let mut words: Vec<(Vec<String>, u64)> = counts
            .into_iter()
            .map(|(w, c)| (initial_symbols(&w), c))
            .collect();

        let mut merges = Vec::new();
        while merges.len() < num_merges {
            let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
            for (symbols, count) in &words {
                for pair in symbols.windows(2) {
                    *pairs
                        .entry((pair[0].as_str(), pair[1].as_str()))
                        .or_default() += count;
                }
            }
            // BTreeMap iterates pairs in lexicographic order, so the first maximum wins ties.
            let mut best: Option<((&str, &str), u64)> = None;
            for (pair, count) in pairs {
                if best.is_none_or(|(_, c)| count > c) {
                    best = Some((pair, count));
                }
            }
            let Some(((left, right), _)) = best else {
                break;
            };
            let (left, right) = (left.to_owned(), right.to_owned());
            for (symbols, _) in &mut words {
                merge_pair(symbols, &left, &right);
            }
            merges.push((left, right));
        }

        let mut vocab = vec![EOS_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        for c in &alphabet {
            vocab.push(format!("{c}{marker}"));
            vocab.push(c.to_string());
        }
        for (left, right) in &merges {
            vocab.push(symbol_to_token(&format!("{left}{right}"), marker));
        }
        Ok(Self::assemble(
            merges,
            vocab,
            marker.to_owned(),
            Granularity::Subword,
        ))
    }

    /// Word-level model: every distinct corpus word becomes one token.
    pub fn train_word_level<S: AsRef<str>>(corpus: &[S]) -> Result<Self, TokenizerError> {
        let counts = word_counts(corpus);
        if counts.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        let mut vocab = vec![EOS_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        vocab.extend(counts.into_keys());
        Ok(Self::assemble(
            Vec::new(),
            vocab,
            DEFAULT_MARKER.to_owned(),
            Granularity::Word,
        ))
    }

    /// Word-level model over an explicit word list, in the given order.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut vocab = vec![EOS_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        for w in words {
            let w = w.as_ref();
            if !vocab.iter().any(|v| v == w) {
                vocab.push(w.to_owned());
            }
        }
        Self::assemble(
            Vec::new(),
            vocab,
            DEFAULT_MARKER.to_owned(),
            Granularity::Word,
        )
    }

    fn assemble(
        merges: Vec<(String, String)>,
        vocab: Vec<String>,
        marker: String,
        granularity: Granularity,
    ) -> Self {
        let mut dedup = Vec::with_capacity(vocab.len());
        let mut index = HashMap::with_capacity(vocab.len());
        for token in vocab {
            if !index.contains_key(&token) {
                index.insert(token.clone(), dedup.len() as TokenId);
                dedup.push(token);
            }
        }
        let ranks = merges
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();
        Self {
            merges,
            ranks,
            vocab: dedup,
            index,
            marker,
            granularity,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// True for `<eos>` and `<unk>`.
    pub fn is_special(&self, id: TokenId) -> bool {
        id == EOS_ID || id == UNK_ID
    }

    /// True when the token is a non-final piece of a word.
    pub fn is_continuation(&self, id: TokenId) -> bool {
        self.granularity == Granularity::Subword
            && !self.is_special(id)
            && self
                .token(id)
                .is_some_and(|t| t.ends_with(self.marker.as_str()))
    }

    /// Surface form of a token with any continuation marker removed.
    pub fn surface(&self, id: TokenId) -> Option<&str> {
        let token = self.token(id)?;
        if self.is_continuation(id) {
            token.strip_suffix(self.marker.as_str())
        } else {
            Some(token)
        }
    }

    /// Strict encoding: unknown characters are an error.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        self.encode_with(text, UnknownPolicy::Strict)
    }

    /// Encoding that substitutes `<unk>` for anything the model cannot represent.
    pub fn encode_lossy(&self, text: &str) -> Vec<TokenId> {
        self.encode_with(text, UnknownPolicy::MapToUnk)
            .expect("lossy encoding never fails")
    }

    pub fn encode_with(
        &self,
        text: &str,
        policy: UnknownPolicy,
    ) -> Result<Vec<TokenId>, TokenizerError> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            self.encode_word(word, policy, &mut out)?;
        }
        Ok(out)
    }

    fn encode_word(
        &self,
        word: &str,
        policy: UnknownPolicy,
        out: &mut Vec<TokenId>,
    ) -> Result<(), TokenizerError> {
        if self.granularity == Granularity::Word {
            match (self.index.get(word), policy) {
                (Some(&id), _) if !self.is_special(id) => out.push(id),
                (_, UnknownPolicy::MapToUnk) => out.push(UNK_ID),
                (_, UnknownPolicy::Strict) => {
                    return Err(TokenizerError::UnknownWord(word.to_owned()))
                }
            }
            return Ok(());
        }

        let mut symbols = initial_symbols(word);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            merge_pair(&mut symbols, left, right);
        }

        for symbol in &symbols {
            let token = symbol_to_token(symbol, &self.marker);
            match self.index.get(&token) {
                Some(&id) if !self.is_special(id) => out.push(id),
                _ => match policy {
                    UnknownPolicy::MapToUnk => out.push(UNK_ID),
                    UnknownPolicy::Strict => {
                        let bad = symbol
                            .chars()
                            .find(|c| !self.index.contains_key(&c.to_string()))
                            .unwrap_or('\u{fffd}');
                        return Err(TokenizerError::UnrepresentableInput(bad));
                    }
                },
            }
        }
        Ok(())
    }

    /// Joins tokens back into text. `<eos>` is dropped; word-final tokens are
    /// followed by a single space, continuation pieces are glued to the next
    /// token.
    pub fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizerError> {
        let mut text = String::new();
        for &id in tokens {
            if id == EOS_ID {
                continue;
            }
            let surface = self.surface(id).ok_or(TokenizerError::UnknownTokenId(id))?;
            text.push_str(surface);
            if !self.is_continuation(id) {
                text.push(' ');
            }
        }
        if text.ends_with(' ') {
            text.pop();
        }
        Ok(text)
    }

    /// Token counts over the lossy encoding of `corpus`.
    pub fn count_frequencies<S: AsRef<str>>(&self, corpus: &[S]) -> FrequencyTable {
        let mut counts = vec![0u64; self.vocab_size()];
        for line in corpus {
            for id in self.encode_lossy(line.as_ref()) {
                counts[id as usize] += 1;
            }
        }
        FrequencyTable::from_counts(counts)
    }

    /// SHA-256 over the vocabulary strings in id order, newline separated.
    /// Used to check that a remote provider serves the same vocabulary.
    pub fn vocab_hash(&self) -> String {
        crate::vocab_hash(&self.vocab)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FILE_MAGIC} marker={}", self.marker);
        if self.granularity == Granularity::Word {
            out.push_str(" mode=word");
        }
        out.push('\n');
        for (left, right) in &self.merges {
            let _ = writeln!(out, "{left}\t{right}");
        }
        out.push_str(VOCAB_SENTINEL);
        out.push('\n');
        for (id, token) in self.vocab.iter().enumerate() {
            let _ = writeln!(out, "{token}\t{id}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TokenizerError> {
        let parse = |line: usize, msg: &str| TokenizerError::Parse {
            line,
            msg: msg.to_owned(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (_, header) = lines.next().ok_or_else(|| parse(1, "empty model file"))?;
        let mut fields = header.split(' ');
        if fields.next() != Some(FILE_MAGIC) {
            return Err(parse(1, "missing bpe-v1 header"));
        }
        let mut marker = None;
        let mut granularity = Granularity::Subword;
        for field in fields {
            match field.split_once('=') {
                Some(("marker", m)) if !m.is_empty() => marker = Some(m.to_owned()),
                Some(("mode", "word")) => granularity = Granularity::Word,
                Some(("mode", "subword")) => granularity = Granularity::Subword,
                _ => return Err(parse(1, &format!("unrecognized header field {field:?}"))),
            }
        }
        let marker = marker.ok_or_else(|| parse(1, "header lacks marker="))?;

        let mut merges = Vec::new();
        let mut saw_sentinel = false;
        for (n, line) in lines.by_ref() {
            if line == VOCAB_SENTINEL {
                saw_sentinel = true;
                break;
            }
            let (left, right) = line
                .split_once('\t')
                .ok_or_else(|| parse(n, "merge rule needs <left>\\t<right>"))?;
            if left.is_empty() || right.is_empty() || right.contains('\t') {
                return Err(parse(n, "malformed merge rule"));
            }
            merges.push((left.to_owned(), right.to_owned()));
        }
        if !saw_sentinel {
            return Err(parse(text.lines().count(), "missing #vocab section"));
        }

        let mut vocab = Vec::new();
        for (n, line) in lines {
            let (token, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse(n, "vocab line needs <token>\\t<id>"))?;
            let id: usize = id
                .parse()
                .map_err(|_| parse(n, "token id is not an integer"))?;
            if id != vocab.len() {
                return Err(parse(n, "token ids must be dense and in order"));
            }
            if token.is_empty() || vocab.iter().any(|t: &String| t == token) {
                return Err(parse(n, "empty or duplicate token"));
            }
            vocab.push(token.to_owned());
        }
        if vocab.get(EOS_ID as usize).map(String::as_str) != Some(EOS_TOKEN)
            || vocab.get(UNK_ID as usize).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(parse(0, "vocab must start with <eos> and <unk>"));
        }
        Ok(Self::assemble(merges, vocab, marker, granularity))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn word_counts<S: AsRef<str>>(corpus: &[S]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for line in corpus {
        for word in line.as_ref().split_whitespace() {
            if word == EOS_TOKEN || word == UNK_TOKEN {
                continue;
            }
            *counts.entry(word.to_owned()).or_default() += 1;
        }
    }
    counts
}

fn initial_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

/// Merges every non-overlapping occurrence of `(left, right)`, scanning left to right.
fn merge_pair(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{left}{right}");
            symbols[i] = merged;
            symbols.remove(i + 1);
        }
        i += 1;
    }
}

fn symbol_to_token(symbol: &str, marker: &str) -> String {
    match symbol.strip_suffix(END_OF_WORD) {
        Some(word_final) => word_final.to_owned(),
        None => format!("{symbol}{marker}"),
    }
}
